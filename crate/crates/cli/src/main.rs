//! `circle-displace`: batch front end. Every subcommand writes one CSV table
//! or JSON document to `--out` (stdout by default). Failures print
//! `{"error":{"code":..,"message":..}}` on stderr and exit nonzero.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use circle_displace::ifm::{FiringModel, FiringModelSpec};
use circle_displace::maps::{Lift, MapSpec};
use circle_displace::measures::{
    self, clustered_grid, concentration_interval, density_profile, displacement_pushforward, distribution_mean,
    empirical_conjugacy, fortet_mourier, sample_displacement_distribution, ConjugacySource, EmpiricalMeasure,
    IntervalSet,
};
use circle_displace::orbits::{self, Direction, RotationOptions};
use circle_displace::rational::{self, PeriodicKind, PeriodicStructure};
use circle_displace::report::{measure_table, read_measure, Cell, Table};
use circle_displace::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

const THREADS_ENV: &str = "CIRCLE_DISPLACE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "circle-displace",
    version,
    about = "Displacement sequences of circle homeomorphisms"
)]
struct Cli {
    /// Output file; stdout when absent.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    /// Seed for any randomized step; echoed in provenance.
    #[arg(long, global = true, default_value_t = 0)]
    rng_seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Serialize)]
struct MapArgs {
    /// Map as JSON, shorthand (`arnold:0.25,0.9`) or `@file.json`.
    #[arg(long)]
    map: String,
}

#[derive(Debug, Args, Serialize)]
struct ModelArgs {
    /// Firing model as JSON or `@file.json`.
    #[arg(long)]
    model: String,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Source {
    Exact,
    Estimated,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Orbit points as (n, frac, winding).
    Orbit {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        backward: bool,
    },
    /// Rotation number estimate and classification (JSON).
    Rotnum {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        q_max: u64,
    },
    /// Displacement series as (n, eta).
    Disp {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        backward: bool,
    },
    /// Periodic points and basin intervals (JSON).
    Periodic {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
        /// Period; classified from the rotation number when absent.
        #[arg(long, requires = "p")]
        q: Option<u64>,
        #[arg(long, requires = "q", allow_hyphen_values = true)]
        p: Option<i64>,
    },
    /// ε-basins-shreds as (eps, interval, m_tilde, a, b, shred, plateau).
    Shred {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Also write (eps, interval, z, tau_plus, tau_minus) at m = m̃ here.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        profile_grid: usize,
    },
    /// Universal iteration bound N (JSON).
    UniversalN {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
        #[arg(long)]
        eps: f64,
    },
    /// Concentration interval of the displacements (JSON).
    Conc {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
    },
    /// Empirical conjugacy as (x, gamma_hat).
    Conj {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        grid: usize,
    },
    /// Displacement distribution Ω_*Λ as (atom, weight).
    Pushforward {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 100_000)]
        m: usize,
        #[arg(long, value_enum, default_value_t = Source::Exact)]
        source: Source,
        /// Orbit seed and length for `--source estimated`.
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long, default_value_t = 1_000_000)]
        n_samples: usize,
        #[arg(long, default_value_t = 4096)]
        conj_grid: usize,
        /// JSON summary (mean, support, size).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Density Δ(y) over the concentration interval as (y, density).
    Density {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 1000)]
        grid: usize,
        /// Cosine-spaced grid, dense at the support ends.
        #[arg(long)]
        clustered: bool,
        /// JSON summary (integral, excluded critical values, support).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Empirical displacement distribution of an orbit as (atom, weight).
    Sample {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long)]
        n: usize,
        /// Iterates discarded first.
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
        /// JSON summary (mean, support, d_F to the pushforward when exact).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Fortet–Mourier distance between two measure CSVs.
    Wass {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Frequency of displacements in a union of arcs (JSON).
    Birkhoff {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long)]
        n: usize,
        /// Arc `lo:hi` in [0, 1]; repeatable, wraps when lo > hi.
        #[arg(long = "arc", required = true)]
        arcs: Vec<String>,
    },
    /// d_F between long-run displacement distributions of two maps (JSON).
    Stability {
        #[command(flatten)]
        #[serde(flatten)]
        map: MapArgs,
        #[arg(long)]
        perturbed: String,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
    },
    /// Firing map on a grid of reset times as (t, firing_time).
    Ifm {
        #[command(flatten)]
        #[serde(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// Interspike intervals as (n, isi_mod1, isi_true).
    Isi {
        #[command(flatten)]
        #[serde(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long)]
        n: usize,
        /// Also write the ISI distribution as (atom, weight) here.
        #[arg(long)]
        measure: Option<PathBuf>,
    },
}

enum Output {
    Table(Table),
    Json(Value),
    Text(String),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            report_error("E_USAGE", &e.to_string());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = configure_threads() {
        report_error(e.code(), &e.to_string());
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.code(), &e.to_string());
            ExitCode::from(1)
        }
    }
}

fn report_error(code: &str, message: &str) {
    let doc = json!({"error": {"code": code, "message": message.trim_end()}});
    eprintln!("{doc}");
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Parse(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Io(e.to_string()))
}

fn read_arg(s: &str) -> Result<String> {
    match s.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}"))),
        None => Ok(s.to_string()),
    }
}

fn parse_map(s: &str) -> Result<MapSpec> {
    read_arg(s)?.parse()
}

fn parse_model(s: &str) -> Result<FiringModelSpec> {
    serde_json::from_str(&read_arg(s)?).map_err(|e| Error::Parse(e.to_string()))
}

/// The config echo: the subcommand with its arguments, map and model
/// arguments replaced by their parsed form.
fn provenance(cli: &Cli) -> Result<String> {
    let mut doc = serde_json::to_value(&cli.command).map_err(|e| Error::Parse(e.to_string()))?;
    if let Value::Object(fields) = &mut doc {
        for key in ["map", "perturbed"] {
            if let Some(Value::String(s)) = fields.get(key) {
                let spec = serde_json::to_value(parse_map(s)?).map_err(|e| Error::Parse(e.to_string()))?;
                fields.insert(key.to_string(), spec);
            }
        }
        if let Some(Value::String(s)) = fields.get("model") {
            let spec = serde_json::to_value(parse_model(s)?).map_err(|e| Error::Parse(e.to_string()))?;
            fields.insert("model".to_string(), spec);
        }
        fields.insert("rng_seed".to_string(), json!(cli.rng_seed));
    }
    Ok(format!("circle-displace {} {doc}", env!("CARGO_PKG_VERSION")))
}

fn run(cli: &Cli) -> Result<()> {
    let prov = provenance(cli)?;
    let output = execute(&cli.command, &prov)?;
    let text = match output {
        Output::Table(t) => t.render(),
        Output::Json(v) => json_text(&v),
        Output::Text(s) => s + "\n",
    };
    match &cli.out {
        Some(path) => write_file(path, &text),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io(e.to_string())),
    }
}

fn json_text(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn to_json(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn positive(name: &'static str, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name,
            reason: "must be positive".into(),
        });
    }
    Ok(n)
}

fn unit_eps(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("{eps} is not in (0, 1)"),
        });
    }
    Ok(eps)
}

fn build(map: &MapArgs) -> Result<Lift> {
    parse_map(&map.map)?.build()
}

fn exact_conjugacy(lift: &Lift) -> Result<circle_displace::maps::Conjugacy> {
    lift.conjugacy().ok_or(Error::MissingConjugacy)
}

fn periodic_structure(lift: &Lift, q: Option<u64>, p: Option<i64>) -> Result<PeriodicStructure> {
    let (p, q) = match (p, q) {
        (Some(p), Some(q)) => (p, q),
        _ => {
            let est = orbits::rotation_number(lift, 0.0, rational::CLASSIFY_ITERATES)?;
            est.pq().ok_or(Error::IrrationalRotation { value: est.value })?
        }
    };
    rational::find_periodic_points(lift, q, p)
}

fn summary_of(mu: &EmpiricalMeasure) -> Value {
    json!({
        "mean": distribution_mean(mu),
        "support": [mu.min_atom(), mu.max_atom()],
        "atoms": mu.len(),
    })
}

fn parse_arc(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("arc `{s}` is not of the form lo:hi")))?;
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("`{t}` is not a number")))
    };
    Ok((num(lo)?, num(hi)?))
}

fn execute(cmd: &Command, prov: &str) -> Result<Output> {
    match cmd {
        Command::Orbit { map, x0, n, backward } => {
            let lift = build(map)?;
            let dir = if *backward {
                Direction::Backward
            } else {
                Direction::Forward
            };
            let orbit = orbits::iterate(&lift, *x0, *n, dir)?;
            let mut t = Table::new(prov, &["n", "frac", "winding"]);
            for (k, p) in orbit.points.iter().enumerate() {
                let idx = if *backward { -(k as i64) } else { k as i64 };
                t.push(vec![idx.into(), p.frac.into(), p.winding.into()]);
            }
            Ok(Output::Table(t))
        }
        Command::Rotnum { map, x0, n, q_max } => {
            let lift = build(map)?;
            let opts = RotationOptions {
                q_max: *q_max,
                ..RotationOptions::default()
            };
            let est = orbits::rotation_number_with(&lift, *x0, positive("n", *n)?, &opts)?;
            Ok(Output::Json(to_json(est)))
        }
        Command::Disp { map, x0, n, backward } => {
            let lift = build(map)?;
            let dir = if *backward {
                Direction::Backward
            } else {
                Direction::Forward
            };
            let d = orbits::displacement_sequence_dir(&lift, *x0, positive("n", *n)?, dir)?;
            let mut t = Table::new(prov, &["n", "eta"]);
            for (k, &eta) in d.values.iter().enumerate() {
                let idx = if *backward { -(k as i64) } else { k as i64 + 1 };
                t.push(vec![idx.into(), eta.into()]);
            }
            Ok(Output::Table(t))
        }
        Command::Periodic { map, q, p } => {
            let lift = build(map)?;
            let ps = periodic_structure(&lift, *q, *p)?;
            Ok(Output::Json(json!({
                "q": ps.q,
                "p": ps.p,
                "kind": ps.kind,
                "points": ps.points,
                "intervals": ps.intervals().iter().map(|iv| json!({
                    "lower": iv.lower,
                    "upper": iv.upper,
                    "attracting": iv.attracting,
                    "z_plus": iv.z_plus(),
                    "z_minus": iv.z_minus(),
                })).collect::<Vec<_>>(),
            })))
        }
        Command::Shred {
            map,
            eps,
            profile,
            profile_grid,
        } => {
            let lift = build(map)?;
            for &e in eps {
                unit_eps(e)?;
            }
            let ps = periodic_structure(&lift, None, None)?;
            if ps.kind != PeriodicKind::Isolated {
                return Err(Error::InvalidParameter {
                    name: "map",
                    reason: "every point is periodic; there are no basins to split".into(),
                });
            }
            let mut t = Table::new(prov, &["eps", "interval", "m_tilde", "a", "b", "shred", "plateau"]);
            let mut prof = Table::new(prov, &["eps", "interval", "z", "tau_plus", "tau_minus"]);
            for &e in eps {
                let shreds = rational::compute_shreds(&lift, &ps, e)?;
                for (k, s) in shreds.iter().enumerate() {
                    t.push(vec![
                        e.into(),
                        k.into(),
                        s.m_tilde.into(),
                        s.a.into(),
                        s.b.into(),
                        s.shred.into(),
                        s.plateau.into(),
                    ]);
                    if profile.is_some() {
                        let rows = rational::tau_profile(&lift, &ps, &s.interval, s.m_tilde, *profile_grid)?;
                        for (z, tp, tm) in rows {
                            prof.push(vec![e.into(), k.into(), z.into(), tp.into(), tm.into()]);
                        }
                    }
                }
            }
            if let Some(path) = profile {
                write_file(path, &prof.render())?;
            }
            Ok(Output::Table(t))
        }
        Command::UniversalN { map, eps } => {
            let lift = build(map)?;
            let eps = unit_eps(*eps)?;
            let ps = periodic_structure(&lift, None, None)?;
            let n = rational::universal_n_for(&lift, &ps, eps)?;
            Ok(Output::Json(
                json!({"eps": eps, "q": ps.q, "p": ps.p, "kind": ps.kind, "n": n}),
            ))
        }
        Command::Conc { map } => {
            let lift = build(map)?;
            let ci = concentration_interval(&lift)?;
            Ok(Output::Json(json!({"lo": ci.lo, "hi": ci.hi, "width": ci.width()})))
        }
        Command::Conj { map, x0, n, grid } => {
            let lift = build(map)?;
            let est = empirical_conjugacy(&lift, *x0, *n, positive("grid", *grid)?)?;
            let mut t = Table::new(prov, &["x", "gamma_hat"]);
            for (&x, &g) in est.grid.iter().zip(&est.gamma_hat) {
                t.push(vec![x.into(), g.into()]);
            }
            Ok(Output::Table(t))
        }
        Command::Pushforward {
            map,
            m,
            source,
            x0,
            n_samples,
            conj_grid,
            summary,
        } => {
            let lift = build(map)?;
            let m = positive("m", *m)?;
            let mu = match source {
                Source::Exact => displacement_pushforward(&lift, ConjugacySource::Exact, m)?,
                Source::Estimated => {
                    let est = empirical_conjugacy(&lift, *x0, *n_samples, positive("conj_grid", *conj_grid)?)?;
                    displacement_pushforward(&lift, ConjugacySource::Estimated(&est), m)?
                }
            };
            if let Some(path) = summary {
                write_file(path, &json_text(&summary_of(&mu)))?;
            }
            Ok(Output::Table(measure_table(&mu, prov)))
        }
        Command::Density {
            map,
            grid,
            clustered,
            summary,
        } => {
            let lift = build(map)?;
            let n = positive("grid", *grid)?;
            if lift.is_rotation() {
                // the pushforward of a rotation is a point mass
                return Err(Error::SingularDistribution(
                    "the displacement distribution of a rotation is a Dirac mass".into(),
                ));
            }
            let conj = exact_conjugacy(&lift)?;
            let ci = concentration_interval(&lift)?;
            let ys = if *clustered {
                clustered_grid(ci.lo, ci.hi, n)
            } else {
                (0..=n).map(|j| ci.lo + ci.width() * j as f64 / n as f64).collect()
            };
            let prof = density_profile(&lift, &conj, &ys)?;
            let mut t = Table::new(prov, &["y", "density"]);
            for (&y, &d) in prof.grid.iter().zip(&prof.density) {
                t.push(vec![y.into(), d.into()]);
            }
            if let Some(path) = summary {
                let doc = json!({
                    "integral": prof.integral(),
                    "support": [prof.support.lo, prof.support.hi],
                    "excluded": prof.excluded,
                    "singular_points": prof.singular.iter().filter(|&&s| s).count(),
                    "analytic_derivative": prof.analytic_derivative,
                });
                write_file(path, &json_text(&doc))?;
            }
            Ok(Output::Table(t))
        }
        Command::Sample {
            map,
            x0,
            n,
            burn_in,
            summary,
        } => {
            let lift = build(map)?;
            let start = orbits::iterate_point(&lift, *x0, *burn_in, Direction::Forward)?;
            let mu = sample_displacement_distribution(&lift, start, positive("n", *n)?)?;
            if let Some(path) = summary {
                let mut doc = summary_of(&mu);
                if lift.conjugacy().is_some() && !lift.is_rotation() {
                    let reference = displacement_pushforward(&lift, ConjugacySource::Exact, 100_000)?;
                    doc["d_f_to_pushforward"] = json!(fortet_mourier(&mu, &reference)?);
                }
                write_file(path, &json_text(&doc))?;
            }
            Ok(Output::Table(measure_table(&mu, prov)))
        }
        Command::Wass { a, b } => {
            let open = |p: &PathBuf| fs::File::open(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())));
            let mu = read_measure(open(a)?)?;
            let nu = read_measure(open(b)?)?;
            Ok(Output::Text(format_scalar(fortet_mourier(&mu, &nu)?)))
        }
        Command::Birkhoff { map, x0, n, arcs } => {
            let lift = build(map)?;
            let arcs: Vec<(f64, f64)> = arcs.iter().map(|s| parse_arc(s)).collect::<Result<_>>()?;
            let set = IntervalSet::new(&arcs)?;
            let freq = measures::birkhoff_frequency(&lift, *x0, positive("n", *n)?, &set)?;
            let mut doc = json!({"frequency": freq, "arcs": arcs, "n": n});
            if lift.conjugacy().is_some() && !lift.is_rotation() {
                let mu = displacement_pushforward(&lift, ConjugacySource::Exact, 100_000)?;
                doc["pushforward_mass"] = json!(mu.mass_in(&set));
            }
            Ok(Output::Json(doc))
        }
        Command::Stability { map, perturbed, x0, n } => {
            let lift = build(map)?;
            let other = parse_map(perturbed)?.build()?;
            let r = measures::stability_check(&lift, &other, *x0, positive("n", *n)?)?;
            Ok(Output::Json(to_json(r)))
        }
        Command::Ifm { model, grid } => {
            let model = FiringModel::from_spec(&parse_model(&model.model)?)?;
            let n = positive("grid", *grid)?;
            let mut t = Table::new(prov, &["t", "firing_time"]);
            for j in 0..=n {
                let s = j as f64 / n as f64;
                t.push(vec![s.into(), model.firing_time(s)?.into()]);
            }
            Ok(Output::Table(t))
        }
        Command::Isi { model, t0, n, measure } => {
            let model = FiringModel::from_spec(&parse_model(&model.model)?)?;
            let d = circle_displace::ifm::isi_sequence(&model, *t0, positive("n", *n)?)?;
            let mut t = Table::new(prov, &["n", "isi_mod1", "isi_true"]);
            for (k, (&eta, &raw)) in d.values.iter().zip(&d.raw).enumerate() {
                let isi = raw + d.lift_offset as f64;
                t.push(vec![Cell::from(k + 1), eta.into(), isi.into()]);
            }
            if let Some(path) = measure {
                let mu = EmpiricalMeasure::uniform(&d.values)?;
                write_file(path, &measure_table(&mu, prov).render())?;
            }
            Ok(Output::Table(t))
        }
    }
}

/// Shortest decimal form of `x` rounded to 15 significant digits.
fn format_scalar(x: f64) -> String {
    let rounded: f64 = format!("{x:.14e}").parse().expect("formatted float parses");
    rounded.to_string()
}
