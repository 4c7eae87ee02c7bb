//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p circle-displace --test acceptance`.

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use circle_displace::ifm::{isi_sequence, FiringKind, FiringModel, FiringModelSpec};
use circle_displace::maps::{make_perturbed, make_sine_perturb, MapSpec, UnitGraph};
use circle_displace::measures::{
    clustered_grid, concentration_interval, density_profile, displacement_pushforward, distribution_mean,
    fortet_mourier, sample_displacement_distribution, stability_check, ConjugacySource, EmpiricalMeasure,
};
use circle_displace::numerics::mod1;
use circle_displace::orbits::{
    displacement_sequence, displacement_sequence_dir, recurrence_gap_bound, rotation_number, Direction,
};
use circle_displace::rational::{
    compute_shred, find_periodic_points, universal_n, verify_asymptotic_periodicity, verify_forward_backward,
};
use circle_displace::{make_arnold, make_conjugated, make_rotation, make_unit_graph, Error, Lift};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

fn conjugated_sine() -> Lift {
    make_conjugated(make_sine_perturb(0.5).unwrap(), golden()).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

fn rotation_constancy() -> Outcome {
    for rho in [0.3, golden()] {
        let lift = make_rotation(rho).map_err(err)?;
        for x0 in [0.0, 0.1, 0.77, -3.4] {
            for dir in [Direction::Forward, Direction::Backward] {
                let d = displacement_sequence_dir(&lift, x0, 10_000, dir).map_err(err)?;
                if let Some(k) = d.values.iter().position(|&v| v.to_bits() != rho.to_bits()) {
                    return Err(format!("rho {rho}, x0 {x0}, {dir:?}: eta[{k}] = {:e}", d.values[k]));
                }
            }
        }
    }
    Ok("eta equals rho bit for bit for 16 series of 10^4".into())
}

fn rational_periodicity() -> Outcome {
    let lift = make_arnold(0.5, 0.9).map_err(err)?;
    let est = rotation_number(&lift, 0.1, 100_000).map_err(err)?;
    let (p, q) = est
        .pq()
        .ok_or_else(|| format!("not mode-locked: rho ≈ {}", est.value))?;
    let d = displacement_sequence(&lift, 0.1, 100_000).map_err(err)?;
    let ok = verify_asymptotic_periodicity(&d, q, 1e-8, 10_000).map_err(err)?;
    ensure(ok, || format!("series not {q}-periodic within 1e-8"))?;
    Ok(format!("arnold(0.5, 0.9) locked at {p}/{q}, tail periodic within 1e-8"))
}

/// `z̃` for a unit-graph map with fixed points 0 (attracting) and 1, by
/// direct iteration of `h` and `h⁻¹`: `τ⁺_m(z) = hᵐ(z)`, `τ⁻_m(z) = 1 − h⁻ᵐ(z)`.
fn shred_oracle(h: impl Fn(f64) -> f64, hinv: impl Fn(f64) -> f64, eps: f64) -> (usize, f64) {
    let pow = |f: &dyn Fn(f64) -> f64, m: usize, mut x: f64| {
        for _ in 0..m {
            x = f(x);
        }
        x
    };
    let mut m = 0;
    loop {
        // U⁺ = [0, h⁻ᵐ(ε)), U⁻ = (hᵐ(1 − ε), 1]
        if pow(&h, m, 1.0 - eps) < pow(&hinv, m, eps) {
            let f = |z: f64| pow(&h, m, z) - (1.0 - pow(&hinv, m, z));
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return (m, 0.5 * (lo + hi));
        }
        m += 1;
    }
}

fn shred_trends() -> Outcome {
    let eps_grid = [0.5, 0.1, 0.01, 0.001];
    let mut report = Vec::new();
    for (graph, increasing) in [(UnitGraph::x_squared(), true), (UnitGraph::arcsin_scaled(), false)] {
        let name = graph.name().to_string();
        let lift = make_unit_graph(graph).map_err(err)?;
        let ps = find_periodic_points(&lift, 1, 0).map_err(err)?;
        let iv = *ps.intervals().first().ok_or("no basin interval")?;
        let mut shreds = Vec::new();
        for eps in eps_grid {
            let r = compute_shred(&lift, &ps, &iv, eps).map_err(err)?;
            let (m, z) = if increasing {
                shred_oracle(|x| x * x, f64::sqrt, eps)
            } else {
                shred_oracle(|x| (2.0 / PI) * x.asin(), |y| (0.5 * PI * y).sin(), eps)
            };
            ensure(r.m_tilde == m, || {
                format!("{name} eps {eps}: m̃ {} vs oracle {m}", r.m_tilde)
            })?;
            ensure((r.shred - z).abs() < 1e-9, || {
                format!("{name} eps {eps}: shred {} vs oracle {z}", r.shred)
            })?;
            shreds.push(r.shred);
        }
        let monotone = shreds
            .windows(2)
            .all(|w| if increasing { w[0] < w[1] } else { w[0] > w[1] });
        ensure(monotone, || format!("{name}: shreds {shreds:?} not strictly monotone"))?;
        report.push(format!("{name} {:.4}..{:.4}", shreds[0], shreds[3]));
    }
    Ok(format!("{} (oracle within 1e-9)", report.join(", ")))
}

fn universal_n_soundness() -> Outcome {
    let lift = make_unit_graph(UnitGraph::x_squared()).map_err(err)?;
    let eps = 0.1;
    let n = universal_n(&lift, eps).map_err(err)?;
    let ps = find_periodic_points(&lift, 1, 0).map_err(err)?;
    let violations: Vec<f64> = (0..1000)
        .map(|j| (j as f64 + 0.5) / 1000.0)
        .filter(|&x0| verify_forward_backward(&lift, &ps, x0, eps, n).is_err())
        .collect();
    ensure(violations.is_empty(), || {
        format!(
            "{} violations at N = {n}, first x0 = {}",
            violations.len(),
            violations[0]
        )
    })?;
    Ok(format!("N = {n}, 1000 points, 0 violations"))
}

fn concentration() -> Outcome {
    let (omega, k) = (0.618, 0.5);
    let lift = make_arnold(omega, k).map_err(err)?;
    let (lo, hi) = (omega - k / TAU, omega + k / TAU);
    let d = displacement_sequence(&lift, 0.1, 100_000).map_err(err)?;
    let min = d.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure((min - lo).abs() < 1e-3 && (max - hi).abs() < 1e-3, || {
        format!("empirical [{min}, {max}] vs [{lo}, {hi}]")
    })?;
    let ci = concentration_interval(&lift).map_err(err)?;
    ensure((ci.lo - lo).abs() < 1e-9 && (ci.hi - hi).abs() < 1e-9, || {
        format!("computed interval [{}, {}] vs [{lo}, {hi}]", ci.lo, ci.hi)
    })?;
    Ok(format!("empirical [{min:.6}, {max:.6}] vs [{lo:.6}, {hi:.6}]"))
}

fn pushforward_agreement() -> Outcome {
    let lift = conjugated_sine();
    let push = displacement_pushforward(&lift, ConjugacySource::Exact, 1_000_000).map_err(err)?;
    let mut ds = Vec::new();
    for n in [1_000, 10_000, 100_000] {
        let sample = sample_displacement_distribution(&lift, 0.1, n).map_err(err)?;
        ds.push(fortet_mourier(&sample, &push).map_err(err)?);
    }
    ensure(ds.windows(2).all(|w| w[1] <= w[0]), || {
        format!("d_F not non-increasing: {ds:?}")
    })?;
    ensure(ds[2] < 0.01, || format!("d_F at n = 10^5 is {}", ds[2]))?;
    Ok(format!("d_F = {:.2e}, {:.2e}, {:.2e}", ds[0], ds[1], ds[2]))
}

fn density_correctness() -> Outcome {
    let lift = conjugated_sine();
    let conj = lift.conjugacy().ok_or("no conjugacy")?;
    let ci = concentration_interval(&lift).map_err(err)?;
    let prof = density_profile(&lift, &conj, &clustered_grid(ci.lo, ci.hi, 2000)).map_err(err)?;
    let integral = prof.integral();
    ensure((integral - 1.0).abs() < 2e-3, || format!("integral {integral}"))?;

    let bins = 64;
    let edge = |k: usize| ci.lo + ci.width() * k as f64 / bins as f64;
    let d = displacement_sequence(&lift, 0.1, 1_000_000).map_err(err)?;
    let mut hist = vec![0.0; bins];
    for &v in &d.values {
        let y = ci.lo + mod1(v - ci.lo);
        let k = (((y - ci.lo) / ci.width()) * bins as f64)
            .floor()
            .clamp(0.0, (bins - 1) as f64) as usize;
        hist[k] += 1.0 / d.len() as f64;
    }
    let l1: f64 = (0..bins)
        .map(|k| (prof.mass_between(edge(k), edge(k + 1)) - hist[k]).abs())
        .sum();
    ensure(l1 < 0.05, || format!("bin L1 distance {l1}"))?;

    let rot = make_rotation(golden()).map_err(err)?;
    let singular = density_profile(&rot, &conj, &[0.5]);
    ensure(matches!(singular, Err(Error::SingularDistribution(_))), || {
        format!("rotation input gave {singular:?}")
    })?;
    Ok(format!("integral {integral:.6}, bin L1 {l1:.2e}, rotation rejected"))
}

fn mean_equals_rho() -> Outcome {
    let lift = conjugated_sine();
    let push = displacement_pushforward(&lift, ConjugacySource::Exact, 1_000_000).map_err(err)?;
    let pm = distribution_mean(&push);
    ensure((pm - golden()).abs() < 1e-4, || format!("pushforward mean {pm}"))?;

    let arnold = make_arnold(0.618, 0.5).map_err(err)?;
    let est = rotation_number(&arnold, 0.1, 1_000_000).map_err(err)?;
    let sample = sample_displacement_distribution(&arnold, 0.1, 100_000).map_err(err)?;
    let sm = distribution_mean(&sample);
    ensure((sm - est.value).abs() < 1e-3, || {
        format!("sample mean {sm} vs rho {}", est.value)
    })?;
    Ok(format!(
        "pushforward mean off by {:.1e}; arnold sample mean off by {:.1e}",
        (pm - golden()).abs(),
        (sm - est.value).abs()
    ))
}

fn stability() -> Outcome {
    let base = conjugated_sine();
    let mut ds = Vec::new();
    for delta in [1e-2, 1e-3, 1e-4] {
        let perturbed = make_perturbed(base.clone(), delta, 2).map_err(err)?;
        let r = stability_check(&base, &perturbed, 0.1, 100_000).map_err(err)?;
        ensure((r.sup_norm - delta).abs() < 1e-3 * delta, || {
            format!("sup norm {} for amplitude {delta}", r.sup_norm)
        })?;
        ds.push(r.d_f);
    }
    ensure(ds.windows(2).all(|w| w[1] <= w[0]), || {
        format!("d_F not non-increasing: {ds:?}")
    })?;
    ensure(ds[1] < 0.02, || format!("d_F at 1e-3 is {}", ds[1]))?;
    Ok(format!("d_F = {:.2e}, {:.2e}, {:.2e}", ds[0], ds[1], ds[2]))
}

fn recurrence() -> Outcome {
    let lift = conjugated_sine();
    let n = 100_000;
    let d = displacement_sequence(&lift, 0.1, n).map_err(err)?;
    let chunk = n / 5;
    let mut gaps = Vec::new();
    for w in 0..5 {
        let mut part = d.clone();
        part.values = d.values[w * chunk..(w + 1) * chunk].to_vec();
        part.raw = d.raw[w * chunk..(w + 1) * chunk].to_vec();
        let g = recurrence_gap_bound(&part, 0.05, chunk / 10).map_err(err)?;
        gaps.push(g.bounded().ok_or_else(|| format!("window {w}: {g:?}"))?);
    }
    let (lo, hi) = (*gaps.iter().min().unwrap(), *gaps.iter().max().unwrap());
    ensure(hi - lo <= 1, || format!("gaps {gaps:?} spread more than 1"))?;
    Ok(format!("gaps {gaps:?}"))
}

fn random_measure(rng: &mut ChaCha8Rng) -> EmpiricalMeasure {
    let k = rng.gen_range(1..20);
    let atoms: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    EmpiricalMeasure::from_weighted(&atoms, &weights).unwrap()
}

fn metric_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let (a, b, c) = (
            random_measure(&mut rng),
            random_measure(&mut rng),
            random_measure(&mut rng),
        );
        let ab = fortet_mourier(&a, &b).map_err(err)?;
        let ba = fortet_mourier(&b, &a).map_err(err)?;
        ensure(ab == ba, || format!("asymmetric: {ab} vs {ba}"))?;
        ensure(fortet_mourier(&a, &a).map_err(err)? == 0.0, || "d(a, a) != 0".into())?;
        let slack = ab - fortet_mourier(&a, &c).map_err(err)? - fortet_mourier(&c, &b).map_err(err)?;
        worst = worst.max(slack);
        ensure(slack <= 1e-12, || format!("triangle inequality violated by {slack:e}"))?;
    }
    for (x, y) in [(0.2, 0.7), (0.05, 0.95), (0.1, 0.35)] {
        let d = fortet_mourier(&EmpiricalMeasure::dirac(x), &EmpiricalMeasure::dirac(y)).map_err(err)?;
        ensure(d == (x - y).abs(), || format!("d(δ{x}, δ{y}) = {d}"))?;
    }
    Ok(format!("100 triples, worst triangle slack {worst:.1e}"))
}

fn ifm_identification() -> Outcome {
    let constant = FiringModel::perfect_integrator(2.0, 0.0, 0.0, 1.0).map_err(err)?;
    let isi = isi_sequence(&constant, 0.0, 1000).map_err(err)?;
    let bad = isi.raw.iter().position(|&r| r + isi.lift_offset as f64 != 0.5);
    ensure(bad.is_none(), || {
        format!("true ISI {} at index {}", isi.raw[bad.unwrap()], bad.unwrap())
    })?;

    let spec = FiringModelSpec {
        kind: FiringKind::PerfectIntegrator,
        i: 1.2,
        a: 0.5,
        sigma: 0.0,
        x_r: 0.0,
        x_theta: 1.0,
        horizon: None,
    };
    let model = FiringModel::from_spec(&spec).map_err(err)?;
    let isi = isi_sequence(&model, 0.0, 20_000).map_err(err)?;
    let isi_dist = EmpiricalMeasure::uniform(&isi.values).map_err(err)?;
    let wrapped = MapSpec::Firing { model: spec }.build().map_err(err)?;
    let disp = sample_displacement_distribution(&wrapped, 0.0, 20_000).map_err(err)?;
    let same = isi_dist.atoms().len() == disp.atoms().len()
        && isi_dist
            .atoms()
            .iter()
            .zip(disp.atoms())
            .all(|(a, b)| a.to_bits() == b.to_bits())
        && isi_dist
            .weights()
            .iter()
            .zip(disp.weights())
            .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(same, || "ISI and displacement distributions differ".into())?;

    let rk4 = FiringModel::generic_ode(|t, _| 1.2 + 0.5 * (TAU * t).sin(), 0.0, 1.0).map_err(err)?;
    let mut worst: f64 = 0.0;
    for j in 0..200 {
        let t = j as f64 / 200.0;
        let exact = model.firing_time(t).map_err(err)?;
        let num = rk4.firing_time(t).map_err(err)?;
        worst = worst.max((exact - num).abs());
    }
    ensure(worst < 1e-6, || format!("closed form vs RK4 differ by {worst:e}"))?;
    Ok(format!(
        "constant ISI 0.5, distributions bit-identical, RK4 gap {worst:.1e}"
    ))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome, u64);
    let criteria: [Criterion; 12] = [
        ("rotation constancy", rotation_constancy, 1),
        ("rational asymptotic periodicity", rational_periodicity, 5),
        ("shred trends", shred_trends, 10),
        ("universal N soundness", universal_n_soundness, 30),
        ("concentration interval", concentration, 2),
        ("pushforward/sample agreement", pushforward_agreement, 10),
        ("density correctness", density_correctness, 30),
        ("mean equals rho", mean_equals_rho, 5),
        ("stability", stability, 20),
        ("almost strong recurrence", recurrence, 10),
        ("Fortet-Mourier axioms", metric_axioms, 1),
        ("IFM identification", ifm_identification, 10),
    ];
    let mut failed = 0;
    for (k, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if outcome.is_ok() && elapsed > Duration::from_secs(*budget) {
            outcome = Err(format!("took {elapsed:.2?}, budget {budget} s"));
        }
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2}. {name} ({:.2?}): {detail}", k + 1, elapsed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
