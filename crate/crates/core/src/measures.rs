//! Invariant measures and displacement distributions for irrational
//! rotation numbers.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::{Conjugacy, Lift};
use crate::numerics::{bisect_predicate, circle_dist, golden_section_min, mod1, pairwise_sum, solve_increasing};
use crate::orbits::{default_burn_in, displacement_sequence, iterate, rotation_number, Direction, OrbitPoint};

/// Atoms closer than this are merged.
pub const COALESCE_TOLERANCE: f64 = 1e-12;
/// Grid for the extremes of `Ψ` and `Ω`.
pub const EXTREMA_GRID: usize = 1 << 16;
/// Grid for critical points of `Ψ`.
pub const CRITICAL_GRID: usize = 1 << 12;
/// Grid values of `y` this close to a critical value get no density.
pub const CRITICAL_VALUE_TOLERANCE: f64 = 1e-6;
/// Iterates used to cross-check exact rotation numbers.
pub const RHO_CHECK_ITERATES: usize = 1_000_000;
pub const RHO_AGREEMENT: f64 = 1e-6;
const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Finitely many weighted atoms on `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Equal weights on the given points (reduced mod 1).
    pub fn uniform(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::SeriesTooShort { len: 0, need: 1 });
        }
        let w = 1.0 / values.len() as f64;
        Self::build(values.iter().map(|&v| (mod1(v), w)).collect())
    }

    pub fn dirac(a: f64) -> Self {
        EmpiricalMeasure {
            atoms: vec![mod1(a)],
            weights: vec![1.0],
        }
    }

    /// Weighted atoms; the weights must be positive and sum to one.
    pub fn from_weighted(atoms: &[f64], weights: &[f64]) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(crate::error::invalid("weights", "one weight per atom"));
        }
        if atoms.is_empty() {
            return Err(Error::SeriesTooShort { len: 0, need: 1 });
        }
        if let Some(&w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(crate::error::invalid("weights", format!("weight {w} is not positive")));
        }
        if let Some(&a) = atoms.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(crate::error::invalid("atoms", format!("atom {a} lies outside [0, 1]")));
        }
        let total = pairwise_sum(weights);
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Unnormalized { total });
        }
        Self::build(atoms.iter().map(|&a| mod1(a)).zip(weights.iter().copied()).collect())
    }

    fn build(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(a, _)) = pairs.iter().find(|(a, _)| !a.is_finite()) {
            return Err(Error::NonFinite { at: a });
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut groups: Vec<Vec<f64>> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match atoms.last() {
                Some(&first) if a - first <= COALESCE_TOLERANCE => groups.last_mut().unwrap().push(w),
                _ => {
                    atoms.push(a);
                    groups.push(vec![w]);
                }
            }
        }
        let weights: Vec<f64> = groups.iter().map(|g| pairwise_sum(g)).collect();
        let total = pairwise_sum(&weights);
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(EmpiricalMeasure { atoms, weights })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// `F(t) = µ([0, t])`.
    pub fn cdf(&self, t: f64) -> f64 {
        let k = self.atoms.partition_point(|&a| a <= t);
        pairwise_sum(&self.weights[..k])
    }

    /// `µ(A)` for a finite union of arcs.
    pub fn mass_in(&self, set: &IntervalSet) -> f64 {
        let masses: Vec<f64> = self
            .atoms
            .iter()
            .zip(&self.weights)
            .filter(|(a, _)| set.contains(**a))
            .map(|(_, w)| *w)
            .collect();
        pairwise_sum(&masses)
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        *self.atoms.last().unwrap()
    }
}

/// `d_F(µ, ν) = ∫₀¹ |F_µ(t) − F_ν(t)| dt`.
pub fn fortet_mourier(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    for m in [mu, nu] {
        let total = m.total_weight();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Unnormalized { total });
        }
    }
    let (a, b) = (&mu.atoms, &nu.atoms);
    let mut pieces = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0f64, 0.0f64);
    let mut t = 0.0f64;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        pieces.push((fa - fb).abs() * (next - t));
        t = next;
        while i < a.len() && a[i] == t {
            fa += mu.weights[i];
            i += 1;
        }
        while j < b.len() && b[j] == t {
            fb += nu.weights[j];
            j += 1;
        }
    }
    pieces.push((fa - fb).abs() * (1.0 - t));
    Ok(pairwise_sum(&pieces))
}

/// `Σ w_j a_j`.
pub fn distribution_mean(mu: &EmpiricalMeasure) -> f64 {
    let terms: Vec<f64> = mu.atoms.iter().zip(&mu.weights).map(|(a, w)| a * w).collect();
    pairwise_sum(&terms)
}

/// Finite union of closed arcs of `[0, 1)`; an arc with `lo > hi` wraps
/// through 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSet {
    arcs: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn new(arcs: &[(f64, f64)]) -> Result<Self> {
        for &(lo, hi) in arcs {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(crate::error::invalid("interval", "endpoints must be finite"));
            }
        }
        Ok(IntervalSet {
            arcs: arcs.iter().map(|&(lo, hi)| (lo, hi)).collect(),
        })
    }

    pub fn arcs(&self) -> &[(f64, f64)] {
        &self.arcs
    }

    pub fn contains(&self, v: f64) -> bool {
        let v = mod1(v);
        self.arcs.iter().any(|&(lo, hi)| {
            if hi - lo >= 1.0 {
                true
            } else {
                let (lo, hi) = (mod1(lo), if hi == 1.0 { 1.0 } else { mod1(hi) });
                if lo <= hi {
                    v >= lo && v <= hi
                } else {
                    v >= lo || v <= hi
                }
            }
        })
    }
}

/// The arc `[lo, hi]` of displacement values, with `lo ∈ [0, 1)` and
/// `hi − lo < 1` (so `hi` may exceed 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ConcentrationInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Whether `v` (mod 1) lies on the arc, inflated by `slack`.
    pub fn contains(&self, v: f64, slack: f64) -> bool {
        let off = mod1(v - self.lo);
        off <= self.width() + slack || 1.0 - off <= slack
    }

    pub fn as_set(&self) -> IntervalSet {
        IntervalSet {
            arcs: vec![(self.lo, self.hi)],
        }
    }
}

/// Minimum and maximum of a continuous 1-periodic function.
fn extremes<F: Fn(f64) -> f64 + Sync>(f: F) -> Result<(f64, f64)> {
    let n = EXTREMA_GRID;
    let vals: Vec<f64> = (0..n).into_par_iter().map(|j| f(j as f64 / n as f64)).collect();
    if let Some(j) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            at: j as f64 / n as f64,
        });
    }
    let (jmin, _) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let (jmax, _) = vals.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let h = 1.0 / n as f64;
    let bracket = |j: usize| ((j as f64 - 1.0) * h, (j as f64 + 1.0) * h);
    let (a, b) = bracket(jmin);
    let (_, lo) = golden_section_min(&f, a, b, 1e-12);
    let (a, b) = bracket(jmax);
    let (_, neg_hi) = golden_section_min(|x| -f(x), a, b, 1e-12);
    Ok((lo.min(vals[jmin]), (-neg_hi).max(vals[jmax])))
}

/// `[min Ψ, max Ψ]` reduced mod 1.
pub fn concentration_interval(lift: &Lift) -> Result<ConcentrationInterval> {
    if lift.is_rotation() {
        let rho = mod1(lift.displacement(0.0));
        return Ok(ConcentrationInterval { lo: rho, hi: rho });
    }
    let (min, max) = extremes(|x| lift.displacement(x))?;
    let lo = mod1(min);
    Ok(ConcentrationInterval {
        lo,
        hi: lo + (max - min),
    })
}

/// The same arc from the conjugacy: extremes of
/// `Ω(x) = Γ⁻¹(x + ρ) − Γ⁻¹(x)`.
pub fn concentration_interval_from_conjugacy(conj: &Conjugacy) -> Result<ConcentrationInterval> {
    let omega = |x: f64| omega_exact(conj, x).unwrap_or(f64::NAN);
    let (min, max) = extremes(omega)?;
    let lo = mod1(min);
    Ok(ConcentrationInterval {
        lo,
        hi: lo + (max - min),
    })
}

fn omega_exact(conj: &Conjugacy, x: f64) -> Result<f64> {
    Ok(conj.gamma.inverse(x + conj.rho)? - conj.gamma.inverse(x)?)
}

/// Empirical distribution function of an orbit on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugacyEstimate {
    pub grid: Vec<f64>,
    pub gamma_hat: Vec<f64>,
    pub n_samples: usize,
}

impl ConjugacyEstimate {
    /// Piecewise-linear `Γ̂(x)` for `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        interp(&self.grid, &self.gamma_hat, x)
    }

    /// Piecewise-linear quantile `Γ̂⁻¹(u)`, extended with degree one.
    pub fn inverse(&self, u: f64) -> f64 {
        let l = u.floor();
        let v = u - l;
        let k = self.gamma_hat.partition_point(|&g| g < v);
        let x = if k == 0 {
            self.grid[0]
        } else if k >= self.grid.len() {
            *self.grid.last().unwrap()
        } else {
            let (g0, g1) = (self.gamma_hat[k - 1], self.gamma_hat[k]);
            let (x0, x1) = (self.grid[k - 1], self.grid[k]);
            x0 + (x1 - x0) * (v - g0) / (g1 - g0)
        };
        l + x
    }

    /// `sup_j |Γ̂(x_j) − Γ(x_j)|` against an exact conjugacy.
    pub fn sup_deviation(&self, gamma: &Lift) -> f64 {
        self.grid
            .iter()
            .zip(&self.gamma_hat)
            .map(|(&x, &g)| (gamma_cdf(gamma, x) - g).abs())
            .fold(0.0, f64::max)
    }
}

/// `Γ(x)` as a distribution function: the lift of the conjugacy, anchored
/// so that `Γ(0) = 0`.
pub fn gamma_cdf(gamma: &Lift, x: f64) -> f64 {
    gamma.eval(x) - gamma.eval(0.0)
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v < x);
    if k == 0 {
        return ys[0];
    }
    if k >= xs.len() {
        return *ys.last().unwrap();
    }
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

pub const MIN_CONJUGACY_SAMPLES: usize = 10_000;

/// `Γ̂(x) = #{i < n : Φ^i(x0) mod 1 ≤ x}/n` on `grid_size + 1` points.
pub fn empirical_conjugacy(lift: &Lift, x0: f64, n: usize, grid_size: usize) -> Result<ConjugacyEstimate> {
    if n < MIN_CONJUGACY_SAMPLES {
        return Err(Error::SeriesTooShort {
            len: n,
            need: MIN_CONJUGACY_SAMPLES,
        });
    }
    if grid_size == 0 {
        return Err(crate::error::invalid("grid_size", "must be positive"));
    }
    require_irrational(lift, x0, n)?;
    let orbit = iterate(lift, x0, n - 1, Direction::Forward)?;
    let mut fracs: Vec<f64> = orbit.points.iter().map(|p| p.frac).collect();
    fracs.sort_by(f64::total_cmp);
    let grid: Vec<f64> = (0..=grid_size).map(|j| j as f64 / grid_size as f64).collect();
    let mut gamma_hat: Vec<f64> = grid
        .iter()
        .map(|&x| fracs.partition_point(|&f| f <= x) as f64 / n as f64)
        .collect();
    gamma_hat[0] = 0.0;
    *gamma_hat.last_mut().unwrap() = 1.0;
    Ok(ConjugacyEstimate {
        grid,
        gamma_hat,
        n_samples: n,
    })
}

fn require_irrational(lift: &Lift, x0: f64, n: usize) -> Result<f64> {
    let est = rotation_number(lift, x0, n.max(100))?;
    match est.pq() {
        Some((p, q)) => Err(Error::RationalRotation { p, q }),
        None => Ok(est.value),
    }
}

/// Where `Γ` comes from in [`displacement_pushforward`].
#[derive(Debug, Clone, Copy)]
pub enum ConjugacySource<'a> {
    /// The conjugacy stored with the map.
    Exact,
    Estimated(&'a ConjugacyEstimate),
}

/// `Ω_*Λ` on the midpoint grid `u_j = (j + ½)/m`, with
/// `Ω(u) = Γ⁻¹(u + ρ) − Γ⁻¹(u)` reduced mod 1.
pub fn displacement_pushforward(lift: &Lift, source: ConjugacySource<'_>, m: usize) -> Result<EmpiricalMeasure> {
    if m == 0 {
        return Err(crate::error::invalid("grid", "must be positive"));
    }
    let u = |j: usize| (j as f64 + 0.5) / m as f64;
    let values: Vec<f64> = match source {
        ConjugacySource::Exact => {
            let conj = lift.conjugacy().ok_or(Error::MissingConjugacy)?;
            check_exact_rho(lift, conj.rho)?;
            (0..m)
                .into_par_iter()
                .map(|j| omega_exact(&conj, u(j)))
                .collect::<Result<_>>()?
        }
        ConjugacySource::Estimated(est) => {
            let rho = require_irrational(lift, 0.0, est.n_samples)?;
            (0..m)
                .into_par_iter()
                .map(|j| est.inverse(u(j) + rho) - est.inverse(u(j)))
                .collect()
        }
    };
    EmpiricalMeasure::uniform(&values)
}

fn check_exact_rho(lift: &Lift, exact: f64) -> Result<()> {
    let est = rotation_number(lift, 0.0, RHO_CHECK_ITERATES)?;
    if lift.is_rotation() {
        return Ok(());
    }
    if circle_dist(est.raw_value, exact) >= RHO_AGREEMENT {
        return Err(Error::RotationMismatch {
            exact,
            estimate: est.raw_value,
        });
    }
    Ok(())
}

/// `ω_{n,x} = (1/n)·Σ δ_{η_i}` along the orbit of `x0`.
pub fn sample_displacement_distribution(lift: &Lift, x0: f64, n: usize) -> Result<EmpiricalMeasure> {
    let d = displacement_sequence(lift, x0, n)?;
    EmpiricalMeasure::uniform(&d.values)
}

/// Fraction of the first `n` displacements that fall in `set`.
pub fn birkhoff_frequency(lift: &Lift, x0: f64, n: usize, set: &IntervalSet) -> Result<f64> {
    let d = displacement_sequence(lift, x0, n)?;
    let hits = d.values.iter().filter(|&&v| set.contains(v)).count();
    Ok(hits as f64 / n as f64)
}

/// Samples of the density `Δ(y)` of the displacement distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub support: ConcentrationInterval,
    /// Critical values `Ψ(c) mod 1`, `Φ′(c) = 1`.
    pub excluded: Vec<f64>,
    /// Grid points set to zero for lying at a critical value.
    pub singular: Vec<bool>,
    /// Whether `Φ′` was available in closed form.
    pub analytic_derivative: bool,
}

impl DensityProfile {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.mass_between(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// `∫ Δ` over `[a, b]`. Near a fold `Δ` behaves like `|y − v|^{-1/2}`,
    /// so each cell integrates `Δ·|y − v|^{1/2}` (taken linear) against the
    /// weight `|y − v|^{-1/2}` exactly, `v` being the nearest critical value.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let xs = &self.grid;
        if self.excluded.is_empty() {
            return plain_trapezoid(xs, &self.density, a, b);
        }
        let near: Vec<f64> = xs.iter().map(|&y| self.nearest_critical(y)).collect();
        let mut g: Vec<f64> = xs
            .iter()
            .zip(&self.density)
            .zip(&near)
            .map(|((&y, &d), &v)| d * (y - v).abs().sqrt())
            .collect();
        // grid points sitting on a critical value carry no density; borrow
        // the regular part from the closest clean neighbour on the same side
        for k in 0..xs.len() {
            if !self.singular[k] {
                continue;
            }
            let side = |j: usize| {
                let d = xs[j] - near[j];
                if d > 0.0 {
                    1
                } else if d < 0.0 {
                    -1
                } else {
                    0
                }
            };
            let same = |j: usize| !self.singular[j] && near[j] == near[k] && (side(k) == 0 || side(j) == side(k));
            let right = (k + 1..xs.len()).find(|&j| same(j));
            let left = (0..k).rev().find(|&j| same(j));
            g[k] = match (left, right) {
                (Some(l), Some(r)) if k - l <= r - k => g[l],
                (_, Some(r)) => g[r],
                (Some(l), None) => g[l],
                (None, None) => 0.0,
            };
        }
        let mut pieces = Vec::with_capacity(xs.len());
        for k in 1..xs.len() {
            let (x0, x1) = (xs[k - 1], xs[k]);
            let (l, r) = (x0.max(a), x1.min(b));
            if r <= l {
                continue;
            }
            let v = self.nearest_critical(0.5 * (x0 + x1));
            if v > x0 && v < x1 {
                // a critical value between grid points: split the cell there
                let (gl, gr) = (g[k - 1], g[k]);
                if l < v {
                    pieces.push(weighted_cell(x0, v, gl, gl, v, l, r.min(v)));
                }
                if r > v {
                    pieces.push(weighted_cell(v, x1, gr, gr, v, l.max(v), r));
                }
            } else {
                let g0 = if near[k - 1] == v {
                    g[k - 1]
                } else {
                    self.density[k - 1] * (x0 - v).abs().sqrt()
                };
                let g1 = if near[k] == v {
                    g[k]
                } else {
                    self.density[k] * (x1 - v).abs().sqrt()
                };
                pieces.push(weighted_cell(x0, x1, g0, g1, v, l, r));
            }
        }
        pairwise_sum(&pieces)
    }

    /// Closest critical value to `y`, shifted by an integer next to `y`.
    fn nearest_critical(&self, y: f64) -> f64 {
        self.excluded
            .iter()
            .map(|&c| c + (y - c).round())
            .min_by(|p, q| (p - y).abs().total_cmp(&(q - y).abs()))
            .unwrap()
    }
}

/// `∫_l^r g(y)·|y − v|^{-1/2} dy` for `g` linear through `(x0, g0)` and
/// `(x1, g1)`, where `v` is not inside `(x0, x1)`.
fn weighted_cell(x0: f64, x1: f64, g0: f64, g1: f64, v: f64, l: f64, r: f64) -> f64 {
    let (s0, s1) = ((x0 - v).abs(), (x1 - v).abs());
    let beta = (g1 - g0) / (s1 - s0);
    let alpha = g0 - beta * s0;
    let prim = |s: f64| 2.0 * alpha * s.sqrt() + 2.0 / 3.0 * beta * s * s.sqrt();
    let (sl, sr) = ((l - v).abs(), (r - v).abs());
    (prim(sr) - prim(sl)).abs()
}

fn plain_trapezoid(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    let mut pieces = Vec::with_capacity(xs.len());
    for k in 1..xs.len() {
        let (x0, x1) = (xs[k - 1], xs[k]);
        let (l, r) = (x0.max(a), x1.min(b));
        if r <= l {
            continue;
        }
        let at = |x: f64| ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0);
        pieces.push(0.5 * (at(l) + at(r)) * (r - l));
    }
    pairwise_sum(&pieces)
}

/// `n + 1` points on `[lo, hi]` with cosine spacing, dense at the ends
/// where the density has square-root singularities.
pub fn clustered_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n)
        .map(|j| {
            let t = j as f64 / n as f64;
            if j == n {
                hi
            } else {
                lo + (hi - lo) * 0.5 * (1.0 - (std::f64::consts::PI * t).cos())
            }
        })
        .collect()
}

/// Points `c ∈ [0, 1)` with `Φ′(c) = 1`, from sign changes of `Φ′ − 1`.
fn critical_points(lift: &Lift) -> Result<Vec<f64>> {
    let n = CRITICAL_GRID;
    let dpsi = |x: f64| lift.derivative(x).0 - 1.0;
    let vals: Vec<f64> = (0..=n).map(|j| dpsi(j as f64 / n as f64)).collect();
    if vals.iter().all(|v| v.abs() < 1e-14) {
        return Err(Error::SingularDistribution(
            "displacement is constant (rigid rotation)".into(),
        ));
    }
    let mut out = Vec::new();
    for j in 0..n {
        let (a, b) = (vals[j], vals[j + 1]);
        let x = j as f64 / n as f64;
        if a == 0.0 {
            out.push(x);
        } else if a.signum() != b.signum() && b != 0.0 {
            let pos = b > 0.0;
            let (l, r) = bisect_predicate(|t| (dpsi(t) > 0.0) != pos, x, (j + 1) as f64 / n as f64);
            out.push(0.5 * (l + r));
        }
    }
    if out.len() > n / 4 {
        return Err(Error::SingularDistribution(
            "critical set of the displacement is not finite".into(),
        ));
    }
    Ok(out)
}

/// `Δ(y) = Σ_{x ∈ Ψ⁻¹(y)} Γ′(x)/|Φ′(x) − 1|` on the given grid of `y`.
pub fn density_profile(lift: &Lift, conj: &Conjugacy, y_grid: &[f64]) -> Result<DensityProfile> {
    if lift.is_rotation() {
        return Err(Error::SingularDistribution(
            "the displacement distribution of a rotation is a Dirac mass".into(),
        ));
    }
    let analytic = lift.has_analytic_derivative();
    if !analytic {
        log::warn!("density of `{}` uses finite-difference derivatives", lift.family_name());
    }
    let crit = critical_points(lift)?;
    if crit.is_empty() {
        return Err(Error::SingularDistribution("displacement has no turning points".into()));
    }
    let support = concentration_interval(lift)?;
    let psi = |x: f64| lift.displacement(x);
    let critical_values: Vec<f64> = crit.iter().map(|&c| mod1(psi(c))).collect();

    // monotone pieces [c_k, c_{k+1}] covering one period
    let k = crit.len();
    let pieces: Vec<(f64, f64)> = (0..k)
        .map(|j| (crit[j], if j + 1 < k { crit[j + 1] } else { crit[0] + 1.0 }))
        .collect();

    let gamma_prime = |x: f64| conj.gamma.derivative(x).0;
    let singular: Vec<bool> = y_grid
        .iter()
        .map(|&y| {
            critical_values
                .iter()
                .any(|&c| circle_dist(c, y) < CRITICAL_VALUE_TOLERANCE)
        })
        .collect();
    let density: Vec<f64> = y_grid
        .par_iter()
        .zip(&singular)
        .map(|(&y, &at_critical)| {
            if at_critical || !support.contains(y, 0.0) {
                return Ok(0.0);
            }
            let mut terms = Vec::new();
            for &(a, b) in &pieces {
                let (pa, pb) = (psi(a), psi(b));
                let increasing = pb > pa;
                let (lo, hi) = if increasing { (pa, pb) } else { (pb, pa) };
                let mut level = (lo - y).ceil() + y;
                while level <= hi {
                    let x = if increasing {
                        solve_increasing(psi, None::<fn(f64) -> f64>, level, a, b, 1e-14)?
                    } else {
                        solve_increasing(|x| -psi(x), None::<fn(f64) -> f64>, -level, a, b, 1e-14)?
                    };
                    let slope = (lift.derivative(x).0 - 1.0).abs();
                    terms.push(gamma_prime(mod1(x)) / slope);
                    level += 1.0;
                }
            }
            Ok(pairwise_sum(&terms))
        })
        .collect::<Result<_>>()?;
    Ok(DensityProfile {
        grid: y_grid.to_vec(),
        density,
        support,
        excluded: critical_values,
        singular,
        analytic_derivative: analytic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    /// `d_F` between the long-run displacement distributions.
    pub d_f: f64,
    /// `sup |Φ − Φ̃|` over a grid of one period.
    pub sup_norm: f64,
}

/// Grid for the sup-norm distance between two lifts.
pub const SUP_NORM_GRID: usize = 1 << 12;

/// Compares the displacement distributions of `lift` and `perturbed` along
/// orbits of `x0`, after discarding `max(10³, n/10)` iterates.
pub fn stability_check(lift: &Lift, perturbed: &Lift, x0: f64, n: usize) -> Result<StabilityReport> {
    let burn = default_burn_in(n);
    let tail = |l: &Lift| -> Result<EmpiricalMeasure> {
        let mut p = OrbitPoint::from_real(x0);
        for _ in 0..burn {
            p = crate::orbits::step(l, p, Direction::Forward)?;
        }
        sample_displacement_distribution(l, p.frac, n)
    };
    let d_f = fortet_mourier(&tail(lift)?, &tail(perturbed)?)?;
    let raw = |l: &Lift, x: f64| l.eval(x) + l.offset() as f64;
    let sup_norm = (0..SUP_NORM_GRID)
        .map(|j| {
            let x = j as f64 / SUP_NORM_GRID as f64;
            (raw(lift, x) - raw(perturbed, x)).abs()
        })
        .fold(0.0, f64::max);
    Ok(StabilityReport { d_f, sup_norm })
}
