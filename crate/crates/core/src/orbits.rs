//! Orbits, displacement sequences and rotation numbers.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::Lift;
use crate::numerics::{circle_dist, convergents, mod1, pairwise_sum};
use crate::rational::verify_asymptotic_periodicity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// One orbit point `x = winding + frac`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitPoint {
    pub frac: f64,
    pub winding: i64,
}

impl OrbitPoint {
    pub fn from_real(x: f64) -> Self {
        let w = x.floor();
        let mut frac = x - w;
        let mut winding = w as i64;
        if frac >= 1.0 {
            frac -= 1.0;
            winding += 1;
        }
        Self { frac, winding }
    }

    pub fn value(&self) -> f64 {
        self.winding as f64 + self.frac
    }

    /// Moves to `winding + y` where `y` is a lift value computed at `frac`.
    fn advance(self, y: f64) -> Self {
        let mut p = OrbitPoint::from_real(y);
        p.winding += self.winding;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Orbit {
    pub x0: f64,
    pub direction: Direction,
    pub points: Vec<OrbitPoint>,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `Φ^n(x0)` (or `Φ^{-n}`) as `n + 1` points with exact integer windings.
pub fn iterate(lift: &Lift, x0: f64, n: usize, direction: Direction) -> Result<Orbit> {
    let mut points = Vec::with_capacity(n + 1);
    let mut p = OrbitPoint::from_real(x0);
    points.push(p);
    for _ in 0..n {
        p = step(lift, p, direction)?;
        points.push(p);
    }
    Ok(Orbit { x0, direction, points })
}

#[inline]
pub(crate) fn step(lift: &Lift, p: OrbitPoint, direction: Direction) -> Result<OrbitPoint> {
    let y = match direction {
        Direction::Forward => lift.eval(p.frac),
        Direction::Backward => lift.inverse(p.frac)?,
    };
    if !y.is_finite() {
        return Err(Error::NonFinite { at: p.value() });
    }
    Ok(p.advance(y))
}

/// `Φ^n(x)` for a real `x`, carrying the integer part separately.
pub fn iterate_point(lift: &Lift, x: f64, n: usize, direction: Direction) -> Result<f64> {
    let mut p = OrbitPoint::from_real(x);
    for _ in 0..n {
        p = step(lift, p, direction)?;
    }
    Ok(p.value())
}

/// The displacement sequence `η_k` of a seed.
///
/// Forward: `values[k-1] = Ψ(Φ^{k-1}(x0)) mod 1`, `k = 1..=n`.
/// Backward: `values[k-1] = Φ^{-(k-1)}(x0) − Φ^{-k}(x0) mod 1`, i.e. the
/// mirrored sequence `η_{-(k-1)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisplacementSeries {
    pub seed: f64,
    pub direction: Direction,
    /// `η` values in `[0, 1)`.
    pub values: Vec<f64>,
    /// Unreduced displacements `Ψ(x)` of the normalized lift.
    pub raw: Vec<f64>,
    /// Integer normalization of the lift; `raw + lift_offset` is the
    /// displacement of the map as originally specified.
    pub lift_offset: i64,
}

impl DisplacementSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Forward displacement sequence of length `n`.
pub fn displacement_sequence(lift: &Lift, x0: f64, n: usize) -> Result<DisplacementSeries> {
    displacement_sequence_dir(lift, x0, n, Direction::Forward)
}

pub fn displacement_sequence_dir(lift: &Lift, x0: f64, n: usize, direction: Direction) -> Result<DisplacementSeries> {
    if n == 0 {
        return Err(Error::SeriesTooShort { len: 0, need: 1 });
    }
    let mut values = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    let mut p = OrbitPoint::from_real(x0);
    for _ in 0..n {
        let psi = match direction {
            Direction::Forward => {
                let psi = lift.displacement(p.frac);
                p = step(lift, p, direction)?;
                psi
            }
            Direction::Backward => {
                p = step(lift, p, direction)?;
                lift.displacement(p.frac)
            }
        };
        raw.push(psi);
        values.push(mod1(psi));
    }
    Ok(DisplacementSeries {
        seed: mod1(x0),
        direction,
        values,
        raw,
        lift_offset: lift.offset(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Rational,
    IrrationalLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationEstimate {
    /// Estimate in `[0, 1)`; snapped to `p/q` when classified rational.
    pub value: f64,
    /// Unsnapped estimate, reduced mod 1.
    pub raw_value: f64,
    pub n_used: usize,
    /// Smallest-denominator convergent consistent with the estimate, or the
    /// deepest convergent with `q ≤ q_max` when none is.
    pub rational_approx: (i64, u64),
    pub classification: Classification,
    /// Bound on `|value − ρ|` before snapping: `1/n` for a homeomorphism,
    /// zero for rigid rotations.
    pub residual: f64,
}

impl RotationEstimate {
    pub fn is_rational(&self) -> bool {
        self.classification == Classification::Rational
    }

    pub fn pq(&self) -> Option<(i64, u64)> {
        self.is_rational().then_some(self.rational_approx)
    }
}

/// Knobs for rational/irrational classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationOptions {
    pub q_max: u64,
    pub periodicity_tol: f64,
}

impl Default for RotationOptions {
    fn default() -> Self {
        Self {
            q_max: 100,
            periodicity_tol: 1e-8,
        }
    }
}

/// Default burn-in for tail statistics: `max(10³, n/10)`.
pub fn default_burn_in(n: usize) -> usize {
    (n / 10).max(1000)
}

/// `ρ ≈ (Φ^n(x0) − x0)/n mod 1`.
pub fn rotation_number(lift: &Lift, x0: f64, n: usize) -> Result<RotationEstimate> {
    rotation_number_with(lift, x0, n, &RotationOptions::default())
}

pub fn rotation_number_with(lift: &Lift, x0: f64, n: usize, opts: &RotationOptions) -> Result<RotationEstimate> {
    estimate(lift, x0, n, opts, Estimator::Telescoping)
}

/// `ρ ≈ (1/n)·Σ Ψ(Φ^{k-1}(x0)) mod 1`.
pub fn rotation_number_via_displacements(lift: &Lift, x0: f64, n: usize) -> Result<RotationEstimate> {
    estimate(lift, x0, n, &RotationOptions::default(), Estimator::Displacements)
}

#[derive(Clone, Copy)]
enum Estimator {
    Telescoping,
    Displacements,
}

const MIN_ROTATION_ITERATES: usize = 100;

fn estimate(lift: &Lift, x0: f64, n: usize, opts: &RotationOptions, which: Estimator) -> Result<RotationEstimate> {
    if n < MIN_ROTATION_ITERATES {
        return Err(Error::SeriesTooShort {
            len: n,
            need: MIN_ROTATION_ITERATES,
        });
    }
    if lift.is_rotation() {
        let rho = lift.exact_rotation_number().unwrap_or_else(|| lift.displacement(0.0));
        return Ok(exact_rotation_estimate(mod1(rho), n, opts.q_max));
    }

    let mut p = OrbitPoint::from_real(x0);
    let start = p;
    let mut raw = Vec::with_capacity(n);
    for _ in 0..n {
        raw.push(lift.displacement(p.frac));
        p = step(lift, p, Direction::Forward)?;
    }
    let raw_value = match which {
        Estimator::Telescoping => {
            let winding = (p.winding - start.winding) as f64;
            (winding + (p.frac - start.frac)) / n as f64
        }
        Estimator::Displacements => pairwise_sum(&raw) / n as f64,
    };
    let value = mod1(raw_value);
    let residual = 1.0 / n as f64;

    let convs = convergents(value, opts.q_max);
    let deepest = *convs.last().expect("at least the integer part");
    let candidate = convs
        .iter()
        .copied()
        .filter(|&(_, q)| q >= 1)
        .find(|&(pp, q)| circle_dist(value, pp as f64 / q as f64) < 10.0 / n as f64);

    let mut est = RotationEstimate {
        value,
        raw_value: value,
        n_used: n,
        rational_approx: deepest,
        classification: Classification::IrrationalLike,
        residual,
    };
    if let Some((pp, q)) = candidate {
        let burn = default_burn_in(n).min(n / 2);
        let series = DisplacementSeries {
            seed: mod1(x0),
            direction: Direction::Forward,
            values: raw.iter().map(|&r| mod1(r)).collect(),
            raw,
            lift_offset: lift.offset(),
        };
        let periodic =
            n >= burn + 10 * q as usize && verify_asymptotic_periodicity(&series, q, opts.periodicity_tol, burn)?;
        let pp = pp.rem_euclid(q as i64);
        est.rational_approx = (pp, q);
        if periodic {
            est.classification = Classification::Rational;
            est.value = pp as f64 / q as f64;
        }
    }
    Ok(est)
}

fn exact_rotation_estimate(rho: f64, n: usize, q_max: u64) -> RotationEstimate {
    let convs = convergents(rho, q_max);
    let hit = convs
        .iter()
        .copied()
        .find(|&(p, q)| (rho - p as f64 / q as f64).abs() < 1e-12);
    let (pq, classification) = match hit {
        Some((p, q)) => ((p.rem_euclid(q as i64), q), Classification::Rational),
        None => (*convs.last().unwrap(), Classification::IrrationalLike),
    };
    let value = match classification {
        Classification::Rational => pq.0 as f64 / pq.1 as f64,
        Classification::IrrationalLike => rho,
    };
    RotationEstimate {
        value,
        raw_value: rho,
        n_used: n,
        rational_approx: pq,
        classification,
        residual: 0.0,
    }
}

/// Outcome of the almost-strong-recurrence scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrenceGap {
    Bounded(usize),
    /// No gap up to a tenth of the series length works.
    Unbounded {
        observed: usize,
    },
}

impl RecurrenceGap {
    pub fn bounded(self) -> Option<usize> {
        match self {
            RecurrenceGap::Bounded(g) => Some(g),
            RecurrenceGap::Unbounded { .. } => None,
        }
    }
}

/// Smallest `N` such that for every base index `n < window` and every later
/// start `s` with `s + N` inside the series, some `i ≤ N` gives
/// `d(η_{s+i}, η_n) < eps`.
pub fn recurrence_gap_bound(d: &DisplacementSeries, eps: f64, window: usize) -> Result<RecurrenceGap> {
    recurrence_gap_bound_from(d, eps, 0, window)
}

/// Same as [`recurrence_gap_bound`] with base indices `start..start + window`.
pub fn recurrence_gap_bound_from(
    d: &DisplacementSeries,
    eps: f64,
    start: usize,
    window: usize,
) -> Result<RecurrenceGap> {
    let len = d.len();
    let need = (10 * window).max(start + window);
    if window == 0 || len < need {
        return Err(Error::SeriesTooShort { len, need });
    }
    let gap = (start..start + window)
        .into_par_iter()
        .map(|n| gap_for_base(&d.values, n, eps))
        .max()
        .unwrap_or(0);
    Ok(if gap > len / 10 {
        RecurrenceGap::Unbounded { observed: gap }
    } else {
        RecurrenceGap::Bounded(gap)
    })
}

// For base n with return indices r_0 = n < r_1 < ... < r_last, the minimal
// N is max(max_j (r_{j+1} - r_j - 1), len - 1 - r_last): a start s inside a
// gap needs r_{j+1} - s <= N, and a start past r_last must not fit N steps.
fn gap_for_base(values: &[f64], n: usize, eps: f64) -> usize {
    let anchor = values[n];
    let mut last = n;
    let mut worst = 0usize;
    for (j, &v) in values.iter().enumerate().skip(n + 1) {
        if circle_dist(v, anchor) < eps {
            worst = worst.max(j - last - 1);
            last = j;
        }
    }
    worst.max(values.len() - 1 - last)
}
