//! Integrate-and-fire models and their firing maps.
//!
//! A trajectory starts at `x_r` at time `t` and follows `dx/ds = f(s, x)`
//! until it first reaches `x_theta`; the firing map sends `t` to that time.
//! With 1-periodic forcing the firing map is a lift of a circle map, and its
//! displacement sequence is the interspike-interval sequence.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::maps::{make_custom, Lift, LiftMap};
use crate::orbits::{displacement_sequence, DisplacementSeries};

/// Scan step for threshold crossings.
pub const SCAN_STEP: f64 = 1e-3;
/// Crossings with `|dx/ds|` below this are reported as grazing.
pub const GRAZING_SLOPE: f64 = 1e-6;
pub const DEFAULT_HORIZON: f64 = 1e3;
/// Grid size of the firing-time table kept by [`FiringModel::firing_lift`].
pub const MEMO_GRID: usize = 4096;
const PERIODICITY_TOLERANCE: f64 = 1e-9;

pub type RhsFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiringKind {
    PerfectIntegrator,
    Leaky,
    GenericOde,
}

/// JSON form of a model. `generic_ode` integrates the same right-hand side
/// `I + A·sin(2πt) − sigma·x` numerically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiringModelSpec {
    pub kind: FiringKind,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "A", default)]
    pub a: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub x_r: f64,
    #[serde(default = "default_threshold")]
    pub x_theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

fn default_threshold() -> f64 {
    1.0
}

#[derive(Clone)]
enum Rhs {
    /// `I + A·sin(2πt) − σx`.
    Standard {
        i: f64,
        a: f64,
        sigma: f64,
    },
    Custom(RhsFn),
}

impl Rhs {
    #[inline]
    fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Rhs::Standard { i, a, sigma } => i + a * (TAU * t).sin() - sigma * x,
            Rhs::Custom(f) => f(t, x),
        }
    }
}

#[derive(Clone)]
pub struct FiringModel {
    kind: FiringKind,
    rhs: Rhs,
    x_r: f64,
    x_theta: f64,
    horizon: f64,
}

impl fmt::Debug for FiringModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("FiringModel");
        d.field("kind", &self.kind);
        if let Rhs::Standard { i, a, sigma } = self.rhs {
            d.field("I", &i).field("A", &a).field("sigma", &sigma);
        }
        d.field("x_r", &self.x_r)
            .field("x_theta", &self.x_theta)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl FiringModel {
    /// `dx/dt = I + A·sin(2πt)`.
    pub fn perfect_integrator(i: f64, a: f64, x_r: f64, x_theta: f64) -> Result<Self> {
        Self::new(
            FiringKind::PerfectIntegrator,
            Rhs::Standard { i, a, sigma: 0.0 },
            x_r,
            x_theta,
            DEFAULT_HORIZON,
        )
    }

    /// `dx/dt = −σx + I + A·sin(2πt)` with `σ > 0`.
    pub fn leaky(sigma: f64, i: f64, a: f64, x_r: f64, x_theta: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(invalid("sigma", "leaky models need sigma > 0"));
        }
        Self::new(
            FiringKind::Leaky,
            Rhs::Standard { i, a, sigma },
            x_r,
            x_theta,
            DEFAULT_HORIZON,
        )
    }

    /// Arbitrary right-hand side, 1-periodic in `t`, integrated with RK4.
    pub fn generic_ode(rhs: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, x_r: f64, x_theta: f64) -> Result<Self> {
        Self::new(
            FiringKind::GenericOde,
            Rhs::Custom(Arc::new(rhs)),
            x_r,
            x_theta,
            DEFAULT_HORIZON,
        )
    }

    pub fn from_spec(spec: &FiringModelSpec) -> Result<Self> {
        let horizon = spec.horizon.unwrap_or(DEFAULT_HORIZON);
        let rhs = Rhs::Standard {
            i: spec.i,
            a: spec.a,
            sigma: spec.sigma,
        };
        match spec.kind {
            FiringKind::PerfectIntegrator if spec.sigma != 0.0 => {
                return Err(invalid("sigma", "perfect integrators have no leak"));
            }
            FiringKind::Leaky if !(spec.sigma > 0.0) => {
                return Err(invalid("sigma", "leaky models need sigma > 0"));
            }
            _ => {}
        }
        Self::new(spec.kind, rhs, spec.x_r, spec.x_theta, horizon)
    }

    /// The JSON form, when the right-hand side is the standard one.
    pub fn spec(&self) -> Option<FiringModelSpec> {
        match self.rhs {
            Rhs::Standard { i, a, sigma } => Some(FiringModelSpec {
                kind: self.kind,
                i,
                a,
                sigma,
                x_r: self.x_r,
                x_theta: self.x_theta,
                horizon: (self.horizon != DEFAULT_HORIZON).then_some(self.horizon),
            }),
            Rhs::Custom(_) => None,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", "must be positive and finite"));
        }
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    fn new(kind: FiringKind, rhs: Rhs, x_r: f64, x_theta: f64, horizon: f64) -> Result<Self> {
        if let Rhs::Standard { i, a, sigma } = rhs {
            for (name, v) in [("I", i), ("A", a), ("sigma", sigma)] {
                if !v.is_finite() {
                    return Err(invalid(name, "must be finite"));
                }
            }
        }
        if !(x_r.is_finite() && x_theta.is_finite()) {
            return Err(invalid("x_theta", "reset and threshold must be finite"));
        }
        if x_theta <= x_r {
            return Err(invalid("x_theta", "threshold must exceed the reset value"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", "must be positive and finite"));
        }
        let model = FiringModel {
            kind,
            rhs,
            x_r,
            x_theta,
            horizon,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        for j in 0..64 {
            let t = j as f64 / 64.0;
            for x in [self.x_r, self.x_theta, 0.5 * (self.x_r + self.x_theta)] {
                let gap = (self.rhs.eval(t + 1.0, x) - self.rhs.eval(t, x)).abs();
                if gap > PERIODICITY_TOLERANCE {
                    return Err(Error::NonPeriodicForcing { t, gap });
                }
            }
        }
        for j in 0..16 {
            self.firing_time(j as f64 / 16.0)?;
        }
        Ok(())
    }

    pub fn kind(&self) -> FiringKind {
        self.kind
    }

    pub fn reset(&self) -> f64 {
        self.x_r
    }

    pub fn threshold(&self) -> f64 {
        self.x_theta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `dx/ds` at `(s, x)`.
    pub fn rhs(&self, s: f64, x: f64) -> f64 {
        self.rhs.eval(s, x)
    }

    /// State at time `s` of the trajectory leaving `x_r` at time `t`, for
    /// the closed-form kinds.
    fn closed_form(&self, t: f64, s: f64) -> Option<f64> {
        let Rhs::Standard { i, a, sigma } = self.rhs else {
            return None;
        };
        match self.kind {
            FiringKind::PerfectIntegrator => {
                Some(self.x_r + i * (s - t) + a / TAU * ((TAU * t).cos() - (TAU * s).cos()))
            }
            FiringKind::Leaky => {
                let decay = (-sigma * (s - t)).exp();
                let forced = |u: f64| sigma * (TAU * u).sin() - TAU * (TAU * u).cos();
                Some(
                    decay * self.x_r
                        + i / sigma * (1.0 - decay)
                        + a / (sigma * sigma + TAU * TAU) * (forced(s) - decay * forced(t)),
                )
            }
            FiringKind::GenericOde => None,
        }
    }

    /// First time `s > t` at which the trajectory from `(t, x_r)` reaches the
    /// threshold.
    pub fn firing_time(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::NonFinite { at: t });
        }
        if let Some(s) = self.constant_input_shortcut(t) {
            return s;
        }
        self.firing_time_from(t, t)
    }

    fn constant_input_shortcut(&self, t: f64) -> Option<Result<f64>> {
        let Rhs::Standard { i, a, sigma } = self.rhs else {
            return None;
        };
        if a != 0.0 {
            return None;
        }
        let gap = self.x_theta - self.x_r;
        let non_firing = Error::NonFiring {
            t,
            horizon: self.horizon,
        };
        match self.kind {
            FiringKind::PerfectIntegrator => Some(if i > 0.0 && gap / i <= self.horizon {
                Ok(t + gap / i)
            } else {
                Err(non_firing)
            }),
            FiringKind::Leaky => {
                let eq = i / sigma;
                Some(if eq > self.x_theta {
                    let dt = ((eq - self.x_r) / (eq - self.x_theta)).ln() / sigma;
                    if dt <= self.horizon {
                        Ok(t + dt)
                    } else {
                        Err(non_firing)
                    }
                } else {
                    Err(non_firing)
                })
            }
            FiringKind::GenericOde => None,
        }
    }

    /// Scan for the first crossing after `start`, knowing the trajectory is
    /// still below threshold there.
    fn firing_time_from(&self, t: f64, start: f64) -> Result<f64> {
        match self.closed_form(t, t) {
            Some(_) => self.scan_closed_form(t, start),
            None => self.integrate(t),
        }
    }

    fn scan_closed_form(&self, t: f64, start: f64) -> Result<f64> {
        let x = |s: f64| self.closed_form(t, s).expect("closed-form kind");
        let theta = self.x_theta;
        let mut lo = start;
        let mut k = 1u64;
        loop {
            let hi = start + k as f64 * SCAN_STEP;
            if hi - t > self.horizon {
                return Err(Error::NonFiring {
                    t,
                    horizon: self.horizon,
                });
            }
            if x(hi) >= theta {
                let s = bisect_crossing(|s| x(s) >= theta, lo, hi);
                self.flag_grazing(s);
                return Ok(s);
            }
            lo = hi;
            k += 1;
        }
    }

    fn integrate(&self, t: f64) -> Result<f64> {
        let theta = self.x_theta;
        let f = |s: f64, x: f64| self.rhs.eval(s, x);
        let mut s = t;
        let mut x = self.x_r;
        let mut k = 0u64;
        loop {
            let next = rk4_step(&f, s, x, SCAN_STEP);
            if !next.is_finite() {
                return Err(Error::NonFinite { at: s });
            }
            if next >= theta {
                let (s0, x0) = (s, x);
                let h = bisect_crossing(|h| rk4_step(&f, s0, x0, h) >= theta, 0.0, SCAN_STEP);
                let s = s0 + h;
                self.flag_grazing(s);
                return Ok(s);
            }
            k += 1;
            s = t + k as f64 * SCAN_STEP;
            x = next;
            if s - t > self.horizon {
                return Err(Error::NonFiring {
                    t,
                    horizon: self.horizon,
                });
            }
        }
    }

    fn flag_grazing(&self, s: f64) {
        let slope = self.rhs.eval(s, self.x_theta);
        if slope.abs() < GRAZING_SLOPE {
            log::warn!("grazing threshold crossing at s = {s} (dx/ds = {slope:e})");
        }
    }

    /// `dΦ/dt = f(t, x_r)·exp(−σ(Φ − t)) / f(Φ, x_theta)` for the standard
    /// right-hand side.
    fn firing_derivative(&self, t: f64, s: f64) -> Option<f64> {
        let Rhs::Standard { sigma, .. } = self.rhs else {
            return None;
        };
        let num = self.rhs.eval(t, self.x_r) * (-sigma * (s - t)).exp();
        let den = self.rhs.eval(s, self.x_theta);
        (den > 0.0).then(|| num / den)
    }

    /// The firing map wrapped as a validated [`Lift`].
    pub fn firing_lift(&self) -> Result<Lift> {
        let memo: Vec<f64> = (0..=MEMO_GRID)
            .into_par_iter()
            .map(|j| self.firing_time(j as f64 / MEMO_GRID as f64))
            .collect::<Result<_>>()?;
        make_custom(Arc::new(FiringLift {
            model: self.clone(),
            memo,
        }))
    }
}

/// `Φ(t)` for a model; see [`FiringModel::firing_time`].
pub fn firing_map(model: &FiringModel, t: f64) -> Result<f64> {
    model.firing_time(t)
}

/// Interspike intervals from `t0`: the displacement sequence of the firing
/// map. `raw + lift_offset` holds the true durations.
pub fn isi_sequence(model: &FiringModel, t0: f64, n: usize) -> Result<DisplacementSeries> {
    displacement_sequence(&model.firing_lift()?, t0, n)
}

#[inline]
fn rk4_step<F: Fn(f64, f64) -> f64>(f: &F, s: f64, x: f64, h: f64) -> f64 {
    let k1 = f(s, x);
    let k2 = f(s + 0.5 * h, x + 0.5 * h * k1);
    let k3 = f(s + 0.5 * h, x + 0.5 * h * k2);
    let k4 = f(s + h, x + h * k3);
    x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Bisects a predicate that is false at `lo` and true at `hi` down to float
/// resolution and returns the upper end.
fn bisect_crossing<P: Fn(f64) -> bool>(above: P, mut lo: f64, mut hi: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return hi;
        }
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// Firing map with a table of exact firing times on a uniform grid; the
/// table only brackets solves, every value is computed exactly.
struct FiringLift {
    model: FiringModel,
    memo: Vec<f64>,
}

impl FiringLift {
    fn cell(&self, u: f64) -> usize {
        ((u * MEMO_GRID as f64).floor() as usize).min(MEMO_GRID - 1)
    }
}

impl LiftMap for FiringLift {
    fn name(&self) -> &str {
        "firing"
    }

    fn value(&self, u: f64) -> f64 {
        let j = self.cell(u);
        let tj = j as f64 / MEMO_GRID as f64;
        if u == tj {
            return self.memo[j];
        }
        if u == (j + 1) as f64 / MEMO_GRID as f64 {
            return self.memo[j + 1];
        }
        if let Some(s) = self.model.constant_input_shortcut(u) {
            return s.unwrap_or(f64::NAN);
        }
        // Φ is nondecreasing, so the crossing from u is no earlier than the
        // one from t_j; step back a hair to absorb the solve tolerance.
        let start = (self.memo[j] - 1e-9).max(u);
        let below = match self.model.closed_form(u, start) {
            Some(x) => x < self.model.x_theta,
            None => false,
        };
        let s = if below {
            self.model.firing_time_from(u, start)
        } else {
            self.model.firing_time(u)
        };
        s.unwrap_or(f64::NAN)
    }

    fn derivative(&self, u: f64) -> Option<f64> {
        let s = self.value(u);
        self.model.firing_derivative(u, s)
    }

    fn preimage_bracket(&self, w: f64) -> Option<(f64, f64)> {
        let idx = self.memo.partition_point(|&v| v < w);
        if idx == 0 || idx > MEMO_GRID {
            return None;
        }
        Some(((idx - 1) as f64 / MEMO_GRID as f64, idx as f64 / MEMO_GRID as f64))
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        if let Rhs::Standard { i, a, sigma } = self.model.rhs {
            out.extend([("I", i), ("A", a), ("sigma", sigma)]);
        }
        out.extend([("x_r", self.model.x_r), ("x_theta", self.model.x_theta)]);
        out
    }
}
