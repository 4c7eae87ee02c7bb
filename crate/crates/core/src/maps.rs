//! Lifts of orientation-preserving circle homeomorphisms.
//!
//! A [`Lift`] is a strictly increasing `Φ: R → R` with `Φ(x + 1) = Φ(x) + 1`.
//! Every family is described by its values on the unit interval; evaluation
//! elsewhere goes through `Φ(x) = ⌊x⌋ + Φ({x})` so that the integer part of
//! long orbits never eats into the mantissa. Lifts are normalized so that
//! `Φ(0) ∈ [0, 1)`; the integer that was subtracted is kept in
//! [`Lift::offset`].

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ifm::{FiringModel, FiringModelSpec};
use crate::numerics::{mod1, solve_increasing};

/// Grid used to certify monotonicity at construction.
pub const CERTIFICATE_GRID: usize = 4096;
/// Allowed mismatch between `Φ(1)` and `Φ(0) + 1` when both are computed
/// from the family formula.
pub const SEAM_TOLERANCE: f64 = 1e-10;
/// Residual target for numerical inverses.
pub const INVERSE_TOLERANCE: f64 = 1e-13;
/// Step for central finite-difference derivatives.
pub const FD_STEP: f64 = 1e-6;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied lift given by its restriction to `[0, 1]`.
///
/// Implementations must be continuous and strictly increasing on `[0, 1]`
/// with `value(1) = value(0) + 1`.
pub trait LiftMap: Send + Sync {
    fn name(&self) -> &str;
    fn value(&self, u: f64) -> f64;
    fn derivative(&self, _u: f64) -> Option<f64> {
        None
    }
    /// Optional bracket `[lo, hi]` (inside `[-1, 1]`) containing the
    /// preimage of the raw value `w`.
    fn preimage_bracket(&self, _w: f64) -> Option<(f64, f64)> {
        None
    }
    fn params(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
}

/// A strictly increasing `f: [0,1] → [0,1]` with `f(0) = 0`, `f(1) = 1`,
/// repeated on every unit interval.
#[derive(Clone)]
pub struct UnitGraph {
    name: String,
    f: RealFn,
    deriv: Option<RealFn>,
    inverse: Option<RealFn>,
}

impl UnitGraph {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            deriv: None,
            inverse: None,
        }
    }

    pub fn with_derivative(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.deriv = Some(Arc::new(d));
        self
    }

    pub fn with_inverse(mut self, inv: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.inverse = Some(Arc::new(inv));
        self
    }

    /// `f(x) = x²`.
    pub fn x_squared() -> Self {
        Self::new("x_squared", |x| x * x)
            .with_derivative(|x| 2.0 * x)
            .with_inverse(f64::sqrt)
    }

    /// `f(x) = (2/π)·arcsin(x)`.
    pub fn arcsin_scaled() -> Self {
        Self::new("arcsin_scaled", |x: f64| (2.0 / PI) * x.clamp(-1.0, 1.0).asin())
            .with_derivative(|x: f64| (2.0 / PI) / (1.0 - x * x).sqrt())
            .with_inverse(|y: f64| (0.5 * PI * y).sin())
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "x_squared" => Ok(Self::x_squared()),
            "arcsin_scaled" => Ok(Self::arcsin_scaled()),
            other => Err(invalid("f", format!("unknown unit graph `{other}`"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

#[derive(Clone)]
enum Family {
    Rotation {
        rho: f64,
    },
    Arnold {
        omega: f64,
        k: f64,
    },
    SinePerturb {
        a: f64,
    },
    UnitGraph(UnitGraph),
    Conjugated {
        gamma: Arc<Lift>,
        rho: f64,
    },
    Perturbed {
        base: Arc<Lift>,
        amplitude: f64,
        harmonic: u32,
    },
    Custom(Arc<dyn LiftMap>),
}

/// Evidence gathered when the lift was validated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityCertificate {
    pub grid_points: usize,
    pub min_increment: f64,
    pub seam_gap: f64,
}

/// Exact conjugacy to a rigid rotation, `Γ∘Φ = Γ + ρ`.
#[derive(Debug, Clone)]
pub struct Conjugacy {
    pub gamma: Lift,
    pub rho: f64,
}

/// Lift of an orientation-preserving circle homeomorphism.
#[derive(Clone)]
pub struct Lift {
    family: Family,
    offset: f64,
    certificate: MonotonicityCertificate,
}

impl fmt::Debug for Lift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lift")
            .field("family", &self.family_name())
            .field("params", &self.params())
            .field("offset", &self.offset)
            .finish()
    }
}

/// `Φ(x) = x + ρ`.
pub fn make_rotation(rho: f64) -> Result<Lift> {
    if !rho.is_finite() {
        return Err(invalid("rho", "must be finite"));
    }
    Lift::build(Family::Rotation { rho })
}

/// Arnold family `Φ(x) = x + ω + (k/2π)·sin(2πx)`, `0 ≤ k < 1`.
pub fn make_arnold(omega: f64, k: f64) -> Result<Lift> {
    if !omega.is_finite() {
        return Err(invalid("omega", "must be finite"));
    }
    if !(0.0..1.0).contains(&k) {
        return Err(invalid("k", format!("{k} is outside [0, 1)")));
    }
    Lift::build(Family::Arnold { omega, k })
}

/// `Φ(x) = x + (a/2π)·sin(2πx)`, `|a| < 1`. Used both as a map (fixed points
/// at 0 and 1/2) and as the conjugacy `Γ` of test maps.
pub fn make_sine_perturb(a: f64) -> Result<Lift> {
    if !(a.abs() < 1.0) {
        return Err(invalid("a", format!("|{a}| must be below 1")));
    }
    Lift::build(Family::SinePerturb { a })
}

/// Periodic extension of a unit graph: `Φ(x) = l + f(x − l)` on `[l, l+1]`.
pub fn make_unit_graph(graph: UnitGraph) -> Result<Lift> {
    let f0 = (graph.f)(0.0);
    let f1 = (graph.f)(1.0);
    if f0.abs() > 1e-12 || (f1 - 1.0).abs() > 1e-12 {
        return Err(invalid(
            "f",
            format!("endpoints must be f(0)=0, f(1)=1; got {f0}, {f1}"),
        ));
    }
    Lift::build(Family::UnitGraph(graph))
}

/// `Φ = Γ⁻¹∘(· + ρ)∘Γ`, retaining `Γ` and `ρ` as exact conjugacy metadata.
pub fn make_conjugated(gamma: Lift, rho: f64) -> Result<Lift> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(invalid("rho", format!("{rho} is outside (0, 1)")));
    }
    Lift::build(Family::Conjugated {
        gamma: Arc::new(gamma),
        rho,
    })
}

/// `Φ(x) + δ·sin(2πhx)`; a homeomorphism while `2πhδ < min Φ′`.
pub fn make_perturbed(base: Lift, amplitude: f64, harmonic: u32) -> Result<Lift> {
    if !amplitude.is_finite() {
        return Err(invalid("amplitude", "must be finite"));
    }
    if harmonic == 0 {
        return Err(invalid("harmonic", "must be positive"));
    }
    Lift::build(Family::Perturbed {
        base: Arc::new(base),
        amplitude,
        harmonic,
    })
}

/// Wraps a user-supplied map after validating it.
pub fn make_custom(map: Arc<dyn LiftMap>) -> Result<Lift> {
    Lift::build(Family::Custom(map))
}

/// `Φ⁻¹(y)`; see [`Lift::inverse`].
pub fn lift_inverse(lift: &Lift, y: f64) -> Result<f64> {
    lift.inverse(y)
}

impl Lift {
    fn build(family: Family) -> Result<Self> {
        let mut lift = Lift {
            family,
            offset: 0.0,
            certificate: MonotonicityCertificate {
                grid_points: 0,
                min_increment: 0.0,
                seam_gap: 0.0,
            },
        };
        lift.certificate = lift.certify()?;
        lift.offset = lift.raw(0.0).floor();
        Ok(lift)
    }

    fn certify(&self) -> Result<MonotonicityCertificate> {
        let n = CERTIFICATE_GRID;
        let mut prev = self.raw(0.0);
        if !prev.is_finite() {
            return Err(Error::NonFinite { at: 0.0 });
        }
        let first = prev;
        let mut min_increment = f64::INFINITY;
        for j in 1..=n {
            let u = j as f64 / n as f64;
            let v = self.raw(u);
            if !v.is_finite() {
                return Err(Error::NonFinite { at: u });
            }
            if v <= prev {
                return Err(Error::NotMonotone { at: u });
            }
            min_increment = min_increment.min(v - prev);
            prev = v;
        }
        let seam_gap = (prev - first - 1.0).abs();
        if seam_gap > SEAM_TOLERANCE {
            return Err(Error::NotDegreeOne { gap: seam_gap });
        }
        Ok(MonotonicityCertificate {
            grid_points: n,
            min_increment,
            seam_gap,
        })
    }

    /// Family formula at `u ∈ [0, 1]`, before normalization.
    fn raw(&self, u: f64) -> f64 {
        match &self.family {
            Family::Rotation { rho } => u + rho,
            Family::Arnold { omega, k } => u + omega + k / TAU * (TAU * u).sin(),
            Family::SinePerturb { a } => u + a / TAU * (TAU * u).sin(),
            Family::UnitGraph(g) => (g.f)(u),
            Family::Conjugated { gamma, rho } => gamma.inverse(gamma.eval(u) + rho).unwrap_or(f64::NAN),
            Family::Perturbed {
                base,
                amplitude,
                harmonic,
            } => base.eval(u) + amplitude * (TAU * *harmonic as f64 * u).sin(),
            Family::Custom(m) => m.value(u),
        }
    }

    /// `Φ(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        if let Family::Rotation { rho } = self.family {
            return x + rho - self.offset;
        }
        let l = x.floor();
        l + self.raw(x - l) - self.offset
    }

    /// Displacement function `Ψ(x) = Φ(x) − x` (not reduced mod 1).
    pub fn displacement(&self, x: f64) -> f64 {
        let u = mod1(x);
        match &self.family {
            Family::Rotation { rho } => rho - self.offset,
            Family::Arnold { omega, k } => omega + k / TAU * (TAU * u).sin() - self.offset,
            Family::SinePerturb { a } => a / TAU * (TAU * u).sin() - self.offset,
            _ => self.raw(u) - u - self.offset,
        }
    }

    /// Analytic `Φ′(x)` when the family provides one.
    pub fn analytic_derivative(&self, x: f64) -> Option<f64> {
        let u = mod1(x);
        match &self.family {
            Family::Rotation { .. } => Some(1.0),
            Family::Arnold { k, .. } => Some(1.0 + k * (TAU * u).cos()),
            Family::SinePerturb { a } => Some(1.0 + a * (TAU * u).cos()),
            Family::UnitGraph(g) => g.deriv.as_ref().map(|d| d(u)),
            Family::Conjugated { gamma, .. } => {
                let num = gamma.analytic_derivative(u)?;
                let den = gamma.analytic_derivative(self.raw(u))?;
                Some(num / den)
            }
            Family::Perturbed {
                base,
                amplitude,
                harmonic,
            } => {
                let h = *harmonic as f64;
                Some(base.analytic_derivative(u)? + amplitude * TAU * h * (TAU * h * u).cos())
            }
            Family::Custom(m) => m.derivative(u),
        }
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.analytic_derivative(0.37).is_some()
    }

    /// `Φ′(x)`, falling back to a central difference with step
    /// [`FD_STEP`]. The flag is `true` when the value is analytic.
    pub fn derivative(&self, x: f64) -> (f64, bool) {
        match self.analytic_derivative(x) {
            Some(d) => (d, true),
            None => {
                let h = FD_STEP;
                ((self.eval(x + h) - self.eval(x - h)) / (2.0 * h), false)
            }
        }
    }

    /// `Φ⁻¹(y)` with `|Φ(x) − y| ≤ 1e-13` (or float resolution, when the
    /// slope makes that unreachable). Uses the family's closed form when one
    /// is registered.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::NonFinite { at: y });
        }
        if let Family::Rotation { rho } = self.family {
            return Ok(y - rho + self.offset);
        }
        let l = y.floor();
        let v = y - l;
        Ok(l + self.unit_inverse(v)?)
    }

    fn unit_inverse(&self, v: f64) -> Result<f64> {
        let w = v + self.offset;
        match &self.family {
            Family::UnitGraph(g) if g.inverse.is_some() => {
                let inv = g.inverse.as_ref().unwrap();
                // w ∈ [0, 1) since unit graphs are anchored at f(0) = 0
                return Ok(inv(w));
            }
            Family::Conjugated { gamma, rho } => {
                return gamma.inverse(gamma.eval(w) - rho);
            }
            _ => {}
        }
        let (lo, hi) = match &self.family {
            Family::Custom(m) => m.preimage_bracket(w).unwrap_or((-1.0, 1.0)),
            _ => (-1.0, 1.0),
        };
        let deriv = self
            .has_analytic_derivative()
            .then_some(|x: f64| self.analytic_derivative(x).unwrap_or(f64::NAN));
        solve_increasing(|x| self.eval(x), deriv, v, lo, hi, INVERSE_TOLERANCE)
    }

    /// Integer subtracted at construction to bring `Φ(0)` into `[0, 1)`.
    pub fn offset(&self) -> i64 {
        self.offset as i64
    }

    pub fn certificate(&self) -> MonotonicityCertificate {
        self.certificate
    }

    pub fn family_name(&self) -> &str {
        match &self.family {
            Family::Rotation { .. } => "rotation",
            Family::Arnold { .. } => "arnold",
            Family::SinePerturb { .. } => "sine_perturb",
            Family::UnitGraph(_) => "unit_graph",
            Family::Conjugated { .. } => "conjugated",
            Family::Perturbed { .. } => "perturbed",
            Family::Custom(m) => m.name(),
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match &self.family {
            Family::Rotation { rho } => vec![("rho", *rho)],
            Family::Arnold { omega, k } => vec![("omega", *omega), ("k", *k)],
            Family::SinePerturb { a } => vec![("a", *a)],
            Family::UnitGraph(_) => Vec::new(),
            Family::Conjugated { rho, .. } => vec![("rho", *rho)],
            Family::Perturbed {
                amplitude, harmonic, ..
            } => vec![("amplitude", *amplitude), ("harmonic", *harmonic as f64)],
            Family::Custom(m) => m.params(),
        }
    }

    /// True when `Φ` is a rigid rotation (so `Ψ` is constant).
    pub fn is_rotation(&self) -> bool {
        match &self.family {
            Family::Rotation { .. } => true,
            Family::Arnold { k, .. } => *k == 0.0,
            Family::SinePerturb { a } => *a == 0.0,
            _ => false,
        }
    }

    /// Exact conjugacy to a rotation, when the map was built with one.
    pub fn conjugacy(&self) -> Option<Conjugacy> {
        match &self.family {
            Family::Rotation { rho } => Some(Conjugacy {
                gamma: make_rotation(0.0).expect("identity is a valid lift"),
                rho: mod1(*rho),
            }),
            Family::Arnold { omega, k } if *k == 0.0 => Some(Conjugacy {
                gamma: make_rotation(0.0).expect("identity is a valid lift"),
                rho: mod1(*omega),
            }),
            Family::Conjugated { gamma, rho } => Some(Conjugacy {
                gamma: (**gamma).clone(),
                rho: *rho,
            }),
            _ => None,
        }
    }

    /// Rotation number known in closed form, reduced to `[0, 1)`.
    pub fn exact_rotation_number(&self) -> Option<f64> {
        self.conjugacy().map(|c| c.rho)
    }
}

/// Declarative description of a lift, as read from JSON or the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Rotation {
        rho: f64,
    },
    Arnold {
        omega: f64,
        k: f64,
    },
    SinePerturb {
        a: f64,
    },
    UnitGraph {
        f: String,
    },
    Conjugated {
        rho: f64,
        gamma: Box<MapSpec>,
    },
    Perturbed {
        base: Box<MapSpec>,
        amplitude: f64,
        #[serde(default = "default_harmonic")]
        harmonic: u32,
    },
    Firing {
        model: FiringModelSpec,
    },
}

fn default_harmonic() -> u32 {
    2
}

impl MapSpec {
    pub fn build(&self) -> Result<Lift> {
        match self {
            MapSpec::Rotation { rho } => make_rotation(*rho),
            MapSpec::Arnold { omega, k } => make_arnold(*omega, *k),
            MapSpec::SinePerturb { a } => make_sine_perturb(*a),
            MapSpec::UnitGraph { f } => make_unit_graph(UnitGraph::named(f)?),
            MapSpec::Conjugated { rho, gamma } => make_conjugated(gamma.build()?, *rho),
            MapSpec::Perturbed {
                base,
                amplitude,
                harmonic,
            } => make_perturbed(base.build()?, *amplitude, *harmonic),
            MapSpec::Firing { model } => FiringModel::from_spec(model)?.firing_lift(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("map specs serialize")
    }
}

fn parse_num(s: &str) -> Result<f64> {
    match s.trim() {
        "golden" => Ok((5f64.sqrt() - 1.0) / 2.0),
        t => t
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("`{t}` is not a number: {e}"))),
    }
}

impl FromStr for MapSpec {
    type Err = Error;

    /// Accepts JSON (`{"family":"arnold","omega":0.25,"k":0.9}`) or the
    /// shorthand `family:args`, e.g. `rotation:0.3`, `arnold:0.25,0.9`,
    /// `unit_graph:x_squared`, `sine_perturb:-0.5`, `conjugated:golden,0.5`
    /// (sine-perturbed conjugacy with amplitude 0.5).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()));
        }
        let (family, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<f64>> { args.split(',').map(parse_num).collect() };
        let arity = |v: &Vec<f64>, n: usize| -> Result<()> {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!("`{family}` takes {n} argument(s)")))
            }
        };
        match family {
            "rotation" => {
                let v = nums()?;
                arity(&v, 1)?;
                Ok(MapSpec::Rotation { rho: v[0] })
            }
            "arnold" => {
                let v = nums()?;
                arity(&v, 2)?;
                Ok(MapSpec::Arnold { omega: v[0], k: v[1] })
            }
            "sine_perturb" => {
                let v = nums()?;
                arity(&v, 1)?;
                Ok(MapSpec::SinePerturb { a: v[0] })
            }
            "unit_graph" => Ok(MapSpec::UnitGraph { f: args.to_string() }),
            "conjugated" => {
                let v = nums()?;
                arity(&v, 2)?;
                Ok(MapSpec::Conjugated {
                    rho: v[0],
                    gamma: Box::new(MapSpec::SinePerturb { a: v[1] }),
                })
            }
            other => Err(Error::Parse(format!("unknown map family `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    #[test]
    fn rotation_examples() {
        let r = make_rotation(0.3).unwrap();
        assert_eq!(r.eval(0.1), 0.1 + 0.3);
        assert!((r.eval(1.1) - 1.4).abs() < 1e-12);
        assert_eq!(r.analytic_derivative(0.7), Some(1.0));
        let id = make_rotation(0.0).unwrap();
        assert_eq!(id.eval(0.123), 0.123);
    }

    #[test]
    fn arnold_examples() {
        let a = make_arnold(0.25, 0.0).unwrap();
        assert_eq!(a.eval(0.0), 0.25);
        let a = make_arnold(0.0, 0.5).unwrap();
        assert!((a.eval(0.25) - (0.25 + 0.5 / TAU)).abs() < 1e-15);
        assert!((a.eval(0.25) - 0.329577).abs() < 1e-6);
        assert!(make_arnold(0.25, 0.9).is_ok());
        assert!(matches!(make_arnold(0.25, 1.0), Err(Error::InvalidParameter { .. })));
        assert!(matches!(make_arnold(0.25, -0.1), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn unit_graph_examples() {
        let sq = make_unit_graph(UnitGraph::x_squared()).unwrap();
        assert_eq!(sq.eval(0.5), 0.25);
        assert_eq!(sq.eval(1.5), 1.25);
        let asn = make_unit_graph(UnitGraph::arcsin_scaled()).unwrap();
        assert!((asn.eval(0.5) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unit_graph_rejects_bad_graphs() {
        let shifted = UnitGraph::new("shifted", |x| 0.5 * x + 0.1);
        assert!(matches!(make_unit_graph(shifted), Err(Error::InvalidParameter { .. })));
        let bump = UnitGraph::new("bump", |x| x + 0.3 * (PI * x).sin() * (3.0 * PI * x).sin());
        assert!(matches!(make_unit_graph(bump), Err(Error::NotMonotone { .. })));
    }

    #[test]
    fn conjugated_with_identity_is_rotation() {
        let id = make_rotation(0.0).unwrap();
        let c = make_conjugated(id, 0.3).unwrap();
        let r = make_rotation(0.3).unwrap();
        for j in 0..1000 {
            let x = -1.0 + 3.0 * j as f64 / 1000.0;
            assert!((c.eval(x) - r.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugated_sine_value_matches_grid_inversion() {
        let a = 0.5;
        let gamma = make_sine_perturb(a).unwrap();
        let c = make_conjugated(gamma, golden()).unwrap();
        // Φ(0) = Γ⁻¹(ρ) since Γ(0) = 0; invert Γ on a fine monotone grid
        // and refine linearly inside the bracketing cell.
        let g = |x: f64| x + a / TAU * (TAU * x).sin();
        let n = 1 << 20;
        let target = golden();
        let mut j = 0usize;
        while g((j + 1) as f64 / n as f64) < target {
            j += 1;
        }
        let (x0, x1) = (j as f64 / n as f64, (j + 1) as f64 / n as f64);
        let (g0, g1) = (g(x0), g(x1));
        let oracle = x0 + (target - g0) / (g1 - g0) * (x1 - x0);
        assert!((c.eval(0.0) - oracle).abs() < 1e-11, "{} vs {}", c.eval(0.0), oracle);
        assert!((g(c.eval(0.0)) - target).abs() < 1e-13);
    }

    #[test]
    fn inverse_examples() {
        let r = make_rotation(0.3).unwrap();
        assert!((lift_inverse(&r, 0.4).unwrap() - 0.1).abs() < 1e-15);
        let a = make_arnold(0.0, 0.5).unwrap();
        assert!((lift_inverse(&a, a.eval(0.3)).unwrap() - 0.3).abs() < 1e-12);
        let sq = make_unit_graph(UnitGraph::x_squared()).unwrap();
        assert_eq!(lift_inverse(&sq, 0.25).unwrap(), 0.5);
    }

    #[test]
    fn inverse_shifts_by_one() {
        let a = make_arnold(0.1, 0.8).unwrap();
        for &y in &[0.05, 0.4, 0.93] {
            let x0 = a.inverse(y).unwrap();
            let x1 = a.inverse(y + 1.0).unwrap();
            assert!((x1 - x0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_moves_phi0_into_unit_interval() {
        let a = make_arnold(1.25, 0.3).unwrap();
        assert_eq!(a.offset(), 1);
        assert!((0.0..1.0).contains(&a.eval(0.0)));
        let b = make_arnold(0.25, 0.3).unwrap();
        assert!((a.eval(0.7) - b.eval(0.7)).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_derivative_is_second_order() {
        let a = make_arnold(0.2, 0.7).unwrap();
        for &x in &[0.0, 0.13, 0.5, 0.77] {
            let exact = a.analytic_derivative(x).unwrap();
            let e1 = ((a.eval(x + 1e-2) - a.eval(x - 1e-2)) / 2e-2 - exact).abs();
            let e2 = ((a.eval(x + 5e-3) - a.eval(x - 5e-3)) / 1e-2 - exact).abs();
            // halving h cuts the error by about four
            assert!(e2 < 0.3 * e1 + 1e-12, "x={x}: {e1} {e2}");
        }
    }

    #[test]
    fn conjugated_derivative_matches_finite_difference() {
        let c = make_conjugated(make_sine_perturb(0.5).unwrap(), golden()).unwrap();
        for &x in &[0.0, 0.21, 0.5, 0.9] {
            let exact = c.analytic_derivative(x).unwrap();
            let fd = (c.eval(x + 1e-5) - c.eval(x - 1e-5)) / 2e-5;
            assert!((exact - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn map_spec_json_round_trip() {
        let spec: MapSpec = r#"{"family":"conjugated","rho":0.6180339887,"gamma":{"family":"sine_perturb","a":0.5}}"#
            .parse()
            .unwrap();
        assert_eq!(
            spec,
            MapSpec::Conjugated {
                rho: 0.6180339887,
                gamma: Box::new(MapSpec::SinePerturb { a: 0.5 })
            }
        );
        let back: MapSpec = spec.to_json().parse().unwrap();
        assert_eq!(back, spec);
        let arnold: MapSpec = r#"{"family":"arnold","omega":0.25,"k":0.9}"#.parse().unwrap();
        assert_eq!(arnold, MapSpec::Arnold { omega: 0.25, k: 0.9 });
        let ug: MapSpec = r#"{"family":"unit_graph","f":"x_squared"}"#.parse().unwrap();
        assert!(ug.build().is_ok());
    }

    #[test]
    fn map_spec_shorthand() {
        assert_eq!(
            "rotation:0.3".parse::<MapSpec>().unwrap(),
            MapSpec::Rotation { rho: 0.3 }
        );
        assert_eq!(
            "arnold:0.25,0.9".parse::<MapSpec>().unwrap(),
            MapSpec::Arnold { omega: 0.25, k: 0.9 }
        );
        assert!("arnold:0.25".parse::<MapSpec>().is_err());
        assert!("nonsense:1".parse::<MapSpec>().is_err());
        assert!(MapSpec::UnitGraph { f: "cubic".into() }.build().is_err());
    }

    fn any_lift() -> impl Strategy<Value = Lift> {
        prop_oneof![
            (-2.0..2.0f64).prop_map(|r| make_rotation(r).unwrap()),
            (-1.0..2.0f64, 0.0..0.99f64).prop_map(|(o, k)| make_arnold(o, k).unwrap()),
            (-0.9..0.9f64).prop_map(|a| make_sine_perturb(a).unwrap()),
            Just(make_unit_graph(UnitGraph::x_squared()).unwrap()),
            Just(make_unit_graph(UnitGraph::arcsin_scaled()).unwrap()),
            (0.05..0.95f64, -0.8..0.8f64).prop_map(|(r, a)| make_conjugated(make_sine_perturb(a).unwrap(), r).unwrap()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn degree_one_and_round_trip(lift in any_lift(), xs in prop::collection::vec(0.0..2.0f64, 16)) {
            for &x in &xs {
                prop_assert!((lift.eval(x + 1.0) - lift.eval(x) - 1.0).abs() <= 1e-12);
                let back = lift.inverse(lift.eval(x)).unwrap();
                prop_assert!((back - x).abs() <= 1e-11, "x={} back={}", x, back);
            }
        }

        #[test]
        fn strictly_increasing_on_random_pairs(lift in any_lift(), a in -1.0..2.0f64, d in 1e-6..1.0f64) {
            prop_assert!(lift.eval(a) < lift.eval(a + d));
        }

        #[test]
        fn arnold_without_coupling_is_rotation(omega in -1.0..1.0f64, x in -3.0..3.0f64) {
            let a = make_arnold(omega, 0.0).unwrap();
            let r = make_rotation(omega).unwrap();
            prop_assert!((a.eval(x) - r.eval(x)).abs() < 1e-12);
        }
    }
}
