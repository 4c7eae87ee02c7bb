//! Rational rotation numbers: periodic orbits, the τ± functions, basins
//! shreds and the universal iteration bound.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::Lift;
use crate::numerics::{bisect_predicate, circle_diameter, circle_dist, golden_section_min, mod1};
use crate::orbits::{rotation_number, DisplacementSeries};

/// Grid used to scan `g(x) = Φ^q(x) − x − p` on `[0, 1]`.
pub const PERIODIC_GRID: usize = 1 << 14;
/// Grid values with `|g|` at or below this count as zeros.
pub const ZERO_TOLERANCE: f64 = 1e-13;
/// More roots than this are treated as a dense set of periodic points.
pub const DENSE_ROOTS: usize = 1024;
/// Cap on `m` in the search for `m̃`.
pub const M_CAP: usize = 1_000_000;
/// Iterations past `N` checked by [`verify_forward_backward`].
pub const CHECK_HORIZON: usize = 64;

const TANGENCY_CANDIDATE: f64 = 1e-8;
const TANGENCY_ACCEPT: f64 = 1e-10;
const PLATEAU_WIDTH: f64 = 1e-12;

/// Behaviour of `Φ^q` on one side of a periodic point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Attracting,
    Repelling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicPoint {
    /// Position in `[0, 1)`.
    pub x: f64,
    pub left: Side,
    pub right: Side,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodicKind {
    /// Finitely many periodic points, all listed.
    Isolated,
    /// `Φ^q = id + p`: every point is periodic (conjugate to a rotation).
    AllPeriodic,
    /// More periodic points than the scan can resolve.
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum End {
    Lower,
    Upper,
}

/// The open arc between two consecutive periodic points, in lift
/// coordinates (`lower < upper ≤ lower + 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasinInterval {
    pub lower: f64,
    pub upper: f64,
    /// Which end attracts the interior under `Φ^q`.
    pub attracting: End,
}

impl BasinInterval {
    /// The attracting endpoint `z⁺`.
    pub fn z_plus(&self) -> f64 {
        match self.attracting {
            End::Lower => self.lower,
            End::Upper => self.upper,
        }
    }

    /// The repelling endpoint `z⁻`.
    pub fn z_minus(&self) -> f64 {
        match self.attracting {
            End::Lower => self.upper,
            End::Upper => self.lower,
        }
    }

    /// Point at fraction `s` of the way from `z⁻` to `z⁺`.
    pub fn at(&self, s: f64) -> f64 {
        let (zm, zp) = (self.z_minus(), self.z_plus());
        if s >= 1.0 {
            zp
        } else {
            zm + s * (zp - zm)
        }
    }

    /// Inverse of [`BasinInterval::at`].
    pub fn coordinate(&self, z: f64) -> Result<f64> {
        let (zm, zp) = (self.z_minus(), self.z_plus());
        if z < self.lower || z > self.upper {
            return Err(Error::OutsideInterval {
                z,
                lo: self.lower,
                hi: self.upper,
            });
        }
        Ok((z - zm) / (zp - zm))
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.lower && z <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicStructure {
    pub q: u64,
    pub p: i64,
    pub kind: PeriodicKind,
    /// Sorted periodic points in `[0, 1)`; empty unless `kind` is isolated.
    pub points: Vec<PeriodicPoint>,
    intervals: Vec<BasinInterval>,
}

impl PeriodicStructure {
    pub fn intervals(&self) -> &[BasinInterval] {
        &self.intervals
    }

    /// The interval containing `z` (reduced mod 1 first).
    pub fn interval_of(&self, z: f64) -> Option<(usize, f64)> {
        let u = mod1(z);
        self.intervals.iter().enumerate().find_map(|(k, iv)| {
            if iv.contains(u) {
                Some((k, u))
            } else if iv.contains(u + 1.0) {
                Some((k, u + 1.0))
            } else {
                None
            }
        })
    }
}

/// `Φ^q(x) − x − p`.
pub fn displacement_after(lift: &Lift, x: f64, q: u64, p: i64) -> f64 {
    let mut y = x;
    for _ in 0..q {
        y = lift.eval(y);
    }
    (y - p as f64) - x
}

/// Locates the points of period `q` with winding `p` on a grid scan of `g`.
pub fn find_periodic_points(lift: &Lift, q: u64, p: i64) -> Result<PeriodicStructure> {
    if q == 0 {
        return Err(crate::error::invalid("q", "period must be positive"));
    }
    let n = PERIODIC_GRID;
    let g = |x: f64| displacement_after(lift, x, q, p);
    let xs: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    let gs: Vec<f64> = xs.par_iter().map(|&x| g(x)).collect();
    if let Some(j) = gs.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { at: xs[j] });
    }

    let zero = |v: f64| v.abs() <= ZERO_TOLERANCE;
    if gs.iter().all(|&v| zero(v)) {
        return Ok(PeriodicStructure {
            q,
            p,
            kind: PeriodicKind::AllPeriodic,
            points: Vec::new(),
            intervals: Vec::new(),
        });
    }

    let mut roots = Vec::new();
    let mut zero_run = 0usize;
    for j in 0..=n {
        if zero(gs[j]) {
            zero_run += 1;
            roots.push(xs[j]);
            continue;
        }
        if zero_run > 1 {
            // a whole arc of periodic points
            return Ok(dense(q, p));
        }
        zero_run = 0;
        if j < n && !zero(gs[j + 1]) && gs[j].signum() != gs[j + 1].signum() {
            let positive_at_hi = gs[j + 1] > 0.0;
            let (lo, hi) = bisect_predicate(|x| (g(x) > 0.0) != positive_at_hi, xs[j], xs[j + 1]);
            roots.push(0.5 * (lo + hi));
        }
        if j > 0 && j < n && !zero(gs[j - 1]) && !zero(gs[j + 1]) {
            let a = gs[j].abs();
            let same_sign = gs[j - 1].signum() == gs[j].signum() && gs[j + 1].signum() == gs[j].signum();
            if same_sign && a < TANGENCY_CANDIDATE && a <= gs[j - 1].abs() && a <= gs[j + 1].abs() {
                let (x, fx) = golden_section_min(|x| g(x).abs(), xs[j - 1], xs[j + 1], 1e-12);
                if fx < TANGENCY_ACCEPT {
                    roots.push(x);
                }
            }
        }
        if roots.len() > DENSE_ROOTS {
            return Ok(dense(q, p));
        }
    }
    if zero_run > 1 {
        return Ok(dense(q, p));
    }

    let mut pts: Vec<f64> = roots.into_iter().map(mod1).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|b, a| circle_dist(*a, *b) < 1e-9);
    if pts.len() > 1 && circle_dist(pts[0], *pts.last().unwrap()) < 1e-9 {
        pts.pop();
    }
    if pts.is_empty() {
        return Err(Error::NoPeriodicPoints { q, p });
    }

    let k = pts.len();
    let mut intervals = Vec::with_capacity(k);
    for j in 0..k {
        let lower = pts[j];
        let upper = if j + 1 < k { pts[j + 1] } else { pts[0] + 1.0 };
        let sign = interval_sign(&g, lower, upper);
        intervals.push(BasinInterval {
            lower,
            upper,
            // g < 0 moves points down toward the lower end
            attracting: if sign < 0.0 { End::Lower } else { End::Upper },
        });
    }
    let points = (0..k)
        .map(|j| {
            let right = intervals[j].attracting == End::Lower;
            let left = intervals[(j + k - 1) % k].attracting == End::Upper;
            let side = |a: bool| if a { Side::Attracting } else { Side::Repelling };
            PeriodicPoint {
                x: pts[j],
                left: side(left),
                right: side(right),
            }
        })
        .collect();
    Ok(PeriodicStructure {
        q,
        p,
        kind: PeriodicKind::Isolated,
        points,
        intervals,
    })
}

fn dense(q: u64, p: i64) -> PeriodicStructure {
    PeriodicStructure {
        q,
        p,
        kind: PeriodicKind::Dense,
        points: Vec::new(),
        intervals: Vec::new(),
    }
}

/// Sign of `g` inside `(lower, upper)`, read where `|g|` is largest among a
/// few interior samples.
fn interval_sign<G: Fn(f64) -> f64>(g: &G, lower: f64, upper: f64) -> f64 {
    (1..16)
        .map(|j| g(lower + (upper - lower) * j as f64 / 16.0))
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0)
        .signum()
}

/// Forward first-return map `h(x) = Φ^q(x) − p`, which keeps a basin
/// interval in place.
fn forward_return(lift: &Lift, x: f64, q: u64, p: i64) -> f64 {
    let mut y = x;
    for _ in 0..q {
        y = lift.eval(y);
    }
    y - p as f64
}

fn backward_return(lift: &Lift, x: f64, q: u64, p: i64) -> Result<f64> {
    let mut y = x + p as f64;
    for _ in 0..q {
        y = lift.inverse(y)?;
    }
    Ok(y)
}

fn check_m(m: usize) -> Result<()> {
    if m > M_CAP {
        return Err(Error::NonConvergence {
            what: "tau iteration",
            cap: M_CAP,
        });
    }
    Ok(())
}

/// `τ⁺_m(z) = max_{i<q} |Φ^{mq+i}(z) − Φ^i(z⁺)|` (measured along the lift
/// with the winding `mp` removed).
pub fn tau_plus(lift: &Lift, ps: &PeriodicStructure, iv: &BasinInterval, m: usize, z: f64) -> Result<f64> {
    iv.coordinate(z)?;
    check_m(m)?;
    let zp = iv.z_plus();
    if z == zp {
        return Ok(0.0);
    }
    let mut y = z;
    for _ in 0..m {
        y = forward_return(lift, y, ps.q, ps.p);
    }
    let mut target = zp;
    let mut best = (y - target).abs();
    for _ in 1..ps.q {
        y = lift.eval(y);
        target = lift.eval(target);
        best = best.max((y - target).abs());
    }
    Ok(best)
}

/// `τ⁻_m(z) = max_{i<q} |Φ^{−mq−i}(z) − Φ^{−i}(z⁻)|`.
pub fn tau_minus(lift: &Lift, ps: &PeriodicStructure, iv: &BasinInterval, m: usize, z: f64) -> Result<f64> {
    iv.coordinate(z)?;
    check_m(m)?;
    let zm = iv.z_minus();
    if z == zm {
        return Ok(0.0);
    }
    let mut y = z;
    for _ in 0..m {
        y = backward_return(lift, y, ps.q, ps.p)?;
    }
    let mut target = zm;
    let mut best = (y - target).abs();
    for _ in 1..ps.q {
        y = lift.inverse(y)?;
        target = lift.inverse(target)?;
        best = best.max((y - target).abs());
    }
    Ok(best)
}

/// Boundaries of `U⁺_m(ε)` and `U⁻_m(ε)` in the interval coordinate `s`
/// (0 at `z⁻`, 1 at `z⁺`): `U⁺ = (a, 1]`, `U⁻ = [0, b)`.
fn neighbourhoods(lift: &Lift, ps: &PeriodicStructure, iv: &BasinInterval, m: usize, eps: f64) -> Result<(f64, f64)> {
    let tp = |s: f64| tau_plus(lift, ps, iv, m, iv.at(s));
    let tm = |s: f64| tau_minus(lift, ps, iv, m, iv.at(s));
    let mut err = None;
    let mut guard = |r: Result<f64>| match r {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    };
    let a = if guard(tp(0.0)) < eps {
        0.0
    } else {
        bisect_predicate(|s| !(guard(tp(s)) < eps), 0.0, 1.0).0
    };
    let b = if guard(tm(1.0)) < eps {
        1.0
    } else {
        bisect_predicate(|s| guard(tm(s)) < eps, 0.0, 1.0).1
    };
    match err {
        Some(e) => Err(e),
        None => Ok((a, b)),
    }
}

/// `m̃` and the boundaries `a`, `b` of the two ε-neighbourhoods, as points
/// of the interval. `U⁺` is the part between `a` and `z⁺`, `U⁻` the part
/// between `z⁻` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MTilde {
    pub m_tilde: usize,
    pub a: f64,
    pub b: f64,
    /// `a` and `b` as fractions of the way from `z⁻` to `z⁺`.
    pub a_s: f64,
    pub b_s: f64,
}

/// Smallest `m ≥ 0` with `U⁺_m(ε) ∩ U⁻_m(ε) ≠ ∅`.
pub fn find_m_tilde(lift: &Lift, ps: &PeriodicStructure, iv: &BasinInterval, eps: f64) -> Result<MTilde> {
    if !(eps > 0.0) {
        return Err(crate::error::invalid("eps", "must be positive"));
    }
    let meets = |m: usize| -> Result<Option<(f64, f64)>> {
        let (a, b) = neighbourhoods(lift, ps, iv, m, eps)?;
        Ok((a < b).then_some((a, b)))
    };
    // a_m decreases and b_m increases with m, so overlap is monotone in m
    let mut hi = 0usize;
    let mut found = meets(0)?;
    let mut lo = 0usize;
    while found.is_none() {
        lo = hi;
        hi = if hi == 0 { 1 } else { hi * 2 };
        if hi > M_CAP {
            return Err(Error::NonConvergence {
                what: "m-tilde search",
                cap: M_CAP,
            });
        }
        found = meets(hi)?;
    }
    let mut best = (hi, found.unwrap());
    if hi > 0 {
        // lo fails, hi meets
        while best.0 - lo > 1 {
            let mid = lo + (best.0 - lo) / 2;
            match meets(mid)? {
                Some(ab) => best = (mid, ab),
                None => lo = mid,
            }
        }
    }
    let (m, (a_s, b_s)) = best;
    Ok(MTilde {
        m_tilde: m,
        a: iv.at(a_s),
        b: iv.at(b_s),
        a_s,
        b_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShredResult {
    pub interval: BasinInterval,
    pub eps: f64,
    pub m_tilde: usize,
    pub a: f64,
    pub b: f64,
    /// The ε-basins-shred `z̃`.
    pub shred: f64,
    /// `τ⁺ − τ⁻` vanished on an interval wider than float noise; `shred`
    /// is its midpoint.
    pub plateau: bool,
    /// Points reaching the attracting orbit within `m̃q` forward steps:
    /// from the shred to `z⁺`.
    pub basin_plus: (f64, f64),
    /// Points reaching the repelling orbit within `m̃q` backward steps:
    /// from `z⁻` to the shred.
    pub basin_minus: (f64, f64),
}

/// Balances `τ⁺_{m̃}` against `τ⁻_{m̃}` between `a` and `b`.
pub fn compute_shred(lift: &Lift, ps: &PeriodicStructure, iv: &BasinInterval, eps: f64) -> Result<ShredResult> {
    let mt = find_m_tilde(lift, ps, iv, eps)?;
    let m = mt.m_tilde;
    let mut err = None;
    let mut diff = |s: f64| {
        let z = iv.at(s);
        let r = tau_plus(lift, ps, iv, m, z).and_then(|p| Ok(p - tau_minus(lift, ps, iv, m, z)?));
        match r {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        }
    };
    // τ⁺ − τ⁻ decreases in s
    let (pos_edge, _) = bisect_predicate(|s| diff(s) > 0.0, mt.a_s, mt.b_s);
    let (_, neg_edge) = bisect_predicate(|s| diff(s) >= 0.0, mt.a_s, mt.b_s);
    if let Some(e) = err {
        return Err(e);
    }
    let plateau = neg_edge - pos_edge > PLATEAU_WIDTH;
    let s = 0.5 * (pos_edge + neg_edge);
    let shred = iv.at(s);
    let (zm, zp) = (iv.z_minus(), iv.z_plus());
    Ok(ShredResult {
        interval: *iv,
        eps,
        m_tilde: m,
        a: mt.a,
        b: mt.b,
        shred,
        plateau,
        basin_plus: (shred, zp),
        basin_minus: (zm, shred),
    })
}

/// Shreds of every interval, computed in parallel.
pub fn compute_shreds(lift: &Lift, ps: &PeriodicStructure, eps: f64) -> Result<Vec<ShredResult>> {
    ps.intervals()
        .par_iter()
        .map(|iv| compute_shred(lift, ps, iv, eps))
        .collect()
}

/// `(z, τ⁺_m(z), τ⁻_m(z))` on a uniform grid of `n + 1` points.
pub fn tau_profile(
    lift: &Lift,
    ps: &PeriodicStructure,
    iv: &BasinInterval,
    m: usize,
    n: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    let n = n.max(1);
    (0..=n)
        .into_par_iter()
        .map(|j| {
            let z = iv.lower + (iv.upper - iv.lower) * j as f64 / n as f64;
            let z = z.min(iv.upper);
            Ok((z, tau_plus(lift, ps, iv, m, z)?, tau_minus(lift, ps, iv, m, z)?))
        })
        .collect()
}

/// Iterates used to classify the rotation number in [`universal_n`].
pub const CLASSIFY_ITERATES: usize = 100_000;

/// Universal `N` for a map with rational rotation number.
pub fn universal_n(lift: &Lift, eps: f64) -> Result<usize> {
    let est = rotation_number(lift, 0.0, CLASSIFY_ITERATES)?;
    let Some((p, q)) = est.pq() else {
        return Err(Error::IrrationalRotation { value: est.value });
    };
    let ps = find_periodic_points(lift, q, p)?;
    universal_n_for(lift, &ps, eps)
}

/// `N = max_k m̃_k(ε)` over the intervals of a known structure.
pub fn universal_n_for(lift: &Lift, ps: &PeriodicStructure, eps: f64) -> Result<usize> {
    match ps.kind {
        PeriodicKind::AllPeriodic => Ok(0),
        PeriodicKind::Dense => {
            log::warn!(
                "more than {DENSE_ROOTS} points of period {} detected; every point is treated as periodic",
                ps.q
            );
            Ok(0)
        }
        PeriodicKind::Isolated => {
            let ms: Vec<usize> = ps
                .intervals()
                .par_iter()
                .map(|iv| find_m_tilde(lift, ps, iv, eps).map(|m| m.m_tilde))
                .collect::<Result<_>>()?;
            Ok(ms.into_iter().max().unwrap_or(0))
        }
    }
}

/// True iff every residue class mod `q` of the tail past `burn_in` has
/// circle diameter below `eps`.
pub fn verify_asymptotic_periodicity(d: &DisplacementSeries, q: u64, eps: f64, burn_in: usize) -> Result<bool> {
    let q = q as usize;
    let need = burn_in + 10 * q;
    if q == 0 || d.len() < need {
        return Err(Error::SeriesTooShort { len: d.len(), need });
    }
    let tail = &d.values[burn_in..];
    Ok((0..q).into_par_iter().all(|r| {
        let class: Vec<f64> = tail.iter().skip(r).step_by(q).copied().collect();
        circle_diameter(&class) < eps
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Forward,
    Backward,
    Both,
}

impl Which {
    fn from_flags(forward: bool, backward: bool) -> Option<Self> {
        match (forward, backward) {
            (true, true) => Some(Which::Both),
            (true, false) => Some(Which::Forward),
            (false, true) => Some(Which::Backward),
            (false, false) => None,
        }
    }
}

/// Which of the two orbit conditions holds at `x0` for the bound `n_univ`:
/// forward, `d(Φ^{nq+i}(x0), Φ^i(z)) < ε` for a periodic point `z`, all
/// `i < q` and `n` from `n_univ` to `n_univ + CHECK_HORIZON`; backward, the
/// same with `Φ^{-1}`.
pub fn verify_forward_backward(lift: &Lift, ps: &PeriodicStructure, x0: f64, eps: f64, n_univ: usize) -> Result<Which> {
    if ps.kind != PeriodicKind::Isolated {
        return Ok(Which::Both);
    }
    let forward = orbit_condition(lift, ps, x0, eps, n_univ, true)?;
    let backward = orbit_condition(lift, ps, x0, eps, n_univ, false)?;
    Which::from_flags(forward, backward).ok_or(Error::InvariantViolation { x0 })
}

fn orbit_condition(
    lift: &Lift,
    ps: &PeriodicStructure,
    x0: f64,
    eps: f64,
    n_univ: usize,
    forward: bool,
) -> Result<bool> {
    let q = ps.q as usize;
    let step = |x: f64| -> Result<f64> {
        if forward {
            Ok(lift.eval(x))
        } else {
            lift.inverse(x)
        }
    };
    let mut x = mod1(x0);
    for _ in 0..n_univ * q {
        x = mod1(step(x)?);
    }
    // the orbit block of length q starting at x, tracked for CHECK_HORIZON
    // further blocks
    let len = (CHECK_HORIZON + 1) * q;
    let mut orbit = Vec::with_capacity(len);
    for _ in 0..len {
        orbit.push(x);
        x = mod1(step(x)?);
    }
    for pt in &ps.points {
        let mut z = pt.x;
        let mut per = Vec::with_capacity(q);
        for _ in 0..q {
            per.push(z);
            z = mod1(step(z)?);
        }
        if orbit.iter().enumerate().all(|(k, &y)| circle_dist(y, per[k % q]) < eps) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Which of the displacement conditions holds at `x0`: forward,
/// `d(η_{n+lq}, η_n) < ε` for `n ≥ n_univ·q`; backward, the same for the
/// mirrored sequence `η_{-n}`. Both are checked over
/// `CHECK_HORIZON` further periods.
pub fn verify_displacement_conditions(
    lift: &Lift,
    ps: &PeriodicStructure,
    x0: f64,
    eps: f64,
    n_univ: usize,
) -> Result<Which> {
    use crate::orbits::{displacement_sequence_dir, Direction};
    let q = ps.q as usize;
    let len = (n_univ + CHECK_HORIZON + 1) * q;
    let check = |dir| -> Result<bool> {
        let d = displacement_sequence_dir(lift, x0, len, dir)?;
        verify_asymptotic_periodicity(&d, ps.q, eps, n_univ * q)
    };
    let forward = check(Direction::Forward)?;
    let backward = check(Direction::Backward)?;
    Which::from_flags(forward, backward).ok_or(Error::InvariantViolation { x0 })
}
