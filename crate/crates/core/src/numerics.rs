//! Small numerical helpers shared by the rest of the crate: circle
//! arithmetic, compensated reductions, bracketed root solves and
//! continued-fraction convergents.

use crate::error::{Error, Result};

/// Fractional part in `[0, 1)`.
#[inline]
pub fn mod1(x: f64) -> f64 {
    let r = x - x.floor();
    // x = -1e-18 gives r = 1.0 after rounding
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance on the unit circle `R/Z`.
#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = mod1(a - b);
    d.min(1.0 - d)
}

/// Pairwise (cascade) summation; the result does not depend on thread
/// scheduling since it is always applied to an ordered slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean via pairwise summation. Empty input gives NaN.
pub fn pairwise_mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Solves `f(x) = target` for a nondecreasing `f` on `[lo, hi]`, with
/// `f(lo) <= target <= f(hi)`. Uses Newton steps when a derivative is
/// supplied and falls back to bisection whenever a step leaves the bracket.
/// Stops when the residual is within `tol` or the bracket has collapsed to
/// adjacent floats.
pub fn solve_increasing<F, D>(f: F, df: Option<D>, target: f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let flo = f(lo) - target;
    let fhi = f(hi) - target;
    if !(flo <= 0.0 && fhi >= 0.0) {
        return Err(Error::InverseBracket { y: target });
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    let mut x = 0.5 * (lo + hi);
    let mut prev_residual = f64::INFINITY;
    for _ in 0..200 {
        let fx = f(x) - target;
        if !fx.is_finite() {
            return Err(Error::NonFinite { at: x });
        }
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(if (f(lo) - target).abs() < (f(hi) - target).abs() {
                lo
            } else {
                hi
            });
        }
        // Newton only while it keeps halving the residual; otherwise it can
        // cycle between the two sides of an inflection
        let fast = fx.abs() <= 0.5 * prev_residual;
        prev_residual = fx.abs();
        let newton = df.as_ref().filter(|_| fast).and_then(|d| {
            let slope = d(x);
            (slope > 0.0 && slope.is_finite()).then(|| x - fx / slope)
        });
        x = match newton {
            Some(n) if n > lo && n < hi => n,
            _ => mid,
        };
    }
    Err(Error::NonConvergence {
        what: "bracketed solve",
        cap: 200,
    })
}

/// Boundary of a monotone predicate on `[lo, hi]`: `pred(lo)` must be true
/// and `pred(hi)` false. Returns `(last_true, first_false)` bracketing the
/// switch to float resolution.
pub fn bisect_predicate<P: FnMut(f64) -> bool>(mut pred: P, mut lo: f64, mut hi: f64) -> (f64, f64) {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Continued-fraction convergents `p/q` of `x` with `q <= q_max`.
pub fn convergents(x: f64, q_max: u64) -> Vec<(i64, u64)> {
    let mut out = Vec::new();
    let (mut p_prev, mut p) = (1i64, x.floor() as i64);
    let (mut q_prev, mut q) = (0u64, 1u64);
    out.push((p, q));
    let mut rem = x - x.floor();
    for _ in 0..64 {
        if rem < 1e-15 {
            break;
        }
        let inv = 1.0 / rem;
        let a = inv.floor();
        rem = inv - a;
        let a = a as u64;
        let q_next = match a.checked_mul(q).and_then(|v| v.checked_add(q_prev)) {
            Some(v) if v <= q_max => v,
            _ => break,
        };
        let p_next = a as i64 * p + p_prev;
        p_prev = p;
        p = p_next;
        q_prev = q;
        q = q_next;
        out.push((p, q));
    }
    out
}

/// Largest pairwise circle distance in a set of points on `R/Z`.
pub fn circle_diameter(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut pts: Vec<f64> = values.iter().map(|&v| mod1(v)).collect();
    pts.sort_by(f64::total_cmp);
    let n = pts.len();
    let mut best = 0.0f64;
    for &a in &pts {
        // the farthest partner sits next to the antipode
        let anti = mod1(a + 0.5);
        let idx = pts.partition_point(|&v| v < anti);
        for j in [idx + n - 1, idx, idx + 1] {
            let b = pts[j % n];
            best = best.max(circle_dist(a, b));
        }
    }
    best
}
