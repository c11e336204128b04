use crate::error::{Error, Result};

/// Default relative tolerance for the implicit-metric solve. The geometry
/// module cross-checks its closed forms at 1e-10, so the root must be
/// resolved a couple of orders tighter.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

/// The scalar equation `z (z + lambda)^(depth-1) = target`, solved for the
/// unique root `z >= 0`.
///
/// The left-hand side is strictly increasing on `z >= 0` whenever
/// `lambda > 0` or `depth == 1`, so the root exists and is unique.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootProblem {
    /// Right-hand side, equal to `|x|^q` in the geometry callers.
    pub target: f64,
    /// Balance value expressed in `|.|^q` space.
    pub lambda: f64,
    /// Reparameterization depth `L >= 1`.
    pub depth: usize,
}

impl RootProblem {
    pub fn new(target: f64, lambda: f64, depth: usize) -> Result<Self> {
        if !(target >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "root target must be >= 0, got {target}"
            )));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "root lambda must be >= 0, got {lambda}"
            )));
        }
        if depth < 1 {
            return Err(Error::InvalidParameter(
                "root depth must be >= 1".to_string(),
            ));
        }
        Ok(Self {
            target,
            lambda,
            depth,
        })
    }

    fn eval(&self, z: f64) -> f64 {
        z * (z + self.lambda).powi(self.depth as i32 - 1)
    }

    fn eval_deriv(&self, z: f64) -> f64 {
        let l = self.depth as i32;
        (z + self.lambda).powi(l - 1)
            + (l - 1) as f64 * z * (z + self.lambda).powi(l - 2)
    }
}

/// Solves `z (z + lambda)^(L-1) = target` for the unique nonnegative root.
///
/// Bracketed bisection narrows `[0, hi]`, then safeguarded Newton polishes
/// the tail. The returned `z` satisfies
/// `|z (z + lambda)^(L-1) - target| <= rel_tol * max(target, 1)`.
pub fn solve_unique_positive_root(p: &RootProblem, rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rel_tol must be > 0, got {rel_tol}"
        )));
    }
    // Re-validate in case the struct was built literally.
    let p = RootProblem::new(p.target, p.lambda, p.depth)?;

    if p.target == 0.0 {
        return Ok(0.0);
    }
    let inv_l = 1.0 / p.depth as f64;
    if p.lambda == 0.0 || p.depth == 1 {
        return Ok(p.target.powf(inv_l));
    }

    // target^(1/L) always brackets the root from above since
    // (z + lambda)^(L-1) >= z^(L-1); the max with 1 guards tiny targets.
    // target / lambda^(L-1) would also bracket but explodes for small
    // lambda, starving the bisection.
    let mut hi = p.target.powf(inv_l).max(1.0);
    let mut lo = 0.0_f64;
    debug_assert!(p.eval(hi) >= p.target);

    let tol = rel_tol * p.target.max(1.0);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if p.eval(mid) < p.target {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Newton from the bracket midpoint, clamped back into [lo, hi].
    let mut z = 0.5 * (lo + hi);
    for _ in 0..32 {
        let residual = p.eval(z) - p.target;
        if residual.abs() <= tol {
            break;
        }
        let slope = p.eval_deriv(z);
        if slope <= 0.0 {
            break;
        }
        let mut next = z - residual / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if residual > 0.0 {
            hi = z.min(hi);
        } else {
            lo = z.max(lo);
        }
        if (next - z).abs() <= f64::EPSILON * z.abs() {
            z = next;
            break;
        }
        z = next;
    }

    if (p.eval(z) - p.target).abs() > tol {
        return Err(Error::InvalidParameter(format!(
            "root solve stalled at z={z} for {p:?}"
        )));
    }
    Ok(z)
}
