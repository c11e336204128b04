//! Closed-form and implicit geometric quantities for the steepest mirror
//! flow induced by a deep diagonal reparameterization: balance matrices,
//! mirror metrics, Legendre values, metric exponents, stability classes,
//! coercivity constants and induced regularizers.
//!
//! Convention used repo-wide: `lambda` is the balance value in `|.|^q`
//! space, i.e. `|w_i|^q - |w_1|^q = lambda`. A near-saddle init with scale
//! `lambda_init` therefore carries balance `lambda_init^q`; the conversion
//! lives in [`coercivity_from_init`].

use crate::error::{Error, Result};
use crate::numerics::{integrate_1d, solve_unique_positive_root, RootProblem, DEFAULT_REL_TOL};
use crate::reparam::LayerStack;

/// Tolerance for the exact-exponent branches (`m == 1`, `m == 2`). The
/// exponent is a quotient of small integers in every configuration of
/// interest, so anything below rounding noise works.
const EXPONENT_EQ_TOL: f64 = 1e-12;

/// Absolute quadrature tolerance for the numeric Legendre gradient.
const LEGENDRE_QUAD_TOL: f64 = 1e-11;

/// Growth rate `m = q (L-1) / L` of the inverse metric.
pub fn metric_exponent(q: f64, depth: usize) -> f64 {
    q * (depth as f64 - 1.0) / depth as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityTag {
    /// `m < 1`: Bregman function on all of R^n.
    BregmanFullDomain,
    /// `m = 1`: Bregman function restricted to the orthant of the reference
    /// point.
    BregmanOrthantRestricted,
    /// `m > 1`: not a Bregman function; the flow can blow up in finite time.
    NotBregman,
}

impl StabilityTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            StabilityTag::BregmanFullDomain => "bregman_full_domain",
            StabilityTag::BregmanOrthantRestricted => "bregman_orthant_restricted",
            StabilityTag::NotBregman => "not_bregman",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityClass {
    pub tag: StabilityTag,
    pub metric_exponent: f64,
}

/// Classifies the flow by its metric exponent alone.
pub fn classify_stability(q: f64, depth: usize) -> Result<StabilityClass> {
    if depth < 2 {
        return Err(Error::InvalidParameter(
            "stability classification needs depth >= 2".to_string(),
        ));
    }
    let m = metric_exponent(q, depth);
    let tag = if (m - 1.0).abs() <= EXPONENT_EQ_TOL {
        StabilityTag::BregmanOrthantRestricted
    } else if m < 1.0 {
        StabilityTag::BregmanFullDomain
    } else {
        StabilityTag::NotBregman
    };
    Ok(StabilityClass {
        tag,
        metric_exponent: m,
    })
}

/// Uniform lower bound on the inverse metric, `mu = lambda^(L-1)`, with
/// `lambda` the balance value in `|.|^q` space.
pub fn coercivity_constant(lambda_balance: f64, depth: usize) -> Result<f64> {
    if !(lambda_balance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "coercivity needs lambda > 0, got {lambda_balance}"
        )));
    }
    Ok(lambda_balance.powi(depth as i32 - 1))
}

/// Coercivity seen from the near-saddle initialization scale: the init is
/// `lambda_init^q`-balanced, so `mu = lambda_init^(q (L-1))`.
pub fn coercivity_from_init(lambda_init: f64, q: f64, depth: usize) -> Result<f64> {
    coercivity_constant(lambda_init.powf(q), depth)
}

/// The `(q, L, lambda, x0)` bundle defining one separable mirror geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorGeometry {
    q: f64,
    depth: usize,
    lambda: f64,
    x0: Vec<f64>,
}

impl MirrorGeometry {
    pub fn new(q: f64, depth: usize, lambda: f64, x0: Vec<f64>) -> Result<Self> {
        if !(q > 0.0) {
            return Err(Error::InvalidParameter(format!("q must be > 0, got {q}")));
        }
        if depth < 2 {
            return Err(Error::InvalidParameter(
                "mirror geometry needs depth >= 2".to_string(),
            ));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        if x0.is_empty() {
            return Err(Error::InvalidParameter(
                "reference point must be nonempty".to_string(),
            ));
        }
        Ok(Self {
            q,
            depth,
            lambda,
            x0,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn metric_exponent(&self) -> f64 {
        metric_exponent(self.q, self.depth)
    }

    pub fn stability(&self) -> StabilityClass {
        classify_stability(self.q, self.depth).expect("depth checked at construction")
    }

    /// `mu = lambda^(L-1)`; zero when the geometry is exactly balanced.
    pub fn coercivity(&self) -> f64 {
        self.lambda.powi(self.depth as i32 - 1)
    }

    /// Inverse metric at `|x| = x_abs`.
    ///
    /// For `lambda > 0` this solves `z (z + lambda)^(L-1) = x_abs^q` and
    /// returns `(z + lambda)^(L-1) + (L-1) z (z + lambda)^(L-2)`; for
    /// `lambda = 0` the closed form `L x_abs^(q (L-1)/L)` applies.
    pub fn metric_inverse(&self, x_abs: f64) -> Result<f64> {
        if !(x_abs >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "metric takes |x| >= 0, got {x_abs}"
            )));
        }
        let l = self.depth as i32;
        if self.lambda == 0.0 {
            return Ok(self.depth as f64 * x_abs.powf(self.metric_exponent()));
        }
        let target = pow_q(x_abs, self.q);
        let problem = RootProblem::new(target, self.lambda, self.depth)?;
        let z = solve_unique_positive_root(&problem, DEFAULT_REL_TOL)?;
        Ok((z + self.lambda).powi(l - 1)
            + (l - 1) as f64 * z * (z + self.lambda).powi(l - 2))
    }

    /// Legendre gradient by quadrature, `∇R(x) = ∫_{x0}^{x} du / Minv(|u|)`,
    /// for the `lambda > 0` geometries that have no closed form. Strictly
    /// increasing in `x`, zero at the reference coordinate.
    pub fn legendre_gradient_numeric(&self, x: f64, coord: usize) -> Result<f64> {
        if self.lambda == 0.0 {
            return Err(Error::InvalidConfiguration(
                "lambda = 0 geometries have closed forms; use legendre_value_balanced"
                    .to_string(),
            ));
        }
        let x0 = *self.x0.get(coord).ok_or_else(|| {
            Error::InvalidParameter(format!("coordinate {coord} out of range"))
        })?;
        let value = integrate_1d(
            |u| {
                self.metric_inverse(u.abs())
                    .map(|m| 1.0 / m)
                    .unwrap_or(f64::NAN)
            },
            x0,
            x,
            LEGENDRE_QUAD_TOL,
        )?;
        if !value.is_finite() {
            return Err(Error::DomainViolation(format!(
                "legendre gradient not finite at x = {x}"
            )));
        }
        Ok(value)
    }
}

/// `sign(x)`-free power `|x|^q` with the exact special cases the flows rely
/// on (`q = 1, 2` avoid `powf` in hot loops).
pub(crate) fn pow_q(x_abs: f64, q: f64) -> f64 {
    if q == 1.0 {
        x_abs
    } else if q == 2.0 {
        x_abs * x_abs
    } else {
        x_abs.powf(q)
    }
}

/// Depth-2 closed form of the inverse metric, `sqrt(4 |x|^q + lambda^2)`.
pub fn metric_inverse_closed_depth2(x_abs: f64, lambda: f64, q: f64) -> f64 {
    (4.0 * pow_q(x_abs.abs(), q) + lambda * lambda).sqrt()
}

/// Pairwise balance matrix: entry `(i, j)` is `|w_i|^q - |w_j|^q`
/// coordinatewise. Antisymmetric by construction.
pub fn balance_matrix(stack: &LayerStack, q: f64) -> Result<Vec<Vec<Vec<f64>>>> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("q must be > 0, got {q}")));
    }
    let depth = stack.depth();
    let n = stack.width();
    let powed: Vec<Vec<f64>> = stack
        .layers()
        .iter()
        .map(|layer| layer.iter().map(|w| pow_q(w.abs(), q)).collect())
        .collect();
    let mut matrix = vec![vec![vec![0.0; n]; depth]; depth];
    for i in 0..depth {
        for j in 0..depth {
            for (entry, (a, b)) in matrix[i][j]
                .iter_mut()
                .zip(powed[i].iter().zip(&powed[j]))
            {
                *entry = a - b;
            }
        }
    }
    Ok(matrix)
}

/// Flattened upper-triangle balances `|w_i|^q - |w_j|^q` for `i < j`,
/// pair-major and coordinate-minor. This is the quantity the flows track
/// against [`predicted_balance`].
pub fn pairwise_balances(stack: &LayerStack, q: f64) -> Vec<f64> {
    let depth = stack.depth();
    let n = stack.width();
    let powed: Vec<Vec<f64>> = stack
        .layers()
        .iter()
        .map(|layer| layer.iter().map(|w| pow_q(w.abs(), q)).collect())
        .collect();
    let mut out = Vec::with_capacity(depth * (depth - 1) / 2 * n);
    for i in 0..depth {
        for j in (i + 1)..depth {
            for (a, b) in powed[i].iter().zip(&powed[j]) {
                out.push(a - b);
            }
        }
    }
    out
}

/// Balance value predicted at time `t` under a constant decoupled decay
/// schedule: `initial * exp(-q alpha t)`.
pub fn predicted_balance(initial: f64, alpha: f64, t: f64, q: f64) -> f64 {
    initial * (-q * alpha * t).exp()
}

/// Closed-form Legendre value for exactly balanced (`lambda = 0`)
/// geometries, per coordinate.
///
/// For metric exponent `m = 1` this is the entropy
/// `(1/L)(x log x - x - x log x0)` on the orthant of `x0_ref`; for `m < 1`
/// the power form `(1/(L(1-m))) (|x|^(2-m)/(2-m) - x x0 |x0|^(-m))`. Both
/// have vanishing derivative at `x0_ref`. For `m > 1` there is no Bregman
/// function and the call is rejected.
pub fn legendre_value_balanced(x: f64, x0_ref: f64, q: f64, depth: usize) -> Result<f64> {
    if depth < 2 {
        return Err(Error::InvalidParameter(
            "legendre value needs depth >= 2".to_string(),
        ));
    }
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("q must be > 0, got {q}")));
    }
    if x0_ref == 0.0 {
        return Err(Error::InvalidParameter(
            "reference point must be nonzero".to_string(),
        ));
    }
    let l = depth as f64;
    let m = metric_exponent(q, depth);
    if (m - 1.0).abs() <= EXPONENT_EQ_TOL {
        if x * x0_ref.signum() <= 0.0 {
            return Err(Error::DomainViolation(format!(
                "x = {x} outside the orthant of x0 = {x0_ref}"
            )));
        }
        let xa = x.abs();
        let x0a = x0_ref.abs();
        Ok((xa * xa.ln() - xa - xa * x0a.ln()) / l)
    } else if m < 1.0 {
        let term = x.abs().powf(2.0 - m) / (2.0 - m)
            - x * x0_ref.signum() * x0_ref.abs().powf(1.0 - m);
        Ok(term / (l * (1.0 - m)))
    } else {
        Err(Error::InvalidConfiguration(format!(
            "metric exponent {m} > 1: not a Bregman function"
        )))
    }
}

/// Effective on-manifold penalty induced by decoupled weight decay:
/// `(L / (L(2-q) + q)) Σ |x_i|^(2-m)` for `m ≠ 2`, `Σ log |x_i|` for
/// `m = 2`.
pub fn manifold_regularizer(x: &[f64], q: f64, depth: usize) -> Result<f64> {
    if depth < 2 {
        return Err(Error::InvalidParameter(
            "manifold regularizer needs depth >= 2".to_string(),
        ));
    }
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("q must be > 0, got {q}")));
    }
    let l = depth as f64;
    let m = metric_exponent(q, depth);
    if (m - 2.0).abs() <= EXPONENT_EQ_TOL {
        let mut sum = 0.0;
        for &xi in x {
            if xi == 0.0 {
                return Err(Error::DomainViolation(
                    "log regularizer undefined at zero coordinate".to_string(),
                ));
            }
            sum += xi.abs().ln();
        }
        Ok(sum)
    } else {
        let coeff = l / (l * (2.0 - q) + q);
        Ok(coeff * x.iter().map(|xi| xi.abs().powf(2.0 - m)).sum::<f64>())
    }
}

/// Penalty on `x` equivalent to coupled weight decay on the layers:
/// `L Σ |x_i|^(2/L)`.
pub fn coupled_equivalent_regularizer(x: &[f64], depth: usize) -> Result<f64> {
    if depth < 1 {
        return Err(Error::InvalidParameter(
            "coupled regularizer needs depth >= 1".to_string(),
        ));
    }
    let l = depth as f64;
    let e = 2.0 / l;
    Ok(l * x.iter().map(|xi| pow_q(xi.abs(), e)).sum::<f64>())
}

/// Whether plain weight decay coincides with the on-manifold regularizer at
/// `lambda = 0`; true exactly for `q = 2` (the coefficients `L/2` and
/// `L/(L(2-q)+q)` then agree).
pub fn wd_matches_manifold(q: f64, depth: usize) -> Result<bool> {
    if depth < 2 {
        return Err(Error::InvalidParameter(
            "comparison needs depth >= 2".to_string(),
        ));
    }
    let l = depth as f64;
    let manifold_coeff = l / (l * (2.0 - q) + q);
    Ok((manifold_coeff - l / 2.0).abs() <= EXPONENT_EQ_TOL * l)
}

fn entrywise_q_norm(m: &[Vec<f64>], q: f64) -> f64 {
    m.iter()
        .flat_map(|row| row.iter())
        .map(|v| pow_q(v.abs(), q))
        .sum()
}

fn matrix_shape(m: &[Vec<f64>], name: &str) -> Result<(usize, usize)> {
    let rows = m.len();
    let cols = m.first().map(|r| r.len()).unwrap_or(0);
    if m.iter().any(|r| r.len() != cols) {
        return Err(Error::ShapeMismatch(format!("{name} has ragged rows")));
    }
    Ok((rows, cols))
}

/// Matrix extension of the balance gap:
/// `Δ = | ||Q_ft||_q^q - ||K_ft||_q^q | - | ||Q_pre||_q^q - ||K_pre||_q^q |`
/// with entrywise q-th power norms. Negative values mean the finetuned pair
/// is closer to balance than the pretrained one.
pub fn matrix_balance_delta(
    q_ft: &[Vec<f64>],
    k_ft: &[Vec<f64>],
    q_pre: &[Vec<f64>],
    k_pre: &[Vec<f64>],
    q: f64,
) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("q must be > 0, got {q}")));
    }
    let ft_q = matrix_shape(q_ft, "Q_ft")?;
    let ft_k = matrix_shape(k_ft, "K_ft")?;
    if ft_q != ft_k {
        return Err(Error::ShapeMismatch(format!(
            "finetuned pair shapes differ: {ft_q:?} vs {ft_k:?}"
        )));
    }
    let pre_q = matrix_shape(q_pre, "Q_pre")?;
    let pre_k = matrix_shape(k_pre, "K_pre")?;
    if pre_q != pre_k {
        return Err(Error::ShapeMismatch(format!(
            "pretrained pair shapes differ: {pre_q:?} vs {pre_k:?}"
        )));
    }
    let ft = (entrywise_q_norm(q_ft, q) - entrywise_q_norm(k_ft, q)).abs();
    let pre = (entrywise_q_norm(q_pre, q) - entrywise_q_norm(k_pre, q)).abs();
    Ok(ft - pre)
}

/// One-dimensional mirror-to-reparameterization construction:
/// `z(x) = ∫_{x0}^{x} (∂²R(u))^(1/q) du`. Strictly increasing in `x` as long
/// as the metric stays positive; a nonpositive metric sample is rejected.
pub fn mirror_to_reparam_map<F>(
    metric_second_derivative: F,
    x0: f64,
    x: f64,
    q: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!("q must be > 0, got {q}")));
    }
    let nonpositive = std::cell::Cell::new(false);
    let value = integrate_1d(
        |u| {
            let d2 = metric_second_derivative(u);
            if d2 <= 0.0 {
                nonpositive.set(true);
                return f64::NAN;
            }
            d2.powf(1.0 / q)
        },
        x0,
        x,
        1e-9,
    );
    if nonpositive.get() {
        return Err(Error::DomainViolation(
            "metric second derivative must be positive on the integration range".to_string(),
        ));
    }
    value
}
