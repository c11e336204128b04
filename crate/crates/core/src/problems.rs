//! Synthetic regression/classification tasks, their losses and gradients,
//! and the margin and distance metrics used by the experiment runners.

use crate::error::{Error, Result};
use crate::numerics::{RngSpec, STREAM_RESAMPLE, STREAM_TASK};
use rand::Rng;
use rand_distr::StandardNormal;

/// Exponent clip for the exponential loss, in natural-log units. Terms with
/// a larger exponent are clamped and flagged so late-phase runs degrade
/// detectably instead of overflowing.
pub const EXP_CLIP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Regression,
    Classification,
}

/// A linear task instance: `k x n` design matrix `Z` (row-major), targets
/// (responses or ±1 labels) and the sparse ground truth `x*` that generated
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    design: Vec<f64>,
    targets: Vec<f64>,
    ground_truth: Vec<f64>,
    support: Vec<usize>,
    kind: TaskKind,
    samples: usize,
    features: usize,
}

impl Task {
    /// Regression task from explicit parts; responses are derived as
    /// `Y = Z x*` so the interpolation invariant holds by construction.
    pub fn regression_from_parts(rows: Vec<Vec<f64>>, ground_truth: Vec<f64>) -> Result<Self> {
        let samples = rows.len();
        let features = ground_truth.len();
        if samples == 0 || features == 0 {
            return Err(Error::InvalidParameter(
                "task needs at least one sample and one feature".to_string(),
            ));
        }
        if rows.iter().any(|r| r.len() != features) {
            return Err(Error::ShapeMismatch(
                "design rows must match ground-truth width".to_string(),
            ));
        }
        let mut design = Vec::with_capacity(samples * features);
        for row in &rows {
            design.extend_from_slice(row);
        }
        let targets: Vec<f64> = rows.iter().map(|r| dot(r, &ground_truth)).collect();
        let support = ground_truth
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        Ok(Self {
            design,
            targets,
            ground_truth,
            support,
            kind: TaskKind::Regression,
            samples,
            features,
        })
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.features..(i + 1) * self.features]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn ground_truth(&self) -> &[f64] {
        &self.ground_truth
    }

    /// Indices of the nonzero ground-truth coordinates.
    pub fn support(&self) -> &[usize] {
        &self.support
    }
}

fn sparse_ground_truth(n: usize, s: usize) -> Result<Vec<f64>> {
    if s < 1 || s > n {
        return Err(Error::InvalidParameter(format!(
            "support size {s} must lie in [1, {n}]"
        )));
    }
    let mut gt = vec![0.0; n];
    for v in gt.iter_mut().take(s) {
        *v = 1.0;
    }
    Ok(gt)
}

/// Regression task: `x* = (1,...,1,0,...,0)` with `s` ones, `Z_ij ~ N(0,1)`
/// drawn row-major from the seeded task stream, `Y = Z x*`.
pub fn gen_regression(n: usize, k: usize, s: usize, seed: u64) -> Result<Task> {
    if k < 1 {
        return Err(Error::InvalidParameter("need k >= 1 samples".to_string()));
    }
    let ground_truth = sparse_ground_truth(n, s)?;
    let mut rng = RngSpec::new(seed, STREAM_TASK).rng();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    Task::regression_from_parts(rows, ground_truth)
}

/// Classification task: same design draw, labels `y_i = sign(z_i . x*)`.
/// Rows with an exactly zero margin are resampled from a dedicated stream,
/// preserving `k`.
pub fn gen_classification(n: usize, k: usize, s: usize, seed: u64) -> Result<Task> {
    if k < 1 {
        return Err(Error::InvalidParameter("need k >= 1 samples".to_string()));
    }
    let ground_truth = sparse_ground_truth(n, s)?;
    let mut rng = RngSpec::new(seed, STREAM_TASK).rng();
    let mut resample = RngSpec::new(seed, STREAM_RESAMPLE).rng();
    let mut design = Vec::with_capacity(k * n);
    let mut targets = Vec::with_capacity(k);
    for _ in 0..k {
        let mut row: Vec<f64> =
            (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut margin = dot(&row, &ground_truth);
        while margin == 0.0 {
            row = (0..n)
                .map(|_| resample.sample::<f64, _>(StandardNormal))
                .collect();
            margin = dot(&row, &ground_truth);
        }
        targets.push(margin.signum());
        design.extend_from_slice(&row);
    }
    let support = (0..s).collect();
    Ok(Task {
        design,
        targets,
        ground_truth,
        support,
        kind: TaskKind::Classification,
        samples: k,
        features: n,
    })
}

/// Loss value, gradient in `x`, and whether the exponential clip engaged.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub saturated: bool,
}

/// Mean squared error over all rows:
/// `f(x) = (1/2k) Σ (y_i - z_i.x)^2`, `∇f = -(1/k) Zᵀ (Y - Zx)`.
pub fn mse_loss_grad(task: &Task, x: &[f64]) -> Result<LossEval> {
    let rows: Vec<usize> = (0..task.samples()).collect();
    mse_loss_grad_rows(task, x, &rows)
}

/// MSE restricted to a row subset, averaged over the subset size.
pub fn mse_loss_grad_rows(task: &Task, x: &[f64], rows: &[usize]) -> Result<LossEval> {
    check_eval(task, x, rows, TaskKind::Regression)?;
    let b = rows.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; task.features()];
    for &i in rows {
        let z = task.row(i);
        let residual = task.targets[i] - dot(z, x);
        loss += residual * residual;
        let scale = -residual / b;
        for (g, zj) in grad.iter_mut().zip(z) {
            *g += scale * zj;
        }
    }
    Ok(LossEval {
        loss: loss / (2.0 * b),
        grad,
        saturated: false,
    })
}

/// Exponential loss over all rows:
/// `f(x) = Σ exp(-y_i z_i.x)`, `∇f = -Σ y_i z_i exp(-y_i z_i.x)`.
pub fn exp_loss_grad(task: &Task, x: &[f64]) -> Result<LossEval> {
    let rows: Vec<usize> = (0..task.samples()).collect();
    exp_loss_grad_rows(task, x, &rows)
}

/// Exponential loss restricted to a row subset (summed, as in the full
/// form). Exponents above [`EXP_CLIP`] are clamped and flagged.
pub fn exp_loss_grad_rows(task: &Task, x: &[f64], rows: &[usize]) -> Result<LossEval> {
    check_eval(task, x, rows, TaskKind::Classification)?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; task.features()];
    let mut saturated = false;
    for &i in rows {
        let z = task.row(i);
        let y = task.targets[i];
        let mut u = -y * dot(z, x);
        if u > EXP_CLIP {
            u = EXP_CLIP;
            saturated = true;
        }
        let e = u.exp();
        loss += e;
        let scale = -y * e;
        for (g, zj) in grad.iter_mut().zip(z) {
            *g += scale * zj;
        }
    }
    Ok(LossEval {
        loss,
        grad,
        saturated,
    })
}

fn check_eval(task: &Task, x: &[f64], rows: &[usize], kind: TaskKind) -> Result<()> {
    if task.kind != kind {
        return Err(Error::InvalidConfiguration(format!(
            "loss expects a {kind:?} task, got {:?}",
            task.kind
        )));
    }
    if x.len() != task.features() {
        return Err(Error::ShapeMismatch(format!(
            "x width {} != task width {}",
            x.len(),
            task.features()
        )));
    }
    if rows.is_empty() {
        return Err(Error::InvalidParameter("empty row subset".to_string()));
    }
    if rows.iter().any(|&i| i >= task.samples()) {
        return Err(Error::InvalidParameter("row index out of range".to_string()));
    }
    Ok(())
}

/// Normalized L-infinity margin diagnostics of an iterate on a separable
/// task.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginProfile {
    /// `min_i y_i <x, z_i> / ||x||_inf`.
    pub margin: f64,
    /// `|x| / ||x||_inf`, invariant under positive rescaling of `x`.
    pub profile: Vec<f64>,
    /// Profile mass off the ground-truth support, relative to the mass on
    /// it.
    pub off_support_mass: f64,
}

/// Margin and normalized magnitude profile of `x` on a classification task.
pub fn linf_margin_profile(x: &[f64], task: &Task) -> Result<MarginProfile> {
    if task.kind != TaskKind::Classification {
        return Err(Error::InvalidConfiguration(
            "margin profile needs a classification task".to_string(),
        ));
    }
    if x.len() != task.features() {
        return Err(Error::ShapeMismatch(format!(
            "x width {} != task width {}",
            x.len(),
            task.features()
        )));
    }
    let linf = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if linf == 0.0 {
        return Err(Error::InvalidParameter(
            "margin undefined for the zero vector".to_string(),
        ));
    }
    let margin = (0..task.samples())
        .map(|i| task.targets[i] * dot(task.row(i), x) / linf)
        .fold(f64::INFINITY, f64::min);
    let profile: Vec<f64> = x.iter().map(|v| v.abs() / linf).collect();
    let on: f64 = task.support.iter().map(|&i| profile[i]).sum();
    let off: f64 = profile
        .iter()
        .enumerate()
        .filter(|(i, _)| !task.support.contains(i))
        .map(|(_, v)| v)
        .sum();
    Ok(MarginProfile {
        margin,
        profile,
        off_support_mass: off / on,
    })
}

/// L1 distance to the generating ground truth, `Σ |x_i - x*_i|`.
pub fn ground_truth_distance(x: &[f64], task: &Task) -> f64 {
    x.iter()
        .zip(&task.ground_truth)
        .map(|(a, b)| (a - b).abs())
        .sum()
}

/// Dot product with a fixed four-way accumulation order: fast enough for
/// the hot loops and bit-reproducible across runs.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 4;
    let mut acc = [0.0_f64; 4];
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        sum += a[i] * b[i];
    }
    sum
}
