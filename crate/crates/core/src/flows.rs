//! Discrete-time steppers for the unnormalized steepest flow family
//! (`q` between 1 and 2), Adam with coupled or decoupled weight decay,
//! trajectory recording, and the x-space mirror-flow integrator.

use crate::error::{Error, Result};
use crate::geometry::{pairwise_balances, pow_q, MirrorGeometry, StabilityTag};
use crate::numerics::{RngSpec, STREAM_MINIBATCH};
use crate::problems::{
    exp_loss_grad_rows, ground_truth_distance, mse_loss_grad_rows, LossEval, Task, TaskKind,
};
use crate::reparam::{layer_gradients, product, LayerStack};
use rand::seq::SliceRandom;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WdMode {
    None,
    /// Decay folded into the gradient before the sign/power map (Adam + wd).
    Coupled,
    /// Decay subtracted from the parameters after the step (AdamW).
    Decoupled,
}

impl WdMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            WdMode::None => "none",
            WdMode::Coupled => "coupled",
            WdMode::Decoupled => "decoupled",
        }
    }
}

/// Configuration of one flow run. `q` is the dual exponent of the steepest
/// descent norm (`q = 2` gradient flow, `q = 1` sign flow); `alpha` is the
/// weight-decay strength in the selected mode; `batch_size = 0` means full
/// batch.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub q: f64,
    pub eta: f64,
    pub steps: u64,
    pub wd_mode: WdMode,
    pub alpha: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub record_every: u64,
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 1.0 && self.q <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "flow exponent q must lie in [1, 2], got {}",
                self.q
            )));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step size must be > 0, got {}",
                self.eta
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weight-decay strength must be >= 0, got {}",
                self.alpha
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter(
                "record_every must be >= 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// `sign(g) |g|^(q-1)` with the Filippov selection `sign(0) = 0` and
/// `0^0 = 0`, so a zero raw gradient never moves a weight.
#[inline]
pub fn signed_power(g: f64, q: f64) -> f64 {
    if g == 0.0 {
        0.0
    } else if q == 1.0 {
        g.signum()
    } else if q == 2.0 {
        g
    } else {
        g.signum() * g.abs().powf(q - 1.0)
    }
}

/// One steepest-descent step on every layer. Coupled decay adds `alpha w`
/// into the gradient before the sign/power map; decoupled decay subtracts
/// `eta alpha w` afterwards.
pub fn steepest_step(
    stack: &LayerStack,
    grads: &[Vec<f64>],
    cfg: &FlowConfig,
) -> Result<LayerStack> {
    cfg.validate()?;
    check_grad_shape(stack, grads)?;
    let mut next = stack.clone();
    let eta = cfg.eta;
    for (layer, grad) in next.layers_mut().iter_mut().zip(grads) {
        match cfg.wd_mode {
            WdMode::None => {
                for (w, g) in layer.iter_mut().zip(grad) {
                    *w -= eta * signed_power(*g, cfg.q);
                }
            }
            WdMode::Coupled => {
                for (w, g) in layer.iter_mut().zip(grad) {
                    *w -= eta * signed_power(*g + cfg.alpha * *w, cfg.q);
                }
            }
            WdMode::Decoupled => {
                for (w, g) in layer.iter_mut().zip(grad) {
                    *w -= eta * signed_power(*g, cfg.q) + eta * cfg.alpha * *w;
                }
            }
        }
    }
    Ok(next)
}

/// Adam moment parameters; the defaults are the usual ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-layer first/second moments plus the bias-correction step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(stack: &LayerStack, params: AdamParams) -> Self {
        let zeros = vec![vec![0.0; stack.width()]; stack.depth()];
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            beta1: params.beta1,
            beta2: params.beta2,
            epsilon: params.epsilon,
        }
    }
}

/// One Adam step with bias correction. Coupled decay enters the gradient as
/// `g + alpha w`; decoupled decay subtracts `eta alpha w` from the
/// parameters after the adaptive update. A zero adaptive denominator maps
/// to a zero update, matching `sign(0) = 0` in the steepest stepper.
pub fn adam_step(
    stack: &LayerStack,
    grads: &[Vec<f64>],
    state: AdamState,
    cfg: &FlowConfig,
) -> Result<(LayerStack, AdamState)> {
    check_grad_shape(stack, grads)?;
    if state.first_moment.len() != stack.depth()
        || state.first_moment[0].len() != stack.width()
    {
        return Err(Error::ShapeMismatch(
            "adam state does not match the stack".to_string(),
        ));
    }
    let mut next = stack.clone();
    let mut state = state;
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (i, (layer, grad)) in next.layers_mut().iter_mut().zip(grads).enumerate() {
        for (j, (w, g_raw)) in layer.iter_mut().zip(grad).enumerate() {
            let g = match cfg.wd_mode {
                WdMode::Coupled => *g_raw + cfg.alpha * *w,
                _ => *g_raw,
            };
            let m = &mut state.first_moment[i][j];
            let v = &mut state.second_moment[i][j];
            *m = state.beta1 * *m + (1.0 - state.beta1) * g;
            *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            let denom = v_hat.sqrt() + state.epsilon;
            let update = if denom == 0.0 { 0.0 } else { m_hat / denom };
            *w -= cfg.eta * update;
            if cfg.wd_mode == WdMode::Decoupled {
                *w -= cfg.eta * cfg.alpha * *w;
            }
        }
    }
    Ok((next, state))
}

fn check_grad_shape(stack: &LayerStack, grads: &[Vec<f64>]) -> Result<()> {
    if grads.len() != stack.depth() || grads.iter().any(|g| g.len() != stack.width()) {
        return Err(Error::ShapeMismatch(
            "gradients do not match the stack shape".to_string(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Steepest,
    Adam(AdamParams),
}

/// One recorded state of a flow run. Losses and gradients in records are
/// always full-batch, regardless of the sampling mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: u64,
    pub loss: f64,
    pub l1_norm: f64,
    pub linf_norm: f64,
    pub gt_l1_distance: f64,
    /// Max over layer pairs and coordinates of the gap between the measured
    /// balance `|w_i|^q - |w_j|^q` and the decay law
    /// `initial * exp(-q alpha eta step)` (with `alpha = 0` when decay is
    /// off; coupled decay is measured against the same law, which it is
    /// expected to break).
    pub max_balance_dev: f64,
    pub grad_linf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceReport {
    pub step: u64,
    pub loss: f64,
}

/// Time series of a flow run plus the running aggregates the convergence
/// diagnostics need.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    /// `Σ_t ||g_t||_q^q` over the per-step gradients actually used.
    pub sum_grad_q_pow_q: f64,
    /// Running max of `||g_t||_inf` (the gradient bound `B`).
    pub max_grad_linf: f64,
    /// Set when a non-finite loss aborted the run at the named step.
    pub divergence: Option<DivergenceReport>,
    /// Whether any exponential-loss evaluation clipped.
    pub saturated: bool,
}

impl Trajectory {
    /// First recorded step with loss at or below `threshold`.
    pub fn steps_to_loss(&self, threshold: f64) -> Option<u64> {
        self.rows
            .iter()
            .find(|r| r.loss <= threshold)
            .map(|r| r.step)
    }

    pub fn final_row(&self) -> &TrajectoryRow {
        self.rows.last().expect("trajectory always has a row")
    }
}

fn eval_rows(task: &Task, x: &[f64], rows: &[usize]) -> Result<LossEval> {
    match task.kind() {
        TaskKind::Regression => mse_loss_grad_rows(task, x, rows),
        TaskKind::Classification => exp_loss_grad_rows(task, x, rows),
    }
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn norm_q_pow_q(v: &[f64], q: f64) -> f64 {
    v.iter().map(|x| pow_q(x.abs(), q)).sum()
}

/// Runs the chosen stepper for `cfg.steps` iterations on `task`, recording
/// every `record_every` steps plus the final state. Minibatch rows are
/// sampled without replacement per epoch from the seeded stream. A
/// non-finite loss stops the run and is reported in the trajectory.
pub fn run_flow(
    task: &Task,
    stack: &LayerStack,
    cfg: &FlowConfig,
    optimizer: OptimizerKind,
) -> Result<(LayerStack, Trajectory)> {
    cfg.validate()?;
    if task.features() != stack.width() {
        return Err(Error::ShapeMismatch(format!(
            "task width {} != stack width {}",
            task.features(),
            stack.width()
        )));
    }
    if cfg.batch_size > task.samples() {
        return Err(Error::InvalidParameter(format!(
            "batch size {} exceeds {} samples",
            cfg.batch_size,
            task.samples()
        )));
    }

    let all_rows: Vec<usize> = (0..task.samples()).collect();
    let full_batch = cfg.batch_size == 0 || cfg.batch_size == task.samples();
    let mut batch_rng = RngSpec::new(cfg.seed, STREAM_MINIBATCH).rng();
    let mut order = all_rows.clone();
    let mut cursor = order.len(); // trigger a shuffle on first use

    let initial_balances = pairwise_balances(stack, cfg.q);
    let mut stack = stack.clone();
    let mut adam_state = match optimizer {
        OptimizerKind::Adam(params) => Some(AdamState::new(&stack, params)),
        OptimizerKind::Steepest => None,
    };

    let mut x = product(&stack);
    let mut trajectory = Trajectory {
        rows: Vec::new(),
        sum_grad_q_pow_q: 0.0,
        max_grad_linf: 0.0,
        divergence: None,
        saturated: false,
    };

    let mut full_eval = eval_rows(task, &x, &all_rows)?;
    trajectory.saturated |= full_eval.saturated;
    push_row(
        &mut trajectory,
        0,
        &full_eval,
        &x,
        task,
        &stack,
        cfg,
        &initial_balances,
    );
    if !full_eval.loss.is_finite() {
        trajectory.divergence = Some(DivergenceReport {
            step: 0,
            loss: full_eval.loss,
        });
        return Ok((stack, trajectory));
    }

    for step in 1..=cfg.steps {
        let step_eval = if full_batch {
            full_eval.clone()
        } else {
            if cursor >= order.len() {
                order.shuffle(&mut batch_rng);
                cursor = 0;
            }
            let end = (cursor + cfg.batch_size).min(order.len());
            let batch = &order[cursor..end];
            cursor = end;
            let eval = eval_rows(task, &x, batch)?;
            trajectory.saturated |= eval.saturated;
            eval
        };
        if !step_eval.loss.is_finite() {
            trajectory.divergence = Some(DivergenceReport {
                step,
                loss: step_eval.loss,
            });
            break;
        }
        trajectory.sum_grad_q_pow_q += norm_q_pow_q(&step_eval.grad, cfg.q);
        trajectory.max_grad_linf = trajectory.max_grad_linf.max(linf(&step_eval.grad));

        let grads = layer_gradients(&stack, &step_eval.grad)?;
        stack = match (&optimizer, adam_state.take()) {
            (OptimizerKind::Steepest, _) => steepest_step(&stack, &grads, cfg)?,
            (OptimizerKind::Adam(_), Some(state)) => {
                let (next, state) = adam_step(&stack, &grads, state, cfg)?;
                adam_state = Some(state);
                next
            }
            _ => unreachable!("adam state present iff optimizer is adam"),
        };
        x = product(&stack);

        let record = step % cfg.record_every == 0 || step == cfg.steps;
        if record || full_batch {
            full_eval = eval_rows(task, &x, &all_rows)?;
            trajectory.saturated |= full_eval.saturated;
            if record {
                push_row(
                    &mut trajectory,
                    step,
                    &full_eval,
                    &x,
                    task,
                    &stack,
                    cfg,
                    &initial_balances,
                );
            }
            if !full_eval.loss.is_finite() {
                trajectory.divergence = Some(DivergenceReport {
                    step,
                    loss: full_eval.loss,
                });
                break;
            }
        }
    }
    Ok((stack, trajectory))
}

#[allow(clippy::too_many_arguments)]
fn push_row(
    trajectory: &mut Trajectory,
    step: u64,
    eval: &LossEval,
    x: &[f64],
    task: &Task,
    stack: &LayerStack,
    cfg: &FlowConfig,
    initial_balances: &[f64],
) {
    let alpha = match cfg.wd_mode {
        WdMode::None => 0.0,
        _ => cfg.alpha,
    };
    let decay = (-cfg.q * alpha * cfg.eta * step as f64).exp();
    let measured = pairwise_balances(stack, cfg.q);
    let max_balance_dev = measured
        .iter()
        .zip(initial_balances)
        .map(|(m, b0)| (m - b0 * decay).abs())
        .fold(0.0_f64, f64::max);
    trajectory.rows.push(TrajectoryRow {
        step,
        loss: eval.loss,
        l1_norm: x.iter().map(|v| v.abs()).sum(),
        linf_norm: linf(x),
        gt_l1_distance: ground_truth_distance(x, task),
        max_balance_dev,
        grad_linf: linf(&eval.grad),
    });
}

/// Explicit-Euler step of the separable mirror flow in x-space:
/// `x - eta * Minv(|x|) ⊙ sign(gx) |gx|^(q-1)` per coordinate.
///
/// For exactly balanced geometries with metric exponent 1 the domain is the
/// orthant of the reference point; a step that starts or lands outside it
/// is a domain violation.
pub fn mirror_flow_step(
    x: &[f64],
    geom: &MirrorGeometry,
    gx: &[f64],
    eta: f64,
) -> Result<Vec<f64>> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be > 0, got {eta}"
        )));
    }
    if x.len() != gx.len() || x.len() != geom.x0().len() {
        return Err(Error::ShapeMismatch(
            "x, gradient and reference point must share a width".to_string(),
        ));
    }
    let orthant_restricted = geom.lambda() == 0.0
        && geom.stability().tag == StabilityTag::BregmanOrthantRestricted;
    let mut next = vec![0.0; x.len()];
    for i in 0..x.len() {
        if orthant_restricted && x[i] * geom.x0()[i].signum() <= 0.0 {
            return Err(Error::DomainViolation(format!(
                "coordinate {i} at {} is outside the orthant of x0",
                x[i]
            )));
        }
        let minv = geom.metric_inverse(x[i].abs())?;
        next[i] = x[i] - eta * minv * signed_power(gx[i], geom.q());
        if orthant_restricted && next[i] * geom.x0()[i].signum() <= 0.0 {
            return Err(Error::DomainViolation(format!(
                "step at coordinate {i} would leave the orthant of x0"
            )));
        }
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{gen_regression, mse_loss_grad, Task};
    use crate::reparam::init_near_saddle;

    fn cfg(q: f64, eta: f64, steps: u64) -> FlowConfig {
        FlowConfig {
            q,
            eta,
            steps,
            wd_mode: WdMode::None,
            alpha: 0.0,
            batch_size: 0,
            seed: 17,
            record_every: 1,
        }
    }

    #[test]
    fn q2_step_is_plain_gradient_descent() {
        let stack = LayerStack::new(vec![vec![1.0, -2.0]]).unwrap();
        let grads = vec![vec![0.5, -0.25]];
        let next = steepest_step(&stack, &grads, &cfg(2.0, 0.1, 1)).unwrap();
        assert_eq!(next.layer(0), &[1.0 - 0.05, -2.0 + 0.025]);
    }

    #[test]
    fn q1_step_moves_by_eta_in_magnitude() {
        let stack = LayerStack::new(vec![vec![1.0, -2.0, 3.0]]).unwrap();
        let grads = vec![vec![0.3, -7.0, 0.0]];
        let next = steepest_step(&stack, &grads, &cfg(1.0, 0.01, 1)).unwrap();
        assert_eq!(next.layer(0), &[0.99, -1.99, 3.0]);
    }

    #[test]
    fn zero_gradient_with_decoupled_decay_is_pure_decay() {
        let stack = LayerStack::new(vec![vec![2.0], vec![-4.0]]).unwrap();
        let grads = vec![vec![0.0], vec![0.0]];
        let mut c = cfg(1.5, 0.1, 1);
        c.wd_mode = WdMode::Decoupled;
        c.alpha = 0.5;
        let next = steepest_step(&stack, &grads, &c).unwrap();
        assert_eq!(next.layer(0), &[2.0 * 0.95]);
        assert_eq!(next.layer(1), &[-4.0 * 0.95]);
    }

    #[test]
    fn rejects_q_outside_range() {
        let stack = LayerStack::new(vec![vec![1.0]]).unwrap();
        let grads = vec![vec![1.0]];
        assert!(steepest_step(&stack, &grads, &cfg(0.5, 0.1, 1)).is_err());
        assert!(steepest_step(&stack, &grads, &cfg(2.5, 0.1, 1)).is_err());
    }

    #[test]
    fn adam_with_zero_betas_and_eps_matches_sign_descent() {
        let stack = LayerStack::new(vec![vec![1.0, -1.0, 0.5]]).unwrap();
        let grads = vec![vec![0.3, -7.0, 0.0]];
        let c = cfg(1.0, 0.01, 1);
        let params = AdamParams {
            beta1: 0.0,
            beta2: 0.0,
            epsilon: 0.0,
        };
        let state = AdamState::new(&stack, params);
        let (adam_next, _) = adam_step(&stack, &grads, state, &c).unwrap();
        let sign_next = steepest_step(&stack, &grads, &c).unwrap();
        assert_eq!(adam_next, sign_next);
    }

    #[test]
    fn adam_zero_grads_decoupled_decay() {
        let stack = LayerStack::new(vec![vec![2.0]]).unwrap();
        let grads = vec![vec![0.0]];
        let mut c = cfg(1.0, 0.1, 1);
        c.wd_mode = WdMode::Decoupled;
        c.alpha = 0.5;
        let state = AdamState::new(&stack, AdamParams::default());
        let (next, _) = adam_step(&stack, &grads, state, &c).unwrap();
        assert_eq!(next.layer(0), &[2.0 * 0.95]);
    }

    #[test]
    fn adam_first_step_is_signed_eta_when_eps_zero() {
        // hand evaluation at t = 1: m_hat = g, v_hat = g^2, update = sign(g)
        let stack = LayerStack::new(vec![vec![1.0, 1.0]]).unwrap();
        let grads = vec![vec![0.37, -1234.5]];
        let c = cfg(1.0, 0.01, 1);
        let params = AdamParams {
            epsilon: 0.0,
            ..AdamParams::default()
        };
        let state = AdamState::new(&stack, params);
        let (next, state) = adam_step(&stack, &grads, state, &c).unwrap();
        assert_eq!(state.step_count, 1);
        assert!((next.layer(0)[0] - (1.0 - 0.01)).abs() < 1e-15);
        assert!((next.layer(0)[1] - (1.0 + 0.01)).abs() < 1e-15);
    }

    #[test]
    fn zero_steps_returns_input_and_one_row() {
        let task = gen_regression(4, 6, 2, 3).unwrap();
        let stack = init_near_saddle(4, 2, 0.1).unwrap();
        let (out, traj) = run_flow(&task, &stack, &cfg(1.0, 1e-3, 0), OptimizerKind::Steepest)
            .unwrap();
        assert_eq!(out, stack);
        assert_eq!(traj.rows.len(), 1);
        assert_eq!(traj.rows[0].step, 0);
    }

    #[test]
    fn equal_seeds_give_bit_identical_trajectories() {
        let task = gen_regression(6, 10, 2, 5).unwrap();
        let stack = init_near_saddle(6, 3, 0.1).unwrap();
        let mut c = cfg(1.5, 1e-3, 200);
        c.batch_size = 3;
        c.record_every = 10;
        let (s1, t1) = run_flow(&task, &stack, &c, OptimizerKind::Steepest).unwrap();
        let (s2, t2) = run_flow(&task, &stack, &c, OptimizerKind::Steepest).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn full_batch_loss_is_monotone_at_small_eta() {
        let task = gen_regression(8, 24, 3, 11).unwrap();
        let stack = init_near_saddle(8, 2, 0.3).unwrap();
        for &q in &[1.0, 1.5, 2.0] {
            let (_, traj) =
                run_flow(&task, &stack, &cfg(q, 1e-4, 2000), OptimizerKind::Steepest).unwrap();
            for pair in traj.rows.windows(2) {
                let slack = 1e-12 * pair[0].loss.abs().max(1.0);
                assert!(
                    pair[1].loss <= pair[0].loss + slack,
                    "q={q}: loss rose {} -> {}",
                    pair[0].loss,
                    pair[1].loss
                );
            }
        }
    }

    #[test]
    fn exponential_loss_decreases_on_separable_data() {
        let task = crate::problems::gen_classification(8, 12, 2, 31).unwrap();
        let stack = init_near_saddle(8, 2, 0.2).unwrap();
        for &q in &[1.0, 2.0] {
            let (_, traj) =
                run_flow(&task, &stack, &cfg(q, 1e-4, 1500), OptimizerKind::Steepest).unwrap();
            assert!(traj.rows.iter().all(|r| r.loss > 0.0));
            for pair in traj.rows.windows(2) {
                assert!(
                    pair[1].loss <= pair[0].loss + 1e-12 * pair[0].loss,
                    "q={q}: exp loss rose at step {}",
                    pair[1].step
                );
            }
        }
    }

    #[test]
    fn balance_is_conserved_without_decay() {
        let task = gen_regression(6, 18, 2, 23).unwrap();
        let stack = init_near_saddle(6, 3, 0.1).unwrap();
        for &q in &[1.0, 1.5, 2.0] {
            let (_, traj) =
                run_flow(&task, &stack, &cfg(q, 1e-4, 5000), OptimizerKind::Steepest).unwrap();
            let drift = traj.final_row().max_balance_dev;
            assert!(drift <= 5e-3, "q={q}: drift {drift}");
        }
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let task = gen_regression(4, 8, 2, 2).unwrap();
        let stack = init_near_saddle(4, 2, 1.0).unwrap();
        // absurd step size blows up the quadratic immediately
        let (_, traj) =
            run_flow(&task, &stack, &cfg(2.0, 1e6, 400), OptimizerKind::Steepest).unwrap();
        let report = traj.divergence.expect("must diverge");
        assert!(report.step > 0);
        assert!(!report.loss.is_finite() || report.loss.is_nan());
    }

    #[test]
    fn mirror_step_keeps_x_on_zero_gradient() {
        let geom = MirrorGeometry::new(1.0, 3, 0.2, vec![0.0, 0.0]).unwrap();
        let x = vec![0.4, -0.7];
        let next = mirror_flow_step(&x, &geom, &[0.0, 0.0], 1e-3).unwrap();
        assert_eq!(next, x);
    }

    #[test]
    fn mirror_step_balanced_depth2_closed_form() {
        // lambda = 0, q = 2, L = 2, scalar x > 0: step is -eta * 2x * g
        let geom = MirrorGeometry::new(2.0, 2, 0.0, vec![1.0]).unwrap();
        let next = mirror_flow_step(&[0.5], &geom, &[0.3], 0.01).unwrap();
        assert!((next[0] - (0.5 - 0.01 * 2.0 * 0.5 * 0.3)).abs() < 1e-15);
    }

    #[test]
    fn mirror_step_orthant_violation() {
        let geom = MirrorGeometry::new(2.0, 2, 0.0, vec![1.0]).unwrap();
        // current point outside the positive orthant
        assert!(mirror_flow_step(&[-0.5], &geom, &[0.1], 0.01).is_err());
        // a step large enough to cross zero
        assert!(mirror_flow_step(&[1e-9], &geom, &[1.0], 10.0).is_err());
    }

    #[test]
    fn reparameterized_and_mirror_trajectories_agree_on_scalar_task() {
        // scalar quadratic, L = 2, q = 1, init scale 0.1 (balance 0.1)
        let task = Task::regression_from_parts(vec![vec![1.0]], vec![1.0]).unwrap();
        let stack = init_near_saddle(1, 2, 0.1).unwrap();
        let eta = 1e-4;
        let steps = 2000;
        let (_, traj) = run_flow(
            &task,
            &stack,
            &cfg(1.0, eta, steps),
            OptimizerKind::Steepest,
        )
        .unwrap();
        let geom = MirrorGeometry::new(1.0, 2, 0.1, vec![0.0]).unwrap();
        let mut x = vec![0.0];
        let mut sup = 0.0_f64;
        for row in &traj.rows {
            if row.step == 0 {
                continue;
            }
            let g = mse_loss_grad(&task, &x).unwrap().grad;
            x = mirror_flow_step(&x, &geom, &g, eta).unwrap();
            // product trajectory is positive here, so l1 norm is the value
            sup = sup.max((x[0] - row.l1_norm).abs());
        }
        assert!(sup <= 2e-3, "sup difference {sup}");
    }
}
