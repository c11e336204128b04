//! Scenario runners for the diagonal-network experiments: saddle escape,
//! implicit-bias regression, classification margins, balance tables,
//! reparameterized-vs-mirror trajectory equivalence, and the coercivity
//! bound diagnostic.
//!
//! Grid points are independent; with the `parallel` feature they run on a
//! rayon pool sized by `workers` (`1` forces the sequential path, `0` uses
//! the rayon default). Results are merged in grid order, so output bytes do
//! not depend on the schedule.

use crate::error::{Error, Result};
use crate::flows::{
    mirror_flow_step, run_flow, steepest_step, FlowConfig, OptimizerKind, Trajectory, WdMode,
};
use crate::geometry::{
    classify_stability, pairwise_balances, pow_q, predicted_balance, MirrorGeometry,
    StabilityTag,
};
use crate::io::{self, Json};
use crate::problems::{
    gen_classification, gen_regression, linf_margin_profile, mse_loss_grad, Task,
};
use crate::reparam::{init_near_saddle, product, LayerStack};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    SaddleEscape,
    RegressionBias,
    ClassificationMargin,
    BalanceTable,
    EquivalenceCheck,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::SaddleEscape => "saddle_escape",
            Scenario::RegressionBias => "regression_bias",
            Scenario::ClassificationMargin => "classification_margin",
            Scenario::BalanceTable => "balance_table",
            Scenario::EquivalenceCheck => "equivalence_check",
        }
    }
}

/// One grid point of an experiment sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub q: f64,
    pub depth: usize,
    pub wd_mode: WdMode,
    pub alpha: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl GridPoint {
    pub fn steepest(q: f64, depth: usize) -> Self {
        Self {
            q,
            depth,
            wd_mode: WdMode::None,
            alpha: 0.0,
            batch_size: 0,
            seed: 0,
            optimizer: OptimizerKind::Steepest,
        }
    }

    pub fn optimizer_label(&self) -> &'static str {
        match self.optimizer {
            OptimizerKind::Steepest => "steepest",
            OptimizerKind::Adam(_) => "adam",
        }
    }

    /// Deterministic key used for file names and result merging.
    pub fn key(&self) -> String {
        format!(
            "q{}_L{}_wd-{}_a{}_bs{}_{}_s{}",
            self.q,
            self.depth,
            self.wd_mode.as_str(),
            self.alpha,
            self.batch_size,
            self.optimizer_label(),
            self.seed
        )
    }
}

/// A full sweep description: task shape, flow protocol, and the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    /// Feature count `n` and ground-truth support size `s`.
    pub n: usize,
    pub s: usize,
    /// Sample count `k` shared by the grid.
    pub k: usize,
    /// Near-saddle initialization scale (layer 1 zero, others at this
    /// value). Unused at depth 1, where the stack starts at zero.
    pub lambda_init: f64,
    pub eta: f64,
    pub steps: u64,
    pub record_every: u64,
    /// Loss level defining "steps to threshold" in the summaries.
    pub loss_threshold: f64,
    /// Seed for task generation; per-run seeds live in the grid points.
    pub task_seed: u64,
    pub grid: Vec<GridPoint>,
    /// Worker count: 1 sequential, 0 rayon default, otherwise a fixed pool.
    pub workers: usize,
    /// When set, runners write their CSV/JSON outputs here.
    pub output_dir: Option<PathBuf>,
}

/// Summary record, one per grid point, mirrored verbatim into
/// `summary.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scenario: &'static str,
    pub grid_point: String,
    pub seed: u64,
    pub final_loss: f64,
    pub gt_dist: f64,
    pub balance_dist: f64,
    pub steps_to_threshold: Option<u64>,
    pub diverged: bool,
}

impl RunSummary {
    fn to_json(&self) -> Json {
        Json::Object(vec![
            ("scenario".into(), Json::Str(self.scenario.into())),
            ("grid_point".into(), Json::Str(self.grid_point.clone())),
            ("seed".into(), Json::Int(self.seed as i64)),
            ("final_loss".into(), Json::Float(self.final_loss)),
            ("gt_dist".into(), Json::Float(self.gt_dist)),
            ("balance_dist".into(), Json::Float(self.balance_dist)),
            (
                "steps_to_threshold".into(),
                match self.steps_to_threshold {
                    Some(s) => Json::Int(s as i64),
                    None => Json::Null,
                },
            ),
            ("diverged".into(), Json::Bool(self.diverged)),
        ])
    }
}

/// Result of one grid point: the final stack and the recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRun {
    pub point: GridPoint,
    pub stack: LayerStack,
    pub trajectory: Trajectory,
    pub summary: RunSummary,
}

/// Output of one scenario sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub scenario: Scenario,
    pub task: Task,
    pub runs: Vec<PointRun>,
}

/// Maps `f` over the items, in parallel when the feature and `workers`
/// allow it. Output order always matches input order.
#[cfg(feature = "parallel")]
pub fn map_grid<T, U, F>(items: Vec<T>, workers: usize, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match workers {
        1 => items.into_iter().map(f).collect(),
        0 => items.into_par_iter().map(f).collect(),
        w => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .expect("worker pool");
            pool.install(|| items.into_par_iter().map(f).collect())
        }
    }
}

/// Sequential fallback when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn map_grid<T, U, F>(items: Vec<T>, _workers: usize, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

/// Near-saddle stack for a grid point; depth 1 has no reparameterization
/// and starts at zero.
pub fn initial_stack(n: usize, depth: usize, lambda_init: f64) -> Result<LayerStack> {
    if depth == 1 {
        LayerStack::zeros(n, 1)
    } else {
        init_near_saddle(n, depth, lambda_init)
    }
}

fn flow_config(spec: &ExperimentSpec, point: &GridPoint) -> FlowConfig {
    FlowConfig {
        q: point.q,
        eta: spec.eta,
        steps: spec.steps,
        wd_mode: point.wd_mode,
        alpha: point.alpha,
        batch_size: point.batch_size,
        seed: point.seed,
        record_every: spec.record_every,
    }
}

/// End-of-run balance distance: mean over layer pairs and coordinates of
/// `|measured - predicted_balance|`, the quantity tabulated by the
/// regression-bias sweep. Depth 1 has no pairs and reports zero.
fn final_balance_dist(
    initial: &[f64],
    stack: &LayerStack,
    cfg: &FlowConfig,
    final_step: u64,
) -> f64 {
    if initial.is_empty() {
        return 0.0;
    }
    let alpha = match cfg.wd_mode {
        WdMode::None => 0.0,
        _ => cfg.alpha,
    };
    let t = cfg.eta * final_step as f64;
    let measured = pairwise_balances(stack, cfg.q);
    let total: f64 = measured
        .iter()
        .zip(initial)
        .map(|(m, b0)| (m - predicted_balance(*b0, alpha, t, cfg.q)).abs())
        .sum();
    total / measured.len() as f64
}

fn run_point(spec: &ExperimentSpec, task: &Task, point: GridPoint) -> Result<PointRun> {
    let stack0 = initial_stack(spec.n, point.depth, spec.lambda_init)?;
    let cfg = flow_config(spec, &point);
    let initial_balances = pairwise_balances(&stack0, cfg.q);
    let (stack, trajectory) = run_flow(task, &stack0, &cfg, point.optimizer)?;
    let last = trajectory.final_row();
    let summary = RunSummary {
        scenario: spec.scenario.as_str(),
        grid_point: point.key(),
        seed: point.seed,
        final_loss: last.loss,
        gt_dist: last.gt_l1_distance,
        balance_dist: final_balance_dist(&initial_balances, &stack, &cfg, last.step),
        steps_to_threshold: trajectory.steps_to_loss(spec.loss_threshold),
        diverged: trajectory.divergence.is_some(),
    };
    Ok(PointRun {
        point,
        stack,
        trajectory,
        summary,
    })
}

fn run_scenario(spec: &ExperimentSpec, task: Task) -> Result<ScenarioOutput> {
    let results = map_grid(spec.grid.clone(), spec.workers, |point| {
        run_point(spec, &task, point)
    });
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        runs.push(r?);
    }
    Ok(ScenarioOutput {
        scenario: spec.scenario,
        task,
        runs,
    })
}

fn write_common_outputs(out: &ScenarioOutput, dir: &Path) -> Result<()> {
    io::write_text(&dir.join("task.csv"), &io::task_csv(&out.task))?;
    for run in &out.runs {
        io::write_text(
            &dir.join(format!("traj_{}.csv", run.point.key())),
            &io::trajectory_csv(&run.trajectory),
        )?;
    }
    let summaries = Json::Array(out.runs.iter().map(|r| r.summary.to_json()).collect());
    io::write_text(&dir.join("summary.json"), &summaries.render())?;
    Ok(())
}

/// Saddle-escape sweep on the overdetermined regression task: per-config
/// trajectories plus steps-to-threshold summaries. Divergences are folded
/// into the summaries, not raised.
pub fn saddle_escape_experiment(spec: &ExperimentSpec) -> Result<ScenarioOutput> {
    let task = gen_regression(spec.n, spec.k, spec.s, spec.task_seed)?;
    let out = run_scenario(spec, task)?;
    if let Some(dir) = &spec.output_dir {
        write_common_outputs(&out, dir)?;
    }
    Ok(out)
}

/// One row of the regularization-strength table.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceTableRow {
    pub depth: usize,
    pub q: f64,
    pub alpha_coupled: f64,
    pub alpha_decoupled: f64,
    pub balance_dist: f64,
    pub gt_dist: f64,
}

impl BalanceTableRow {
    fn from_run(run: &PointRun) -> Self {
        let (alpha_coupled, alpha_decoupled) = match run.point.wd_mode {
            WdMode::Coupled => (run.point.alpha, 0.0),
            WdMode::Decoupled => (0.0, run.point.alpha),
            WdMode::None => (0.0, 0.0),
        };
        Self {
            depth: run.point.depth,
            q: run.point.q,
            alpha_coupled,
            alpha_decoupled,
            balance_dist: run.summary.balance_dist,
            gt_dist: run.summary.gt_dist,
        }
    }
}

pub fn balance_table_csv(rows: &[BalanceTableRow]) -> String {
    let mut out =
        String::from("depth,q,alpha_coupled,alpha_decoupled,balance_dist,gt_dist\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.depth,
            io::fmt_f64(r.q),
            io::fmt_f64(r.alpha_coupled),
            io::fmt_f64(r.alpha_decoupled),
            io::fmt_f64(r.balance_dist),
            io::fmt_f64(r.gt_dist),
        ));
    }
    out
}

/// Underdetermined regression sweep over depth and weight-decay mode,
/// reporting end-of-training balance and ground-truth distances.
pub fn regression_bias_experiment(
    spec: &ExperimentSpec,
) -> Result<(ScenarioOutput, Vec<BalanceTableRow>)> {
    let task = gen_regression(spec.n, spec.k, spec.s, spec.task_seed)?;
    let out = run_scenario(spec, task)?;
    let rows: Vec<BalanceTableRow> =
        out.runs.iter().map(BalanceTableRow::from_run).collect();
    if let Some(dir) = &spec.output_dir {
        write_common_outputs(&out, dir)?;
        io::write_text(&dir.join("balance_table.csv"), &balance_table_csv(&rows))?;
    }
    Ok((out, rows))
}

/// Final-iterate margin diagnostics of one classification run.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginOutcome {
    pub point: GridPoint,
    pub margin: f64,
    pub profile: Vec<f64>,
    pub off_support_mass: f64,
    pub saturated: bool,
}

pub fn margin_csv(outcome: &MarginOutcome, task: &Task) -> String {
    let mut out = String::from("index,profile,is_support\n");
    for (i, p) in outcome.profile.iter().enumerate() {
        let is_support = task.support().contains(&i);
        out.push_str(&format!("{},{},{}\n", i, io::fmt_f64(*p), is_support as u8));
    }
    out
}

/// Separable-classification sweep: trains each grid point on the
/// exponential loss and reports the normalized final profile and margin.
pub fn classification_margin_experiment(
    spec: &ExperimentSpec,
) -> Result<(ScenarioOutput, Vec<MarginOutcome>)> {
    let task = gen_classification(spec.n, spec.k, spec.s, spec.task_seed)?;
    let out = run_scenario(spec, task)?;
    let mut outcomes = Vec::with_capacity(out.runs.len());
    for run in &out.runs {
        let x = product(&run.stack);
        let profile = linf_margin_profile(&x, &out.task)?;
        outcomes.push(MarginOutcome {
            point: run.point.clone(),
            margin: profile.margin,
            profile: profile.profile,
            off_support_mass: profile.off_support_mass,
            saturated: run.trajectory.saturated,
        });
    }
    if let Some(dir) = &spec.output_dir {
        write_common_outputs(&out, dir)?;
        for outcome in &outcomes {
            io::write_text(
                &dir.join(format!("margin_{}.csv", outcome.point.key())),
                &margin_csv(outcome, &out.task),
            )?;
        }
        let margins = Json::Array(
            outcomes
                .iter()
                .map(|o| {
                    Json::Object(vec![
                        ("grid_point".into(), Json::Str(o.point.key())),
                        ("margin".into(), Json::Float(o.margin)),
                        (
                            "off_support_mass".into(),
                            Json::Float(o.off_support_mass),
                        ),
                        ("saturated".into(), Json::Bool(o.saturated)),
                    ])
                })
                .collect(),
        );
        io::write_text(&dir.join("margins.json"), &margins.render())?;
    }
    Ok((out, outcomes))
}

/// Outcome of one equivalence comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum EquivalenceStatus {
    /// Sup-norm gap between the product trajectory and the mirror
    /// trajectory, at the configured step size and at half of it (double
    /// the steps), plus their ratio.
    Compared {
        sup_diff: f64,
        sup_diff_half_eta: f64,
        ratio: f64,
    },
    /// The metric exponent exceeds 1 and the mirror map is not a Bregman
    /// function; the comparison is refused rather than silently passed.
    NotBregman { metric_exponent: f64 },
    /// The mirror integrator tripped a domain violation.
    DomainViolation(String),
    /// One of the sides produced a non-finite state.
    Diverged { step: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceOutcome {
    pub point: GridPoint,
    pub status: EquivalenceStatus,
}

/// The balance law behind the mirror correspondence holds only almost
/// everywhere; the comparison skips a window of steps around each gradient
/// sign flip.
const SIGN_EVENT_WINDOW: u64 = 8;

fn equivalence_sup_diff(
    task: &Task,
    point: &GridPoint,
    lambda_init: f64,
    n: usize,
    eta: f64,
    steps: u64,
) -> Result<f64> {
    let stack0 = init_near_saddle(n, point.depth, lambda_init)?;
    let x0 = product(&stack0);
    let geom = MirrorGeometry::new(
        point.q,
        point.depth,
        pow_q(lambda_init, point.q),
        x0.clone(),
    )?;
    let cfg = FlowConfig {
        q: point.q,
        eta,
        steps,
        wd_mode: WdMode::None,
        alpha: 0.0,
        batch_size: 0,
        seed: point.seed,
        record_every: u64::MAX - 1,
    };

    let mut stack = stack0;
    let mut x_mirror = x0;
    let mut diffs = Vec::with_capacity(steps as usize);
    let mut events = Vec::new();
    let mut last_signs: Option<Vec<i8>> = None;
    for step in 0..steps {
        let x_w = product(&stack);
        let eval_w = mse_loss_grad(task, &x_w)?;
        if !eval_w.loss.is_finite() {
            return Err(Error::Divergence {
                step,
                loss: eval_w.loss,
            });
        }
        let grads = crate::reparam::layer_gradients(&stack, &eval_w.grad)?;
        stack = steepest_step(&stack, &grads, &cfg)?;

        let eval_m = mse_loss_grad(task, &x_mirror)?;
        let signs: Vec<i8> = eval_m
            .grad
            .iter()
            .map(|g| {
                if *g > 0.0 {
                    1
                } else if *g < 0.0 {
                    -1
                } else {
                    0
                }
            })
            .collect();
        if let Some(prev) = &last_signs {
            if prev != &signs {
                events.push(step);
            }
        }
        last_signs = Some(signs);
        x_mirror = mirror_flow_step(&x_mirror, &geom, &eval_m.grad, eta)?;

        let x_w = product(&stack);
        let diff = x_w
            .iter()
            .zip(&x_mirror)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        if !diff.is_finite() {
            return Err(Error::Divergence {
                step,
                loss: f64::NAN,
            });
        }
        diffs.push(diff);
    }

    let excluded = |step: u64| {
        events
            .iter()
            .any(|e| step + SIGN_EVENT_WINDOW >= *e && step <= e + SIGN_EVENT_WINDOW)
    };
    Ok(diffs
        .iter()
        .enumerate()
        .filter(|(i, _)| !excluded(*i as u64))
        .map(|(_, d)| *d)
        .fold(0.0_f64, f64::max))
}

/// Verifies the mirror-flow equivalence numerically on a scalar-friendly
/// task: the product trajectory of the reparameterized flow against the
/// explicit mirror integrator, at `eta` and `eta/2` over a fixed time span.
/// Configurations whose geometry is not a Bregman function are reported,
/// never compared.
pub fn equivalence_experiment(spec: &ExperimentSpec) -> Result<Vec<EquivalenceOutcome>> {
    if spec.n > 4 {
        return Err(Error::InvalidParameter(
            "equivalence check is meant for n <= 4".to_string(),
        ));
    }
    if !(spec.lambda_init > 0.0) {
        return Err(Error::InvalidParameter(
            "equivalence needs lambda_init > 0".to_string(),
        ));
    }
    let rows = vec![vec![1.0; spec.n]];
    let gt = vec![1.0; spec.n];
    let task = Task::regression_from_parts(rows, gt)?;

    let outcomes = map_grid(spec.grid.clone(), spec.workers, |point| {
        let stability = match classify_stability(point.q, point.depth) {
            Ok(s) => s,
            Err(e) => {
                return EquivalenceOutcome {
                    point,
                    status: EquivalenceStatus::DomainViolation(e.to_string()),
                }
            }
        };
        if stability.tag == StabilityTag::NotBregman {
            return EquivalenceOutcome {
                point,
                status: EquivalenceStatus::NotBregman {
                    metric_exponent: stability.metric_exponent,
                },
            };
        }
        let full = equivalence_sup_diff(
            &task,
            &point,
            spec.lambda_init,
            spec.n,
            spec.eta,
            spec.steps,
        );
        let half = equivalence_sup_diff(
            &task,
            &point,
            spec.lambda_init,
            spec.n,
            spec.eta / 2.0,
            spec.steps * 2,
        );
        let status = match (full, half) {
            (Ok(sup_diff), Ok(sup_half)) => EquivalenceStatus::Compared {
                sup_diff,
                sup_diff_half_eta: sup_half,
                ratio: if sup_half > 0.0 {
                    sup_diff / sup_half
                } else {
                    f64::INFINITY
                },
            },
            (Err(Error::DomainViolation(msg)), _) | (_, Err(Error::DomainViolation(msg))) => {
                EquivalenceStatus::DomainViolation(msg)
            }
            (Err(Error::Divergence { step, .. }), _)
            | (_, Err(Error::Divergence { step, .. })) => EquivalenceStatus::Diverged { step },
            (Err(e), _) | (_, Err(e)) => EquivalenceStatus::DomainViolation(e.to_string()),
        };
        EquivalenceOutcome { point, status }
    });

    if let Some(dir) = &spec.output_dir {
        let doc = Json::Array(
            outcomes
                .iter()
                .map(|o| {
                    let mut fields = vec![(
                        "grid_point".to_string(),
                        Json::Str(o.point.key()),
                    )];
                    match &o.status {
                        EquivalenceStatus::Compared {
                            sup_diff,
                            sup_diff_half_eta,
                            ratio,
                        } => {
                            fields.push(("status".into(), Json::Str("compared".into())));
                            fields.push(("sup_diff".into(), Json::Float(*sup_diff)));
                            fields.push((
                                "sup_diff_half_eta".into(),
                                Json::Float(*sup_diff_half_eta),
                            ));
                            fields.push(("ratio".into(), Json::Float(*ratio)));
                        }
                        EquivalenceStatus::NotBregman { metric_exponent } => {
                            fields.push(("status".into(), Json::Str("not_bregman".into())));
                            fields.push((
                                "metric_exponent".into(),
                                Json::Float(*metric_exponent),
                            ));
                        }
                        EquivalenceStatus::DomainViolation(msg) => {
                            fields.push((
                                "status".into(),
                                Json::Str("domain_violation".into()),
                            ));
                            fields.push(("detail".into(), Json::Str(msg.clone())));
                        }
                        EquivalenceStatus::Diverged { step } => {
                            fields.push(("status".into(), Json::Str("diverged".into())));
                            fields.push(("step".into(), Json::Int(*step as i64)));
                        }
                    }
                    Json::Object(fields)
                })
                .collect(),
        );
        io::write_text(&dir.join("equivalence.json"), &doc.render())?;
    }
    Ok(outcomes)
}

/// Coercivity-bound diagnostic along a recorded full-batch run:
/// `ratio = (f(x_0) - f(x_T)) / (mu * eta * Σ_t ||g_t||_q^q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityReport {
    pub loss_drop: f64,
    pub mu: f64,
    /// `mu * eta * Σ_t ||g_t||_q^q`, the lower bound on the loss drop.
    pub bound: f64,
    /// `None` on a vacuous (zero-step or zero-gradient) trajectory.
    pub ratio: Option<f64>,
    /// Running max of the per-step gradient sup norm (the bound `B`).
    pub grad_bound: f64,
}

impl CoercivityReport {
    pub fn satisfies(&self, min_ratio: f64) -> bool {
        match self.ratio {
            Some(r) => r >= min_ratio,
            None => true,
        }
    }
}

pub fn coercivity_bound_check(
    trajectory: &Trajectory,
    geom: &MirrorGeometry,
    cfg: &FlowConfig,
) -> CoercivityReport {
    let f0 = trajectory.rows.first().map(|r| r.loss).unwrap_or(0.0);
    let ft = trajectory.final_row().loss;
    let mu = geom.coercivity();
    let bound = mu * cfg.eta * trajectory.sum_grad_q_pow_q;
    let ratio = if bound == 0.0 {
        None
    } else {
        Some((f0 - ft) / bound)
    };
    CoercivityReport {
        loss_drop: f0 - ft,
        mu,
        bound,
        ratio,
        grad_bound: trajectory.max_grad_linf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::AdamParams;

    fn tiny_spec(scenario: Scenario) -> ExperimentSpec {
        ExperimentSpec {
            scenario,
            n: 6,
            s: 2,
            k: 12,
            lambda_init: 0.2,
            eta: 1e-3,
            steps: 400,
            record_every: 50,
            loss_threshold: 1e-3,
            task_seed: 13,
            grid: vec![
                GridPoint {
                    seed: 1,
                    ..GridPoint::steepest(1.0, 2)
                },
                GridPoint {
                    seed: 1,
                    ..GridPoint::steepest(2.0, 2)
                },
            ],
            workers: 1,
            output_dir: None,
        }
    }

    #[test]
    fn saddle_escape_produces_one_summary_per_point() {
        let spec = tiny_spec(Scenario::SaddleEscape);
        let out = saddle_escape_experiment(&spec).unwrap();
        assert_eq!(out.runs.len(), 2);
        for run in &out.runs {
            assert_eq!(run.summary.scenario, "saddle_escape");
            assert!(!run.summary.diverged);
            assert_eq!(run.trajectory.rows[0].step, 0);
        }
        // reruns are deterministic
        let again = saddle_escape_experiment(&spec).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn parallel_and_sequential_schedules_agree() {
        let mut spec = tiny_spec(Scenario::SaddleEscape);
        let sequential = saddle_escape_experiment(&spec).unwrap();
        spec.workers = 0;
        let parallel = saddle_escape_experiment(&spec).unwrap();
        assert_eq!(sequential, parallel);
    }

    #[test]
    fn balance_table_rows_split_alpha_by_mode() {
        let mut spec = tiny_spec(Scenario::BalanceTable);
        spec.grid = vec![
            GridPoint {
                wd_mode: WdMode::Coupled,
                alpha: 1e-3,
                seed: 2,
                ..GridPoint::steepest(1.0, 2)
            },
            GridPoint {
                wd_mode: WdMode::Decoupled,
                alpha: 1e-3,
                seed: 2,
                ..GridPoint::steepest(1.0, 2)
            },
            GridPoint {
                seed: 2,
                ..GridPoint::steepest(1.0, 1)
            },
        ];
        let (_, rows) = regression_bias_experiment(&spec).unwrap();
        assert_eq!(rows[0].alpha_coupled, 1e-3);
        assert_eq!(rows[0].alpha_decoupled, 0.0);
        assert_eq!(rows[1].alpha_coupled, 0.0);
        assert_eq!(rows[1].alpha_decoupled, 1e-3);
        // depth 1 has no pairs, so its balance distance is exactly zero
        assert_eq!(rows[2].balance_dist, 0.0);
        for r in &rows {
            assert!(!(r.alpha_coupled != 0.0 && r.alpha_decoupled != 0.0));
        }
    }

    #[test]
    fn margin_outcomes_cover_adam_and_steepest() {
        let mut spec = tiny_spec(Scenario::ClassificationMargin);
        spec.eta = 0.01;
        spec.steps = 300;
        spec.grid = vec![
            GridPoint {
                seed: 3,
                ..GridPoint::steepest(1.0, 2)
            },
            GridPoint {
                optimizer: OptimizerKind::Adam(AdamParams::default()),
                seed: 3,
                ..GridPoint::steepest(1.0, 2)
            },
        ];
        let (_, outcomes) = classification_margin_experiment(&spec).unwrap();
        assert_eq!(outcomes.len(), 2);
        for o in &outcomes {
            assert_eq!(o.profile.len(), spec.n);
            assert!(o.profile.iter().cloned().fold(0.0_f64, f64::max) <= 1.0 + 1e-12);
            assert!(o.off_support_mass.is_finite());
        }
        assert_eq!(outcomes[0].point.optimizer_label(), "steepest");
        assert_eq!(outcomes[1].point.optimizer_label(), "adam");
    }

    #[test]
    fn equivalence_refuses_not_bregman_configs() {
        let mut spec = tiny_spec(Scenario::EquivalenceCheck);
        spec.n = 1;
        spec.s = 1;
        spec.eta = 1e-4;
        spec.steps = 500;
        spec.grid = vec![
            GridPoint {
                seed: 4,
                ..GridPoint::steepest(2.0, 3)
            },
            GridPoint {
                seed: 4,
                ..GridPoint::steepest(2.0, 2)
            },
        ];
        let outcomes = equivalence_experiment(&spec).unwrap();
        match &outcomes[0].status {
            EquivalenceStatus::NotBregman { metric_exponent } => {
                assert!((metric_exponent - 4.0 / 3.0).abs() < 1e-12);
            }
            other => panic!("expected not-bregman, got {other:?}"),
        }
        match &outcomes[1].status {
            EquivalenceStatus::Compared { sup_diff, .. } => {
                assert!(*sup_diff < 1e-2, "sup diff {sup_diff}");
            }
            other => panic!("expected comparison, got {other:?}"),
        }
    }

    #[test]
    fn coercivity_report_is_vacuous_on_zero_step_runs() {
        let spec = tiny_spec(Scenario::SaddleEscape);
        let task = gen_regression(spec.n, spec.k, spec.s, spec.task_seed).unwrap();
        let stack = initial_stack(spec.n, 2, spec.lambda_init).unwrap();
        let cfg = FlowConfig {
            q: 1.0,
            eta: 1e-3,
            steps: 0,
            wd_mode: WdMode::None,
            alpha: 0.0,
            batch_size: 0,
            seed: 0,
            record_every: 1,
        };
        let (_, traj) = run_flow(&task, &stack, &cfg, OptimizerKind::Steepest).unwrap();
        let geom = MirrorGeometry::new(1.0, 2, 0.2, vec![0.0; spec.n]).unwrap();
        let report = coercivity_bound_check(&traj, &geom, &cfg);
        assert!(report.ratio.is_none());
        assert!(report.satisfies(0.9));
    }
}
