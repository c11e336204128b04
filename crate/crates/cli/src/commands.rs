//! Subcommand implementations: argument validation, experiment-spec
//! assembly, output-directory management and the self-check suites.

use crate::{
    BalanceTableArgs, CheckArgs, EquivalenceArgs, GeometryArgs, RunClassificationArgs,
    RunRegressionArgs, SaddleEscapeArgs,
};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};
use steepflow_core::error::{Error, Result};
use steepflow_core::experiments::{
    classification_margin_experiment, equivalence_experiment, regression_bias_experiment,
    saddle_escape_experiment, EquivalenceStatus, ExperimentSpec, GridPoint, Scenario,
    ScenarioOutput,
};
use steepflow_core::flows::{AdamParams, OptimizerKind, WdMode};
use steepflow_core::geometry::{
    classify_stability, coupled_equivalent_regularizer, legendre_value_balanced,
    manifold_regularizer, metric_exponent, metric_inverse_closed_depth2, wd_matches_manifold,
    MirrorGeometry,
};
use steepflow_core::io::Json;
use steepflow_core::numerics::finite_diff_grad;
use steepflow_core::problems::{exp_loss_grad, gen_classification, gen_regression, mse_loss_grad};
use steepflow_core::reparam::{layer_gradients, product, LayerStack};

pub enum Outcome {
    Success,
    /// Every run completed, but at least one diverged or tripped a domain
    /// violation; callers map this to exit code 2.
    DivergenceOnly,
}

fn parse_wd_mode(s: &str) -> Result<WdMode> {
    match s {
        "none" => Ok(WdMode::None),
        "coupled" => Ok(WdMode::Coupled),
        "decoupled" => Ok(WdMode::Decoupled),
        other => Err(Error::InvalidParameter(format!(
            "--wd-mode must be none, coupled or decoupled, got `{other}`"
        ))),
    }
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind> {
    match s {
        "steepest" => Ok(OptimizerKind::Steepest),
        "adam" => Ok(OptimizerKind::Adam(AdamParams::default())),
        other => Err(Error::InvalidParameter(format!(
            "--optimizer must be steepest or adam, got `{other}`"
        ))),
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325_u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Run directories never overwrite: without --force the output lands in a
/// `run-<timestamp>-<confighash>` subdirectory of --out.
fn resolve_out_dir(out: &Path, force: bool, fingerprint: &str) -> PathBuf {
    if force {
        return out.to_path_buf();
    }
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let hash = fnv1a(fingerprint.as_bytes());
    out.join(format!("run-{stamp}-{hash:08x}"))
}

fn scenario_outcome(out: &ScenarioOutput) -> Outcome {
    if out.runs.iter().any(|r| r.summary.diverged) {
        Outcome::DivergenceOnly
    } else {
        Outcome::Success
    }
}

fn announce(dir: &Path) {
    println!("run directory: {}", dir.display());
}

pub fn run_regression(args: RunRegressionArgs) -> Result<Outcome> {
    let dir = resolve_out_dir(&args.common.out, args.common.force, &format!("{args:?}"));
    let spec = ExperimentSpec {
        scenario: Scenario::RegressionBias,
        n: args.n,
        s: args.s,
        k: args.k,
        lambda_init: args.lambda,
        eta: args.eta,
        steps: args.steps,
        record_every: args.common.record_every,
        loss_threshold: 1e-3,
        task_seed: args.common.seed,
        grid: vec![GridPoint {
            q: args.q,
            depth: args.depth,
            wd_mode: parse_wd_mode(&args.wd_mode)?,
            alpha: args.alpha,
            batch_size: args.batch_size,
            seed: args.common.seed,
            optimizer: parse_optimizer(&args.optimizer)?,
        }],
        workers: args.common.workers,
        output_dir: Some(dir.clone()),
    };
    let (out, rows) = regression_bias_experiment(&spec)?;
    announce(&dir);
    let run = &out.runs[0];
    println!(
        "final loss {:.3e}, gt distance {:.3e}, balance distance {:.3e}",
        run.summary.final_loss, rows[0].gt_dist, rows[0].balance_dist
    );
    Ok(scenario_outcome(&out))
}

pub fn run_classification(args: RunClassificationArgs) -> Result<Outcome> {
    let dir = resolve_out_dir(&args.common.out, args.common.force, &format!("{args:?}"));
    let spec = ExperimentSpec {
        scenario: Scenario::ClassificationMargin,
        n: args.n,
        s: args.s,
        k: args.k,
        lambda_init: args.lambda,
        eta: args.eta,
        steps: args.steps,
        record_every: args.common.record_every,
        loss_threshold: 1e-3,
        task_seed: args.common.seed,
        grid: vec![GridPoint {
            q: args.q,
            depth: args.depth,
            wd_mode: WdMode::None,
            alpha: 0.0,
            batch_size: args.batch_size,
            seed: args.common.seed,
            optimizer: parse_optimizer(&args.optimizer)?,
        }],
        workers: args.common.workers,
        output_dir: Some(dir.clone()),
    };
    let (out, outcomes) = classification_margin_experiment(&spec)?;
    announce(&dir);
    let o = &outcomes[0];
    println!(
        "margin {:.6}, off-support mass {:.6}{}",
        o.margin,
        o.off_support_mass,
        if o.saturated { " (saturated)" } else { "" }
    );
    Ok(scenario_outcome(&out))
}

pub fn saddle_escape(args: SaddleEscapeArgs) -> Result<Outcome> {
    let dir = resolve_out_dir(&args.common.out, args.common.force, &format!("{args:?}"));
    let steps = args
        .steps
        .unwrap_or(if args.full_protocol { 1_000_000 } else { 200_000 });
    let mut grid = Vec::new();
    for &depth in &args.depth {
        for &q in &args.q {
            grid.push(GridPoint {
                seed: args.common.seed,
                ..GridPoint::steepest(q, depth)
            });
        }
    }
    let spec = ExperimentSpec {
        scenario: Scenario::SaddleEscape,
        n: args.n,
        s: args.s,
        k: args.k,
        lambda_init: args.lambda,
        eta: args.eta,
        steps,
        record_every: args.common.record_every,
        loss_threshold: args.threshold,
        task_seed: args.common.seed,
        grid,
        workers: args.common.workers,
        output_dir: Some(dir.clone()),
    };
    let out = saddle_escape_experiment(&spec)?;
    announce(&dir);
    for run in &out.runs {
        match run.summary.steps_to_threshold {
            Some(s) => println!("{}: loss <= {:e} after {s} steps", run.point.key(), args.threshold),
            None => println!(
                "{}: threshold not reached (final loss {:.3e}{})",
                run.point.key(),
                run.summary.final_loss,
                if run.summary.diverged { ", diverged" } else { "" }
            ),
        }
    }
    Ok(scenario_outcome(&out))
}

pub fn balance_table(args: BalanceTableArgs) -> Result<Outcome> {
    let dir = resolve_out_dir(&args.common.out, args.common.force, &format!("{args:?}"));
    let steps = args
        .steps
        .unwrap_or(if args.full_protocol { 1_000_000 } else { 200_000 });
    let mut grid = Vec::new();
    for &depth in &args.depth {
        grid.push(GridPoint {
            batch_size: args.batch_size,
            seed: args.common.seed,
            ..GridPoint::steepest(args.q, depth)
        });
        for &alpha in &args.alpha {
            for wd_mode in [WdMode::Coupled, WdMode::Decoupled] {
                grid.push(GridPoint {
                    wd_mode,
                    alpha,
                    batch_size: args.batch_size,
                    seed: args.common.seed,
                    ..GridPoint::steepest(args.q, depth)
                });
            }
        }
    }
    let spec = ExperimentSpec {
        scenario: Scenario::BalanceTable,
        n: args.n,
        s: args.s,
        k: args.k,
        lambda_init: args.lambda,
        eta: args.eta,
        steps,
        record_every: args.common.record_every,
        loss_threshold: 1e-3,
        task_seed: args.common.seed,
        grid,
        workers: args.common.workers,
        output_dir: Some(dir.clone()),
    };
    let (out, rows) = regression_bias_experiment(&spec)?;
    announce(&dir);
    println!("depth  a_coupled  a_decoupled  balance_dist  gt_dist");
    for r in &rows {
        println!(
            "{:>5}  {:>9.1e}  {:>11.1e}  {:>12.3e}  {:>7.3e}",
            r.depth, r.alpha_coupled, r.alpha_decoupled, r.balance_dist, r.gt_dist
        );
    }
    Ok(scenario_outcome(&out))
}

pub fn equivalence(args: EquivalenceArgs) -> Result<Outcome> {
    let dir = resolve_out_dir(&args.common.out, args.common.force, &format!("{args:?}"));
    let mut grid = Vec::new();
    for &depth in &args.depth {
        for &q in &args.q {
            grid.push(GridPoint {
                seed: args.common.seed,
                ..GridPoint::steepest(q, depth)
            });
        }
    }
    let spec = ExperimentSpec {
        scenario: Scenario::EquivalenceCheck,
        n: args.n,
        s: args.n,
        k: 1,
        lambda_init: args.lambda,
        eta: args.eta,
        steps: args.steps,
        record_every: args.common.record_every,
        loss_threshold: 1e-3,
        task_seed: args.common.seed,
        grid,
        workers: args.common.workers,
        output_dir: Some(dir.clone()),
    };
    let outcomes = equivalence_experiment(&spec)?;
    announce(&dir);
    let mut flagged = false;
    for o in &outcomes {
        match &o.status {
            EquivalenceStatus::Compared {
                sup_diff,
                sup_diff_half_eta,
                ratio,
            } => println!(
                "{}: sup diff {sup_diff:.3e}, at eta/2 {sup_diff_half_eta:.3e} (ratio {ratio:.2})",
                o.point.key()
            ),
            EquivalenceStatus::NotBregman { metric_exponent } => println!(
                "{}: skipped, metric exponent {metric_exponent:.3} > 1 (not a Bregman function)",
                o.point.key()
            ),
            EquivalenceStatus::DomainViolation(msg) => {
                flagged = true;
                println!("{}: domain violation: {msg}", o.point.key());
            }
            EquivalenceStatus::Diverged { step } => {
                flagged = true;
                println!("{}: diverged at step {step}", o.point.key());
            }
        }
    }
    Ok(if flagged {
        Outcome::DivergenceOnly
    } else {
        Outcome::Success
    })
}

pub fn geometry(args: GeometryArgs) -> Result<Outcome> {
    let geom = MirrorGeometry::new(args.q, args.depth, args.lambda, vec![args.x])?;
    let stability = classify_stability(args.q, args.depth)?;
    let metric_inverse = geom.metric_inverse(args.x.abs())?;
    let manifold = manifold_regularizer(&[args.x], args.q, args.depth)
        .map(Json::Float)
        .unwrap_or(Json::Null);
    let closed2 = if args.depth == 2 {
        Json::Float(metric_inverse_closed_depth2(args.x, args.lambda, args.q))
    } else {
        Json::Null
    };
    let doc = Json::Object(vec![
        ("q".into(), Json::Float(args.q)),
        ("depth".into(), Json::Int(args.depth as i64)),
        ("lambda".into(), Json::Float(args.lambda)),
        ("x".into(), Json::Float(args.x)),
        ("metric_inverse".into(), Json::Float(metric_inverse)),
        ("metric".into(), Json::Float(1.0 / metric_inverse)),
        ("metric_inverse_closed_depth2".into(), closed2),
        (
            "metric_exponent".into(),
            Json::Float(metric_exponent(args.q, args.depth)),
        ),
        ("stability".into(), Json::Str(stability.tag.as_str().into())),
        ("coercivity".into(), Json::Float(geom.coercivity())),
        ("manifold_regularizer".into(), manifold),
        (
            "coupled_equivalent_regularizer".into(),
            Json::Float(coupled_equivalent_regularizer(&[args.x], args.depth)?),
        ),
        (
            "wd_matches_manifold".into(),
            Json::Bool(wd_matches_manifold(args.q, args.depth)?),
        ),
    ]);
    print!("{}", doc.render());
    Ok(Outcome::Success)
}

/// Built-in verification: the finite-difference gradient suite and the
/// depth-2 closed-form cross-check. Prints one line per suite.
pub fn check(args: CheckArgs) -> Result<Outcome> {
    let mut all_ok = true;
    let mut report = |name: &str, ok: bool, detail: String| {
        println!("{} {name}{}", if ok { "PASS" } else { "FAIL" }, detail);
        all_ok &= ok;
    };

    // Gradient suite: analytic MSE/exponential/layer gradients against
    // central differences.
    let mut worst: f64 = 0.0;
    for i in 0..args.instances {
        let reg = gen_regression(6, 9, 2, 1000 + i)?;
        let cls = gen_classification(6, 9, 2, 2000 + i)?;
        let x: Vec<f64> = (0..6).map(|j| ((i + 1) as f64 * 0.1 + j as f64 * 0.3).sin()).collect();
        let analytic = mse_loss_grad(&reg, &x)?.grad;
        let fd = finite_diff_grad(|p| mse_loss_grad(&reg, p).unwrap().loss, &x, 1e-5)?;
        for j in 0..6 {
            worst = worst.max((analytic[j] - fd[j]).abs() / fd[j].abs().max(1e-3));
        }
        let analytic = exp_loss_grad(&cls, &x)?.grad;
        let fd = finite_diff_grad(|p| exp_loss_grad(&cls, p).unwrap().loss, &x, 1e-5)?;
        for j in 0..6 {
            worst = worst.max((analytic[j] - fd[j]).abs() / fd[j].abs().max(1e-3));
        }
        let layers: Vec<Vec<f64>> = (0..3)
            .map(|l| (0..6).map(|j| ((i as f64) * 0.7 + l as f64 + j as f64 * 0.13).cos()).collect())
            .collect();
        let stack = LayerStack::new(layers.clone())?;
        let gx: Vec<f64> = product(&stack).iter().map(|v| 2.0 * v).collect();
        let grads = layer_gradients(&stack, &gx)?;
        for l in 0..3 {
            let f = |w: &[f64]| {
                let mut alt = layers.clone();
                alt[l] = w.to_vec();
                let s = LayerStack::new(alt).unwrap();
                product(&s).iter().map(|v| v * v).sum::<f64>()
            };
            let fd = finite_diff_grad(f, &layers[l], 1e-5)?;
            for j in 0..6 {
                worst = worst.max((grads[l][j] - fd[j]).abs() / fd[j].abs().max(1e-3));
            }
        }
    }
    report(
        "gradient-oracle-suite",
        worst <= 1e-6,
        format!(" (max rel err {worst:.2e}, {} instances)", args.instances),
    );

    // Depth-2 closed form against the implicit-root metric.
    let mut worst: f64 = 0.0;
    for &q in &[1.0, 1.5, 2.0] {
        for &lambda in &[0.0, 0.01, 1.0] {
            let geom = MirrorGeometry::new(q, 2, lambda, vec![0.0])?;
            for k in 0..20 {
                let x = 1e-8 * 10f64.powf(k as f64 * 11.0 / 19.0);
                let implicit = geom.metric_inverse(x)?;
                let closed = metric_inverse_closed_depth2(x, lambda, q);
                worst = worst.max((implicit - closed).abs() / closed.max(1.0));
            }
        }
    }
    report(
        "depth2-closed-form",
        worst <= 1e-10,
        format!(" (max rel err {worst:.2e})"),
    );

    // Legendre reference-point gradient.
    let mut worst: f64 = 0.0;
    for i in 0..20_u64 {
        let depth = 2 + (i % 5) as usize;
        let q_max = depth as f64 / (depth as f64 - 1.0);
        let q = 0.4 + (i as f64 / 20.0) * (q_max - 0.4);
        let x0 = 0.5 + (i as f64) * 0.07;
        let f = |p: &[f64]| legendre_value_balanced(p[0], x0, q, depth).unwrap();
        let grad = finite_diff_grad(f, &[x0], 1e-6)?;
        worst = worst.max(grad[0].abs());
    }
    report(
        "legendre-reference-gradient",
        worst <= 1e-6,
        format!(" (max |dR(x0)| {worst:.2e})"),
    );

    if all_ok {
        Ok(Outcome::Success)
    } else {
        Err(Error::InvalidConfiguration(
            "self-check failed; see FAIL lines above".to_string(),
        ))
    }
}
