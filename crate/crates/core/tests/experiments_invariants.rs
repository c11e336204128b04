//! Cross-cutting experiment invariants that need full training runs:
//! escape-time ordering in the coercivity constant, the balance-distance
//! contrast between decay modes, and the profile similarity between the
//! sign flow and Adam.

use steepflow_core::experiments::{initial_stack, regression_bias_experiment, ExperimentSpec, GridPoint, Scenario};
use steepflow_core::flows::{run_flow, AdamParams, FlowConfig, OptimizerKind, WdMode};
use steepflow_core::geometry::coercivity_from_init;
use steepflow_core::problems::{gen_classification, gen_regression, linf_margin_profile};
use steepflow_core::reparam::{init_near_saddle, product};

fn cfg(q: f64, eta: f64, steps: u64, record_every: u64) -> FlowConfig {
    FlowConfig {
        q,
        eta,
        steps,
        wd_mode: WdMode::None,
        alpha: 0.0,
        batch_size: 0,
        seed: 1,
        record_every,
    }
}

/// Steps-to-threshold is non-increasing in the coercivity constant
/// `lambda_init^(q (L-1))` across the saddle-escape grid (ordering only).
#[test]
fn escape_time_is_ordered_by_coercivity() {
    let task = gen_regression(100, 300, 5, 42).unwrap();
    let lambda_init = 0.1;
    let mut measured: Vec<(f64, u64)> = Vec::new();
    for &(q, depth) in &[(1.0, 2usize), (1.0, 3), (1.5, 3), (2.0, 3)] {
        let stack = init_near_saddle(100, depth, lambda_init).unwrap();
        let (_, traj) = run_flow(
            &task,
            &stack,
            &cfg(q, 1e-4, 300_000, 100),
            OptimizerKind::Steepest,
        )
        .unwrap();
        let mu = coercivity_from_init(lambda_init, q, depth).unwrap();
        let steps = traj
            .steps_to_loss(1e-3)
            .unwrap_or_else(|| panic!("q={q} L={depth} never reached the threshold"));
        measured.push((mu, steps));
    }
    measured.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    for pair in measured.windows(2) {
        assert!(
            pair[0].1 <= pair[1].1,
            "escape steps not ordered by coercivity: {measured:?}"
        );
    }
}

/// At depth 10, q=1, alpha=1e-3, decoupled decay keeps the balance distance
/// at least two orders of magnitude below coupled decay.
#[test]
fn decoupled_balance_distance_beats_coupled_by_two_orders() {
    let spec = ExperimentSpec {
        scenario: Scenario::BalanceTable,
        n: 100,
        s: 5,
        k: 80,
        lambda_init: 0.1,
        eta: 1e-4,
        steps: 200_000,
        record_every: 50_000,
        loss_threshold: 1e-3,
        task_seed: 42,
        grid: vec![
            GridPoint {
                wd_mode: WdMode::Decoupled,
                alpha: 1e-3,
                seed: 1,
                ..GridPoint::steepest(1.0, 10)
            },
            GridPoint {
                wd_mode: WdMode::Coupled,
                alpha: 1e-3,
                seed: 1,
                ..GridPoint::steepest(1.0, 10)
            },
        ],
        workers: 1,
        output_dir: None,
    };
    let (_, rows) = regression_bias_experiment(&spec).unwrap();
    let decoupled = rows[0].balance_dist;
    let coupled = rows[1].balance_dist;
    assert!(
        coupled >= 100.0 * decoupled,
        "contrast too small: decoupled {decoupled:.3e}, coupled {coupled:.3e}"
    );
}

/// Depth 1 has no reparameterization and no induced saddle set: both flow
/// exponents reach the loss threshold without a plateau.
#[test]
fn depth_one_has_no_saddle_plateau() {
    let task = gen_regression(100, 300, 5, 42).unwrap();
    let stack = initial_stack(100, 1, 0.1).unwrap();
    for &q in &[1.0, 2.0] {
        let (_, traj) = run_flow(
            &task,
            &stack,
            &cfg(q, 1e-4, 300_000, 100),
            OptimizerKind::Steepest,
        )
        .unwrap();
        assert!(
            traj.steps_to_loss(1e-3).is_some(),
            "q={q} failed to reach the threshold at depth 1"
        );
    }
}

/// At fixed init scale, gradient flow needs longer to escape at higher
/// depth (the near-saddle plateau intensifies with depth).
#[test]
fn gradient_flow_plateau_grows_with_depth() {
    let task = gen_regression(100, 300, 5, 42).unwrap();
    let mut escape = |depth: usize| -> u64 {
        let stack = init_near_saddle(100, depth, 0.1).unwrap();
        let (_, traj) = run_flow(
            &task,
            &stack,
            &cfg(2.0, 1e-4, 1_000_000, 100),
            OptimizerKind::Steepest,
        )
        .unwrap();
        traj.steps_to_loss(1e-3).expect("within the full budget")
    };
    let shallow = escape(2);
    let deep = escape(3);
    assert!(
        shallow < deep,
        "expected a longer plateau at depth 3: {shallow} vs {deep}"
    );
}

/// The mirror-flow correspondence also holds for the sign flow at depth 3,
/// away from gradient sign changes (the comparison excludes a window around
/// each flip).
#[test]
fn sign_flow_equivalence_holds_away_from_sign_changes() {
    use steepflow_core::experiments::{
        equivalence_experiment, EquivalenceStatus, ExperimentSpec, GridPoint, Scenario,
    };
    let spec = ExperimentSpec {
        scenario: Scenario::EquivalenceCheck,
        n: 1,
        s: 1,
        k: 1,
        lambda_init: 0.1,
        eta: 1e-4,
        steps: 20_000,
        record_every: 10_000,
        loss_threshold: 1e-3,
        task_seed: 42,
        grid: vec![GridPoint {
            seed: 1,
            ..GridPoint::steepest(1.0, 3)
        }],
        workers: 1,
        output_dir: None,
    };
    let outcomes = equivalence_experiment(&spec).unwrap();
    match &outcomes[0].status {
        EquivalenceStatus::Compared {
            sup_diff, ratio, ..
        } => {
            assert!(*sup_diff <= 5e-3, "sup diff {sup_diff:.3e}");
            assert!(*ratio >= 1.5, "halving ratio {ratio:.2}");
        }
        other => panic!("expected a comparison, got {other:?}"),
    }
}

/// Final margin profiles of the sign flow and Adam at equal depth stay
/// close (cosine similarity at least 0.9) under the classification
/// protocol.
#[test]
fn sign_flow_and_adam_profiles_are_similar() {
    let task = gen_classification(100, 80, 2, 42).unwrap();
    let profile = |optimizer: OptimizerKind| -> Vec<f64> {
        let stack = initial_stack(100, 10, 0.1).unwrap();
        let (s, _) = run_flow(&task, &stack, &cfg(1.0, 0.01, 10_000, 1_000), optimizer).unwrap();
        linf_margin_profile(&product(&s), &task).unwrap().profile
    };
    let sign_profile = profile(OptimizerKind::Steepest);
    let adam_profile = profile(OptimizerKind::Adam(AdamParams::default()));
    let dot: f64 = sign_profile.iter().zip(&adam_profile).map(|(a, b)| a * b).sum();
    let na: f64 = sign_profile.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb: f64 = adam_profile.iter().map(|b| b * b).sum::<f64>().sqrt();
    let cosine = dot / (na * nb);
    assert!(cosine >= 0.9, "cosine similarity {cosine:.4}");
}
