//! Compares sequential and rayon execution of an experiment grid, plus the
//! two hot kernels underneath it (full-batch loss/gradient evaluation and
//! one steepest step).

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use steepflow_core::experiments::{initial_stack, map_grid, GridPoint};
use steepflow_core::flows::{run_flow, steepest_step, FlowConfig, OptimizerKind, WdMode};
use steepflow_core::problems::{gen_regression, mse_loss_grad};
use steepflow_core::reparam::layer_gradients;

fn bench_grid(c: &mut Criterion) {
    let task = gen_regression(50, 120, 5, 7).unwrap();
    let grid: Vec<GridPoint> = [1.0, 1.25, 1.5, 1.75, 2.0, 1.1, 1.4, 1.9]
        .iter()
        .map(|&q| GridPoint {
            seed: 11,
            ..GridPoint::steepest(q, 3)
        })
        .collect();
    let run_one = |point: &GridPoint| {
        let stack = initial_stack(50, point.depth, 0.1).unwrap();
        let cfg = FlowConfig {
            q: point.q,
            eta: 1e-3,
            steps: 400,
            wd_mode: WdMode::None,
            alpha: 0.0,
            batch_size: 0,
            seed: point.seed,
            record_every: 100,
        };
        let (_, traj) = run_flow(&task, &stack, &cfg, OptimizerKind::Steepest).unwrap();
        traj.final_row().loss
    };

    let mut group = c.benchmark_group("grid");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter_batched(
            || grid.clone(),
            |g| map_grid(g, 1, |p| run_one(&p)),
            BatchSize::SmallInput,
        )
    });
    group.bench_function("parallel", |b| {
        b.iter_batched(
            || grid.clone(),
            |g| map_grid(g, 0, |p| run_one(&p)),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn bench_kernels(c: &mut Criterion) {
    let task = gen_regression(100, 300, 5, 7).unwrap();
    let stack = initial_stack(100, 3, 0.1).unwrap();
    let x = vec![0.5; 100];
    let cfg = FlowConfig {
        q: 1.5,
        eta: 1e-4,
        steps: 1,
        wd_mode: WdMode::None,
        alpha: 0.0,
        batch_size: 0,
        seed: 0,
        record_every: 1,
    };
    c.bench_function("mse_loss_grad_300x100", |b| {
        b.iter(|| mse_loss_grad(&task, &x).unwrap().loss)
    });
    let grads = layer_gradients(&stack, &mse_loss_grad(&task, &x).unwrap().grad).unwrap();
    c.bench_function("steepest_step_L3", |b| {
        b.iter(|| steepest_step(&stack, &grads, &cfg).unwrap())
    });
}

criterion_group!(benches, bench_grid, bench_kernels);
criterion_main!(benches);
