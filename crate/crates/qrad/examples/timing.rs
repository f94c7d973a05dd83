use qrad::parallel::Parallelism;
use qrad::rademacher::{estimate, EstimatorConfig, ModelSource, DEFAULT_EVAL_BUDGET};
use std::time::Instant;

fn main() {
    for (l, n_theta) in [(5usize, 2000usize), (16, 16000)] {
        let cfg = EstimatorConfig {
            n_trials: 10,
            n_data: 200,
            n_theta,
            l,
            scale: 1.0,
            n_qubits: 5,
            seed: 1,
            model_source: ModelSource::SampledPerSeed,
            eval_budget: DEFAULT_EVAL_BUDGET,
        };
        let evals = cfg.evaluation_count();
        let t = Instant::now();
        let est = estimate(&cfg, &Parallelism::auto()).unwrap();
        let dt = t.elapsed().as_secs_f64();
        println!(
            "L={l:2} n_theta={n_theta:6}: {evals:>12} evals in {dt:7.2}s -> {:6.1} ns/eval (g_ave={:.4})",
            dt / evals as f64 * 1e9, est.g_ave
        );
    }
}
