//! Scratch calibration binary (not part of the deliverable surface): sweeps
//! learning rate and epoch budget on the sine demo arms.

use mve::data::standardize_fit;
use mve::experiments::{generate, linspace, mean_function_rmse, sine_mean, SyntheticKind, SyntheticSpec};
use mve::model::MveNetwork;
use mve::nn::AdamConfig;
use mve::seed::derive_seed;
use mve::train::{train, RegMode, Strategy, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1000);
    let seed: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0);
    let arm: String = args.get(4).cloned().unwrap_or_else(|| "all".into());
    let hidden: Vec<usize> = args
        .get(5)
        .map(|s| s.split(',').map(|v| v.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![64, 64, 64]);
    let lv_scale: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(10.0);
    let lm: f64 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(1e-4);

    let data = generate(&SyntheticSpec {
        kind: SyntheticKind::Sine,
        n: 1000,
        seed,
    });
    let stats = standardize_fit(&data).unwrap();
    let standardized = stats.apply(&data).unwrap();
    let grid = linspace(0.0, 10.0, 501);

    let arms: Vec<(&str, Strategy, RegMode, f64, f64)> = vec![
        ("warmup_equal", Strategy::Warmup, RegMode::Equal, lm, lm),
        ("nowarmup_equal", Strategy::NoWarmup, RegMode::Equal, lm, lm),
        ("nowarmup_sep", Strategy::NoWarmup, RegMode::Separate, lm, lm * lv_scale),
    ];
    for (i, (name, strategy, mode, lm, lv)) in arms.into_iter().enumerate() {
        if arm != "all" && arm != name {
            continue;
        }
        let cfg = TrainConfig {
            strategy,
            reg_mode: mode,
            lambda_mean: lm,
            lambda_var: lv,
            epochs_per_stage: epochs,
            seed: derive_seed(seed, &[i as u64, 0]),
            adam: AdamConfig {
                learning_rate: lr,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        };
        let net = MveNetwork::init(1, &hidden, derive_seed(seed, &[i as u64, 1]), 1.0, 1e-6).unwrap();
        let t0 = std::time::Instant::now();
        match train(net, &standardized, &cfg) {
            Ok((trained, trace)) => {
                let rmse = mean_function_rmse(&trained, &stats, &grid, sine_mean).unwrap();
                println!(
                    "lr={lr} epochs={epochs} seed={seed} {name}: rmse={rmse:.4} final_loss={:.4} ({:.1}s)",
                    trace.train_loss.last().unwrap(),
                    t0.elapsed().as_secs_f64()
                );
            }
            Err(e) => println!("lr={lr} epochs={epochs} seed={seed} {name}: DIVERGED ({e})"),
        }
    }
}
