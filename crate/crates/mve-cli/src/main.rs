//! `mve` — train and evaluate mean-variance estimation networks.
//!
//! Subcommands:
//! - `demo sine|quadratic|landscape`: the synthetic demonstrations, emitting
//!   plot-ready CSV files into a run directory.
//! - `bench`: the nested cross-validation benchmark over a CSV dataset.
//! - `train`: fit a single network and serialize it.
//! - `oracle`: run the closed-form linear-model verification suite.
//!
//! Exit codes: 0 success, 1 usage error (or failed verification), 2 data
//! error, 3 training divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mve::data::{standardize_fit, Dataset};
use mve::error::Error;
use mve::eval::MetricScale;
use mve::experiments::{
    generate, linspace, mean_function_rmse, nll_profile, predict_curve, regularization_sweep,
    HarnessSettings, SweepSettings, SyntheticKind, SyntheticSpec, DEFAULT_LAMBDA_GRID,
};
use mve::io::{
    fmt_sci, load_csv, run_and_write_bench, save_network, save_train_config, sha256_file,
    write_columns_csv, write_dataset_csv, BenchSpec, DatasetInfo, RunDir, RunManifest,
    TargetColumn,
};
use mve::model::MveNetwork;
use mve::oracle::{run_verification, CheckKind};
use mve::seed::derive_seed;
use mve::train::{train, RegMode, Strategy, TrainConfig};

#[derive(Parser)]
#[command(name = "mve", version, about = "Mean-variance estimation networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce the synthetic demonstrations.
    Demo {
        #[command(subcommand)]
        which: DemoCommand,
    },
    /// Nested cross-validation benchmark on a CSV dataset.
    Bench(BenchArgs),
    /// Train a single network and serialize it.
    Train(TrainArgs),
    /// Run the closed-form linear-model verification suite.
    Oracle(OracleArgs),
}

#[derive(Subcommand)]
enum DemoCommand {
    /// Sine wave with tiny noise: warm-up succeeds, joint training fails,
    /// separate regularization rescues joint training.
    Sine(SineArgs),
    /// Heteroscedastic quadratic: sweep the variance regularization.
    Quadratic(QuadraticArgs),
    /// Two-cluster NLL landscape with its two local minima.
    Landscape(LandscapeArgs),
}

#[derive(Args)]
struct SineArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    lambda_mean: f64,
    /// Variance-head constant of the separate-regularization arm.
    #[arg(long, default_value_t = 1e-3)]
    lambda_var: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [40, 20])]
    hidden: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QuadraticArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LandscapeArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Points per cluster.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    data: PathBuf,
    /// Target column: `last`, a zero-based index, or a header name.
    #[arg(long, default_value = "last")]
    target: String,
    /// Treat the first row as data, not a header.
    #[arg(long)]
    no_header: bool,
    #[arg(long, value_delimiter = ',', default_values_t = ["no-warmup".to_string(), "warmup".to_string(), "warmup-fixed-mean".to_string()])]
    strategies: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = ["equal".to_string(), "separate".to_string()])]
    modes: Vec<String>,
    #[arg(long, default_value_t = 10)]
    outer_folds: usize,
    #[arg(long, default_value_t = 10)]
    inner_folds: usize,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAMBDA_GRID)]
    lambda_grid: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [40, 20])]
    hidden: Vec<usize>,
    /// `original` or `standardized`.
    #[arg(long, default_value = "original")]
    metric_scale: String,
    #[arg(long, default_value_t = 0.90)]
    confidence: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "last")]
    target: String,
    #[arg(long)]
    no_header: bool,
    /// `no-warmup`, `warmup`, or `warmup-fixed-mean`.
    #[arg(long, default_value = "warmup")]
    strategy: String,
    /// `equal` or `separate`.
    #[arg(long, default_value = "equal")]
    reg_mode: String,
    #[arg(long, default_value_t = 0.0)]
    lambda_mean: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda_var: f64,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [40, 20])]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optionally write the verification table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> Result<Strategy, Error> {
    match s {
        "no-warmup" | "nowarmup" => Ok(Strategy::NoWarmup),
        "warmup" => Ok(Strategy::Warmup),
        "warmup-fixed-mean" => Ok(Strategy::WarmupFixedMean),
        other => Err(Error::config(format!(
            "unknown strategy '{other}' (expected no-warmup, warmup, or warmup-fixed-mean)"
        ))),
    }
}

fn parse_mode(s: &str) -> Result<RegMode, Error> {
    match s {
        "equal" => Ok(RegMode::Equal),
        "separate" => Ok(RegMode::Separate),
        other => Err(Error::config(format!(
            "unknown regularization mode '{other}' (expected equal or separate)"
        ))),
    }
}

fn parse_scale(s: &str) -> Result<MetricScale, Error> {
    match s {
        "original" => Ok(MetricScale::Original),
        "standardized" => Ok(MetricScale::Standardized),
        other => Err(Error::config(format!(
            "unknown metric scale '{other}' (expected original or standardized)"
        ))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Data { .. } | Error::Io(_) => 2,
                Error::Divergence { .. } => 3,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Demo { which } => match which {
            DemoCommand::Sine(args) => demo_sine(args),
            DemoCommand::Quadratic(args) => demo_quadratic(args),
            DemoCommand::Landscape(args) => demo_landscape(args),
        },
        Command::Bench(args) => bench(args),
        Command::Train(args) => train_cmd(args),
        Command::Oracle(args) => oracle_cmd(args),
    }
}

fn load_dataset(path: &PathBuf, target: &str, no_header: bool) -> Result<Dataset, Error> {
    load_csv(path, &TargetColumn::parse(target), !no_header)
}

fn dataset_info(data: &Dataset, path: Option<&PathBuf>) -> Result<DatasetInfo, Error> {
    Ok(DatasetInfo {
        path: path.map(|p| p.display().to_string()),
        sha256: path.map(|p| sha256_file(p)).transpose()?,
        label: data.label.clone(),
        rows: data.n(),
        columns: data.p(),
    })
}

fn demo_sine(args: SineArgs) -> Result<ExitCode, Error> {
    let run = RunDir::create(&args.out)?;
    let data = generate(&SyntheticSpec {
        kind: SyntheticKind::Sine,
        n: args.n,
        seed: args.seed,
    });
    write_dataset_csv(&run.path("data.csv"), &data)?;
    let stats = standardize_fit(&data)?;
    let standardized = stats.apply(&data)?;
    let grid = linspace(0.0, 10.0, 501);
    let truth: Vec<f64> = grid.iter().map(|&x| mve::experiments::sine_mean(x)).collect();

    let arms: [(&str, Strategy, RegMode, f64, f64); 3] = [
        ("warmup_equal", Strategy::Warmup, RegMode::Equal, args.lambda_mean, args.lambda_mean),
        ("nowarmup_equal", Strategy::NoWarmup, RegMode::Equal, args.lambda_mean, args.lambda_mean),
        (
            "nowarmup_separate",
            Strategy::NoWarmup,
            RegMode::Separate,
            args.lambda_mean,
            args.lambda_var,
        ),
    ];
    let mut summary = String::from("arm,strategy,reg_mode,lambda_mean,lambda_var,mean_rmse_vs_truth\n");
    for (i, (name, strategy, mode, lm, lv)) in arms.into_iter().enumerate() {
        let cfg = TrainConfig {
            strategy,
            reg_mode: mode,
            lambda_mean: lm,
            lambda_var: lv,
            epochs_per_stage: args.epochs,
            seed: derive_seed(args.seed, &[i as u64, 0]),
            ..TrainConfig::default()
        };
        let net = MveNetwork::init(1, &args.hidden, derive_seed(args.seed, &[i as u64, 1]), 1.0, 1e-6)?;
        let (trained, _) = train(net, &standardized, &cfg)?;
        let (mean, stdev) = predict_curve(&trained, &stats, &grid)?;
        let lower: Vec<f64> = mean.iter().zip(&stdev).map(|(m, s)| m - s).collect();
        let upper: Vec<f64> = mean.iter().zip(&stdev).map(|(m, s)| m + s).collect();
        write_columns_csv(
            &run.path(&format!("fit_{name}.csv")),
            &["x", "mean", "lower", "upper", "true_mean"],
            &[&grid, &mean, &lower, &upper, &truth],
        )?;
        let rmse = mean_function_rmse(&trained, &stats, &grid, mve::experiments::sine_mean)?;
        summary.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            strategy.name(),
            mode.name(),
            fmt_sci(lm),
            fmt_sci(lv),
            fmt_sci(rmse)
        ));
        println!("{name}: mean-function RMSE vs truth = {rmse:.4}");
    }
    run.write_text("summary.csv", &summary)?;
    let manifest = RunManifest::new(
        "demo sine",
        args.seed,
        serde_json::json!({
            "n": args.n,
            "epochs": args.epochs,
            "lambda_mean": args.lambda_mean,
            "lambda_var": args.lambda_var,
            "hidden": args.hidden,
        }),
    )
    .with_dataset(dataset_info(&data, None)?);
    run.write_manifest(&manifest)?;
    Ok(ExitCode::SUCCESS)
}

fn demo_quadratic(args: QuadraticArgs) -> Result<ExitCode, Error> {
    let run = RunDir::create(&args.out)?;
    let data = generate(&SyntheticSpec {
        kind: SyntheticKind::QuadraticHetero,
        n: args.n,
        seed: args.seed,
    });
    write_dataset_csv(&run.path("data.csv"), &data)?;
    let settings = SweepSettings {
        epochs_per_stage: args.epochs,
        seed: args.seed,
        ..SweepSettings::default()
    };
    let panels = regularization_sweep(&data, &settings)?;
    let mut summary = String::from(
        "lambda_var,mean_rmse_vs_truth,variance_ratio,stdev_at_-1,true_stdev_at_-1,stdev_at_0,true_stdev_at_0,stdev_at_1,true_stdev_at_1\n",
    );
    for panel in &panels {
        write_columns_csv(
            &run.path(&format!("fit_lambda_var_{}.csv", panel.lambda_var)),
            &["x", "mean", "stdev", "true_mean", "true_stdev"],
            &[
                &panel.curve.x,
                &panel.curve.mean,
                &panel.curve.stdev,
                &panel.curve.true_mean,
                &panel.curve.true_stdev,
            ],
        )?;
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_sci(panel.lambda_var),
            fmt_sci(panel.mean_rmse_vs_truth),
            fmt_sci(panel.variance_ratio),
            fmt_sci(panel.stdev_probes[0].1),
            fmt_sci(panel.stdev_probes[0].2),
            fmt_sci(panel.stdev_probes[1].1),
            fmt_sci(panel.stdev_probes[1].2),
            fmt_sci(panel.stdev_probes[2].1),
            fmt_sci(panel.stdev_probes[2].2),
        ));
        println!(
            "lambda_var = {}: mean RMSE {:.4}, variance max/min {:.2}",
            panel.lambda_var, panel.mean_rmse_vs_truth, panel.variance_ratio
        );
    }
    run.write_text("summary.csv", &summary)?;
    let manifest = RunManifest::new(
        "demo quadratic",
        args.seed,
        serde_json::json!({
            "n": args.n,
            "epochs": args.epochs,
            "lambda_mean": settings.lambda_mean,
            "lambda_vars": settings.lambda_vars,
        }),
    )
    .with_dataset(dataset_info(&data, None)?);
    run.write_manifest(&manifest)?;
    Ok(ExitCode::SUCCESS)
}

fn demo_landscape(args: LandscapeArgs) -> Result<ExitCode, Error> {
    let run = RunDir::create(&args.out)?;
    let data = generate(&SyntheticSpec {
        kind: SyntheticKind::TwoCluster,
        n: args.n,
        seed: args.seed,
    });
    write_dataset_csv(&run.path("data.csv"), &data)?;
    let grid = linspace(0.0, 7.0, 701);
    let profile = nll_profile(&data, &grid)?;
    let flags: Vec<f64> = profile
        .mu_grid
        .iter()
        .map(|mu| {
            if profile.local_minima.iter().any(|(m, _)| m == mu) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    write_columns_csv(
        &run.path("profile.csv"),
        &["mu", "nll", "is_local_min"],
        &[&profile.mu_grid, &profile.nll_values, &flags],
    )?;
    let minima_mu: Vec<f64> = profile.local_minima.iter().map(|(m, _)| *m).collect();
    let minima_nll: Vec<f64> = profile.local_minima.iter().map(|(_, v)| *v).collect();
    write_columns_csv(&run.path("minima.csv"), &["mu", "nll"], &[&minima_mu, &minima_nll])?;
    println!("detected {} local minima at {:?}", minima_mu.len(), minima_mu);
    let manifest = RunManifest::new(
        "demo landscape",
        args.seed,
        serde_json::json!({"n": args.n, "grid": [0.0, 7.0, 701]}),
    )
    .with_dataset(dataset_info(&data, None)?);
    run.write_manifest(&manifest)?;
    Ok(ExitCode::SUCCESS)
}

fn bench(args: BenchArgs) -> Result<ExitCode, Error> {
    let data = load_dataset(&args.data, &args.target, args.no_header)?;
    let strategies = args
        .strategies
        .iter()
        .map(|s| parse_strategy(s))
        .collect::<Result<Vec<_>, _>>()?;
    let modes = args
        .modes
        .iter()
        .map(|s| parse_mode(s))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = BenchSpec {
        strategies,
        modes,
        outer_folds: args.outer_folds,
        inner_folds: args.inner_folds,
        lambda_grid: args.lambda_grid.clone(),
        settings: HarnessSettings {
            epochs_per_stage: args.epochs,
            batch_size: args.batch_size,
            hidden: args.hidden.clone(),
            scale: parse_scale(&args.metric_scale)?,
            confidence: args.confidence,
            seed: args.seed,
            ..HarnessSettings::default()
        },
    };
    let run = RunDir::create(&args.out)?;
    let manifest = RunManifest::new("bench", args.seed, serde_json::to_value(&spec)?)
        .with_dataset(dataset_info(&data, Some(&args.data))?);
    run.write_manifest(&manifest)?;
    let summary = run_and_write_bench(&data, &spec, &run)?;
    print!("{}", mve::io::aggregate_table_text(&summary));
    Ok(ExitCode::SUCCESS)
}

fn train_cmd(args: TrainArgs) -> Result<ExitCode, Error> {
    let data = load_dataset(&args.data, &args.target, args.no_header)?;
    let cfg = TrainConfig {
        strategy: parse_strategy(&args.strategy)?,
        reg_mode: parse_mode(&args.reg_mode)?,
        lambda_mean: args.lambda_mean,
        lambda_var: args.lambda_var,
        epochs_per_stage: args.epochs,
        batch_size: args.batch_size,
        seed: derive_seed(args.seed, &[0]),
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let run = RunDir::create(&args.out)?;
    let stats = standardize_fit(&data)?;
    let standardized = stats.apply(&data)?;
    let net = MveNetwork::init(data.p(), &args.hidden, derive_seed(args.seed, &[1]), 1.0, 1e-6)?;
    let (trained, trace) = train(net, &standardized, &cfg)?;

    save_train_config(&run.path("config.json"), &cfg)?;
    save_network(&run.path("network.json"), &trained)?;
    run.write_text(
        "standardization.json",
        &serde_json::to_string_pretty(&stats)?,
    )?;
    let epochs: Vec<f64> = (0..trace.train_loss.len()).map(|e| e as f64).collect();
    write_columns_csv(
        &run.path("trace.csv"),
        &["epoch", "train_loss"],
        &[&epochs, &trace.train_loss],
    )?;
    let manifest = RunManifest::new("train", args.seed, serde_json::to_value(&cfg)?)
        .with_dataset(dataset_info(&data, Some(&args.data))?);
    run.write_manifest(&manifest)?;
    println!(
        "trained {} epochs; final loss {:.6}",
        trace.train_loss.len(),
        trace.train_loss.last().unwrap()
    );
    Ok(ExitCode::SUCCESS)
}

fn oracle_cmd(args: OracleArgs) -> Result<ExitCode, Error> {
    let report = run_verification(args.seed)?;
    println!(
        "{:<55} {:>12} {:>12} {:>10} {:>7} {}",
        "check", "value", "target", "tolerance", "kind", "pass"
    );
    for c in &report.checks {
        let kind = match c.kind {
            CheckKind::Within => "within",
            CheckKind::AtLeast => ">=",
            CheckKind::AtMost => "<=",
        };
        println!(
            "{:<55} {:>12} {:>12} {:>10} {:>7} {}",
            c.name,
            fmt_sci(c.value),
            fmt_sci(c.target),
            fmt_sci(c.tolerance),
            kind,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    if let Some(out) = args.out {
        let run = RunDir::create(&out)?;
        let mut csv = String::from("check,value,target,tolerance,kind,pass\n");
        for c in &report.checks {
            csv.push_str(&format!(
                "{},{},{},{},{:?},{}\n",
                c.name,
                fmt_sci(c.value),
                fmt_sci(c.target),
                fmt_sci(c.tolerance),
                c.kind,
                c.pass
            ));
        }
        run.write_text("oracle.csv", &csv)?;
        run.write_manifest(&RunManifest::new("oracle", args.seed, serde_json::json!({})))?;
    }
    if report.all_pass() {
        println!("all {} checks passed", report.checks.len());
        Ok(ExitCode::SUCCESS)
    } else {
        let failed = report.checks.iter().filter(|c| !c.pass).count();
        eprintln!("{failed} of {} checks failed", report.checks.len());
        Ok(ExitCode::from(1))
    }
}
