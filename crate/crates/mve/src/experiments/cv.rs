use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{standardize_fit, Dataset};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_folds, metrics_on_scale, paired_t_test, MetricScale, Metrics, MetricsAggregate,
    PairedTestResult,
};
use crate::model::MveNetwork;
use crate::nn::AdamConfig;
use crate::seed::derive_seed;
use crate::train::{train, RegMode, Strategy, TrainConfig};

/// The default grid of candidate regularization constants.
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];

/// Fold assignments for nested cross-validation.
///
/// Outer folds partition the whole index set; each outer fold's inner folds
/// partition the remaining training indices. Assignments are a seeded shuffle
/// followed by contiguous blocks, so they are reproducible from `(n, seed)`
/// alone, and every strategy/mode arm sees the same splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    /// `outer[o]` holds the validation indices of outer fold `o`.
    pub outer: Vec<Vec<usize>>,
    /// `inner[o][g]` holds inner-validation indices (into the full dataset)
    /// of inner fold `g` within outer fold `o`'s training set.
    pub inner: Vec<Vec<Vec<usize>>>,
    pub lambda_grid: Vec<f64>,
    pub seed: u64,
}

fn blocks(mut idx: Vec<usize>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    idx.shuffle(rng);
    let n = idx.len();
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        out.push(idx[at..at + size].to_vec());
        at += size;
    }
    out
}

impl CvPlan {
    pub fn new(
        n: usize,
        outer_folds: usize,
        inner_folds: usize,
        lambda_grid: &[f64],
        seed: u64,
    ) -> Result<Self> {
        if outer_folds < 2 || inner_folds < 2 {
            return Err(Error::config("need at least two outer and two inner folds"));
        }
        if outer_folds > n {
            return Err(Error::config(format!(
                "{outer_folds} outer folds exceed the {n} available rows"
            )));
        }
        if lambda_grid.is_empty() {
            return Err(Error::config("lambda grid must be nonempty"));
        }
        let mut grid = lambda_grid.to_vec();
        if grid.iter().any(|l| *l < 0.0 || !l.is_finite()) {
            return Err(Error::config("lambda grid values must be finite and nonnegative"));
        }
        grid.sort_by(f64::total_cmp);

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
        let outer = blocks((0..n).collect(), outer_folds, &mut rng);
        let mut inner = Vec::with_capacity(outer_folds);
        for (o, val) in outer.iter().enumerate() {
            let in_val = |i: &usize| val.contains(i);
            let train_idx: Vec<usize> = (0..n).filter(|i| !in_val(i)).collect();
            if train_idx.len() < inner_folds {
                return Err(Error::config(format!(
                    "outer fold {o} leaves {} training rows for {inner_folds} inner folds",
                    train_idx.len()
                )));
            }
            let mut inner_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1, o as u64]));
            inner.push(blocks(train_idx, inner_folds, &mut inner_rng));
        }
        Ok(Self {
            outer,
            inner,
            lambda_grid: grid,
            seed,
        })
    }

    pub fn outer_folds(&self) -> usize {
        self.outer.len()
    }

    pub fn inner_folds(&self) -> usize {
        self.inner.first().map(|v| v.len()).unwrap_or(0)
    }

    fn n(&self) -> usize {
        self.outer.iter().map(|f| f.len()).sum()
    }

    fn outer_train(&self, o: usize) -> Vec<usize> {
        let val = &self.outer[o];
        (0..self.n()).filter(|i| !val.contains(i)).collect()
    }
}

/// Everything about the harness except the splits: network shape, optimizer
/// settings, metric scale, and the master seed for job-level RNG streams.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarnessSettings {
    pub epochs_per_stage: usize,
    pub batch_size: usize,
    pub clip_threshold: f64,
    pub adam: AdamConfig,
    pub hidden: Vec<usize>,
    pub variance_bias_init: f64,
    pub variance_floor: f64,
    pub scale: MetricScale,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for HarnessSettings {
    fn default() -> Self {
        Self {
            epochs_per_stage: 1000,
            batch_size: 32,
            clip_threshold: 5.0,
            adam: AdamConfig::default(),
            hidden: vec![40, 20],
            variance_bias_init: 1.0,
            variance_floor: 1e-6,
            scale: MetricScale::Original,
            confidence: 0.90,
            seed: 0,
        }
    }
}

/// One outer fold of one arm: the selected constants and the validation
/// metrics of the final model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub lambda_mean: f64,
    pub lambda_var: f64,
    /// `None` when the final training diverged.
    pub metrics: Option<Metrics>,
    /// Inner candidate trainings that diverged (each scored -inf in selection).
    pub inner_divergences: usize,
    pub final_diverged: bool,
}

/// All folds of one (strategy, regularization mode) arm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmResult {
    pub strategy: Strategy,
    pub mode: RegMode,
    /// Number of inner-search candidates per fold (grid size, or its square).
    pub candidates_explored: usize,
    pub folds: Vec<FoldOutcome>,
    /// Mean and standard error over completed folds; `None` with fewer than
    /// two of them.
    pub aggregate: Option<MetricsAggregate>,
}

/// Equal-vs-separate paired test for one strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub strategy: Strategy,
    pub loglik: PairedTestResult,
    pub rmse: PairedTestResult,
}

/// The complete result of a nested cross-validation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub dataset_label: String,
    pub arms: Vec<ArmResult>,
    /// Paired equal-vs-separate tests, one per strategy that ran in both
    /// modes.
    pub comparisons: Vec<ComparisonResult>,
    pub plan: CvPlan,
}

/// One row of the selected-constants report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectedLambdaRow {
    pub strategy: Strategy,
    pub mode: RegMode,
    pub fold: usize,
    pub lambda_mean: f64,
    pub lambda_var: f64,
}

fn candidates(mode: RegMode, grid: &[f64]) -> Vec<(f64, f64)> {
    match mode {
        RegMode::Equal => grid.iter().map(|&l| (l, l)).collect(),
        RegMode::Separate => grid
            .iter()
            .flat_map(|&lm| grid.iter().map(move |&lv| (lm, lv)))
            .collect(),
    }
}

struct TrainedEval {
    loglik: f64,
    metrics: Option<Metrics>,
    diverged: bool,
}

/// Trains on `train_idx` (standardizing inside the split) and evaluates on
/// `val_idx`. Divergence is reported, not propagated.
#[allow(clippy::too_many_arguments)]
fn run_job(
    data: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    strategy: Strategy,
    mode: RegMode,
    lambda: (f64, f64),
    settings: &HarnessSettings,
    job_seed: u64,
) -> Result<TrainedEval> {
    let train_split = data.subset(train_idx);
    let stats = standardize_fit(&train_split)?;
    let standardized = stats.apply(&train_split)?;
    let net = MveNetwork::init(
        data.p(),
        &settings.hidden,
        derive_seed(job_seed, &[0]),
        settings.variance_bias_init,
        settings.variance_floor,
    )?;
    let cfg = TrainConfig {
        strategy,
        reg_mode: mode,
        lambda_mean: lambda.0,
        lambda_var: lambda.1,
        epochs_per_stage: settings.epochs_per_stage,
        batch_size: settings.batch_size,
        clip_threshold: settings.clip_threshold,
        seed: derive_seed(job_seed, &[1]),
        adam: settings.adam,
    };
    match train(net, &standardized, &cfg) {
        Ok((trained, _)) => {
            let val_split = data.subset(val_idx);
            let metrics = metrics_on_scale(&trained, &stats, &val_split, settings.scale)?;
            Ok(TrainedEval {
                loglik: metrics.loglik,
                metrics: Some(metrics),
                diverged: false,
            })
        }
        Err(Error::Divergence { .. }) => Ok(TrainedEval {
            loglik: f64::NEG_INFINITY,
            metrics: None,
            diverged: true,
        }),
        Err(e) => Err(e),
    }
}

/// Runs the full nested cross-validation over every (strategy, mode) arm.
///
/// `data` must be in original units; every training job fits its own
/// standardization on its own training split. Inner folds select the
/// regularization constants by highest mean left-out loglikelihood (ties go
/// to the more regularized candidate: larger `(lambda_var, lambda_mean)`),
/// then a final model per outer fold is trained with the winners and scored
/// on the held-out fold.
pub fn nested_cv(
    data: &Dataset,
    strategies: &[Strategy],
    modes: &[RegMode],
    plan: &CvPlan,
    settings: &HarnessSettings,
) -> Result<RunSummary> {
    if strategies.is_empty() || modes.is_empty() {
        return Err(Error::config("need at least one strategy and one mode"));
    }
    if plan.n() != data.n() {
        return Err(Error::config(format!(
            "plan covers {} rows, dataset has {}",
            plan.n(),
            data.n()
        )));
    }
    let arms: Vec<(Strategy, RegMode)> = strategies
        .iter()
        .flat_map(|&s| modes.iter().map(move |&m| (s, m)))
        .collect();

    // Flatten every inner-search training into one parallel job list.
    struct InnerJob {
        arm: usize,
        outer: usize,
        cand: usize,
        inner: usize,
    }
    let mut jobs = Vec::new();
    let arm_candidates: Vec<Vec<(f64, f64)>> = arms
        .iter()
        .map(|&(_, mode)| candidates(mode, &plan.lambda_grid))
        .collect();
    for (a, _) in arms.iter().enumerate() {
        for o in 0..plan.outer_folds() {
            for c in 0..arm_candidates[a].len() {
                for g in 0..plan.inner[o].len() {
                    jobs.push(InnerJob {
                        arm: a,
                        outer: o,
                        cand: c,
                        inner: g,
                    });
                }
            }
        }
    }

    let inner_topology: Vec<Vec<Vec<usize>>> = (0..plan.outer_folds())
        .map(|o| {
            (0..plan.inner[o].len())
                .map(|g| {
                    // Inner-training indices: outer train minus the inner fold.
                    let val = &plan.inner[o][g];
                    plan.outer_train(o)
                        .into_iter()
                        .filter(|i| !val.contains(i))
                        .collect()
                })
                .collect()
        })
        .collect();

    let inner_results: Vec<(f64, bool)> = jobs
        .par_iter()
        .map(|job| {
            let (strategy, mode) = arms[job.arm];
            let lambda = arm_candidates[job.arm][job.cand];
            let seed = derive_seed(
                settings.seed,
                &[
                    10,
                    job.arm as u64,
                    job.outer as u64,
                    job.cand as u64,
                    job.inner as u64,
                ],
            );
            let eval = run_job(
                data,
                &inner_topology[job.outer][job.inner],
                &plan.inner[job.outer][job.inner],
                strategy,
                mode,
                lambda,
                settings,
                seed,
            )?;
            Ok((eval.loglik, eval.diverged))
        })
        .collect::<Result<Vec<_>>>()?;

    // Gather per (arm, outer, candidate) mean logliks.
    let mut sums = vec![vec![Vec::new(); plan.outer_folds()]; arms.len()];
    for a in 0..arms.len() {
        for o in 0..plan.outer_folds() {
            sums[a][o] = vec![(0.0_f64, 0usize, 0usize); arm_candidates[a].len()];
        }
    }
    for (job, &(loglik, diverged)) in jobs.iter().zip(&inner_results) {
        let entry = &mut sums[job.arm][job.outer][job.cand];
        entry.0 += loglik;
        entry.1 += 1;
        entry.2 += usize::from(diverged);
    }

    // Select winners and train the final models, again in parallel.
    struct FinalJob {
        arm: usize,
        outer: usize,
        lambda: (f64, f64),
        inner_divergences: usize,
    }
    let mut finals = Vec::new();
    for a in 0..arms.len() {
        for o in 0..plan.outer_folds() {
            let cands = &arm_candidates[a];
            let mut best: Option<(f64, (f64, f64))> = None;
            let mut divergences = 0;
            for (c, &lambda) in cands.iter().enumerate() {
                let (sum, count, div) = sums[a][o][c];
                divergences += div;
                let mean = if count > 0 { sum / count as f64 } else { f64::NEG_INFINITY };
                let better = match best {
                    None => true,
                    Some((best_mean, best_lambda)) => {
                        match mean.total_cmp(&best_mean) {
                            std::cmp::Ordering::Greater => true,
                            std::cmp::Ordering::Less => false,
                            std::cmp::Ordering::Equal => {
                                // More regularization wins ties.
                                (lambda.1, lambda.0) > (best_lambda.1, best_lambda.0)
                            }
                        }
                    }
                };
                if better {
                    best = Some((mean, lambda));
                }
            }
            let (_, lambda) = best.expect("candidate grid is nonempty");
            finals.push(FinalJob {
                arm: a,
                outer: o,
                lambda,
                inner_divergences: divergences,
            });
        }
    }

    let final_evals: Vec<TrainedEval> = finals
        .par_iter()
        .map(|job| {
            let (strategy, mode) = arms[job.arm];
            let seed = derive_seed(settings.seed, &[20, job.arm as u64, job.outer as u64]);
            run_job(
                data,
                &plan.outer_train(job.outer),
                &plan.outer[job.outer],
                strategy,
                mode,
                job.lambda,
                settings,
                seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut arm_results: Vec<ArmResult> = arms
        .iter()
        .enumerate()
        .map(|(a, &(strategy, mode))| ArmResult {
            strategy,
            mode,
            candidates_explored: arm_candidates[a].len(),
            folds: Vec::new(),
            aggregate: None,
        })
        .collect();
    for (job, eval) in finals.iter().zip(&final_evals) {
        arm_results[job.arm].folds.push(FoldOutcome {
            fold: job.outer,
            lambda_mean: job.lambda.0,
            lambda_var: job.lambda.1,
            metrics: eval.metrics,
            inner_divergences: job.inner_divergences,
            final_diverged: eval.diverged,
        });
    }
    for arm in &mut arm_results {
        arm.folds.sort_by_key(|f| f.fold);
        let complete: Vec<Metrics> = arm.folds.iter().filter_map(|f| f.metrics).collect();
        if complete.len() >= 2 {
            arm.aggregate = Some(aggregate_folds(&complete)?);
        }
    }

    // Paired equal-vs-separate tests per strategy, over folds completed by
    // both arms.
    let mut comparisons = Vec::new();
    for &strategy in strategies {
        let equal = arm_results
            .iter()
            .find(|r| r.strategy == strategy && r.mode == RegMode::Equal);
        let separate = arm_results
            .iter()
            .find(|r| r.strategy == strategy && r.mode == RegMode::Separate);
        if let (Some(eq), Some(sep)) = (equal, separate) {
            let mut loglik_eq = Vec::new();
            let mut loglik_sep = Vec::new();
            let mut rmse_eq = Vec::new();
            let mut rmse_sep = Vec::new();
            for (fe, fs) in eq.folds.iter().zip(&sep.folds) {
                if let (Some(me), Some(ms)) = (fe.metrics, fs.metrics) {
                    loglik_eq.push(me.loglik);
                    loglik_sep.push(ms.loglik);
                    rmse_eq.push(me.rmse);
                    rmse_sep.push(ms.rmse);
                }
            }
            if loglik_eq.len() >= 2 {
                comparisons.push(ComparisonResult {
                    strategy,
                    loglik: paired_t_test(&loglik_eq, &loglik_sep, settings.confidence)?,
                    rmse: paired_t_test(&rmse_eq, &rmse_sep, settings.confidence)?,
                });
            }
        }
    }

    Ok(RunSummary {
        dataset_label: data.label.clone(),
        arms: arm_results,
        comparisons,
        plan: plan.clone(),
    })
}

/// Flattens the chosen constants of every arm and fold into report rows.
pub fn selected_lambda_report(summary: &RunSummary) -> Vec<SelectedLambdaRow> {
    let mut rows = Vec::new();
    for arm in &summary.arms {
        for fold in &arm.folds {
            rows.push(SelectedLambdaRow {
                strategy: arm.strategy,
                mode: arm.mode,
                fold: fold.fold,
                lambda_mean: fold.lambda_mean,
                lambda_var: fold.lambda_var,
            });
        }
    }
    rows
}
