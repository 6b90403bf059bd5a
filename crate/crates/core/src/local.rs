//! Dissent on a single instance.
//!
//! Two procedures produce a model whose prediction on one test instance
//! contradicts the reference:
//!
//! * [`shrink_and_flip`] trains a fresh linear SVM on a small stratified
//!   subsample of the training split plus the target carrying the flipped
//!   label. The smaller the subsample, the more the injected point weighs.
//! * [`retrain_on_instance`] takes a trained network and runs plain gradient
//!   steps on the single-example cross entropy toward the flipped label until
//!   its prediction changes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::explain::{explain_instance, ExplainerConfig, Explanation};
use crate::metrics::{bernoulli_mean_std, mean_std, topk_agreement, AgreementScores, MeanStd};
use crate::models::linear::fit_pegasos;
use crate::models::{bce_logit, train_mlp, Classifier, MlpModel, Model, Objective, TrainConfig};
use crate::scalar::Scalar;

/// Default step size of [`retrain_on_instance`].
pub const DEFAULT_RETRAIN_STEP: f64 = 0.01;
/// Default iteration cap of [`retrain_on_instance`].
pub const DEFAULT_RETRAIN_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalMethod {
    ShrinkSvm,
    RetrainMlp,
}

impl LocalMethod {
    pub fn name(self) -> &'static str {
        match self {
            LocalMethod::ShrinkSvm => "shrink_svm",
            LocalMethod::RetrainMlp => "retrain_mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalDissentResult<T> {
    pub target_id: String,
    pub method: LocalMethod,
    /// The dissenter predicts `1 - f(x)` on the target.
    pub success: bool,
    /// Subset size `m` for shrinkage, gradient steps taken for retraining.
    pub iterations_or_subset_size: usize,
    pub reference_label: u8,
    pub dissenter: Model<T>,
    /// Accuracy on the test split without the target.
    pub dissenter_test_accuracy: f64,
    /// Same measure for the model the dissenter replaces: the reference for
    /// shrinkage, the starting network for retraining.
    pub baseline_test_accuracy: f64,
    pub agreement: AgreementScores<f64>,
}

impl<T> LocalDissentResult<T> {
    pub fn topk_agreement_with_reference(&self) -> f64 {
        self.agreement.topk
    }
}

fn check_target<T: Scalar>(ds: &Dataset<T>, target: usize) -> Result<()> {
    if target >= ds.len() {
        return Err(Error::UnknownExample(format!("position {target}")));
    }
    if ds.splits()[target] != Some(Split::Test) {
        return Err(Error::InvalidConfig(format!("target {} is not in the test split", ds.ids()[target])));
    }
    Ok(())
}

/// Test split without `target`.
fn held_out<T: Scalar>(ds: &Dataset<T>, target: usize) -> Dataset<T> {
    let idx: Vec<usize> = ds.indices_of(Split::Test).into_iter().filter(|&i| i != target).collect();
    ds.subset(&idx)
}

fn accuracy_or_nan<T: Scalar>(model: &dyn Classifier<T>, ds: &Dataset<T>) -> Result<f64> {
    if ds.is_empty() {
        return Ok(f64::NAN);
    }
    model.accuracy(ds)
}

fn explainer_for(cfg: &ExplainerConfig, target: usize) -> ExplainerConfig {
    ExplainerConfig { seed: cfg.seed ^ target as u64, ..cfg.clone() }
}

/// Stratified sample of `n` indices out of `pool`: each class gets its
/// proportional share, remainders going to the larger fractional parts.
fn stratified_sample<T: Scalar>(ds: &Dataset<T>, pool: &[usize], n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > pool.len() {
        return Err(Error::SubsetTooLarge { requested: n, available: pool.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for &i in pool {
        by_class[ds.labels()[i] as usize].push(i);
    }
    let exact = [0, 1].map(|c| n as f64 * by_class[c].len() as f64 / pool.len() as f64);
    let mut take = exact.map(|e| e.floor() as usize);
    if take[0] + take[1] < n {
        let c = if exact[1] - exact[1].floor() > exact[0] - exact[0].floor() { 1 } else { 0 };
        let c = if take[c] < by_class[c].len() { c } else { 1 - c };
        take[c] += 1;
    }
    let mut out = Vec::with_capacity(n);
    for c in 0..2 {
        by_class[c].shuffle(&mut rng);
        out.extend_from_slice(&by_class[c][..take[c]]);
    }
    out.sort_unstable();
    Ok(out)
}

/// Trains a linear SVM on `m - 1` stratified training examples plus the
/// target relabelled to `1 - f(x)`. `cfg` is the linear trainer's config
/// and its seed drives both the subsample and training.
pub fn shrink_and_flip<T: Scalar>(
    ds: &Dataset<T>,
    reference: &dyn Classifier<T>,
    target: usize,
    m: usize,
    cfg: &TrainConfig,
    explainer: &ExplainerConfig,
) -> Result<LocalDissentResult<T>> {
    check_target(ds, target)?;
    let x = ds.row(target);
    let exp_f = explain_instance(reference, x, &ds.ids()[target], &explainer_for(explainer, target))?;
    shrink_with(ds, reference, target, m, cfg, explainer, &exp_f)
}

fn shrink_with<T: Scalar>(
    ds: &Dataset<T>,
    reference: &dyn Classifier<T>,
    target: usize,
    m: usize,
    cfg: &TrainConfig,
    explainer: &ExplainerConfig,
    exp_f: &Explanation<T>,
) -> Result<LocalDissentResult<T>> {
    if m == 0 {
        return Err(Error::InvalidConfig("subset size must be at least 1".into()));
    }
    let x = ds.row(target);
    let f_label = reference.predict(x)?.label;
    let flipped = 1 - f_label;

    let pool = ds.indices_of(Split::Train);
    let mut idx = stratified_sample(ds, &pool, m - 1, cfg.seed)?;
    idx.push(target);
    let last = idx.len() - 1;
    let train = ds.subset(&idx).with_label(last, flipped)?;
    let g = fit_pegasos(&train, cfg, None)?;

    let exp_g = explain_instance(&g, x, &ds.ids()[target], &explainer_for(explainer, target))?;
    let eval = held_out(ds, target);
    Ok(LocalDissentResult {
        target_id: ds.ids()[target].clone(),
        method: LocalMethod::ShrinkSvm,
        success: g.predict(x)?.label == flipped,
        iterations_or_subset_size: m,
        reference_label: f_label,
        dissenter_test_accuracy: accuracy_or_nan(&g, &eval)?,
        baseline_test_accuracy: accuracy_or_nan(reference, &eval)?,
        agreement: topk_agreement(exp_f, &exp_g)?,
        dissenter: Model::Linear(g),
    })
}

/// Cross entropy toward a fixed label regardless of the stored one.
struct Toward(u8);

impl<T: Scalar> Objective<T> for Toward {
    fn logit_loss(&self, _example: usize, _label: u8, logit: T) -> (T, T) {
        bce_logit(self.0, logit)
    }
}

/// Clones `g0` and takes up to `max_iter` gradient steps of size
/// `step_size` on the target's cross entropy toward `1 - f(x)`, stopping as
/// soon as the network's label flips. No momentum is used.
pub fn retrain_on_instance<T: Scalar>(
    ds: &Dataset<T>,
    g0: &MlpModel<T>,
    reference: &dyn Classifier<T>,
    target: usize,
    step_size: f64,
    max_iter: usize,
    explainer: &ExplainerConfig,
) -> Result<LocalDissentResult<T>> {
    check_target(ds, target)?;
    let x = ds.row(target);
    let exp_f = explain_instance(reference, x, &ds.ids()[target], &explainer_for(explainer, target))?;
    retrain_with(ds, g0, reference, target, step_size, max_iter, explainer, &exp_f)
}

#[allow(clippy::too_many_arguments)]
fn retrain_with<T: Scalar>(
    ds: &Dataset<T>,
    g0: &MlpModel<T>,
    reference: &dyn Classifier<T>,
    target: usize,
    step_size: f64,
    max_iter: usize,
    explainer: &ExplainerConfig,
    exp_f: &Explanation<T>,
) -> Result<LocalDissentResult<T>> {
    if step_size.is_nan() || step_size <= 0.0 {
        return Err(Error::InvalidConfig("step size must be positive".into()));
    }
    let x = ds.row(target);
    let f_label = reference.predict(x)?.label;
    let flipped = 1 - f_label;
    let objective = Toward(flipped);
    let lr = T::of(step_size);

    let mut g = g0.clone();
    let mut steps = 0;
    while g.predict(x)?.label != flipped && steps < max_iter {
        let (_, grad) = g.loss_and_grad(ds, &[target], &objective);
        for (p, d) in g.params_mut().iter_mut().zip(grad) {
            *p = *p - lr * d;
        }
        if g.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch: steps });
        }
        steps += 1;
    }
    if steps > 0 {
        let fp = format!("{};retrain={};steps={}", g0.train_fingerprint(), ds.ids()[target], steps);
        g.set_train_fingerprint(fp);
    }

    let exp_g = explain_instance(&g, x, &ds.ids()[target], &explainer_for(explainer, target))?;
    let eval = held_out(ds, target);
    Ok(LocalDissentResult {
        target_id: ds.ids()[target].clone(),
        method: LocalMethod::RetrainMlp,
        success: g.predict(x)?.label == flipped,
        iterations_or_subset_size: steps,
        reference_label: f_label,
        dissenter_test_accuracy: accuracy_or_nan(&g, &eval)?,
        baseline_test_accuracy: accuracy_or_nan(g0, &eval)?,
        agreement: topk_agreement(exp_f, &exp_g)?,
        dissenter: Model::Mlp(g),
    })
}

/// Grid and replication settings of [`local_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSweepConfig {
    pub method: LocalMethod,
    /// Subset sizes `m` for shrinkage; step sizes for retraining.
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Linear config for shrinkage; network config of the starting model for
    /// retraining. Its seed is replaced by each sweep seed.
    pub train: TrainConfig,
    /// Iteration cap for retraining.
    pub max_iter: usize,
    pub explainer: ExplainerConfig,
}

/// One (target, grid value, seed) run, without the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRecord {
    pub target_id: String,
    pub grid_value: f64,
    pub seed: u64,
    pub success: bool,
    pub iterations_or_subset_size: usize,
    pub topk: f64,
    pub accuracy: f64,
    pub baseline_accuracy: f64,
}

impl LocalRecord {
    fn from_result<T>(r: &LocalDissentResult<T>, grid_value: f64, seed: u64) -> Self {
        Self {
            target_id: r.target_id.clone(),
            grid_value,
            seed,
            success: r.success,
            iterations_or_subset_size: r.iterations_or_subset_size,
            topk: r.agreement.topk,
            accuracy: r.dissenter_test_accuracy,
            baseline_accuracy: r.baseline_test_accuracy,
        }
    }
}

/// Aggregate over every target and seed of one grid value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSweepRow {
    pub grid_value: f64,
    pub n: usize,
    pub success: MeanStd,
    pub topk: MeanStd,
    pub accuracy: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSweep {
    pub method: LocalMethod,
    /// Sorted by grid value.
    pub rows: Vec<LocalSweepRow>,
    /// Ordered by (grid value, seed, target).
    pub records: Vec<LocalRecord>,
}

/// Runs the method over every grid value, seed and target.
pub fn local_sweep<T: Scalar>(
    ds: &Dataset<T>,
    reference: &dyn Classifier<T>,
    targets: &[usize],
    cfg: &LocalSweepConfig,
) -> Result<LocalSweep> {
    if targets.is_empty() || cfg.grid.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidConfig("local sweep needs targets, grid values and seeds".into()));
    }
    if cfg.grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("grid values must be finite".into()));
    }
    let mut grid = cfg.grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut ref_exps = Vec::with_capacity(targets.len());
    for &t in targets {
        check_target(ds, t)?;
        ref_exps.push(explain_instance(reference, ds.row(t), &ds.ids()[t], &explainer_for(&cfg.explainer, t))?);
    }

    // Starting networks depend only on the seed.
    let g0s = match cfg.method {
        LocalMethod::RetrainMlp => {
            let train = ds.part(Split::Train);
            cfg.seeds
                .iter()
                .map(|&s| train_mlp(&train, &cfg.train.clone().with_seed(s), None))
                .collect::<Result<Vec<_>>>()?
        }
        LocalMethod::ShrinkSvm => Vec::new(),
    };

    let mut records = Vec::new();
    for &value in &grid {
        for (si, &seed) in cfg.seeds.iter().enumerate() {
            for (&t, exp_f) in targets.iter().zip(&ref_exps) {
                let r = match cfg.method {
                    LocalMethod::ShrinkSvm => {
                        if value < 1.0 || value.fract() != 0.0 {
                            return Err(Error::InvalidConfig(format!("subset size {value} is not a positive integer")));
                        }
                        let train = cfg.train.clone().with_seed(seed);
                        shrink_with(ds, reference, t, value as usize, &train, &cfg.explainer, exp_f)?
                    }
                    LocalMethod::RetrainMlp => {
                        retrain_with(ds, &g0s[si], reference, t, value, cfg.max_iter, &cfg.explainer, exp_f)?
                    }
                };
                records.push(LocalRecord::from_result(&r, value, seed));
            }
        }
    }

    let rows = summarize_records(&records)?;
    Ok(LocalSweep { method: cfg.method, rows, records })
}

/// One row per distinct grid value, in ascending order.
pub fn summarize_records(records: &[LocalRecord]) -> Result<Vec<LocalSweepRow>> {
    if records.is_empty() {
        return Err(Error::Undefined("summary of no runs"));
    }
    let mut grid: Vec<f64> = records.iter().map(|r| r.grid_value).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.iter()
        .map(|&value| {
            let cell: Vec<&LocalRecord> = records.iter().filter(|r| r.grid_value == value).collect();
            aggregate(value, &cell)
        })
        .collect()
}

fn aggregate(grid_value: f64, cell: &[&LocalRecord]) -> Result<LocalSweepRow> {
    let success: Vec<bool> = cell.iter().map(|r| r.success).collect();
    let topk: Vec<f64> = cell.iter().map(|r| r.topk).collect();
    let acc: Vec<f64> = cell.iter().map(|r| r.accuracy).collect();
    Ok(LocalSweepRow {
        grid_value,
        n: cell.len(),
        success: bernoulli_mean_std(&success)?,
        topk: mean_std(&topk)?,
        accuracy: mean_std(&acc)?,
    })
}

/// Iteration bucket of a successful retraining.
pub fn iteration_bucket(steps: usize) -> &'static str {
    match steps {
        0..5 => "<5",
        5..10 => "5-10",
        10..15 => "10-15",
        15..=20 => "15-20",
        _ => ">20",
    }
}

/// Bucket labels in display order.
pub const ITERATION_BUCKETS: [&str; 5] = ["<5", "5-10", "10-15", "15-20", ">20"];

/// Retraining outcomes grouped by the steps needed to flip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: String,
    pub n: usize,
    /// Share of all runs that flipped within this bucket.
    pub share: MeanStd,
    pub topk: Option<MeanStd>,
    pub accuracy: Option<MeanStd>,
}

/// Groups successful runs by [`iteration_bucket`]; `share` is relative to
/// every run, including failures.
pub fn bucket_by_iterations(records: &[LocalRecord]) -> Result<Vec<BucketRow>> {
    if records.is_empty() {
        return Err(Error::Undefined("buckets of no runs"));
    }
    ITERATION_BUCKETS
        .iter()
        .map(|&b| {
            let inside: Vec<bool> =
                records.iter().map(|r| r.success && iteration_bucket(r.iterations_or_subset_size) == b).collect();
            let cell: Vec<&LocalRecord> = records.iter().zip(&inside).filter(|(_, &i)| i).map(|(r, _)| r).collect();
            let stat = |f: fn(&LocalRecord) -> f64| {
                let xs: Vec<f64> = cell.iter().map(|r| f(r)).collect();
                mean_std(&xs).ok()
            };
            Ok(BucketRow {
                bucket: b.to_string(),
                n: cell.len(),
                share: bernoulli_mean_std(&inside)?,
                topk: stat(|r| r.topk),
                accuracy: stat(|r| r.accuracy),
            })
        })
        .collect()
}
