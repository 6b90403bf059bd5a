//! Seed-replicated sweep orchestration.

use dissent_core::data::{Dataset, SparseVec, Split};
use dissent_core::explain::{explain_dataset, ExplainerConfig};
use dissent_core::metrics::{corrected_rate, global_disagreement, mean_agreement, Scope};
use dissent_core::models::{gradient_check, Bce, Classifier, GradCheckReport, MlpModel, TrainConfig};
use dissent_core::objectives::{train_dissenter, DissentKind, DissentLoss};
use dissent_core::MlpModel as Mlp64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::report::{DissentReport, GlobalRow};

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSweepConfig {
    pub kind: DissentKind,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Dissenter training; its seed is replaced by each sweep seed.
    pub train: TrainConfig,
    pub explainer: ExplainerConfig,
    /// Explained test examples per model; 0 skips explanations.
    pub n_explain: usize,
}

/// The first `n` test examples with at least one active feature.
pub fn explained_positions(ds: &Dataset<f64>, n: usize) -> Vec<usize> {
    ds.indices_of(Split::Test).into_iter().filter(|&i| !ds.row(i).is_empty()).take(n).collect()
}

/// Trains one dissenter per (λ, seed) and measures it on the test split.
/// `on_model` sees every trained dissenter, e.g. to save it.
pub fn global_sweep(
    ds: &Dataset<f64>,
    reference: &dyn Classifier<f64>,
    cfg: &GlobalSweepConfig,
    mut on_model: impl FnMut(f64, u64, &Mlp64) -> Result<()>,
) -> Result<DissentReport> {
    if cfg.lambdas.is_empty() || cfg.seeds.is_empty() {
        return Err(CliError::Config("a global sweep needs lambdas and seeds".into()));
    }
    let test = ds.part(Split::Test);
    let y = test.labels();
    let f = reference.predict_labels(&test)?;
    let positions = explained_positions(ds, cfg.n_explain);
    let exp_f = explain_dataset(reference, ds, &positions, &cfg.explainer)?;

    let mut rows = Vec::with_capacity(cfg.lambdas.len() * cfg.seeds.len());
    for &lambda in &cfg.lambdas {
        for &seed in &cfg.seeds {
            let g = train_dissenter(ds, reference, cfg.kind, lambda, &cfg.train.clone().with_seed(seed))?;
            on_model(lambda, seed, &g)?;
            let gy = g.predict_labels(&test)?;
            let hits = gy.iter().zip(y).filter(|(a, b)| a == b).count();
            let mut row = GlobalRow {
                method: cfg.kind,
                lambda,
                seed,
                accuracy: hits as f64 / y.len() as f64,
                disagreement: global_disagreement(&f, &gy)?,
                corrected_rate: corrected_rate(&f, &gy, y).ok(),
                topk: None,
                topk_pos: None,
                topk_neg: None,
                topk_dissent_only: None,
                n_explained: positions.len(),
                n_explained_dissent: 0,
            };
            if !positions.is_empty() {
                let exp_g = explain_dataset(&g, ds, &positions, &cfg.explainer)?;
                let all = mean_agreement(&exp_f, &exp_g, Scope::All)?;
                let dissent = mean_agreement(&exp_f, &exp_g, Scope::DissentOnly)?;
                let mean = all.mean.expect("explained set is non-empty");
                row.topk = Some(mean.topk);
                row.topk_pos = Some(mean.topk_pos);
                row.topk_neg = Some(mean.topk_neg);
                row.topk_dissent_only = dissent.mean.map(|m| m.topk);
                row.n_explained_dissent = dissent.n;
            }
            rows.push(row);
        }
    }
    DissentReport::global(cfg.kind, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckRow {
    pub objective: String,
    pub model: usize,
    pub dims: Vec<usize>,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

/// Central-difference checks of BCE, REG and WEIGHTS on `n_models` random
/// small networks and batches.
pub fn gradcheck_suite(n_models: usize, seed: u64, reg_lambda: f64, weights_lambda: f64) -> Result<Vec<GradCheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3 * n_models);
    for m in 0..n_models {
        let d = rng.random_range(2..=6);
        let mut dims = vec![d];
        for _ in 0..rng.random_range(1..=2) {
            dims.push(rng.random_range(2..=6));
        }
        dims.push(1);
        let n = rng.random_range(3..=8);
        let rows = (0..n)
            .map(|_| SparseVec::from_dense(&(0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>()))
            .collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let reference: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let batch = Dataset::unsplit((0..d).map(|i| format!("x{i}")).collect(), rows, labels.clone())?;
        let model: MlpModel<f64> = MlpModel::glorot(&dims, rng.random(), String::new());

        let reg = DissentLoss::new(DissentKind::Reg, reg_lambda, reference.clone(), &labels)?;
        let weights = DissentLoss::new(DissentKind::Weights, weights_lambda, reference, &labels)?;
        let checks: [(&str, GradCheckReport); 3] = [
            ("bce", gradient_check(&model, &batch, &Bce)),
            ("reg", gradient_check(&model, &batch, &reg)),
            ("weights", gradient_check(&model, &batch, &weights)),
        ];
        for (objective, r) in checks {
            out.push(GradCheckRow {
                objective: objective.into(),
                model: m,
                dims: dims.clone(),
                max_rel_error: r.max_rel_error,
                max_abs_error: r.max_abs_error,
            });
        }
    }
    Ok(out)
}
