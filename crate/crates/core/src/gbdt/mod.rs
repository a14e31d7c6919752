//! Multiclass gradient-boosted decision trees with a softmax objective.

pub mod binning;
pub mod objective;
pub mod tree;

use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use binning::BinnedMatrix;
pub use objective::{log_loss, softmax, softmax_grad_hess};
pub use tree::TreeNode;
use tree::{grow, TreeParams};

pub const N_CLASSES: usize = 4;
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub l2_reg: f64,
    pub histogram_bins: usize,
    pub subsample: f64,
    pub colsample: f64,
    /// Per-class sample weights; inverse class frequency when absent.
    pub class_weights: Option<[f64; N_CLASSES]>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_rounds: 400,
            learning_rate: 0.1,
            max_depth: 6,
            min_child_weight: 1.0,
            l2_reg: 1.0,
            histogram_bins: 64,
            subsample: 0.8,
            colsample: 0.8,
            class_weights: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("train config: {what}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if !(self.min_child_weight >= 0.0) || !(self.l2_reg >= 0.0) {
            return bad("min_child_weight and l2_reg must be non-negative");
        }
        if !(2..=256).contains(&self.histogram_bins) {
            return bad("histogram_bins must be in 2..=256");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) || !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return bad("subsample and colsample must be in (0, 1]");
        }
        if let Some(w) = self.class_weights {
            if w.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return bad("class weights must be positive");
            }
        }
        Ok(())
    }
}

/// Inverse class frequency, scaled so that weights sum to the row count.
pub fn inverse_frequency_weights(labels: &[usize]) -> [f64; N_CLASSES] {
    let mut counts = [0usize; N_CLASSES];
    for &y in labels {
        counts[y] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count() as f64;
    let n = labels.len() as f64;
    counts.map(|c| if c > 0 { n / (present * c as f64) } else { 1.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub version: u32,
    pub n_classes: usize,
    pub base_scores: Vec<f64>,
    pub feature_names: Vec<String>,
    pub config: TrainConfig,
    /// One entry per round, each holding one tree per class.
    pub rounds: Vec<Vec<TreeNode>>,
}

impl Ensemble {
    pub fn empty(feature_names: Vec<String>, config: TrainConfig) -> Self {
        Ensemble {
            version: MODEL_VERSION,
            n_classes: N_CLASSES,
            base_scores: vec![0.0; N_CLASSES],
            feature_names,
            config,
            rounds: Vec::new(),
        }
    }

    pub fn n_trees(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    pub fn raw_scores(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.feature_names.len() {
            return Err(Error::WidthMismatch {
                expected: self.feature_names.len(),
                found: row.len(),
            });
        }
        let mut z = self.base_scores.clone();
        for round in &self.rounds {
            for (k, t) in round.iter().enumerate() {
                z[k] += t.predict(row);
            }
        }
        Ok(z)
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.raw_scores(row)?))
    }

    pub fn predict_proba_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        use rayon::prelude::*;
        rows.par_iter().map(|r| self.predict_proba(r)).collect()
    }

    pub fn predict(&self, row: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(row)?))
    }

    /// Total split gain per used feature, descending; ties by feature index.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let mut gains = vec![0.0; self.feature_names.len()];
        let mut used = vec![false; self.feature_names.len()];
        for t in self.rounds.iter().flatten() {
            t.for_each_split(&mut |f, g| {
                gains[f] += g;
                used[f] = true;
            });
        }
        let mut out: Vec<(usize, f64)> = (0..gains.len()).filter(|&f| used[f]).map(|f| (f, gains[f])).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out.into_iter()
            .map(|(f, g)| (self.feature_names[f].clone(), g))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: Ensemble = serde_json::from_str(s)?;
        if e.version != MODEL_VERSION {
            return Err(Error::InvalidInput(format!("unsupported model version {}", e.version)));
        }
        if e.n_classes != N_CLASSES || e.base_scores.len() != N_CLASSES {
            return Err(Error::InvalidInput("model class count must be 4".into()));
        }
        for t in e.rounds.iter().flatten() {
            let mut bad = None;
            t.for_each_split(&mut |f, _| {
                if f >= e.feature_names.len() {
                    bad = Some(f);
                }
            });
            if let Some(f) = bad {
                return Err(Error::InvalidInput(format!(
                    "split on feature {f} outside the model width"
                )));
            }
        }
        Ok(e)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn train(rows: &[Vec<f64>], labels: &[usize], feature_names: Vec<String>, cfg: &TrainConfig) -> Result<Ensemble> {
    train_logged(rows, labels, feature_names, cfg).map(|(e, _)| e)
}

/// Trains and also returns the weighted mean training log-loss after each round.
pub fn train_logged(
    rows: &[Vec<f64>],
    labels: &[usize],
    feature_names: Vec<String>,
    cfg: &TrainConfig,
) -> Result<(Ensemble, Vec<f64>)> {
    cfg.validate()?;
    let n = rows.len();
    if n != labels.len() {
        return Err(Error::LengthMismatch(n, labels.len()));
    }
    let width = feature_names.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::WidthMismatch {
                expected: width,
                found: r.len(),
            });
        }
        if let Some(f) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::Training(format!(
                "row {i}: feature {} is not finite",
                feature_names[f]
            )));
        }
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= N_CLASSES) {
        return Err(Error::Training(format!("label {y} outside 0..{N_CLASSES}")));
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Training("training labels hold fewer than two classes".into()));
    }

    let class_w = cfg.class_weights.unwrap_or_else(|| inverse_frequency_weights(labels));
    let w: Vec<f64> = labels.iter().map(|&y| class_w[y]).collect();
    let w_sum: f64 = w.iter().sum();
    let data = BinnedMatrix::new(rows, cfg.histogram_bins);
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_child_weight: cfg.min_child_weight,
        lambda: cfg.l2_reg,
        learning_rate: cfg.learning_rate,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ens = Ensemble::empty(feature_names, cfg.clone());
    let mut logits: Vec<Vec<f64>> = vec![ens.base_scores.clone(); n];
    let n_sub = ((n as f64 * cfg.subsample).round() as usize).clamp(1, n);
    let n_col = ((width as f64 * cfg.colsample).round() as usize).clamp(1, width.max(1));
    let mut losses = Vec::with_capacity(cfg.n_rounds);

    let mut grad = vec![vec![0.0; n]; N_CLASSES];
    let mut hess = vec![vec![0.0; n]; N_CLASSES];
    for _ in 0..cfg.n_rounds {
        for i in 0..n {
            let (g, h) = softmax_grad_hess(&logits[i], labels[i], w[i]);
            for k in 0..N_CLASSES {
                grad[k][i] = g[k];
                hess[k][i] = h[k];
            }
        }
        let mut sub: Vec<usize> = if n_sub == n {
            (0..n).collect()
        } else {
            sample(&mut rng, n, n_sub).into_vec()
        };
        sub.sort_unstable();
        let mut trees = Vec::with_capacity(N_CLASSES);
        for k in 0..N_CLASSES {
            let mut cols: Vec<usize> = if n_col == width {
                (0..width).collect()
            } else {
                sample(&mut rng, width, n_col).into_vec()
            };
            cols.sort_unstable();
            trees.push(grow(&data, sub.clone(), &cols, &grad[k], &hess[k], &params, 0));
        }
        for (i, z) in logits.iter_mut().enumerate() {
            for (k, t) in trees.iter().enumerate() {
                z[k] += t.predict_binned(&data, i);
            }
        }
        ens.rounds.push(trees);
        let loss: f64 = (0..n).map(|i| log_loss(&logits[i], labels[i], w[i])).sum::<f64>() / w_sum;
        losses.push(loss);
    }
    Ok((ens, losses))
}
