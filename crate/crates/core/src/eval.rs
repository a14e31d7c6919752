//! Patient-wise stratified folds, classification metrics and cross-validation.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::case::{CaseKey, RanoLabel};
use crate::error::{Error, Result};
use crate::fusion::FeatureTable;
use crate::gbdt::{self, argmax, TrainConfig, N_CLASSES};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, patient: &str) -> Option<usize> {
        self.folds.get(patient).copied()
    }

    fn check(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Folds(format!("k = {} must be at least 2", self.k)));
        }
        let mut used = vec![false; self.k];
        for (p, &f) in &self.folds {
            if f >= self.k {
                return Err(Error::Folds(format!("patient {p} has fold {f} outside 0..{}", self.k)));
            }
            used[f] = true;
        }
        if let Some(f) = used.iter().position(|u| !u) {
            return Err(Error::Folds(format!("fold {f} is empty")));
        }
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(["patient_id", "fold"])?;
        for (p, f) in &self.folds {
            w.write_record([p.as_str(), &f.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a fold file; `k` is one past the largest fold index.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::Reader::from_reader(BufReader::new(file));
        if rdr.headers()?.iter().collect::<Vec<_>>() != ["patient_id", "fold"] {
            return Err(Error::Folds("header must be patient_id,fold".into()));
        }
        let mut folds = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let f: usize = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::Folds(format!("row {}: bad fold {:?}", i + 1, &rec[1])))?;
            if folds.insert(rec[0].to_string(), f).is_some() {
                return Err(Error::Folds(format!("patient {} listed twice", &rec[0])));
            }
        }
        let k = folds.values().max().map_or(0, |m| m + 1);
        let fa = FoldAssignment { k, folds };
        fa.check()?;
        Ok(fa)
    }
}

/// Class-count divergence from the per-fold target plus case-count imbalance,
/// both measured in cases.
fn fold_cost(counts: &[usize; N_CLASSES], target: &[f64; N_CLASSES], size_target: f64) -> f64 {
    let class: f64 = counts.iter().zip(target).map(|(&c, &t)| (c as f64 - t).abs()).sum();
    let size: usize = counts.iter().sum();
    class + (size as f64 - size_target).abs()
}

/// Greedy patient-wise stratified assignment. Patients are shuffled with
/// `seed`, stably sorted by case count (largest first) and each is placed in
/// the fold whose cost grows least; ties go to the smaller fold, then the
/// lower index.
pub fn stratified_patient_folds(cases: &[(String, RanoLabel)], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Folds(format!("k = {k} must be at least 2")));
    }
    let mut per_patient: BTreeMap<&str, [usize; N_CLASSES]> = BTreeMap::new();
    let mut global = [0usize; N_CLASSES];
    for (p, l) in cases {
        per_patient.entry(p.as_str()).or_default()[l.index()] += 1;
        global[l.index()] += 1;
    }
    if per_patient.len() < k {
        return Err(Error::Folds(format!(
            "{} patients cannot fill {k} folds",
            per_patient.len()
        )));
    }
    let mut order: Vec<(&str, [usize; N_CLASSES])> = per_patient.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by_key(|(_, c)| std::cmp::Reverse(c.iter().sum::<usize>()));

    let target = global.map(|g| g as f64 / k as f64);
    let size_target = cases.len() as f64 / k as f64;
    let mut counts = vec![[0usize; N_CLASSES]; k];
    let mut members = vec![0usize; k];
    let mut folds = BTreeMap::new();
    for (i, (p, c)) in order.iter().enumerate() {
        let remaining = order.len() - i;
        let empty = members.iter().filter(|&&m| m == 0).count();
        let mut best: Option<(f64, usize, usize)> = None;
        for f in 0..k {
            if remaining == empty && members[f] > 0 {
                continue;
            }
            let mut after = counts[f];
            for (a, x) in after.iter_mut().zip(c) {
                *a += x;
            }
            let delta = fold_cost(&after, &target, size_target) - fold_cost(&counts[f], &target, size_target);
            let size: usize = counts[f].iter().sum();
            let better = match best {
                None => true,
                Some((d, s, _)) => delta < d || (delta == d && size < s),
            };
            if better {
                best = Some((delta, size, f));
            }
        }
        let f = best.expect("at least one admissible fold").2;
        for (a, x) in counts[f].iter_mut().zip(c) {
            *a += x;
        }
        members[f] += 1;
        folds.insert(p.to_string(), f);
    }
    let fa = FoldAssignment { k, folds };
    fa.check()?;
    Ok(fa)
}

/// Per-class F1 averaged with equal weight over `n_classes`. A class absent
/// from both truth and predictions scores 0.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if n_classes == 0 || y_true.iter().chain(y_pred).any(|&y| y >= n_classes) {
        return Err(Error::InvalidInput(format!("labels must lie in 0..{n_classes}")));
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let mut sum = 0.0;
    for c in 0..n_classes {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        if denom == 0 {
            warn!("class {c} absent from truth and predictions; its F1 counts as 0");
        } else {
            sum += 2.0 * tp[c] as f64 / denom as f64;
        }
    }
    Ok(sum / n_classes as f64)
}

pub fn accuracy(y_true: &[usize], y_pred: &[usize]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty set".into()));
    }
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// Midranks (1-based) of `scores`; tied values share their mean rank.
fn midranks(scores: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Mann-Whitney AUC of `scores` for `positive` against the rest; ties count
/// one half. `None` when either side is empty.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let ranks = midranks(scores);
    let r_pos: f64 = ranks.iter().zip(positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let u = r_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    /// Mean over scorable classes; `None` when no class could be scored.
    pub value: Option<f64>,
    pub skipped: Vec<usize>,
}

/// One-vs-rest macro AUC. Classes without positives or without negatives
/// are skipped with a warning.
pub fn roc_auc_ovr_macro(y_true: &[usize], probas: &[Vec<f64>]) -> Result<AucResult> {
    if y_true.len() != probas.len() {
        return Err(Error::LengthMismatch(y_true.len(), probas.len()));
    }
    let n_classes = probas.first().map_or(N_CLASSES, Vec::len);
    for (i, p) in probas.iter().enumerate() {
        if p.len() != n_classes {
            return Err(Error::WidthMismatch {
                expected: n_classes,
                found: p.len(),
            });
        }
        let s: f64 = p.iter().sum();
        if !((s - 1.0).abs() <= 1e-6) {
            return Err(Error::InvalidInput(format!("probability row {i} sums to {s}")));
        }
    }
    if let Some(&y) = y_true.iter().find(|&&y| y >= n_classes) {
        return Err(Error::InvalidInput(format!("label {y} outside 0..{n_classes}")));
    }
    let mut aucs = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..n_classes {
        let scores: Vec<f64> = probas.iter().map(|p| p[c]).collect();
        let positive: Vec<bool> = y_true.iter().map(|&y| y == c).collect();
        match binary_auc(&scores, &positive) {
            Some(a) => aucs.push(a),
            None => {
                warn!("class {c} has no positives or no negatives; skipped in AUC");
                skipped.push(c);
            }
        }
    }
    let value = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
    Ok(AucResult { value, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation; the deviation of one value is 0.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(MeanStd { mean, std })
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub macro_f1: f64,
    pub roc_auc_macro: Option<f64>,
    pub accuracy: f64,
    pub auc_skipped_classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub macro_f1: MeanStd,
    pub roc_auc_macro: Option<MeanStd>,
    pub accuracy: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub name: String,
    pub folds: Vec<FoldMetrics>,
    pub aggregate: Aggregate,
}

impl MetricsReport {
    pub fn from_folds(name: impl Into<String>, folds: Vec<FoldMetrics>) -> Result<Self> {
        let pick = |f: fn(&FoldMetrics) -> f64| folds.iter().map(f).collect::<Vec<_>>();
        let none = || Error::InvalidInput("no folds to aggregate".into());
        let aucs: Vec<f64> = folds.iter().filter_map(|f| f.roc_auc_macro).collect();
        let aggregate = Aggregate {
            macro_f1: MeanStd::of(&pick(|f| f.macro_f1)).ok_or_else(none)?,
            roc_auc_macro: MeanStd::of(&aucs),
            accuracy: MeanStd::of(&pick(|f| f.accuracy)).ok_or_else(none)?,
        };
        Ok(MetricsReport {
            name: name.into(),
            folds,
            aggregate,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-fold rows followed by the aggregate row.
    pub fn to_text(&self) -> String {
        let na = "n/a".to_string();
        let mut rows: Vec<[String; 4]> = self
            .folds
            .iter()
            .map(|f| {
                [
                    format!("fold {}", f.fold),
                    format!("{:.2}", f.macro_f1),
                    f.roc_auc_macro.map_or(na.clone(), |a| format!("{a:.2}")),
                    format!("{:.2}", f.accuracy),
                ]
            })
            .collect();
        rows.push(summary_cells(&self.name, &self.aggregate));
        render(&rows)
    }
}

fn summary_cells(name: &str, a: &Aggregate) -> [String; 4] {
    [
        name.to_string(),
        a.macro_f1.to_string(),
        a.roc_auc_macro.map_or("n/a".to_string(), |m| m.to_string()),
        a.accuracy.to_string(),
    ]
}

fn render(rows: &[[String; 4]]) -> String {
    let header = ["Features", "Macro F1", "ROC AUC", "Accuracy"].map(String::from);
    let mut widths = header.clone().map(|h| h.chars().count());
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String; 4]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| {
                let pad = w - c.chars().count();
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect();
        parts.join(" | ")
    };
    let mut out = line(&header);
    out.push('\n');
    out.push_str(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-"));
    for r in rows {
        out.push('\n');
        out.push_str(&line(r));
    }
    out.push('\n');
    out
}

/// One aggregate row per report, in the order given.
pub fn summary_table(reports: &[MetricsReport]) -> String {
    let rows: Vec<[String; 4]> = reports.iter().map(|r| summary_cells(&r.name, &r.aggregate)).collect();
    render(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutOfFold {
    pub key: CaseKey,
    pub fold: usize,
    pub label: RanoLabel,
    pub probabilities: Vec<f64>,
    pub predicted: RanoLabel,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub report: MetricsReport,
    pub predictions: Vec<OutOfFold>,
}

/// Trains on all folds but one and scores the held-out fold, for every fold.
/// Folds run in parallel; results do not depend on scheduling.
pub fn cross_validate(name: &str, table: &FeatureTable, folds: &FoldAssignment, cfg: &TrainConfig) -> Result<CvResult> {
    folds.check()?;
    let labels: Vec<usize> = table.labels()?.iter().map(|l| l.index()).collect();
    let fold_of: Vec<usize> = table
        .rows
        .iter()
        .map(|r| {
            folds
                .fold_of(&r.key.patient_id)
                .ok_or_else(|| Error::Folds(format!("patient {} has no fold", r.key.patient_id)))
        })
        .collect::<Result<_>>()?;
    let per_fold: Vec<(FoldMetrics, Vec<OutOfFold>)> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..table.rows.len()).partition(|&i| fold_of[i] == f);
            if test.is_empty() {
                return Err(Error::Folds(format!("fold {f} has no test cases")));
            }
            let x: Vec<Vec<f64>> = train.iter().map(|&i| table.rows[i].values.clone()).collect();
            let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let model = gbdt::train(&x, &y, table.columns.clone(), cfg)?;
            let probas: Vec<Vec<f64>> = test
                .iter()
                .map(|&i| model.predict_proba(&table.rows[i].values))
                .collect::<Result<_>>()?;
            let y_true: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
            let y_pred: Vec<usize> = probas.iter().map(|p| argmax(p)).collect();
            let auc = roc_auc_ovr_macro(&y_true, &probas)?;
            let metrics = FoldMetrics {
                fold: f,
                n_train: train.len(),
                n_test: test.len(),
                macro_f1: macro_f1(&y_true, &y_pred, N_CLASSES)?,
                roc_auc_macro: auc.value,
                accuracy: accuracy(&y_true, &y_pred)?,
                auc_skipped_classes: auc.skipped,
            };
            let oof = test
                .iter()
                .zip(probas)
                .zip(&y_pred)
                .map(|((&i, p), &yp)| OutOfFold {
                    key: table.rows[i].key.clone(),
                    fold: f,
                    label: RanoLabel::from_index(labels[i]).expect("validated label"),
                    probabilities: p,
                    predicted: RanoLabel::from_index(yp).expect("argmax of four classes"),
                })
                .collect();
            Ok((metrics, oof))
        })
        .collect::<Result<_>>()?;
    let mut fold_metrics = Vec::with_capacity(per_fold.len());
    let mut predictions = Vec::new();
    for (m, p) in per_fold {
        fold_metrics.push(m);
        predictions.extend(p);
    }
    predictions.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(CvResult {
        report: MetricsReport::from_folds(name, fold_metrics)?,
        predictions,
    })
}
