//! Regression trees grown greedily on histogram bins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::BinnedMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        weight: f64,
    },
    Split {
        feature: usize,
        /// Rows with a bin below this index go left.
        bin: u16,
        /// Raw-value form of the same rule: `x < threshold` goes left.
        threshold: f64,
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if row[*feature] < *threshold { left } else { right },
            }
        }
    }

    /// Prediction from pre-binned training data.
    pub fn predict_binned(&self, data: &BinnedMatrix, r: usize) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    bin,
                    left,
                    right,
                    ..
                } => {
                    node = if u16::from(data.bins[*feature][r]) < *bin {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    /// Visits every split as (feature, gain).
    pub fn for_each_split(&self, f: &mut impl FnMut(usize, f64)) {
        if let TreeNode::Split {
            feature,
            gain,
            left,
            right,
            ..
        } = self
        {
            f(*feature, *gain);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

pub struct TreeParams {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    bin: usize,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Best split of one feature over `rows`; ties keep the lowest bin.
fn best_for_feature(
    data: &BinnedMatrix,
    feature: usize,
    rows: &[usize],
    grad: &[f64],
    hess: &[f64],
    totals: (f64, f64),
    p: &TreeParams,
) -> Option<Candidate> {
    let nb = data.cuts[feature].n_bins();
    if nb < 2 {
        return None;
    }
    let mut hg = vec![0.0; nb];
    let mut hh = vec![0.0; nb];
    let col = &data.bins[feature];
    for &r in rows {
        let b = col[r] as usize;
        hg[b] += grad[r];
        hh[b] += hess[r];
    }
    let (g, h) = totals;
    let parent = score(g, h, p.lambda);
    let (mut gl, mut hl) = (0.0, 0.0);
    let mut best: Option<Candidate> = None;
    for s in 1..nb {
        gl += hg[s - 1];
        hl += hh[s - 1];
        let (gr, hr) = (g - gl, h - hl);
        if hl < p.min_child_weight || hr < p.min_child_weight {
            continue;
        }
        let gain = 0.5 * (score(gl, hl, p.lambda) + score(gr, hr, p.lambda) - parent);
        if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
            best = Some(Candidate { gain, feature, bin: s });
        }
    }
    best
}

/// Grows one tree on `rows` using only `features`.
pub fn grow(
    data: &BinnedMatrix,
    rows: Vec<usize>,
    features: &[usize],
    grad: &[f64],
    hess: &[f64],
    p: &TreeParams,
    depth: usize,
) -> TreeNode {
    let g: f64 = rows.iter().map(|&r| grad[r]).sum();
    let h: f64 = rows.iter().map(|&r| hess[r]).sum();
    let leaf = || TreeNode::Leaf {
        weight: -g / (h + p.lambda) * p.learning_rate,
    };
    if depth >= p.max_depth || rows.len() < 2 {
        return leaf();
    }
    let candidates: Vec<Option<Candidate>> = features
        .par_iter()
        .map(|&f| best_for_feature(data, f, &rows, grad, hess, (g, h), p))
        .collect();
    // Features are in ascending order, so a strict comparison keeps the
    // lowest feature index on equal gain.
    let mut best: Option<Candidate> = None;
    for c in candidates.into_iter().flatten() {
        if best.is_none_or(|b| c.gain > b.gain) {
            best = Some(c);
        }
    }
    let Some(best) = best else {
        return leaf();
    };
    let col = &data.bins[best.feature];
    let (left, right): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| (col[r] as usize) < best.bin);
    TreeNode::Split {
        feature: best.feature,
        bin: best.bin as u16,
        threshold: data.cuts[best.feature].cuts[best.bin - 1],
        gain: best.gain,
        left: Box::new(grow(data, left, features, grad, hess, p, depth + 1)),
        right: Box::new(grow(data, right, features, grad, hess, p, depth + 1)),
    }
}
