//! Intensity standardization: piecewise-linear histogram matching to a cohort
//! landmark template, followed by z-scoring.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::case::Modality;
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::nifti::Volume;

/// Landmark quantile levels shared by every template.
pub const LANDMARKS: [f64; 11] = [0.01, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99];

/// Linearly interpolated quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn masked_values(v: &Volume, mask: &BinaryMask) -> Result<Vec<f64>> {
    v.geometry.ensure_matches(mask.geometry(), "intensity mask")?;
    Ok(mask.indices().map(|i| v.data[i]).collect())
}

fn sorted_masked(v: &Volume, mask: &BinaryMask) -> Result<Vec<f64>> {
    if mask.is_empty() {
        return Err(Error::EmptyMask("intensity normalization mask".into()));
    }
    let mut vals = masked_values(v, mask)?;
    vals.sort_unstable_by(f64::total_cmp);
    Ok(vals)
}

/// In-mask intensity at each landmark level.
pub fn volume_landmarks(v: &Volume, mask: &BinaryMask) -> Result<Vec<f64>> {
    let vals = sorted_masked(v, mask)?;
    Ok(LANDMARKS.iter().map(|&p| quantile_sorted(&vals, p)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityTemplate {
    pub modality: Modality,
    pub quantiles: Vec<Landmark>,
}

impl IntensityTemplate {
    /// Average per-volume landmark vectors into a template.
    pub fn from_landmark_sets(modality: Modality, sets: &[Vec<f64>]) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidInput("template needs at least one volume".into()));
        }
        let mut mean = vec![0.0; LANDMARKS.len()];
        for s in sets {
            if s.len() != LANDMARKS.len() {
                return Err(Error::InvalidInput(format!(
                    "landmark set has {} entries, expected {}",
                    s.len(),
                    LANDMARKS.len()
                )));
            }
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        let n = sets.len() as f64;
        let t = IntensityTemplate {
            modality,
            quantiles: LANDMARKS
                .iter()
                .zip(mean)
                .map(|(&p, s)| Landmark { p, value: s / n })
                .collect(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.quantiles.len() < 11 {
            return Err(Error::InvalidInput("template needs at least 11 landmarks".into()));
        }
        for w in self.quantiles.windows(2) {
            if !(w[1].p > w[0].p) || w[1].value < w[0].value {
                return Err(Error::InvalidInput(
                    "template landmarks must be increasing in p and non-decreasing in value".into(),
                ));
            }
        }
        let has = |p: f64| self.quantiles.iter().any(|l| (l.p - p).abs() < 1e-12);
        if !has(0.01) || !has(0.99) {
            return Err(Error::InvalidInput("template must include p=0.01 and p=0.99".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        self.quantiles.iter().map(|l| l.value).collect()
    }

    pub fn levels(&self) -> Vec<f64> {
        self.quantiles.iter().map(|l| l.p).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t: IntensityTemplate = serde_json::from_str(&text)?;
        t.validate()?;
        Ok(t)
    }
}

/// Landmark at p is the mean over volumes of each volume's in-mask p-quantile.
pub fn build_template(modality: Modality, volumes: &[&Volume], masks: &[&BinaryMask]) -> Result<IntensityTemplate> {
    if volumes.len() != masks.len() {
        return Err(Error::LengthMismatch(volumes.len(), masks.len()));
    }
    let sets = volumes
        .iter()
        .zip(masks)
        .map(|(v, m)| volume_landmarks(v, m))
        .collect::<Result<Vec<_>>>()?;
    IntensityTemplate::from_landmark_sets(modality, &sets)
}

/// Monotone piecewise-linear intensity map with linear extrapolation.
#[derive(Debug, Clone)]
pub struct PiecewiseLinear {
    src: Vec<f64>,
    dst: Vec<f64>,
}

impl PiecewiseLinear {
    /// Knots with repeated source values are merged, averaging their targets.
    pub fn new(src: &[f64], dst: &[f64]) -> Result<Self> {
        let mut s: Vec<f64> = Vec::with_capacity(src.len());
        let mut d: Vec<f64> = Vec::with_capacity(src.len());
        let mut i = 0;
        while i < src.len() {
            let mut j = i;
            let mut acc = 0.0;
            while j < src.len() && src[j] == src[i] {
                acc += dst[j];
                j += 1;
            }
            s.push(src[i]);
            d.push(acc / (j - i) as f64);
            i = j;
        }
        if s.len() < 2 {
            return Err(Error::ConstantImage(src[0]));
        }
        Ok(PiecewiseLinear { src: s, dst: d })
    }

    pub fn apply(&self, x: f64) -> f64 {
        let n = self.src.len();
        let seg = match self.src.partition_point(|&s| s <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (x0, x1) = (self.src[seg], self.src[seg + 1]);
        let (y0, y1) = (self.dst[seg], self.dst[seg + 1]);
        y0 + (x - x0) * (y1 - y0) / (x1 - x0)
    }
}

/// Map `v`'s in-mask landmark quantiles onto the template landmarks and apply
/// the resulting piecewise-linear map to every voxel.
pub fn histogram_match(v: &Volume, mask: &BinaryMask, t: &IntensityTemplate) -> Result<Volume> {
    t.validate()?;
    let vals = sorted_masked(v, mask)?;
    if vals[0] == vals[vals.len() - 1] {
        return Err(Error::ConstantImage(vals[0]));
    }
    let src: Vec<f64> = t.quantiles.iter().map(|l| quantile_sorted(&vals, l.p)).collect();
    let map = PiecewiseLinear::new(&src, &t.values())?;
    Ok(v.with_data(v.data.iter().map(|&x| map.apply(x)).collect()))
}

/// In-mask mean and population standard deviation.
pub fn masked_mean_std(v: &Volume, mask: &BinaryMask) -> Result<(f64, f64)> {
    v.geometry.ensure_matches(mask.geometry(), "z-score mask")?;
    if mask.count() < 2 {
        return Err(Error::ZeroVariance);
    }
    let n = mask.count() as f64;
    let mean = mask.indices().map(|i| v.data[i]).sum::<f64>() / n;
    let var = mask.indices().map(|i| (v.data[i] - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((mean, std))
}

/// Standardize with in-mask statistics; out-of-mask voxels get the same map.
pub fn zscore(v: &Volume, mask: &BinaryMask) -> Result<Volume> {
    let (mean, std) = masked_mean_std(v, mask)?;
    Ok(v.with_data(v.data.iter().map(|&x| (x - mean) / std).collect()))
}

/// Histogram matching then z-scoring, both over the non-zero voxels of the
/// input volume.
pub fn standardize(v: &Volume, t: &IntensityTemplate) -> Result<Volume> {
    let mask = BinaryMask::nonzero(v);
    let matched = histogram_match(v, &mask, t)?;
    zscore(&matched, &mask)
}
