//! First-order intensity statistics. Entropy and uniformity use the
//! discretized codes; everything else uses raw intensities.

use crate::intensity::quantile_sorted;

use super::neighborhood::entropy;

pub const NAMES: [&str; 19] = [
    "mean",
    "median",
    "minimum",
    "maximum",
    "range",
    "variance",
    "standard_deviation",
    "skewness",
    "kurtosis",
    "energy",
    "total_energy",
    "entropy",
    "uniformity",
    "percentile_10",
    "percentile_90",
    "interquartile_range",
    "mean_absolute_deviation",
    "robust_mean_absolute_deviation",
    "root_mean_squared",
];

/// Returns the 19 values and whether a zero-variance sentinel was used.
/// `values` must be non-empty; `codes` are the matching discretized codes.
pub fn first_order(values: &[f64], codes: &[u16], levels: usize, voxel_volume: f64) -> ([f64; 19], bool) {
    assert!(!values.is_empty());
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);

    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let degenerate = m2 <= 0.0;
    let (skewness, kurtosis) = if degenerate {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    };

    let energy: f64 = values.iter().map(|x| x * x).sum();
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let p10 = quantile_sorted(&sorted, 0.1);
    let p90 = quantile_sorted(&sorted, 0.9);
    let p25 = quantile_sorted(&sorted, 0.25);
    let p75 = quantile_sorted(&sorted, 0.75);

    let mut hist = vec![0.0; levels + 1];
    for &c in codes {
        hist[c as usize] += 1.0;
    }
    let total = codes.len() as f64;
    let probs: Vec<f64> = hist.iter().map(|h| h / total).collect();
    let uniformity = probs.iter().map(|p| p * p).sum();

    let mad = values.iter().map(|x| (x - mean).abs()).sum::<f64>() / n;
    let robust: Vec<f64> = values.iter().copied().filter(|&x| x >= p10 && x <= p90).collect();
    let rmad = if robust.is_empty() {
        0.0
    } else {
        let rm = robust.iter().sum::<f64>() / robust.len() as f64;
        robust.iter().map(|x| (x - rm).abs()).sum::<f64>() / robust.len() as f64
    };

    (
        [
            mean,
            quantile_sorted(&sorted, 0.5),
            min,
            max,
            max - min,
            m2,
            m2.sqrt(),
            skewness,
            kurtosis,
            energy,
            energy * voxel_volume,
            entropy(probs.iter().copied()),
            uniformity,
            p10,
            p90,
            p75 - p25,
            mad,
            rmad,
            (energy / n).sqrt(),
        ],
        degenerate,
    )
}
