//! Neighborhood gray-tone difference features over the full neighborhood,
//! counting only in-mask neighbors.

use super::discretize::DiscretizedImage;
use super::neighborhood::Dim;

pub const NAMES: [&str; 5] = ["coarseness", "contrast", "busyness", "complexity", "strength"];

/// Per-level voxel counts `n` and summed absolute differences `s`, over
/// voxels with at least one in-mask neighbor.
pub fn tone_differences(d: &DiscretizedImage, dim: Dim) -> (Vec<f64>, Vec<f64>) {
    let deltas: Vec<isize> = dim.neighbors().iter().map(|&n| d.delta(n)).collect();
    let mut n = vec![0.0; d.levels];
    let mut s = vec![0.0; d.levels];
    for i in d.mask_indices() {
        let (mut sum, mut cnt) = (0.0, 0usize);
        for &dl in &deltas {
            let c = d.codes[(i as isize + dl) as usize];
            if c > 0 {
                sum += c as f64;
                cnt += 1;
            }
        }
        if cnt == 0 {
            continue;
        }
        let c = d.codes[i] as usize;
        n[c - 1] += 1.0;
        s[c - 1] += (c as f64 - sum / cnt as f64).abs();
    }
    (n, s)
}

/// `None` when no voxel has an in-mask neighbor. Zero denominators yield 0.
pub fn ngtdm(d: &DiscretizedImage, dim: Dim) -> Option<([f64; 5], bool)> {
    let (n, s) = tone_differences(d, dim);
    let nvp: f64 = n.iter().sum();
    if nvp == 0.0 {
        return None;
    }
    let p: Vec<f64> = n.iter().map(|x| x / nvp).collect();
    let present: Vec<usize> = (0..d.levels).filter(|&k| p[k] > 0.0).collect();
    let ngp = present.len() as f64;
    let lvl = |k: usize| (k + 1) as f64;
    let s_total: f64 = s.iter().sum();
    let ps: f64 = present.iter().map(|&k| p[k] * s[k]).sum();

    let mut degenerate = false;
    let coarseness = if ps > 0.0 {
        1.0 / ps
    } else {
        degenerate = true;
        0.0
    };

    let (mut sq, mut busy_den, mut complexity, mut strength_num) = (0.0, 0.0, 0.0, 0.0);
    for &a in &present {
        for &b in &present {
            let diff = lvl(a) - lvl(b);
            sq += p[a] * p[b] * diff * diff;
            busy_den += (lvl(a) * p[a] - lvl(b) * p[b]).abs();
            complexity += diff.abs() * (p[a] * s[a] + p[b] * s[b]) / (p[a] + p[b]);
            strength_num += (p[a] + p[b]) * diff * diff;
        }
    }
    let contrast = if ngp > 1.0 {
        sq / (ngp * (ngp - 1.0)) * s_total / nvp
    } else {
        0.0
    };
    let busyness = if busy_den > 0.0 { ps / busy_den } else { 0.0 };
    let complexity = complexity / nvp;
    let strength = if s_total > 0.0 { strength_num / s_total } else { 0.0 };
    Some(([coarseness, contrast, busyness, complexity, strength], degenerate))
}
