//! Gray-level run-length features, per direction then averaged.

use super::discretize::DiscretizedImage;
use super::neighborhood::Dim;
use super::zone_stats::{matrix_features, ZoneMatrix};

pub const NAMES: [&str; 16] = [
    "short_run_emphasis",
    "long_run_emphasis",
    "gray_level_non_uniformity",
    "gray_level_non_uniformity_normalized",
    "run_length_non_uniformity",
    "run_length_non_uniformity_normalized",
    "run_percentage",
    "gray_level_variance",
    "run_variance",
    "run_entropy",
    "low_gray_level_run_emphasis",
    "high_gray_level_run_emphasis",
    "short_run_low_gray_level_emphasis",
    "short_run_high_gray_level_emphasis",
    "long_run_low_gray_level_emphasis",
    "long_run_high_gray_level_emphasis",
];

/// Run-length matrix for one direction: `levels × max_len`, entry
/// `(code - 1, len - 1)`.
pub fn run_lengths(d: &DiscretizedImage, dir: [isize; 3]) -> ZoneMatrix {
    let max_len = d.dims.iter().max().copied().unwrap_or(1);
    let mut m = ZoneMatrix::new(d.levels, max_len);
    let delta = d.delta(dir);
    for i in d.mask_indices() {
        let c = d.codes[i];
        // A run starts where the predecessor along the direction differs.
        let prev = (i as isize - delta) as usize;
        if d.codes[prev] == c {
            continue;
        }
        let mut len = 1;
        let mut j = (i as isize + delta) as usize;
        while d.codes[j] == c {
            len += 1;
            j = (j as isize + delta) as usize;
        }
        m.add(c as usize, len);
    }
    m
}

pub fn glrlm(d: &DiscretizedImage, dim: Dim) -> Option<[f64; 16]> {
    let np = d.voxel_count() as f64;
    if np == 0.0 {
        return None;
    }
    let mut acc = [0.0; 16];
    let dirs = dim.directions();
    for &dir in dirs {
        let m = run_lengths(d, dir);
        let f = matrix_features(&m, np);
        for (a, v) in acc.iter_mut().zip(f) {
            *a += v;
        }
    }
    for a in &mut acc {
        *a /= dirs.len() as f64;
    }
    Some(acc)
}
