//! Gray-level size-zone features. Zones are connected components of equal
//! code under full (26 in 3D, 8 in 2D) connectivity.

use super::discretize::DiscretizedImage;
use super::neighborhood::Dim;
use super::zone_stats::{matrix_features, ZoneMatrix};

pub const NAMES: [&str; 16] = [
    "small_area_emphasis",
    "large_area_emphasis",
    "gray_level_non_uniformity",
    "gray_level_non_uniformity_normalized",
    "size_zone_non_uniformity",
    "size_zone_non_uniformity_normalized",
    "zone_percentage",
    "gray_level_variance",
    "zone_variance",
    "zone_entropy",
    "low_gray_level_zone_emphasis",
    "high_gray_level_zone_emphasis",
    "small_area_low_gray_level_emphasis",
    "small_area_high_gray_level_emphasis",
    "large_area_low_gray_level_emphasis",
    "large_area_high_gray_level_emphasis",
];

pub fn size_zones(d: &DiscretizedImage, dim: Dim) -> ZoneMatrix {
    let deltas: Vec<isize> = dim.neighbors().iter().map(|&n| d.delta(n)).collect();
    let mut m = ZoneMatrix::new(d.levels, 1);
    let mut seen = vec![false; d.codes.len()];
    let mut stack = Vec::new();
    for start in d.mask_indices() {
        if seen[start] {
            continue;
        }
        let c = d.codes[start];
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            for &dl in &deltas {
                let j = (i as isize + dl) as usize;
                if !seen[j] && d.codes[j] == c {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        m.add(c as usize, size);
    }
    m
}

pub fn glszm(d: &DiscretizedImage, dim: Dim) -> Option<[f64; 16]> {
    let np = d.voxel_count() as f64;
    if np == 0.0 {
        return None;
    }
    Some(matrix_features(&size_zones(d, dim), np))
}
