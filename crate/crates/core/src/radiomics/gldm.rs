//! Gray-level dependence features (distance 1, exact-match dependence).
//! A voxel's dependence size is one plus its number of equal-code neighbors.

use super::discretize::DiscretizedImage;
use super::neighborhood::Dim;
use super::zone_stats::ZoneMatrix;

pub const NAMES: [&str; 14] = [
    "small_dependence_emphasis",
    "large_dependence_emphasis",
    "gray_level_non_uniformity",
    "dependence_non_uniformity",
    "dependence_non_uniformity_normalized",
    "gray_level_variance",
    "dependence_variance",
    "dependence_entropy",
    "low_gray_level_emphasis",
    "high_gray_level_emphasis",
    "small_dependence_low_gray_level_emphasis",
    "small_dependence_high_gray_level_emphasis",
    "large_dependence_low_gray_level_emphasis",
    "large_dependence_high_gray_level_emphasis",
];

pub fn dependence_matrix(d: &DiscretizedImage, dim: Dim) -> ZoneMatrix {
    let deltas: Vec<isize> = dim.neighbors().iter().map(|&n| d.delta(n)).collect();
    let mut m = ZoneMatrix::new(d.levels, deltas.len() + 1);
    for i in d.mask_indices() {
        let c = d.codes[i];
        let dep = deltas
            .iter()
            .filter(|&&dl| d.codes[(i as isize + dl) as usize] == c)
            .count();
        m.add(c as usize, dep + 1);
    }
    m
}

pub fn gldm(d: &DiscretizedImage, dim: Dim) -> Option<[f64; 14]> {
    let m = dependence_matrix(d, dim);
    let nz = m.total();
    if nz == 0.0 {
        return None;
    }
    let lvl = |l: usize| (l + 1) as f64;
    let sz = |k: usize| (k + 1) as f64;
    let mut rows = vec![0.0; m.levels];
    let mut cols = vec![0.0; m.max_size];
    let (mut sl, mut sh, mut ll, mut lh, mut ent) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for l in 0..m.levels {
        let i2 = lvl(l) * lvl(l);
        for k in 0..m.max_size {
            let c = m.counts[l * m.max_size + k];
            if c == 0.0 {
                continue;
            }
            rows[l] += c;
            cols[k] += c;
            let j2 = sz(k) * sz(k);
            sl += c / (i2 * j2);
            sh += c * i2 / j2;
            ll += c * j2 / i2;
            lh += c * i2 * j2;
            let p = c / nz;
            ent -= p * p.log2();
        }
    }
    let sde = cols.iter().enumerate().map(|(k, c)| c / (sz(k) * sz(k))).sum::<f64>() / nz;
    let lde = cols.iter().enumerate().map(|(k, c)| c * sz(k) * sz(k)).sum::<f64>() / nz;
    let gln = rows.iter().map(|r| r * r).sum::<f64>() / nz;
    let dn = cols.iter().map(|c| c * c).sum::<f64>() / nz;
    let mu_l = rows.iter().enumerate().map(|(l, r)| r * lvl(l)).sum::<f64>() / nz;
    let mu_d = cols.iter().enumerate().map(|(k, c)| c * sz(k)).sum::<f64>() / nz;
    let var_l = rows
        .iter()
        .enumerate()
        .map(|(l, r)| r * (lvl(l) - mu_l).powi(2))
        .sum::<f64>()
        / nz;
    let var_d = cols
        .iter()
        .enumerate()
        .map(|(k, c)| c * (sz(k) - mu_d).powi(2))
        .sum::<f64>()
        / nz;
    let lgle = rows.iter().enumerate().map(|(l, r)| r / (lvl(l) * lvl(l))).sum::<f64>() / nz;
    let hgle = rows.iter().enumerate().map(|(l, r)| r * lvl(l) * lvl(l)).sum::<f64>() / nz;
    Some([
        sde,
        lde,
        gln,
        dn,
        dn / nz,
        var_l,
        var_d,
        ent,
        lgle,
        hgle,
        sl / nz,
        sh / nz,
        ll / nz,
        lh / nz,
    ])
}
