//! Slow reference implementations of the handcrafted statistics. Everything
//! here works on explicit voxel coordinates and pairwise comparisons, without
//! padding, flat-index arithmetic or shared matrix code.

#![allow(dead_code)]

use std::collections::BTreeMap;

use longirad::mask::BinaryMask;
use longirad::nifti::{DataType, Geometry, Volume};
use longirad::radiomics::{
    self, catalog, glcm as lglcm, gldm as lgldm, glrlm as lglrlm, glszm as lglszm, ngtdm as lngtdm,
};
use longirad::radiomics::{Dim, DiscretizedImage, FeatureClass, RadiomicsConfig};
use nalgebra::DMatrix;
use rand::Rng;

/// A code grid; 0 marks voxels outside the region, codes run `1..=levels`.
#[derive(Debug, Clone)]
pub struct Codes {
    pub dims: [usize; 3],
    pub codes: Vec<u16>,
    pub levels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Vox {
    p: [i64; 3],
    c: usize,
}

impl Codes {
    fn voxels(&self) -> Vec<Vox> {
        let [nx, ny, nz] = self.dims;
        let mut out = Vec::new();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let c = self.codes[x + nx * (y + ny * z)];
                    if c > 0 {
                        out.push(Vox {
                            p: [x as i64, y as i64, z as i64],
                            c: c as usize,
                        });
                    }
                }
            }
        }
        out
    }

    fn code_at(&self, p: [i64; 3]) -> usize {
        let [nx, ny, nz] = self.dims;
        if p.iter().any(|&v| v < 0) || p[0] >= nx as i64 || p[1] >= ny as i64 || p[2] >= nz as i64 {
            return 0;
        }
        self.codes[p[0] as usize + nx * (p[1] as usize + ny * p[2] as usize)] as usize
    }
}

/// One offset from each ± pair of the unit neighborhood; in-plane only when
/// `planar`.
pub fn directions(planar: bool) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for dz in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let d = [dx, dy, dz];
                if planar && dz != 0 {
                    continue;
                }
                let first = d.iter().copied().find(|&v| v != 0);
                if first.is_some_and(|v| v > 0) {
                    out.push(d);
                }
            }
        }
    }
    out
}

fn diff(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
}

fn adjacent(a: [i64; 3], b: [i64; 3], planar: bool) -> bool {
    let d = diff(a, b);
    d != [0, 0, 0] && d.iter().all(|v| v.abs() <= 1) && (!planar || d[2] == 0)
}

fn h(p: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter().filter(|&x| x > 0.0).map(|x| -x * x.log2()).sum()
}

// ---- first order ----

fn lin_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = pos.ceil() as usize;
    sorted[i] * (1.0 - (pos - i as f64)) + sorted[j] * (pos - i as f64)
}

pub fn first_order(values: &[f64], codes: &[u16], levels: usize, voxel_volume: f64) -> [f64; 19] {
    let n = values.len() as f64;
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = values.iter().sum::<f64>() / n;
    let central = |k: i32| values.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / n;
    let var = central(2);
    let (skew, kurt) = if var > 0.0 {
        (central(3) / var.powf(1.5), central(4) / (var * var))
    } else {
        (0.0, 0.0)
    };
    let energy = values.iter().map(|x| x * x).sum::<f64>();
    let mut hist = vec![0usize; levels + 1];
    for &c in codes {
        hist[c as usize] += 1;
    }
    let probs: Vec<f64> = hist.iter().map(|&k| k as f64 / codes.len() as f64).collect();
    let p10 = lin_quantile(&s, 0.1);
    let p90 = lin_quantile(&s, 0.9);
    let mad = values.iter().map(|x| (x - mean).abs()).sum::<f64>() / n;
    let inner: Vec<f64> = values.iter().copied().filter(|x| (p10..=p90).contains(x)).collect();
    let rmad = if inner.is_empty() {
        0.0
    } else {
        let m = inner.iter().sum::<f64>() / inner.len() as f64;
        inner.iter().map(|x| (x - m).abs()).sum::<f64>() / inner.len() as f64
    };
    [
        mean,
        lin_quantile(&s, 0.5),
        s[0],
        s[s.len() - 1],
        s[s.len() - 1] - s[0],
        var,
        var.sqrt(),
        skew,
        kurt,
        energy,
        energy * voxel_volume,
        h(probs.iter().copied()),
        probs.iter().map(|p| p * p).sum(),
        p10,
        p90,
        lin_quantile(&s, 0.75) - lin_quantile(&s, 0.25),
        mad,
        rmad,
        (energy / n).sqrt(),
    ]
}

/// `min(bins, 1 + floor(bins·(x − min)/(max − min)))`; all ones when constant.
pub fn bin_values(values: &[f64], bins: usize) -> Vec<u16> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|&x| {
            if hi <= lo {
                1
            } else {
                let k = 1 + ((bins as f64) * (x - lo) / (hi - lo)).floor() as usize;
                k.min(bins) as u16
            }
        })
        .collect()
}

// ---- co-occurrence ----

/// Symmetric pair counts for offset `d`, by comparing every ordered pair of
/// region voxels.
pub fn cooccurrence(g: &Codes, d: [i64; 3]) -> Vec<Vec<f64>> {
    let ng = g.levels;
    let mut m = vec![vec![0.0; ng + 1]; ng + 1];
    let vox = g.voxels();
    for a in &vox {
        for b in &vox {
            if diff(a.p, b.p) == d {
                m[a.c][b.c] += 1.0;
                m[b.c][a.c] += 1.0;
            }
        }
    }
    m
}

/// Square root of the second largest eigenvalue of
/// Q(i, j) = Σ_k p(i,k) p(j,k) / (px(i) py(k)). Q = A·Aᵀ up to similarity with
/// A(i, k) = p(i,k) / √(px(i) py(k)), so this is the second singular value of A.
fn mcc(p: &[Vec<f64>], px: &[f64], py: &[f64], ng: usize) -> f64 {
    let rows: Vec<usize> = (1..=ng).filter(|&i| px[i] > 0.0).collect();
    let cols: Vec<usize> = (1..=ng).filter(|&j| py[j] > 0.0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return 0.0;
    }
    let a = DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        let (i, k) = (rows[r], cols[c]);
        p[i][k] / (px[i] * py[k]).sqrt()
    });
    let mut sv: Vec<f64> = a.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv[1]
}

pub fn glcm_features(counts: &[Vec<f64>], ng: usize) -> Option<[f64; 24]> {
    let total: f64 = counts.iter().flatten().sum();
    if total == 0.0 {
        return None;
    }
    let p: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|c| c / total).collect()).collect();
    let lv = 1..=ng;
    let mut px = vec![0.0; ng + 1];
    let mut py = vec![0.0; ng + 1];
    for i in lv.clone() {
        for j in lv.clone() {
            px[i] += p[i][j];
            py[j] += p[i][j];
        }
    }
    let sum_ij = |f: &dyn Fn(f64, f64, f64) -> f64| -> f64 {
        let mut s = 0.0;
        for i in 1..=ng {
            for j in 1..=ng {
                s += f(i as f64, j as f64, p[i][j]);
            }
        }
        s
    };
    let mux = sum_ij(&|i, _, v| i * v);
    let muy = sum_ij(&|_, j, v| j * v);
    let sx = sum_ij(&|i, _, v| (i - mux).powi(2) * v).sqrt();
    let sy = sum_ij(&|_, j, v| (j - muy).powi(2) * v).sqrt();
    let mut pdiff: BTreeMap<usize, f64> = BTreeMap::new();
    let mut psum: BTreeMap<usize, f64> = BTreeMap::new();
    for i in lv.clone() {
        for j in lv.clone() {
            *pdiff.entry(i.abs_diff(j)).or_default() += p[i][j];
            *psum.entry(i + j).or_default() += p[i][j];
        }
    }
    let da: f64 = pdiff.iter().map(|(&k, &v)| k as f64 * v).sum();
    let hxy = sum_ij(&|_, _, v| if v > 0.0 { -v * v.log2() } else { 0.0 });
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for i in lv.clone() {
        for j in lv.clone() {
            let q = px[i] * py[j];
            if p[i][j] > 0.0 {
                hxy1 -= p[i][j] * q.log2();
            }
            if q > 0.0 {
                hxy2 -= q * q.log2();
            }
        }
    }
    let hx = h(px.iter().copied());
    let hy = h(py.iter().copied());
    let ngf = ng as f64;
    Some([
        sum_ij(&|i, j, v| i * j * v),
        mux,
        sum_ij(&|i, j, v| (i + j - mux - muy).powi(4) * v),
        sum_ij(&|i, j, v| (i + j - mux - muy).powi(3) * v),
        sum_ij(&|i, j, v| (i + j - mux - muy).powi(2) * v),
        sum_ij(&|i, j, v| (i - j).powi(2) * v),
        if sx * sy > 0.0 {
            sum_ij(&|i, j, v| (i - mux) * (j - muy) * v) / (sx * sy)
        } else {
            0.0
        },
        da,
        h(pdiff.values().copied()),
        pdiff.iter().map(|(&k, &v)| (k as f64 - da).powi(2) * v).sum(),
        sum_ij(&|_, _, v| v * v),
        hxy,
        if hx.max(hy) > 0.0 {
            (hxy - hxy1) / hx.max(hy)
        } else {
            0.0
        },
        if hxy2 > hxy {
            (1.0 - (-2.0 * (hxy2 - hxy)).exp()).sqrt()
        } else {
            0.0
        },
        sum_ij(&|i, j, v| v / (1.0 + (i - j).powi(2))),
        sum_ij(&|i, j, v| v / (1.0 + (i - j).powi(2) / (ngf * ngf))),
        sum_ij(&|i, j, v| v / (1.0 + (i - j).abs())),
        sum_ij(&|i, j, v| v / (1.0 + (i - j).abs() / ngf)),
        sum_ij(&|i, j, v| if i != j { v / (i - j).powi(2) } else { 0.0 }),
        p.iter().flatten().copied().fold(0.0, f64::max),
        psum.iter().map(|(&k, &v)| k as f64 * v).sum(),
        h(psum.values().copied()),
        sum_ij(&|i, _, v| (i - mux).powi(2) * v),
        mcc(&p, &px, &py, ng),
    ])
}

/// Mean over the directions that have at least one pair.
pub fn glcm(g: &Codes, planar: bool) -> Option<[f64; 24]> {
    let per: Vec<[f64; 24]> = directions(planar)
        .into_iter()
        .filter_map(|d| glcm_features(&cooccurrence(g, d), g.levels))
        .collect();
    mean_of(&per)
}

fn mean_of<const N: usize>(rows: &[[f64; N]]) -> Option<[f64; N]> {
    if rows.is_empty() {
        return None;
    }
    let mut out = [0.0; N];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    Some(out.map(|v| v / rows.len() as f64))
}

// ---- run / zone / dependence ----

/// Statistics of a list of (gray level, size) items: runs or zones.
/// `np` is the number of region voxels.
pub fn item_features(items: &[(usize, usize)], np: f64) -> [f64; 16] {
    let n = items.len() as f64;
    if items.is_empty() {
        return [0.0; 16];
    }
    let avg = |f: &dyn Fn(f64, f64) -> f64| items.iter().map(|&(i, j)| f(i as f64, j as f64)).sum::<f64>() / n;
    let mut by_level: BTreeMap<usize, f64> = BTreeMap::new();
    let mut by_size: BTreeMap<usize, f64> = BTreeMap::new();
    let mut cell: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(i, j) in items {
        *by_level.entry(i).or_default() += 1.0;
        *by_size.entry(j).or_default() += 1.0;
        *cell.entry((i, j)).or_default() += 1.0;
    }
    let gln = by_level.values().map(|c| c * c).sum::<f64>() / n;
    let sn = by_size.values().map(|c| c * c).sum::<f64>() / n;
    let mi = avg(&|i, _| i);
    let mj = avg(&|_, j| j);
    [
        avg(&|_, j| 1.0 / (j * j)),
        avg(&|_, j| j * j),
        gln,
        gln / n,
        sn,
        sn / n,
        n / np,
        avg(&|i, _| (i - mi).powi(2)),
        avg(&|_, j| (j - mj).powi(2)),
        h(cell.values().map(|c| c / n)),
        avg(&|i, _| 1.0 / (i * i)),
        avg(&|i, _| i * i),
        avg(&|i, j| 1.0 / (i * i * j * j)),
        avg(&|i, j| i * i / (j * j)),
        avg(&|i, j| j * j / (i * i)),
        avg(&|i, j| i * i * j * j),
    ]
}

/// Maximal runs along `d`: each voxel walks back to the start of its run,
/// and runs are collected by their start coordinate.
pub fn runs(g: &Codes, d: [i64; 3]) -> Vec<(usize, usize)> {
    let mut by_start: BTreeMap<[i64; 3], (usize, usize)> = BTreeMap::new();
    for v in g.voxels() {
        let mut s = v.p;
        loop {
            let prev = [s[0] - d[0], s[1] - d[1], s[2] - d[2]];
            if g.code_at(prev) != v.c {
                break;
            }
            s = prev;
        }
        by_start.entry(s).or_insert((v.c, 0)).1 += 1;
    }
    by_start.into_values().collect()
}

pub fn glrlm(g: &Codes, planar: bool) -> Option<[f64; 16]> {
    let vox = g.voxels();
    if vox.is_empty() {
        return None;
    }
    let per: Vec<[f64; 16]> = directions(planar)
        .into_iter()
        .map(|d| item_features(&runs(g, d), vox.len() as f64))
        .collect();
    mean_of(&per)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected equal-code zones by union-find over every adjacent voxel pair.
pub fn zones(g: &Codes, planar: bool) -> Vec<(usize, usize)> {
    let vox = g.voxels();
    let mut parent: Vec<usize> = (0..vox.len()).collect();
    for a in 0..vox.len() {
        for b in a + 1..vox.len() {
            if vox[a].c == vox[b].c && adjacent(vox[a].p, vox[b].p, planar) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let mut size: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for a in 0..vox.len() {
        let r = find(&mut parent, a);
        size.entry(r).or_insert((vox[a].c, 0)).1 += 1;
    }
    size.into_values().collect()
}

pub fn glszm(g: &Codes, planar: bool) -> Option<[f64; 16]> {
    let n = g.voxels().len();
    (n > 0).then(|| item_features(&zones(g, planar), n as f64))
}

/// (gray level, 1 + number of adjacent equal-code voxels) per voxel.
pub fn dependences(g: &Codes, planar: bool) -> Vec<(usize, usize)> {
    let vox = g.voxels();
    vox.iter()
        .map(|a| {
            let k = vox.iter().filter(|b| b.c == a.c && adjacent(a.p, b.p, planar)).count();
            (a.c, k + 1)
        })
        .collect()
}

pub fn gldm(g: &Codes, planar: bool) -> Option<[f64; 14]> {
    let items = dependences(g, planar);
    if items.is_empty() {
        return None;
    }
    let f = item_features(&items, items.len() as f64);
    let nz = items.len() as f64;
    // Same statistics as the zone list, minus the normalized gray-level
    // non-uniformity and the percentage.
    Some([
        f[0],
        f[1],
        f[2],
        f[4],
        f[4] / nz,
        f[7],
        f[8],
        f[9],
        f[10],
        f[11],
        f[12],
        f[13],
        f[14],
        f[15],
    ])
}

pub fn ngtdm(g: &Codes, planar: bool) -> Option<[f64; 5]> {
    let vox = g.voxels();
    let ng = g.levels;
    let mut n = vec![0.0; ng + 1];
    let mut s = vec![0.0; ng + 1];
    for a in &vox {
        let nb: Vec<f64> = vox
            .iter()
            .filter(|b| adjacent(a.p, b.p, planar))
            .map(|b| b.c as f64)
            .collect();
        if nb.is_empty() {
            continue;
        }
        let avg = nb.iter().sum::<f64>() / nb.len() as f64;
        n[a.c] += 1.0;
        s[a.c] += (a.c as f64 - avg).abs();
    }
    let nvp: f64 = n.iter().sum();
    if nvp == 0.0 {
        return None;
    }
    let p: Vec<f64> = n.iter().map(|v| v / nvp).collect();
    let lv: Vec<usize> = (1..=ng).filter(|&i| p[i] > 0.0).collect();
    let ngp = lv.len() as f64;
    let ps: f64 = lv.iter().map(|&i| p[i] * s[i]).sum();
    let st: f64 = s.iter().sum();
    let pairs = |f: &dyn Fn(usize, usize) -> f64| -> f64 {
        lv.iter()
            .flat_map(|&i| lv.iter().map(move |&j| (i, j)))
            .map(|(i, j)| f(i, j))
            .sum()
    };
    let d2 = |i: usize, j: usize| (i as f64 - j as f64).powi(2);
    let busy_den = pairs(&|i, j| (i as f64 * p[i] - j as f64 * p[j]).abs());
    Some([
        if ps > 0.0 { 1.0 / ps } else { 0.0 },
        if ngp > 1.0 {
            pairs(&|i, j| p[i] * p[j] * d2(i, j)) / (ngp * (ngp - 1.0)) * st / nvp
        } else {
            0.0
        },
        if busy_den > 0.0 { ps / busy_den } else { 0.0 },
        pairs(&|i, j| (i as f64 - j as f64).abs() * (p[i] * s[i] + p[j] * s[j]) / (p[i] + p[j])) / nvp,
        if st > 0.0 {
            pairs(&|i, j| (p[i] + p[j]) * d2(i, j)) / st
        } else {
            0.0
        },
    ])
}

// ---- full vector ----

/// Expected catalog-ordered values for a region on a unit-free grid, with
/// `None` at the shape positions (those have their own calibration checks).
/// Layout: 3D first order, 3D shape (14), 3D GLCM, GLRLM, GLSZM, GLDM,
/// NGTDM, then 2D first order, 2D shape (10), 2D GLCM and GLRLM on the axial
/// slice with the most region voxels.
pub fn expected_vector(
    dims: [usize; 3],
    values: &[f64],
    mask: &[bool],
    bins: usize,
    voxel_volume: f64,
) -> Vec<Option<f64>> {
    let idx = |x: usize, y: usize, z: usize| x + dims[0] * (y + dims[1] * z);
    let mut out: Vec<Option<f64>> = Vec::new();
    let push = |vals: Option<Vec<f64>>, len: usize, out: &mut Vec<Option<f64>>| match vals {
        Some(v) => out.extend(v.into_iter().map(Some)),
        None => out.extend(std::iter::repeat_n(Some(0.0), len)),
    };

    let region = |keep: &dyn Fn(usize, usize, usize) -> bool| -> (Vec<f64>, Codes) {
        let mut pos = Vec::new();
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    if mask[idx(x, y, z)] && keep(x, y, z) {
                        pos.push(idx(x, y, z));
                    }
                }
            }
        }
        let vals: Vec<f64> = pos.iter().map(|&i| values[i]).collect();
        let binned = bin_values(&vals, bins);
        let mut codes = vec![0u16; values.len()];
        for (&i, &c) in pos.iter().zip(&binned) {
            codes[i] = c;
        }
        (
            vals,
            Codes {
                dims,
                codes,
                levels: bins,
            },
        )
    };

    let (vals3, g3) = region(&|_, _, _| true);
    let c3: Vec<u16> = g3.codes.iter().copied().filter(|&c| c > 0).collect();
    out.extend(first_order(&vals3, &c3, bins, voxel_volume).map(Some));
    out.extend(std::iter::repeat_n(None, 14));
    push(glcm(&g3, false).map(|a| a.to_vec()), 24, &mut out);
    push(glrlm(&g3, false).map(|a| a.to_vec()), 16, &mut out);
    push(glszm(&g3, false).map(|a| a.to_vec()), 16, &mut out);
    push(gldm(&g3, false).map(|a| a.to_vec()), 14, &mut out);
    push(ngtdm(&g3, false).map(|a| a.to_vec()), 5, &mut out);

    let per_slice: Vec<usize> = (0..dims[2])
        .map(|z| {
            (0..dims[1])
                .flat_map(|y| (0..dims[0]).map(move |x| (x, y)))
                .filter(|&(x, y)| mask[idx(x, y, z)])
                .count()
        })
        .collect();
    let best = *per_slice.iter().max().unwrap();
    let zbest = per_slice.iter().position(|&c| c == best).unwrap();
    let (vals2, g2) = region(&|_, _, z| z == zbest);
    let c2: Vec<u16> = g2.codes.iter().copied().filter(|&c| c > 0).collect();
    out.extend(first_order(&vals2, &c2, bins, voxel_volume).map(Some));
    out.extend(std::iter::repeat_n(None, 10));
    push(glcm(&g2, true).map(|a| a.to_vec()), 24, &mut out);
    push(glrlm(&g2, true).map(|a| a.to_vec()), 16, &mut out);
    out
}

/// `|a − b| ≤ tol · max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

// ---- random instances and comparisons against the library ----

pub const TEXTURE_TOL: f64 = 1e-9;
pub const FIRST_ORDER_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Region {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub bins: usize,
}

/// A grid of at most 6³ voxels with a non-empty random mask. Intensities are
/// constant, coarse integers (many ties) or continuous.
pub fn random_region(rng: &mut impl Rng) -> Region {
    let dims = [
        rng.random_range(1..=6),
        rng.random_range(1..=6),
        rng.random_range(1..=6),
    ];
    let n = dims[0] * dims[1] * dims[2];
    let density = rng.random_range(0.2..=1.0);
    let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(density)).collect();
    let i = rng.random_range(0..n);
    mask[i] = true;
    let mode = rng.random_range(0..4);
    let values = (0..n)
        .map(|_| match mode {
            0 => 7.0,
            1 => rng.random_range(0..4) as f64,
            2 => rng.random_range(-50..50) as f64,
            _ => rng.random_range(-3.0..120.0),
        })
        .collect();
    let bins = [2, 3, 5, 8, 16, 32][rng.random_range(0..6)];
    let spacing = [
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
    ];
    Region {
        dims,
        spacing,
        values,
        mask,
        bins,
    }
}

/// A random code grid for direct matrix checks; single slice when `planar`.
pub fn random_codes(rng: &mut impl Rng, planar: bool) -> Codes {
    let dims = [
        rng.random_range(1..=6),
        rng.random_range(1..=6),
        if planar { 1 } else { rng.random_range(1..=6) },
    ];
    let levels = rng.random_range(1..=6);
    let fill = rng.random_range(0.2..=1.0);
    let codes = (0..dims[0] * dims[1] * dims[2])
        .map(|_| {
            if rng.random_bool(fill) {
                rng.random_range(1..=levels) as u16
            } else {
                0
            }
        })
        .collect();
    Codes { dims, codes, levels }
}

fn compare(what: &str, got: &[f64], want: &[f64], tol: f64) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("{what}: {} values, expected {}", got.len(), want.len()));
    }
    for (k, (g, w)) in got.iter().zip(want).enumerate() {
        if !close(*g, *w, tol) {
            return Err(format!("{what}[{k}]: got {g}, expected {w}"));
        }
    }
    Ok(())
}

/// Runs the full extractor on `r` and compares every first-order and
/// texture value with the oracle.
pub fn check_region(r: &Region) -> Result<(), String> {
    let g = Geometry::axis_aligned(r.dims, r.spacing);
    let v = Volume::new(g.clone(), r.values.clone(), DataType::Float64).map_err(|e| e.to_string())?;
    let m = BinaryMask::new(g.clone(), r.mask.clone()).map_err(|e| e.to_string())?;
    let got = radiomics::extract_all(&v, &m, &RadiomicsConfig { bins: r.bins }).map_err(|e| e.to_string())?;
    let want = expected_vector(r.dims, &r.values, &r.mask, r.bins, g.voxel_volume());
    if want.len() != got.values.len() {
        return Err(format!("vector length {} vs oracle {}", got.values.len(), want.len()));
    }
    for (e, (g, w)) in catalog().entries.iter().zip(got.values.iter().zip(&want)) {
        let Some(w) = w else { continue };
        let tol = if e.class == FeatureClass::Firstorder {
            FIRST_ORDER_TOL
        } else {
            TEXTURE_TOL
        };
        if !close(*g, *w, tol) {
            return Err(format!("{}: got {g}, expected {w} ({r:?})", e.key()));
        }
    }
    Ok(())
}

/// Compares each texture family, called directly on a code grid, with the
/// oracle in the given dimensionality.
pub fn check_codes(c: &Codes, planar: bool) -> Result<(), String> {
    let d = DiscretizedImage::from_codes(c.dims, &c.codes, c.levels);
    let dim = if planar { Dim::Two } else { Dim::Three };
    let tag = |name: &str| format!("{name} {} {c:?}", dim.token());
    let opt = |v: Option<Vec<f64>>| v.unwrap_or_default();
    compare(
        &tag("glcm"),
        &opt(lglcm::glcm(&d, dim).map(|r| r.values.to_vec())),
        &opt(glcm(c, planar).map(|a| a.to_vec())),
        TEXTURE_TOL,
    )?;
    compare(
        &tag("glrlm"),
        &opt(lglrlm::glrlm(&d, dim).map(|a| a.to_vec())),
        &opt(glrlm(c, planar).map(|a| a.to_vec())),
        TEXTURE_TOL,
    )?;
    compare(
        &tag("glszm"),
        &opt(lglszm::glszm(&d, dim).map(|a| a.to_vec())),
        &opt(glszm(c, planar).map(|a| a.to_vec())),
        TEXTURE_TOL,
    )?;
    compare(
        &tag("gldm"),
        &opt(lgldm::gldm(&d, dim).map(|a| a.to_vec())),
        &opt(gldm(c, planar).map(|a| a.to_vec())),
        TEXTURE_TOL,
    )?;
    compare(
        &tag("ngtdm"),
        &opt(lngtdm::ngtdm(&d, dim).map(|(a, _)| a.to_vec())),
        &opt(ngtdm(c, planar).map(|a| a.to_vec())),
        TEXTURE_TOL,
    )
}
