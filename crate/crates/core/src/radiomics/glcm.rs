//! Gray-level co-occurrence features at distance 1, computed per direction on
//! the symmetric matrix and averaged over directions that contain pairs.

use nalgebra::{DMatrix, SymmetricEigen};

use super::discretize::DiscretizedImage;
use super::neighborhood::{entropy, Dim};

pub const NAMES: [&str; 24] = [
    "autocorrelation",
    "joint_average",
    "cluster_prominence",
    "cluster_shade",
    "cluster_tendency",
    "contrast",
    "correlation",
    "difference_average",
    "difference_entropy",
    "difference_variance",
    "joint_energy",
    "joint_entropy",
    "imc1",
    "imc2",
    "idm",
    "idmn",
    "id",
    "idn",
    "inverse_variance",
    "maximum_probability",
    "sum_average",
    "sum_entropy",
    "sum_squares",
    "mcc",
];

/// Symmetric co-occurrence counts for one direction, `levels × levels`,
/// row-major with code `c` at index `c - 1`.
pub fn cooccurrence(d: &DiscretizedImage, dir: [isize; 3]) -> Vec<f64> {
    let ng = d.levels;
    let mut m = vec![0.0; ng * ng];
    let delta = d.delta(dir);
    for i in d.mask_indices() {
        let j = (i as isize + delta) as usize;
        let (a, b) = (d.codes[i], d.codes[j]);
        if b > 0 {
            let (a, b) = (a as usize - 1, b as usize - 1);
            m[a * ng + b] += 1.0;
            m[b * ng + a] += 1.0;
        }
    }
    m
}

/// Per-direction matrices for the requested dimensionality.
pub fn matrices(d: &DiscretizedImage, dim: Dim) -> Vec<Vec<f64>> {
    dim.directions().iter().map(|&dir| cooccurrence(d, dir)).collect()
}

pub struct GlcmResult {
    pub values: [f64; 24],
    /// A zero-variance statistic was replaced by its 0 sentinel.
    pub degenerate: bool,
}

/// Features of one symmetric count matrix; `None` when it holds no pairs.
pub fn features_of(counts: &[f64], ng: usize) -> Option<GlcmResult> {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let p: Vec<f64> = counts.iter().map(|c| c / total).collect();
    let lvl = |k: usize| (k + 1) as f64;

    let mut px = vec![0.0; ng];
    let mut py = vec![0.0; ng];
    let mut sum_dist = vec![0.0; 2 * ng + 1];
    let mut diff_dist = vec![0.0; ng];
    let mut autocorr = 0.0;
    let mut max_prob: f64 = 0.0;
    let mut joint_energy = 0.0;
    for a in 0..ng {
        for b in 0..ng {
            let v = p[a * ng + b];
            if v == 0.0 {
                continue;
            }
            px[a] += v;
            py[b] += v;
            sum_dist[a + b + 2] += v;
            diff_dist[a.abs_diff(b)] += v;
            autocorr += v * lvl(a) * lvl(b);
            max_prob = max_prob.max(v);
            joint_energy += v * v;
        }
    }
    let mux: f64 = px.iter().enumerate().map(|(a, &v)| lvl(a) * v).sum();
    let muy: f64 = py.iter().enumerate().map(|(b, &v)| lvl(b) * v).sum();
    let varx: f64 = px.iter().enumerate().map(|(a, &v)| (lvl(a) - mux).powi(2) * v).sum();
    let vary: f64 = py.iter().enumerate().map(|(b, &v)| (lvl(b) - muy).powi(2) * v).sum();

    let (mut c2, mut c3, mut c4) = (0.0, 0.0, 0.0);
    let mut hxy1 = 0.0;
    for a in 0..ng {
        for b in 0..ng {
            let v = p[a * ng + b];
            if v == 0.0 {
                continue;
            }
            let t = lvl(a) + lvl(b) - mux - muy;
            c2 += t * t * v;
            c3 += t * t * t * v;
            c4 += t * t * t * t * v;
            hxy1 -= v * (px[a] * py[b]).log2();
        }
    }
    let mut hxy2 = 0.0;
    for a in 0..ng {
        for b in 0..ng {
            let q = px[a] * py[b];
            if q > 0.0 {
                hxy2 -= q * q.log2();
            }
        }
    }

    let mut degenerate = false;
    let sigma = (varx * vary).sqrt();
    let correlation = if sigma > 0.0 {
        (autocorr - mux * muy) / sigma
    } else {
        degenerate = true;
        0.0
    };

    let contrast: f64 = diff_dist.iter().enumerate().map(|(k, &v)| (k * k) as f64 * v).sum();
    let diff_avg: f64 = diff_dist.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    let diff_var: f64 = diff_dist
        .iter()
        .enumerate()
        .map(|(k, &v)| (k as f64 - diff_avg).powi(2) * v)
        .sum();
    let diff_ent = entropy(diff_dist.iter().copied());
    let ngf = ng as f64;
    let (mut idm, mut idmn, mut id, mut idn, mut inv_var) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, &v) in diff_dist.iter().enumerate() {
        let k = k as f64;
        idm += v / (1.0 + k * k);
        idmn += v / (1.0 + k * k / (ngf * ngf));
        id += v / (1.0 + k);
        idn += v / (1.0 + k / ngf);
        if k > 0.0 {
            inv_var += v / (k * k);
        }
    }
    let sum_avg: f64 = sum_dist.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
    let sum_ent = entropy(sum_dist.iter().copied());
    let hxy = entropy(p.iter().copied());
    let hx = entropy(px.iter().copied());
    let hy = entropy(py.iter().copied());
    let hmax = hx.max(hy);
    let imc1 = if hmax > 0.0 { (hxy - hxy1) / hmax } else { 0.0 };
    let imc2 = if hxy2 > hxy {
        (1.0 - (-2.0 * (hxy2 - hxy)).exp()).sqrt()
    } else {
        0.0
    };
    let (mcc, mcc_degenerate) = mcc(&p, &px, ng);
    degenerate |= mcc_degenerate;

    Some(GlcmResult {
        values: [
            autocorr,
            mux,
            c4,
            c3,
            c2,
            contrast,
            correlation,
            diff_avg,
            diff_ent,
            diff_var,
            joint_energy,
            hxy,
            imc1,
            imc2,
            idm,
            idmn,
            id,
            idn,
            inv_var,
            max_prob,
            sum_avg,
            sum_ent,
            varx,
            mcc,
        ],
        degenerate,
    })
}

/// Maximal correlation coefficient. For a symmetric matrix the coefficient
/// operator is similar to `S²` with `S = D^-1/2 P D^-1/2`, so its second
/// largest eigenvalue comes from a symmetric decomposition.
fn mcc(p: &[f64], px: &[f64], ng: usize) -> (f64, bool) {
    let present: Vec<usize> = (0..ng).filter(|&a| px[a] > 0.0).collect();
    let n = present.len();
    if n < 2 {
        return (0.0, true);
    }
    let s = DMatrix::from_fn(n, n, |r, c| {
        let (a, b) = (present[r], present[c]);
        p[a * ng + b] / (px[a] * px[b]).sqrt()
    });
    let eig = SymmetricEigen::new(s);
    let mut sq: Vec<f64> = eig.eigenvalues.iter().map(|l| l * l).collect();
    sq.sort_by(|a, b| b.total_cmp(a));
    (sq[1].max(0.0).sqrt(), false)
}

/// Direction-averaged features; `None` when no direction has a pair.
pub fn glcm(d: &DiscretizedImage, dim: Dim) -> Option<GlcmResult> {
    let mut acc = [0.0; 24];
    let mut n = 0usize;
    let mut degenerate = false;
    for m in matrices(d, dim) {
        if let Some(r) = features_of(&m, d.levels) {
            for (a, v) in acc.iter_mut().zip(r.values) {
                *a += v;
            }
            degenerate |= r.degenerate;
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    for a in &mut acc {
        *a /= n as f64;
    }
    Some(GlcmResult {
        values: acc,
        degenerate,
    })
}
