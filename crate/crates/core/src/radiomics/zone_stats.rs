//! Gray-level × size matrices shared by the run-length, size-zone and
//! dependence features.

/// Counts indexed by gray level `1..=levels` and size `1..=max_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneMatrix {
    pub levels: usize,
    pub max_size: usize,
    pub counts: Vec<f64>,
}

impl ZoneMatrix {
    pub fn new(levels: usize, max_size: usize) -> Self {
        ZoneMatrix {
            levels,
            max_size,
            counts: vec![0.0; levels * max_size],
        }
    }

    #[inline]
    pub fn add(&mut self, level: usize, size: usize) {
        if size > self.max_size {
            self.grow(size);
        }
        self.counts[(level - 1) * self.max_size + size - 1] += 1.0;
    }

    fn grow(&mut self, size: usize) {
        let mut next = vec![0.0; self.levels * size];
        for l in 0..self.levels {
            next[l * size..l * size + self.max_size]
                .copy_from_slice(&self.counts[l * self.max_size..(l + 1) * self.max_size]);
        }
        self.counts = next;
        self.max_size = size;
    }

    pub fn get(&self, level: usize, size: usize) -> f64 {
        if size > self.max_size {
            return 0.0;
        }
        self.counts[(level - 1) * self.max_size + size - 1]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Σ count · size.
    pub fn weighted_size_total(&self) -> f64 {
        let mut s = 0.0;
        for l in 0..self.levels {
            for k in 0..self.max_size {
                s += self.counts[l * self.max_size + k] * (k + 1) as f64;
            }
        }
        s
    }

    /// Row (gray-level) and column (size) marginals of the counts.
    fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let mut rows = vec![0.0; self.levels];
        let mut cols = vec![0.0; self.max_size];
        for l in 0..self.levels {
            for k in 0..self.max_size {
                let c = self.counts[l * self.max_size + k];
                rows[l] += c;
                cols[k] += c;
            }
        }
        (rows, cols)
    }
}

/// The 16 emphasis / non-uniformity / variance / entropy statistics of a
/// run-length or size-zone matrix. `np` is the number of voxels in the region.
pub fn matrix_features(m: &ZoneMatrix, np: f64) -> [f64; 16] {
    let n = m.total();
    if n == 0.0 {
        return [0.0; 16];
    }
    let (rows, cols) = m.marginals();
    let lvl = |l: usize| (l + 1) as f64;
    let sz = |k: usize| (k + 1) as f64;

    let small: f64 = cols.iter().enumerate().map(|(k, c)| c / (sz(k) * sz(k))).sum::<f64>() / n;
    let large: f64 = cols.iter().enumerate().map(|(k, c)| c * sz(k) * sz(k)).sum::<f64>() / n;
    let gln: f64 = rows.iter().map(|r| r * r).sum::<f64>() / n;
    let sn: f64 = cols.iter().map(|c| c * c).sum::<f64>() / n;
    let low: f64 = rows.iter().enumerate().map(|(l, r)| r / (lvl(l) * lvl(l))).sum::<f64>() / n;
    let high: f64 = rows.iter().enumerate().map(|(l, r)| r * lvl(l) * lvl(l)).sum::<f64>() / n;

    let mu_l: f64 = rows.iter().enumerate().map(|(l, r)| r * lvl(l)).sum::<f64>() / n;
    let mu_s: f64 = cols.iter().enumerate().map(|(k, c)| c * sz(k)).sum::<f64>() / n;
    let var_l: f64 = rows
        .iter()
        .enumerate()
        .map(|(l, r)| r * (lvl(l) - mu_l).powi(2))
        .sum::<f64>()
        / n;
    let var_s: f64 = cols
        .iter()
        .enumerate()
        .map(|(k, c)| c * (sz(k) - mu_s).powi(2))
        .sum::<f64>()
        / n;

    let (mut sl, mut sh, mut ll, mut lh, mut ent) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for l in 0..m.levels {
        let i2 = lvl(l) * lvl(l);
        for k in 0..m.max_size {
            let c = m.counts[l * m.max_size + k];
            if c == 0.0 {
                continue;
            }
            let j2 = sz(k) * sz(k);
            sl += c / (i2 * j2);
            sh += c * i2 / j2;
            ll += c * j2 / i2;
            lh += c * i2 * j2;
            let p = c / n;
            ent -= p * p.log2();
        }
    }

    [
        small,
        large,
        gln,
        gln / n,
        sn,
        sn / n,
        n / np,
        var_l,
        var_s,
        ent,
        low,
        high,
        sl / n,
        sh / n,
        ll / n,
        lh / n,
    ]
}
