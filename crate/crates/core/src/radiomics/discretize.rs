//! Fixed-bin-count discretization onto a padded bounding-box grid.

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::nifti::Volume;

/// Gray-level codes over the mask's bounding box, padded by one voxel on every
/// side. Code 0 marks voxels outside the mask (including padding), in-mask
/// voxels carry codes in `1..=levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedImage {
    pub levels: usize,
    pub bin_edges: Vec<f64>,
    /// Padded grid dims, x fastest.
    pub dims: [usize; 3],
    pub codes: Vec<u16>,
    /// Grid position of the bounding box's minimum corner in the source volume.
    pub origin: [usize; 3],
}

impl DiscretizedImage {
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    /// Flat-index delta for a neighbor offset (dx, dy, dz).
    #[inline]
    pub fn delta(&self, d: [isize; 3]) -> isize {
        d[0] + self.dims[0] as isize * (d[1] + self.dims[1] as isize * d[2])
    }

    /// Flat indices of in-mask voxels in grid order.
    pub fn mask_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.codes.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, _)| i)
    }

    pub fn voxel_count(&self) -> usize {
        self.codes.iter().filter(|&&c| c > 0).count()
    }

    /// In-mask codes in grid order.
    pub fn in_mask_codes(&self) -> Vec<u16> {
        self.codes.iter().copied().filter(|&c| c > 0).collect()
    }

    /// Build directly from a small code array (0 = outside) without padding
    /// already applied; used by tests and 2D slices.
    pub fn from_codes(dims: [usize; 3], raw: &[u16], levels: usize) -> Self {
        assert_eq!(raw.len(), dims[0] * dims[1] * dims[2]);
        let pd = [dims[0] + 2, dims[1] + 2, dims[2] + 2];
        let mut codes = vec![0u16; pd[0] * pd[1] * pd[2]];
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let c = raw[x + dims[0] * (y + dims[1] * z)];
                    assert!(c as usize <= levels);
                    codes[(x + 1) + pd[0] * ((y + 1) + pd[1] * (z + 1))] = c;
                }
            }
        }
        DiscretizedImage {
            levels,
            bin_edges: (0..=levels).map(|k| k as f64).collect(),
            dims: pd,
            codes,
            origin: [0; 3],
        }
    }
}

/// Code of one intensity given the in-mask range.
#[inline]
pub fn bin_code(x: f64, min: f64, max: f64, bins: usize) -> u16 {
    if max <= min {
        return 1;
    }
    let k = 1 + ((bins as f64) * (x - min) / (max - min)).floor() as usize;
    k.min(bins) as u16
}

/// `code = min(bins, 1 + floor(bins·(x − min)/(max − min)))` over the mask.
pub fn discretize(v: &Volume, m: &BinaryMask, bins: usize) -> Result<DiscretizedImage> {
    if bins < 2 || bins > u16::MAX as usize {
        return Err(Error::InvalidInput(format!("bin count {bins} out of range")));
    }
    v.geometry.ensure_matches(m.geometry(), "discretization mask")?;
    let (lo, hi) = m
        .bounding_box()
        .ok_or_else(|| Error::EmptyMask("discretization".into()))?;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in m.indices() {
        min = min.min(v.data[i]);
        max = max.max(v.data[i]);
    }
    let bin_edges = if max > min {
        (0..=bins).map(|k| min + (max - min) * k as f64 / bins as f64).collect()
    } else {
        (0..=bins).map(|k| min + k as f64).collect()
    };
    let ext = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
    let dims = [ext[0] + 2, ext[1] + 2, ext[2] + 2];
    let mut codes = vec![0u16; dims[0] * dims[1] * dims[2]];
    let g = m.geometry();
    for z in 0..ext[2] {
        for y in 0..ext[1] {
            for x in 0..ext[0] {
                let src = g.index(lo[0] + x, lo[1] + y, lo[2] + z);
                if m.get(src) {
                    codes[(x + 1) + dims[0] * ((y + 1) + dims[1] * (z + 1))] = bin_code(v.data[src], min, max, bins);
                }
            }
        }
    }
    Ok(DiscretizedImage {
        levels: bins,
        bin_edges,
        dims,
        codes,
        origin: lo,
    })
}
