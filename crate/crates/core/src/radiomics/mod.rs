//! Handcrafted radiomic features for a (volume, mask) pair: 3D statistics,
//! shape and texture, plus a 2D subset on the largest axial slice.

pub mod catalog;
pub mod discretize;
pub mod firstorder;
pub mod glcm;
pub mod gldm;
pub mod glrlm;
pub mod glszm;
pub mod mesh;
pub mod neighborhood;
pub mod ngtdm;
pub mod shape;
pub mod zone_stats;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::nifti::Volume;

pub use catalog::{catalog, CatalogEntry, FeatureCatalog, FeatureClass, CATALOG_LEN, CATALOG_VERSION};
pub use discretize::{discretize, DiscretizedImage};
pub use neighborhood::Dim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadiomicsConfig {
    pub bins: usize,
}

impl Default for RadiomicsConfig {
    fn default() -> Self {
        RadiomicsConfig { bins: 32 }
    }
}

/// Catalog-aligned values. Every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub empty_mask: bool,
    /// Some statistic hit a zero denominator and carries its 0 sentinel.
    pub degenerate: bool,
}

impl FeatureVector {
    pub fn sentinel() -> Self {
        FeatureVector {
            values: vec![0.0; CATALOG_LEN],
            empty_mask: true,
            degenerate: false,
        }
    }
}

/// Shape values depend only on the mask, so they can be shared across the
/// volumes measured under it.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskShape {
    pub shape3d: [f64; 14],
    pub shape2d: [f64; 10],
    pub slice: usize,
    pub degenerate: bool,
}

impl MaskShape {
    /// `None` for an empty mask.
    pub fn compute(m: &BinaryMask) -> Option<Self> {
        let slice = largest_area_slice(m)?;
        let (s3, d3) = shape::shape3d(m);
        let (s2, d2) = shape::shape2d(m, slice);
        Some(MaskShape {
            shape3d: s3,
            shape2d: s2,
            slice,
            degenerate: d3 || d2,
        })
    }
}

/// Axial index with the most mask voxels; ties go to the lowest index.
pub fn largest_area_slice(m: &BinaryMask) -> Option<usize> {
    let counts = m.slice_counts();
    let best = counts.iter().copied().max().filter(|&c| c > 0)?;
    counts.iter().position(|&c| c == best)
}

/// The mask restricted to axial slice `z`.
pub fn slice_mask(m: &BinaryMask, z: usize) -> BinaryMask {
    BinaryMask::from_fn(m.geometry().clone(), |x, y, zz| zz == z && m.at(x, y, zz))
}

pub fn extract_all(v: &Volume, m: &BinaryMask, config: &RadiomicsConfig) -> Result<FeatureVector> {
    v.geometry.ensure_matches(m.geometry(), "feature mask")?;
    match MaskShape::compute(m) {
        None => Ok(FeatureVector::sentinel()),
        Some(shape) => extract_with_shape(v, m, &shape, config),
    }
}

/// Same as [`extract_all`] with precomputed shape values for `m`.
pub fn extract_with_shape(
    v: &Volume,
    m: &BinaryMask,
    shape: &MaskShape,
    config: &RadiomicsConfig,
) -> Result<FeatureVector> {
    v.geometry.ensure_matches(m.geometry(), "feature mask")?;
    if m.is_empty() {
        return Ok(FeatureVector::sentinel());
    }
    let voxel_volume = v.geometry.voxel_volume();
    let mut out = Vec::with_capacity(CATALOG_LEN);
    let mut degenerate = shape.degenerate;

    let d3 = discretize(v, m, config.bins)?;
    degenerate |= push_first_order(&mut out, v, m, &d3, voxel_volume);
    out.extend_from_slice(&shape.shape3d);
    degenerate |= push_texture(&mut out, &d3, Dim::Three, true);

    let sm = slice_mask(m, shape.slice);
    let d2 = discretize(v, &sm, config.bins)?;
    degenerate |= push_first_order(&mut out, v, &sm, &d2, voxel_volume);
    out.extend_from_slice(&shape.shape2d);
    degenerate |= push_texture(&mut out, &d2, Dim::Two, false);

    if out.len() != CATALOG_LEN {
        return Err(Error::InvalidInput(format!(
            "feature vector has {} values, catalog has {CATALOG_LEN}",
            out.len()
        )));
    }
    for x in &mut out {
        if !x.is_finite() {
            *x = 0.0;
            degenerate = true;
        }
    }
    Ok(FeatureVector {
        values: out,
        empty_mask: false,
        degenerate,
    })
}

fn push_first_order(out: &mut Vec<f64>, v: &Volume, m: &BinaryMask, d: &DiscretizedImage, voxel_volume: f64) -> bool {
    let values: Vec<f64> = m.indices().map(|i| v.data[i]).collect();
    let (f, deg) = firstorder::first_order(&values, &d.in_mask_codes(), d.levels, voxel_volume);
    out.extend_from_slice(&f);
    deg
}

/// Appends GLCM and GLRLM, then GLSZM, GLDM and NGTDM when `full`.
fn push_texture(out: &mut Vec<f64>, d: &DiscretizedImage, dim: Dim, full: bool) -> bool {
    let mut deg = false;
    let mut push = |vals: Option<&[f64]>, len: usize| match vals {
        Some(v) => out.extend_from_slice(v),
        None => {
            deg = true;
            out.extend(std::iter::repeat_n(0.0, len));
        }
    };
    let g = glcm::glcm(d, dim);
    let glcm_deg = g.as_ref().map(|r| r.degenerate).unwrap_or(false);
    push(g.as_ref().map(|r| &r.values[..]), glcm::NAMES.len());
    push(glrlm::glrlm(d, dim).as_ref().map(|v| &v[..]), glrlm::NAMES.len());
    if full {
        push(glszm::glszm(d, dim).as_ref().map(|v| &v[..]), glszm::NAMES.len());
        push(gldm::gldm(d, dim).as_ref().map(|v| &v[..]), gldm::NAMES.len());
        let n = ngtdm::ngtdm(d, dim);
        let ngtdm_deg = n.map(|(_, dg)| dg).unwrap_or(false);
        push(n.as_ref().map(|(v, _)| &v[..]), ngtdm::NAMES.len());
        deg |= ngtdm_deg;
    }
    deg || glcm_deg
}
