//! Binary masks and longitudinal tumor geometry: whole-tumor union,
//! growth/shrinkage masks, volumes, centroids and compartment dynamics.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nifti::{Geometry, LabelMap, Volume};

/// Relative change reported when a compartment appears from a zero baseline.
pub const RELATIVE_CHANGE_CAP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    geometry: Geometry,
    bits: Vec<bool>,
    count: usize,
}

impl BinaryMask {
    pub fn new(geometry: Geometry, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != geometry.len() {
            return Err(Error::InvalidInput(format!(
                "mask length {} does not match dims {:?}",
                bits.len(),
                geometry.dims
            )));
        }
        let count = bits.iter().filter(|&&b| b).count();
        Ok(BinaryMask { geometry, bits, count })
    }

    pub fn empty(geometry: Geometry) -> Self {
        let n = geometry.len();
        BinaryMask {
            geometry,
            bits: vec![false; n],
            count: 0,
        }
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let [nx, ny, nz] = geometry.dims;
        let mut bits = Vec::with_capacity(geometry.len());
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    bits.push(f(x, y, z));
                }
            }
        }
        let count = bits.iter().filter(|&&b| b).count();
        BinaryMask { geometry, bits, count }
    }

    /// Voxels with non-zero intensity.
    pub fn nonzero(v: &Volume) -> Self {
        let bits: Vec<bool> = v.data.iter().map(|&x| x != 0.0).collect();
        let count = bits.iter().filter(|&&b| b).count();
        BinaryMask {
            geometry: v.geometry.clone(),
            bits,
            count,
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.geometry.index(x, y, z)]
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// Inclusive (min, max) corner of the set voxels.
    pub fn bounding_box(&self) -> Option<([usize; 3], [usize; 3])> {
        if self.count == 0 {
            return None;
        }
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        for idx in self.indices() {
            let c = self.geometry.coords(idx);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        Some((lo, hi))
    }

    /// Set-voxel count of each axial (constant z) slice.
    pub fn slice_counts(&self) -> Vec<usize> {
        let [nx, ny, nz] = self.geometry.dims;
        let plane = nx * ny;
        (0..nz)
            .map(|z| self.bits[z * plane..(z + 1) * plane].iter().filter(|&&b| b).count())
            .collect()
    }

    fn combine(&self, other: &BinaryMask, what: &str, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        self.geometry.ensure_matches(&other.geometry, what)?;
        let bits: Vec<bool> = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        BinaryMask::new(self.geometry.clone(), bits)
    }

    pub fn and_not(&self, other: &BinaryMask) -> Result<Self> {
        self.combine(other, "mask difference", |a, b| a && !b)
    }

    pub fn and(&self, other: &BinaryMask) -> Result<Self> {
        self.combine(other, "mask intersection", |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryMask) -> Result<Self> {
        self.combine(other, "mask union", |a, b| a || b)
    }
}

/// Label values of the three tumor compartments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompartmentMapping {
    pub necrotic: i32,
    pub edema: i32,
    pub enhancing: i32,
}

impl Default for CompartmentMapping {
    fn default() -> Self {
        CompartmentMapping {
            necrotic: 1,
            edema: 2,
            enhancing: 4,
        }
    }
}

impl CompartmentMapping {
    pub fn new(necrotic: i32, edema: i32, enhancing: i32) -> Result<Self> {
        let m = CompartmentMapping {
            necrotic,
            edema,
            enhancing,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let l = [self.necrotic, self.edema, self.enhancing];
        if l.iter().any(|&v| v <= 0) || l[0] == l[1] || l[0] == l[2] || l[1] == l[2] {
            return Err(Error::InvalidInput(format!(
                "compartment labels must be distinct positive integers, got {l:?}"
            )));
        }
        Ok(())
    }

    pub fn contains(&self, label: i32) -> bool {
        label == self.necrotic || label == self.edema || label == self.enhancing
    }

    pub fn labels(&self) -> [(Compartment, i32); 3] {
        [
            (Compartment::Necrotic, self.necrotic),
            (Compartment::Edema, self.edema),
            (Compartment::Enhancing, self.enhancing),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Compartment {
    Necrotic,
    Edema,
    Enhancing,
}

impl Compartment {
    pub fn name(self) -> &'static str {
        match self {
            Compartment::Necrotic => "necrotic",
            Compartment::Edema => "edema",
            Compartment::Enhancing => "enhancing",
        }
    }
}

/// Union of the three compartments. Unknown positive labels are ignored.
pub fn whole_tumor(lm: &LabelMap, cm: &CompartmentMapping) -> BinaryMask {
    let mut unknown = 0usize;
    let bits: Vec<bool> = lm
        .labels
        .iter()
        .map(|&l| {
            let hit = cm.contains(l);
            if !hit && l > 0 {
                unknown += 1;
            }
            hit
        })
        .collect();
    if unknown > 0 {
        warn!("{unknown} voxels carry labels outside the compartment mapping; ignored");
    }
    let count = bits.iter().filter(|&&b| b).count();
    BinaryMask {
        geometry: lm.geometry.clone(),
        bits,
        count,
    }
}

pub fn label_mask(lm: &LabelMap, label: i32) -> BinaryMask {
    let bits: Vec<bool> = lm.labels.iter().map(|&l| l == label).collect();
    let count = bits.iter().filter(|&&b| b).count();
    BinaryMask {
        geometry: lm.geometry.clone(),
        bits,
        count,
    }
}

/// Voxels present at follow-up but not at baseline.
pub fn growth_mask(base: &BinaryMask, follow: &BinaryMask) -> Result<BinaryMask> {
    follow.and_not(base)
}

/// Voxels present at baseline but not at follow-up.
pub fn shrinkage_mask(base: &BinaryMask, follow: &BinaryMask) -> Result<BinaryMask> {
    base.and_not(follow)
}

pub fn volume_mm3(m: &BinaryMask) -> f64 {
    m.count() as f64 * m.geometry.voxel_volume()
}

/// World-space image of the mean voxel index of the set bits.
pub fn centroid_mm(m: &BinaryMask) -> Result<[f64; 3]> {
    if m.is_empty() {
        return Err(Error::EmptyMask("centroid of an empty mask".into()));
    }
    let mut sum = [0.0f64; 3];
    for idx in m.indices() {
        let c = m.geometry.coords(idx);
        for a in 0..3 {
            sum[a] += c[a] as f64;
        }
    }
    let n = m.count() as f64;
    Ok(m.geometry.affine.apply([sum[0] / n, sum[1] / n, sum[2] / n]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentroidShift {
    pub mm: f64,
    /// Exactly one of the two masks was empty and `mm` is the saturating value.
    pub empty_mask: bool,
}

/// Length of the grid's diagonal extent in mm.
pub fn grid_diameter_mm(g: &Geometry) -> f64 {
    let e = g
        .affine
        .apply_linear([g.dims[0] as f64, g.dims[1] as f64, g.dims[2] as f64]);
    (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()
}

pub fn centroid_shift_mm(base: &BinaryMask, follow: &BinaryMask) -> Result<CentroidShift> {
    base.geometry.ensure_matches(&follow.geometry, "centroid shift")?;
    match (base.is_empty(), follow.is_empty()) {
        (true, true) => Ok(CentroidShift {
            mm: 0.0,
            empty_mask: false,
        }),
        (true, false) | (false, true) => Ok(CentroidShift {
            mm: grid_diameter_mm(&base.geometry),
            empty_mask: true,
        }),
        (false, false) => {
            let a = centroid_mm(base)?;
            let b = centroid_mm(follow)?;
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            Ok(CentroidShift {
                mm: d,
                empty_mask: false,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompartmentChange {
    pub baseline_mm3: f64,
    pub followup_mm3: f64,
    pub relative_change: f64,
    /// Baseline was empty while follow-up is not; `relative_change` is capped.
    pub new_lesion: bool,
}

impl CompartmentChange {
    pub fn from_volumes(baseline_mm3: f64, followup_mm3: f64, voxel_mm3: f64) -> Self {
        let (relative_change, new_lesion) = if baseline_mm3 > 0.0 {
            ((followup_mm3 - baseline_mm3) / baseline_mm3, false)
        } else if followup_mm3 > 0.0 {
            ((followup_mm3 / voxel_mm3).min(RELATIVE_CHANGE_CAP), true)
        } else {
            (0.0, false)
        };
        CompartmentChange {
            baseline_mm3,
            followup_mm3,
            relative_change,
            new_lesion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompartmentVolumes {
    pub necrotic: CompartmentChange,
    pub edema: CompartmentChange,
    pub enhancing: CompartmentChange,
}

impl CompartmentVolumes {
    pub fn iter(&self) -> impl Iterator<Item = (Compartment, &CompartmentChange)> {
        [
            (Compartment::Necrotic, &self.necrotic),
            (Compartment::Edema, &self.edema),
            (Compartment::Enhancing, &self.enhancing),
        ]
        .into_iter()
    }
}

pub fn compartment_volumes(base: &LabelMap, follow: &LabelMap, cm: &CompartmentMapping) -> Result<CompartmentVolumes> {
    base.geometry.ensure_matches(&follow.geometry, "compartment volumes")?;
    let voxel = base.geometry.voxel_volume();
    let change = |label: i32| {
        let b = base.labels.iter().filter(|&&l| l == label).count() as f64 * voxel;
        let f = follow.labels.iter().filter(|&&l| l == label).count() as f64 * voxel;
        CompartmentChange::from_volumes(b, f, voxel)
    };
    Ok(CompartmentVolumes {
        necrotic: change(cm.necrotic),
        edema: change(cm.edema),
        enhancing: change(cm.enhancing),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nifti::Affine;
    use proptest::prelude::*;

    fn geom(d: usize) -> Geometry {
        Geometry::axis_aligned([d, d, d], [1.0; 3])
    }

    fn mask_from(g: &Geometry, bits: &[bool]) -> BinaryMask {
        BinaryMask::new(g.clone(), bits.to_vec()).unwrap()
    }

    #[test]
    fn whole_tumor_examples() {
        let g = geom(2);
        let lm = LabelMap::new(g.clone(), vec![0; 8]).unwrap();
        assert!(whole_tumor(&lm, &CompartmentMapping::default()).is_empty());
        let lm = LabelMap::new(g, vec![0, 1, 2, 4, 3, 0, 4, 1]).unwrap();
        let m = whole_tumor(&lm, &CompartmentMapping::default());
        assert_eq!(m.count(), 5);
        assert!(!m.get(4));
    }

    #[test]
    fn growth_and_shrinkage_examples() {
        let g = geom(3);
        let a = BinaryMask::from_fn(g.clone(), |x, _, _| x == 1);
        assert!(growth_mask(&a, &a).unwrap().is_empty());
        assert!(shrinkage_mask(&a, &a).unwrap().is_empty());
        let empty = BinaryMask::empty(g.clone());
        assert_eq!(growth_mask(&empty, &a).unwrap(), a);
        assert_eq!(shrinkage_mask(&a, &empty).unwrap(), a);
        let other = BinaryMask::empty(geom(4));
        assert!(matches!(growth_mask(&a, &other), Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn volume_examples() {
        let g = Geometry::axis_aligned([10, 1, 1], [1.0, 1.0, 1.0]);
        assert_eq!(volume_mm3(&BinaryMask::from_fn(g, |_, _, _| true)), 10.0);
        let g = Geometry::axis_aligned([10, 1, 1], [1.0, 1.0, 2.0]);
        assert_eq!(volume_mm3(&BinaryMask::from_fn(g, |_, _, _| true)), 20.0);
    }

    #[test]
    fn centroid_examples() {
        let g = geom(5);
        let m = BinaryMask::from_fn(g.clone(), |x, y, z| (x, y, z) == (2, 3, 4));
        assert_eq!(centroid_mm(&m).unwrap(), [2.0, 3.0, 4.0]);
        let m = BinaryMask::from_fn(g.clone(), |x, y, z| y == 0 && z == 0 && (x == 0 || x == 2));
        assert_eq!(centroid_mm(&m).unwrap(), [1.0, 0.0, 0.0]);
        assert!(centroid_mm(&BinaryMask::empty(g)).is_err());
    }

    #[test]
    fn centroid_shift_examples() {
        let g = geom(8);
        let a = BinaryMask::from_fn(g.clone(), |x, y, z| x < 2 && y < 2 && z < 2);
        assert_eq!(centroid_shift_mm(&a, &a).unwrap().mm, 0.0);
        let b = BinaryMask::from_fn(g.clone(), |x, y, z| (3..5).contains(&x) && y < 2 && z < 2);
        assert_eq!(centroid_shift_mm(&a, &b).unwrap().mm, 3.0);

        let ga = Geometry::axis_aligned([4, 4, 8], [1.0, 1.0, 2.0]);
        let a = BinaryMask::from_fn(ga.clone(), |x, y, z| (x, y, z) == (1, 1, 1));
        let b = BinaryMask::from_fn(ga.clone(), |x, y, z| (x, y, z) == (1, 1, 3));
        assert_eq!(centroid_shift_mm(&a, &b).unwrap().mm, 4.0);

        let empty = BinaryMask::empty(ga.clone());
        let s = centroid_shift_mm(&a, &empty).unwrap();
        assert!(s.empty_mask);
        assert!((s.mm - (16.0f64 + 16.0 + 256.0).sqrt()).abs() < 1e-12);
        let s = centroid_shift_mm(&empty, &empty).unwrap();
        assert_eq!((s.mm, s.empty_mask), (0.0, false));
    }

    #[test]
    fn compartment_change_rules() {
        let c = CompartmentChange::from_volumes(100.0, 50.0, 1.0);
        assert_eq!(c.relative_change, -0.5);
        let c = CompartmentChange::from_volumes(0.0, 0.0, 1.0);
        assert_eq!((c.relative_change, c.new_lesion), (0.0, false));
        // 40 voxels of 1 mm3 against a one-voxel epsilon: 40, capped to 10.
        let c = CompartmentChange::from_volumes(0.0, 40.0, 1.0);
        assert_eq!((c.relative_change, c.new_lesion), (10.0, true));
        let c = CompartmentChange::from_volumes(0.0, 3.0, 1.0);
        assert_eq!((c.relative_change, c.new_lesion), (3.0, true));
    }

    #[test]
    fn compartment_volumes_from_labelmaps() {
        let g = Geometry::axis_aligned([4, 1, 1], [1.0, 1.0, 2.0]);
        let b = LabelMap::new(g.clone(), vec![1, 2, 4, 4]).unwrap();
        let f = LabelMap::new(g, vec![0, 2, 2, 4]).unwrap();
        let cv = compartment_volumes(&b, &f, &CompartmentMapping::default()).unwrap();
        assert_eq!(cv.necrotic.relative_change, -1.0);
        assert_eq!(cv.edema.baseline_mm3, 2.0);
        assert_eq!(cv.edema.relative_change, 1.0);
        assert_eq!(cv.enhancing.followup_mm3, 2.0);
    }

    #[test]
    fn mapping_validation() {
        assert!(CompartmentMapping::new(1, 1, 4).is_err());
        assert!(CompartmentMapping::new(0, 2, 4).is_err());
        assert!(CompartmentMapping::new(3, 2, 1).is_ok());
    }

    fn random_bits(seed: u64, n: usize) -> Vec<bool> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 33).is_multiple_of(3)
            })
            .collect()
    }

    #[test]
    fn random_masks_match_brute_force() {
        let g = geom(16);
        for seed in 0..8 {
            let a = mask_from(&g, &random_bits(seed, g.len()));
            let b = mask_from(&g, &random_bits(seed + 100, g.len()));
            let grow = growth_mask(&a, &b).unwrap();
            let shrink = shrinkage_mask(&a, &b).unwrap();
            for i in 0..g.len() {
                assert_eq!(grow.get(i), b.get(i) && !a.get(i));
                assert_eq!(shrink.get(i), a.get(i) && !b.get(i));
            }
            assert_eq!(volume_mm3(&a), a.bits().iter().filter(|&&x| x).count() as f64);

            let mut sum = [0.0; 3];
            for i in a.indices() {
                let w = crate::nifti::voxel_to_world(&g.affine, g.coords(i));
                for k in 0..3 {
                    sum[k] += w[k];
                }
            }
            let c = centroid_mm(&a).unwrap();
            for k in 0..3 {
                assert!((c[k] - sum[k] / a.count() as f64).abs() < 1e-9);
            }

            let lm = LabelMap::new(
                g.clone(),
                random_bits(seed + 7, g.len())
                    .iter()
                    .zip(random_bits(seed + 9, g.len()))
                    .map(|(&p, q)| match (p, q) {
                        (true, true) => 4,
                        (true, false) => 2,
                        (false, true) => 3,
                        _ => 0,
                    })
                    .collect(),
            )
            .unwrap();
            let wt = whole_tumor(&lm, &CompartmentMapping::default());
            let brute = lm.labels.iter().filter(|&&l| l == 1 || l == 2 || l == 4).count();
            assert_eq!(wt.count(), brute);
        }
    }

    proptest! {
        #[test]
        fn mask_algebra_invariants(a in proptest::collection::vec(any::<bool>(), 6 * 6 * 6),
                                   b in proptest::collection::vec(any::<bool>(), 6 * 6 * 6)) {
            let g = Geometry::axis_aligned([6, 6, 6], [0.5, 1.0, 1.5]);
            let a = mask_from(&g, &a);
            let b = mask_from(&g, &b);
            let grow = growth_mask(&a, &b).unwrap();
            let shrink = shrinkage_mask(&a, &b).unwrap();
            prop_assert!(grow.and(&shrink).unwrap().is_empty());
            prop_assert_eq!(&grow, &shrinkage_mask(&b, &a).unwrap());
            prop_assert_eq!(volume_mm3(&b) - volume_mm3(&a), volume_mm3(&grow) - volume_mm3(&shrink));
        }

        #[test]
        fn centroid_shift_invariant_under_reindexing(a in proptest::collection::vec(any::<bool>(), 5 * 4 * 3),
                                                     b in proptest::collection::vec(any::<bool>(), 5 * 4 * 3)) {
            // Flip the x axis of both masks and compensate in the affine.
            let g = Geometry::new([5, 4, 3], [1.0, 2.0, 1.0],
                Affine::diagonal([1.0, 2.0, 1.0]).with_translation([3.0, -1.0, 2.0])).unwrap();
            let mut flipped_aff = g.affine;
            flipped_aff.0[0][0] = -1.0;
            flipped_aff.0[0][3] = 3.0 + 4.0;
            let gf = Geometry::new([5, 4, 3], [1.0, 2.0, 1.0], flipped_aff).unwrap();
            let flip = |bits: &[bool]| -> Vec<bool> {
                (0..bits.len()).map(|i| {
                    let [x, y, z] = g.coords(i);
                    bits[g.index(4 - x, y, z)]
                }).collect()
            };
            let ma = mask_from(&g, &a);
            let mb = mask_from(&g, &b);
            let fa = mask_from(&gf, &flip(&a));
            let fb = mask_from(&gf, &flip(&b));
            let s1 = centroid_shift_mm(&ma, &mb).unwrap();
            let s2 = centroid_shift_mm(&fa, &fb).unwrap();
            prop_assert!((s1.mm - s2.mm).abs() < 1e-9);
        }
    }
}
