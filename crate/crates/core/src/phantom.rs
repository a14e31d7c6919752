//! Synthetic longitudinal cohorts with labels fixed by construction.
//!
//! Each tumor is three nested axis-aligned ellipsoids (necrotic core inside
//! an enhancing rim inside edema) placed in a spherical "brain". The
//! follow-up tumor is rescaled so that its whole-tumor voxel volume change
//! lands inside the regime of the requested class; complete responders keep
//! only a small edema residual.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::case::{
    write_case_list, CaseKey, CasePair, CaseRecord, DatasetLayout, Modality, RanoLabel, Scan, CASES_FILE,
};
use crate::error::{Error, Result};
use crate::mask::CompartmentMapping;
use crate::nifti::{write_labelmap, write_volume, DataType, Geometry, LabelMap, Volume};

/// Closed interval of relative whole-tumor volume change.
pub type Regime = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    /// Whole-tumor change of the edema-only residual left after complete response.
    pub cr_residual: Regime,
    pub pr: Regime,
    pub sd: Regime,
    pub pd: Regime,
    pub max_drift_mm: f64,
    /// Baseline edema semi-axis range in mm.
    pub radius_mm: [f64; 2],
    /// Gaussian noise sigma as a fraction of each modality's contrast range.
    pub noise_fraction: f64,
    /// Sinusoidal in-tumor texture amplitude as a fraction of compartment contrast.
    pub texture_amplitude: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [64; 3],
            spacing: [1.0; 3],
            cr_residual: [-0.97, -0.85],
            pr: [-0.95, -0.65],
            sd: [-0.2, 0.2],
            pd: [0.4, 2.0],
            max_drift_mm: 3.0,
            radius_mm: [9.0, 13.0],
            noise_fraction: 0.1,
            texture_amplitude: 0.15,
            seed: 0,
        }
    }
}

/// Mean intensity per modality for background tissue, necrotic, edema and enhancing voxels.
const MEANS: [[f64; 4]; 4] = [
    [600.0, 250.0, 450.0, 500.0],
    [600.0, 300.0, 480.0, 1100.0],
    [500.0, 1100.0, 900.0, 700.0],
    [450.0, 500.0, 950.0, 750.0],
];

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Phantom(m));
        if self.dims.iter().any(|&d| d < 32) {
            return bad(format!("grid {:?} is smaller than 32 per axis", self.dims));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("spacing must be positive".into());
        }
        let regimes = [self.pr, self.sd, self.pd];
        for r in regimes.iter().chain([&self.cr_residual]) {
            if !(r[0] < r[1] && r[0] > -1.0) {
                return bad(format!("regime {r:?} must be an increasing interval above -1"));
            }
        }
        for w in regimes.windows(2) {
            if w[0][1] >= w[1][0] {
                return bad(format!("regimes {:?} and {:?} overlap", w[0], w[1]));
            }
        }
        if !(self.radius_mm[0] > 0.0 && self.radius_mm[0] <= self.radius_mm[1]) {
            return bad("radius range must be positive and increasing".into());
        }
        if !(self.max_drift_mm >= 0.0 && self.noise_fraction >= 0.0 && self.texture_amplitude >= 0.0) {
            return bad("drift, noise and texture must be non-negative".into());
        }
        Ok(())
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::axis_aligned(self.dims, self.spacing)
    }

    /// Range of whole-tumor change defining `class`.
    pub fn regime(&self, class: RanoLabel) -> Regime {
        match class {
            RanoLabel::CR => self.cr_residual,
            RanoLabel::PR => self.pr,
            RanoLabel::SD => self.sd,
            RanoLabel::PD => self.pd,
        }
    }

    fn center_mm(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| (self.dims[a] as f64 - 1.0) * self.spacing[a] / 2.0)
    }

    fn brain_radius_mm(&self) -> f64 {
        (0..3)
            .map(|a| self.dims[a] as f64 * self.spacing[a])
            .fold(f64::INFINITY, f64::min)
            * 0.45
    }
}

/// Per-patient tumor shape shared by all of that patient's cases.
#[derive(Debug, Clone, Copy)]
pub struct Anatomy {
    pub axis_ratios: [f64; 3],
    pub offset_mm: [f64; 3],
    pub texture_phase: f64,
}

impl Anatomy {
    pub fn random(rng: &mut impl Rng) -> Self {
        Anatomy {
            axis_ratios: [0; 3].map(|_| rng.random_range(0.75..=1.0)),
            offset_mm: [0; 3].map(|_| rng.random_range(-4.0..=4.0)),
            texture_phase: rng.random_range(0.0..std::f64::consts::TAU),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Ellipsoid {
    center: [f64; 3],
    axes: [f64; 3],
}

impl Ellipsoid {
    fn contains(&self, p: [f64; 3]) -> bool {
        (0..3)
            .map(|a| ((p[a] - self.center[a]) / self.axes[a]).powi(2))
            .sum::<f64>()
            <= 1.0
    }

    fn scaled(&self, s: f64) -> Ellipsoid {
        Ellipsoid {
            center: self.center,
            axes: self.axes.map(|a| a * s),
        }
    }

    /// Voxel index range covering the ellipsoid, or `None` if it leaves the grid.
    fn voxel_box(&self, spec: &PhantomSpec) -> Option<[[usize; 2]; 3]> {
        let mut out = [[0; 2]; 3];
        for a in 0..3 {
            let lo = ((self.center[a] - self.axes[a]) / spec.spacing[a]).floor();
            let hi = ((self.center[a] + self.axes[a]) / spec.spacing[a]).ceil();
            if lo < 1.0 || hi > spec.dims[a] as f64 - 2.0 {
                return None;
            }
            out[a] = [lo as usize, hi as usize];
        }
        Some(out)
    }

    fn voxel_count(&self, spec: &PhantomSpec) -> Option<usize> {
        let b = self.voxel_box(spec)?;
        let mut n = 0;
        for z in b[2][0]..=b[2][1] {
            for y in b[1][0]..=b[1][1] {
                for x in b[0][0]..=b[0][1] {
                    n += usize::from(self.contains(position(spec, x, y, z)));
                }
            }
        }
        Some(n)
    }
}

fn position(spec: &PhantomSpec, x: usize, y: usize, z: usize) -> [f64; 3] {
    [
        x as f64 * spec.spacing[0],
        y as f64 * spec.spacing[1],
        z as f64 * spec.spacing[2],
    ]
}

/// Nested compartments at one timepoint; `inner` is `None` for an edema-only residual.
#[derive(Debug, Clone, Copy)]
struct Tumor {
    edema: Ellipsoid,
    inner: Option<(f64, f64)>,
}

impl Tumor {
    fn label_at(&self, p: [f64; 3], cm: &CompartmentMapping) -> i32 {
        if !self.edema.contains(p) {
            return 0;
        }
        match self.inner {
            Some((_, nec)) if self.edema.scaled(nec).contains(p) => cm.necrotic,
            Some((enh, _)) if self.edema.scaled(enh).contains(p) => cm.enhancing,
            _ => cm.edema,
        }
    }
}

/// Smallest scale whose voxelized volume reaches `target` voxels.
fn scale_for_count(base: &Ellipsoid, target: f64, spec: &PhantomSpec) -> Result<f64> {
    let count = |s: f64| base.scaled(s).voxel_count(spec);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    loop {
        match count(hi) {
            Some(n) if n as f64 >= target => break,
            Some(_) if hi < 8.0 => hi *= 1.5,
            _ => return Err(Error::Phantom("follow-up tumor does not fit on the grid".into())),
        }
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if count(mid).is_some_and(|n| n as f64 >= target) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn render_scan(spec: &PhantomSpec, tumor: &Tumor, anatomy: &Anatomy, rng: &mut impl Rng) -> Result<Scan> {
    let g = spec.geometry();
    let cm = CompartmentMapping::default();
    let center = spec.center_mm();
    let brain = spec.brain_radius_mm();
    let [nx, ny, nz] = spec.dims;
    let mut labels = vec![0i32; g.len()];
    let mut in_brain = vec![false; g.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = g.index(x, y, z);
                let p = position(spec, x, y, z);
                let r2: f64 = (0..3).map(|a| (p[a] - center[a]).powi(2)).sum();
                in_brain[i] = r2 <= brain * brain;
                labels[i] = tumor.label_at(p, &cm);
            }
        }
    }
    let compartment = |l: i32| match l {
        l if l == cm.necrotic => 1,
        l if l == cm.edema => 2,
        l if l == cm.enhancing => 3,
        _ => 0,
    };
    let wavelength = 6.0;
    let mut volumes = Vec::with_capacity(4);
    for m in Modality::ALL {
        let means = MEANS[m.index()];
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let noise = Normal::new(0.0, spec.noise_fraction * (hi - lo)).map_err(|e| Error::Phantom(e.to_string()))?;
        let mut data = vec![0.0; g.len()];
        for (i, d) in data.iter_mut().enumerate() {
            if !in_brain[i] && labels[i] == 0 {
                continue;
            }
            let c = compartment(labels[i]);
            let mut v = means[c];
            if c > 0 {
                let [x, y, z] = g.coords(i);
                let p = position(spec, x, y, z);
                let wave = ((p[0] + p[1] + p[2]) * std::f64::consts::TAU / wavelength + anatomy.texture_phase).sin();
                v += spec.texture_amplitude * (means[c] - means[0]) * wave;
            }
            v += noise.sample(rng);
            *d = v.round().clamp(1.0, f64::from(i16::MAX));
        }
        volumes.push(Volume::new(g.clone(), data, DataType::Int16)?);
    }
    let volumes: [Volume; 4] = volumes.try_into().expect("four modalities");
    Ok(Scan {
        volumes,
        labels: LabelMap::new(g, labels)?,
    })
}

/// One baseline/follow-up pair of `class` for a patient with `anatomy`.
pub fn gen_case_with(
    spec: &PhantomSpec,
    rng: &mut impl Rng,
    class: RanoLabel,
    anatomy: &Anatomy,
    key: CaseKey,
) -> Result<CasePair> {
    spec.validate()?;
    let center = spec.center_mm();
    let r = rng.random_range(spec.radius_mm[0]..=spec.radius_mm[1]);
    let base = Ellipsoid {
        center: [0, 1, 2].map(|a| center[a] + anatomy.offset_mm[a]),
        axes: anatomy.axis_ratios.map(|q| q * r),
    };
    let inner = |rng: &mut dyn rand::RngCore| Some((rng.random_range(0.6..=0.75), rng.random_range(0.3..=0.45)));
    let baseline = Tumor {
        edema: base,
        inner: inner(rng),
    };
    let n_base = base
        .voxel_count(spec)
        .ok_or_else(|| Error::Phantom("baseline tumor does not fit on the grid".into()))?;

    // Aim inside the regime, away from its ends, so voxelization cannot push
    // the measured change across a boundary.
    let [lo, hi] = spec.regime(class);
    let margin = 0.1 * (hi - lo);
    let change = rng.random_range(lo + margin..=hi - margin);
    let dir: [f64; 3] = loop {
        let v = [0; 3].map(|_| rng.random_range(-1.0..=1.0f64));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            break v.map(|x| x / n);
        }
    };
    let drift = rng.random_range(0.0..=spec.max_drift_mm);
    let moved = Ellipsoid {
        center: [0, 1, 2].map(|a| base.center[a] + drift * dir[a]),
        axes: base.axes,
    };
    let s = scale_for_count(&moved, n_base as f64 * (1.0 + change), spec)?;
    let followup = Tumor {
        edema: moved.scaled(s),
        inner: if class == RanoLabel::CR { None } else { inner(rng) },
    };
    let n_follow = followup.edema.voxel_count(spec).expect("checked by the scale search");
    let measured = n_follow as f64 / n_base as f64 - 1.0;
    if !(lo..=hi).contains(&measured) {
        return Err(Error::Phantom(format!(
            "{class}: measured change {measured:.3} escapes regime [{lo}, {hi}] on this grid"
        )));
    }
    let b = render_scan(spec, &baseline, anatomy, rng)?;
    let f = render_scan(spec, &followup, anatomy, rng)?;
    Ok(CasePair {
        key,
        baseline: b,
        followup: f,
        label: Some(class),
    })
}

/// One pair with a fresh random anatomy.
pub fn gen_case(spec: &PhantomSpec, rng: &mut impl Rng, class: RanoLabel) -> Result<CasePair> {
    let anatomy = Anatomy::random(rng);
    gen_case_with(spec, rng, class, &anatomy, CaseKey::new("P000", "week-000", "week-010"))
}

pub fn patient_id(p: usize) -> String {
    format!("P{p:03}")
}

fn session(week: u32) -> String {
    format!("week-{week:03}")
}

/// Class of every case in cohort order: an exactly balanced list, shuffled.
pub fn cohort_labels(spec: &PhantomSpec, n_cases: usize) -> Vec<RanoLabel> {
    let mut labels: Vec<RanoLabel> = (0..n_cases)
        .map(|i| RanoLabel::from_index(i % 4).expect("four classes"))
        .collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    labels
}

/// Independent stream per patient derived from the cohort seed.
fn patient_rng(spec: &PhantomSpec, p: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(p as u64 + 1);
    rng
}

/// All cases of patient `p` in memory. Case `j` spans weeks inside
/// `[26j, 26j + 20]`, so sessions never collide.
pub fn gen_patient(spec: &PhantomSpec, p: usize, classes: &[RanoLabel]) -> Result<Vec<CasePair>> {
    let mut rng = patient_rng(spec, p);
    let anatomy = Anatomy::random(&mut rng);
    classes
        .iter()
        .enumerate()
        .map(|(j, &class)| {
            let start = 26 * j as u32 + rng.random_range(0..=4);
            let gap = rng.random_range(6..=16);
            let key = CaseKey::new(patient_id(p), session(start), session(start + gap));
            gen_case_with(spec, &mut rng, class, &anatomy, key)
        })
        .collect()
}

fn write_scan(layout: &DatasetLayout, key: &CaseKey, session: &str, scan: &Scan) -> Result<()> {
    let dir = layout.session_dir(&key.patient_id, session);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for m in Modality::ALL {
        write_volume(scan.volume(m), dir.join(format!("{}.nii.gz", m.token())))?;
    }
    write_labelmap(&scan.labels, dir.join("seg.nii.gz"))
}

/// Writes a class-balanced cohort under `root` plus `cases.csv`, returning
/// the case records in file order.
pub fn gen_cohort(
    spec: &PhantomSpec,
    n_patients: usize,
    cases_per_patient: usize,
    root: impl AsRef<Path>,
) -> Result<Vec<CaseRecord>> {
    spec.validate()?;
    if n_patients == 0 || cases_per_patient == 0 {
        return Err(Error::Phantom("cohort needs at least one patient and one case".into()));
    }
    let root = root.as_ref();
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let layout = DatasetLayout::new(root);
    let labels = cohort_labels(spec, n_patients * cases_per_patient);
    let records: Vec<Vec<CaseRecord>> = (0..n_patients)
        .into_par_iter()
        .map(|p| {
            let classes = &labels[p * cases_per_patient..(p + 1) * cases_per_patient];
            let cases = gen_patient(spec, p, classes)?;
            cases
                .iter()
                .map(|cp| {
                    write_scan(&layout, &cp.key, &cp.key.baseline_session, &cp.baseline)?;
                    write_scan(&layout, &cp.key, &cp.key.followup_session, &cp.followup)?;
                    Ok(CaseRecord {
                        patient_id: cp.key.patient_id.clone(),
                        baseline_session: cp.key.baseline_session.clone(),
                        followup_session: cp.key.followup_session.clone(),
                        label: cp.label,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let records: Vec<CaseRecord> = records.into_iter().flatten().collect();
    write_case_list(&records, root.join(CASES_FILE))?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{compartment_volumes, volume_mm3, whole_tumor};

    fn small() -> PhantomSpec {
        PhantomSpec {
            dims: [40; 3],
            radius_mm: [6.0, 8.0],
            ..Default::default()
        }
    }

    #[test]
    fn regimes_hold_on_generated_pairs() {
        let spec = small();
        let cm = CompartmentMapping::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for class in [RanoLabel::CR, RanoLabel::PR, RanoLabel::SD, RanoLabel::PD] {
            for _ in 0..3 {
                let cp = gen_case(&spec, &mut rng, class).unwrap();
                cp.validate().unwrap();
                let vb = volume_mm3(&whole_tumor(&cp.baseline.labels, &cm));
                let vf = volume_mm3(&whole_tumor(&cp.followup.labels, &cm));
                let change = vf / vb - 1.0;
                let [lo, hi] = spec.regime(class);
                assert!((lo..=hi).contains(&change), "{class}: {change}");
                let cv = compartment_volumes(&cp.baseline.labels, &cp.followup.labels, &cm).unwrap();
                assert!(cv.enhancing.baseline_mm3 > 0.0);
                assert_eq!(cv.enhancing.followup_mm3 == 0.0, class == RanoLabel::CR);
            }
        }
    }

    #[test]
    fn same_seed_same_pair() {
        let spec = small();
        let a = gen_patient(&spec, 3, &[RanoLabel::PD]).unwrap();
        let b = gen_patient(&spec, 3, &[RanoLabel::PD]).unwrap();
        assert_eq!(a[0].baseline.volumes[1].data, b[0].baseline.volumes[1].data);
        assert_eq!(a[0].followup.labels, b[0].followup.labels);
    }

    #[test]
    fn labels_are_balanced() {
        let labels = cohort_labels(&PhantomSpec::default(), 202);
        let mut counts = [0usize; 4];
        for l in labels {
            counts[l.index()] += 1;
        }
        assert!(counts.iter().all(|&c| (50..=51).contains(&c)), "{counts:?}");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let overlap = PhantomSpec {
            sd: [-0.2, 0.5],
            ..Default::default()
        };
        assert!(overlap.validate().is_err());
        let tiny = PhantomSpec {
            dims: [16; 3],
            ..Default::default()
        };
        assert!(tiny.validate().is_err());
        let huge = PhantomSpec {
            dims: [32; 3],
            radius_mm: [14.0, 14.0],
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            gen_case(&huge, &mut rng, RanoLabel::PD),
            Err(Error::Phantom(_))
        ));
    }
}
