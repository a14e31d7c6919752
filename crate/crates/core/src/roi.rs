//! 2D patch export around the largest-area axial tumor slice.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::case::{CaseKey, CasePair, Modality, RanoLabel, Timepoint};
use crate::error::{Error, Result};
use crate::mask::{whole_tumor, BinaryMask, CompartmentMapping};
use crate::nifti::Volume;
use crate::radiomics::largest_area_slice;

pub const PATCH_SIZE: usize = 128;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RoiPatch {
    pub case_id: String,
    pub modality: Modality,
    pub timepoint: Timepoint,
    pub slice_index: usize,
    /// (row, col) = (y, x) of the patch center in the source slice.
    pub center: (usize, usize),
    /// Row-major `PATCH_SIZE × PATCH_SIZE`.
    pub pixels: Vec<f32>,
}

impl RoiPatch {
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.to_le_bytes()).collect()
    }
}

/// Axial slice with the largest mask area, lowest index on ties.
pub fn select_slice(m: &BinaryMask) -> Result<usize> {
    largest_area_slice(m).ok_or_else(|| Error::EmptyMask("slice selection".into()))
}

/// Rounded in-slice centroid as (row, col), or `None` for an empty slice.
pub fn slice_center(m: &BinaryMask, z: usize) -> Option<(usize, usize)> {
    let [nx, ny, _] = m.dims();
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for y in 0..ny {
        for x in 0..nx {
            if m.at(x, y, z) {
                sx += x as f64;
                sy += y as f64;
                n += 1;
            }
        }
    }
    (n > 0).then(|| ((sy / n as f64).round() as usize, (sx / n as f64).round() as usize))
}

/// Window of `PATCH_SIZE²` pixels around `center`, zero outside the slice.
pub fn crop_window(v: &Volume, z: usize, center: (usize, usize)) -> Vec<f32> {
    let [nx, ny, _] = v.dims();
    let half = (PATCH_SIZE / 2) as isize;
    let mut out = vec![0.0f32; PATCH_SIZE * PATCH_SIZE];
    for r in 0..PATCH_SIZE {
        let y = center.0 as isize - half + r as isize;
        if y < 0 || y >= ny as isize {
            continue;
        }
        for c in 0..PATCH_SIZE {
            let x = center.1 as isize - half + c as isize;
            if x >= 0 && x < nx as isize {
                out[r * PATCH_SIZE + c] = v.data[v.geometry.index(x as usize, y as usize, z)] as f32;
            }
        }
    }
    out
}

/// Patch centered on the in-slice mask centroid of slice `z`; an empty
/// slice centers the window on the image.
pub fn crop_roi(v: &Volume, m: &BinaryMask, z: usize) -> Result<(Vec<f32>, (usize, usize))> {
    v.geometry.ensure_matches(m.geometry(), "ROI mask")?;
    let [nx, ny, nz] = v.dims();
    if z >= nz {
        return Err(Error::InvalidInput(format!("slice {z} outside 0..{nz}")));
    }
    let center = slice_center(m, z).unwrap_or((ny / 2, nx / 2));
    Ok((crop_window(v, z, center), center))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub modality: Modality,
    pub timepoint: Timepoint,
    /// Relative to the manifest's directory.
    pub path: String,
    pub slice_index: usize,
    pub center: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCase {
    pub case_id: String,
    pub patient_id: String,
    pub baseline_session: String,
    pub followup_session: String,
    pub label: Option<RanoLabel>,
    pub patches: Vec<PatchEntry>,
}

impl ManifestCase {
    pub fn key(&self) -> CaseKey {
        CaseKey::new(&self.patient_id, &self.baseline_session, &self.followup_session)
    }
}

/// A case left out of the export, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCase {
    pub case_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiManifest {
    pub version: u32,
    pub patch_size: usize,
    pub cases: Vec<ManifestCase>,
    #[serde(default)]
    pub skipped: Vec<SkippedCase>,
}

impl RoiManifest {
    pub fn new(mut cases: Vec<ManifestCase>, mut skipped: Vec<SkippedCase>) -> Self {
        cases.sort_by_key(|c| c.key());
        skipped.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        RoiManifest {
            version: MANIFEST_VERSION,
            patch_size: PATCH_SIZE,
            cases,
            skipped,
        }
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self)?;
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: RoiManifest = serde_json::from_str(&text)?;
        if m.version != MANIFEST_VERSION || m.patch_size != PATCH_SIZE {
            return Err(Error::InvalidInput(format!(
                "unsupported manifest version {} / patch size {}",
                m.version, m.patch_size
            )));
        }
        Ok(m)
    }
}

/// Slice and center per timepoint. A timepoint with an empty tumor mask
/// borrows the other timepoint's slice and center; `None` if both are empty.
pub fn case_anchors(cp: &CasePair, cm: &CompartmentMapping) -> Option<[(usize, (usize, usize)); 2]> {
    let masks = [
        whole_tumor(&cp.baseline.labels, cm),
        whole_tumor(&cp.followup.labels, cm),
    ];
    let own: Vec<Option<(usize, (usize, usize))>> = masks
        .iter()
        .map(|m| {
            let z = largest_area_slice(m)?;
            Some((z, slice_center(m, z)?))
        })
        .collect();
    match (own[0], own[1]) {
        (Some(a), Some(b)) => Some([a, b]),
        (Some(a), None) => Some([a, a]),
        (None, Some(b)) => Some([b, b]),
        (None, None) => None,
    }
}

/// Crops all eight patches of a case. Volumes are used as given, so callers
/// pass standardized scans.
pub fn case_patches(cp: &CasePair, cm: &CompartmentMapping) -> Result<Vec<RoiPatch>> {
    cp.validate()?;
    let anchors = case_anchors(cp, cm).ok_or_else(|| Error::EmptyMask(format!("tumor masks of {}", cp.key)))?;
    let case_id = cp.key.case_id();
    let mut out = Vec::with_capacity(8);
    for m in Modality::ALL {
        for (ti, t) in Timepoint::ALL.into_iter().enumerate() {
            let (z, center) = anchors[ti];
            out.push(RoiPatch {
                case_id: case_id.clone(),
                modality: m,
                timepoint: t,
                slice_index: z,
                center,
                pixels: crop_window(cp.scan(t).volume(m), z, center),
            });
        }
    }
    Ok(out)
}

/// Writes the eight `.f32` patch files under `out_dir/<case_id>/` and
/// returns the manifest entry.
pub fn export_case(cp: &CasePair, cm: &CompartmentMapping, out_dir: impl AsRef<Path>) -> Result<ManifestCase> {
    let patches = case_patches(cp, cm)?;
    let case_id = cp.key.case_id();
    let dir = out_dir.as_ref().join(&case_id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut entries = Vec::with_capacity(patches.len());
    for p in &patches {
        let name = format!("{}_{}.f32", p.modality.token(), p.timepoint.token());
        let path = dir.join(&name);
        fs::write(&path, p.to_le_bytes()).map_err(|e| Error::io(&path, e))?;
        entries.push(PatchEntry {
            modality: p.modality,
            timepoint: p.timepoint,
            path: format!("{case_id}/{name}"),
            slice_index: p.slice_index,
            center: [p.center.0, p.center.1],
        });
    }
    Ok(ManifestCase {
        case_id,
        patient_id: cp.key.patient_id.clone(),
        baseline_session: cp.key.baseline_session.clone(),
        followup_session: cp.key.followup_session.clone(),
        label: cp.label,
        patches: entries,
    })
}

/// Reads one patch file back as row-major f32 pixels.
pub fn read_patch(path: impl AsRef<Path>) -> Result<Vec<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != PATCH_SIZE * PATCH_SIZE * 4 {
        return Err(Error::TruncatedData {
            offset: 0,
            needed: PATCH_SIZE * PATCH_SIZE * 4,
            available: bytes.len(),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}
