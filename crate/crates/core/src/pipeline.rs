//! Cohort-level orchestration: template pass, per-case extraction, ROI export.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use crate::case::{CaseKey, CasePair, CaseRecord, DatasetLayout, Modality, Scan};
use crate::error::{Error, Result};
use crate::fusion::{
    assemble_handcrafted, deep_columns, fuse, handcrafted_columns, DeepFeatureTable, FeatureConfig, FeatureRow,
    FeatureTable,
};
use crate::intensity::{standardize, volume_landmarks, IntensityTemplate};
use crate::mask::{BinaryMask, CompartmentMapping};
use crate::roi::{export_case, RoiManifest, SkippedCase};

pub const TEMPLATES_FILE: &str = "templates.json";

/// One intensity template per modality, in `Modality::ALL` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Templates(pub [IntensityTemplate; 4]);

impl Templates {
    pub fn get(&self, m: Modality) -> &IntensityTemplate {
        &self.0[m.index()]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(&self.0)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let list: Vec<IntensityTemplate> = serde_json::from_str(&text)?;
        let arr: [IntensityTemplate; 4] = list
            .try_into()
            .map_err(|_| Error::InvalidInput("template file must hold four modalities".into()))?;
        for (t, m) in arr.iter().zip(Modality::ALL) {
            if t.modality != m {
                return Err(Error::InvalidInput(format!(
                    "template order: expected {m}, found {}",
                    t.modality
                )));
            }
            t.validate()?;
        }
        Ok(Templates(arr))
    }
}

/// Splits records into loadable ones and those with a missing input file.
pub fn partition_available(layout: &DatasetLayout, records: &[CaseRecord]) -> (Vec<CaseRecord>, Vec<SkippedCase>) {
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for r in records {
        match layout.first_missing(&r.key()) {
            None => ok.push(r.clone()),
            Some(what) => {
                warn!(case:% = r.key(); "skipped: missing {what}");
                skipped.push(SkippedCase {
                    case_id: r.key().case_id(),
                    reason: format!("missing {what}"),
                });
            }
        }
    }
    (ok, skipped)
}

/// Cohort template from every distinct scan referenced by `records`, using
/// the non-zero voxels of each volume.
pub fn build_templates(layout: &DatasetLayout, records: &[CaseRecord]) -> Result<Templates> {
    let sessions: BTreeSet<(CaseKey, String)> = records
        .iter()
        .flat_map(|r| {
            let k = r.key();
            [
                (k.clone(), k.baseline_session.clone()),
                (k.clone(), k.followup_session.clone()),
            ]
        })
        .map(|(k, s)| (CaseKey::new(&k.patient_id, "", ""), s))
        .collect();
    if sessions.is_empty() {
        return Err(Error::InvalidInput("no scans to build intensity templates from".into()));
    }
    let sets: Vec<[Vec<f64>; 4]> = sessions
        .par_iter()
        .map(|(k, s)| -> Result<[Vec<f64>; 4]> {
            let scan = layout.load_scan(k, s)?;
            let mut out: [Vec<f64>; 4] = Default::default();
            for m in Modality::ALL {
                let v = scan.volume(m);
                out[m.index()] = volume_landmarks(v, &BinaryMask::nonzero(v))?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut templates = Vec::with_capacity(4);
    for m in Modality::ALL {
        let per: Vec<Vec<f64>> = sets.iter().map(|s| s[m.index()].clone()).collect();
        templates.push(IntensityTemplate::from_landmark_sets(m, &per)?);
    }
    Ok(Templates(templates.try_into().expect("four modalities")))
}

fn standardize_scan(scan: &Scan, t: &Templates) -> Result<Scan> {
    let mut vols = Vec::with_capacity(4);
    for m in Modality::ALL {
        vols.push(standardize(scan.volume(m), t.get(m))?);
    }
    Ok(Scan {
        volumes: vols.try_into().expect("four modalities"),
        labels: scan.labels.clone(),
    })
}

/// Histogram matching then z-scoring of all eight volumes.
pub fn standardize_pair(cp: &CasePair, t: &Templates) -> Result<CasePair> {
    Ok(CasePair {
        key: cp.key.clone(),
        baseline: standardize_scan(&cp.baseline, t)?,
        followup: standardize_scan(&cp.followup, t)?,
        label: cp.label,
    })
}

/// Standardized handcrafted row for one case.
pub fn extract_case(cp: &CasePair, t: &Templates, cfg: &FeatureConfig) -> Result<FeatureRow> {
    let start = Instant::now();
    let row = assemble_handcrafted(&standardize_pair(cp, t)?, cfg)?;
    info!(case:% = cp.key, elapsed_ms = start.elapsed().as_millis() as u64; "case extracted");
    Ok(row)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseFailure {
    pub key: CaseKey,
    pub error: String,
}

#[derive(Debug)]
pub struct ExtractOutcome {
    pub table: FeatureTable,
    pub skipped: Vec<SkippedCase>,
    pub failures: Vec<CaseFailure>,
}

/// Deep block to append after the handcrafted columns.
pub struct DeepInput<'a> {
    pub table: &'a DeepFeatureTable,
    pub strict: bool,
}

/// Extracts every available case. Cases that fail are logged and reported,
/// not fatal; the caller decides whether failures abort the run.
pub fn extract_cohort(
    layout: &DatasetLayout,
    records: &[CaseRecord],
    templates: &Templates,
    cfg: &FeatureConfig,
    deep: Option<DeepInput<'_>>,
) -> Result<ExtractOutcome> {
    let (ok, skipped) = partition_available(layout, records);
    let results: Vec<(CaseKey, Result<FeatureRow>)> = ok
        .par_iter()
        .map(|r| {
            let row = layout
                .load_case(r)
                .and_then(|cp| extract_case(&cp, templates, cfg))
                .and_then(|row| match &deep {
                    Some(d) => fuse(&row, d.table, d.strict),
                    None => Ok(row),
                });
            (r.key(), row)
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (key, res) in results {
        match res {
            Ok(row) => rows.push(row),
            Err(e) => {
                warn!(case:% = key; "failed: {e}");
                failures.push(CaseFailure {
                    key,
                    error: e.to_string(),
                });
            }
        }
    }
    let mut columns = handcrafted_columns();
    if let Some(d) = &deep {
        columns.extend(deep_columns(d.table.dim));
    }
    Ok(ExtractOutcome {
        table: FeatureTable::new(columns, rows)?,
        skipped,
        failures,
    })
}

#[derive(Debug)]
pub struct RoiOutcome {
    pub manifest: RoiManifest,
    pub failures: Vec<CaseFailure>,
}

/// Writes standardized ROI patches for every available case plus the
/// manifest. Cases whose tumor masks are empty at both timepoints are listed
/// as skipped.
pub fn export_rois(
    layout: &DatasetLayout,
    records: &[CaseRecord],
    templates: &Templates,
    cm: &CompartmentMapping,
    out_dir: impl AsRef<Path>,
) -> Result<RoiOutcome> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (ok, mut skipped) = partition_available(layout, records);
    let results: Vec<(CaseKey, Result<_>)> = ok
        .par_iter()
        .map(|r| {
            let res = layout
                .load_case(r)
                .and_then(|cp| standardize_pair(&cp, templates))
                .and_then(|cp| export_case(&cp, cm, out_dir));
            (r.key(), res)
        })
        .collect();
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    for (key, res) in results {
        match res {
            Ok(c) => cases.push(c),
            Err(Error::EmptyMask(what)) => {
                warn!(case:% = key; "skipped: empty {what}");
                skipped.push(SkippedCase {
                    case_id: key.case_id(),
                    reason: format!("empty {what}"),
                });
            }
            Err(e) => {
                warn!(case:% = key; "failed: {e}");
                failures.push(CaseFailure {
                    key,
                    error: e.to_string(),
                });
            }
        }
    }
    let manifest = RoiManifest::new(cases, skipped);
    manifest.write(out_dir)?;
    Ok(RoiOutcome { manifest, failures })
}
