//! Per-case feature rows: radiomics over every (modality, timepoint, mask)
//! combination, longitudinal engineered features, and the optional deep block.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::case::{CaseKey, CasePair, Modality, RanoLabel, Timepoint};
use crate::error::{Error, Result};
use crate::mask::{
    centroid_shift_mm, compartment_volumes, growth_mask, label_mask, shrinkage_mask, whole_tumor, BinaryMask,
    Compartment, CompartmentMapping,
};
use crate::radiomics::{catalog, extract_with_shape, FeatureVector, MaskShape, RadiomicsConfig};

pub const DEFAULT_SESSION_PATTERN: &str = r"^week-(\d+)$";
pub const DEFAULT_DEEP_DIM: usize = 512;
pub const KEY_COLUMNS: [&str; 4] = ["patient_id", "baseline_session", "followup_session", "label"];
pub const DEEP_KEY_COLUMNS: [&str; 5] = [
    "patient_id",
    "baseline_session",
    "followup_session",
    "modality",
    "timepoint",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Original,
    Growth,
    Shrinkage,
}

impl MaskKind {
    pub const ALL: [MaskKind; 3] = [MaskKind::Original, MaskKind::Growth, MaskKind::Shrinkage];

    pub fn token(self) -> &'static str {
        match self {
            MaskKind::Original => "original",
            MaskKind::Growth => "growth",
            MaskKind::Shrinkage => "shrinkage",
        }
    }
}

/// Which mask the centroid shift is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidMask {
    #[default]
    WholeTumor,
    Enhancing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub radiomics: RadiomicsConfig,
    pub compartments: CompartmentMapping,
    pub centroid_mask: CentroidMask,
    pub session_pattern: String,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            radiomics: RadiomicsConfig::default(),
            compartments: CompartmentMapping::default(),
            centroid_mask: CentroidMask::default(),
            session_pattern: DEFAULT_SESSION_PATTERN.to_string(),
        }
    }
}

impl FeatureConfig {
    pub fn session_regex(&self) -> Result<Regex> {
        let re = Regex::new(&self.session_pattern)
            .map_err(|e| Error::InvalidInput(format!("session pattern {:?}: {e}", self.session_pattern)))?;
        if re.captures_len() < 2 {
            return Err(Error::InvalidInput(format!(
                "session pattern {:?} needs one capture group",
                self.session_pattern
            )));
        }
        Ok(re)
    }
}

fn session_week(session: &str, re: &Regex) -> Result<i64> {
    re.captures(session)
        .and_then(|c| c.get(1))
        .and_then(|m| m.as_str().parse().ok())
        .ok_or_else(|| Error::UnparseableSession(session.to_string()))
}

/// Follow-up week minus baseline week; must be positive.
pub fn time_gap_weeks(baseline: &str, followup: &str, re: &Regex) -> Result<f64> {
    let gap = session_week(followup, re)? - session_week(baseline, re)?;
    if gap <= 0 {
        return Err(Error::NonPositiveGap {
            baseline: baseline.to_string(),
            followup: followup.to_string(),
        });
    }
    Ok(gap as f64)
}

/// Engineered columns appended after the radiomics block.
pub fn engineered_columns() -> Vec<String> {
    let mut cols = vec![
        "centroid_shift_mm".to_string(),
        "centroid_empty_mask".to_string(),
        "time_gap_weeks".to_string(),
    ];
    for c in [Compartment::Necrotic, Compartment::Edema, Compartment::Enhancing] {
        for suffix in ["baseline_mm3", "followup_mm3", "relative_change"] {
            cols.push(format!("{}_{suffix}", c.name()));
        }
    }
    for c in [Compartment::Necrotic, Compartment::Edema, Compartment::Enhancing] {
        cols.push(format!("{}_new_lesion", c.name()));
    }
    cols
}

pub fn radiomics_column(m: Modality, t: Timepoint, k: MaskKind, feature_key: &str) -> String {
    format!("{}_{}_{}_{feature_key}", m.token(), t.token(), k.token())
}

/// Handcrafted column names in row order.
pub fn handcrafted_columns() -> Vec<String> {
    let keys = catalog().keys();
    let mut cols = Vec::with_capacity(keys.len() * 24 + 15);
    for m in Modality::ALL {
        for t in Timepoint::ALL {
            for k in MaskKind::ALL {
                for key in &keys {
                    cols.push(radiomics_column(m, t, k, key));
                }
            }
        }
    }
    cols.extend(engineered_columns());
    cols
}

pub fn deep_columns(dim: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(8 * dim + 1);
    for m in Modality::ALL {
        for t in Timepoint::ALL {
            for k in 0..dim {
                cols.push(format!("deep_{}_{}_{k}", m.token(), t.token()));
            }
        }
    }
    cols.push("handcrafted_only".to_string());
    cols
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub key: CaseKey,
    pub label: Option<RanoLabel>,
    pub values: Vec<f64>,
}

/// The four distinct masks of a case.
pub struct CaseMasks {
    pub baseline: BinaryMask,
    pub followup: BinaryMask,
    pub growth: BinaryMask,
    pub shrinkage: BinaryMask,
}

impl CaseMasks {
    pub fn new(cp: &CasePair, cm: &CompartmentMapping) -> Result<Self> {
        let baseline = whole_tumor(&cp.baseline.labels, cm);
        let followup = whole_tumor(&cp.followup.labels, cm);
        let growth = growth_mask(&baseline, &followup)?;
        let shrinkage = shrinkage_mask(&baseline, &followup)?;
        Ok(CaseMasks {
            baseline,
            followup,
            growth,
            shrinkage,
        })
    }

    pub fn get(&self, t: Timepoint, k: MaskKind) -> &BinaryMask {
        match (k, t) {
            (MaskKind::Original, Timepoint::Baseline) => &self.baseline,
            (MaskKind::Original, Timepoint::Followup) => &self.followup,
            (MaskKind::Growth, _) => &self.growth,
            (MaskKind::Shrinkage, _) => &self.shrinkage,
        }
    }
}

/// Radiomics block plus engineered features for one case.
pub fn assemble_handcrafted(cp: &CasePair, config: &FeatureConfig) -> Result<FeatureRow> {
    cp.validate()?;
    let re = config.session_regex()?;
    let gap = time_gap_weeks(&cp.key.baseline_session, &cp.key.followup_session, &re)?;
    let masks = CaseMasks::new(cp, &config.compartments)?;

    let distinct = [&masks.baseline, &masks.followup, &masks.growth, &masks.shrinkage];
    let shapes: Vec<Option<MaskShape>> = distinct.par_iter().map(|m| MaskShape::compute(m)).collect();
    let shape_of = |t: Timepoint, k: MaskKind| -> &Option<MaskShape> {
        match (k, t) {
            (MaskKind::Original, Timepoint::Baseline) => &shapes[0],
            (MaskKind::Original, Timepoint::Followup) => &shapes[1],
            (MaskKind::Growth, _) => &shapes[2],
            (MaskKind::Shrinkage, _) => &shapes[3],
        }
    };

    let combos: Vec<(Modality, Timepoint, MaskKind)> = Modality::ALL
        .into_iter()
        .flat_map(|m| {
            Timepoint::ALL
                .into_iter()
                .flat_map(move |t| MaskKind::ALL.map(|k| (m, t, k)))
        })
        .collect();
    let blocks: Vec<FeatureVector> = combos
        .par_iter()
        .map(|&(m, t, k)| match shape_of(t, k) {
            None => Ok(FeatureVector::sentinel()),
            Some(shape) => extract_with_shape(cp.scan(t).volume(m), masks.get(t, k), shape, &config.radiomics),
        })
        .collect::<Result<_>>()?;

    let mut values: Vec<f64> = Vec::with_capacity(blocks.len() * catalog().len() + 15);
    for b in &blocks {
        values.extend_from_slice(&b.values);
    }

    let (cb, cf) = match config.centroid_mask {
        CentroidMask::WholeTumor => (masks.baseline.clone(), masks.followup.clone()),
        CentroidMask::Enhancing => (
            label_mask(&cp.baseline.labels, config.compartments.enhancing),
            label_mask(&cp.followup.labels, config.compartments.enhancing),
        ),
    };
    let shift = centroid_shift_mm(&cb, &cf)?;
    values.push(shift.mm);
    values.push(f64::from(u8::from(shift.empty_mask)));
    values.push(gap);
    let vols = compartment_volumes(&cp.baseline.labels, &cp.followup.labels, &config.compartments)?;
    for (_, c) in vols.iter() {
        values.extend([c.baseline_mm3, c.followup_mm3, c.relative_change]);
    }
    for (_, c) in vols.iter() {
        values.push(f64::from(u8::from(c.new_lesion)));
    }
    debug_assert_eq!(values.len(), handcrafted_columns().len());
    Ok(FeatureRow {
        key: cp.key.clone(),
        label: cp.label,
        values,
    })
}

/// Deep vectors keyed by (case, modality, timepoint).
#[derive(Debug, Clone, PartialEq)]
pub struct DeepFeatureTable {
    pub dim: usize,
    pub rows: BTreeMap<(CaseKey, Modality, Timepoint), Vec<f64>>,
}

impl DeepFeatureTable {
    pub fn new(dim: usize) -> Self {
        DeepFeatureTable {
            dim,
            rows: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: CaseKey, m: Modality, t: Timepoint, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DeepFeatures(format!(
                "vector for {key} {m} {} has {} values, expected {}",
                t.token(),
                v.len(),
                self.dim
            )));
        }
        if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::DeepFeatures(format!(
                "non-finite f_{i} = {x} for {key} {m} {}",
                t.token()
            )));
        }
        let desc = format!("{key} {m} {}", t.token());
        if self.rows.insert((key, m, t), v).is_some() {
            return Err(Error::DeepFeatures(format!("duplicate key {desc}")));
        }
        Ok(())
    }

    pub fn get(&self, key: &CaseKey, m: Modality, t: Timepoint) -> Option<&Vec<f64>> {
        self.rows.get(&(key.clone(), m, t))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Reads and validates the deep-feature interchange CSV.
pub fn load_deep_features(path: impl AsRef<Path>) -> Result<DeepFeatureTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(BufReader::new(file));
    let header = rdr.headers()?.clone();
    for (i, want) in DEEP_KEY_COLUMNS.iter().enumerate() {
        if header.get(i) != Some(want) {
            return Err(Error::DeepFeatures(format!(
                "header column {i} is {:?}, expected {want:?}",
                header.get(i).unwrap_or("")
            )));
        }
    }
    let dim = header.len() - DEEP_KEY_COLUMNS.len();
    if dim == 0 {
        return Err(Error::DeepFeatures("no feature columns".into()));
    }
    for k in 0..dim {
        let name = &header[DEEP_KEY_COLUMNS.len() + k];
        if name != format!("f_{k}") {
            return Err(Error::DeepFeatures(format!(
                "feature column {k} is {name:?}, expected \"f_{k}\""
            )));
        }
    }
    let mut table = DeepFeatureTable::new(dim);
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::DeepFeatures(format!(
                "row {row}: {} fields, expected {}",
                rec.len(),
                header.len()
            )));
        }
        let key = CaseKey::new(&rec[0], &rec[1], &rec[2]);
        let m: Modality = rec[3]
            .parse()
            .map_err(|e| Error::DeepFeatures(format!("row {row}: {e}")))?;
        let t: Timepoint = rec[4]
            .parse()
            .map_err(|e| Error::DeepFeatures(format!("row {row}: {e}")))?;
        let mut v = Vec::with_capacity(dim);
        for k in 0..dim {
            let cell = &rec[DEEP_KEY_COLUMNS.len() + k];
            let x: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::DeepFeatures(format!("row {row}: f_{k} = {cell:?} is not a number")))?;
            if !x.is_finite() {
                return Err(Error::DeepFeatures(format!("row {row}: f_{k} is non-finite ({cell})")));
            }
            v.push(x);
        }
        table
            .insert(key, m, t, v)
            .map_err(|e| Error::DeepFeatures(format!("row {row}: {e}")))?;
    }
    Ok(table)
}

pub fn write_deep_features(table: &DeepFeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<String> = DEEP_KEY_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..table.dim).map(|k| format!("f_{k}")));
    w.write_record(&header)?;
    for ((key, m, t), v) in &table.rows {
        let mut rec = vec![
            key.patient_id.clone(),
            key.baseline_session.clone(),
            key.followup_session.clone(),
            m.token().to_string(),
            t.token().to_string(),
        ];
        rec.extend(v.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Appends the deep block and the `handcrafted_only` flag. In strict mode a
/// missing vector is an error; otherwise the block is zero-filled and flagged.
pub fn fuse(row: &FeatureRow, deep: &DeepFeatureTable, strict: bool) -> Result<FeatureRow> {
    let mut values = row.values.clone();
    values.reserve(8 * deep.dim + 1);
    let mut missing = None;
    for m in Modality::ALL {
        for t in Timepoint::ALL {
            if deep.get(&row.key, m, t).is_none() {
                missing.get_or_insert((m, t));
            }
        }
    }
    if let Some((m, t)) = missing {
        if strict {
            return Err(Error::DeepFeatures(format!(
                "missing {m} {} vector for {}",
                t.token(),
                row.key
            )));
        }
        log::warn!(
            "{}: {m} {} deep vector missing, row marked handcrafted-only",
            row.key,
            t.token()
        );
        values.extend(std::iter::repeat_n(0.0, 8 * deep.dim));
        values.push(1.0);
    } else {
        for m in Modality::ALL {
            for t in Timepoint::ALL {
                values.extend_from_slice(deep.get(&row.key, m, t).expect("checked above"));
            }
        }
        values.push(0.0);
    }
    Ok(FeatureRow {
        key: row.key.clone(),
        label: row.label,
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub columns: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    /// Checks every row against the column set and sorts by case key.
    pub fn new(columns: Vec<String>, mut rows: Vec<FeatureRow>) -> Result<Self> {
        for r in &rows {
            if r.values.len() != columns.len() {
                return Err(Error::FeatureTable(format!(
                    "row {} has {} values, table has {} columns",
                    r.key,
                    r.values.len(),
                    columns.len()
                )));
            }
        }
        rows.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(FeatureTable { columns, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Row-major matrix of the feature values.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    pub fn labels(&self) -> Result<Vec<RanoLabel>> {
        self.rows
            .iter()
            .map(|r| {
                r.label
                    .ok_or_else(|| Error::FeatureTable(format!("row {} has no label", r.key)))
            })
            .collect()
    }
}

/// Writes the table; values use the shortest representation that parses
/// back to the same `f64`.
pub fn write_feature_table(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<&str> = KEY_COLUMNS.to_vec();
    header.extend(table.columns.iter().map(String::as_str));
    w.write_record(&header)?;
    for r in &table.rows {
        if r.values.len() != table.columns.len() {
            return Err(Error::FeatureTable(format!(
                "row {} does not match the table schema",
                r.key
            )));
        }
        let mut rec = vec![
            r.key.patient_id.clone(),
            r.key.baseline_session.clone(),
            r.key.followup_session.clone(),
            r.label.map(|l| l.to_string()).unwrap_or_default(),
        ];
        rec.extend(r.values.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a table in file order.
pub fn read_feature_table(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(BufReader::new(file));
    let header = rdr.headers()?.clone();
    for (i, want) in KEY_COLUMNS.iter().enumerate() {
        if header.get(i) != Some(want) {
            return Err(Error::FeatureTable(format!("header column {i} should be {want:?}")));
        }
    }
    let columns: Vec<String> = header.iter().skip(KEY_COLUMNS.len()).map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != header.len() {
            return Err(Error::FeatureTable(format!(
                "row {row}: {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        let label = match rec[3].trim() {
            "" => None,
            s => Some(s.parse().map_err(|e| Error::FeatureTable(format!("row {row}: {e}")))?),
        };
        let values = rec
            .iter()
            .skip(KEY_COLUMNS.len())
            .enumerate()
            .map(|(k, s)| {
                s.parse::<f64>()
                    .map_err(|_| Error::FeatureTable(format!("row {row}: column {} = {s:?}", columns[k])))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(FeatureRow {
            key: CaseKey::new(&rec[0], &rec[1], &rec[2]),
            label,
            values,
        });
    }
    Ok(FeatureTable { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re() -> Regex {
        FeatureConfig::default().session_regex().unwrap()
    }

    #[test]
    fn gaps() {
        assert_eq!(time_gap_weeks("week-000", "week-012", &re()).unwrap(), 12.0);
        assert_eq!(time_gap_weeks("week-044", "week-046", &re()).unwrap(), 2.0);
        assert!(matches!(
            time_gap_weeks("week-012", "week-012", &re()),
            Err(Error::NonPositiveGap { .. })
        ));
        assert!(matches!(
            time_gap_weeks("day-1", "week-012", &re()),
            Err(Error::UnparseableSession(_))
        ));
    }

    #[test]
    fn custom_session_pattern() {
        let cfg = FeatureConfig {
            session_pattern: r"^ses(\d+)$".into(),
            ..Default::default()
        };
        assert_eq!(
            time_gap_weeks("ses3", "ses10", &cfg.session_regex().unwrap()).unwrap(),
            7.0
        );
        let bad = FeatureConfig {
            session_pattern: "^ses$".into(),
            ..Default::default()
        };
        assert!(bad.session_regex().is_err());
    }

    #[test]
    fn column_layout() {
        let cols = handcrafted_columns();
        assert_eq!(cols.len(), 177 * 24 + 15);
        assert_eq!(cols[0], "t1_baseline_original_3d_firstorder_mean");
        assert_eq!(cols[177], "t1_baseline_growth_3d_firstorder_mean");
        assert_eq!(cols[177 * 24], "centroid_shift_mm");
        assert_eq!(deep_columns(512).len(), 4097);
        assert_eq!(deep_columns(2)[2], "deep_t1_followup_0");
    }

    #[test]
    fn fuse_strict_and_permissive() {
        let key = CaseKey::new("p", "week-000", "week-004");
        let row = FeatureRow {
            key: key.clone(),
            label: Some(RanoLabel::SD),
            values: vec![1.0, 2.0],
        };
        let mut deep = DeepFeatureTable::new(3);
        for m in Modality::ALL {
            for t in Timepoint::ALL {
                if (m, t) != (Modality::T1c, Timepoint::Followup) {
                    deep.insert(key.clone(), m, t, vec![m.index() as f64, 0.5, -1.0])
                        .unwrap();
                }
            }
        }
        assert!(fuse(&row, &deep, true).is_err());
        let loose = fuse(&row, &deep, false).unwrap();
        assert_eq!(loose.values.len(), 2 + 24 + 1);
        assert_eq!(*loose.values.last().unwrap(), 1.0);
        deep.insert(key.clone(), Modality::T1c, Timepoint::Followup, vec![9.0; 3])
            .unwrap();
        let full = fuse(&row, &deep, true).unwrap();
        assert_eq!(full.values.len(), 27);
        assert_eq!(&full.values[2..5], &[0.0, 0.5, -1.0]);
        assert_eq!(&full.values[11..14], &[9.0; 3]);
        assert_eq!(*full.values.last().unwrap(), 0.0);
    }

    #[test]
    fn schema_drift_is_rejected() {
        let key = CaseKey::new("p", "week-000", "week-004");
        let rows = vec![FeatureRow {
            key,
            label: None,
            values: vec![1.0],
        }];
        assert!(FeatureTable::new(vec!["a".into(), "b".into()], rows).is_err());
    }
}
