//! Case pairs and the on-disk cohort layout
//! `<root>/<patient>/<session>/{t1,t1c,t2,flair,seg}.nii.gz` with a
//! `cases.csv` listing `patient_id,baseline_session,followup_session,label`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nifti::{read_labelmap, read_volume, LabelMap, Volume};

pub const CASES_FILE: &str = "cases.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    T1,
    T1c,
    T2,
    Flair,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::T1, Modality::T1c, Modality::T2, Modality::Flair];

    /// Lower-case token used in file names and column names.
    pub fn token(self) -> &'static str {
        match self {
            Modality::T1 => "t1",
            Modality::T1c => "t1c",
            Modality::T2 => "t2",
            Modality::Flair => "flair",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::T1 => "T1",
            Modality::T1c => "T1c",
            Modality::T2 => "T2",
            Modality::Flair => "FLAIR",
        })
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL
            .into_iter()
            .find(|m| m.token().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown modality {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Timepoint {
    Baseline,
    Followup,
}

impl Timepoint {
    pub const ALL: [Timepoint; 2] = [Timepoint::Baseline, Timepoint::Followup];

    pub fn token(self) -> &'static str {
        match self {
            Timepoint::Baseline => "baseline",
            Timepoint::Followup => "followup",
        }
    }
}

impl FromStr for Timepoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Timepoint::Baseline),
            "followup" | "follow-up" => Ok(Timepoint::Followup),
            _ => Err(Error::InvalidInput(format!("unknown timepoint {s:?}"))),
        }
    }
}

/// The four response categories, in class-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RanoLabel {
    CR,
    PR,
    SD,
    PD,
}

impl RanoLabel {
    pub const ALL: [RanoLabel; 4] = [RanoLabel::CR, RanoLabel::PR, RanoLabel::SD, RanoLabel::PD];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        RanoLabel::ALL.get(i).copied()
    }
}

impl fmt::Display for RanoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for RanoLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CR" => Ok(RanoLabel::CR),
            "PR" => Ok(RanoLabel::PR),
            "SD" => Ok(RanoLabel::SD),
            "PD" => Ok(RanoLabel::PD),
            _ => Err(Error::InvalidInput(format!("unknown RANO label {s:?}"))),
        }
    }
}

/// Identifies one baseline/follow-up pair. Orders by patient then sessions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CaseKey {
    pub patient_id: String,
    pub baseline_session: String,
    pub followup_session: String,
}

impl CaseKey {
    pub fn new(patient: impl Into<String>, baseline: impl Into<String>, followup: impl Into<String>) -> Self {
        CaseKey {
            patient_id: patient.into(),
            baseline_session: baseline.into(),
            followup_session: followup.into(),
        }
    }

    /// Flat identifier safe for file names.
    pub fn case_id(&self) -> String {
        format!(
            "{}_{}_{}",
            self.patient_id, self.baseline_session, self.followup_session
        )
    }
}

impl fmt::Display for CaseKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}->{}",
            self.patient_id, self.baseline_session, self.followup_session
        )
    }
}

/// All scans of one timepoint, indexed by `Modality::index`.
#[derive(Debug, Clone)]
pub struct Scan {
    pub volumes: [Volume; 4],
    pub labels: LabelMap,
}

impl Scan {
    pub fn volume(&self, m: Modality) -> &Volume {
        &self.volumes[m.index()]
    }
}

#[derive(Debug, Clone)]
pub struct CasePair {
    pub key: CaseKey,
    pub baseline: Scan,
    pub followup: Scan,
    pub label: Option<RanoLabel>,
}

impl CasePair {
    pub fn scan(&self, t: Timepoint) -> &Scan {
        match t {
            Timepoint::Baseline => &self.baseline,
            Timepoint::Followup => &self.followup,
        }
    }

    /// Every grid must match the baseline T1 grid.
    pub fn validate(&self) -> Result<()> {
        let reference = &self.baseline.volumes[0].geometry;
        for t in Timepoint::ALL {
            let scan = self.scan(t);
            for m in Modality::ALL {
                reference.ensure_matches(&scan.volume(m).geometry, &format!("{} {} {}", self.key, t.token(), m))?;
            }
            reference.ensure_matches(&scan.labels.geometry, &format!("{} {} seg", self.key, t.token()))?;
        }
        Ok(())
    }
}

/// A row of `cases.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub patient_id: String,
    pub baseline_session: String,
    pub followup_session: String,
    #[serde(default)]
    pub label: Option<RanoLabel>,
}

impl CaseRecord {
    pub fn key(&self) -> CaseKey {
        CaseKey::new(&self.patient_id, &self.baseline_session, &self.followup_session)
    }
}

pub fn read_case_list(path: impl AsRef<Path>) -> Result<Vec<CaseRecord>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn write_case_list(records: &[CaseRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(())
}

/// Locates scan files inside a cohort root.
#[derive(Debug, Clone)]
pub struct DatasetLayout {
    pub root: PathBuf,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DatasetLayout { root: root.into() }
    }

    pub fn session_dir(&self, patient: &str, session: &str) -> PathBuf {
        self.root.join(patient).join(session)
    }

    /// Prefers `<name>.nii.gz`, falls back to `<name>.nii`.
    fn find(&self, patient: &str, session: &str, name: &str) -> Option<PathBuf> {
        let dir = self.session_dir(patient, session);
        [format!("{name}.nii.gz"), format!("{name}.nii")]
            .into_iter()
            .map(|f| dir.join(f))
            .find(|p| p.is_file())
    }

    pub fn modality_path(&self, patient: &str, session: &str, m: Modality) -> Option<PathBuf> {
        self.find(patient, session, m.token())
    }

    pub fn seg_path(&self, patient: &str, session: &str) -> Option<PathBuf> {
        self.find(patient, session, "seg")
    }

    /// Name of the first missing input of a case, if any.
    pub fn first_missing(&self, key: &CaseKey) -> Option<String> {
        for session in [&key.baseline_session, &key.followup_session] {
            for m in Modality::ALL {
                if self.modality_path(&key.patient_id, session, m).is_none() {
                    return Some(format!("{m} ({session})"));
                }
            }
            if self.seg_path(&key.patient_id, session).is_none() {
                return Some(format!("seg ({session})"));
            }
        }
        None
    }

    pub fn load_scan(&self, key: &CaseKey, session: &str) -> Result<Scan> {
        let missing = |what: String| Error::MissingModality {
            case: key.to_string(),
            modality: what,
        };
        let load = |m: Modality| -> Result<Volume> {
            let p = self
                .modality_path(&key.patient_id, session, m)
                .ok_or_else(|| missing(m.to_string()))?;
            read_volume(p)
        };
        let volumes = [
            load(Modality::T1)?,
            load(Modality::T1c)?,
            load(Modality::T2)?,
            load(Modality::Flair)?,
        ];
        let seg = self
            .seg_path(&key.patient_id, session)
            .ok_or_else(|| missing("seg".into()))?;
        Ok(Scan {
            volumes,
            labels: read_labelmap(seg)?,
        })
    }

    pub fn load_case(&self, record: &CaseRecord) -> Result<CasePair> {
        let key = record.key();
        let baseline = self.load_scan(&key, &key.baseline_session)?;
        let followup = self.load_scan(&key, &key.followup_session)?;
        let cp = CasePair {
            key,
            baseline,
            followup,
            label: record.label,
        };
        cp.validate()?;
        Ok(cp)
    }

    pub fn read_cases(&self) -> Result<Vec<CaseRecord>> {
        read_case_list(self.root.join(CASES_FILE))
    }
}
