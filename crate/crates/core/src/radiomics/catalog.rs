//! The versioned, ordered list of handcrafted features per (volume, mask).

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::neighborhood::Dim;
use super::{firstorder, glcm, gldm, glrlm, glszm, ngtdm, shape};

pub const CATALOG_VERSION: u32 = 1;
pub const CATALOG_LEN: usize = 177;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureClass {
    Firstorder,
    Shape3d,
    Shape2d,
    Glcm,
    Glrlm,
    Glszm,
    Gldm,
    Ngtdm,
}

impl FeatureClass {
    pub fn token(self) -> &'static str {
        match self {
            FeatureClass::Firstorder => "firstorder",
            FeatureClass::Shape3d => "shape3d",
            FeatureClass::Shape2d => "shape2d",
            FeatureClass::Glcm => "glcm",
            FeatureClass::Glrlm => "glrlm",
            FeatureClass::Glszm => "glszm",
            FeatureClass::Gldm => "gldm",
            FeatureClass::Ngtdm => "ngtdm",
        }
    }

    pub fn names(self) -> &'static [&'static str] {
        match self {
            FeatureClass::Firstorder => &firstorder::NAMES,
            FeatureClass::Shape3d => &shape::NAMES_3D,
            FeatureClass::Shape2d => &shape::NAMES_2D,
            FeatureClass::Glcm => &glcm::NAMES,
            FeatureClass::Glrlm => &glrlm::NAMES,
            FeatureClass::Glszm => &glszm::NAMES,
            FeatureClass::Gldm => &gldm::NAMES,
            FeatureClass::Ngtdm => &ngtdm::NAMES,
        }
    }
}

/// Class blocks in vector order.
pub const LAYOUT: [(Dim, FeatureClass); 11] = [
    (Dim::Three, FeatureClass::Firstorder),
    (Dim::Three, FeatureClass::Shape3d),
    (Dim::Three, FeatureClass::Glcm),
    (Dim::Three, FeatureClass::Glrlm),
    (Dim::Three, FeatureClass::Glszm),
    (Dim::Three, FeatureClass::Gldm),
    (Dim::Three, FeatureClass::Ngtdm),
    (Dim::Two, FeatureClass::Firstorder),
    (Dim::Two, FeatureClass::Shape2d),
    (Dim::Two, FeatureClass::Glcm),
    (Dim::Two, FeatureClass::Glrlm),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub index: usize,
    pub class: FeatureClass,
    pub name: String,
    pub dimensionality: Dim,
}

impl CatalogEntry {
    /// `{dim}_{class}_{name}`, e.g. `3d_glcm_contrast`.
    pub fn key(&self) -> String {
        format!("{}_{}_{}", self.dimensionality.token(), self.class.token(), self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub version: u32,
    pub entries: Vec<CatalogEntry>,
}

impl FeatureCatalog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> Vec<String> {
        self.entries.iter().map(CatalogEntry::key).collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

pub fn catalog() -> &'static FeatureCatalog {
    static CATALOG: OnceLock<FeatureCatalog> = OnceLock::new();
    CATALOG.get_or_init(|| {
        let mut entries = Vec::with_capacity(CATALOG_LEN);
        for (dim, class) in LAYOUT {
            for name in class.names() {
                entries.push(CatalogEntry {
                    index: entries.len(),
                    class,
                    name: (*name).to_string(),
                    dimensionality: dim,
                });
            }
        }
        FeatureCatalog {
            version: CATALOG_VERSION,
            entries,
        }
    })
}
