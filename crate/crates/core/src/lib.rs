//! Longitudinal radiomics for post-treatment glioma response assessment.

pub mod case;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod gbdt;
pub mod intensity;
pub mod mask;
pub mod nifti;
pub mod phantom;
pub mod pipeline;
pub mod radiomics;
pub mod roi;

pub use error::{Error, Result};
