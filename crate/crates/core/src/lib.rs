//! Singular foliations, their holonomy groupoids and quotients by Lie group
//! and Lie 2-group actions, computed on explicit coordinate charts.

pub mod bisubmersion;
pub mod checks;
pub mod error;
pub mod flows;
pub mod foliation;
pub mod groupoid;
pub mod lie2;
pub mod linalg;
pub mod plot;
pub mod quotient;
pub mod report;
pub mod sampling;
pub mod scenario;
pub mod symcore;

pub use error::{Error, Result};
