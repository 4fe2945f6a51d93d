//! Command-line front end for `curvesfm-core`: synthetic scene generation,
//! observation, solving, densification, planar correspondence and SVG
//! plots, all exchanging versioned JSON artifacts.

pub mod format;
pub mod plot;
pub mod run;
pub mod suite;
