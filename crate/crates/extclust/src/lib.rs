//! Clustering of extremal angles on the positive unit simplex.
//!
//! Heavy-tailed multivariate observations carry their dependence structure
//! in the distribution of the angle `Y / ||Y||` given `||Y||` large. Groups
//! of coordinates that can be large together show up as faces of the
//! positive orthant charged by that angular distribution. This crate
//! implements the machinery to find those groups:
//!
//! * [`angle`] — simplex-valued types, angle extraction from raw data,
//!   dissimilarities and angles to faces;
//! * [`eigen`] — Perron–Frobenius eigenpairs and top-k eigenvalues of
//!   symmetric nonnegative matrices;
//! * [`clustering`] — spherical k-means and spherical
//!   k-principal-components with restarts, plus an exhaustive
//!   partition-space oracle for small instances;
//! * [`faces`] — turning centroids into faces by entrywise and angular
//!   thresholding, and error counting against a known partition;
//! * [`husler_reiss`] — Hüsler–Reiss max-stable simulation, tail
//!   dependence, the log-ratio transform and Monte Carlo moment
//!   estimation;
//! * [`theory`] — numerical verification of the structural results the
//!   clustering relies on (balancedness bounds, sufficient conditions,
//!   counterexamples);
//! * [`experiment`], [`io`], [`plot`] — the simulation-study driver behind
//!   the command line, CSV formats, and self-contained SVG plots.

pub mod angle;
pub mod clustering;
pub mod eigen;
pub mod error;
pub mod experiment;
pub mod faces;
pub mod husler_reiss;
pub mod io;
pub mod mat;
pub mod plot;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
