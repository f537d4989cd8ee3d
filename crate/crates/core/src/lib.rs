//! Simulation and analysis of two-mode squeezed-vacuum homodyne records.
//!
//! [`model`] holds the analytic spectra, [`synth`] draws sampled records with
//! those statistics, [`dsp`] and [`analysis`] turn records back into
//! shot-normalized spectra, delay scans and frequency-bin covariances, and
//! [`store`] persists traces and results. [`figures`] and [`cli`] wire the
//! pieces into end-to-end runs.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod dsp;
pub mod figures;
mod fourier;
pub mod model;
pub mod store;
pub mod synth;
