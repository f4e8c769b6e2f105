//! Correlation networks of currency exchange rates: per-base correlation
//! spectra, minimal spanning trees, and power-law scaling of tree degrees.
//!
//! The pipeline for one base currency X is
//! [`returns::rebase`] → [`returns::normalize`] → [`spectrum::correlation_matrix`]
//! → [`spectrum::eigen`] → [`msttree::distance_matrix`] → [`msttree::build_mst`]
//! → [`msttree::degree_distribution`] → [`scaling::fit_power`];
//! [`scaling::sweep_report`] runs it for every base of a panel.

pub mod cli;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod msttree;
pub mod returns;
pub mod scaling;
pub mod spectrum;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::{CurrencyCode, GroupConfig, LiquidityGroup, RatePanel};
