//! Equivalent-circuit modelling and S11 post-processing for one-port
//! acoustic resonators.
//!
//! The crate is organised the way a measurement moves through it:
//!
//! - [`touchstone`] reads and writes one-port `.s1p` files.
//! - [`network`] converts between S11 and admittance, renormalises the
//!   reference impedance and tunes the source impedance on the Smith chart.
//! - [`mbvd`] is the modified Butterworth-Van Dyke forward model.
//! - [`extract`] measures f_s, f_p, k_eff², the admittance ratio, Bode-Q,
//!   Q_max and the figure of merit from a trace.
//! - [`fit`] fits mBVD element values to a measured admittance.
//! - [`design`] predicts f_s and k_eff² of new geometries from a dispersion
//!   table.

pub mod design;
pub mod extract;
pub mod fit;
pub mod mbvd;
pub mod network;
pub mod touchstone;

pub use design::{DeviceGeometry, DispersionTable, Family};
pub use extract::{ExtractOptions, ExtractionReport};
pub use fit::{FitConfig, FitResult};
pub use mbvd::MbvdParams;
pub use network::{AdmittanceTrace, Band, SmithCircle};
pub use touchstone::{OnePortTrace, TouchstoneFormat};

pub use num_complex::Complex64;
