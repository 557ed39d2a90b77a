//! Secure multiuser MISO downlink with a multifunctional active IRS.
//!
//! [`sysmodel`] holds the signal model and performance metrics, [`bs_opt`] and
//! [`irs_opt`] the two convex sub-problems, and [`driver`] the alternating
//! optimization with its baselines.

pub mod bs_opt;
pub mod driver;
pub mod irs_opt;
pub mod hermitian;
pub mod linalg;
pub mod sysmodel;

pub use num_complex::Complex64 as C64;

pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;
