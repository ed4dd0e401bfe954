pub mod error;
pub mod experiments;
pub mod geometry;
pub mod homology;
pub mod measures;
pub mod samplers;
pub mod transport;
pub mod wavelet;
