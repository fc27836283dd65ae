pub mod convergence;
pub mod meshinfo;
pub mod simulate;
pub mod spectral;
