pub mod densities;
pub mod ensembles;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod par;
pub mod quadrature;
pub mod ratefn;
pub mod rng;
pub mod sampler;
pub mod spectra;
pub mod structure;
