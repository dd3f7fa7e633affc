#![no_std]

extern crate alloc;

pub mod error;
pub mod exponents;
pub mod laws;
pub mod mc;
pub mod numeric;
pub mod rng;
pub mod spectral;

pub use error::{Assumption, Error, Result};
pub use exponents::{analyze, classify, ExponentReport, Regime};
pub use laws::{
    check_conditions, AdmissibilityReport, Family, LabelLaw, ModelSpec, MomentDomain, PassageLaw,
};
pub use rng::RandomStream;
pub use spectral::{RootColour, SpectralCurve};
