//! Benchmark models.

mod enzyme;
mod exponential;
mod identity;
pub mod ode;
mod torus;

pub use enzyme::{EnzymeConstants, EnzymeModel, EnzymeResponse, EnzymeSettings};
pub use exponential::ExponentialModel;
pub use identity::IdentityModel;
pub use torus::TorusModel;
