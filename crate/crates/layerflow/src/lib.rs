//! Heat transport by steady 2D flows between two walls held at fixed
//! temperatures: spectral fields, three routes to the Nusselt number,
//! the nonlocal advection functional, roll and branching designs, and
//! a priori bounds.

pub mod advection;
pub mod bounds;
pub mod designs;
pub mod error;
pub mod fields;
pub mod krylov;
pub mod optimizer;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
pub use fields::{
    build_domain, random_streamfunction, streamfunction_to_velocity, DomainParams, DomainSpec,
    FieldJson, SpectralField, VelocityField, C64,
};
