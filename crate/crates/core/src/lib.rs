//! Reactive settling in secondary clarifiers: a one-dimensional model of
//! flocculated biomass and dissolved substrates in a vessel with variable
//! cross-sectional area, discretized in space by the method of lines and
//! marched explicitly in time under a CFL condition that keeps every
//! concentration inside its physically relevant region.

pub mod constitutive;
pub mod error;
pub mod fluxes;
pub mod methodxp;
pub mod grid;
pub mod harness;
pub mod mol;
pub mod numerics;
pub mod reactions;
pub mod scenario;
pub mod stepper;

pub use constitutive::{ConstitutiveParams, ConstitutiveSet};
pub use error::{Error, Result};
pub use grid::{AreaProfile, FaceAreaMode, Grid};
pub use reactions::{Denitrification, ReactionModel, ZMode};
pub use scenario::{builtin, load_scenario, Scenario, Schedule};
