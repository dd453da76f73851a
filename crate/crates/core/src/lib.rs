//! First-passage time densities for one-dimensional diffusions.

pub mod cumulants;
pub mod decay;
pub mod density;
pub mod error;
pub mod forcefield;
pub mod hseries;
pub mod interp;
pub mod oracle;
pub mod oupcf;
pub mod quad;
pub mod roots;
pub mod special;
pub mod validation;

pub use cumulants::{CumulantSet, MeanRegime};
pub use decay::{DecayEstimate, Side};
pub use density::{DensityModel, DensityOptions, LambdaSource};
pub use error::{FptError, Result};
pub use forcefield::{Builtin, Drift, FieldSpec, ForceField, InvariantMeasure, TanhForm};
pub use hseries::{HGrid, HTable};
pub use oracle::{McConfig, McResult, PdeConfig, SolutionGrid, TreeResult};
pub use validation::{ValidationCase, ValidationConfig};
