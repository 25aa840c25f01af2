//! Numerical toolkit for conservation-law limits on quantum measurements.
//!
//! Finite-dimensional operators, channels in Kraus form, measurement schemes,
//! additive conserved quantities, evaluated inequalities and fixed-point
//! analysis of channels.

pub mod bounds;
pub mod conserve;
pub mod cpmaps;
pub mod error;
pub mod fixpt;
pub mod measure;
pub mod opcore;
pub mod random;
pub mod report;

pub use cpmaps::{compose, OperationMap};
pub use error::{Error, Result};
pub use measure::{Instrument, MeasurementScheme, Observable};
pub use opcore::{Operator, Subsystem, Tolerance, Vector, C64};
pub use report::{BoundId, BoundReport, Hypothesis, Summary};
