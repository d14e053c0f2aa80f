//! Robust unbalanced optimal power flow for radial distribution feeders
//! modeled down to the customer service point.
//!
//! * [`netmodel`]: feeder data model, per-unit system, split-phase expansion
//! * [`powerflow`]: Newton power flow and voltage sensitivities
//! * [`uncertainty`]: forecasts and dynamic voltage-limit tightening
//! * [`opf`]: SDP relaxation of the branch flow model and phasor recovery
//! * [`simharness`]: synthetic feeders and quasi-static time-series simulation

extern crate openblas_src;

pub mod netmodel;
pub mod opf;
pub mod powerflow;
pub mod simharness;
pub mod uncertainty;

#[cfg(test)]
mod testutil;
