//! Profit-maximizing VM scaling for a cloud broker whose provider bills in
//! fixed cycles of `tau` slots.
//!
//! The broker raises its selling price to shed demand it has no VM for
//! ("renting") and buys a VM once the revenue shed over the recent window
//! reaches the VM's price ("buying"). The crate provides the demand-curve
//! model, the online scaler for any prediction window, a static-pricing
//! baseline, an exact offline oracle for small instances, and trace tooling.
//!
//! Everything numeric is generic over [`Scalar`]; the aliases below fix it
//! to `f64`.

// `!(x > y)` is used on purpose so NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod demand_model;
pub mod error;
pub mod fleet;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod scaler;
pub mod trace;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Curve = demand_model::PriceDemandCurve<f64>;
pub type CurveSpec = demand_model::CurveSpec<f64>;
pub type Billing = fleet::BillingConfig<f64>;
pub type Fleet = fleet::FleetState<f64>;
pub type Ledger = metrics::RunLedger<f64>;
pub type Trace = trace::DemandTrace<f64>;
pub type Schedule = oracle::OptSchedule<f64>;

pub type CurveF32 = demand_model::PriceDemandCurve<f32>;
pub type LedgerF32 = metrics::RunLedger<f32>;
