//! A sum-product network toolkit built around exact single-point removal:
//! a state-recording structure learner, an unlearning pass that updates the
//! trained model so it equals retraining without the removed row, and an
//! executable verifier of that equality.

pub mod config;
pub mod dataset;
pub mod learn;
pub mod leaves;
pub mod seed;
pub mod splitters;
pub mod spn;
