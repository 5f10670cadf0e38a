pub mod certify;
pub mod cli;
pub mod comparison;
pub mod config;
pub mod control;
pub mod distance;
pub mod domain;
pub mod error;
pub mod expr;
pub mod lp;
pub mod minfunc;
pub mod ode;
pub mod qp;
pub mod quad;
pub mod sim;
