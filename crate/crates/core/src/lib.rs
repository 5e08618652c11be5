// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod discretization;
pub mod error;
pub mod estimates;
pub mod geometry;
pub mod report;
pub mod runner;
pub mod solver;
pub mod verification;
