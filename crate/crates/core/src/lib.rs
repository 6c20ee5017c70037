// Negated comparisons double as NaN rejection in argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod geometry;
pub mod imaging;
pub mod optics;
pub mod simkit;
pub mod steering;
