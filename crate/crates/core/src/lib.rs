#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod device;
pub mod dynamics;
pub mod estimate;
pub mod fit;
pub mod gate;
pub mod lab;
pub mod scenario;
