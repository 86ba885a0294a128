#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod plant;
pub mod protocol;
pub mod vision;
pub mod control;
pub mod sim;
pub mod config;
pub mod cli;
