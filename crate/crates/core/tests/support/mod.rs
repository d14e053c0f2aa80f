//! Independent reference computations shared by integration and acceptance tests.
#![allow(dead_code)]

pub mod feeders;
pub mod split_phase;
