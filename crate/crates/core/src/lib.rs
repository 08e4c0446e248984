pub mod action;
pub mod analytic;
pub mod grids;
pub mod projections;
pub mod solver;
