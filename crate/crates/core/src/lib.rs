//! Cone-ordered multiobjective dynamic programming.

pub mod cli;
pub mod cone;
pub mod control;
pub mod dp;
pub mod io;
pub mod nnls;
pub mod oracle;
pub mod pareto;
pub mod tangent;
pub mod verify;
