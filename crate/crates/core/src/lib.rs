//! Lie–Poisson reduction for left-invariant hybrid optimal control, with a
//! complete SE(2) reference system.

pub mod figures;
pub mod group;
pub mod hybrid;
pub mod output;
pub mod se2;
pub mod solver;
