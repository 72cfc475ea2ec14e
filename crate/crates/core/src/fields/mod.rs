//! Grids over disks and scalar fields living on them.

mod field;
mod grid;
mod initial;

pub use field::{ScalarField, Support};
pub use grid::{build_grid, Grid, GridKind, Node, NodeClass, Stencil};
pub use initial::{evaluate, Bump, InitialData, InitialForm};
