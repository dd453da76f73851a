//! Independent numerical ground truth: finite differences, a trinomial
//! tree and Monte Carlo.

pub mod mc;
pub mod pde;
pub mod tree;

pub use mc::{simulate, McConfig, McResult};
pub use pde::{solve_pde, PdeConfig, Probe, SolutionGrid};
pub use tree::{solve_tree, TreeResult};
