pub mod combinatorial;
pub mod error;
pub mod eval;
pub mod features;
pub mod gen;
pub mod graph;
pub mod io;
pub mod neural;
pub mod wl;

pub use error::{Error, Result};
pub use features::{Distribution, RandomAssignment};
pub use gen::{Dataset, Split, TaskKind};
pub use graph::{Features, Graph, RootedBall};
pub use wl::{ColorMap, UnfoldTree};
