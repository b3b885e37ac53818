//! Temporal-logic and chance-constrained motion planning compiled to
//! mixed-integer linear programs, solved by an in-house branch-and-bound
//! engine, with learned guidance for branching priorities and solver
//! configuration.
//!
//! Start with the runnable examples in `examples/` — each one demonstrates a
//! major capability end to end:
//!
//! - `robustness.rs` — formula parsing and trajectory robustness
//! - `encode_stl.rs` — compiling a reach-avoid task to a MILP
//! - `encode_cpp.rs` — chance-constrained encoding over sampled obstacles
//! - `solve_milp.rs` — the simplex and branch-and-bound stack
//! - `generate.rs` — reproducible benchmark instance generation
//! - `graph_features.rs` — bipartite instance graphs for learning
//! - `train_backdoor.rs` — training the branching-priority ranker
//! - `train_config.rs` — training the configuration selector
//! - `evaluate.rs` — guided-vs-default comparison and report tables
//!
//! The `milplan` binary wraps the same surface as subcommands
//! (`gen`, `encode`, `solve`, `train`, `evaluate`, ... and a `pipeline`
//! meta-command that chains them).

pub mod bnb;
pub mod cli;
pub mod encode;
pub mod gen;
pub mod graph;
pub mod guidance;
pub mod harness;
pub mod milp;
pub mod neural;
mod par;
pub mod stl;
