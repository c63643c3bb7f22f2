//! Batched split evaluation and sample-average optimization for capacitated
//! vehicle routing with stochastic demands.
//!
//! The library is organized around one core operation: given a *giant tour*
//! (a permutation of all customers) and a batch of demand scenarios, compute
//! for every scenario the cost of optimally splitting the tour into
//! capacity-feasible routes. The split is a shortest-path dynamic program
//! over tour positions; the batched kernel evaluates it for hundreds of
//! thousands of scenarios at once using precomputed feasibility masks,
//! scenario-major memory layout, and tiled parallel execution.
//!
//! On top of the kernel sit sample-average-approximation statistics
//! ([`saa`]) and a population-based tour search ([`search`]) that together
//! support empirical studies: estimator bias and consistency as the training
//! sample grows, wall-clock scaling of the kernel, and solution quality
//! under matched time budgets.
//!
//! Entry points:
//! - [`instance`]: TSPLIB-style instance parsing, cost matrices, giant tours.
//! - [`scenario`]: demand models, scenario sampling, binary scenario files.
//! - [`split`]: scalar/masked/batched split kernels and the brute-force
//!   verification oracle.
//! - [`saa`]: estimates, out-of-sample evaluation, bias and convergence
//!   experiments.
//! - [`search`]: seeded evolutionary search over giant tours.
//!
//! All randomness is driven by explicit seeds, and batched results are
//! bit-identical regardless of tile size or worker count, so every
//! experiment in the crate is reproducible end to end.

pub mod cost;
pub mod instance;
pub mod saa;
pub mod scenario;
pub mod search;
pub mod split;

pub use cost::Cost;
pub use instance::{CvrpInstance, GiantTour, InstanceFile};
pub use saa::SaaEstimate;
pub use scenario::{DemandKind, DemandModel, ScenarioSet};
pub use search::{SearchBudget, SearchConfig, SearchOutcome};
pub use split::{SplitMode, SplitOptions};
