//! Distributed AIMD resource allocation.
//!
//! Users share a resource of capacity `C`. Each runs an additive-increase /
//! multiplicative-decrease rule driven only by a one-bit "over capacity"
//! broadcast, with a back-off probability that depends on its own utility.
//! The crate provides the utility families, the four AIMD variants, a
//! deterministic round-based simulator, exact centralised baselines for the
//! efficiency ratio, and the strategic-game view (Nash equilibrium and price
//! of anarchy).
//!
//! ```
//! use aimd_alloc::{run_simulation_with, ScenarioConfig};
//!
//! let config = ScenarioConfig::from_toml(r#"
//!     n = 5
//!     algorithm = "daimd"
//!     horizon = 2000
//!     [utility]
//!     family = "log"
//!     eta = { uniform = [0.0, 1.0] }
//!     chi = { uniform = [40.0, 60.0] }
//! "#).unwrap();
//! let summary = run_simulation_with(&config, |_| {}).unwrap();
//! assert!(summary.efficiency > 0.9 && summary.efficiency <= 1.0);
//! ```

// `!(x > 0.0)` is how NaN gets rejected alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
// Reference values in tests keep every digit of their high-precision source.
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod agent;
pub mod baseline;
pub mod engine;
pub mod error;
pub mod game;
pub mod output;
pub mod rng;
pub mod scenario;
pub mod search;
pub mod utility;

pub use agent::{Agent, AgentState, AimdParams, Algorithm, CapacitySignal, DaimdSemantics};
pub use baseline::{brute_force_oracle, refine_allocation, solve_concave, solve_sigmoidal, BaselineResult};
pub use engine::{efficiency, run_simulation, run_simulation_with, sweep, RunSummary, SweepRow, TraceRecord};
pub use error::{Error, Result, Violation};
pub use game::{nash_solve, poa, GameConfig, NashOptions, NashResult};
pub use scenario::{Scenario, ScenarioConfig};
pub use utility::{LogUtility, PayoffUtility, PenaltyFn, SigmoidUtility, StepUtility, UtilityModel};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/utilities.md")]
    struct Utilities;
    #[doc = include_str!("../../../book/src/agents.md")]
    struct Agents;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/baselines.md")]
    struct Baselines;
    #[doc = include_str!("../../../book/src/game.md")]
    struct Game;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
