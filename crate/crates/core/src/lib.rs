//! Fuzzy reinforcement-learning auto-scaling for simulated VM groups.
//!
//! The crate wires four pieces together:
//!
//! * [`fuzzy`] — triangular/trapezoidal partitions over workload and response
//!   time, product-conjunction rule firing and crisp action synthesis;
//! * [`agent`] — a fuzzy SARSA / Q-learning hybrid over a 9×5 q-table, with
//!   exponential ε-greedy exploration and convergence tracking;
//! * [`sim`] + [`workload`] — a small M/M/1-style VM group with boot delays,
//!   driven by synthetic or trace-replay workload patterns;
//! * [`experiment`] + [`output`] — the monitor-decide-act loop, summary
//!   statistics, controller comparisons and deterministic file emission.
//!
//! ```
//! use frlscale_core::{run_experiment, Controller, ExperimentConfig};
//!
//! let cfg = ExperimentConfig {
//!     controller: Controller::Fql,
//!     horizon: 300,
//!     seed: 42,
//!     ..ExperimentConfig::default()
//! };
//! let out = run_experiment(&cfg).unwrap();
//! assert_eq!(out.records.len(), 300);
//! println!("mean rt: {:.3}s", out.summary.mean_rt_s);
//! ```

pub mod agent;
pub mod experiment;
pub mod fuzzy;
pub mod output;
pub mod reward;
pub mod sim;
pub mod types;
pub mod workload;

pub use agent::{
    check_convergence, epsilon_at, AgentConfig, AgentDecision, AgentError, ConvergenceTracker,
    FrlAgent, InitMode, Mode, QTable, QTableSnapshot,
};
pub use experiment::{
    compare_controller_runs, compare_controllers, run_experiment, ComparisonRow, ComparisonTable,
    ConfigError, Controller, ExperimentConfig, ExperimentError, ExperimentOutput, RunSummary,
    StepRecord, WindowStats,
};
pub use fuzzy::{
    combine_action, discretize_action, fire_rules, FiringVector, FuzzyError, FuzzyPartition,
    MembershipFunction, Rule, RuleBase, ACTION_COUNT, RULE_COUNT,
};
pub use output::{emit_outputs, EmittedFiles, OutputError, STEPS_CSV_HEADER};
pub use reward::{compute_reward, RewardConfig, RewardError};
pub use sim::{response_time, Cluster, ScalingTarget, SimConfig, SimError, VmInstance, VmPhase};
pub use types::{ScalingAction, SystemState, ACTION_DELTAS};
pub use workload::{PatternKind, PatternSpec, TraceScale, WorkloadError, WorkloadGenerator};
