//! Experiment harness: configuration, the monitor-decide-act control loop, and
//! summary statistics for single runs and controller comparisons.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, AgentError, FrlAgent, Mode, QTableSnapshot};
use crate::fuzzy::{FuzzyError, FuzzyPartition, MembershipFunction};
use crate::reward::{compute_reward, RewardConfig, RewardError};
use crate::sim::{Cluster, ScalingTarget, SimConfig, SimError};
use crate::types::ScalingAction;
use crate::workload::{PatternSpec, WorkloadError, WorkloadGenerator};

/// What drives the scaling decisions of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ControllerRepr", into = "ControllerRepr")]
pub enum Controller {
    Fsl,
    Fql,
    /// No controller at all: the group is pinned at `n` instances.
    Fixed(u32),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ControllerRepr {
    Name(String),
    Fixed { fixed: u32 },
}

impl TryFrom<ControllerRepr> for Controller {
    type Error = String;

    fn try_from(repr: ControllerRepr) -> Result<Self, Self::Error> {
        match repr {
            ControllerRepr::Name(name) => match name.to_ascii_uppercase().as_str() {
                "FSL" => Ok(Controller::Fsl),
                "FQL" => Ok(Controller::Fql),
                other => Err(format!(
                    "unknown controller '{other}', expected \"FSL\", \"FQL\" or {{\"fixed\": n}}"
                )),
            },
            ControllerRepr::Fixed { fixed } => Ok(Controller::Fixed(fixed)),
        }
    }
}

impl From<Controller> for ControllerRepr {
    fn from(c: Controller) -> Self {
        match c {
            Controller::Fsl => ControllerRepr::Name("FSL".into()),
            Controller::Fql => ControllerRepr::Name("FQL".into()),
            Controller::Fixed(n) => ControllerRepr::Fixed { fixed: n },
        }
    }
}

impl Controller {
    pub fn label(&self) -> String {
        match self {
            Controller::Fsl => "FSL".into(),
            Controller::Fql => "FQL".into(),
            Controller::Fixed(n) => format!("fixed({n})"),
        }
    }

    pub fn mode(&self) -> Option<Mode> {
        match self {
            Controller::Fsl => Some(Mode::Fsl),
            Controller::Fql => Some(Mode::Fql),
            Controller::Fixed(_) => None,
        }
    }
}

impl std::str::FromStr for Controller {
    type Err = String;

    /// Accepts `FSL`, `FQL`, `fixed:N` and `fixed(N)` (case-insensitive).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "fsl" => return Ok(Controller::Fsl),
            "fql" => return Ok(Controller::Fql),
            _ => {}
        }
        let digits = lower.strip_prefix("fixed:").or_else(|| {
            lower
                .strip_prefix("fixed(")
                .and_then(|r| r.strip_suffix(')'))
        });
        if let Some(digits) = digits {
            return digits
                .parse::<u32>()
                .map(Controller::Fixed)
                .map_err(|_| format!("bad fixed controller size in '{s}'"));
        }
        Err(format!(
            "unknown controller '{s}', expected FSL, FQL, fixed:N or fixed(N)"
        ))
    }
}

/// Reward shaping knobs as they appear in the config file. The VM bounds of
/// the cost term always mirror the simulator section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSettings {
    pub sla_rt: f64,
    pub cost_weight: f64,
}

impl Default for RewardSettings {
    fn default() -> Self {
        Self {
            sla_rt: 0.6,
            cost_weight: 0.3,
        }
    }
}

/// Simulator knobs as they appear in the config file. `rt_cap` defaults to
/// twice the SLA threshold, `initial_vms` to `vm_min` (or the pinned size for
/// fixed controllers).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub vm_min: u32,
    pub vm_max: u32,
    pub per_vm_capacity: f64,
    pub rt_floor: f64,
    pub rt_cap: Option<f64>,
    pub boot_delay: u32,
    pub initial_vms: Option<u32>,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            vm_min: 1,
            vm_max: 5,
            per_vm_capacity: 30.0,
            rt_floor: 0.05,
            rt_cap: None,
            boot_delay: 2,
            initial_vms: None,
        }
    }
}

/// One fuzzy set in the config file: a name plus its membership function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSpec {
    pub name: String,
    #[serde(flatten)]
    pub shape: MembershipFunction,
}

/// A full partition override for one input variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub domain: [f64; 2],
    pub sets: Vec<SetSpec>,
}

impl PartitionSpec {
    pub fn build(&self, variable: &str) -> Result<FuzzyPartition, FuzzyError> {
        FuzzyPartition::new(
            variable,
            (self.domain[0], self.domain[1]),
            self.sets
                .iter()
                .map(|s| (s.name.clone(), s.shape))
                .collect(),
        )
    }
}

/// Optional overrides for the two input partitions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzySettings {
    pub workload: Option<PartitionSpec>,
    pub response_time: Option<PartitionSpec>,
}

/// A complete experiment description. Every field has a default, so
/// `{"controller": "FQL"}` is a valid config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub controller: Controller,
    pub horizon: u64,
    pub seed: u64,
    /// Intervals excluded from the summary statistics.
    pub warmup: u64,
    /// Emit a q-table snapshot every this many intervals.
    pub snapshot_interval: Option<u64>,
    pub pattern: PatternSpec,
    pub agent: AgentConfig,
    pub reward: RewardSettings,
    pub sim: SimSettings,
    pub fuzzy: FuzzySettings,
    /// Controllers the `compare` command runs when none are given explicitly.
    pub compare: Vec<Controller>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            controller: Controller::Fql,
            horizon: 5000,
            seed: 0,
            warmup: 0,
            snapshot_interval: None,
            pattern: PatternSpec::default(),
            agent: AgentConfig::default(),
            reward: RewardSettings::default(),
            sim: SimSettings::default(),
            fuzzy: FuzzySettings::default(),
            compare: vec![
                Controller::Fsl,
                Controller::Fql,
                Controller::Fixed(1),
                Controller::Fixed(5),
            ],
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("warmup ({warmup}) must be smaller than the horizon ({horizon})")]
    WarmupTooLarge { warmup: u64, horizon: u64 },
    #[error("snapshot_interval must be at least 1")]
    ZeroSnapshotInterval,
    #[error("fixed controller size {n} outside vm bounds [{vm_min}, {vm_max}]")]
    FixedOutOfBounds { n: u32, vm_min: u32, vm_max: u32 },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pattern(#[from] WorkloadError),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

impl ExperimentConfig {
    /// Simulator config with derived defaults filled in.
    pub fn resolved_sim(&self) -> SimConfig {
        let initial_vms = match self.controller {
            // a pinned group starts at its pinned size
            Controller::Fixed(n) => n,
            _ => self.sim.initial_vms.unwrap_or(self.sim.vm_min),
        };
        SimConfig {
            vm_min: self.sim.vm_min,
            vm_max: self.sim.vm_max,
            per_vm_capacity: self.sim.per_vm_capacity,
            rt_floor: self.sim.rt_floor,
            rt_cap: self.sim.rt_cap.unwrap_or(2.0 * self.reward.sla_rt),
            boot_delay: self.sim.boot_delay,
            initial_vms,
        }
    }

    /// Reward config with the VM bounds mirrored from the simulator section.
    pub fn resolved_reward(&self) -> RewardConfig {
        RewardConfig {
            sla_rt: self.reward.sla_rt,
            cost_weight: self.reward.cost_weight,
            vm_min: self.sim.vm_min,
            vm_max: self.sim.vm_max,
        }
    }

    /// The (workload, response-time) partitions: overrides when given,
    /// otherwise the defaults scaled to the configured SLA.
    pub fn resolved_partitions(&self) -> Result<(FuzzyPartition, FuzzyPartition), FuzzyError> {
        let workload = match &self.fuzzy.workload {
            Some(spec) => spec.build("workload")?,
            None => FuzzyPartition::default_workload(),
        };
        let response = match &self.fuzzy.response_time {
            Some(spec) => spec.build("response_time")?,
            None => FuzzyPartition::default_response_time(self.reward.sla_rt),
        };
        Ok((workload, response))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(ConfigError::ZeroHorizon);
        }
        if self.warmup >= self.horizon {
            return Err(ConfigError::WarmupTooLarge {
                warmup: self.warmup,
                horizon: self.horizon,
            });
        }
        if self.snapshot_interval == Some(0) {
            return Err(ConfigError::ZeroSnapshotInterval);
        }
        if let Controller::Fixed(n) = self.controller {
            if n < self.sim.vm_min || n > self.sim.vm_max {
                return Err(ConfigError::FixedOutOfBounds {
                    n,
                    vm_min: self.sim.vm_min,
                    vm_max: self.sim.vm_max,
                });
            }
        }
        self.pattern.validate()?;
        self.agent.validate()?;
        self.resolved_reward().validate()?;
        self.resolved_sim().validate()?;
        self.resolved_partitions()?;
        Ok(())
    }

    /// The same experiment driven by a different controller.
    pub fn with_controller(&self, controller: Controller) -> Self {
        Self {
            controller,
            ..self.clone()
        }
    }
}

/// One control interval as it lands in `steps.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub w: f64,
    pub rt: f64,
    pub vm_active: u32,
    /// Group size including booting instances, after this interval's action.
    pub vm_total: u32,
    pub action_crisp: f64,
    pub action_applied: i32,
    pub reward: f64,
    pub epsilon: f64,
    pub q_delta_max: f64,
}

/// Aggregate statistics over one window of intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub from_step: u64,
    pub intervals: u64,
    pub mean_rt_s: f64,
    pub p95_rt_s: f64,
    pub sla_violation_ratio: f64,
    pub mean_vm_pct: f64,
    /// Mean |TD error| over the window's updates.
    pub mean_abs_error_signal: f64,
}

/// Run-level summary as it lands in `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub controller: String,
    pub seed: u64,
    pub horizon: u64,
    /// Intervals actually executed (shorter than `horizon` for short traces).
    pub effective_horizon: u64,
    pub truncated: bool,
    pub warmup: u64,
    pub mean_rt_s: f64,
    pub p95_rt_s: f64,
    pub sla_violation_ratio: f64,
    pub mean_vm_pct: f64,
    /// Interval count per observed active-VM level.
    pub vm_histogram: BTreeMap<u32, u64>,
    /// Instances added over the run.
    pub scale_ups: u64,
    /// Instances removed over the run.
    pub scale_downs: u64,
    pub cumulative_reward: f64,
    pub convergence_step: Option<u64>,
    /// Statistics over the intervals strictly after the convergence step.
    pub post_convergence: Option<WindowStats>,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
    /// Periodic q-table snapshots, keyed by completed-interval count.
    pub snapshots: Vec<(u64, QTableSnapshot)>,
    /// The learned table at the end of the run (learned controllers only).
    pub final_table: Option<QTableSnapshot>,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("warmup ({warmup}) consumed the whole run ({intervals} intervals)")]
    WarmupConsumedRun { warmup: u64, intervals: u64 },
    #[error("compare needs at least one controller config")]
    EmptyComparison,
    #[error("config {index} differs from config 0 in shared field '{field}'")]
    SharedFieldMismatch { field: &'static str, index: usize },
}

/// Runs one experiment to completion.
///
/// Each interval: advance the simulated group (boot countdowns tick), observe
/// it under the interval's workload, compute the reward earned by the previous
/// action, let the controller decide, and apply the decision. A trace that runs
/// out ends the run early with `truncated` set in the summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    cfg.validate()?;
    let generator = WorkloadGenerator::new(cfg.pattern.clone())?;
    let sim_cfg = cfg.resolved_sim();
    let reward_cfg = cfg.resolved_reward();
    let mut cluster = Cluster::new(sim_cfg)?;
    let mut agent = match cfg.controller.mode() {
        Some(mode) => {
            let (workload_sets, response_sets) =
                cfg.resolved_partitions().map_err(ConfigError::Fuzzy)?;
            Some(FrlAgent::new(
                mode,
                cfg.agent,
                workload_sets,
                response_sets,
                cfg.seed,
            )?)
        }
        None => None,
    };

    let mut records = Vec::with_capacity(cfg.horizon as usize);
    let mut snapshots = Vec::new();
    let mut truncated = false;
    let mut post_conv_errors = ErrorAccumulator::default();

    for t in 0..cfg.horizon {
        let Some(w) = generator.users_at(t) else {
            truncated = true;
            break;
        };
        let obs = cluster.advance(w);
        let reward = compute_reward(&obs, &reward_cfg);

        let (crisp, action, epsilon, q_delta_max) = match agent.as_mut() {
            Some(agent) => {
                let fed_reward = if t == 0 { None } else { Some(reward) };
                let decision = agent.step(obs, fed_reward)?;
                if let (Some(conv), Some(err)) = (agent.converged_at(), decision.error_signal) {
                    if t > conv {
                        post_conv_errors.push(err);
                    }
                }
                (
                    decision.crisp,
                    decision.action,
                    decision.epsilon,
                    decision.q_delta_max,
                )
            }
            None => (
                0.0,
                ScalingAction::new(0).expect("0 is a valid action"),
                0.0,
                0.0,
            ),
        };

        let applied = cluster.scale(action);
        records.push(StepRecord {
            t,
            w,
            rt: obs.rt,
            vm_active: obs.vm,
            vm_total: cluster.total_count(),
            action_crisp: crisp,
            action_applied: applied,
            reward,
            epsilon,
            q_delta_max,
        });

        if let (Some(every), Some(agent)) = (cfg.snapshot_interval, agent.as_ref()) {
            let completed = t + 1;
            if completed % every == 0 && completed < cfg.horizon {
                snapshots.push((completed, agent.snapshot()));
            }
        }
    }

    let convergence_step = agent.as_ref().and_then(|a| a.converged_at());
    let summary = summarize(
        cfg,
        &records,
        truncated,
        convergence_step,
        &post_conv_errors,
    )?;
    Ok(ExperimentOutput {
        config: cfg.clone(),
        records,
        summary,
        snapshots,
        final_table: agent.map(|a| a.snapshot()),
    })
}

#[derive(Default)]
struct ErrorAccumulator {
    sum_abs: f64,
    count: u64,
}

impl ErrorAccumulator {
    fn push(&mut self, error: f64) {
        self.sum_abs += error.abs();
        self.count += 1;
    }

    fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum_abs / self.count as f64
        }
    }
}

fn summarize(
    cfg: &ExperimentConfig,
    records: &[StepRecord],
    truncated: bool,
    convergence_step: Option<u64>,
    post_conv_errors: &ErrorAccumulator,
) -> Result<RunSummary, ExperimentError> {
    let effective = records.len() as u64;
    if cfg.warmup >= effective {
        return Err(ExperimentError::WarmupConsumedRun {
            warmup: cfg.warmup,
            intervals: effective,
        });
    }
    let counted = &records[cfg.warmup as usize..];
    let sla = cfg.reward.sla_rt;
    let vm_max = cfg.sim.vm_max;

    let mut vm_histogram = BTreeMap::new();
    for r in counted {
        *vm_histogram.entry(r.vm_active).or_insert(0u64) += 1;
    }
    let scale_ups = counted.iter().map(|r| r.action_applied.max(0) as u64).sum();
    let scale_downs = counted
        .iter()
        .map(|r| (-r.action_applied).max(0) as u64)
        .sum();

    let post_convergence = convergence_step.and_then(|conv| {
        let window: Vec<&StepRecord> = records.iter().filter(|r| r.t > conv).collect();
        if window.is_empty() {
            return None;
        }
        Some(WindowStats {
            from_step: conv + 1,
            intervals: window.len() as u64,
            mean_rt_s: mean(window.iter().map(|r| r.rt)),
            p95_rt_s: p95(window.iter().map(|r| r.rt)),
            sla_violation_ratio: ratio(window.iter().map(|r| r.rt), sla),
            mean_vm_pct: 100.0 * mean(window.iter().map(|r| r.vm_active as f64)) / vm_max as f64,
            mean_abs_error_signal: post_conv_errors.mean(),
        })
    });

    Ok(RunSummary {
        controller: cfg.controller.label(),
        seed: cfg.seed,
        horizon: cfg.horizon,
        effective_horizon: effective,
        truncated,
        warmup: cfg.warmup,
        mean_rt_s: mean(counted.iter().map(|r| r.rt)),
        p95_rt_s: p95(counted.iter().map(|r| r.rt)),
        sla_violation_ratio: ratio(counted.iter().map(|r| r.rt), sla),
        mean_vm_pct: 100.0 * mean(counted.iter().map(|r| r.vm_active as f64)) / vm_max as f64,
        vm_histogram,
        scale_ups,
        scale_downs,
        cumulative_reward: counted.iter().map(|r| r.reward).sum(),
        convergence_step,
        post_convergence,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0u64;
    for v in values {
        sum += v;
        n += 1;
    }
    sum / n as f64
}

/// Nearest-rank 95th percentile.
fn p95(values: impl Iterator<Item = f64>) -> f64 {
    let mut sorted: Vec<f64> = values.collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("response times are never NaN"));
    let rank = ((0.95 * sorted.len() as f64).ceil() as usize).max(1);
    sorted[rank - 1]
}

fn ratio(values: impl Iterator<Item = f64>, threshold: f64) -> f64 {
    let mut over = 0u64;
    let mut n = 0u64;
    for v in values {
        if v > threshold {
            over += 1;
        }
        n += 1;
    }
    over as f64 / n as f64
}

/// One controller's results inside a comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub controller: String,
    pub summary: RunSummary,
    /// This row's SLA violation ratio minus each fixed baseline's.
    pub sla_violation_vs: BTreeMap<String, f64>,
    /// This row's mean VM percentage minus each fixed baseline's.
    pub mean_vm_pct_vs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Runs one experiment per config and assembles the rows in input order.
///
/// All configs must describe the same scenario: pattern, simulator, reward,
/// horizon, seed and warmup have to match the first config, otherwise the
/// comparison is rejected naming the differing field.
pub fn compare_controllers(cfgs: &[ExperimentConfig]) -> Result<ComparisonTable, ExperimentError> {
    compare_controller_runs(cfgs).map(|(_, table)| table)
}

/// Like [`compare_controllers`], but also hands back the full per-controller
/// outputs so callers can emit their artifacts without re-running anything.
pub fn compare_controller_runs(
    cfgs: &[ExperimentConfig],
) -> Result<(Vec<ExperimentOutput>, ComparisonTable), ExperimentError> {
    let first = cfgs.first().ok_or(ExperimentError::EmptyComparison)?;
    for (index, cfg) in cfgs.iter().enumerate().skip(1) {
        let field = if cfg.pattern != first.pattern {
            Some("pattern")
        } else if cfg.sim != first.sim {
            Some("sim")
        } else if cfg.reward != first.reward {
            Some("reward")
        } else if cfg.horizon != first.horizon {
            Some("horizon")
        } else if cfg.seed != first.seed {
            Some("seed")
        } else if cfg.warmup != first.warmup {
            Some("warmup")
        } else if cfg.fuzzy != first.fuzzy {
            Some("fuzzy")
        } else {
            None
        };
        if let Some(field) = field {
            return Err(ExperimentError::SharedFieldMismatch { field, index });
        }
    }

    let outputs = cfgs
        .iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>, _>>()?;

    let baselines: Vec<&RunSummary> = outputs
        .iter()
        .filter(|o| matches!(o.config.controller, Controller::Fixed(_)))
        .map(|o| &o.summary)
        .collect();
    let with_deltas = cfgs.len() > 1;

    let rows = outputs
        .iter()
        .map(|o| {
            let mut sla_violation_vs = BTreeMap::new();
            let mut mean_vm_pct_vs = BTreeMap::new();
            if with_deltas {
                for b in &baselines {
                    sla_violation_vs.insert(
                        b.controller.clone(),
                        o.summary.sla_violation_ratio - b.sla_violation_ratio,
                    );
                    mean_vm_pct_vs
                        .insert(b.controller.clone(), o.summary.mean_vm_pct - b.mean_vm_pct);
                }
            }
            ComparisonRow {
                controller: o.summary.controller.clone(),
                summary: o.summary.clone(),
                sla_violation_vs,
                mean_vm_pct_vs,
            }
        })
        .collect();
    Ok((outputs, ComparisonTable { rows }))
}

impl ComparisonTable {
    /// Fixed-width text rendering for terminal output.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>10} {:>10} {:>9} {:>8} {:>10} {:>11}\n",
            "controller", "mean_rt_s", "p95_rt_s", "sla_viol", "vm_pct", "conv_step", "cum_reward"
        ));
        for row in &self.rows {
            let s = &row.summary;
            let conv = s
                .convergence_step
                .map(|c| c.to_string())
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<10} {:>10.4} {:>10.4} {:>9.4} {:>8.2} {:>10} {:>11.2}\n",
                s.controller,
                s.mean_rt_s,
                s.p95_rt_s,
                s.sla_violation_ratio,
                s.mean_vm_pct,
                conv,
                s.cumulative_reward
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{PatternKind, TraceScale};
    use std::io::Write;

    fn small_cfg(controller: Controller) -> ExperimentConfig {
        ExperimentConfig {
            controller,
            horizon: 200,
            seed: 7,
            pattern: PatternSpec {
                kind: PatternKind::PredictableBursting { period: 50 },
                ..PatternSpec::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"controller":"FQL"}"#).unwrap();
        assert_eq!(cfg.controller, Controller::Fql);
        assert_eq!(cfg.horizon, 5000);
        assert_eq!(cfg.agent.eta, 0.1);
        assert_eq!(cfg.agent.gamma, 0.8);
        assert_eq!(cfg.sim.vm_max, 5);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn controller_serde_forms() {
        let c: Controller = serde_json::from_str(r#""FSL""#).unwrap();
        assert_eq!(c, Controller::Fsl);
        let c: Controller = serde_json::from_str(r#"{"fixed": 3}"#).unwrap();
        assert_eq!(c, Controller::Fixed(3));
        assert_eq!(serde_json::to_string(&Controller::Fql).unwrap(), r#""FQL""#);
        assert_eq!(
            serde_json::to_string(&Controller::Fixed(5)).unwrap(),
            r#"{"fixed":5}"#
        );
        assert!(serde_json::from_str::<Controller>(r#""SARSA""#).is_err());
    }

    #[test]
    fn controller_from_str_accepts_cli_forms() {
        assert_eq!("fsl".parse::<Controller>().unwrap(), Controller::Fsl);
        assert_eq!("FQL".parse::<Controller>().unwrap(), Controller::Fql);
        assert_eq!(
            "fixed:2".parse::<Controller>().unwrap(),
            Controller::Fixed(2)
        );
        assert_eq!(
            "fixed(4)".parse::<Controller>().unwrap(),
            Controller::Fixed(4)
        );
        assert!("bang".parse::<Controller>().is_err());
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"controler":"FQL"}"#);
        assert!(err.is_err());
    }

    #[test]
    fn validation_names_bad_cross_field_combinations() {
        let mut cfg = ExperimentConfig::default();
        cfg.warmup = cfg.horizon;
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::WarmupTooLarge { .. })
        ));

        let cfg = ExperimentConfig {
            controller: Controller::Fixed(9),
            ..ExperimentConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::FixedOutOfBounds { n: 9, .. })
        ));
    }

    #[test]
    fn rt_cap_defaults_to_twice_the_sla() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.resolved_sim().rt_cap, 1.2);
        let mut cfg = ExperimentConfig::default();
        cfg.reward.sla_rt = 1.0;
        assert_eq!(cfg.resolved_sim().rt_cap, 2.0);
        cfg.sim.rt_cap = Some(3.0);
        assert_eq!(cfg.resolved_sim().rt_cap, 3.0);
    }

    #[test]
    fn fixed_five_saturates_the_group_from_the_start() {
        let out = run_experiment(&small_cfg(Controller::Fixed(5))).unwrap();
        assert_eq!(out.summary.mean_vm_pct, 100.0);
        assert!(out.records.iter().all(|r| r.vm_active == 5));
        assert!(out.records.iter().all(|r| r.action_applied == 0));
        assert!(out.records.iter().all(|r| r.action_crisp == 0.0));
        assert_eq!(out.summary.scale_ups, 0);
        assert_eq!(out.summary.convergence_step, None);
        assert!(out.final_table.is_none());
    }

    #[test]
    fn fixed_one_saturates_rt_under_heavy_load() {
        let mut cfg = small_cfg(Controller::Fixed(1));
        cfg.pattern = PatternSpec {
            kind: PatternKind::OnOff { dwell: 100 },
            u_min: 99.0,
            u_max: 100.0,
        };
        cfg.horizon = 100; // stays on the high plateau throughout
        let out = run_experiment(&cfg).unwrap();
        assert!(out.records.iter().all(|r| r.rt == 1.2));
        assert_eq!(out.summary.sla_violation_ratio, 1.0);
    }

    #[test]
    fn applied_deltas_reconcile_with_group_size() {
        let out = run_experiment(&small_cfg(Controller::Fql)).unwrap();
        let initial = 1i64; // vm_min warm start
        let sum: i64 = out.records.iter().map(|r| r.action_applied as i64).sum();
        let last = out.records.last().unwrap();
        assert_eq!(initial + sum, last.vm_total as i64);
        assert_eq!(
            out.summary.scale_ups as i64 - out.summary.scale_downs as i64,
            sum
        );
    }

    #[test]
    fn first_interval_reflects_the_warm_start() {
        let out = run_experiment(&small_cfg(Controller::Fql)).unwrap();
        let first = &out.records[0];
        assert_eq!(first.t, 0);
        assert_eq!(first.vm_active, 1);
        // epsilon starts at epsilon0
        assert_eq!(first.epsilon, 1.0);
        // no update has happened yet
        assert_eq!(first.q_delta_max, 0.0);
    }

    #[test]
    fn snapshots_follow_the_configured_cadence() {
        let mut cfg = small_cfg(Controller::Fql);
        cfg.horizon = 250;
        cfg.snapshot_interval = Some(100);
        let out = run_experiment(&cfg).unwrap();
        let at: Vec<u64> = out.snapshots.iter().map(|(t, _)| *t).collect();
        assert_eq!(at, vec![100, 200]);
        assert!(out.final_table.is_some());
    }

    #[test]
    fn exhausted_trace_truncates_and_flags_the_run() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "t,count").unwrap();
        for t in 0..40 {
            writeln!(f, "{t},{}", 20 + t).unwrap();
        }
        f.flush().unwrap();
        let mut cfg = small_cfg(Controller::Fql);
        cfg.horizon = 100;
        cfg.pattern = PatternSpec {
            kind: PatternKind::Trace {
                path: f.path().to_path_buf(),
                scale: TraceScale::None,
            },
            ..PatternSpec::default()
        };
        let out = run_experiment(&cfg).unwrap();
        assert!(out.summary.truncated);
        assert_eq!(out.summary.effective_horizon, 40);
        assert_eq!(out.records.len(), 40);
    }

    #[test]
    fn warmup_is_excluded_from_summary_stats() {
        let mut cfg = small_cfg(Controller::Fixed(1));
        cfg.pattern = PatternSpec {
            kind: PatternKind::OnOff { dwell: 100 },
            u_min: 10.0,
            u_max: 100.0,
        };
        cfg.horizon = 200;
        // first 100 intervals saturate a single VM; skipping them leaves the
        // easy half of the square wave
        cfg.warmup = 100;
        let with_warmup = run_experiment(&cfg).unwrap().summary;
        cfg.warmup = 0;
        let without = run_experiment(&cfg).unwrap().summary;
        assert!(with_warmup.sla_violation_ratio < without.sla_violation_ratio);
        assert_eq!(with_warmup.vm_histogram.values().sum::<u64>(), 100);
    }

    #[test]
    fn compare_rejects_mismatched_shared_fields() {
        let a = small_cfg(Controller::Fql);
        let mut b = small_cfg(Controller::Fsl);
        b.seed = 8;
        let err = compare_controllers(&[a, b]).unwrap_err();
        match err {
            ExperimentError::SharedFieldMismatch { field, index } => {
                assert_eq!(field, "seed");
                assert_eq!(index, 1);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn compare_assembles_rows_in_input_order_with_deltas() {
        let base = small_cfg(Controller::Fql);
        let cfgs = vec![
            base.with_controller(Controller::Fql),
            base.with_controller(Controller::Fixed(1)),
            base.with_controller(Controller::Fixed(5)),
        ];
        let table = compare_controllers(&cfgs).unwrap();
        let labels: Vec<&str> = table.rows.iter().map(|r| r.controller.as_str()).collect();
        assert_eq!(labels, vec!["FQL", "fixed(1)", "fixed(5)"]);
        let fql = &table.rows[0];
        assert_eq!(fql.sla_violation_vs.len(), 2);
        let d51 = fql.mean_vm_pct_vs.get("fixed(5)").unwrap();
        assert!((d51 - (fql.summary.mean_vm_pct - 100.0)).abs() < 1e-12);
        // deltas of a baseline against itself vanish
        let f1 = &table.rows[1];
        assert_eq!(f1.sla_violation_vs.get("fixed(1)"), Some(&0.0));
    }

    #[test]
    fn compare_with_one_config_has_no_deltas() {
        let table = compare_controllers(&[small_cfg(Controller::Fixed(2))]).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!(table.rows[0].sla_violation_vs.is_empty());
        let text = table.render_text();
        assert!(text.contains("fixed(2)"));
    }

    #[test]
    fn reward_is_credited_against_the_observed_interval() {
        let out = run_experiment(&small_cfg(Controller::Fql)).unwrap();
        let reward_cfg = small_cfg(Controller::Fql).resolved_reward();
        for r in &out.records {
            let expect = compute_reward(
                &crate::types::SystemState::new(r.w, r.rt, r.vm_active),
                &reward_cfg,
            );
            assert!((r.reward - expect).abs() < 1e-12);
        }
    }
}
