//! Fuzzy inference machinery: membership functions, input partitions, the 3x3 rule
//! base and the weighted-average action combiner.
//!
//! Both input variables (workload, response time) are covered by a Ruspini
//! partition of three sets, so the nine rule firing strengths always sum to one
//! and at most four rules fire for any crisp input.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ScalingAction, SystemState, ACTION_DELTAS};

/// Number of rules in the rule base (3 workload sets x 3 response-time sets).
pub const RULE_COUNT: usize = 9;
/// Number of consequent actions available per rule.
pub const ACTION_COUNT: usize = ACTION_DELTAS.len();

/// Per-rule action choices, as indices into [`ACTION_DELTAS`].
pub type RuleChoices = [usize; RULE_COUNT];

#[derive(Debug, Error, PartialEq)]
pub enum FuzzyError {
    #[error("membership breakpoints must be non-decreasing, got {0:?}")]
    UnorderedBreakpoints(Vec<f64>),
    #[error("partition '{variable}' needs exactly 3 sets, got {got}")]
    WrongSetCount { variable: String, got: usize },
    #[error("partition '{variable}' domain is empty or inverted: [{lo}, {hi}]")]
    EmptyDomain { variable: String, lo: f64, hi: f64 },
    #[error("partition '{variable}' does not sum to 1 at x={x} (sum={sum})")]
    NotAPartition { variable: String, x: f64, sum: f64 },
    #[error("partition '{variable}' must reach membership 1 at both domain ends")]
    OpenShoulder { variable: String },
    #[error("firing strength {0} outside [0, 1]")]
    StrengthOutOfRange(f64),
    #[error("firing strengths sum to {0}, expected 1")]
    StrengthsNotNormalized(f64),
}

/// Piecewise-linear membership function over one input variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MembershipFunction {
    /// Ramp up over [a, b], ramp down over [b, c].
    #[serde(rename = "triangle")]
    Triangular { a: f64, b: f64, c: f64 },
    /// Ramp up over [a, b], plateau over [b, c], ramp down over [c, d].
    #[serde(rename = "trapezoid")]
    Trapezoidal { a: f64, b: f64, c: f64, d: f64 },
}

impl MembershipFunction {
    pub fn triangular(a: f64, b: f64, c: f64) -> Result<Self, FuzzyError> {
        if a <= b && b <= c {
            Ok(Self::Triangular { a, b, c })
        } else {
            Err(FuzzyError::UnorderedBreakpoints(vec![a, b, c]))
        }
    }

    pub fn trapezoidal(a: f64, b: f64, c: f64, d: f64) -> Result<Self, FuzzyError> {
        if a <= b && b <= c && c <= d {
            Ok(Self::Trapezoidal { a, b, c, d })
        } else {
            Err(FuzzyError::UnorderedBreakpoints(vec![a, b, c, d]))
        }
    }

    /// Degree of membership of `x`, always in [0, 1].
    ///
    /// Degenerate segments (equal breakpoints) are treated as crisp edges: the
    /// plateau value wins on the shared point.
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Triangular { a, b, c } => {
                if x < a || x > c {
                    0.0
                } else if x == b {
                    1.0
                } else if x < b {
                    ramp_up(x, a, b)
                } else {
                    ramp_down(x, b, c)
                }
            }
            Self::Trapezoidal { a, b, c, d } => {
                if x < a || x > d {
                    0.0
                } else if x >= b && x <= c {
                    1.0
                } else if x < b {
                    ramp_up(x, a, b)
                } else {
                    ramp_down(x, c, d)
                }
            }
        }
    }

    /// Steepest absolute slope of any linear segment, used for Lipschitz bounds.
    pub fn max_slope(&self) -> f64 {
        let segs: &[(f64, f64)] = match *self {
            Self::Triangular { a, b, c } => &[(a, b), (b, c)],
            Self::Trapezoidal { a, b, c, d } => &[(a, b), (c, d)],
        };
        segs.iter()
            .filter(|(lo, hi)| hi > lo)
            .map(|(lo, hi)| 1.0 / (hi - lo))
            .fold(0.0, f64::max)
    }
}

fn ramp_up(x: f64, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        // vertical edge: x < hi here, so membership has not started yet
        0.0
    } else {
        (x - lo) / (hi - lo)
    }
}

fn ramp_down(x: f64, lo: f64, hi: f64) -> f64 {
    if hi == lo {
        0.0
    } else {
        (x - hi) / (lo - hi)
    }
}

/// A named Ruspini partition of one input variable into three fuzzy sets.
///
/// Construction verifies on a dense grid that memberships sum to one across the
/// whole domain and that the outer sets keep full membership at the domain ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyPartition {
    variable: String,
    domain: (f64, f64),
    sets: Vec<(String, MembershipFunction)>,
}

const PARTITION_TOLERANCE: f64 = 1e-9;
const PARTITION_CHECK_POINTS: usize = 1001;

impl FuzzyPartition {
    pub fn new(
        variable: impl Into<String>,
        domain: (f64, f64),
        sets: Vec<(String, MembershipFunction)>,
    ) -> Result<Self, FuzzyError> {
        let variable = variable.into();
        if domain.0 >= domain.1 || domain.0.is_nan() || domain.1.is_nan() {
            return Err(FuzzyError::EmptyDomain {
                variable,
                lo: domain.0,
                hi: domain.1,
            });
        }
        if sets.len() != 3 {
            return Err(FuzzyError::WrongSetCount {
                variable,
                got: sets.len(),
            });
        }
        let partition = Self {
            variable,
            domain,
            sets,
        };
        partition.check_unity()?;
        Ok(partition)
    }

    fn check_unity(&self) -> Result<(), FuzzyError> {
        let (lo, hi) = self.domain;
        for i in 0..PARTITION_CHECK_POINTS {
            let x = lo + (hi - lo) * i as f64 / (PARTITION_CHECK_POINTS - 1) as f64;
            let sum: f64 = self.sets.iter().map(|(_, mf)| mf.eval(x)).sum();
            if (sum - 1.0).abs() > PARTITION_TOLERANCE {
                return Err(FuzzyError::NotAPartition {
                    variable: self.variable.clone(),
                    x,
                    sum,
                });
            }
        }
        let first = &self.sets[0].1;
        let last = &self.sets[2].1;
        if (first.eval(lo) - 1.0).abs() > PARTITION_TOLERANCE
            || (last.eval(hi) - 1.0).abs() > PARTITION_TOLERANCE
        {
            return Err(FuzzyError::OpenShoulder {
                variable: self.variable.clone(),
            });
        }
        Ok(())
    }

    /// Default workload partition over [0, 120] users/sec: low / medium / high.
    pub fn default_workload() -> Self {
        Self::new(
            "workload",
            (0.0, 120.0),
            vec![
                (
                    "low".into(),
                    MembershipFunction::trapezoidal(0.0, 0.0, 10.0, 55.0).unwrap(),
                ),
                (
                    "medium".into(),
                    MembershipFunction::triangular(10.0, 55.0, 100.0).unwrap(),
                ),
                (
                    "high".into(),
                    MembershipFunction::trapezoidal(55.0, 100.0, 120.0, 120.0).unwrap(),
                ),
            ],
        )
        .expect("default workload partition is valid")
    }

    /// Default response-time partition over [0, 2*sla] seconds: good / ok / bad.
    ///
    /// Breakpoints scale with the SLA threshold so the "ok" peak sits exactly on
    /// the SLA boundary.
    pub fn default_response_time(sla_rt: f64) -> Self {
        assert!(sla_rt > 0.0, "sla_rt must be positive");
        Self::new(
            "response_time",
            (0.0, 2.0 * sla_rt),
            vec![
                (
                    "good".into(),
                    MembershipFunction::trapezoidal(0.0, 0.0, 0.2 * sla_rt, sla_rt).unwrap(),
                ),
                (
                    "ok".into(),
                    MembershipFunction::triangular(0.2 * sla_rt, sla_rt, 1.5 * sla_rt).unwrap(),
                ),
                (
                    "bad".into(),
                    MembershipFunction::trapezoidal(
                        sla_rt,
                        1.5 * sla_rt,
                        2.0 * sla_rt,
                        2.0 * sla_rt,
                    )
                    .unwrap(),
                ),
            ],
        )
        .expect("default response-time partition is valid")
    }

    pub fn variable(&self) -> &str {
        &self.variable
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn set_names(&self) -> impl Iterator<Item = &str> {
        self.sets.iter().map(|(name, _)| name.as_str())
    }

    /// Clamps `x` into the domain, then evaluates all three memberships.
    pub fn memberships(&self, x: f64) -> [f64; 3] {
        let x = x.clamp(self.domain.0, self.domain.1);
        [
            self.sets[0].1.eval(x),
            self.sets[1].1.eval(x),
            self.sets[2].1.eval(x),
        ]
    }

    pub fn membership(&self, set: usize, x: f64) -> f64 {
        let x = x.clamp(self.domain.0, self.domain.1);
        self.sets[set].1.eval(x)
    }

    /// Steepest membership slope across the partition's sets.
    pub fn max_slope(&self) -> f64 {
        self.sets
            .iter()
            .map(|(_, mf)| mf.max_slope())
            .fold(0.0, f64::max)
    }
}

/// One rule antecedent: a (workload set, response-time set) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub workload_set: usize,
    pub response_set: usize,
}

/// The complete rule base: the 3x3 cross product of input sets in row-major
/// order (workload outer, response time inner), sharing one action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleBase {
    rules: [Rule; RULE_COUNT],
    action_set: [i32; ACTION_COUNT],
}

impl RuleBase {
    /// The standard rule base; its layout is fixed by the controller design.
    pub fn standard() -> Self {
        let mut rules = [Rule {
            workload_set: 0,
            response_set: 0,
        }; RULE_COUNT];
        for w in 0..3 {
            for r in 0..3 {
                rules[w * 3 + r] = Rule {
                    workload_set: w,
                    response_set: r,
                };
            }
        }
        Self {
            rules,
            action_set: ACTION_DELTAS,
        }
    }

    pub fn rules(&self) -> &[Rule; RULE_COUNT] {
        &self.rules
    }

    pub fn action_set(&self) -> &[i32; ACTION_COUNT] {
        &self.action_set
    }

    /// Rule index for a (workload set, response-time set) pair.
    pub fn rule_index(workload_set: usize, response_set: usize) -> usize {
        workload_set * 3 + response_set
    }

    pub fn action_delta(&self, index: usize) -> i32 {
        self.action_set[index]
    }
}

impl Default for RuleBase {
    fn default() -> Self {
        Self::standard()
    }
}

/// Rule activation levels for one observation, kept together with the state
/// that produced them so updates can reuse the old state's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringVector {
    strengths: [f64; RULE_COUNT],
    state: SystemState,
}

impl FiringVector {
    /// Builds a firing vector from raw strengths; they must form a convex
    /// weighting (each in [0, 1], summing to one).
    pub fn new(strengths: [f64; RULE_COUNT], state: SystemState) -> Result<Self, FuzzyError> {
        for &s in &strengths {
            if !(0.0..=1.0).contains(&s) {
                return Err(FuzzyError::StrengthOutOfRange(s));
            }
        }
        let sum: f64 = strengths.iter().sum();
        if (sum - 1.0).abs() > PARTITION_TOLERANCE {
            return Err(FuzzyError::StrengthsNotNormalized(sum));
        }
        Ok(Self { strengths, state })
    }

    pub fn strengths(&self) -> &[f64; RULE_COUNT] {
        &self.strengths
    }

    pub fn strength(&self, rule: usize) -> f64 {
        self.strengths[rule]
    }

    pub fn state(&self) -> SystemState {
        self.state
    }

    pub fn nonzero_count(&self) -> usize {
        self.strengths.iter().filter(|&&s| s > 0.0).count()
    }
}

/// Evaluates every rule's firing strength for `state` using product conjunction
/// of the two antecedent memberships. Inputs are clamped into the partition
/// domains first.
pub fn fire_rules(
    rule_base: &RuleBase,
    workload_sets: &FuzzyPartition,
    response_sets: &FuzzyPartition,
    state: SystemState,
) -> FiringVector {
    let mu_w = workload_sets.memberships(state.w);
    let mu_rt = response_sets.memberships(state.rt);
    let mut strengths = [0.0; RULE_COUNT];
    for (i, rule) in rule_base.rules().iter().enumerate() {
        strengths[i] = mu_w[rule.workload_set] * mu_rt[rule.response_set];
    }
    FiringVector { strengths, state }
}

/// Combines per-rule action choices into one crisp action: the firing-strength
/// weighted average of the chosen deltas.
pub fn combine_action(firing: &FiringVector, choices: &RuleChoices, rule_base: &RuleBase) -> f64 {
    firing
        .strengths
        .iter()
        .zip(choices.iter())
        .map(|(&mu, &choice)| mu * rule_base.action_delta(choice) as f64)
        .sum()
}

/// Rounds a crisp action to the nearest integer delta, halves away from zero.
pub fn discretize_action(crisp: f64) -> ScalingAction {
    let rounded = crisp.round().clamp(-2.0, 2.0) as i32;
    ScalingAction::new(rounded).expect("rounded crisp action stays within the action set")
}
