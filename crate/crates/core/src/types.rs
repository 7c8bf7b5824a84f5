//! Shared observation and action types used across the controller, simulator and harness.

use serde::{Deserialize, Serialize};

/// One observation of the scaling target at a control interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    /// Incoming workload in users/sec.
    pub w: f64,
    /// Average request response time in seconds.
    pub rt: f64,
    /// Number of VM instances currently serving traffic (booting ones excluded).
    pub vm: u32,
}

impl SystemState {
    pub fn new(w: f64, rt: f64, vm: u32) -> Self {
        Self { w, rt, vm }
    }
}

/// A discrete scaling decision: add or remove up to two instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalingAction(i32);

/// Consequent deltas available to every rule, ordered by index.
pub const ACTION_DELTAS: [i32; 5] = [-2, -1, 0, 1, 2];

impl ScalingAction {
    /// Builds an action, rejecting deltas outside the {-2..+2} action set.
    pub fn new(delta: i32) -> Option<Self> {
        if (-2..=2).contains(&delta) {
            Some(Self(delta))
        } else {
            None
        }
    }

    pub fn delta(self) -> i32 {
        self.0
    }

    /// Index of this action's delta inside [`ACTION_DELTAS`].
    pub fn index(self) -> usize {
        (self.0 + 2) as usize
    }

    pub fn from_index(index: usize) -> Self {
        Self(ACTION_DELTAS[index])
    }
}
