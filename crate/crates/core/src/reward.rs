//! Reward shaping: SLA performance minus weighted resource cost.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::SystemState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Response-time SLA threshold in seconds.
    pub sla_rt: f64,
    /// Weight of the resource-cost term (beta).
    pub cost_weight: f64,
    pub vm_min: u32,
    pub vm_max: u32,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            sla_rt: 0.6,
            cost_weight: 0.3,
            vm_min: 1,
            vm_max: 5,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("sla_rt must be positive, got {0}")]
    BadSla(f64),
    #[error("cost_weight must be in [0, 1], got {0}")]
    BadCostWeight(f64),
    #[error("vm bounds invalid: vm_min={vm_min}, vm_max={vm_max}")]
    BadVmBounds { vm_min: u32, vm_max: u32 },
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if self.sla_rt <= 0.0 || self.sla_rt.is_nan() {
            return Err(RewardError::BadSla(self.sla_rt));
        }
        if !(0.0..=1.0).contains(&self.cost_weight) {
            return Err(RewardError::BadCostWeight(self.cost_weight));
        }
        if self.vm_min < 1 || self.vm_max < self.vm_min {
            return Err(RewardError::BadVmBounds {
                vm_min: self.vm_min,
                vm_max: self.vm_max,
            });
        }
        Ok(())
    }
}

/// Reward for one observation: `perf - beta * cost`.
///
/// `perf` is the relative SLA headroom `(sla_rt - rt) / sla_rt` clamped to
/// [-1, 1]; `cost` is the linear position of the active VM count inside the
/// scaling bounds. The result lives in [-1 - beta, 1].
pub fn compute_reward(obs: &SystemState, cfg: &RewardConfig) -> f64 {
    let perf = ((cfg.sla_rt - obs.rt) / cfg.sla_rt).clamp(-1.0, 1.0);
    let span = cfg.vm_max.saturating_sub(cfg.vm_min);
    let cost = if span == 0 {
        // degenerate bounds: a fixed-size group carries no cost signal
        0.0
    } else {
        (obs.vm.saturating_sub(cfg.vm_min)) as f64 / span as f64
    };
    perf - cfg.cost_weight * cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(rt: f64, vm: u32) -> SystemState {
        SystemState::new(50.0, rt, vm)
    }

    #[test]
    fn reward_at_the_sla_boundary_is_pure_cost() {
        let cfg = RewardConfig::default();
        // rt exactly at the SLA: perf = 0, only the cost term remains
        let r = compute_reward(&obs(0.6, 3), &cfg);
        assert!((r - (-0.3 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn perf_clamps_at_twice_the_sla() {
        let cfg = RewardConfig::default();
        let r_2x = compute_reward(&obs(1.2, 1), &cfg);
        let r_worse = compute_reward(&obs(5.0, 1), &cfg);
        assert!((r_2x - (-1.0)).abs() < 1e-12);
        assert_eq!(r_2x, r_worse, "perf saturates below -1");
    }

    #[test]
    fn best_case_reward_is_one() {
        let cfg = RewardConfig::default();
        let r = compute_reward(&obs(0.0, 1), &cfg);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_vm_bounds_cost_nothing() {
        let cfg = RewardConfig {
            vm_min: 3,
            vm_max: 3,
            ..RewardConfig::default()
        };
        let r = compute_reward(&obs(0.3, 3), &cfg);
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let bad_sla = RewardConfig {
            sla_rt: 0.0,
            ..RewardConfig::default()
        };
        assert!(bad_sla.validate().is_err());
        let bad_weight = RewardConfig {
            cost_weight: 1.5,
            ..RewardConfig::default()
        };
        assert!(bad_weight.validate().is_err());
        let bad_bounds = RewardConfig {
            vm_min: 4,
            vm_max: 2,
            ..RewardConfig::default()
        };
        assert!(bad_bounds.validate().is_err());
    }

    proptest! {
        #[test]
        fn reward_stays_in_range(rt in 0.0..10.0f64, vm in 1u32..=5) {
            let cfg = RewardConfig::default();
            let r = compute_reward(&obs(rt, vm), &cfg);
            prop_assert!(r >= -1.0 - cfg.cost_weight - 1e-12);
            prop_assert!(r <= 1.0 + 1e-12);
        }

        #[test]
        fn reward_never_improves_with_slower_responses(
            rt in 0.0..5.0f64,
            bump in 0.0..5.0f64,
            vm in 1u32..=5,
        ) {
            let cfg = RewardConfig::default();
            let r0 = compute_reward(&obs(rt, vm), &cfg);
            let r1 = compute_reward(&obs(rt + bump, vm), &cfg);
            prop_assert!(r1 <= r0 + 1e-12);
        }

        #[test]
        fn reward_strictly_penalizes_extra_vms(rt in 0.0..5.0f64, vm in 1u32..5) {
            let cfg = RewardConfig::default();
            let r0 = compute_reward(&obs(rt, vm), &cfg);
            let r1 = compute_reward(&obs(rt, vm + 1), &cfg);
            prop_assert!(r1 < r0);
        }
    }
}
