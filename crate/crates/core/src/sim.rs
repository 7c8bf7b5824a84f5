//! Deterministic discrete-time cloud model: a VM group with boot delays and an
//! M/M/1-style response-time curve per instance behind a round-robin balancer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ScalingAction, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub vm_min: u32,
    pub vm_max: u32,
    /// Per-VM service capacity in requests/sec.
    pub per_vm_capacity: f64,
    /// Response-time floor (network and processing overhead) in seconds.
    pub rt_floor: f64,
    /// Response time reported when the group is saturated, in seconds.
    pub rt_cap: f64,
    /// Intervals a new instance spends booting before it serves traffic.
    pub boot_delay: u32,
    /// Instances present (and already active) at the start of a run.
    pub initial_vms: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            vm_min: 1,
            vm_max: 5,
            per_vm_capacity: 30.0,
            rt_floor: 0.05,
            rt_cap: 1.2,
            boot_delay: 2,
            initial_vms: 1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("vm bounds invalid: vm_min={vm_min}, vm_max={vm_max} (need 1 <= min <= max)")]
    BadVmBounds { vm_min: u32, vm_max: u32 },
    #[error("per_vm_capacity must be positive, got {0}")]
    BadCapacity(f64),
    #[error("rt_floor must be non-negative and below rt_cap, got floor={floor}, cap={cap}")]
    BadResponseTimes { floor: f64, cap: f64 },
    #[error("initial_vms={initial} outside [{vm_min}, {vm_max}]")]
    BadInitialSize {
        initial: u32,
        vm_min: u32,
        vm_max: u32,
    },
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.vm_min < 1 || self.vm_max < self.vm_min {
            return Err(SimError::BadVmBounds {
                vm_min: self.vm_min,
                vm_max: self.vm_max,
            });
        }
        if self.per_vm_capacity <= 0.0 || self.per_vm_capacity.is_nan() {
            return Err(SimError::BadCapacity(self.per_vm_capacity));
        }
        if !(self.rt_floor >= 0.0 && self.rt_floor < self.rt_cap) {
            return Err(SimError::BadResponseTimes {
                floor: self.rt_floor,
                cap: self.rt_cap,
            });
        }
        if self.initial_vms < self.vm_min || self.initial_vms > self.vm_max {
            return Err(SimError::BadInitialSize {
                initial: self.initial_vms,
                vm_min: self.vm_min,
                vm_max: self.vm_max,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VmPhase {
    /// Still booting; `remaining` advance calls left before serving.
    Booting {
        remaining: u32,
    },
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VmInstance {
    pub id: u64,
    pub phase: VmPhase,
}

/// Average response time of the balanced group: each active VM sees an equal
/// share of the workload and answers along an M/M/1 latency curve, saturating
/// at `rt_cap` once its arrival share reaches the service capacity.
///
/// The unsaturated branch is clipped at `rt_cap` too, so response time is
/// monotone in the workload all the way into saturation.
pub fn response_time(active: u32, workload: f64, cfg: &SimConfig) -> f64 {
    if active == 0 {
        return cfg.rt_cap;
    }
    let arrival = workload.max(0.0) / active as f64;
    if arrival < cfg.per_vm_capacity {
        (cfg.rt_floor + 1.0 / (cfg.per_vm_capacity - arrival)).min(cfg.rt_cap)
    } else {
        cfg.rt_cap
    }
}

/// The scaling group state: instance list plus the group's scaling bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    cfg: SimConfig,
    instances: Vec<VmInstance>,
    next_id: u64,
}

impl Cluster {
    /// Starts a group of `initial_vms` instances, all already serving.
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let instances = (0..cfg.initial_vms as u64)
            .map(|id| VmInstance {
                id,
                phase: VmPhase::Active,
            })
            .collect::<Vec<_>>();
        Ok(Self {
            next_id: cfg.initial_vms as u64,
            cfg,
            instances,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn instances(&self) -> &[VmInstance] {
        &self.instances
    }

    pub fn active_count(&self) -> u32 {
        self.instances
            .iter()
            .filter(|vm| vm.phase == VmPhase::Active)
            .count() as u32
    }

    pub fn total_count(&self) -> u32 {
        self.instances.len() as u32
    }

    /// Observation for the current workload; booting instances are invisible.
    pub fn observe(&self, workload: f64) -> SystemState {
        let active = self.active_count();
        SystemState::new(workload, response_time(active, workload, &self.cfg), active)
    }

    /// Requests a size change. The target is clamped into [vm_min, vm_max]
    /// (counting booting instances); returns the delta actually applied.
    ///
    /// Scale-downs cancel booting instances first (newest first), then retire
    /// the newest active ones.
    pub fn apply_scale(&mut self, action: ScalingAction) -> i32 {
        let total = self.total_count() as i64;
        let target =
            (total + action.delta() as i64).clamp(self.cfg.vm_min as i64, self.cfg.vm_max as i64);
        let applied = target - total;
        if applied > 0 {
            for _ in 0..applied {
                let phase = if self.cfg.boot_delay == 0 {
                    VmPhase::Active
                } else {
                    VmPhase::Booting {
                        remaining: self.cfg.boot_delay,
                    }
                };
                self.instances.push(VmInstance {
                    id: self.next_id,
                    phase,
                });
                self.next_id += 1;
            }
        } else {
            for _ in 0..(-applied) {
                let victim = self
                    .instances
                    .iter()
                    .rposition(|vm| matches!(vm.phase, VmPhase::Booting { .. }))
                    .or_else(|| {
                        self.instances
                            .iter()
                            .rposition(|vm| vm.phase == VmPhase::Active)
                    })
                    .expect("clamped target never empties the group");
                self.instances.remove(victim);
            }
        }
        applied as i32
    }

    /// Advances one interval: boot countdowns tick down, instances reaching
    /// zero start serving, and the new observation for `workload` is returned
    /// with the freshly promoted instances already counted.
    pub fn advance(&mut self, workload: f64) -> SystemState {
        for vm in &mut self.instances {
            if let VmPhase::Booting { remaining } = &mut vm.phase {
                *remaining -= 1;
                if *remaining == 0 {
                    vm.phase = VmPhase::Active;
                }
            }
        }
        self.observe(workload)
    }
}

/// Anything the harness can scale: observe it, request a size change, advance
/// one control interval.
pub trait ScalingTarget {
    fn observe(&self, workload: f64) -> SystemState;
    fn scale(&mut self, action: ScalingAction) -> i32;
    fn advance(&mut self, workload: f64) -> SystemState;
}

impl ScalingTarget for Cluster {
    fn observe(&self, workload: f64) -> SystemState {
        Cluster::observe(self, workload)
    }

    fn scale(&mut self, action: ScalingAction) -> i32 {
        self.apply_scale(action)
    }

    fn advance(&mut self, workload: f64) -> SystemState {
        Cluster::advance(self, workload)
    }
}
