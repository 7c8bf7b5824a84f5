//! Shared fixtures for the integration tests: a small deterministic 9-state MDP
//! whose states correspond to one-hot firings of the default partitions, plus
//! independently written tabular SARSA / Q-learning reference implementations.

use frlscale_core::SystemState;

/// Workload levels at which exactly one workload set fires with degree 1.
pub const CRISP_W: [f64; 3] = [5.0, 55.0, 110.0];
/// Response times at which exactly one response-time set fires with degree 1
/// (for the default partitions at SLA 0.6 s).
pub const CRISP_RT: [f64; 3] = [0.06, 0.6, 1.05];

/// Observation whose firing vector is one-hot at `state` (0..9, row-major:
/// workload set × 3 + response set).
pub fn crisp_obs(state: usize) -> SystemState {
    SystemState::new(CRISP_W[state / 3], CRISP_RT[state % 3], 1)
}

const STATE_REWARD: [f64; 9] = [0.9, 0.3, -0.8, 0.2, 0.6, -0.4, 0.0, -1.0, 0.5];

/// Deterministic ring-walk environment over the 9 crisp states: the action
/// delta moves the state index (mod 9) and the reward depends on where you
/// land, minus a small cost for moving at all.
pub fn env_step(state: usize, delta: i32) -> (usize, f64) {
    let next = (state as i32 + delta).rem_euclid(9) as usize;
    (next, STATE_REWARD[next] - 0.05 * delta.abs() as f64)
}

/// Greedy tie preference: smallest |delta| first, negative before positive.
/// Expressed as action indices for deltas [0, -1, +1, -2, +2].
const PREFERENCE: [usize; 5] = [2, 1, 3, 0, 4];

/// Independently written greedy pick: take the maximum cell value, then the
/// first index in preference order that attains it.
pub fn oracle_greedy(row: &[f64; 5]) -> usize {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for &idx in &PREFERENCE {
        if row[idx] == max {
            return idx;
        }
    }
    unreachable!("a finite row always attains its maximum");
}

/// Plain tabular q-table over the 9 crisp states.
pub type Tabular = [[f64; 5]; 9];

/// One on-policy update: the target bootstraps from the action actually chosen
/// for the next state.
#[allow(clippy::too_many_arguments)]
pub fn sarsa_update(
    q: &mut Tabular,
    s_prev: usize,
    a_prev: usize,
    reward: f64,
    s_next: usize,
    a_next: usize,
    eta: f64,
    gamma: f64,
) {
    let target = reward + gamma * q[s_next][a_next];
    q[s_prev][a_prev] += eta * (target - q[s_prev][a_prev]);
}

/// One off-policy update: the target bootstraps from the best cell of the next
/// state, regardless of what gets chosen there.
pub fn qlearning_update(
    q: &mut Tabular,
    s_prev: usize,
    a_prev: usize,
    reward: f64,
    s_next: usize,
    eta: f64,
    gamma: f64,
) {
    let best = q[s_next].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let target = reward + gamma * best;
    q[s_prev][a_prev] += eta * (target - q[s_prev][a_prev]);
}
