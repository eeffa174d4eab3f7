//! Virtual queues and the per-sample Lyapunov bounds they obey.

use serde::{Deserialize, Serialize};

use super::{PolicyConfig, ResourceAction};

/// Backlogs `Q_k` (power, mW), `Z_k` (auxiliary) and `G_k` (rate, bits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub q: Vec<f64>,
    pub z: Vec<f64>,
    pub g: Vec<f64>,
}

impl QueueState {
    pub fn zeros(k: usize) -> Self {
        Self {
            q: vec![0.0; k],
            z: vec![0.0; k],
            g: vec![0.0; k],
        }
    }

    pub fn num_stations(&self) -> usize {
        self.q.len()
    }

    /// `L(Θ) = ½ Σ (Q² + Z² + G²)`
    pub fn lyapunov(&self) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        0.5 * (sq(&self.q) + sq(&self.z) + sq(&self.g))
    }

    pub fn all_nonnegative(&self) -> bool {
        self.q.iter().chain(&self.z).chain(&self.g).all(|&x| x >= 0.0)
    }
}

/// `[backlog - service + arrival]^+`, evaluated left to right.
#[inline]
pub(crate) fn queue_step(backlog: f64, service: f64, arrival: f64) -> f64 {
    (backlog - service + arrival).max(0.0)
}

/// Applies one epoch of queue dynamics. Queues the policy does not use are
/// left untouched.
pub fn update_queues(
    state: &QueueState,
    action: &ResourceAction,
    gamma: &[f64],
    cfg: &PolicyConfig,
) -> QueueState {
    let roles = cfg.kind.roles();
    let mut next = state.clone();
    for k in 0..state.num_stations() {
        if roles.q {
            next.q[k] = queue_step(state.q[k], cfg.p_max_avg[k], action.power[k]);
        }
        if roles.z {
            next.z[k] = queue_step(state.z[k], action.rate[k] * cfg.z_scale(k), gamma[k]);
        }
        if roles.g {
            next.g[k] = queue_step(state.g[k], action.rate[k], cfg.r_min[k]);
        }
    }
    next
}

/// The constant of the drift bound as printed for the full three-queue system:
/// `½ Σ_k ((p_k^max)² + (r_k^min)² + P_max² + 3 R_max²)`.
pub fn compute_drift_bound_b(cfg: &PolicyConfig) -> f64 {
    let r2 = cfg.r_max * cfg.r_max;
    let p2 = cfg.p_max_mw * cfg.p_max_mw;
    0.5 * cfg
        .r_min
        .iter()
        .zip(&cfg.p_max_avg)
        .map(|(r, p)| p * p + r * r + p2 + 3.0 * r2)
        .sum::<f64>()
}

/// Drift constant for the queues `cfg.kind` actually maintains. Each active
/// queue contributes the squares of its largest arrival and service per
/// epoch. Equals [`compute_drift_bound_b`] for [`super::PolicyKind::Dpp`].
pub fn drift_bound(cfg: &PolicyConfig) -> f64 {
    let roles = cfg.kind.roles();
    let gamma_cap = cfg.gamma_cap();
    let mut b = 0.0;
    for k in 0..cfg.num_stations() {
        if roles.q {
            b += cfg.p_max_avg[k].powi(2) + cfg.p_max_mw.powi(2);
        }
        if roles.z {
            b += (cfg.r_max * cfg.z_scale(k)).powi(2) + gamma_cap.powi(2);
        }
        if roles.g {
            b += cfg.r_min[k].powi(2) + cfg.r_max.powi(2);
        }
    }
    0.5 * b
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftCheck {
    pub holds: bool,
    /// Right-hand side minus left-hand side; nonnegative when the bound holds.
    pub slack: f64,
}

/// Verifies the sample-path drift bound for one epoch:
///
/// ```text
/// L(Θ(t+1)) - L(Θ(t)) <= B + Σ Q_k (p_k - p_k^max)
///                          + Σ Z_k (γ_k - r_k) + Σ G_k (r_k^min - r_k)
/// ```
///
/// with `B` from [`drift_bound`] and the `Z` service scaled by
/// [`PolicyConfig::z_scale`].
pub fn check_drift_inequality(
    prev: &QueueState,
    next: &QueueState,
    action: &ResourceAction,
    gamma: &[f64],
    cfg: &PolicyConfig,
) -> DriftCheck {
    let roles = cfg.kind.roles();
    let lhs = next.lyapunov() - prev.lyapunov();
    let mut rhs = drift_bound(cfg);
    for k in 0..prev.num_stations() {
        if roles.q {
            rhs += prev.q[k] * (action.power[k] - cfg.p_max_avg[k]);
        }
        if roles.z {
            rhs += prev.z[k] * (gamma[k] - action.rate[k] * cfg.z_scale(k));
        }
        if roles.g {
            rhs += prev.g[k] * (cfg.r_min[k] - action.rate[k]);
        }
    }
    let slack = rhs - lhs;
    DriftCheck {
        holds: slack >= 0.0,
        slack,
    }
}

/// Checks `Q(t) - Q(0) >= Σ_{τ<t} p(τ) - t·p_max` at every prefix `t`.
///
/// `q_history` holds `Q(0..=T)` and `p_history` holds `p(0..T)`.
pub fn check_telescoping(q_history: &[f64], p_history: &[f64], p_max: f64) -> bool {
    let service = vec![p_max; p_history.len()];
    check_telescoping_general(q_history, &service, p_history)
}

/// Telescoping check for any `X(t+1) = [X(t) - b(t) + a(t)]^+` queue:
/// `X(t) >= X(0) + Σ_{τ<t} (a(τ) - b(τ))` at every prefix. The right-hand
/// side is accumulated with the same operation order as the queue update,
/// so the comparison is exact in floating point.
pub fn check_telescoping_general(backlog: &[f64], service: &[f64], arrival: &[f64]) -> bool {
    if backlog.len() != service.len() + 1 || service.len() != arrival.len() {
        return false;
    }
    let mut unclamped = backlog[0];
    for t in 0..service.len() {
        unclamped = unclamped - service[t] + arrival[t];
        if backlog[t + 1] < unclamped {
            return false;
        }
    }
    true
}
