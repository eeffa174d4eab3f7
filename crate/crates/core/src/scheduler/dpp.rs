//! One epoch of drift-plus-penalty: auxiliary choice, per-pair power
//! control, then a single assignment solve.

use crate::assignment::{solve_max_assignment, WeightMatrix};
use crate::channel::RateTable;
use crate::error::{Error, Result};

use super::queues::update_queues;
use super::{Grant, PolicyConfig, PolicyKind, QueueState, ResourceAction};

/// Outcome of one scheduled epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDecision {
    pub action: ResourceAction,
    /// Auxiliary values chosen for the epoch (zeros when unused).
    pub gamma: Vec<f64>,
    pub queues_before: QueueState,
    pub queues_after: QueueState,
}

/// Per-station argmax of `V·U(γ) - Z_k·γ` over the auxiliary grid; ties go
/// to the larger `γ`.
pub fn choose_aux_separable(z: &[f64], cfg: &PolicyConfig) -> Vec<f64> {
    z.iter()
        .map(|&zk| {
            let mut best = (f64::NEG_INFINITY, 0.0);
            for &gamma in &cfg.aux_grid {
                let value = cfg.v * cfg.utility.eval(gamma) - zk * gamma;
                if value >= best.0 {
                    best = (value, gamma);
                }
            }
            best.1
        })
        .collect()
}

/// Threshold rule for max-min utilities: every `γ_k = cap` when `V > Σ Z_k`,
/// otherwise all zero.
pub fn choose_aux_minmax(z: &[f64], v: f64, cap: f64) -> Vec<f64> {
    let total: f64 = z.iter().sum();
    let gamma = if v > total { cap } else { 0.0 };
    vec![gamma; z.len()]
}

/// Maximizes `rate_coeff·r(p) - power_coeff·p` over the power levels; ties
/// go to the lower power. Returns `(power index, weight)`.
pub fn optimize_power(
    rates_by_power: &[f64],
    powers_mw: &[f64],
    rate_coeff: f64,
    power_coeff: f64,
) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (m, (&r, &p)) in rates_by_power.iter().zip(powers_mw).enumerate() {
        let w = rate_coeff * r - power_coeff * p;
        if w > best.1 {
            best = (m, w);
        }
    }
    best
}

/// Per-station `(rate coefficient, power coefficient)` of the reduced
/// pair weight `c_r·r_{k,n}(p) - c_p·p`.
fn weight_coefficients(queues: &QueueState, cfg: &PolicyConfig, k: usize) -> (f64, f64) {
    match cfg.kind {
        PolicyKind::Esrm => (cfg.v + queues.g[k], queues.q[k]),
        PolicyKind::Wmm => (queues.z[k] * cfg.z_scale(k), queues.q[k]),
        PolicyKind::Mm => (queues.z[k] * cfg.z_scale(k), 0.0),
        _ => (queues.z[k] + queues.g[k], queues.q[k]),
    }
}

/// Runs one drift-plus-penalty epoch for the queue-based policies.
///
/// The pair weight drops the station constants `G_k r_k^min` and
/// `Q_k p_k^max` of the full objective, so leaving a station idle is scored
/// correctly; the maximizer over all actions is unchanged.
pub fn dpp_epoch(
    queues: &QueueState,
    rates: &RateTable,
    powers_mw: &[f64],
    cfg: &PolicyConfig,
) -> Result<EpochDecision> {
    let k = cfg.num_stations();
    let n = rates.num_rus();
    if !cfg.kind.is_queue_based() {
        return Err(Error::Config(format!("{} is not a queue-based policy", cfg.kind)));
    }
    if queues.num_stations() != k || rates.num_stations() != k {
        return Err(Error::Dimension {
            what: "stations in queues / rate table",
            expected: k,
            actual: if queues.num_stations() != k { queues.num_stations() } else { rates.num_stations() },
        });
    }
    if rates.num_powers() != powers_mw.len() || powers_mw.is_empty() {
        return Err(Error::Dimension {
            what: "power levels",
            expected: powers_mw.len(),
            actual: rates.num_powers(),
        });
    }

    let gamma = match cfg.kind {
        PolicyKind::Dpp => choose_aux_separable(&queues.z, cfg),
        PolicyKind::Wmm | PolicyKind::Mm => choose_aux_minmax(&queues.z, cfg.v, cfg.gamma_cap()),
        _ => vec![0.0; k],
    };

    // MM transmits at full power only.
    let first_power = if cfg.kind == PolicyKind::Mm { powers_mw.len() - 1 } else { 0 };
    let powers = &powers_mw[first_power..];

    let mut weights = Vec::with_capacity(k * n);
    let mut best_power = Vec::with_capacity(k * n);
    for station in 0..k {
        let (rate_coeff, power_coeff) = weight_coefficients(queues, cfg, station);
        for ru in 0..n {
            let by_power = &rates.by_power(station, ru)[first_power..];
            let (m, w) = optimize_power(by_power, powers, rate_coeff, power_coeff);
            weights.push(w);
            best_power.push(first_power + m);
        }
    }
    let matrix = WeightMatrix::new(k, n, weights)?;
    let assignment = solve_max_assignment(&matrix, true);

    let grants = assignment
        .pairs
        .iter()
        .map(|&(station, ru)| {
            let m = best_power[station * n + ru];
            Grant {
                station,
                ru,
                power_index: m,
                power_mw: powers_mw[m],
                rate_bits: rates.get(station, ru, m),
            }
        })
        .collect();
    let action = ResourceAction::from_grants(k, grants);
    let queues_after = update_queues(queues, &action, &gamma, cfg);
    Ok(EpochDecision {
        action,
        gamma,
        queues_before: queues.clone(),
        queues_after,
    })
}

/// Full per-epoch resource objective of an action:
/// `Σ_k [Z_k r_k + G_k (r_k - r_k^min) + Q_k (p_k^max - p_k)]`, restricted
/// to the queues the policy maintains (`V` replaces `Z_k` under ESRM and
/// `r_k` is scaled by [`PolicyConfig::z_scale`] in the `Z` term).
pub fn step3_objective(queues: &QueueState, action: &ResourceAction, cfg: &PolicyConfig) -> f64 {
    let roles = cfg.kind.roles();
    (0..cfg.num_stations())
        .map(|k| {
            let r = action.rate[k];
            let p = action.power[k];
            let mut total = 0.0;
            if cfg.kind == PolicyKind::Esrm {
                total += cfg.v * r;
            } else if roles.z {
                total += queues.z[k] * r * cfg.z_scale(k);
            }
            if roles.g {
                total += queues.g[k] * (r - cfg.r_min[k]);
            }
            if roles.q {
                total += queues.q[k] * (cfg.p_max_avg[k] - p);
            }
            total
        })
        .sum()
}
