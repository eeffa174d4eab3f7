//! Experiment orchestration: single runs, multi-topology CDF studies and
//! station-count sweeps.
//!
//! Every random number is derived from the master seed. Topology `i` uses
//! `derive_seed(master, TOPOLOGY_STREAM, i)` for placement and
//! `derive_seed(master, CHANNEL_STREAM, i)` for fading; all policies run on
//! the same fading realizations of a topology, and each policy's private
//! randomness is keyed by `(channel seed, policy)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    dbm_to_mw, generate_topology, rate_table, sample_channel, McsTable, PhyConfig, Topology,
    TopologyParams,
};
use crate::error::{config_err, Error, Result};
use crate::scheduler::{
    check_drift_inequality, check_telescoping_general, PolicyConfig, PolicyKind, QueueState,
    ResourceAction, Scheduler, Utility,
};

pub const TOPOLOGY_STREAM: u64 = 1;
pub const CHANNEL_STREAM: u64 = 2;
pub const POLICY_STREAM: u64 = 3;

/// SplitMix64 finalizer over `(seed, stream, index)`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Constraint and control parameters shared by all policies of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub v: f64,
    /// Minimum average rate per station, bits per epoch.
    pub r_min_bits: f64,
    /// Maximum average power per station, dBm.
    pub p_max_avg_dbm: f64,
    #[serde(default)]
    pub utility: Utility,
    #[serde(default = "default_pf_beta")]
    pub pf_beta: f64,
}

fn default_pf_beta() -> f64 {
    0.01
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self {
            v: 100.0,
            r_min_bits: 26000.0,
            p_max_avg_dbm: 14.0,
            utility: Utility::Linear,
            pf_beta: default_pf_beta(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub phy: PhyConfig,
    #[serde(default)]
    pub topology: TopologyParams,
    #[serde(default)]
    pub mcs: McsTable,
    /// Station count for single runs and CDF studies.
    pub stations: usize,
    /// Station counts for sweeps.
    #[serde(default)]
    pub k_values: Vec<usize>,
    pub epochs: usize,
    #[serde(default = "default_topologies")]
    pub topologies: usize,
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub constraints: ConstraintConfig,
    #[serde(default)]
    pub seed: u64,
    /// Verify the per-epoch drift and telescoping inequalities.
    #[serde(default)]
    pub checks: bool,
    #[serde(default = "default_window")]
    pub moving_average_window: usize,
    /// Queue growth tolerated by [`stability_report`], as a fraction of each
    /// queue's service constant.
    #[serde(default = "default_stability_tolerance")]
    pub stability_tolerance: f64,
}

fn default_topologies() -> usize {
    50
}

fn default_window() -> usize {
    200
}

fn default_stability_tolerance() -> f64 {
    0.01
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            phy: PhyConfig::default(),
            topology: TopologyParams::default(),
            mcs: McsTable::default(),
            stations: 8,
            k_values: vec![4, 8, 12, 16],
            epochs: 2000,
            topologies: default_topologies(),
            policies: vec![PolicyKind::Srm, PolicyKind::Pf, PolicyKind::Rnd, PolicyKind::Mm],
            constraints: ConstraintConfig::default(),
            seed: 1,
            checks: false,
            moving_average_window: default_window(),
            stability_tolerance: default_stability_tolerance(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.phy.validate()?;
        if self.stations == 0 {
            return config_err("stations must be at least 1");
        }
        if self.k_values.contains(&0) {
            return config_err("k_values must be positive");
        }
        if self.epochs == 0 {
            return config_err("epochs must be at least 1");
        }
        if self.topologies == 0 {
            return config_err("topologies must be at least 1");
        }
        if self.policies.is_empty() {
            return config_err("no policies selected");
        }
        if self.moving_average_window == 0 {
            return config_err("moving_average_window must be at least 1");
        }
        if !(self.topology.d_max_m > 1.0) {
            return config_err("d_max must exceed 1 m");
        }
        for &kind in &self.policies {
            self.policy_config(kind, self.stations).validate()?;
        }
        Ok(())
    }

    /// Resolved per-station policy parameters (powers converted to mW).
    pub fn policy_config(&self, kind: PolicyKind, k: usize) -> PolicyConfig {
        let mut cfg = PolicyConfig::homogeneous(
            kind,
            k,
            self.constraints.v,
            self.constraints.r_min_bits,
            dbm_to_mw(self.constraints.p_max_avg_dbm),
            &self.phy,
            &self.mcs,
        );
        cfg.utility = self.constraints.utility;
        cfg.pf_beta = self.constraints.pf_beta;
        cfg
    }

    pub fn topology_seed(&self, index: u64) -> u64 {
        derive_seed(self.seed, TOPOLOGY_STREAM, index)
    }

    pub fn channel_seed(&self, index: u64) -> u64 {
        derive_seed(self.seed, CHANNEL_STREAM, index)
    }
}

/// Per-epoch record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub rate: Vec<f64>,
    pub power: Vec<f64>,
    pub utility: f64,
    /// Backlogs after the epoch's update.
    pub queues: QueueState,
    pub drift_slack: Option<f64>,
}

/// Time averages of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: PolicyKind,
    pub epochs: usize,
    pub avg_rate: Vec<f64>,
    pub avg_power: Vec<f64>,
    pub sum_rate: f64,
    pub min_rate: f64,
    /// `max_k (r_k^min - r̄_k) / r_k^min`, floored at 0; 0 when no rate
    /// constraint is configured.
    pub max_violation: f64,
    pub q_ratio: Vec<f64>,
    pub z_ratio: Vec<f64>,
    pub g_ratio: Vec<f64>,
    pub most_distant: usize,
}

impl RunSummary {
    /// Builds averages from per-station sums over `epochs` epochs.
    fn from_totals(
        policy: PolicyKind,
        epochs: usize,
        rate_sum: &[f64],
        power_sum: &[f64],
        r_min: &[f64],
        final_queues: &QueueState,
        most_distant: usize,
    ) -> Self {
        let t = epochs as f64;
        let avg_rate: Vec<f64> = rate_sum.iter().map(|s| s / t).collect();
        let avg_power: Vec<f64> = power_sum.iter().map(|s| s / t).collect();
        let sum_rate = avg_rate.iter().sum();
        let min_rate = avg_rate.iter().copied().fold(f64::INFINITY, f64::min);
        let max_violation = avg_rate
            .iter()
            .zip(r_min)
            .filter(|(_, &r)| r > 0.0)
            .map(|(&avg, &r)| ((r - avg) / r).max(0.0))
            .fold(0.0, f64::max);
        let per_t = |v: &[f64]| v.iter().map(|x| x / t).collect::<Vec<_>>();
        Self {
            policy,
            epochs,
            avg_rate,
            avg_power,
            sum_rate,
            min_rate,
            max_violation,
            q_ratio: per_t(&final_queues.q),
            z_ratio: per_t(&final_queues.z),
            g_ratio: per_t(&final_queues.g),
            most_distant,
        }
    }
}

/// Sample-path inequality results of a checked run.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub epochs_checked: usize,
    pub drift_violations: usize,
    pub min_drift_slack: f64,
    pub telescoping_holds: bool,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.drift_violations == 0 && self.telescoping_holds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub record_epochs: bool,
    pub checks: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    /// Empty unless [`RunOptions::record_epochs`] is set.
    pub epochs: Vec<EpochMetrics>,
    pub diagnostics: Option<Diagnostics>,
}

fn epoch_utility(cfg: &PolicyConfig, action: &ResourceAction) -> f64 {
    let rates = &action.rate;
    match cfg.kind {
        PolicyKind::Dpp => rates.iter().map(|&r| cfg.utility.eval(r)).sum(),
        PolicyKind::Wmm => rates
            .iter()
            .enumerate()
            .map(|(k, r)| r / cfg.r_min[k])
            .fold(f64::INFINITY, f64::min),
        PolicyKind::Mm => rates.iter().copied().fold(f64::INFINITY, f64::min),
        PolicyKind::Pf => rates.iter().map(|&r| r.max(1.0).ln()).sum(),
        PolicyKind::Srm | PolicyKind::Esrm | PolicyKind::Rnd => rates.iter().sum(),
    }
}

/// Backlog series with the arrivals and services that drove it, for the
/// telescoping check.
#[derive(Default)]
struct QueueTrace {
    backlog: Vec<f64>,
    service: Vec<f64>,
    arrival: Vec<f64>,
}

impl QueueTrace {
    fn push(&mut self, backlog: f64, service: f64, arrival: f64) {
        self.backlog.push(backlog);
        self.service.push(service);
        self.arrival.push(arrival);
    }

    fn holds(&self) -> bool {
        check_telescoping_general(&self.backlog, &self.service, &self.arrival)
    }
}

/// Runs `policy` on a fixed topology for `cfg.epochs` epochs.
///
/// `seed` drives the fading process; the policy's own randomness is derived
/// from it. Identical inputs give identical outputs.
pub fn run_single(
    cfg: &ExperimentConfig,
    topology: &Topology,
    policy: PolicyKind,
    seed: u64,
    opts: RunOptions,
) -> Result<RunOutput> {
    cfg.phy.validate()?;
    if cfg.epochs == 0 {
        return config_err("epochs must be at least 1");
    }
    let k = topology.num_stations();
    let pcfg = cfg.policy_config(policy, k);
    let policy_seed = derive_seed(seed, POLICY_STREAM, policy as u64);
    let mut scheduler = Scheduler::new(pcfg.clone(), &cfg.phy, policy_seed)?;
    let mut channel_rng = ChaCha8Rng::seed_from_u64(seed);
    let roles_checked = opts.checks && policy.is_queue_based();

    let mut rate_sum = vec![0.0; k];
    let mut power_sum = vec![0.0; k];
    let mut records = Vec::new();
    let mut diag = Diagnostics {
        epochs_checked: 0,
        drift_violations: 0,
        min_drift_slack: f64::INFINITY,
        telescoping_holds: true,
    };
    let mut traces: Vec<[QueueTrace; 3]> = Vec::new();
    if roles_checked {
        traces = (0..k).map(|_| Default::default()).collect();
    }

    for epoch in 0..cfg.epochs {
        let state = sample_channel(k, cfg.phy.n_rus, &mut channel_rng);
        let rates = rate_table(&state, topology, &cfg.phy, &cfg.mcs)?;
        let decision = scheduler.step(&rates)?;
        let action = &decision.action;
        for s in 0..k {
            rate_sum[s] += action.rate[s];
            power_sum[s] += action.power[s];
        }

        let mut drift_slack = None;
        if roles_checked {
            let check = check_drift_inequality(
                &decision.queues_before,
                &decision.queues_after,
                action,
                &decision.gamma,
                &pcfg,
            );
            diag.epochs_checked += 1;
            if !check.holds {
                diag.drift_violations += 1;
            }
            diag.min_drift_slack = diag.min_drift_slack.min(check.slack);
            drift_slack = Some(check.slack);
            let before = &decision.queues_before;
            for (s, [tq, tz, tg]) in traces.iter_mut().enumerate() {
                if epoch == 0 {
                    tq.backlog.push(before.q[s]);
                    tz.backlog.push(before.z[s]);
                    tg.backlog.push(before.g[s]);
                }
                let after = &decision.queues_after;
                tq.push(after.q[s], pcfg.p_max_avg[s], action.power[s]);
                tz.push(after.z[s], action.rate[s] * pcfg.z_scale(s), decision.gamma[s]);
                tg.push(after.g[s], action.rate[s], pcfg.r_min[s]);
            }
        }

        if opts.record_epochs {
            records.push(EpochMetrics {
                epoch,
                rate: action.rate.clone(),
                power: action.power.clone(),
                utility: epoch_utility(&pcfg, action),
                queues: decision.queues_after.clone(),
                drift_slack,
            });
        }
    }

    let diagnostics = if roles_checked {
        let r = policy.roles();
        let roles = [r.q, r.z, r.g];
        diag.telescoping_holds = traces.iter().all(|ts| {
            ts.iter()
                .zip(roles)
                .all(|(t, active)| !active || t.holds())
        });
        Some(diag)
    } else if opts.checks {
        // Baselines keep no queues; nothing to verify.
        Some(Diagnostics {
            epochs_checked: 0,
            drift_violations: 0,
            min_drift_slack: f64::INFINITY,
            telescoping_holds: true,
        })
    } else {
        None
    };

    let summary = RunSummary::from_totals(
        policy,
        cfg.epochs,
        &rate_sum,
        &power_sum,
        &pcfg.r_min,
        scheduler.queues(),
        topology.most_distant(),
    );
    Ok(RunOutput {
        summary,
        epochs: records,
        diagnostics,
    })
}

/// Mean-rate stability proxy: final backlog over horizon per queue.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub q_ratio: Vec<f64>,
    pub z_ratio: Vec<f64>,
    pub g_ratio: Vec<f64>,
    pub stable: bool,
}

/// Flags every `X(T)/T` above `tolerance` times its queue's service
/// constant (`p_k^max` for `Q`, the auxiliary cap for `Z`, `r_k^min` for `G`).
pub fn stability_report(summary: &RunSummary, cfg: &PolicyConfig, tolerance: f64) -> StabilityReport {
    let within = |ratio: f64, service: f64| ratio <= tolerance * service;
    let gamma_cap = cfg.gamma_cap();
    let stable = (0..summary.avg_rate.len()).all(|k| {
        within(summary.q_ratio[k], cfg.p_max_avg[k])
            && within(summary.z_ratio[k], gamma_cap)
            && within(summary.g_ratio[k], cfg.r_min[k])
    });
    StabilityReport {
        q_ratio: summary.q_ratio.clone(),
        z_ratio: summary.z_ratio.clone(),
        g_ratio: summary.g_ratio.clone(),
        stable,
    }
}

/// Trailing-window arithmetic mean; the first `window - 1` outputs average
/// the samples available so far.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..series.len())
        .map(|i| {
            let start = (i + 1).saturating_sub(window);
            let slice = &series[start..=i];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// One step of an empirical CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub value: f64,
    pub level: f64,
}

/// Sorted samples with levels `i / n`.
pub fn empirical_cdf(samples: &[f64]) -> Vec<CdfPoint> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, value)| CdfPoint {
            value,
            level: (i + 1) as f64 / n,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCdf {
    pub policy: PolicyKind,
    pub min_rate: Vec<CdfPoint>,
    pub sum_rate: Vec<CdfPoint>,
    pub mean_min_rate: f64,
    pub mean_sum_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfStudy {
    pub policies: Vec<PolicyCdf>,
    /// `summaries[topology][policy]`, in configuration order.
    pub summaries: Vec<Vec<RunSummary>>,
}

impl CdfStudy {
    pub fn policy(&self, kind: PolicyKind) -> Option<&PolicyCdf> {
        self.policies.iter().find(|p| p.policy == kind)
    }
}

fn run_policies_on(cfg: &ExperimentConfig, topology: &Topology, channel_seed: u64) -> Result<Vec<RunSummary>> {
    cfg.policies
        .iter()
        .map(|&p| run_single(cfg, topology, p, channel_seed, RunOptions::default()).map(|o| o.summary))
        .collect()
}

/// Runs every policy on `cfg.topologies` random topologies of
/// `cfg.stations` stations; topologies run in parallel.
pub fn run_cdf_study(cfg: &ExperimentConfig) -> Result<CdfStudy> {
    cfg.validate()?;
    if cfg.topologies < 2 {
        return config_err("a CDF study needs at least 2 topologies");
    }
    let summaries: Vec<Vec<RunSummary>> = (0..cfg.topologies as u64)
        .into_par_iter()
        .map(|i| {
            let topo = generate_topology(cfg.stations, &cfg.topology, cfg.topology_seed(i))?;
            run_policies_on(cfg, &topo, cfg.channel_seed(i))
        })
        .collect::<Result<_>>()?;
    Ok(aggregate_cdf(cfg, summaries))
}

/// Builds per-policy CDFs from `summaries[topology][policy]`.
pub fn aggregate_cdf(cfg: &ExperimentConfig, summaries: Vec<Vec<RunSummary>>) -> CdfStudy {
    let policies = cfg
        .policies
        .iter()
        .enumerate()
        .map(|(j, &policy)| {
            let mins: Vec<f64> = summaries.iter().map(|row| row[j].min_rate).collect();
            let sums: Vec<f64> = summaries.iter().map(|row| row[j].sum_rate).collect();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            PolicyCdf {
                policy,
                mean_min_rate: mean(&mins),
                mean_sum_rate: mean(&sums),
                min_rate: empirical_cdf(&mins),
                sum_rate: empirical_cdf(&sums),
            }
        })
        .collect();
    CdfStudy { policies, summaries }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub policy: PolicyKind,
    pub k: usize,
    pub min_rate: f64,
    pub sum_rate: f64,
}

/// One random topology per station count, every policy on each.
///
/// All counts draw placements from the same topology seed, so the network
/// for a smaller `K` is a prefix of the one for a larger `K`.
pub fn run_k_sweep(cfg: &ExperimentConfig, k_values: &[usize]) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    if k_values.contains(&0) {
        return config_err("station counts must be positive");
    }
    let per_k: Vec<Vec<SweepPoint>> = k_values
        .par_iter()
        .map(|&k| {
            let topo = generate_topology(k, &cfg.topology, cfg.topology_seed(0))?;
            let runs = run_policies_on(cfg, &topo, cfg.channel_seed(0))?;
            Ok(runs
                .into_iter()
                .map(|s| SweepPoint {
                    policy: s.policy,
                    k,
                    min_rate: s.min_rate,
                    sum_rate: s.sum_rate,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_k.into_iter().flatten().collect())
}

/// Topology of a single run: `cfg.stations` stations from placement stream 0.
pub fn topology_for_run(cfg: &ExperimentConfig) -> Result<Topology> {
    generate_topology(cfg.stations, &cfg.topology, cfg.topology_seed(0)).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("topology: {m}")),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_examples() {
        let s = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(moving_average(&s, 1), s.to_vec());
        assert_eq!(moving_average(&[2.5; 6], 4), vec![2.5; 6]);
        assert_eq!(moving_average(&[0.0, 2.0, 4.0], 2), vec![0.0, 1.0, 3.0]);
        assert!(moving_average(&[], 3).is_empty());
    }

    #[test]
    fn cdf_levels() {
        let c = empirical_cdf(&[5.0, 1.0]);
        assert_eq!(c, vec![CdfPoint { value: 1.0, level: 0.5 }, CdfPoint { value: 5.0, level: 1.0 }]);
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, TOPOLOGY_STREAM, 0);
        let b = derive_seed(1, CHANNEL_STREAM, 0);
        let c = derive_seed(1, TOPOLOGY_STREAM, 1);
        let d = derive_seed(2, TOPOLOGY_STREAM, 0);
        assert!(a != b && a != c && a != d);
        assert_eq!(a, derive_seed(1, TOPOLOGY_STREAM, 0));
    }

    #[test]
    fn violation_is_floored_at_zero() {
        let q = QueueState::zeros(2);
        let s = RunSummary::from_totals(PolicyKind::Srm, 10, &[300.0, 50.0], &[0.0, 0.0], &[20.0, 10.0], &q, 0);
        assert_eq!(s.avg_rate, vec![30.0, 5.0]);
        assert_eq!(s.sum_rate, 35.0);
        assert_eq!(s.min_rate, 5.0);
        assert!((s.max_violation - 0.5).abs() < 1e-12);
        let s = RunSummary::from_totals(PolicyKind::Srm, 10, &[300.0, 500.0], &[0.0, 0.0], &[20.0, 10.0], &q, 0);
        assert_eq!(s.max_violation, 0.0);
        let s = RunSummary::from_totals(PolicyKind::Srm, 10, &[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], &q, 0);
        assert_eq!(s.max_violation, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let bad = ExperimentConfig { epochs: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let mut bad = ExperimentConfig::default();
        bad.phy.power_levels_dbm.clear();
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { policies: vec![], ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
