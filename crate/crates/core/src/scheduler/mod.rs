//! Per-epoch resource allocation policies.
//!
//! The drift-plus-penalty family ([`PolicyKind::Dpp`], [`PolicyKind::Esrm`],
//! [`PolicyKind::Wmm`], [`PolicyKind::Mm`]) keeps virtual queues across
//! epochs; the baselines ([`PolicyKind::Srm`], [`PolicyKind::Pf`],
//! [`PolicyKind::Rnd`]) always transmit at the maximum power level.

mod baseline;
mod dpp;
mod queues;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{McsTable, PhyConfig, RateTable};
use crate::error::{config_err, Error, Result};

pub use baseline::{pf_epoch, rnd_epoch, srm_epoch, PF_INITIAL_AVERAGE};
pub use dpp::{
    choose_aux_minmax, choose_aux_separable, dpp_epoch, optimize_power, step3_objective,
    EpochDecision,
};
pub use queues::{
    check_drift_inequality, check_telescoping, check_telescoping_general, compute_drift_bound_b, drift_bound,
    update_queues, DriftCheck, QueueState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Drift-plus-penalty with a separable utility of auxiliary variables.
    Dpp,
    /// Weighted max-min of `r_k / r_k^min` under average power limits.
    Wmm,
    /// Instantaneous sum-rate maximization at full power.
    Srm,
    /// Proportional fairness over an exponential moving average.
    Pf,
    /// Uniformly random stations on random RUs.
    Rnd,
    /// Unconstrained max-min of average rates at full power.
    Mm,
    /// Ergodic sum-rate maximization under rate and power constraints.
    Esrm,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Dpp,
        PolicyKind::Wmm,
        PolicyKind::Srm,
        PolicyKind::Pf,
        PolicyKind::Rnd,
        PolicyKind::Mm,
        PolicyKind::Esrm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Dpp => "DPP",
            PolicyKind::Wmm => "WMM",
            PolicyKind::Srm => "SRM",
            PolicyKind::Pf => "PF",
            PolicyKind::Rnd => "RND",
            PolicyKind::Mm => "MM",
            PolicyKind::Esrm => "ESRM",
        }
    }

    /// Policies driven by virtual queues.
    pub fn is_queue_based(self) -> bool {
        matches!(
            self,
            PolicyKind::Dpp | PolicyKind::Wmm | PolicyKind::Mm | PolicyKind::Esrm
        )
    }

    pub(crate) fn roles(self) -> QueueRoles {
        match self {
            PolicyKind::Dpp => QueueRoles { q: true, z: true, g: true },
            PolicyKind::Esrm => QueueRoles { q: true, z: false, g: true },
            PolicyKind::Wmm => QueueRoles { q: true, z: true, g: false },
            PolicyKind::Mm => QueueRoles { q: false, z: true, g: false },
            PolicyKind::Srm | PolicyKind::Pf | PolicyKind::Rnd => {
                QueueRoles { q: false, z: false, g: false }
            }
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))
    }
}

/// Which virtual queues a policy maintains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct QueueRoles {
    pub q: bool,
    pub z: bool,
    pub g: bool,
}

/// Concave nondecreasing per-station utility of the auxiliary variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Utility {
    /// `U(x) = x`
    #[default]
    Linear,
    /// `U(x) = ln(1 + x)`
    Log,
}

impl Utility {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Utility::Linear => x,
            Utility::Log => x.ln_1p(),
        }
    }
}

/// Parameters of one policy for a `K`-station network.
///
/// Rates are bits per epoch and powers are mW throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub v: f64,
    /// Minimum average rate per station.
    pub r_min: Vec<f64>,
    /// Maximum average power per station.
    pub p_max_avg: Vec<f64>,
    /// Candidate auxiliary values, ascending, in bits per epoch.
    pub aux_grid: Vec<f64>,
    pub utility: Utility,
    /// EMA smoothing factor for PF.
    pub pf_beta: f64,
    /// Largest per-RU rate.
    pub r_max: f64,
    /// Largest transmit power level.
    pub p_max_mw: f64,
}

impl PolicyConfig {
    /// Homogeneous configuration: every station gets the same `r_min` and
    /// `p_max_avg`; the auxiliary grid is `{0}` plus every MCS rate.
    pub fn homogeneous(
        kind: PolicyKind,
        k: usize,
        v: f64,
        r_min: f64,
        p_max_avg_mw: f64,
        phy: &PhyConfig,
        mcs: &McsTable,
    ) -> Self {
        let mut aux_grid = vec![0.0];
        aux_grid.extend(phy.rate_levels(mcs));
        Self {
            kind,
            v,
            r_min: vec![r_min; k],
            p_max_avg: vec![p_max_avg_mw; k],
            aux_grid,
            utility: Utility::Linear,
            pf_beta: 0.01,
            r_max: phy.r_max(mcs),
            p_max_mw: phy.p_max_mw(),
        }
    }

    pub fn num_stations(&self) -> usize {
        self.r_min.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.r_min.len();
        if k == 0 {
            return config_err("policy needs at least one station");
        }
        if self.p_max_avg.len() != k {
            return Err(Error::Dimension {
                what: "p_max_avg entries",
                expected: k,
                actual: self.p_max_avg.len(),
            });
        }
        if self.kind.is_queue_based() && !(self.v > 0.0 && self.v.is_finite()) {
            return config_err(format!("V = {} must be positive", self.v));
        }
        if self.r_min.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return config_err("r_min must be finite and nonnegative");
        }
        if self.kind == PolicyKind::Wmm && self.r_min.iter().any(|r| *r <= 0.0) {
            return config_err("WMM needs r_min > 0 for every station");
        }
        if self.p_max_avg.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return config_err("p_max_avg must be positive");
        }
        if !(self.r_max > 0.0 && self.p_max_mw > 0.0) {
            return config_err("r_max and p_max must be positive");
        }
        if self.aux_grid.windows(2).any(|w| w[1] <= w[0]) {
            return config_err("aux grid must be strictly ascending");
        }
        let (Some(&lo), Some(&hi)) = (self.aux_grid.first(), self.aux_grid.last()) else {
            return config_err("aux grid is empty");
        };
        if lo != 0.0 || (hi - self.r_max).abs() > 1e-9 * self.r_max {
            return config_err("aux grid must span exactly [0, R_max]");
        }
        if !(self.pf_beta > 0.0 && self.pf_beta <= 1.0) {
            return config_err("pf_beta must lie in (0, 1]");
        }
        Ok(())
    }

    /// Multiplier applied to `r_k` in the `Z_k` update: `1 / r_k^min` under
    /// WMM, `1 / R_max` under MM (every station weighted alike), 1 otherwise.
    pub fn z_scale(&self, k: usize) -> f64 {
        match self.kind {
            PolicyKind::Wmm => 1.0 / self.r_min[k],
            PolicyKind::Mm => 1.0 / self.r_max,
            _ => 1.0,
        }
    }

    /// Upper end of the auxiliary range, in the units of the `Z` queue.
    pub fn gamma_cap(&self) -> f64 {
        match self.kind {
            PolicyKind::Wmm | PolicyKind::Mm => (0..self.num_stations())
                .map(|k| self.r_max * self.z_scale(k))
                .fold(0.0, f64::max),
            _ => self.r_max,
        }
    }
}

/// One station transmitting on one RU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grant {
    pub station: usize,
    pub ru: usize,
    pub power_index: usize,
    pub power_mw: f64,
    pub rate_bits: f64,
}

/// `(S(t), P(t))` together with the per-station totals it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceAction {
    /// Sorted by station.
    pub grants: Vec<Grant>,
    /// `r_k(t)`, bits.
    pub rate: Vec<f64>,
    /// `p_k(t)`, mW.
    pub power: Vec<f64>,
}

impl ResourceAction {
    pub fn idle(k: usize) -> Self {
        Self {
            grants: Vec::new(),
            rate: vec![0.0; k],
            power: vec![0.0; k],
        }
    }

    pub fn from_grants(k: usize, mut grants: Vec<Grant>) -> Self {
        grants.sort_by_key(|g| (g.station, g.ru));
        let mut rate = vec![0.0; k];
        let mut power = vec![0.0; k];
        for g in &grants {
            rate[g.station] += g.rate_bits;
            power[g.station] += g.power_mw;
        }
        Self { grants, rate, power }
    }

    pub fn num_stations(&self) -> usize {
        self.rate.len()
    }

    pub fn ru_of(&self, station: usize) -> Option<usize> {
        self.grants.iter().find(|g| g.station == station).map(|g| g.ru)
    }

    /// `(station, ru)` pairs.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.grants.iter().map(|g| (g.station, g.ru)).collect()
    }

    /// C1/C2 hold, powers come from the level set and the totals match the grants.
    pub fn is_feasible(&self, n_rus: usize, powers_mw: &[f64]) -> bool {
        let k = self.rate.len();
        let mut station_used = vec![false; k];
        let mut ru_used = vec![false; n_rus];
        for g in &self.grants {
            if g.station >= k || g.ru >= n_rus {
                return false;
            }
            if station_used[g.station] || ru_used[g.ru] {
                return false;
            }
            station_used[g.station] = true;
            ru_used[g.ru] = true;
            if powers_mw.get(g.power_index) != Some(&g.power_mw) {
                return false;
            }
        }
        (0..k).all(|s| {
            let grant = self.grants.iter().find(|g| g.station == s);
            let (r, p) = grant.map_or((0.0, 0.0), |g| (g.rate_bits, g.power_mw));
            self.rate[s] == r && self.power[s] == p
        })
    }
}

/// Stateful per-run scheduler: owns the virtual queues, PF averages and the
/// policy's private random stream.
#[derive(Debug, Clone)]
pub struct Scheduler {
    cfg: PolicyConfig,
    powers_mw: Vec<f64>,
    queues: QueueState,
    pf_average: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Scheduler {
    pub fn new(cfg: PolicyConfig, phy: &PhyConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        phy.validate()?;
        if (cfg.p_max_mw - phy.p_max_mw()).abs() > 1e-9 * cfg.p_max_mw {
            return config_err("policy p_max disagrees with the phy power set");
        }
        let k = cfg.num_stations();
        Ok(Self {
            powers_mw: phy.power_levels_mw(),
            queues: QueueState::zeros(k),
            pf_average: vec![PF_INITIAL_AVERAGE; k],
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn queues(&self) -> &QueueState {
        &self.queues
    }

    pub fn powers_mw(&self) -> &[f64] {
        &self.powers_mw
    }

    /// Runs one epoch on the given rate table and advances internal state.
    pub fn step(&mut self, rates: &RateTable) -> Result<EpochDecision> {
        let k = self.cfg.num_stations();
        if rates.num_stations() != k {
            return Err(Error::Dimension {
                what: "stations in rate table",
                expected: k,
                actual: rates.num_stations(),
            });
        }
        if rates.num_powers() != self.powers_mw.len() {
            return Err(Error::Dimension {
                what: "power levels in rate table",
                expected: self.powers_mw.len(),
                actual: rates.num_powers(),
            });
        }
        let decision = match self.cfg.kind {
            PolicyKind::Srm => self.passive(srm_epoch(rates, &self.powers_mw)),
            PolicyKind::Pf => {
                let action = pf_epoch(rates, &self.powers_mw, &mut self.pf_average, self.cfg.pf_beta);
                self.passive(action)
            }
            PolicyKind::Rnd => {
                let action = rnd_epoch(rates, &self.powers_mw, &mut self.rng);
                self.passive(action)
            }
            _ => dpp_epoch(&self.queues, rates, &self.powers_mw, &self.cfg)?,
        };
        self.queues = decision.queues_after.clone();
        Ok(decision)
    }

    fn passive(&self, action: ResourceAction) -> EpochDecision {
        EpochDecision {
            gamma: vec![0.0; action.num_stations()],
            queues_before: self.queues.clone(),
            queues_after: self.queues.clone(),
            action,
        }
    }

    pub fn pf_averages(&self) -> &[f64] {
        &self.pf_average
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
            assert_eq!(k.name().to_lowercase().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("xyz".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn config_validation() {
        let phy = PhyConfig::default();
        let mcs = McsTable::default();
        let ok = PolicyConfig::homogeneous(PolicyKind::Dpp, 3, 100.0, 1000.0, 25.0, &phy, &mcs);
        assert!(ok.validate().is_ok());
        assert_eq!(ok.aux_grid.len(), 11);
        assert_eq!(ok.aux_grid[0], 0.0);

        let mut bad = ok.clone();
        bad.v = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.aux_grid.remove(0);
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.p_max_avg[1] = 0.0;
        assert!(bad.validate().is_err());
        let mut wmm = ok.clone();
        wmm.kind = PolicyKind::Wmm;
        wmm.r_min[0] = 0.0;
        assert!(wmm.validate().is_err());
        let mut srm = ok;
        srm.kind = PolicyKind::Srm;
        srm.v = 0.0;
        assert!(srm.validate().is_ok());
    }

    #[test]
    fn wmm_gamma_cap_is_in_ratio_units() {
        let phy = PhyConfig::default();
        let mcs = McsTable::default();
        let mut cfg = PolicyConfig::homogeneous(PolicyKind::Wmm, 2, 100.0, 16000.0, 25.0, &phy, &mcs);
        assert!((cfg.gamma_cap() - 2.0).abs() < 1e-12);
        cfg.r_min[1] = 8000.0;
        assert!((cfg.gamma_cap() - 4.0).abs() < 1e-12);
        cfg.kind = PolicyKind::Mm;
        assert_eq!(cfg.gamma_cap(), 1.0);
    }

    #[test]
    fn feasibility_check_catches_conflicts() {
        let powers = [1.0, 2.0];
        let g = |station, ru| Grant { station, ru, power_index: 1, power_mw: 2.0, rate_bits: 5.0 };
        let ok = ResourceAction::from_grants(3, vec![g(0, 1), g(2, 0)]);
        assert!(ok.is_feasible(2, &powers));
        assert_eq!(ok.rate, vec![5.0, 0.0, 5.0]);
        let shared_ru = ResourceAction::from_grants(3, vec![g(0, 1), g(1, 1)]);
        assert!(!shared_ru.is_feasible(2, &powers));
        let two_rus = ResourceAction::from_grants(3, vec![g(0, 0), g(0, 1)]);
        assert!(!two_rus.is_feasible(2, &powers));
        let mut off_grid = ok.clone();
        off_grid.grants[0].power_mw = 1.5;
        assert!(!off_grid.is_feasible(2, &powers));
    }
}
