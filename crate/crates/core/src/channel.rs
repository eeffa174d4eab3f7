//! Topology generation, block-fading channel draws and link adaptation.
//!
//! Powers are carried in dBm at the configuration boundary and converted to
//! mW once ([`PhyConfig::power_levels_mw`]). Rates are in bits per epoch.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Log-distance pathloss in dB.
pub fn pathloss_db(distance_m: f64, pl0_db: f64, exponent: f64) -> f64 {
    pl0_db + 10.0 * exponent * distance_m.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
    Qam1024,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
            Modulation::Qam256 => 8,
            Modulation::Qam1024 => 10,
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Modulation::Bpsk => "BPSK",
            Modulation::Qpsk => "QPSK",
            Modulation::Qam16 => "16-QAM",
            Modulation::Qam64 => "64-QAM",
            Modulation::Qam256 => "256-QAM",
            Modulation::Qam1024 => "1024-QAM",
        };
        f.write_str(s)
    }
}

impl FromStr for Modulation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match norm.as_str() {
            "BPSK" => Ok(Modulation::Bpsk),
            "QPSK" => Ok(Modulation::Qpsk),
            "16QAM" | "QAM16" => Ok(Modulation::Qam16),
            "64QAM" | "QAM64" => Ok(Modulation::Qam64),
            "256QAM" | "QAM256" => Ok(Modulation::Qam256),
            "1024QAM" | "QAM1024" => Ok(Modulation::Qam1024),
            _ => Err(format!("unknown modulation `{s}`")),
        }
    }
}

/// One row of an MCS table. `index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub index: usize,
    pub modulation: Modulation,
    pub code_rate: f64,
    pub min_snr_dbm: f64,
}

impl McsEntry {
    /// Bits per subcarrier per OFDM symbol.
    pub fn bit_rate(&self) -> f64 {
        f64::from(self.modulation.bits_per_symbol()) * self.code_rate
    }
}

/// Ordered MCS list; thresholds and bit rates strictly increase with index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<McsEntry>", into = "Vec<McsEntry>")]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        if entries.is_empty() {
            return config_err("mcs table is empty");
        }
        for (pos, e) in entries.iter().enumerate() {
            if e.index != pos + 1 {
                return config_err(format!(
                    "mcs indices must be 1..=L in order; row {} has index {}",
                    pos + 1,
                    e.index
                ));
            }
            if !(e.code_rate > 0.0 && e.code_rate <= 1.0) {
                return config_err(format!("mcs {}: code rate {} not in (0, 1]", e.index, e.code_rate));
            }
            if !e.min_snr_dbm.is_finite() {
                return config_err(format!("mcs {}: non-finite threshold", e.index));
            }
        }
        for w in entries.windows(2) {
            if w[1].min_snr_dbm <= w[0].min_snr_dbm {
                return config_err(format!("mcs {}: threshold not increasing", w[1].index));
            }
            if w[1].bit_rate() <= w[0].bit_rate() {
                return config_err(format!("mcs {}: bit rate not increasing", w[1].index));
            }
        }
        Ok(Self { entries })
    }

    /// The 20 MHz / 24-subcarrier table used by default.
    pub fn ieee_80211ax_20mhz() -> Self {
        use Modulation::*;
        let rows = [
            (Bpsk, 1.0 / 2.0, -82.0),
            (Qpsk, 1.0 / 2.0, -79.0),
            (Qpsk, 3.0 / 4.0, -77.0),
            (Qam16, 1.0 / 2.0, -74.0),
            (Qam16, 3.0 / 4.0, -70.0),
            (Qam64, 2.0 / 3.0, -66.0),
            (Qam64, 3.0 / 4.0, -65.0),
            (Qam64, 5.0 / 6.0, -64.0),
            (Qam256, 3.0 / 4.0, -59.0),
            (Qam256, 5.0 / 6.0, -57.0),
        ];
        let entries = rows
            .iter()
            .enumerate()
            .map(|(i, &(modulation, code_rate, min_snr_dbm))| McsEntry {
                index: i + 1,
                modulation,
                code_rate,
                min_snr_dbm,
            })
            .collect();
        Self::new(entries).expect("built-in table is valid")
    }

    /// Parses a whitespace separated table: `index modulation code-rate min-snr`.
    ///
    /// Code rates may be written as fractions (`3/4`) or decimals. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::McsParse {
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|f| !f.is_empty())
                .collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            }
            let index = fields[0]
                .parse::<usize>()
                .map_err(|e| err(format!("index: {e}")))?;
            let modulation = fields[1].parse::<Modulation>().map_err(err)?;
            let code_rate = parse_code_rate(fields[2]).map_err(err)?;
            let min_snr_dbm = fields[3]
                .parse::<f64>()
                .map_err(|e| err(format!("min snr: {e}")))?;
            entries.push(McsEntry {
                index,
                modulation,
                code_rate,
                min_snr_dbm,
            });
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry for 1-based index `l`.
    pub fn entry(&self, l: usize) -> Option<&McsEntry> {
        l.checked_sub(1).and_then(|i| self.entries.get(i))
    }

    pub fn top(&self) -> &McsEntry {
        self.entries.last().expect("non-empty by construction")
    }

    /// Table rendered in the format accepted by [`McsTable::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("# index modulation code_rate min_snr_dbm\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{} {} {} {}\n",
                e.index, e.modulation, e.code_rate, e.min_snr_dbm
            ));
        }
        out
    }
}

impl Default for McsTable {
    fn default() -> Self {
        Self::ieee_80211ax_20mhz()
    }
}

impl TryFrom<Vec<McsEntry>> for McsTable {
    type Error = Error;

    fn try_from(entries: Vec<McsEntry>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<McsTable> for Vec<McsEntry> {
    fn from(t: McsTable) -> Self {
        t.entries
    }
}

fn parse_code_rate(s: &str) -> std::result::Result<f64, String> {
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.parse().map_err(|e| format!("code rate: {e}"))?;
            let den: f64 = den.parse().map_err(|e| format!("code rate: {e}"))?;
            if den == 0.0 {
                return Err("code rate: zero denominator".into());
            }
            num / den
        }
        None => s.parse().map_err(|e| format!("code rate: {e}"))?,
    };
    Ok(value)
}

/// OFDMA frame parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhyConfig {
    pub n_rus: usize,
    pub subcarriers_per_ru: usize,
    /// Duration of the uplink OFDMA transmission, seconds.
    pub t_ofdma_s: f64,
    /// OFDM symbol duration, seconds.
    pub t_ofdm_symbol_s: f64,
    /// Available transmit powers, ascending, dBm.
    pub power_levels_dbm: Vec<f64>,
    pub p_max_dbm: f64,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            n_rus: 9,
            subcarriers_per_ru: 24,
            t_ofdma_s: 3.2e-3,
            t_ofdm_symbol_s: 16e-6,
            power_levels_dbm: vec![8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0],
            p_max_dbm: 20.0,
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rus == 0 {
            return config_err("n_rus must be at least 1");
        }
        if self.subcarriers_per_ru == 0 {
            return config_err("subcarriers_per_ru must be at least 1");
        }
        if !(self.t_ofdma_s > 0.0 && self.t_ofdm_symbol_s > 0.0) {
            return config_err("durations must be positive");
        }
        let ratio = self.t_ofdma_s / self.t_ofdm_symbol_s;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return config_err(format!(
                "t_ofdma / t_ofdm_symbol = {ratio} is not a positive integer"
            ));
        }
        if self.power_levels_dbm.is_empty() {
            return config_err("power level set is empty");
        }
        if self.power_levels_dbm.iter().any(|p| !p.is_finite()) {
            return config_err("power levels must be finite");
        }
        if self.power_levels_dbm.windows(2).any(|w| w[1] <= w[0]) {
            return config_err("power levels must be strictly ascending");
        }
        let top = *self.power_levels_dbm.last().unwrap();
        if top != self.p_max_dbm {
            return config_err(format!(
                "max power level {top} dBm differs from p_max {} dBm",
                self.p_max_dbm
            ));
        }
        Ok(())
    }

    /// OFDM symbols per epoch, `T / T_OFDM`.
    pub fn symbols_per_epoch(&self) -> f64 {
        (self.t_ofdma_s / self.t_ofdm_symbol_s).round()
    }

    pub fn power_levels_mw(&self) -> Vec<f64> {
        self.power_levels_dbm.iter().map(|&p| dbm_to_mw(p)).collect()
    }

    pub fn p_max_mw(&self) -> f64 {
        dbm_to_mw(self.p_max_dbm)
    }

    /// Largest per-RU rate in bits per epoch.
    pub fn r_max(&self, mcs: &McsTable) -> f64 {
        rate_bits(Some(mcs.len()), mcs, self)
    }

    /// Per-RU rate of every MCS in bits per epoch, ascending.
    pub fn rate_levels(&self, mcs: &McsTable) -> Vec<f64> {
        (1..=mcs.len()).map(|l| rate_bits(Some(l), mcs, self)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologyParams {
    pub pl0_db: f64,
    pub exponent: f64,
    pub d_max_m: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        Self {
            pl0_db: 20.0,
            exponent: 4.4,
            d_max_m: 15.0,
        }
    }
}

/// Station placement around the AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub station_distances: Vec<f64>,
    pub pathloss_db: Vec<f64>,
    pub d_max: f64,
    pub pl0_db: f64,
    pub exponent: f64,
}

impl Topology {
    /// Builds a topology from explicit distances (meters).
    pub fn from_distances(distances: Vec<f64>, params: &TopologyParams) -> Result<Self> {
        if distances.is_empty() {
            return config_err("topology needs at least one station");
        }
        if params.d_max_m <= 1.0 {
            return config_err(format!("d_max = {} must exceed 1 m", params.d_max_m));
        }
        if let Some(d) = distances
            .iter()
            .find(|&&d| !(1.0..=params.d_max_m).contains(&d))
        {
            return config_err(format!("distance {d} outside [1, {}]", params.d_max_m));
        }
        let pathloss_db = distances
            .iter()
            .map(|&d| pathloss_db(d, params.pl0_db, params.exponent))
            .collect();
        Ok(Self {
            station_distances: distances,
            pathloss_db,
            d_max: params.d_max_m,
            pl0_db: params.pl0_db,
            exponent: params.exponent,
        })
    }

    pub fn num_stations(&self) -> usize {
        self.station_distances.len()
    }

    /// Station with the largest distance (lowest index on ties).
    pub fn most_distant(&self) -> usize {
        let mut best = 0;
        for (k, &d) in self.station_distances.iter().enumerate() {
            if d > self.station_distances[best] {
                best = k;
            }
        }
        best
    }
}

/// Drops `k` stations uniformly over the disk of radius `d_max`.
///
/// Stations are drawn one at a time from a single stream, so the first `j`
/// stations of a `k`-station topology equal the `j`-station topology drawn
/// from the same seed.
pub fn generate_topology(k: usize, params: &TopologyParams, seed: u64) -> Result<Topology> {
    if k == 0 {
        return config_err("K must be at least 1");
    }
    if !(params.d_max_m > 1.0) {
        return config_err(format!("d_max = {} must exceed 1 m", params.d_max_m));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let distances = (0..k)
        .map(|_| {
            let u: f64 = rng.random();
            (params.d_max_m * u.sqrt()).max(1.0)
        })
        .collect();
    Topology::from_distances(distances, params)
}

/// Linear power gains for one epoch, row-major `K x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    k: usize,
    n: usize,
    gains: Vec<f64>,
}

impl ChannelState {
    pub fn new(k: usize, n: usize, gains: Vec<f64>) -> Result<Self> {
        if gains.len() != k * n {
            return Err(Error::Dimension {
                what: "channel gains",
                expected: k * n,
                actual: gains.len(),
            });
        }
        if let Some(g) = gains.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return Err(Error::Domain(format!("channel gain {g} must be positive")));
        }
        Ok(Self { k, n, gains })
    }

    pub fn num_stations(&self) -> usize {
        self.k
    }

    pub fn num_rus(&self) -> usize {
        self.n
    }

    pub fn gain(&self, k: usize, n: usize) -> f64 {
        self.gains[k * self.n + n]
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }
}

/// Rayleigh block fading: i.i.d. unit-mean exponential power gain per (station, RU).
pub fn sample_channel<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> ChannelState {
    let gains = (0..k * n)
        .map(|_| {
            let g: f64 = rng.sample(Exp1);
            // Exp1 can return exactly 0 with vanishing probability.
            g.max(f64::MIN_POSITIVE)
        })
        .collect();
    ChannelState { k, n, gains }
}

/// Received power per subcarrier in dBm, with `p_dbm` split evenly over `subcarriers`.
pub fn snr_per_subcarrier(p_dbm: f64, subcarriers: usize, pl_db: f64, gain: f64) -> Result<f64> {
    if !(gain > 0.0) {
        return Err(Error::Domain(format!("channel gain {gain} must be positive")));
    }
    if subcarriers == 0 {
        return Err(Error::Domain("zero subcarriers".into()));
    }
    Ok(p_dbm - 10.0 * (subcarriers as f64).log10() - pl_db + 10.0 * gain.log10())
}

/// Highest 1-based MCS index whose threshold is met, or `None` below the lowest.
pub fn select_mcs(snr_dbm: f64, table: &McsTable) -> Option<usize> {
    table
        .entries()
        .iter()
        .rposition(|e| e.min_snr_dbm <= snr_dbm)
        .map(|pos| pos + 1)
}

/// Bits carried on one RU during an epoch at MCS `l`.
pub fn rate_bits(l: Option<usize>, table: &McsTable, phy: &PhyConfig) -> f64 {
    match l.and_then(|l| table.entry(l)) {
        Some(e) => phy.subcarriers_per_ru as f64 * e.bit_rate() * phy.symbols_per_epoch(),
        None => 0.0,
    }
}

/// Precomputed `r_{k,n}(p)` for every station, RU and power level.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    k: usize,
    n: usize,
    m: usize,
    bits: Vec<f64>,
}

impl RateTable {
    /// Wraps raw rates laid out as `[(k * N + n) * M + m]`.
    pub fn from_raw(k: usize, n: usize, m: usize, bits: Vec<f64>) -> Result<Self> {
        if bits.len() != k * n * m {
            return Err(Error::Dimension {
                what: "rate table",
                expected: k * n * m,
                actual: bits.len(),
            });
        }
        Ok(Self { k, n, m, bits })
    }

    pub fn num_stations(&self) -> usize {
        self.k
    }

    pub fn num_rus(&self) -> usize {
        self.n
    }

    pub fn num_powers(&self) -> usize {
        self.m
    }

    pub fn get(&self, k: usize, n: usize, m: usize) -> f64 {
        self.bits[(k * self.n + n) * self.m + m]
    }

    /// Rates of pair `(k, n)` over the power levels.
    pub fn by_power(&self, k: usize, n: usize) -> &[f64] {
        let start = (k * self.n + n) * self.m;
        &self.bits[start..start + self.m]
    }
}

pub fn rate_table(
    state: &ChannelState,
    topo: &Topology,
    phy: &PhyConfig,
    mcs: &McsTable,
) -> Result<RateTable> {
    if state.num_stations() != topo.num_stations() {
        return Err(Error::Dimension {
            what: "stations in channel state vs topology",
            expected: topo.num_stations(),
            actual: state.num_stations(),
        });
    }
    if state.num_rus() != phy.n_rus {
        return Err(Error::Dimension {
            what: "RUs in channel state vs phy",
            expected: phy.n_rus,
            actual: state.num_rus(),
        });
    }
    let levels = phy.rate_levels(mcs);
    let (k, n, m) = (state.num_stations(), state.num_rus(), phy.power_levels_dbm.len());
    let mut bits = Vec::with_capacity(k * n * m);
    for station in 0..k {
        let pl = topo.pathloss_db[station];
        for ru in 0..n {
            let g = state.gain(station, ru);
            for &p in &phy.power_levels_dbm {
                let snr = snr_per_subcarrier(p, phy.subcarriers_per_ru, pl, g)?;
                bits.push(select_mcs(snr, mcs).map_or(0.0, |l| levels[l - 1]));
            }
        }
    }
    RateTable::from_raw(k, n, m, bits)
}
