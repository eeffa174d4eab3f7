//! Full-power baselines: sum-rate, proportional fairness and random selection.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::assignment::{solve_max_assignment, Assignment, WeightMatrix};
use crate::channel::RateTable;

use super::{Grant, ResourceAction};

/// Starting value of the PF moving average, bits.
pub const PF_INITIAL_AVERAGE: f64 = 1.0;

fn full_power_action(rates: &RateTable, powers_mw: &[f64], assignment: &Assignment) -> ResourceAction {
    let top = powers_mw.len() - 1;
    let grants = assignment
        .pairs
        .iter()
        .map(|&(station, ru)| Grant {
            station,
            ru,
            power_index: top,
            power_mw: powers_mw[top],
            rate_bits: rates.get(station, ru, top),
        })
        .collect();
    ResourceAction::from_grants(rates.num_stations(), grants)
}

fn weighted_full_power(rates: &RateTable, station_weight: impl Fn(usize) -> f64) -> WeightMatrix {
    let (k, n) = (rates.num_stations(), rates.num_rus());
    let top = rates.num_powers() - 1;
    let mut data = Vec::with_capacity(k * n);
    for station in 0..k {
        let w = station_weight(station);
        for ru in 0..n {
            data.push(w * rates.get(station, ru, top));
        }
    }
    WeightMatrix::new(k, n, data).expect("rates are finite")
}

/// Maximizes the instantaneous sum-rate at `P_max`.
pub fn srm_epoch(rates: &RateTable, powers_mw: &[f64]) -> ResourceAction {
    let w = weighted_full_power(rates, |_| 1.0);
    full_power_action(rates, powers_mw, &solve_max_assignment(&w, true))
}

/// Maximizes `Σ r_{k,n} / max(A_k, 1)` at `P_max`, then folds the realized
/// rates into the moving averages: `A_k <- (1 - β) A_k + β r_k`.
pub fn pf_epoch(rates: &RateTable, powers_mw: &[f64], averages: &mut [f64], beta: f64) -> ResourceAction {
    let w = weighted_full_power(rates, |k| 1.0 / averages[k].max(1.0));
    let action = full_power_action(rates, powers_mw, &solve_max_assignment(&w, true));
    for (avg, &r) in averages.iter_mut().zip(&action.rate) {
        *avg = (1.0 - beta) * *avg + beta * r;
    }
    action
}

/// Picks `min(K, N)` stations uniformly at random and maps them onto a
/// random RU subset through a random bijection, all at `P_max`.
pub fn rnd_epoch<R: Rng + ?Sized>(rates: &RateTable, powers_mw: &[f64], rng: &mut R) -> ResourceAction {
    let (k, n) = (rates.num_stations(), rates.num_rus());
    let count = k.min(n);
    let mut stations: Vec<usize> = (0..k).collect();
    let mut rus: Vec<usize> = (0..n).collect();
    stations.shuffle(rng);
    rus.shuffle(rng);
    let pairs = stations.into_iter().zip(rus).take(count).collect();
    let assignment = Assignment { pairs, value: 0.0 };
    full_power_action(rates, powers_mw, &assignment)
}
