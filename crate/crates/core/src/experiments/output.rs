//! CSV tables and the JSON summary. Rows come from ordered maps and vectors,
//! so identical results always serialize to identical bytes.

use serde::Serialize;

use super::{EnsembleResult, InterferenceProfile};
use crate::chronometry::ClockRun;
use crate::engine::LotteryMode;

fn to_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("writing to memory cannot fail");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[derive(Serialize)]
struct EnsembleRow {
    detector_id: usize,
    count: u64,
    empirical: f64,
    born: f64,
    abs_error: f64,
}

pub fn ensemble_csv(result: &EnsembleResult) -> String {
    to_csv(result.counts.iter().map(|(d, &count)| {
        let empirical = result.empirical[d];
        let born = result.reference.probability(*d);
        EnsembleRow {
            detector_id: d.0,
            count,
            empirical,
            born,
            abs_error: (empirical - born).abs(),
        }
    }))
}

#[derive(Serialize)]
struct ProfileRow {
    screen_index: usize,
    position: f64,
    oracle_intensity: f64,
    empirical_frequency: f64,
}

pub fn profile_csv(profile: &InterferenceProfile) -> String {
    to_csv((0..profile.detectors.len()).map(|i| ProfileRow {
        screen_index: i,
        position: profile.positions[i],
        oracle_intensity: profile.oracle_intensity[i],
        empirical_frequency: profile.empirical_frequency[i],
    }))
}

#[derive(Serialize)]
struct ClockRow {
    source_distance: u64,
    laser_distance: u64,
    cadence: u64,
    laser_count: u64,
}

pub fn clock_csv(runs: &[ClockRun]) -> String {
    to_csv(runs.iter().map(|r| ClockRow {
        source_distance: r.scenario.source_distance,
        laser_distance: r.scenario.laser_distance,
        cadence: r.scenario.cadence,
        laser_count: r.reading.laser_count,
    }))
}

#[derive(Serialize)]
struct DilationRow {
    tau: f64,
    v: f64,
    t: f64,
}

/// Rows of `(τ, v, t)`.
pub fn dilation_csv(rows: &[(f64, f64, f64)]) -> String {
    to_csv(rows.iter().map(|&(tau, v, t)| DilationRow { tau, v, t }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub lattice_id: String,
    pub mode: LotteryMode,
    pub trials: u64,
    pub seed: u64,
    pub tv_distance: f64,
    pub chi_square: f64,
    pub dof: usize,
    pub chi_square_underpowered: bool,
    pub degenerate_lotteries: u64,
}

impl Summary {
    pub fn new(scenario: &str, result: &EnsembleResult) -> Self {
        Summary {
            scenario: scenario.to_string(),
            lattice_id: result.lattice_id.clone(),
            mode: result.mode,
            trials: result.trials,
            seed: result.seed,
            tv_distance: result.tv_distance,
            chi_square: result.chi_square.statistic,
            dof: result.chi_square.dof,
            chi_square_underpowered: result.chi_square.underpowered,
            degenerate_lotteries: result.degenerate_lotteries,
        }
    }
}

pub fn summary_json(summary: &Summary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serializes");
    s.push('\n');
    s
}
