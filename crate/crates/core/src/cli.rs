//! Command-line runner: pick a scenario, run it, write CSV/JSON artifacts.
//!
//! Every flag has a key of the same (kebab-case) name in an optional TOML
//! config file; flags win over the file. Exit status: 0 when everything ran
//! and all enabled thresholds held, 2 when a threshold failed, 1 on any
//! configuration or validation error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Deserialize;
use thiserror::Error;

use crate::chronometry::{
    dilation_time, queue_clock_count, simulate_queue_clock, ChronometryError, ClockScenario,
};
use crate::engine::{
    EngineError, LotteryMode, Protocol, ProtocolConfig, DARK_THRESHOLD, SAME_SOURCE_EPS,
};
use crate::experiments::{
    self, chi_square_critical, clock_csv, dilation_csv, ensemble_csv, profile_csv, summary_json,
    EnsembleResult, ExperimentError, Summary,
};
use crate::lattice::{
    arm_lengths_for_intensity, build_grid, build_interferometric_star, build_slit_grid, build_star,
    build_two_path, load_topology, Lattice, LatticeError, SlitGrid,
};

pub const OUT_ENV: &str = "TALKSIM_OUT";
const DEFAULT_OUT: &str = "talksim-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Disjoint arms from the source, one detector each.
    Star,
    /// One detector fed by two chains.
    TwoPath,
    /// Slit screen on a king-move grid.
    DoubleSlit,
    /// Rectangular 4-neighbour grid, detectors on the last column.
    Grid,
    /// Queue clock counts.
    Clock,
    /// Moving-clock dilation table.
    Dilation,
    /// Lattice from a topology document.
    Custom,
}

impl Scenario {
    fn name(self) -> &'static str {
        match self {
            Scenario::Star => "star",
            Scenario::TwoPath => "two-path",
            Scenario::DoubleSlit => "double-slit",
            Scenario::Grid => "grid",
            Scenario::Clock => "clock",
            Scenario::Dilation => "dilation",
            Scenario::Custom => "custom",
        }
    }
}

/// Flags, and equally the keys of the config file.
#[derive(Debug, Clone, Default, Parser, Deserialize)]
#[command(name = "talksim", version, about = "Hidden-time signalling simulator")]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct Options {
    /// TOML file with any of these options as kebab-case keys.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scenario: Option<Scenario>,
    /// Lottery mode: naive or aggregate [default: aggregate].
    #[arg(long)]
    pub mode: Option<LotteryMode>,
    /// Wavelength in lattice length units [default: scenario dependent].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Number of trials [default: 100000].
    #[arg(long)]
    pub trials: Option<u64>,
    /// Master seed [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it [default: all cores].
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Topology document for the custom scenario.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Output directory [default: $TALKSIM_OUT, else ./talksim-out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write trace.log with every signal of trial 0.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub trace: Option<bool>,
    /// Largest accepted TV distance to the Born rule
    /// [default: 0.01 on tree-shaped query routes, 0.02 otherwise].
    #[arg(long)]
    pub tv_threshold: Option<f64>,
    /// χ² percentile, gated on tree-shaped query routes [default: 0.99].
    #[arg(long)]
    pub chi_percentile: Option<f64>,
    /// Phase window for same-source arrivals, radians [default: 0.1].
    #[arg(long)]
    pub eps_same: Option<f64>,
    /// Intensity at or below which a detector is dark [default: 1e-12].
    #[arg(long)]
    pub eps_dark: Option<f64>,
    /// Star arms or grid screen detectors [default: 3].
    #[arg(long)]
    pub detectors: Option<usize>,
    /// Ribs per star arm [default: 2].
    #[arg(long)]
    pub arm_hops: Option<usize>,
    /// Star detector intensities in [0, 4], comma separated; each arm becomes
    /// a two-chain interferometer.
    #[arg(long, value_delimiter = ',')]
    pub intensities: Option<Vec<f64>>,
    /// Clock speeds for the dilation table, comma separated
    /// [default: 100 points over 0..0.99].
    #[arg(long, value_delimiter = ',')]
    pub v: Option<Vec<f64>>,
    /// Proper time for the dilation table [default: 1].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Source-to-clock distances in hops, comma separated [default: 5,10,20].
    #[arg(long, value_delimiter = ',')]
    pub distance: Option<Vec<u64>>,
    /// Laser-to-clock distance in hops [default: 1].
    #[arg(long)]
    pub laser_distance: Option<u64>,
    /// Ticks between laser pulses [default: 1].
    #[arg(long)]
    pub cadence: Option<u64>,
    /// Open slits, 1 or 2 [default: 2].
    #[arg(long)]
    pub slits: Option<usize>,
    /// Two-path chain lengths [default: 2.0 and 2.0].
    #[arg(long)]
    pub len_a: Option<f64>,
    #[arg(long)]
    pub len_b: Option<f64>,
    /// Ribs per two-path chain [default: 2].
    #[arg(long)]
    pub hops: Option<usize>,
    /// Grid width and height [default: 6 x 5].
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
}

impl Options {
    /// Fills every unset field from `file`.
    fn or(self, file: Options) -> Options {
        macro_rules! pick {
            ($($f:ident),*) => { Options { config: self.config, $($f: self.$f.or(file.$f)),* } };
        }
        pick!(
            scenario,
            mode,
            lambda,
            trials,
            seed,
            jobs,
            topology,
            out,
            trace,
            tv_threshold,
            chi_percentile,
            eps_same,
            eps_dark,
            detectors,
            arm_hops,
            intensities,
            v,
            tau,
            distance,
            laser_distance,
            cadence,
            slits,
            len_a,
            len_b,
            hops,
            width,
            height
        )
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Chronometry(#[from] ChronometryError),
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Validated settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub mode: LotteryMode,
    pub lambda: Option<f64>,
    pub trials: u64,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub topology: Option<PathBuf>,
    pub out: PathBuf,
    pub trace: bool,
    pub tv_threshold: Option<f64>,
    pub chi_percentile: f64,
    pub eps_same: f64,
    pub eps_dark: f64,
    pub detectors: usize,
    pub arm_hops: usize,
    pub intensities: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub tau: f64,
    pub distance: Vec<u64>,
    pub laser_distance: u64,
    pub cadence: u64,
    pub slits: usize,
    pub len_a: f64,
    pub len_b: f64,
    pub hops: usize,
    pub width: usize,
    pub height: usize,
}

impl RunConfig {
    /// Merges flags over the config file (if any) and checks ranges. `env_out`
    /// is the output directory from the environment.
    pub fn resolve(options: Options, env_out: Option<PathBuf>) -> Result<Self, CliError> {
        let file = match &options.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                toml::from_str(&text)
                    .map_err(|e| config_error(format!("{}: {}", path.display(), e.message())))?
            }
            None => Options::default(),
        };
        let o = options.or(file);
        let c = RunConfig {
            scenario: o
                .scenario
                .ok_or_else(|| config_error("no scenario given"))?,
            mode: o.mode.unwrap_or(LotteryMode::Aggregate),
            lambda: o.lambda,
            trials: o.trials.unwrap_or(100_000),
            seed: o.seed.unwrap_or(42),
            jobs: o.jobs,
            topology: o.topology,
            out: o
                .out
                .or(env_out)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            trace: o.trace.unwrap_or(false),
            tv_threshold: o.tv_threshold,
            chi_percentile: o.chi_percentile.unwrap_or(0.99),
            eps_same: o.eps_same.unwrap_or(SAME_SOURCE_EPS),
            eps_dark: o.eps_dark.unwrap_or(DARK_THRESHOLD),
            detectors: o
                .detectors
                .or(o.intensities.as_ref().map(Vec::len))
                .unwrap_or(3),
            arm_hops: o.arm_hops.unwrap_or(2),
            intensities: o.intensities,
            v: o.v,
            tau: o.tau.unwrap_or(1.0),
            distance: o.distance.unwrap_or_else(|| vec![5, 10, 20]),
            laser_distance: o.laser_distance.unwrap_or(1),
            cadence: o.cadence.unwrap_or(1),
            slits: o.slits.unwrap_or(2),
            len_a: o.len_a.unwrap_or(2.0),
            len_b: o.len_b.unwrap_or(2.0),
            hops: o.hops.unwrap_or(2),
            width: o.width.unwrap_or(6),
            height: o.height.unwrap_or(5),
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(config_error(format!("{name} must be positive, got {x}")))
            }
        };
        let at_least_one = |name: &str, x: usize| {
            if x >= 1 {
                Ok(())
            } else {
                Err(config_error(format!("{name} must be at least 1")))
            }
        };
        if let Some(l) = self.lambda {
            positive("lambda", l)?;
        }
        if self.trials == 0 {
            return Err(config_error("trials must be at least 1"));
        }
        if let Some(j) = self.jobs {
            at_least_one("jobs", j)?;
        }
        if let Some(t) = self.tv_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(config_error(format!(
                    "tv-threshold must lie in (0, 1], got {t}"
                )));
            }
        }
        if !(self.chi_percentile > 0.0 && self.chi_percentile < 1.0) {
            return Err(config_error(format!(
                "chi-percentile must lie in (0, 1), got {}",
                self.chi_percentile
            )));
        }
        if !(self.eps_same > 0.0 && self.eps_same <= std::f64::consts::PI) {
            return Err(config_error(format!(
                "eps-same must lie in (0, π], got {}",
                self.eps_same
            )));
        }
        if !(self.eps_dark >= 0.0 && self.eps_dark.is_finite()) {
            return Err(config_error(format!(
                "eps-dark must be non-negative, got {}",
                self.eps_dark
            )));
        }
        at_least_one("detectors", self.detectors)?;
        at_least_one("arm-hops", self.arm_hops)?;
        at_least_one("hops", self.hops)?;
        at_least_one("width", self.width)?;
        at_least_one("height", self.height)?;
        positive("tau", self.tau)?;
        positive("len-a", self.len_a)?;
        positive("len-b", self.len_b)?;
        if let Some(is) = &self.intensities {
            if is.iter().any(|i| !(0.0..=4.0).contains(i)) {
                return Err(config_error("intensities must lie in [0, 4]"));
            }
            if is.len() != self.detectors {
                return Err(config_error(format!(
                    "{} intensities for {} detectors",
                    is.len(),
                    self.detectors
                )));
            }
        }
        if let Some(vs) = &self.v {
            if vs.is_empty() || vs.iter().any(|v| !(0.0..1.0).contains(v)) {
                return Err(config_error("v values must lie in [0, 1)"));
            }
        }
        if self.distance.is_empty() || self.distance.contains(&0) {
            return Err(config_error("distances must be at least 1"));
        }
        if self.laser_distance == 0 || self.cadence == 0 {
            return Err(config_error(
                "laser-distance and cadence must be at least 1",
            ));
        }
        if !matches!(self.slits, 1 | 2) {
            return Err(config_error(format!(
                "slits must be 1 or 2, got {}",
                self.slits
            )));
        }
        if self.scenario == Scenario::Custom && self.topology.is_none() {
            return Err(config_error("the custom scenario needs --topology"));
        }
        if let Some(t) = &self.topology {
            if !t.is_file() {
                return Err(config_error(format!(
                    "topology file {} not found",
                    t.display()
                )));
            }
        }
        Ok(())
    }

    fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            mode: self.mode,
            dark_threshold: self.eps_dark,
            ..ProtocolConfig::default()
        }
    }
}

/// What a run printed and whether its thresholds held.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub lines: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    pub passed: bool,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.lines.push(format!(
            "{} {name}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        ));
        self.passed &= ok;
    }
}

fn write_artifact(
    report: &mut Report,
    dir: &Path,
    name: &str,
    contents: &str,
) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    report.artifacts.push(path);
    Ok(())
}

fn scenario_lattice(c: &RunConfig) -> Result<(Lattice, Option<SlitGrid>), CliError> {
    Ok(match c.scenario {
        Scenario::Star => {
            let lambda = c.lambda.unwrap_or(1.0);
            let lattice = match &c.intensities {
                Some(is) => {
                    let arms = is
                        .iter()
                        .map(|&i| arm_lengths_for_intensity(i, lambda))
                        .collect::<Result<Vec<_>, _>>()?;
                    build_interferometric_star(&arms, c.arm_hops, lambda)?
                }
                None => build_star(c.detectors, c.arm_hops, &vec![1.0; c.detectors], lambda)?,
            };
            (lattice, None)
        }
        Scenario::TwoPath => (
            build_two_path(c.len_a, c.len_b, c.hops, c.lambda.unwrap_or(1.0))?,
            None,
        ),
        Scenario::DoubleSlit => {
            let mut spec = if c.slits == 2 {
                SlitGrid::double_slit()
            } else {
                SlitGrid::single_slit()
            };
            if let Some(l) = c.lambda {
                spec.wavelength = l;
            }
            (build_slit_grid(&spec)?, Some(spec))
        }
        Scenario::Grid => {
            if c.detectors > c.height {
                return Err(config_error("grid has fewer rows than detectors"));
            }
            let first = (c.height - c.detectors) / 2;
            let detectors: Vec<_> = (first..first + c.detectors)
                .map(|y| (c.width - 1, y))
                .collect();
            let lambda = c.lambda.unwrap_or(0.7);
            (
                build_grid(
                    c.width,
                    c.height,
                    1.0,
                    (0, c.height / 2),
                    &detectors,
                    lambda,
                )?,
                None,
            )
        }
        Scenario::Custom => {
            let path = c.topology.as_ref().expect("validated");
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            let lattice = load_topology(&text)?;
            let lattice = match c.lambda {
                Some(l) => lattice.with_wavelength(l)?,
                None => lattice,
            };
            (lattice, None)
        }
        Scenario::Clock | Scenario::Dilation => unreachable!("not a lattice scenario"),
    })
}

fn run_lattice(c: &RunConfig, report: &mut Report) -> Result<(), CliError> {
    let (lattice, slits) = scenario_lattice(c)?;
    let config = c.protocol();
    let protocol = Protocol::prepare(&lattice, config)?;

    let mut amplitudes = String::from("detector_id,re,im,intensity\n");
    for r in protocol.records() {
        writeln!(
            amplitudes,
            "{},{},{},{}",
            r.detector.0, r.amplitude.re, r.amplitude.im, r.intensity
        )
        .expect("writing to a string");
    }
    write_artifact(report, &c.out, "intensities.csv", &amplitudes)?;

    if c.trace {
        let logged = Protocol::prepare_logged(&lattice, config)?;
        let (_, events) = logged.run_trial_logged(c.seed, 0)?;
        let mut log = String::new();
        for e in &events {
            writeln!(log, "{e}").expect("writing to a string");
        }
        write_artifact(report, &c.out, "trace.log", &log)?;
    }

    let result: EnsembleResult = match c.jobs {
        Some(jobs) => {
            experiments::run_ensemble_with_jobs(&lattice, config, c.trials, c.seed, jobs)?
        }
        None => experiments::run_ensemble(&lattice, config, c.trials, c.seed)?,
    };
    write_artifact(report, &c.out, "ensemble.csv", &ensemble_csv(&result))?;
    write_artifact(
        report,
        &c.out,
        "summary.json",
        &summary_json(&Summary::new(c.scenario.name(), &result)),
    )?;
    if slits.is_some() {
        let profile = experiments::profile_from(&lattice, &result, &config)?;
        write_artifact(report, &c.out, "profile.csv", &profile_csv(&profile))?;
    }

    let tree = experiments::lottery_routes_are_tree(&protocol);
    let tv_limit = c.tv_threshold.unwrap_or(if tree { 0.01 } else { 0.02 });
    report.check(
        "tv distance",
        result.tv_distance <= tv_limit,
        format!("{:.6} (limit {tv_limit})", result.tv_distance),
    );
    if tree {
        let chi = result.chi_square;
        if chi.dof > 0 {
            let critical = chi_square_critical(chi.dof, c.chi_percentile)?;
            report.check(
                "chi-square",
                chi.statistic < critical,
                format!(
                    "{:.4} on {} dof (critical {:.4}{})",
                    chi.statistic,
                    chi.dof,
                    critical,
                    if chi.underpowered {
                        ", underpowered"
                    } else {
                        ""
                    }
                ),
            );
        }
    }
    Ok(())
}

fn run_clock(c: &RunConfig, report: &mut Report) -> Result<(), CliError> {
    let mut runs = Vec::new();
    for &d in &c.distance {
        let scenario = ClockScenario::new(d, c.laser_distance, c.cadence)?;
        let run = simulate_queue_clock(&scenario)?;
        let expected = queue_clock_count(&scenario);
        report.check(
            &format!("clock d_S={d}"),
            run.reading == expected,
            format!(
                "simulated {} closed form {}",
                run.reading.laser_count, expected.laser_count
            ),
        );
        runs.push(run);
    }
    write_artifact(report, &c.out, "clock.csv", &clock_csv(&runs))
}

fn run_dilation(c: &RunConfig, report: &mut Report) -> Result<(), CliError> {
    let speeds =
        c.v.clone()
            .unwrap_or_else(|| (0..100).map(|i| 0.99 * i as f64 / 99.0).collect());
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for v in speeds {
        let t = dilation_time(c.tau, v)?;
        worst = worst.max((t * (1.0 - v * v).sqrt() - c.tau).abs());
        rows.push((c.tau, v, t));
    }
    report.check(
        "dilation identity",
        worst <= 1e-12 * c.tau.max(1.0),
        format!("max |t·√(1−v²) − τ| = {worst:e}"),
    );
    write_artifact(report, &c.out, "dilation.csv", &dilation_csv(&rows))
}

pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    std::fs::create_dir_all(&config.out).map_err(|source| CliError::Io {
        path: config.out.clone(),
        source,
    })?;
    let mut report = Report {
        passed: true,
        ..Report::default()
    };
    match config.scenario {
        Scenario::Clock => run_clock(config, &mut report)?,
        Scenario::Dilation => run_dilation(config, &mut report)?,
        _ => run_lattice(config, &mut report)?,
    }
    Ok(report)
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let options = match Options::try_parse_from(args) {
        Ok(o) => o,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    let outcome = RunConfig::resolve(options, env_out).and_then(|c| run(&c));
    match outcome {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for path in &report.artifacts {
                println!("wrote {}", path.display());
            }
            if report.passed {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
