//! Command implementations behind the `memlstm` binary: run configuration,
//! report types and the six subcommands.
//!
//! Configuration precedence, highest first: command-line flags, the JSON
//! config file, built-in defaults. A global seed (flag or top-level `seed`
//! key) overrides the trainer and variation seeds.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analog::{self, AnalogBlockParams};
use crate::crossbar::{Levels, MemristorParams, NetworkCrossbars, VariationModel};
use crate::dataset::{self, DatasetError, Prepared, DEFAULT_TEST_COUNT};
use crate::experiment::{mean_std, Experiment, HardwareConfig, SimError};
use crate::lstm::{self, Hyperparams, LstmError, Metrics};
use crate::scheduler::{run_prediction, PowerModel, TimelineConfig};

pub const CONFIG_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Weights(LstmError),
    #[error(transparent)]
    Training(LstmError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("cannot write '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Stable machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Dataset(_) => "dataset",
            CliError::Weights(_) => "weights",
            CliError::Training(_) => "training",
            CliError::Simulation(_) => "simulation",
            CliError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Dataset(_) => 4,
            CliError::Weights(_) => 5,
            CliError::Training(_) => 6,
            CliError::Simulation(_) => 7,
            CliError::Io { .. } => 8,
        }
    }

    /// Single-line rendering: `error[category]: message`.
    pub fn render(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error[{}]: {msg}", self.category())
    }
}

impl From<crate::crossbar::CrossbarError> for CliError {
    fn from(e: crate::crossbar::CrossbarError) -> Self {
        CliError::Simulation(SimError::Crossbar(e))
    }
}

impl From<crate::scheduler::ScheduleError> for CliError {
    fn from(e: crate::scheduler::ScheduleError) -> Self {
        CliError::Simulation(SimError::Schedule(e))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: String,
    /// CSV series; the bundled airline series when absent.
    pub dataset: Option<PathBuf>,
    pub test_count: usize,
    pub trainer: Hyperparams,
    pub memristor: MemristorParams,
    pub variation: VariationModel,
    pub analog: AnalogBlockParams,
    pub timeline: TimelineConfig,
    pub power: PowerModel,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let trainer = Hyperparams::default();
        Self {
            version: CONFIG_VERSION.to_string(),
            dataset: None,
            test_count: DEFAULT_TEST_COUNT,
            trainer,
            memristor: MemristorParams::default(),
            variation: VariationModel {
                seed: trainer.seed,
                ..VariationModel::default()
            },
            analog: AnalogBlockParams::default(),
            timeline: TimelineConfig::default(),
            power: PowerModel::default(),
            out_dir: PathBuf::from("out"),
            seed: trainer.seed,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let has_seed = value.get("seed").is_some();
        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        if has_seed {
            cfg.set_seed(cfg.seed);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config '{}': {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.trainer.seed = seed;
        self.variation.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version \"{}\" (expected \"{CONFIG_VERSION}\")",
                self.version
            )));
        }
        if self.test_count == 0 {
            return Err(CliError::Config("test_count must be positive".into()));
        }
        let cfg_err = |e: String| CliError::Config(e);
        self.trainer.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.memristor.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.variation.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.analog.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.power.validate().map_err(|e| cfg_err(e.to_string()))?;
        crate::scheduler::build_cycle_timeline(&self.timeline, &self.power).map_err(|e| cfg_err(e.to_string()))?;
        Ok(())
    }

    pub fn hardware(&self) -> HardwareConfig {
        HardwareConfig {
            memristor: self.memristor,
            variation: self.variation,
            analog: self.analog,
        }
    }

    pub fn prepare(&self) -> Result<Prepared> {
        let series = match &self.dataset {
            Some(path) => dataset::load_series(path)?,
            None => dataset::airline_passengers(),
        };
        Ok(dataset::prepare(&series, self.test_count)?)
    }

    pub fn weights_path(&self) -> PathBuf {
        self.out_dir.join("weights.json")
    }
}

/// Hardware figures reported for the reference circuit. Literature values
/// for side-by-side display; never produced by a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PublishedReference {
    pub note: &'static str,
    pub software_mse: f64,
    pub software_rmse: f64,
    pub analog_mse: f64,
    pub analog_rmse: f64,
    pub cycle_time_us: f64,
    pub total_time_ms_45_points: f64,
    pub peak_cell_power_mw: f64,
    pub cell_area_um2: f64,
}

pub const PUBLISHED: PublishedReference = PublishedReference {
    note: "published reference values, not measured by this run",
    software_mse: 0.0112,
    software_rmse: 0.1059,
    analog_mse: 0.0101,
    analog_rmse: 0.1004,
    cycle_time_us: 88.0,
    total_time_ms_45_points: 3.96,
    peak_cell_power_mw: 210.67,
    cell_area_um2: 58569.0,
};

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub no_timestamp: bool,
}

fn timestamp(opts: &Options) -> Option<u64> {
    if opts.no_timestamp {
        return None;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write_file(path, &text)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub generated_at: Option<u64>,
    pub hyperparams: Hyperparams,
    pub train_rows: usize,
    pub test_rows: usize,
    pub final_epoch_loss: f64,
    pub train: Metrics,
    pub test: Metrics,
    pub weights_file: PathBuf,
    pub published_reference: PublishedReference,
}

impl TrainReport {
    pub fn summary(&self) -> String {
        format!(
            "train MSE {:.6} RMSE {:.6}\ntest  MSE {:.6} RMSE {:.6}\nweights written to {}\n",
            self.train.mse,
            self.train.rmse,
            self.test.mse,
            self.test.rmse,
            self.weights_file.display()
        )
    }
}

pub fn cmd_train(cfg: &RunConfig, opts: &Options) -> Result<TrainReport> {
    let prepared = cfg.prepare()?;
    let outcome = lstm::train_with_history(&prepared.train, &cfg.trainer).map_err(CliError::Training)?;
    let w = &outcome.weights;
    let train = lstm::metrics(&lstm::predict(w, &prepared.train), &prepared.train.targets()).map_err(CliError::Training)?;
    let test = lstm::metrics(&lstm::predict(w, &prepared.test), &prepared.test.targets()).map_err(CliError::Training)?;

    let weights_file = cfg.weights_path();
    let mut text = lstm::weights_to_json(w).map_err(CliError::Weights)?;
    text.push('\n');
    write_file(&weights_file, &text)?;

    let report = TrainReport {
        generated_at: timestamp(opts),
        hyperparams: cfg.trainer,
        train_rows: prepared.train.len(),
        test_rows: prepared.test.len(),
        final_epoch_loss: outcome.epoch_loss.last().copied().unwrap_or(f64::NAN),
        train,
        test,
        weights_file,
        published_reference: PUBLISHED,
    };
    write_json(&cfg.out_dir.join("train_report.json"), &report)?;
    Ok(report)
}

fn load_experiment(cfg: &RunConfig, weights: &Path) -> Result<Experiment> {
    let prepared = cfg.prepare()?;
    let w = lstm::import_weights(weights).map_err(CliError::Weights)?;
    Ok(Experiment::new(prepared, w, &cfg.timeline, &cfg.power)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloSummary {
    pub trials: u64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub rmse: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub generated_at: Option<u64>,
    pub test_rows: usize,
    pub ideal: bool,
    pub memristor: MemristorParams,
    pub variation: VariationModel,
    pub analog_params: AnalogBlockParams,
    pub software: Metrics,
    pub analog: Metrics,
    pub monte_carlo: Option<MonteCarloSummary>,
    pub cycle_time_us: f64,
    pub total_time_ms: f64,
    pub energy_mj: f64,
    pub published_reference: PublishedReference,
}

impl SimulateReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "software MSE {:.6} RMSE {:.6}", self.software.mse, self.software.rmse);
        let _ = writeln!(s, "analog   MSE {:.6} RMSE {:.6}", self.analog.mse, self.analog.rmse);
        if let Some(mc) = &self.monte_carlo {
            let _ = writeln!(s, "analog RMSE over {} trials: mean {:.6} std {:.6}", mc.trials, mc.rmse_mean, mc.rmse_std);
        }
        let _ = writeln!(
            s,
            "{} predictions x {} us = {} ms, energy {:.6} mJ",
            self.test_rows, self.cycle_time_us, self.total_time_ms, self.energy_mj
        );
        s
    }
}

/// Runs the analog pipeline over the test rows. Trial 0 provides the
/// per-point outputs; with `trials > 1` the report also carries the
/// Monte Carlo RMSE distribution.
pub fn cmd_simulate(cfg: &RunConfig, weights: &Path, trials: u64, opts: &Options) -> Result<SimulateReport> {
    if trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    let exp = load_experiment(cfg, weights)?;
    let hw = cfg.hardware();
    let first = exp.analog_trial(&hw, 0)?;
    let targets = exp.targets();
    let norm = exp.prepared.normalizer;

    let mut csv = String::from("index,target,software,analog,target_denorm,software_denorm,analog_denorm\n");
    for (i, ((t, s), a)) in targets.iter().zip(&exp.software).zip(&first.run.predictions).enumerate() {
        let _ = writeln!(
            csv,
            "{i},{t:.6},{s:.6},{a:.6},{:.3},{:.3},{:.3}",
            norm.denormalize(*t),
            norm.denormalize(*s),
            norm.denormalize(*a)
        );
    }
    let out = &cfg.out_dir;
    write_file(&out.join("predictions.csv"), &csv)?;
    write_file(&out.join("targets.csv"), &dataset::series_to_csv(&targets))?;
    write_file(&out.join("software.csv"), &dataset::series_to_csv(&exp.software))?;
    write_file(&out.join("analog.csv"), &dataset::series_to_csv(&first.run.predictions))?;
    write_file(&out.join("timeline.csv"), &exp.timeline.to_csv())?;

    // Phase trace of the first test point under trial 0's hardware.
    let row = exp.prepared.test.rows[0];
    let trial_seed = crate::experiment::derive_seed(hw.variation.seed, 0);
    let net = NetworkCrossbars::program(&exp.weights, &hw.memristor)?
        .apply_variation(&VariationModel { seed: trial_seed, ..hw.variation })?;
    let trace = run_prediction::<rand_chacha::ChaCha8Rng>(&exp.timeline, &net, &hw.analog, row.x_prev, row.x_curr, None)?;
    write_file(&out.join("trace.csv"), &trace.trace_csv())?;

    let monte_carlo = if trials > 1 {
        let rmse = exp.rmse_trials(&hw, trials)?;
        let (rmse_mean, rmse_std) = mean_std(&rmse);
        Some(MonteCarloSummary { trials, rmse_mean, rmse_std, rmse })
    } else {
        None
    };

    let report = SimulateReport {
        generated_at: timestamp(opts),
        test_rows: targets.len(),
        ideal: hw.analog.is_ideal() && hw.variation.sigma_rel == 0.0 && hw.variation.read_noise_rel == 0.0,
        memristor: hw.memristor,
        variation: hw.variation,
        analog_params: hw.analog,
        software: exp.software_metrics,
        analog: first.metrics,
        monte_carlo,
        cycle_time_us: exp.timeline.cycle_time_us(),
        total_time_ms: first.run.total_time_ms,
        energy_mj: first.run.energy_mj,
        published_reference: PUBLISHED,
    };
    write_json(&out.join("simulate_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub generated_at: Option<u64>,
    pub rows: usize,
    pub software: Metrics,
    pub analog: Metrics,
    pub max_abs_delta: f64,
    pub published_reference: PublishedReference,
}

impl CompareReport {
    pub fn summary(&self) -> String {
        let p = &self.published_reference;
        let mut s = String::new();
        let _ = writeln!(s, "                 MSE       RMSE");
        let _ = writeln!(s, "software    {:>9.6}  {:>9.6}", self.software.mse, self.software.rmse);
        let _ = writeln!(s, "analog      {:>9.6}  {:>9.6}", self.analog.mse, self.analog.rmse);
        let _ = writeln!(s, "max |software - analog| = {:.3e} over {} points", self.max_abs_delta, self.rows);
        let _ = writeln!(s, "published reference ({}):", p.note);
        let _ = writeln!(s, "software    {:>9.4}  {:>9.4}", p.software_mse, p.software_rmse);
        let _ = writeln!(s, "analog      {:>9.4}  {:>9.4}", p.analog_mse, p.analog_rmse);
        s
    }
}

/// Pointwise comparison of two prediction series against targets, all in
/// "index,value" CSV form.
pub fn compare_series(software: &[f64], analog: &[f64], targets: &[f64], opts: &Options) -> Result<(CompareReport, String)> {
    if software.len() != targets.len() || analog.len() != targets.len() {
        return Err(CliError::Usage(format!(
            "length mismatch: software {}, analog {}, targets {}",
            software.len(),
            analog.len(),
            targets.len()
        )));
    }
    let m = |p: &[f64]| lstm::metrics(p, targets).map_err(|e| CliError::Usage(e.to_string()));
    let mut csv = String::from("index,target,software,analog\n");
    let mut max_abs_delta = 0.0f64;
    for (i, ((t, s), a)) in targets.iter().zip(software).zip(analog).enumerate() {
        let _ = writeln!(csv, "{i},{t:.6},{s:.6},{a:.6}");
        max_abs_delta = max_abs_delta.max((s - a).abs());
    }
    let report = CompareReport {
        generated_at: timestamp(opts),
        rows: targets.len(),
        software: m(software)?,
        analog: m(analog)?,
        max_abs_delta,
        published_reference: PUBLISHED,
    };
    Ok((report, csv))
}

pub fn cmd_compare(cfg: &RunConfig, software: &Path, analog: &Path, targets: &Path, opts: &Options) -> Result<CompareReport> {
    let read = |p: &Path| -> Result<Vec<f64>> { Ok(dataset::series_from_csv(&read_text(p)?)?) };
    let (report, csv) = compare_series(&read(software)?, &read(analog)?, &read(targets)?, opts)?;
    write_file(&cfg.out_dir.join("comparison.csv"), &csv)?;
    write_json(&cfg.out_dir.join("compare_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    SigmaRel,
    Levels,
    DroopRate,
    GainErrorRel,
}

impl std::str::FromStr for SweepParam {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma_rel" => Ok(SweepParam::SigmaRel),
            "levels" => Ok(SweepParam::Levels),
            "droop_rate" => Ok(SweepParam::DroopRate),
            "gain_error_rel" => Ok(SweepParam::GainErrorRel),
            other => Err(CliError::Usage(format!(
                "unknown sweep parameter '{other}' (expected sigma_rel, levels, droop_rate or gain_error_rel)"
            ))),
        }
    }
}

impl SweepParam {
    /// Returns `base` with this parameter set from its textual value.
    pub fn apply(self, base: &HardwareConfig, value: &str) -> Result<HardwareConfig> {
        let mut hw = *base;
        let num = || {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("cannot parse sweep value '{value}'")))
        };
        match self {
            SweepParam::SigmaRel => hw.variation.sigma_rel = num()?,
            SweepParam::DroopRate => hw.analog.droop_rate = num()?,
            SweepParam::GainErrorRel => hw.analog.gain_error_rel = num()?,
            SweepParam::Levels => hw.memristor.levels = value.trim().parse::<Levels>().map_err(CliError::Usage)?,
        }
        let invalid = |e: String| CliError::Usage(format!("sweep value '{value}': {e}"));
        hw.memristor.validate().map_err(|e| invalid(e.to_string()))?;
        hw.variation.validate().map_err(|e| invalid(e.to_string()))?;
        hw.analog.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(hw)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: String,
    pub trials: u64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub generated_at: Option<u64>,
    pub parameter: SweepParam,
    pub software_rmse: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,trials,rmse_mean,rmse_std\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{:.9},{:.9}", p.value, p.trials, p.rmse_mean, p.rmse_std);
        }
        out
    }
}

/// Per value: mean/std analog RMSE over `trials` seeded trials. Trial `t`
/// uses the same derived seed for every value.
pub fn sweep_experiment(
    exp: &Experiment,
    base: &HardwareConfig,
    param: SweepParam,
    values: &[String],
    trials: u64,
    opts: &Options,
) -> Result<SweepReport> {
    if trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    if values.is_empty() {
        return Err(CliError::Usage("no sweep values given".into()));
    }
    let configs = values.iter().map(|v| param.apply(base, v)).collect::<Result<Vec<_>>>()?;
    let points = values
        .iter()
        .zip(&configs)
        .map(|(value, hw)| {
            let rmse = exp.rmse_trials(hw, trials)?;
            let (rmse_mean, rmse_std) = mean_std(&rmse);
            Ok(SweepPoint {
                value: value.trim().to_string(),
                trials,
                rmse_mean,
                rmse_std,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        generated_at: timestamp(opts),
        parameter: param,
        software_rmse: exp.software_metrics.rmse,
        points,
    })
}

pub fn cmd_sweep(
    cfg: &RunConfig,
    weights: &Path,
    param: SweepParam,
    values: &[String],
    trials: u64,
    opts: &Options,
) -> Result<SweepReport> {
    if trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    let exp = load_experiment(cfg, weights)?;
    let report = sweep_experiment(&exp, &cfg.hardware(), param, values, trials, opts)?;
    write_file(&cfg.out_dir.join("sweep.csv"), &report.to_csv())?;
    write_json(&cfg.out_dir.join("sweep_report.json"), &report)?;
    Ok(report)
}

/// Sweep range for transfer-curve dumps, volts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for CurveRange {
    fn default() -> Self {
        Self {
            start: -1.0,
            stop: 1.0,
            step: 0.001,
        }
    }
}

/// Second-input levels of the multiplier curve family.
pub const MULTIPLIER_VB: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

/// Writes sigmoid, tanh and multiplier transfer curves; returns the files.
pub fn cmd_dump_curves(cfg: &RunConfig, range: CurveRange) -> Result<Vec<PathBuf>> {
    if !(range.step > 0.0 && range.stop >= range.start && range.start.is_finite() && range.stop.is_finite()) {
        return Err(CliError::Usage("curve range needs start <= stop and step > 0".into()));
    }
    let p = cfg.analog;
    let mut files = Vec::new();
    let mut emit = |name: String, f: &dyn Fn(f64) -> f64| -> Result<()> {
        let path = cfg.out_dir.join(name);
        write_file(&path, &analog::curve_to_csv(&analog::sweep(range.start, range.stop, range.step, f)))?;
        files.push(path);
        Ok(())
    };
    emit("sigmoid_curve.csv".into(), &|v| analog::sigmoid_block(v, &p))?;
    emit("tanh_curve.csv".into(), &|v| analog::tanh_block(v, &p))?;
    for vb in MULTIPLIER_VB {
        emit(format!("multiplier_curve_vb_{vb:+.1}.csv"), &|v| analog::multiplier_block(v, vb, &p))?;
    }
    Ok(files)
}

/// Writes the programmed conductances of both arrays (with the configured
/// programming variation applied).
pub fn cmd_dump_crossbar(cfg: &RunConfig, weights: &Path) -> Result<Vec<PathBuf>> {
    let w = lstm::import_weights(weights).map_err(CliError::Weights)?;
    let net = NetworkCrossbars::program(&w, &cfg.memristor)?.apply_variation(&cfg.variation)?;
    let lstm_path = cfg.out_dir.join("lstm_crossbar.csv");
    let dense_path = cfg.out_dir.join("dense_crossbar.csv");
    write_file(&lstm_path, &net.lstm.to_csv())?;
    write_file(&dense_path, &net.dense.to_csv())?;
    Ok(vec![lstm_path, dense_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_unknown_keys() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let err = RunConfig::from_json(r#"{"bogus": 1}"#).unwrap_err();
        assert_eq!(err.category(), "config");
        let err = RunConfig::from_json(r#"{"trainer": {"lr": 1}}"#).unwrap_err();
        assert_eq!(err.category(), "config");
        assert!(RunConfig::from_json(r#"{"version": "v2"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"timeline": {"dense_us": 0}}"#).is_err());
    }

    #[test]
    fn global_seed_overrides_components() {
        let cfg = RunConfig::from_json(r#"{"seed": 9, "trainer": {"seed": 1}}"#).unwrap();
        assert_eq!((cfg.trainer.seed, cfg.variation.seed), (9, 9));
        let cfg = RunConfig::from_json(r#"{"trainer": {"seed": 1}, "memristor": {"levels": 16}}"#).unwrap();
        assert_eq!(cfg.trainer.seed, 1);
        assert_eq!(cfg.memristor.levels, Levels::Discrete(16));
    }

    #[test]
    fn sweep_param_parsing() {
        assert_eq!("levels".parse::<SweepParam>().unwrap(), SweepParam::Levels);
        assert_eq!("temperature".parse::<SweepParam>().unwrap_err().category(), "usage");
        let base = HardwareConfig::default();
        let hw = SweepParam::Levels.apply(&base, "continuous").unwrap();
        assert_eq!(hw.memristor.levels, Levels::Continuous);
        let hw = SweepParam::SigmaRel.apply(&base, "0.05").unwrap();
        assert_eq!(hw.variation.sigma_rel, 0.05);
        assert!(SweepParam::SigmaRel.apply(&base, "-1").is_err());
        assert!(SweepParam::Levels.apply(&base, "1").is_err());
        assert!(SweepParam::DroopRate.apply(&base, "x").is_err());
    }

    #[test]
    fn compare_identical() {
        let v = vec![0.1, 0.2, 0.3];
        let t = vec![0.15, 0.2, 0.25];
        let (r, csv) = compare_series(&v, &v, &t, &Options { no_timestamp: true }).unwrap();
        assert_eq!(r.software, r.analog);
        assert_eq!(r.max_abs_delta, 0.0);
        assert_eq!(csv.lines().count(), 4);
        assert!(compare_series(&v, &v[..2], &t, &Options::default()).is_err());
    }

    #[test]
    fn summary_lists_published_pairs() {
        let v = vec![0.1, 0.2];
        let (r, _) = compare_series(&v, &v, &v, &Options { no_timestamp: true }).unwrap();
        let s = r.summary();
        assert!(s.contains("0.0112") && s.contains("0.1059"));
        assert!(s.contains("0.0101") && s.contains("0.1004"));
    }

    #[test]
    fn error_rendering() {
        let e = CliError::Usage("bad\nthing".into());
        assert_eq!(e.render(), "error[usage]: bad thing");
        assert_eq!(e.exit_code(), 2);
    }
}
