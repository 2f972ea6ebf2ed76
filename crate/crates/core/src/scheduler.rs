//! Per-prediction cycle schedule: eight unit sub-cycles over two time steps,
//! settle delays, the dense readout, and the energy it all costs.
//!
//! Time is kept in integer nanoseconds so phase boundaries compare exactly.

use std::fmt::{self, Write as _};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analog::{analog_dense, analog_unit_step, memory_hold, AnalogBlockParams, AnalogError, ReadNoise, UnitInputs};
use crate::crossbar::NetworkCrossbars;
use crate::dataset::Row;
use crate::lstm::HIDDEN;

pub const TIME_STEPS: usize = 2;
const NS_PER_US: u64 = 1_000;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("{name} must be a positive duration, got {value} us")]
    NonPositiveDuration { name: &'static str, value: f64 },
    #[error("invalid power model: {0}")]
    InvalidPower(String),
    #[error("cycle count must be at least 1")]
    NoCycles,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error(transparent)]
    Analog(#[from] AnalogError),
}

pub type Result<T> = std::result::Result<T, ScheduleError>;

/// Phase durations in microseconds. A sub-cycle includes its own settle time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimelineConfig {
    pub subcycle_us: f64,
    pub step_delay_us: f64,
    pub dense_us: f64,
    pub end_delay_us: f64,
}

impl Default for TimelineConfig {
    fn default() -> Self {
        Self {
            subcycle_us: 10.0,
            step_delay_us: 2.0,
            dense_us: 3.0,
            end_delay_us: 1.0,
        }
    }
}

fn to_ns(name: &'static str, us: f64) -> Result<u64> {
    let ns = (us * NS_PER_US as f64).round();
    if !(us.is_finite() && ns >= 1.0) {
        return Err(ScheduleError::NonPositiveDuration { name, value: us });
    }
    Ok(ns as u64)
}

pub fn ns_to_us(ns: u64) -> f64 {
    ns as f64 / NS_PER_US as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModel {
    /// Drawn during every unit sub-cycle.
    pub peak_cell_mw: f64,
    pub dense_mw: f64,
    /// Drawn during settle delays.
    pub idle_mw: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            peak_cell_mw: 210.67,
            dense_mw: 0.0,
            idle_mw: 0.0,
        }
    }
}

impl PowerModel {
    pub fn uniform(mw: f64) -> Self {
        Self {
            peak_cell_mw: mw,
            dense_mw: mw,
            idle_mw: mw,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("peak_cell_mw", self.peak_cell_mw),
            ("dense_mw", self.dense_mw),
            ("idle_mw", self.idle_mw),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ScheduleError::InvalidPower(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    fn for_kind(&self, kind: PhaseKind) -> f64 {
        match kind {
            PhaseKind::UnitSubcycle { .. } => self.peak_cell_mw,
            PhaseKind::Dense => self.dense_mw,
            PhaseKind::Delay | PhaseKind::EndDelay => self.idle_mw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    UnitSubcycle { step: usize, unit: usize },
    Delay,
    Dense,
    EndDelay,
}

impl fmt::Display for PhaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseKind::UnitSubcycle { .. } => "unit_subcycle",
            PhaseKind::Delay => "delay",
            PhaseKind::Dense => "dense",
            PhaseKind::EndDelay => "end_delay",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub name: String,
    pub start_ns: u64,
    pub duration_ns: u64,
    pub kind: PhaseKind,
    pub power_mw: f64,
}

impl Phase {
    pub fn end_ns(&self) -> u64 {
        self.start_ns + self.duration_ns
    }

    pub fn start_us(&self) -> f64 {
        ns_to_us(self.start_ns)
    }

    pub fn duration_us(&self) -> f64 {
        ns_to_us(self.duration_ns)
    }

    /// mW x ns = pJ; scaled to mJ.
    pub fn energy_mj(&self) -> f64 {
        self.power_mw * self.duration_ns as f64 * 1e-9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleTimeline {
    pub phases: Vec<Phase>,
    pub cycle_ns: u64,
}

impl CycleTimeline {
    pub fn cycle_time_us(&self) -> f64 {
        ns_to_us(self.cycle_ns)
    }

    /// End boundary of every phase, in microseconds.
    pub fn boundaries_us(&self) -> Vec<f64> {
        self.phases.iter().map(|p| ns_to_us(p.end_ns())).collect()
    }

    /// Same phases, power re-assigned from `pm`.
    pub fn with_power(&self, pm: &PowerModel) -> Self {
        let mut out = self.clone();
        for p in &mut out.phases {
            p.power_mw = pm.for_kind(p.kind);
        }
        out
    }

    pub fn energy_per_cycle_mj(&self) -> f64 {
        self.phases.iter().map(Phase::energy_mj).sum()
    }

    /// Phase-table CSV "phase,start_us,duration_us,kind,power_mw".
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,start_us,duration_us,kind,power_mw\n");
        for p in &self.phases {
            let _ = writeln!(
                out,
                "{},{:.3},{:.3},{},{}",
                p.name,
                p.start_us(),
                p.duration_us(),
                p.kind,
                p.power_mw
            );
        }
        out
    }
}

/// Four sub-cycles for step 1, a settle delay, four sub-cycles for step 2,
/// another delay, the dense readout, and a closing delay.
pub fn build_cycle_timeline(config: &TimelineConfig, power: &PowerModel) -> Result<CycleTimeline> {
    power.validate()?;
    let sub = to_ns("subcycle_us", config.subcycle_us)?;
    let delay = to_ns("step_delay_us", config.step_delay_us)?;
    let dense = to_ns("dense_us", config.dense_us)?;
    let end = to_ns("end_delay_us", config.end_delay_us)?;

    let mut phases = Vec::with_capacity(TIME_STEPS * HIDDEN + 4);
    let mut t = 0u64;
    let mut push = |name: String, duration_ns: u64, kind: PhaseKind| {
        phases.push(Phase {
            name,
            start_ns: t,
            duration_ns,
            kind,
            power_mw: power.for_kind(kind),
        });
        t += duration_ns;
    };
    for step in 0..TIME_STEPS {
        for unit in 0..HIDDEN {
            push(format!("step{}_unit{}", step + 1, unit + 1), sub, PhaseKind::UnitSubcycle { step, unit });
        }
        push(format!("delay{}", step + 1), delay, PhaseKind::Delay);
    }
    push("dense".to_string(), dense, PhaseKind::Dense);
    push("end_delay".to_string(), end, PhaseKind::EndDelay);

    Ok(CycleTimeline { phases, cycle_ns: t })
}

pub fn estimate_energy(timeline: &CycleTimeline, pm: &PowerModel, n_cycles: u64) -> Result<f64> {
    pm.validate()?;
    if n_cycles == 0 {
        return Err(ScheduleError::NoCycles);
    }
    Ok(timeline.with_power(pm).energy_per_cycle_mj() * n_cycles as f64)
}

/// One line of a prediction trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub phase: String,
    pub start_ns: u64,
    pub duration_ns: u64,
    pub kind: String,
    pub power_mw: f64,
    /// Hidden value latched at the end of a unit sub-cycle.
    pub held_h: Option<f64>,
    /// Cell state latched at the end of a unit sub-cycle.
    pub held_c: Option<f64>,
    /// Dense output (dense phase and cycle summary only).
    pub output: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRun {
    pub prediction: f64,
    /// One entry per phase plus a closing cycle summary.
    pub trace: Vec<TraceEntry>,
}

impl PredictionRun {
    pub fn trace_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.8e}")).unwrap_or_default();
        let mut out = String::from("phase,start_us,duration_us,kind,power_mw,held_h,held_c,output\n");
        for e in &self.trace {
            let _ = writeln!(
                out,
                "{},{:.3},{:.3},{},{},{},{},{}",
                e.phase,
                ns_to_us(e.start_ns),
                ns_to_us(e.duration_ns),
                e.kind,
                e.power_mw,
                opt(e.held_h),
                opt(e.held_c),
                opt(e.output)
            );
        }
        out
    }
}

/// A sample-and-hold cell: the latched voltage and when it was latched.
#[derive(Debug, Clone, Copy, Default)]
struct Held {
    value: f64,
    at_ns: u64,
}

impl Held {
    fn read(&self, now_ns: u64, p: &AnalogBlockParams) -> f64 {
        memory_hold(self.value, ns_to_us(now_ns.saturating_sub(self.at_ns)), p)
    }
}

/// Walks the timeline for one input pair. Each unit's h and C are latched
/// at the end of its sub-cycle and read back (with droop) at the start of
/// every later phase that consumes them.
pub fn run_prediction<R: Rng + ?Sized>(
    timeline: &CycleTimeline,
    net: &NetworkCrossbars,
    params: &AnalogBlockParams,
    x_prev: f64,
    x_curr: f64,
    mut noise: Option<&mut ReadNoise<'_, R>>,
) -> Result<PredictionRun> {
    params.validate()?;
    let mut held_h = [[Held::default(); HIDDEN]; TIME_STEPS];
    let mut held_c = [[Held::default(); HIDDEN]; TIME_STEPS];
    let mut prediction = None;
    let mut trace = Vec::with_capacity(timeline.phases.len() + 1);

    for phase in &timeline.phases {
        let mut entry = TraceEntry {
            phase: phase.name.clone(),
            start_ns: phase.start_ns,
            duration_ns: phase.duration_ns,
            kind: phase.kind.to_string(),
            power_mw: phase.power_mw,
            held_h: None,
            held_c: None,
            output: None,
        };
        match phase.kind {
            PhaseKind::UnitSubcycle { step, unit } => {
                let now = phase.start_ns;
                let inputs = if step == 0 {
                    UnitInputs { h_prev: [0.0; HIDDEN], c_prev: 0.0 }
                } else {
                    UnitInputs {
                        h_prev: held_h[step - 1].map(|m| m.read(now, params)),
                        c_prev: held_c[step - 1][unit].read(now, params),
                    }
                };
                let x = if step == 0 { x_prev } else { x_curr };
                let out = analog_unit_step(net, x, &inputs, unit, params, noise.as_deref_mut())?;
                held_h[step][unit] = Held { value: out.h, at_ns: phase.end_ns() };
                held_c[step][unit] = Held { value: out.c, at_ns: phase.end_ns() };
                entry.held_h = Some(out.h);
                entry.held_c = Some(out.c);
            }
            PhaseKind::Dense => {
                let h = held_h[TIME_STEPS - 1].map(|m| m.read(phase.start_ns, params));
                let y = analog_dense(net, &h, params, noise.as_deref_mut())?;
                prediction = Some(y);
                entry.output = Some(y);
            }
            PhaseKind::Delay | PhaseKind::EndDelay => {}
        }
        trace.push(entry);
    }

    let prediction = prediction.expect("timeline always contains a dense phase");
    trace.push(TraceEntry {
        phase: "cycle".to_string(),
        start_ns: 0,
        duration_ns: timeline.cycle_ns,
        kind: "cycle".to_string(),
        power_mw: timeline.energy_per_cycle_mj() / (timeline.cycle_ns as f64 * 1e-9),
        held_h: None,
        held_c: None,
        output: Some(prediction),
    });
    Ok(PredictionRun { prediction, trace })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSetRun {
    pub predictions: Vec<f64>,
    pub total_time_ms: f64,
    pub energy_mj: f64,
}

pub fn run_test_set<R: Rng + ?Sized>(
    timeline: &CycleTimeline,
    rows: &[Row],
    net: &NetworkCrossbars,
    params: &AnalogBlockParams,
    mut noise: Option<&mut ReadNoise<'_, R>>,
) -> Result<TestSetRun> {
    if rows.is_empty() {
        return Err(ScheduleError::EmptyTestSet);
    }
    let predictions = rows
        .iter()
        .map(|r| run_prediction(timeline, net, params, r.x_prev, r.x_curr, noise.as_deref_mut()).map(|p| p.prediction))
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as u64;
    Ok(TestSetRun {
        predictions,
        total_time_ms: (n * timeline.cycle_ns) as f64 / 1e6,
        energy_mj: timeline.energy_per_cycle_mj() * n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossbar::MemristorParams;
    use crate::lstm::{forward, WeightSet, DENSE_BIAS_INPUT};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type NoRng = ChaCha8Rng;

    fn default_timeline() -> CycleTimeline {
        build_cycle_timeline(&TimelineConfig::default(), &PowerModel::default()).unwrap()
    }

    fn random_net(seed: u64) -> (WeightSet, NetworkCrossbars) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = WeightSet::random(&mut rng, 1.0);
        let net = NetworkCrossbars::program(&w, &MemristorParams::default()).unwrap();
        (w, net)
    }

    #[test]
    fn default_boundaries() {
        let t = default_timeline();
        assert_eq!(t.cycle_ns, 88_000);
        assert_eq!(t.phases.len(), 12);
        let ends: Vec<u64> = t.phases.iter().map(Phase::end_ns).collect();
        for b in [40_000, 42_000, 82_000, 84_000, 87_000, 88_000] {
            assert!(ends.contains(&b), "missing boundary {b}");
        }
        assert_eq!(
            t.phases.iter().filter(|p| matches!(p.kind, PhaseKind::UnitSubcycle { .. })).count(),
            8
        );
        for pair in t.phases.windows(2) {
            assert_eq!(pair[1].start_ns, pair[0].end_ns());
        }
        assert_eq!(t.phases[0].start_ns, 0);
    }

    #[test]
    fn shorter_subcycle() {
        let cfg = TimelineConfig { subcycle_us: 5.0, ..Default::default() };
        let t = build_cycle_timeline(&cfg, &PowerModel::default()).unwrap();
        assert_eq!(t.cycle_time_us(), 48.0);
    }

    #[test]
    fn rejects_bad_durations() {
        for cfg in [
            TimelineConfig { dense_us: 0.0, ..Default::default() },
            TimelineConfig { subcycle_us: -1.0, ..Default::default() },
            TimelineConfig { end_delay_us: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(
                build_cycle_timeline(&cfg, &PowerModel::default()),
                Err(ScheduleError::NonPositiveDuration { .. })
            ));
        }
        let bad = PowerModel { idle_mw: -1.0, ..Default::default() };
        assert!(build_cycle_timeline(&TimelineConfig::default(), &bad).is_err());
    }

    #[test]
    fn energy_examples() {
        let t = default_timeline();
        let e = estimate_energy(&t, &PowerModel::default(), 1).unwrap();
        assert!((e * 1e3 - 16.854).abs() < 1e-3, "{e}");
        let e = estimate_energy(&t, &PowerModel::uniform(210.67), 1).unwrap();
        assert!((e * 1e3 - 18.539).abs() < 1e-3, "{e}");
        assert_eq!(estimate_energy(&t, &PowerModel::uniform(0.0), 3).unwrap(), 0.0);
        let one = estimate_energy(&t, &PowerModel::default(), 1).unwrap();
        let two = estimate_energy(&t, &PowerModel::default(), 2).unwrap();
        assert_eq!(two, 2.0 * one);
        assert_eq!(estimate_energy(&t, &PowerModel::default(), 0), Err(ScheduleError::NoCycles));
    }

    #[test]
    fn ideal_prediction_matches_reference() {
        let (w, net) = random_net(21);
        let t = default_timeline();
        let run = run_prediction::<NoRng>(&t, &net, &AnalogBlockParams::default(), 0.3, 0.45, None).unwrap();
        assert!((run.prediction - forward(&w, 0.3, 0.45)).abs() < 1e-9);
        assert_eq!(run.trace.len(), 13);
        assert!(run.trace_csv().starts_with("phase,start_us,duration_us,kind,power_mw,held_h,held_c,output\n"));
    }

    #[test]
    fn droop_before_dense_readout() {
        let (w, net) = random_net(4);
        let t = default_timeline();
        let p = AnalogBlockParams { droop_rate: 0.001, ..Default::default() };
        let run = run_prediction::<NoRng>(&t, &net, &p, 0.2, 0.6, None).unwrap();
        let mut expected = w.dense_bias_weight * (DENSE_BIAS_INPUT + p.dense_bias_offset_v);
        for (unit, entry) in run.trace[5..9].iter().enumerate() {
            assert_eq!(entry.phase, format!("step2_unit{}", unit + 1));
            let latched_at = (entry.start_ns + entry.duration_ns) as f64 / 1e3;
            let decay = 0.999f64.powf(84.0 - latched_at);
            expected += w.dense_w[unit] * entry.held_h.unwrap() * decay;
        }
        assert!((run.prediction - expected).abs() < 1e-12);
    }

    #[test]
    fn test_set_totals() {
        let (_, net) = random_net(8);
        let t = default_timeline();
        let rows: Vec<Row> = (0..45).map(|k| Row { x_prev: k as f64 / 50.0, x_curr: 0.5, target: 0.0 }).collect();
        let run = run_test_set::<NoRng>(&t, &rows, &net, &AnalogBlockParams::default(), None).unwrap();
        assert_eq!(run.predictions.len(), 45);
        assert_eq!(run.total_time_ms, 3.96);
        let one = run_test_set::<NoRng>(&t, &rows[..1], &net, &AnalogBlockParams::default(), None).unwrap();
        assert_eq!(one.total_time_ms * 1e3, 88.0);
        assert!(matches!(
            run_test_set::<NoRng>(&t, &[], &net, &AnalogBlockParams::default(), None),
            Err(ScheduleError::EmptyTestSet)
        ));
    }

    #[test]
    fn ideal_schedule_independence() {
        let (_, net) = random_net(13);
        let p = AnalogBlockParams::default();
        let base = run_prediction::<NoRng>(&default_timeline(), &net, &p, 0.1, 0.9, None).unwrap().prediction;
        for sub in [1.0, 5.0, 37.5] {
            let cfg = TimelineConfig { subcycle_us: sub, ..Default::default() };
            let t = build_cycle_timeline(&cfg, &PowerModel::default()).unwrap();
            assert_eq!(run_prediction::<NoRng>(&t, &net, &p, 0.1, 0.9, None).unwrap().prediction, base);
        }
    }

    #[test]
    fn timeline_csv() {
        let csv = default_timeline().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "phase,start_us,duration_us,kind,power_mw");
        assert_eq!(lines[1], "step1_unit1,0.000,10.000,unit_subcycle,210.67");
        assert_eq!(lines[5], "delay1,40.000,2.000,delay,0");
        assert_eq!(lines.len(), 13);
    }
}
