//! Browser front end for the crossbar LSTM simulator. Every export returns a
//! JSON string; `www/index.html` draws it on canvases.

use memlstm::analog::{multiplier_block, sigmoid_block, sweep, tanh_block};
use memlstm::crossbar::{Levels, MemristorParams, VariationModel};
use memlstm::dataset::{airline_passengers, prepare, DEFAULT_TEST_COUNT};
use memlstm::experiment::{Experiment, HardwareConfig};
use memlstm::lstm::{train, Hyperparams};
use memlstm::scheduler::{build_cycle_timeline, PowerModel, TimelineConfig};
use memlstm::AnalogBlockParams;
use serde_json::json;
use wasm_bindgen::prelude::*;

const CURVE_STEP: f64 = 0.01;
const MULTIPLIER_VB: [f64; 3] = [-1.0, 0.5, 1.0];

/// Sigmoid, tanh and multiplier transfer curves over [-1, 1] V.
pub fn curves_json(act_scale: f64, mult_scale: f64, gain_error_rel: f64, offset_v: f64) -> Result<String, String> {
    let p = AnalogBlockParams {
        act_scale,
        mult_scale,
        gain_error_rel,
        offset_v,
        ..AnalogBlockParams::default()
    };
    p.validate().map_err(|e| e.to_string())?;
    let split = |pts: Vec<(f64, f64)>| pts.into_iter().map(|(_, y)| y).collect::<Vec<_>>();
    let v: Vec<f64> = sweep(-1.0, 1.0, CURVE_STEP, |x| x).into_iter().map(|(x, _)| x).collect();
    let multiplier: Vec<_> = MULTIPLIER_VB
        .iter()
        .map(|&vb| json!({ "vb": vb, "out": split(sweep(-1.0, 1.0, CURVE_STEP, |va| multiplier_block(va, vb, &p))) }))
        .collect();
    Ok(json!({
        "v": v,
        "sigmoid": split(sweep(-1.0, 1.0, CURVE_STEP, |x| sigmoid_block(x, &p))),
        "tanh": split(sweep(-1.0, 1.0, CURVE_STEP, |x| tanh_block(x, &p))),
        "multiplier": multiplier,
    })
    .to_string())
}

/// Phase table and energy for one prediction cycle, plus the 45-point total.
pub fn timeline_json(subcycle_us: f64, step_delay_us: f64, dense_us: f64, end_delay_us: f64, peak_mw: f64) -> Result<String, String> {
    let config = TimelineConfig {
        subcycle_us,
        step_delay_us,
        dense_us,
        end_delay_us,
    };
    let power = PowerModel::uniform(peak_mw);
    power.validate().map_err(|e| e.to_string())?;
    let t = build_cycle_timeline(&config, &power).map_err(|e| e.to_string())?;
    let phases: Vec<_> = t
        .phases
        .iter()
        .map(|p| json!({ "name": p.name, "kind": p.kind.to_string(), "start_us": p.start_us(), "duration_us": p.duration_us() }))
        .collect();
    let n = DEFAULT_TEST_COUNT as u64;
    Ok(json!({
        "phases": phases,
        "cycle_us": t.cycle_time_us(),
        "energy_uj": t.energy_per_cycle_mj() * 1e3,
        "total_ms": (n * t.cycle_ns) as f64 / 1e6,
        "total_energy_mj": t.energy_per_cycle_mj() * n as f64,
    })
    .to_string())
}

/// The airline experiment with weights trained once at construction.
#[wasm_bindgen]
pub struct Demo {
    exp: Experiment,
}

impl Demo {
    pub fn build() -> Result<Self, String> {
        let prepared = prepare(&airline_passengers(), DEFAULT_TEST_COUNT).map_err(|e| e.to_string())?;
        let weights = train(&prepared.train, &Hyperparams::default()).map_err(|e| e.to_string())?;
        let exp = Experiment::new(prepared, weights, &TimelineConfig::default(), &PowerModel::default()).map_err(|e| e.to_string())?;
        Ok(Self { exp })
    }

    /// One analog run of the test rows. `levels == 0` means continuous.
    pub fn forecast_json(&self, sigma_rel: f64, levels: u32, read_noise_rel: f64, gain_error_rel: f64, seed: u64) -> Result<String, String> {
        let hw = HardwareConfig {
            memristor: MemristorParams {
                levels: if levels == 0 { Levels::Continuous } else { Levels::Discrete(levels) },
                ..MemristorParams::default()
            },
            variation: VariationModel {
                sigma_rel,
                read_noise_rel,
                seed,
            },
            analog: AnalogBlockParams {
                gain_error_rel,
                ..AnalogBlockParams::default()
            },
        };
        hw.memristor.validate().map_err(|e| e.to_string())?;
        hw.variation.validate().map_err(|e| e.to_string())?;
        hw.analog.validate().map_err(|e| e.to_string())?;
        let trial = self.exp.analog_trial(&hw, 0).map_err(|e| e.to_string())?;
        let norm = &self.exp.prepared.normalizer;
        let denorm = |v: &[f64]| v.iter().map(|&x| norm.denormalize(x)).collect::<Vec<_>>();
        Ok(json!({
            "targets": denorm(&self.exp.targets()),
            "software": denorm(&self.exp.software),
            "analog": denorm(&trial.run.predictions),
            "software_rmse": self.exp.software_metrics.rmse,
            "analog_rmse": trial.metrics.rmse,
        })
        .to_string())
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<Demo, JsError> {
        Demo::build().map_err(|e| JsError::new(&e))
    }

    pub fn forecast(&self, sigma_rel: f64, levels: u32, read_noise_rel: f64, gain_error_rel: f64, seed: u32) -> Result<String, JsError> {
        self.forecast_json(sigma_rel, levels, read_noise_rel, gain_error_rel, u64::from(seed))
            .map_err(|e| JsError::new(&e))
    }
}

#[wasm_bindgen]
pub fn transfer_curves(act_scale: f64, mult_scale: f64, gain_error_rel: f64, offset_v: f64) -> Result<String, JsError> {
    curves_json(act_scale, mult_scale, gain_error_rel, offset_v).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn cycle_timeline(subcycle_us: f64, step_delay_us: f64, dense_us: f64, end_delay_us: f64, peak_mw: f64) -> Result<String, JsError> {
    timeline_json(subcycle_us, step_delay_us, dense_us, end_delay_us, peak_mw).map_err(|e| JsError::new(&e))
}
