//! Behavioral models of the voltage-mode circuit blocks: sigmoid and tanh
//! activation stages, the four-quadrant multiplier, inverting gain stages
//! and the sample-and-hold memory.
//!
//! Activation blocks take inputs scaled down by `act_scale` and emit
//! inverted outputs scaled down by the same factor; the multiplier emits
//! `-(a*b)/mult_scale`. Inverting gain stages downstream restore unit scale.
//! With zero gain error, offset and droop every stage cancels exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crossbar::{lstm_column, CrossbarError, NetworkCrossbars, LSTM_ROWS};
use crate::lstm::{sigmoid, CellState, Gate, HIDDEN};

#[derive(Debug, Error, PartialEq)]
pub enum AnalogError {
    #[error("invalid analog parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Crossbar(#[from] CrossbarError),
    #[error("unit index {0} out of range")]
    UnitOutOfRange(usize),
}

pub type Result<T> = std::result::Result<T, AnalogError>;

/// Multiplier input operating range, volts.
pub const MULT_INPUT_RANGE: f64 = 1.0;

/// The cell state is stored at half amplitude. After two steps from the
/// zero state |C| < 2, so the stored voltage stays inside the multiplier's
/// operating range.
pub const CELL_STATE_SCALE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalogBlockParams {
    pub act_scale: f64,
    pub mult_scale: f64,
    /// Relative gain error of every activation and multiplier block.
    pub gain_error_rel: f64,
    /// Output offset of every activation and multiplier block, volts.
    pub offset_v: f64,
    /// Extra bias-row drive of the LSTM crossbar when losses are present.
    pub lstm_bias_offset_v: f64,
    /// Extra bias-row drive of the dense crossbar when losses are present.
    pub dense_bias_offset_v: f64,
    /// Fractional decay of a held voltage per microsecond.
    pub droop_rate: f64,
}

impl Default for AnalogBlockParams {
    fn default() -> Self {
        Self {
            act_scale: 10.0,
            mult_scale: 4.0,
            gain_error_rel: 0.0,
            offset_v: 0.0,
            lstm_bias_offset_v: 0.3,
            dense_bias_offset_v: 0.25,
            droop_rate: 0.0,
        }
    }
}

impl AnalogBlockParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AnalogError::InvalidParams(msg));
        if !(self.act_scale.is_finite() && self.act_scale > 0.0) {
            return bad(format!("act_scale must be positive, got {}", self.act_scale));
        }
        if !(self.mult_scale.is_finite() && self.mult_scale > 0.0) {
            return bad(format!("mult_scale must be positive, got {}", self.mult_scale));
        }
        if !(self.gain_error_rel.is_finite() && self.gain_error_rel > -1.0) {
            return bad(format!("gain_error_rel must exceed -1, got {}", self.gain_error_rel));
        }
        if !(self.droop_rate.is_finite() && (0.0..1.0).contains(&self.droop_rate)) {
            return bad(format!("droop_rate must lie in [0, 1), got {}", self.droop_rate));
        }
        for (name, v) in [
            ("offset_v", self.offset_v),
            ("lstm_bias_offset_v", self.lstm_bias_offset_v),
            ("dense_bias_offset_v", self.dense_bias_offset_v),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    /// True when any block loses or shifts signal. Only then are the bias
    /// rows driven above their software values.
    pub fn has_losses(&self) -> bool {
        self.gain_error_rel != 0.0 || self.offset_v != 0.0 || self.droop_rate != 0.0
    }

    pub fn is_ideal(&self) -> bool {
        !self.has_losses()
    }

    fn gain(&self) -> f64 {
        1.0 + self.gain_error_rel
    }
}

pub fn sigmoid_block(v_in: f64, p: &AnalogBlockParams) -> f64 {
    -(1.0 / p.act_scale) * sigmoid(p.act_scale * v_in) * p.gain() + p.offset_v
}

pub fn tanh_block(v_in: f64, p: &AnalogBlockParams) -> f64 {
    -(1.0 / p.act_scale) * (p.act_scale * v_in).tanh() * p.gain() + p.offset_v
}

/// Inputs beyond ±1 V saturate: the product term is clamped to
/// ±1/mult_scale and a warning is logged.
pub fn multiplier_block(v_a: f64, v_b: f64, p: &AnalogBlockParams) -> f64 {
    let limit = MULT_INPUT_RANGE / p.mult_scale;
    let mut product = -(v_a * v_b) / p.mult_scale;
    if v_a.abs() > MULT_INPUT_RANGE || v_b.abs() > MULT_INPUT_RANGE {
        log::warn!("multiplier inputs ({v_a}, {v_b}) exceed the ±{MULT_INPUT_RANGE} V range; saturating");
        product = product.clamp(-limit, limit);
    }
    product * p.gain() + p.offset_v
}

pub fn restore_gain(v_in: f64, factor: f64) -> f64 {
    factor * v_in
}

/// Capacitor hold with geometric droop over `hold_us` microseconds.
pub fn memory_hold(v: f64, hold_us: f64, p: &AnalogBlockParams) -> f64 {
    if p.droop_rate == 0.0 || hold_us <= 0.0 {
        return v;
    }
    v * (1.0 - p.droop_rate).powf(hold_us)
}

/// Bias-row voltage of the LSTM crossbar.
pub fn lstm_bias_voltage(software_bias: f64, p: &AnalogBlockParams) -> f64 {
    if p.has_losses() {
        software_bias + p.lstm_bias_offset_v
    } else {
        software_bias
    }
}

/// Bias-row voltage of the dense crossbar.
pub fn dense_bias_voltage(software_bias: f64, p: &AnalogBlockParams) -> f64 {
    if p.has_losses() {
        software_bias + p.dense_bias_offset_v
    } else {
        software_bias
    }
}

/// Per-read crossbar noise. `rel = 0` reads noiselessly.
pub struct ReadNoise<'a, R: Rng + ?Sized> {
    pub rel: f64,
    pub rng: &'a mut R,
}

/// State read from sample-and-hold memories by one unit's sub-cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitInputs {
    pub h_prev: [f64; HIDDEN],
    /// Unit's own previous cell state, at full scale.
    pub c_prev: f64,
}

/// Output of one unit sub-cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitOutput {
    pub h: f64,
    pub c: f64,
}

/// Drives the LSTM crossbar for one step. Every unit sub-cycle performs
/// this read; the noisy variant draws fresh noise per call.
pub fn lstm_crossbar_read<R: Rng + ?Sized>(
    net: &NetworkCrossbars,
    x: f64,
    h_prev: &[f64; HIDDEN],
    p: &AnalogBlockParams,
    noise: Option<&mut ReadNoise<'_, R>>,
) -> Result<Vec<f64>> {
    let mut v = [0.0; LSTM_ROWS];
    v[0] = x;
    v[1..=HIDDEN].copy_from_slice(h_prev);
    v[LSTM_ROWS - 1] = lstm_bias_voltage(net.lstm_bias_input, p);
    Ok(match noise {
        Some(n) if n.rel > 0.0 => net.lstm.vmm_noisy(&v, n.rel, n.rng)?,
        _ => net.lstm.vmm(&v)?,
    })
}

/// One hidden unit's datapath: crossbar sums through activation, multiply
/// and gain-restore stages.
pub fn analog_unit_step<R: Rng + ?Sized>(
    net: &NetworkCrossbars,
    x: f64,
    inputs: &UnitInputs,
    unit: usize,
    p: &AnalogBlockParams,
    noise: Option<&mut ReadNoise<'_, R>>,
) -> Result<UnitOutput> {
    if unit >= HIDDEN {
        return Err(AnalogError::UnitOutOfRange(unit));
    }
    let sums = lstm_crossbar_read(net, x, &inputs.h_prev, p, noise)?;
    let z = |g: Gate| sums[lstm_column(g, unit)];
    let act = p.act_scale;
    let mult = p.mult_scale;

    let f = restore_gain(sigmoid_block(z(Gate::Forget) / act, p), -act);
    let i = restore_gain(sigmoid_block(z(Gate::Input) / act, p), -act);
    let c_tilde = restore_gain(tanh_block(z(Gate::Candidate) / act, p), -act);
    let o = restore_gain(sigmoid_block(z(Gate::Output) / act, p), -act);

    let c_held = inputs.c_prev / CELL_STATE_SCALE;
    let ic = restore_gain(multiplier_block(i, c_tilde, p), -mult);
    let fc = restore_gain(multiplier_block(f, c_held, p), -mult * CELL_STATE_SCALE);
    let c = ic + fc;

    let tanh_c = restore_gain(tanh_block(c / act, p), -act);
    let h = restore_gain(multiplier_block(o, tanh_c, p), -mult);
    Ok(UnitOutput { h, c })
}

/// All four units for one time step, reading `prev` without droop.
pub fn analog_cell_step<R: Rng + ?Sized>(
    net: &NetworkCrossbars,
    prev: &CellState,
    x: f64,
    p: &AnalogBlockParams,
    mut noise: Option<&mut ReadNoise<'_, R>>,
) -> Result<CellState> {
    p.validate()?;
    let mut next = CellState::default();
    for unit in 0..HIDDEN {
        let inputs = UnitInputs {
            h_prev: prev.h,
            c_prev: prev.c[unit],
        };
        let out = analog_unit_step(net, x, &inputs, unit, p, noise.as_deref_mut())?;
        next.h[unit] = out.h;
        next.c[unit] = out.c;
    }
    Ok(next)
}

/// Dense readout through the 5x1 crossbar.
pub fn analog_dense<R: Rng + ?Sized>(
    net: &NetworkCrossbars,
    h: &[f64; HIDDEN],
    p: &AnalogBlockParams,
    noise: Option<&mut ReadNoise<'_, R>>,
) -> Result<f64> {
    let mut v = [0.0; HIDDEN + 1];
    v[..HIDDEN].copy_from_slice(h);
    v[HIDDEN] = dense_bias_voltage(net.dense_bias_input, p);
    let out = match noise {
        Some(n) if n.rel > 0.0 => net.dense.vmm_noisy(&v, n.rel, n.rng)?,
        _ => net.dense.vmm(&v)?,
    };
    Ok(out[0])
}

/// Transfer-curve sweep `v_in -> f(v_in)` from `start` to `stop` inclusive.
pub fn sweep(start: f64, stop: f64, step: f64, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    assert!(step > 0.0 && stop >= start, "invalid sweep range");
    let n = ((stop - start) / step).round() as usize;
    (0..=n)
        .map(|k| {
            let v = start + k as f64 * step;
            (v, f(v))
        })
        .collect()
}

/// "v_in,v_out" CSV of a sweep.
pub fn curve_to_csv(points: &[(f64, f64)]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("v_in,v_out\n");
    for (a, b) in points {
        let _ = writeln!(out, "{a:.6},{b:.9}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossbar::MemristorParams;
    use crate::lstm::{cell_step, WeightSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type NoRng = ChaCha8Rng;

    fn ideal() -> AnalogBlockParams {
        AnalogBlockParams::default()
    }

    #[test]
    fn sigmoid_examples() {
        let p = ideal();
        assert!((sigmoid_block(0.0, &p) + 0.05).abs() < 1e-15);
        assert!((sigmoid_block(1e3, &p) + 0.1).abs() < 1e-15);
        assert!((sigmoid_block(0.05, &p) + 0.062246).abs() < 1e-6);
    }

    #[test]
    fn tanh_examples() {
        let p = ideal();
        assert_eq!(tanh_block(0.0, &p), 0.0);
        assert!((tanh_block(f64::INFINITY, &p) + 0.1).abs() < 1e-15);
        assert!((tanh_block(f64::NEG_INFINITY, &p) - 0.1).abs() < 1e-15);
        assert!((tanh_block(0.1, &p) + 0.0761594).abs() < 1e-7);
    }

    #[test]
    fn multiplier_examples() {
        let p = ideal();
        assert_eq!(multiplier_block(0.0, 0.7, &p), 0.0);
        assert_eq!(multiplier_block(1.0, 1.0, &p), -0.25);
        assert!((multiplier_block(0.5, -0.4, &p) - 0.05).abs() < 1e-15);
        assert_eq!(multiplier_block(3.0, 1.0, &p), -0.25);
        assert_eq!(multiplier_block(-3.0, 1.0, &p), 0.25);
    }

    #[test]
    fn gain_stage_examples() {
        assert_eq!(restore_gain(-0.05, -10.0), 0.5);
        assert_eq!(restore_gain(0.123, 1.0), 0.123);
        let p = ideal();
        assert_eq!(restore_gain(sigmoid_block(0.0, &p), -10.0), 0.5);
    }

    #[test]
    fn hold_examples() {
        let p = ideal();
        assert_eq!(memory_hold(0.7, 50.0, &p), 0.7);
        let d = AnalogBlockParams { droop_rate: 0.001, ..p };
        assert!((memory_hold(1.0, 10.0, &d) - 0.990045).abs() < 1e-6);
        assert_eq!(memory_hold(0.0, 10.0, &d), 0.0);
    }

    #[test]
    fn param_validation() {
        assert!(ideal().validate().is_ok());
        assert!(AnalogBlockParams { act_scale: 0.0, ..ideal() }.validate().is_err());
        assert!(AnalogBlockParams { mult_scale: -4.0, ..ideal() }.validate().is_err());
        assert!(AnalogBlockParams { gain_error_rel: -1.0, ..ideal() }.validate().is_err());
        assert!(ideal().is_ideal());
        assert!(!AnalogBlockParams { offset_v: 0.01, ..ideal() }.is_ideal());
    }

    #[test]
    fn bias_rows_follow_loss_state() {
        let p = ideal();
        assert_eq!(lstm_bias_voltage(1.5, &p), 1.5);
        let lossy = AnalogBlockParams { gain_error_rel: -0.01, ..p };
        assert!((lstm_bias_voltage(1.5, &lossy) - 1.8).abs() < 1e-15);
        assert!((dense_bias_voltage(0.0239, &lossy) - 0.2739).abs() < 1e-15);
    }

    #[test]
    fn zero_network_stays_at_zero_with_offsets_enabled() {
        let w = WeightSet::zeros();
        let net = NetworkCrossbars::program(&w, &MemristorParams::default()).unwrap();
        let p = AnalogBlockParams { gain_error_rel: -0.05, ..ideal() };
        assert!(p.has_losses());
        let s = analog_cell_step::<NoRng>(&net, &CellState::default(), 0.0, &p, None).unwrap();
        for j in 0..HIDDEN {
            assert!(s.h[j].abs() < 1e-9 && s.c[j].abs() < 1e-9);
        }
    }

    #[test]
    fn ideal_cell_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let w = WeightSet::random(&mut rng, 1.0);
            let net = NetworkCrossbars::program(&w, &MemristorParams::default()).unwrap();
            let prev = CellState {
                h: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
                c: std::array::from_fn(|_| rng.random_range(-1.9..1.9)),
            };
            let x = rng.random_range(0.0..1.0);
            let (_, reference) = cell_step(&w, x, &prev);
            let analog = analog_cell_step::<NoRng>(&net, &prev, x, &ideal(), None).unwrap();
            for j in 0..HIDDEN {
                assert!((analog.h[j] - reference.h[j]).abs() < 1e-9);
                assert!((analog.c[j] - reference.c[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bad_unit_index() {
        let net = NetworkCrossbars::program(&WeightSet::zeros(), &MemristorParams::default()).unwrap();
        let inputs = UnitInputs { h_prev: [0.0; 4], c_prev: 0.0 };
        assert_eq!(
            analog_unit_step::<NoRng>(&net, 0.0, &inputs, 4, &ideal(), None).unwrap_err(),
            AnalogError::UnitOutOfRange(4)
        );
    }

    #[test]
    fn sweep_grid() {
        let pts = sweep(-1.0, 1.0, 0.001, |v| v);
        assert_eq!(pts.len(), 2001);
        assert_eq!(pts[1000].0, 0.0);
        assert_eq!(pts[2000].0, 1.0);
        assert!(curve_to_csv(&pts[..1]).starts_with("v_in,v_out\n-1.000000,"));
    }

    mod props {
        use super::super::*;
        use crate::lstm::sigmoid;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn activation_stages_cancel(v in -2.0f64..2.0) {
                let p = AnalogBlockParams::default();
                let s = restore_gain(sigmoid_block(v / p.act_scale, &p), -p.act_scale);
                let t = restore_gain(tanh_block(v / p.act_scale, &p), -p.act_scale);
                prop_assert!((s - sigmoid(v)).abs() < 1e-12);
                prop_assert!((t - v.tanh()).abs() < 1e-12);
            }

            #[test]
            fn multiplier_sign_law(a in -1.0f64..1.0, b in -1.0f64..1.0) {
                let out = multiplier_block(a, b, &AnalogBlockParams::default());
                prop_assert_eq!(out.signum() * (a * b).signum() <= 0.0, true);
                if a * b != 0.0 {
                    prop_assert_eq!(out.signum(), -(a * b).signum());
                }
                prop_assert!(out.abs() <= 0.25);
            }

            #[test]
            fn activation_blocks_decrease(a in -0.5f64..0.5, d in 1e-4f64..0.5) {
                let p = AnalogBlockParams::default();
                prop_assert!(sigmoid_block(a + d, &p) < sigmoid_block(a, &p));
                prop_assert!(tanh_block(a + d, &p) < tanh_block(a, &p));
            }

            #[test]
            fn block_outputs_bounded(v in -10.0f64..10.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
                let p = AnalogBlockParams::default();
                prop_assert!(sigmoid_block(v, &p).abs() <= 0.1);
                prop_assert!(tanh_block(v, &p).abs() <= 0.1);
                prop_assert!(multiplier_block(a, b, &p).abs() <= 0.25);
            }
        }
    }
}
