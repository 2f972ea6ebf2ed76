//! Floating-point reference network: one LSTM layer with four hidden units
//! unrolled over two time steps, followed by a linear dense readout.
//!
//! Gate biases are weights on a constant bias input (1.5 for the LSTM
//! layer, 0.0239 for the dense layer) so the parameter layout mirrors the
//! crossbar rows one-to-one.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Row, SupervisedSet};

pub const HIDDEN: usize = 4;
pub const LSTM_BIAS_INPUT: f64 = 1.5;
pub const DENSE_BIAS_INPUT: f64 = 0.0239;
/// Trainable entries: 4 gates x (4 input + 16 recurrent + 4 bias) + 4 dense + 1 dense bias.
pub const N_PARAMS: usize = 4 * (HIDDEN + HIDDEN * HIDDEN + HIDDEN) + HIDDEN + 1;
pub const WEIGHT_FILE_VERSION: &str = "v1";

/// Finite-difference step used by [`gradient_check`].
pub const GRAD_CHECK_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

pub type Vec4 = [f64; HIDDEN];
pub type Mat4 = [[f64; HIDDEN]; HIDDEN];

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("weight file is missing field \"{0}\"")]
    MissingField(String),
    #[error("weight {entry} = {value} lies outside [-1, 1]")]
    OutOfRange { entry: String, value: f64 },
    #[error("weight file schema violation: {0}")]
    Schema(String),
    #[error("cannot access weight file '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(String),
    #[error("length mismatch: {predictions} predictions vs {targets} targets")]
    LengthMismatch { predictions: usize, targets: usize },
    #[error("cannot compute metrics on empty input")]
    EmptyInput,
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, LstmError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    Forget,
    Input,
    Candidate,
    Output,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Gate::Forget => "f",
            Gate::Input => "i",
            Gate::Candidate => "c",
            Gate::Output => "o",
        }
    }
}

/// Input, recurrent and bias weights of one gate. `u[k][j]` connects
/// `h_prev[k]` to unit `j`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GateWeights {
    pub w: Vec4,
    pub u: Mat4,
    pub b: Vec4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub gates: [GateWeights; 4],
    pub lstm_bias_input: f64,
    pub dense_w: Vec4,
    pub dense_bias_weight: f64,
    pub dense_bias_input: f64,
}

impl Default for WeightSet {
    fn default() -> Self {
        Self::zeros()
    }
}

impl WeightSet {
    pub fn zeros() -> Self {
        Self {
            gates: [GateWeights::default(); 4],
            lstm_bias_input: LSTM_BIAS_INPUT,
            dense_w: [0.0; HIDDEN],
            dense_bias_weight: 0.0,
            dense_bias_input: DENSE_BIAS_INPUT,
        }
    }

    /// Every trainable entry drawn uniformly from `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Self {
        let mut w = Self::zeros();
        let params: Vec<f64> = (0..N_PARAMS).map(|_| rng.random_range(-scale..=scale)).collect();
        w.set_params(&params);
        w
    }

    pub fn gate(&self, gate: Gate) -> &GateWeights {
        &self.gates[gate.index()]
    }

    pub fn gate_mut(&mut self, gate: Gate) -> &mut GateWeights {
        &mut self.gates[gate.index()]
    }

    /// Flattened trainable parameters, in [`WeightSet::param_names`] order.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(N_PARAMS);
        for g in &self.gates {
            out.extend_from_slice(&g.w);
            for row in &g.u {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(&g.b);
        }
        out.extend_from_slice(&self.dense_w);
        out.push(self.dense_bias_weight);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), N_PARAMS, "parameter vector has wrong length");
        let mut it = params.iter().copied();
        let mut next = || it.next().unwrap();
        for g in &mut self.gates {
            g.w.iter_mut().for_each(|v| *v = next());
            g.u.iter_mut().flatten().for_each(|v| *v = next());
            g.b.iter_mut().for_each(|v| *v = next());
        }
        self.dense_w.iter_mut().for_each(|v| *v = next());
        self.dense_bias_weight = next();
    }

    /// Entry names as they appear in the weight file, e.g. `U_o[2][3]`.
    pub fn param_names() -> Vec<String> {
        let mut names = Vec::with_capacity(N_PARAMS);
        for gate in Gate::ALL {
            let s = gate.suffix();
            names.extend((0..HIDDEN).map(|j| format!("W_{s}[{j}]")));
            for k in 0..HIDDEN {
                names.extend((0..HIDDEN).map(|j| format!("U_{s}[{k}][{j}]")));
            }
            names.extend((0..HIDDEN).map(|j| format!("b_{s}[{j}]")));
        }
        names.extend((0..HIDDEN).map(|j| format!("dense_w[{j}]")));
        names.push("dense_bias_weight".to_string());
        names
    }

    /// Checks the [-1, 1] constraint on every trainable entry and finiteness
    /// of the bias inputs.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in Self::param_names().into_iter().zip(self.params()) {
            if !value.is_finite() {
                return Err(LstmError::NonFinite(name));
            }
            if value.abs() > 1.0 {
                return Err(LstmError::OutOfRange { entry: name, value });
            }
        }
        for (name, v) in [
            ("lstm_bias_input", self.lstm_bias_input),
            ("dense_bias_input", self.dense_bias_input),
        ] {
            if !v.is_finite() {
                return Err(LstmError::NonFinite(name.to_string()));
            }
        }
        Ok(())
    }

    /// Clamps every trainable entry into [-1, 1].
    pub fn clip(&mut self) {
        let clipped: Vec<f64> = self.params().into_iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        self.set_params(&clipped);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellState {
    pub h: Vec4,
    pub c: Vec4,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GateActivations {
    pub f: Vec4,
    pub i: Vec4,
    pub c_tilde: Vec4,
    pub o: Vec4,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Pre-activation of `gate` for every unit.
pub fn gate_preactivation(w: &WeightSet, gate: Gate, x: f64, h_prev: &Vec4) -> Vec4 {
    let g = w.gate(gate);
    let mut z = [0.0; HIDDEN];
    for (j, zj) in z.iter_mut().enumerate() {
        let recurrent: f64 = (0..HIDDEN).map(|k| g.u[k][j] * h_prev[k]).sum();
        *zj = g.w[j] * x + recurrent + g.b[j] * w.lstm_bias_input;
    }
    z
}

pub fn cell_step(w: &WeightSet, x: f64, prev: &CellState) -> (GateActivations, CellState) {
    let z = Gate::ALL.map(|g| gate_preactivation(w, g, x, &prev.h));
    let acts = GateActivations {
        f: z[Gate::Forget.index()].map(sigmoid),
        i: z[Gate::Input.index()].map(sigmoid),
        c_tilde: z[Gate::Candidate.index()].map(f64::tanh),
        o: z[Gate::Output.index()].map(sigmoid),
    };
    let mut next = CellState::default();
    for j in 0..HIDDEN {
        next.c[j] = acts.i[j] * acts.c_tilde[j] + acts.f[j] * prev.c[j];
        next.h[j] = acts.o[j] * next.c[j].tanh();
    }
    (acts, next)
}

/// Linear dense readout of the final hidden vector.
pub fn dense(w: &WeightSet, h: &Vec4) -> f64 {
    let weighted: f64 = w.dense_w.iter().zip(h).map(|(a, b)| a * b).sum();
    weighted + w.dense_bias_weight * w.dense_bias_input
}

/// Two-step prediction from the zero state.
pub fn forward(w: &WeightSet, x_prev: f64, x_curr: f64) -> f64 {
    let (_, s1) = cell_step(w, x_prev, &CellState::default());
    let (_, s2) = cell_step(w, x_curr, &s1);
    dense(w, &s2.h)
}

pub fn predict(w: &WeightSet, set: &SupervisedSet) -> Vec<f64> {
    set.rows.iter().map(|r| forward(w, r.x_prev, r.x_curr)).collect()
}

/// Squared error of one row, the per-row training loss.
pub fn row_loss(w: &WeightSet, row: &Row) -> f64 {
    let e = forward(w, row.x_prev, row.x_curr) - row.target;
    e * e
}

/// Analytic gradient of [`row_loss`] by backpropagation through both time
/// steps. Returned in the same shape as the weights; the bias-input fields
/// of the result are left at their defaults.
pub fn row_gradient(w: &WeightSet, row: &Row) -> (f64, WeightSet) {
    let s0 = CellState::default();
    let (a1, s1) = cell_step(w, row.x_prev, &s0);
    let (a2, s2) = cell_step(w, row.x_curr, &s1);
    let y = dense(w, &s2.h);
    let err = y - row.target;
    let dy = 2.0 * err;

    let mut grad = WeightSet::zeros();
    let mut dh = [0.0; HIDDEN];
    for j in 0..HIDDEN {
        grad.dense_w[j] = dy * s2.h[j];
        dh[j] = dy * w.dense_w[j];
    }
    grad.dense_bias_weight = dy * w.dense_bias_input;

    let (dh1, dc1) = backprop_step(w, &mut grad, row.x_curr, &s1, &a2, &s2, &dh, &[0.0; HIDDEN]);
    backprop_step(w, &mut grad, row.x_prev, &s0, &a1, &s1, &dh1, &dc1);

    (err * err, grad)
}

/// Backpropagates one cell step, accumulating parameter gradients into
/// `grad`, and returns the gradients flowing into `prev.h` and `prev.c`.
#[allow(clippy::too_many_arguments)]
fn backprop_step(
    w: &WeightSet,
    grad: &mut WeightSet,
    x: f64,
    prev: &CellState,
    acts: &GateActivations,
    state: &CellState,
    dh: &Vec4,
    dc_next: &Vec4,
) -> (Vec4, Vec4) {
    let mut dz = [[0.0; HIDDEN]; 4];
    let mut dc_prev = [0.0; HIDDEN];
    for j in 0..HIDDEN {
        let tc = state.c[j].tanh();
        let d_o = dh[j] * tc;
        let dc = dh[j] * acts.o[j] * (1.0 - tc * tc) + dc_next[j];
        let d_i = dc * acts.c_tilde[j];
        let d_ct = dc * acts.i[j];
        let d_f = dc * prev.c[j];
        dc_prev[j] = dc * acts.f[j];

        dz[Gate::Forget.index()][j] = d_f * acts.f[j] * (1.0 - acts.f[j]);
        dz[Gate::Input.index()][j] = d_i * acts.i[j] * (1.0 - acts.i[j]);
        dz[Gate::Candidate.index()][j] = d_ct * (1.0 - acts.c_tilde[j] * acts.c_tilde[j]);
        dz[Gate::Output.index()][j] = d_o * acts.o[j] * (1.0 - acts.o[j]);
    }

    let mut dh_prev = [0.0; HIDDEN];
    for gate in Gate::ALL {
        let gi = gate.index();
        let g = w.gate(gate);
        let gg = grad.gate_mut(gate);
        for j in 0..HIDDEN {
            let d = dz[gi][j];
            gg.w[j] += d * x;
            gg.b[j] += d * w.lstm_bias_input;
            for k in 0..HIDDEN {
                gg.u[k][j] += d * prev.h[k];
                dh_prev[k] += g.u[k][j] * d;
            }
        }
    }
    (dh_prev, dc_prev)
}

/// Worst relative disagreement between the analytic gradient and central
/// finite differences over every trainable parameter. Relative error is
/// `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn gradient_check(w: &WeightSet, row: &Row) -> f64 {
    let (_, analytic) = row_gradient(w, row);
    let analytic = analytic.params();
    let base = w.params();
    let mut probe = w.clone();
    let mut worst = 0.0f64;
    for (p, &a) in analytic.iter().enumerate() {
        let mut shifted = base.clone();
        shifted[p] = base[p] + GRAD_CHECK_STEP;
        probe.set_params(&shifted);
        let up = row_loss(&probe, row);
        shifted[p] = base[p] - GRAD_CHECK_STEP;
        probe.set_params(&shifted);
        let down = row_loss(&probe, row);
        let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
        let denom = a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub clip_norm: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 500,
            seed: 42,
            clip_norm: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(LstmError::InvalidHyperparams("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(LstmError::InvalidHyperparams("epochs must be positive".into()));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return Err(LstmError::InvalidHyperparams("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Initial weight range; small enough to keep tanh out of saturation.
pub const INIT_SCALE: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: WeightSet,
    /// Mean per-row loss of each epoch, measured during the pass.
    pub epoch_loss: Vec<f64>,
}

pub fn train(train_set: &SupervisedSet, hp: &Hyperparams) -> Result<WeightSet> {
    train_with_history(train_set, hp).map(|o| o.weights)
}

/// Per-row SGD with BPTT, global-norm gradient clipping and a post-step
/// clamp of every weight to [-1, 1]. Row order is reshuffled each epoch
/// from the seeded generator, so the result is a pure function of the data
/// and `hp`.
pub fn train_with_history(train_set: &SupervisedSet, hp: &Hyperparams) -> Result<TrainOutcome> {
    hp.validate()?;
    if train_set.is_empty() {
        return Err(LstmError::EmptyTrainingSet);
    }
    for (i, r) in train_set.rows.iter().enumerate() {
        if !(r.x_prev.is_finite() && r.x_curr.is_finite() && r.target.is_finite()) {
            return Err(LstmError::NonFinite(format!("training row {i}")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut weights = WeightSet::random(&mut rng, INIT_SCALE);
    let mut params = weights.params();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epoch_loss = Vec::with_capacity(hp.epochs);

    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &idx in &order {
            let (loss, grad) = row_gradient(&weights, &train_set.rows[idx]);
            if !loss.is_finite() {
                return Err(LstmError::Diverged { epoch, loss });
            }
            total += loss;
            let mut g = grad.params();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(LstmError::Diverged { epoch, loss: norm });
            }
            if norm > hp.clip_norm {
                let s = hp.clip_norm / norm;
                g.iter_mut().for_each(|v| *v *= s);
            }
            for (p, d) in params.iter_mut().zip(&g) {
                *p = (*p - hp.learning_rate * d).clamp(-1.0, 1.0);
            }
            weights.set_params(&params);
        }
        let mean = total / train_set.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        epoch_loss.push(mean);
    }

    Ok(TrainOutcome { weights, epoch_loss })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub rmse: f64,
}

pub fn metrics(predictions: &[f64], targets: &[f64]) -> Result<Metrics> {
    if predictions.len() != targets.len() {
        return Err(LstmError::LengthMismatch {
            predictions: predictions.len(),
            targets: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(LstmError::EmptyInput);
    }
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    if !sum.is_finite() {
        return Err(LstmError::NonFinite("predictions or targets".into()));
    }
    let mse = sum / predictions.len() as f64;
    Ok(Metrics { mse, rmse: mse.sqrt() })
}

// Weight file layout. Keys follow the conventional gate notation.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct WeightFile {
    version: String,
    W_f: Vec4,
    W_i: Vec4,
    W_c: Vec4,
    W_o: Vec4,
    U_f: Mat4,
    U_i: Mat4,
    U_c: Mat4,
    U_o: Mat4,
    b_f: Vec4,
    b_i: Vec4,
    b_c: Vec4,
    b_o: Vec4,
    lstm_bias_input: f64,
    dense_w: Vec4,
    dense_bias_weight: f64,
    dense_bias_input: f64,
}

const REQUIRED_KEYS: [&str; 17] = [
    "version",
    "W_f",
    "W_i",
    "W_c",
    "W_o",
    "U_f",
    "U_i",
    "U_c",
    "U_o",
    "b_f",
    "b_i",
    "b_c",
    "b_o",
    "lstm_bias_input",
    "dense_w",
    "dense_bias_weight",
    "dense_bias_input",
];

impl From<&WeightSet> for WeightFile {
    fn from(w: &WeightSet) -> Self {
        let g = |gate: Gate| w.gate(gate);
        Self {
            version: WEIGHT_FILE_VERSION.to_string(),
            W_f: g(Gate::Forget).w,
            W_i: g(Gate::Input).w,
            W_c: g(Gate::Candidate).w,
            W_o: g(Gate::Output).w,
            U_f: g(Gate::Forget).u,
            U_i: g(Gate::Input).u,
            U_c: g(Gate::Candidate).u,
            U_o: g(Gate::Output).u,
            b_f: g(Gate::Forget).b,
            b_i: g(Gate::Input).b,
            b_c: g(Gate::Candidate).b,
            b_o: g(Gate::Output).b,
            lstm_bias_input: w.lstm_bias_input,
            dense_w: w.dense_w,
            dense_bias_weight: w.dense_bias_weight,
            dense_bias_input: w.dense_bias_input,
        }
    }
}

impl From<WeightFile> for WeightSet {
    fn from(f: WeightFile) -> Self {
        let gate = |w, u, b| GateWeights { w, u, b };
        Self {
            gates: [
                gate(f.W_f, f.U_f, f.b_f),
                gate(f.W_i, f.U_i, f.b_i),
                gate(f.W_c, f.U_c, f.b_c),
                gate(f.W_o, f.U_o, f.b_o),
            ],
            lstm_bias_input: f.lstm_bias_input,
            dense_w: f.dense_w,
            dense_bias_weight: f.dense_bias_weight,
            dense_bias_input: f.dense_bias_input,
        }
    }
}

/// Serializes to pretty JSON. Floats use the shortest representation that
/// parses back to the identical bit pattern.
pub fn weights_to_json(w: &WeightSet) -> Result<String> {
    w.validate()?;
    serde_json::to_string_pretty(&WeightFile::from(w)).map_err(|e| LstmError::Schema(e.to_string()))
}

pub fn weights_from_json(text: &str) -> Result<WeightSet> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| LstmError::Schema(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| LstmError::Schema("top level must be an object".into()))?;
    if let Some(missing) = REQUIRED_KEYS.iter().find(|k| !obj.contains_key(**k)) {
        return Err(LstmError::MissingField(missing.to_string()));
    }
    let file: WeightFile =
        serde_json::from_value(value).map_err(|e| LstmError::Schema(e.to_string()))?;
    if file.version != WEIGHT_FILE_VERSION {
        return Err(LstmError::Schema(format!(
            "unsupported version \"{}\" (expected \"{WEIGHT_FILE_VERSION}\")",
            file.version
        )));
    }
    let w = WeightSet::from(file);
    w.validate()?;
    Ok(w)
}

pub fn export_weights(w: &WeightSet, path: &Path) -> Result<()> {
    let mut text = weights_to_json(w)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| LstmError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn import_weights(path: &Path) -> Result<WeightSet> {
    let text = fs::read_to_string(path).map_err(|source| LstmError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    weights_from_json(&text)
}
