//! Differential-pair memristor crossbars.
//!
//! Each signed weight is stored as two conductances whose difference,
//! normalized by `G_on - G_off`, reproduces the weight. The inactive device
//! of a pair rests at `G_off`. Column outputs are differential currents
//! divided by the same span, so an ideal array evaluates `W^T v`.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::lstm::{Gate, WeightSet, HIDDEN};

#[derive(Debug, Error, PartialEq)]
pub enum CrossbarError {
    #[error("weight [{row}][{col}] = {value} lies outside [-1, 1]")]
    WeightOutOfRange { row: usize, col: usize, value: f64 },
    #[error("expected {expected} input voltages, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("quantization needs at least 2 levels, got {0}")]
    TooFewLevels(u32),
    #[error("invalid memristor parameters: {0}")]
    InvalidParams(String),
    #[error("invalid variation model: {0}")]
    InvalidVariation(String),
}

pub type Result<T> = std::result::Result<T, CrossbarError>;

/// Dense row-major matrix. Rows are crossbar inputs, columns are outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `W^T v`: one weighted sum per column.
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.get(r, c) * v[r]).sum())
            .collect()
    }
}

/// Programming resolution of a device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Levels {
    #[default]
    Continuous,
    Discrete(u32),
}

impl fmt::Display for Levels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Levels::Continuous => f.write_str("continuous"),
            Levels::Discrete(n) => write!(f, "{n}"),
        }
    }
}

impl std::str::FromStr for Levels {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("continuous") {
            return Ok(Levels::Continuous);
        }
        let n: u32 = s
            .parse()
            .map_err(|_| format!("levels must be an integer >= 2 or \"continuous\", got '{s}'"))?;
        if n < 2 {
            return Err(format!("levels must be at least 2, got {n}"));
        }
        Ok(Levels::Discrete(n))
    }
}

impl Serialize for Levels {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Levels::Continuous => s.serialize_str("continuous"),
            Levels::Discrete(n) => s.serialize_u32(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Levels {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(u32),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Count(n) => n.to_string().parse(),
            Repr::Name(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemristorParams {
    /// Low-resistance state, ohms.
    pub r_on: f64,
    /// High-resistance state, ohms.
    pub r_off: f64,
    pub levels: Levels,
}

impl Default for MemristorParams {
    fn default() -> Self {
        Self {
            r_on: 10e3,
            r_off: 10e6,
            levels: Levels::Continuous,
        }
    }
}

impl MemristorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_on > 0.0 && self.r_on < self.r_off && self.r_off.is_finite()) {
            return Err(CrossbarError::InvalidParams(format!(
                "need 0 < r_on < r_off, got r_on = {}, r_off = {}",
                self.r_on, self.r_off
            )));
        }
        if let Levels::Discrete(n) = self.levels {
            if n < 2 {
                return Err(CrossbarError::TooFewLevels(n));
            }
        }
        Ok(())
    }

    pub fn g_on(&self) -> f64 {
        1.0 / self.r_on
    }

    pub fn g_off(&self) -> f64 {
        1.0 / self.r_off
    }

    pub fn g_span(&self) -> f64 {
        self.g_on() - self.g_off()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationModel {
    /// Lognormal spread of programmed conductances.
    pub sigma_rel: f64,
    /// Gaussian spread applied to every conductance on each read.
    pub read_noise_rel: f64,
    pub seed: u64,
}

impl Default for VariationModel {
    fn default() -> Self {
        Self {
            sigma_rel: 0.0,
            read_noise_rel: 0.0,
            seed: 0,
        }
    }
}

impl VariationModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma_rel", self.sigma_rel), ("read_noise_rel", self.read_noise_rel)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CrossbarError::InvalidVariation(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Conductances of one differential pair, siemens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConductancePair {
    pub g_plus: f64,
    pub g_minus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarArray {
    rows: usize,
    cols: usize,
    pairs: Vec<ConductancePair>,
    params: MemristorParams,
}

/// Snaps `w` to the nearest of `levels` uniform points spanning [-1, 1].
/// Exact ties go to the point with the smaller magnitude.
pub fn quantize_value(w: f64, levels: u32) -> Result<f64> {
    if levels < 2 {
        return Err(CrossbarError::TooFewLevels(levels));
    }
    let step = 2.0 / f64::from(levels - 1);
    let pos = ((w + 1.0) / step).clamp(0.0, f64::from(levels - 1));
    let k = pos.floor();
    let lo = -1.0 + k * step;
    let hi = (lo + step).min(1.0);
    let (d_lo, d_hi) = (w - lo, hi - w);
    let snapped = if (d_lo - d_hi).abs() <= 1e-12 {
        if lo.abs() <= hi.abs() {
            lo
        } else {
            hi
        }
    } else if d_lo < d_hi {
        lo
    } else {
        hi
    };
    Ok(snapped)
}

pub fn quantize(weights: &Matrix, levels: u32) -> Result<Matrix> {
    if levels < 2 {
        return Err(CrossbarError::TooFewLevels(levels));
    }
    Ok(weights.map(|w| quantize_value(w, levels).expect("levels checked")))
}

impl CrossbarArray {
    /// One-sided differential mapping. Discrete `levels` quantize first.
    pub fn program(weights: &Matrix, params: &MemristorParams) -> Result<Self> {
        params.validate()?;
        for r in 0..weights.rows() {
            for c in 0..weights.cols() {
                let value = weights.get(r, c);
                if value.is_nan() || value.abs() > 1.0 {
                    return Err(CrossbarError::WeightOutOfRange { row: r, col: c, value });
                }
            }
        }
        let target = match params.levels {
            Levels::Continuous => weights.clone(),
            Levels::Discrete(n) => quantize(weights, n)?,
        };
        let (g_off, span) = (params.g_off(), params.g_span());
        let pairs = target
            .as_slice()
            .iter()
            .map(|&w| ConductancePair {
                g_plus: g_off + w.max(0.0) * span,
                g_minus: g_off + (-w).max(0.0) * span,
            })
            .collect();
        Ok(Self {
            rows: weights.rows(),
            cols: weights.cols(),
            pairs,
            params: *params,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn params(&self) -> &MemristorParams {
        &self.params
    }

    pub fn pair(&self, r: usize, c: usize) -> ConductancePair {
        self.pairs[r * self.cols + c]
    }

    pub fn pairs(&self) -> &[ConductancePair] {
        &self.pairs
    }

    pub fn read_effective_weights(&self) -> Matrix {
        let span = self.params.g_span();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.pairs.iter().map(|p| (p.g_plus - p.g_minus) / span).collect(),
        }
    }

    /// Differential column currents in amperes for row voltages `v_in`.
    pub fn column_currents(&self, v_in: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v_in)?;
        Ok((0..self.cols)
            .map(|c| {
                (0..self.rows)
                    .map(|r| {
                        let p = self.pair(r, c);
                        v_in[r] * (p.g_plus - p.g_minus)
                    })
                    .sum()
            })
            .collect())
    }

    /// Noiseless vector-matrix product, normalized to effective weights.
    pub fn vmm(&self, v_in: &[f64]) -> Result<Vec<f64>> {
        let span = self.params.g_span();
        Ok(self.column_currents(v_in)?.into_iter().map(|i| i / span).collect())
    }

    /// As [`vmm`](Self::vmm), with every conductance perturbed by an
    /// independent `1 + read_noise_rel * N(0, 1)` factor for this read only.
    pub fn vmm_noisy<R: Rng + ?Sized>(&self, v_in: &[f64], read_noise_rel: f64, rng: &mut R) -> Result<Vec<f64>> {
        if read_noise_rel == 0.0 {
            return self.vmm(v_in);
        }
        self.check_len(v_in)?;
        let span = self.params.g_span();
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (c, o) in out.iter_mut().enumerate() {
                let p = self.pair(r, c);
                let np: f64 = StandardNormal.sample(rng);
                let nm: f64 = StandardNormal.sample(rng);
                let gp = p.g_plus * (1.0 + read_noise_rel * np);
                let gm = p.g_minus * (1.0 + read_noise_rel * nm);
                *o += v_in[r] * (gp - gm);
            }
        }
        out.iter_mut().for_each(|o| *o /= span);
        Ok(out)
    }

    /// Multiplies each conductance by an independent lognormal factor with
    /// median 1, then clamps into `[G_off, G_on]`.
    pub fn apply_variation(&self, model: &VariationModel) -> Result<Self> {
        model.validate()?;
        if model.sigma_rel == 0.0 {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        Ok(self.with_variation(model.sigma_rel, &mut rng))
    }

    pub fn with_variation<R: Rng + ?Sized>(&self, sigma_rel: f64, rng: &mut R) -> Self {
        let (lo, hi) = (self.params.g_off(), self.params.g_on());
        let mut factor = || -> f64 {
            let n: f64 = StandardNormal.sample(rng);
            (sigma_rel * n).exp()
        };
        let pairs = self
            .pairs
            .iter()
            .map(|p| ConductancePair {
                g_plus: (p.g_plus * factor()).clamp(lo, hi),
                g_minus: (p.g_minus * factor()).clamp(lo, hi),
            })
            .collect();
        Self { pairs, ..self.clone() }
    }

    /// "row,col,G_plus,G_minus" with 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,G_plus,G_minus\n");
        for r in 0..self.rows {
            for c in 0..self.cols {
                let p = self.pair(r, c);
                let _ = writeln!(out, "{r},{c},{:.8e},{:.8e}", p.g_plus, p.g_minus);
            }
        }
        out
    }

    fn check_len(&self, v_in: &[f64]) -> Result<()> {
        if v_in.len() != self.rows {
            return Err(CrossbarError::LengthMismatch {
                expected: self.rows,
                got: v_in.len(),
            });
        }
        Ok(())
    }
}

/// Row layout of the LSTM crossbar: input, four recurrent rows, bias.
pub const LSTM_ROWS: usize = 1 + HIDDEN + 1;
/// Column layout: four gates of four units, gate-major.
pub const LSTM_COLS: usize = 4 * HIDDEN;
pub const DENSE_ROWS: usize = HIDDEN + 1;

pub fn lstm_column(gate: Gate, unit: usize) -> usize {
    gate.index() * HIDDEN + unit
}

/// 6x16 weight matrix of the LSTM layer.
pub fn lstm_matrix(w: &WeightSet) -> Matrix {
    let mut m = Matrix::zeros(LSTM_ROWS, LSTM_COLS);
    for gate in Gate::ALL {
        let g = w.gate(gate);
        for j in 0..HIDDEN {
            let col = lstm_column(gate, j);
            m.set(0, col, g.w[j]);
            for k in 0..HIDDEN {
                m.set(1 + k, col, g.u[k][j]);
            }
            m.set(LSTM_ROWS - 1, col, g.b[j]);
        }
    }
    m
}

/// 5x1 weight matrix of the dense layer.
pub fn dense_matrix(w: &WeightSet) -> Matrix {
    let mut m = Matrix::zeros(DENSE_ROWS, 1);
    for j in 0..HIDDEN {
        m.set(j, 0, w.dense_w[j]);
    }
    m.set(HIDDEN, 0, w.dense_bias_weight);
    m
}

/// Both arrays of the network, with the bias-input voltages they expect.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCrossbars {
    pub lstm: CrossbarArray,
    pub dense: CrossbarArray,
    pub lstm_bias_input: f64,
    pub dense_bias_input: f64,
}

impl NetworkCrossbars {
    pub fn program(w: &WeightSet, params: &MemristorParams) -> Result<Self> {
        Ok(Self {
            lstm: CrossbarArray::program(&lstm_matrix(w), params)?,
            dense: CrossbarArray::program(&dense_matrix(w), params)?,
            lstm_bias_input: w.lstm_bias_input,
            dense_bias_input: w.dense_bias_input,
        })
    }

    /// Programming variation on both arrays from one seeded stream.
    pub fn apply_variation(&self, model: &VariationModel) -> Result<Self> {
        model.validate()?;
        if model.sigma_rel == 0.0 {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        Ok(Self {
            lstm: self.lstm.with_variation(model.sigma_rel, &mut rng),
            dense: self.dense.with_variation(model.sigma_rel, &mut rng),
            ..self.clone()
        })
    }
}
