//! Independent reference code shared by the integration tests.

#![allow(dead_code)]

use memlstm::dataset::{airline_passengers, prepare, Prepared, DEFAULT_TEST_COUNT};
use memlstm::lstm::{train, Hyperparams, WeightSet};

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Straight-line two-step evaluation written against the weight-file
/// layout, gate by gate, with no shared helpers from the library.
pub fn oracle_forward(w: &WeightSet, x_prev: f64, x_curr: f64) -> f64 {
    let (wf, wi, wc, wo) = (&w.gates[0], &w.gates[1], &w.gates[2], &w.gates[3]);
    let bias = w.lstm_bias_input;
    let mut h = [0.0f64; 4];
    let mut c = [0.0f64; 4];
    for x in [x_prev, x_curr] {
        let mut h_next = [0.0f64; 4];
        let mut c_next = [0.0f64; 4];
        for j in 0..4 {
            let mut zf = wf.w[j] * x + wf.b[j] * bias;
            let mut zi = wi.w[j] * x + wi.b[j] * bias;
            let mut zc = wc.w[j] * x + wc.b[j] * bias;
            let mut zo = wo.w[j] * x + wo.b[j] * bias;
            for k in 0..4 {
                zf += wf.u[k][j] * h[k];
                zi += wi.u[k][j] * h[k];
                zc += wc.u[k][j] * h[k];
                zo += wo.u[k][j] * h[k];
            }
            let f = logistic(zf);
            let i = logistic(zi);
            let ct = zc.tanh();
            let o = logistic(zo);
            c_next[j] = f * c[j] + i * ct;
            h_next[j] = o * c_next[j].tanh();
        }
        h = h_next;
        c = c_next;
    }
    let mut y = w.dense_bias_weight * w.dense_bias_input;
    for j in 0..4 {
        y += w.dense_w[j] * h[j];
    }
    y
}

pub fn canonical() -> Prepared {
    prepare(&airline_passengers(), DEFAULT_TEST_COUNT).unwrap()
}

/// Weights from the default trainer configuration on the canonical split.
pub fn canonical_weights(prepared: &Prepared) -> WeightSet {
    train(&prepared.train, &Hyperparams::default()).unwrap()
}
