//! Seeded Monte Carlo harness shared by the command line and the demo.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analog::{AnalogBlockParams, ReadNoise};
use crate::crossbar::{CrossbarError, MemristorParams, NetworkCrossbars, VariationModel};
use crate::dataset::Prepared;
use crate::lstm::{metrics, predict, LstmError, Metrics, WeightSet};
use crate::scheduler::{build_cycle_timeline, run_test_set, CycleTimeline, PowerModel, ScheduleError, TestSetRun, TimelineConfig};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Crossbar(#[from] CrossbarError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Lstm(#[from] LstmError),
}

/// SplitMix64 finalizer over `base` and a stream index. Gives every trial
/// (and every noise stream within a trial) its own well-mixed seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hardware configuration of one analog evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HardwareConfig {
    pub memristor: MemristorParams,
    pub variation: VariationModel,
    pub analog: AnalogBlockParams,
}

#[derive(Debug, Clone)]
pub struct AnalogTrial {
    pub run: TestSetRun,
    pub metrics: Metrics,
}

/// Trained weights against a prepared dataset, ready for repeated analog
/// evaluation of the test partition.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub prepared: Prepared,
    pub weights: WeightSet,
    pub timeline: CycleTimeline,
    pub software: Vec<f64>,
    pub software_metrics: Metrics,
}

impl Experiment {
    pub fn new(prepared: Prepared, weights: WeightSet, timeline: &TimelineConfig, power: &PowerModel) -> Result<Self, SimError> {
        weights.validate()?;
        let timeline = build_cycle_timeline(timeline, power)?;
        let software = predict(&weights, &prepared.test);
        let software_metrics = metrics(&software, &prepared.test.targets())?;
        Ok(Self {
            prepared,
            weights,
            timeline,
            software,
            software_metrics,
        })
    }

    pub fn targets(&self) -> Vec<f64> {
        self.prepared.test.targets()
    }

    /// Programs the crossbars, applies programming variation seeded from
    /// `(variation.seed, trial)`, and runs the test set through the cycle
    /// schedule with per-read noise from an independent stream.
    pub fn analog_trial(&self, hw: &HardwareConfig, trial: u64) -> Result<AnalogTrial, SimError> {
        let trial_seed = derive_seed(hw.variation.seed, trial);
        let net = NetworkCrossbars::program(&self.weights, &hw.memristor)?
            .apply_variation(&VariationModel { seed: trial_seed, ..hw.variation })?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, 1));
        let mut noise = ReadNoise {
            rel: hw.variation.read_noise_rel,
            rng: &mut rng,
        };
        let run = run_test_set(&self.timeline, &self.prepared.test.rows, &net, &hw.analog, Some(&mut noise))?;
        let metrics = metrics(&run.predictions, &self.targets())?;
        Ok(AnalogTrial { run, metrics })
    }

    /// RMSE of `trials` independent analog trials, in trial order.
    pub fn rmse_trials(&self, hw: &HardwareConfig, trials: u64) -> Result<Vec<f64>, SimError> {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .map(|t| self.analog_trial(hw, t).map(|r| r.metrics.rmse))
            .collect()
    }
}

/// Sample mean and standard deviation (n - 1 denominator). Constant
/// samples return their value and exactly 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.windows(2).all(|w| w[0] == w[1]) {
        return (values.first().copied().unwrap_or(f64::NAN), 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
