//! Behavioral simulator of a memristive-crossbar LSTM forecaster.
//!
//! The pipeline: [`dataset`] windows a univariate series into supervised
//! triples, [`lstm`] trains and evaluates the floating-point reference
//! network, [`crossbar`] maps its weights onto differential conductance
//! pairs, [`analog`] models the voltage-mode circuit blocks, and
//! [`scheduler`] runs the analog datapath through the per-prediction cycle
//! while accounting time and energy. [`experiment`] runs seeded Monte Carlo
//! trials and [`cli`] wires it all together.

pub mod analog;
pub mod cli;
pub mod crossbar;
pub mod dataset;
pub mod experiment;
pub mod lstm;
pub mod scheduler;

pub use analog::{AnalogBlockParams, ReadNoise};
pub use crossbar::{CrossbarArray, Levels, Matrix, MemristorParams, NetworkCrossbars, VariationModel};
pub use dataset::{Normalizer, RawSeries, Row, SupervisedSet};
pub use lstm::{CellState, GateActivations, Hyperparams, Metrics, WeightSet};
pub use scheduler::{CycleTimeline, PowerModel, TimelineConfig};
