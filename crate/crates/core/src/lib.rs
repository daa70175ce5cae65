//! Izhikevich spiking neurons and their piecewise-linear approximations.
//!
//! The crate covers floating-point simulation of the quadratic model and the
//! 2-, 3- and 4-segment PWL variants, a bit-exact Q8.12 shift-add datapath,
//! grid search for PWL coefficients, random E/I network simulation, a static
//! model of the shared-pipeline hardware, and a rate-coded supervised learner.

pub mod datapath;
pub mod fixed;
pub mod hw;
pub mod learning;
pub mod network;
pub mod neuron;
pub mod regime;
pub mod registry;
pub mod search;
pub mod stimulus;

pub use datapath::{fixed_simulate, fixed_step, FixedConfig, FixedNeuron, FixedState};
pub use fixed::{decompose_constant, mul_by_plan, scale_by_dt, FixedError, FixedPoint, ShiftAddPlan};
pub use neuron::{
    derivative, nullcline_value, simulate, step, KCoeffs, ModelKind, NeuronError, NeuronParams, NeuronState,
    SimOptions, SpikeTrain,
};
pub use regime::{classify_regime, Regime};
pub use registry::NeuronType;
pub use stimulus::Stimulus;
