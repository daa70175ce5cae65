//! Built-in neuron types.
//!
//! The `(a, b, c, d)` values and stimulus protocols are the canonical
//! 20-behavior set published with the Izhikevich simple model (2003/2004).
//! They are external provenance: the PWL coefficient tables below were tuned
//! against them. Two behaviors in that set (class 1 excitability and the
//! integrator) originally use `0.04 v² + 4.1 v + 108`, and accommodation uses
//! a shifted u-equation; here every type runs on the standard equations.
//!
//! The per-type optimized K coefficients with their printed vertex errors
//! (`ERR_p`) and mean error percentages come from the PWL coefficient table.

use serde::{Deserialize, Serialize};

use crate::neuron::{KCoeffs, ModelKind, NeuronError, NeuronParams, NeuronState};
use crate::stimulus::{Pulse, Stimulus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronType {
    TonicSpiking,
    PhasicSpiking,
    TonicBursting,
    PhasicBursting,
    MixedMode,
    SpikeFrequencyAdaptation,
    Class1,
    Class2,
    SpikeLatency,
    SubthresholdOscillations,
    Resonator,
    Integrator,
    ReboundSpike,
    ReboundBurst,
    ThresholdVariability,
    Bistability,
    DepolarizingAfterPotential,
    Accommodation,
    InhibitionInducedSpiking,
    InhibitionInducedBursting,
}

/// One row of the optimized-coefficient table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoeffRow {
    pub err_p: f64,
    pub err_pct: f64,
    pub k: KCoeffs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypeCoeffs {
    pub pwl2: CoeffRow,
    pub pwl3: CoeffRow,
    pub pwl4: CoeffRow,
}

impl TypeCoeffs {
    pub fn row(&self, model: ModelKind) -> Option<CoeffRow> {
        match model {
            ModelKind::Pwl2 => Some(self.pwl2),
            ModelKind::Pwl3 => Some(self.pwl3),
            ModelKind::Pwl4 => Some(self.pwl4),
            _ => None,
        }
    }
}

const fn row2(err_p: f64, err_pct: f64, k1: f64, k2: f64) -> CoeffRow {
    CoeffRow {
        err_p,
        err_pct,
        k: KCoeffs::two(k1, k2),
    }
}

const fn row3(err_p: f64, err_pct: f64, k1: f64, k2: f64, k3: f64) -> CoeffRow {
    CoeffRow {
        err_p,
        err_pct,
        k: KCoeffs::new(k1, k2, k3),
    }
}

/// The 4PWL coefficients are shared by every type.
pub const PWL4_SHARED: KCoeffs = KCoeffs::new(0.375, 0.75, 11.0);

/// Printed column means of the coefficient table: `(ERR_p, ERR%)` per model.
pub const TABLE_MEANS: [(ModelKind, f64, f64); 3] = [
    (ModelKind::Pwl2, 2.25, 8.865),
    (ModelKind::Pwl3, 0.5325, 5.295),
    (ModelKind::Pwl4, 0.25, 1.235),
];

impl NeuronType {
    pub const ALL: [NeuronType; 20] = [
        NeuronType::TonicSpiking,
        NeuronType::PhasicSpiking,
        NeuronType::TonicBursting,
        NeuronType::PhasicBursting,
        NeuronType::MixedMode,
        NeuronType::SpikeFrequencyAdaptation,
        NeuronType::Class1,
        NeuronType::Class2,
        NeuronType::SpikeLatency,
        NeuronType::SubthresholdOscillations,
        NeuronType::Resonator,
        NeuronType::Integrator,
        NeuronType::ReboundSpike,
        NeuronType::ReboundBurst,
        NeuronType::ThresholdVariability,
        NeuronType::Bistability,
        NeuronType::DepolarizingAfterPotential,
        NeuronType::Accommodation,
        NeuronType::InhibitionInducedSpiking,
        NeuronType::InhibitionInducedBursting,
    ];

    pub fn key(self) -> &'static str {
        match self {
            NeuronType::TonicSpiking => "tonic_spiking",
            NeuronType::PhasicSpiking => "phasic_spiking",
            NeuronType::TonicBursting => "tonic_bursting",
            NeuronType::PhasicBursting => "phasic_bursting",
            NeuronType::MixedMode => "mixed_mode",
            NeuronType::SpikeFrequencyAdaptation => "spike_frequency_adaptation",
            NeuronType::Class1 => "class_1",
            NeuronType::Class2 => "class_2",
            NeuronType::SpikeLatency => "spike_latency",
            NeuronType::SubthresholdOscillations => "subthreshold_oscillations",
            NeuronType::Resonator => "resonator",
            NeuronType::Integrator => "integrator",
            NeuronType::ReboundSpike => "rebound_spike",
            NeuronType::ReboundBurst => "rebound_burst",
            NeuronType::ThresholdVariability => "threshold_variability",
            NeuronType::Bistability => "bistability",
            NeuronType::DepolarizingAfterPotential => "depolarizing_after_potential",
            NeuronType::Accommodation => "accommodation",
            NeuronType::InhibitionInducedSpiking => "inhibition_induced_spiking",
            NeuronType::InhibitionInducedBursting => "inhibition_induced_bursting",
        }
    }

    pub fn from_key(key: &str) -> Option<NeuronType> {
        let norm = key.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        NeuronType::ALL.into_iter().find(|t| t.key() == norm)
    }

    /// `(a, b, c, d)`.
    pub fn abcd(self) -> (f64, f64, f64, f64) {
        match self {
            NeuronType::TonicSpiking => (0.02, 0.2, -65.0, 6.0),
            NeuronType::PhasicSpiking => (0.02, 0.25, -65.0, 6.0),
            NeuronType::TonicBursting => (0.02, 0.2, -50.0, 2.0),
            NeuronType::PhasicBursting => (0.02, 0.25, -55.0, 0.05),
            NeuronType::MixedMode => (0.02, 0.2, -55.0, 4.0),
            NeuronType::SpikeFrequencyAdaptation => (0.01, 0.2, -65.0, 8.0),
            NeuronType::Class1 => (0.02, -0.1, -55.0, 6.0),
            NeuronType::Class2 => (0.2, 0.26, -65.0, 0.0),
            NeuronType::SpikeLatency => (0.02, 0.2, -65.0, 6.0),
            NeuronType::SubthresholdOscillations => (0.05, 0.26, -60.0, 0.0),
            NeuronType::Resonator => (0.1, 0.26, -60.0, -1.0),
            NeuronType::Integrator => (0.02, -0.1, -55.0, 6.0),
            NeuronType::ReboundSpike => (0.03, 0.25, -60.0, 4.0),
            NeuronType::ReboundBurst => (0.03, 0.25, -52.0, 0.0),
            NeuronType::ThresholdVariability => (0.03, 0.25, -60.0, 4.0),
            NeuronType::Bistability => (0.1, 0.26, -60.0, 0.0),
            NeuronType::DepolarizingAfterPotential => (1.0, 0.2, -60.0, -21.0),
            NeuronType::Accommodation => (0.02, 1.0, -55.0, 4.0),
            NeuronType::InhibitionInducedSpiking => (-0.02, -1.0, -60.0, 8.0),
            NeuronType::InhibitionInducedBursting => (-0.026, -1.0, -45.0, -2.0),
        }
    }

    /// Initial membrane potential; `u0 = b · v0`.
    pub fn v0(self) -> f64 {
        match self {
            NeuronType::PhasicSpiking
            | NeuronType::PhasicBursting
            | NeuronType::Class2
            | NeuronType::ReboundSpike
            | NeuronType::ReboundBurst
            | NeuronType::ThresholdVariability => -64.0,
            NeuronType::Class1 | NeuronType::Integrator => -60.0,
            NeuronType::SubthresholdOscillations | NeuronType::Resonator => -62.0,
            NeuronType::Bistability => -61.0,
            NeuronType::Accommodation => -65.0,
            NeuronType::InhibitionInducedSpiking | NeuronType::InhibitionInducedBursting => -63.8,
            _ => -70.0,
        }
    }

    /// Canonical stimulus protocol and its run length (ms).
    pub fn protocol(self) -> (Stimulus, f64) {
        let step = |onset_ms: f64, after: f64| Stimulus::Step {
            onset_ms,
            before: 0.0,
            after,
        };
        let pulses = |base: f64, ps: &[(f64, f64, f64)]| Stimulus::Pulses {
            base,
            pulses: ps.iter().map(|&(s, w, a)| Pulse::new(s, w, a)).collect(),
        };
        match self {
            NeuronType::TonicSpiking => (step(10.0, 14.0), 100.0),
            NeuronType::PhasicSpiking => (step(20.0, 0.5), 200.0),
            NeuronType::TonicBursting => (step(22.0, 15.0), 220.0),
            NeuronType::PhasicBursting => (step(20.0, 0.6), 200.0),
            NeuronType::MixedMode => (step(16.0, 10.0), 160.0),
            NeuronType::SpikeFrequencyAdaptation => (step(8.5, 30.0), 85.0),
            NeuronType::Class1 => (
                Stimulus::Ramp {
                    onset_ms: 30.0,
                    base: 0.0,
                    slope: 0.075,
                },
                300.0,
            ),
            NeuronType::Class2 => (
                Stimulus::Ramp {
                    onset_ms: 30.0,
                    base: -0.5,
                    slope: 0.015,
                },
                300.0,
            ),
            NeuronType::SpikeLatency => (pulses(0.0, &[(10.0, 3.0, 7.04)]), 100.0),
            NeuronType::SubthresholdOscillations => (pulses(0.0, &[(20.0, 5.0, 2.0)]), 200.0),
            NeuronType::Resonator => (
                pulses(
                    0.0,
                    &[
                        (40.0, 4.0, 0.65),
                        (60.0, 4.0, 0.65),
                        (280.0, 4.0, 0.65),
                        (320.0, 4.0, 0.65),
                    ],
                ),
                400.0,
            ),
            NeuronType::Integrator => (
                pulses(
                    0.0,
                    &[(9.09, 2.0, 9.0), (14.09, 2.0, 9.0), (70.0, 2.0, 9.0), (80.0, 2.0, 9.0)],
                ),
                100.0,
            ),
            NeuronType::ReboundSpike | NeuronType::ReboundBurst => (pulses(0.0, &[(20.0, 5.0, -15.0)]), 200.0),
            NeuronType::ThresholdVariability => (
                pulses(0.0, &[(10.0, 5.0, 1.0), (80.0, 5.0, 1.0), (70.0, 5.0, -6.0)]),
                100.0,
            ),
            NeuronType::Bistability => (pulses(0.24, &[(37.5, 5.0, 1.0), (216.0, 5.0, 1.0)]), 300.0),
            NeuronType::DepolarizingAfterPotential => (pulses(0.0, &[(9.0, 2.0, 20.0)]), 50.0),
            NeuronType::Accommodation => (
                Stimulus::Ramp {
                    onset_ms: 0.0,
                    base: 0.0,
                    slope: 0.04,
                },
                400.0,
            ),
            NeuronType::InhibitionInducedSpiking | NeuronType::InhibitionInducedBursting => {
                (pulses(80.0, &[(50.0, 200.0, -5.0)]), 350.0)
            }
        }
    }

    /// Original-model parameters for this type.
    pub fn params(self) -> NeuronParams {
        let (a, b, c, d) = self.abcd();
        NeuronParams::new(ModelKind::Original, a, b, c, d, KCoeffs::default()).expect("registry parameters are valid")
    }

    /// Parameters for `model`, with the type's tabulated K for PWL models.
    pub fn params_for(self, model: ModelKind) -> NeuronParams {
        let k = self.coeffs().row(model).map(|r| r.k).unwrap_or_default();
        self.params().with_model(model, k).expect("tabulated K are valid")
    }

    pub fn initial_state(self) -> NeuronState {
        let (_, b, _, _) = self.abcd();
        NeuronState::new(self.v0(), b * self.v0())
    }

    /// Optimized K coefficients with their printed `ERR_p` and `ERR%`.
    pub fn coeffs(self) -> TypeCoeffs {
        use NeuronType::*;
        let (pwl2, pwl3) = match self {
            TonicSpiking => (row2(3.75, 8.5, 0.75, 20.0), row3(0.3, 6.6, 0.625, 5.8, 6.4)),
            PhasicSpiking => (row2(1.75, 7.4, 0.5, 18.0), row3(0.3, 6.4, 0.625, 5.8, 6.4)),
            TonicBursting => (row2(3.75, 10.8, 0.625, 20.0), row3(0.3, 6.2, 0.625, 5.8, 6.4)),
            PhasicBursting => (row2(3.75, 9.2, 0.5, 20.0), row3(0.5, 5.1, 0.5, 7.0, 6.5)),
            MixedMode => (row2(1.75, 8.2, 0.5, 18.0), row3(0.5, 4.9, 0.5, 7.0, 6.5)),
            SpikeFrequencyAdaptation => (row2(1.75, 7.8, 0.375, 18.0), row3(0.5, 5.1, 0.5, 7.0, 6.5)),
            Class1 => (row2(1.75, 8.3, 0.375, 18.0), row3(0.5, 5.2, 0.5, 7.0, 6.5)),
            Class2 => (row2(1.75, 10.1, 0.625, 18.0), row3(0.5, 4.4, 0.5, 7.0, 6.5)),
            SpikeLatency => (row2(1.75, 8.3, 0.625, 18.0), row3(0.5, 6.1, 0.5, 7.0, 6.5)),
            SubthresholdOscillations => (row2(1.75, 9.2, 0.875, 18.0), row3(0.5, 5.5, 0.5, 7.0, 6.5)),
            Resonator => (row2(1.75, 9.8, 0.875, 18.0), row3(0.5, 4.9, 0.5, 7.0, 6.5)),
            Integrator => (row2(1.75, 8.7, 0.875, 18.0), row3(0.5, 6.3, 0.5, 7.0, 6.5)),
            ReboundSpike => (row2(1.75, 7.5, 0.875, 18.0), row3(0.5, 3.4, 0.5, 7.0, 6.5)),
            ReboundBurst => (row2(1.75, 8.1, 0.375, 18.0), row3(0.5, 5.1, 0.5, 7.0, 6.5)),
            ThresholdVariability => (row2(1.75, 9.9, 0.375, 18.0), row3(0.5, 5.8, 0.5, 7.0, 6.5)),
            Bistability => (row2(5.75, 10.9, 2.0, 22.0), row3(1.75, 6.1, 1.25, 12.0, 3.0)),
            DepolarizingAfterPotential => (row2(1.75, 7.4, 0.625, 18.0), row3(0.5, 6.1, 0.5, 7.0, 6.5)),
            Accommodation => (row2(1.75, 10.8, 0.625, 18.0), row3(0.5, 4.4, 0.5, 7.0, 6.5)),
            InhibitionInducedSpiking => (row2(1.75, 7.9, 0.625, 18.0), row3(0.5, 3.2, 0.5, 7.0, 6.5)),
            InhibitionInducedBursting => (row2(1.75, 8.5, 0.625, 18.0), row3(0.5, 5.1, 0.5, 7.0, 6.5)),
        };
        let pwl4_pct = match self {
            TonicSpiking => 1.8,
            PhasicSpiking => 1.5,
            TonicBursting => 1.9,
            PhasicBursting => 1.4,
            MixedMode => 1.5,
            SpikeFrequencyAdaptation => 1.4,
            Class1 => 0.7,
            Class2 => 0.7,
            SpikeLatency => 1.3,
            SubthresholdOscillations => 1.9,
            Resonator => 1.3,
            Integrator => 1.1,
            ReboundSpike => 1.6,
            ReboundBurst => 1.7,
            ThresholdVariability => 0.9,
            Bistability => 0.9,
            DepolarizingAfterPotential => 0.8,
            Accommodation => 1.1,
            InhibitionInducedSpiking => 0.7,
            InhibitionInducedBursting => 0.5,
        };
        TypeCoeffs {
            pwl2,
            pwl3,
            pwl4: CoeffRow {
                err_p: 0.25,
                err_pct: pwl4_pct,
                k: PWL4_SHARED,
            },
        }
    }
}

impl std::fmt::Display for NeuronType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

impl std::str::FromStr for NeuronType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NeuronType::from_key(s).ok_or_else(|| format!("unknown neuron type `{s}`"))
    }
}

/// Tonic-spiking neuron with shift-add friendly recovery constants
/// `a = 1/8 + 1/16 + 1/64` and `b = 1/4 + 1/16`.
pub fn hardware_tonic(model: ModelKind, k: KCoeffs) -> Result<NeuronParams, NeuronError> {
    NeuronParams::new(model, 0.203125, 0.3125, -65.0, 6.0, k)
}

/// Digitalized K values of the hardware datapath per PWL model.
pub fn hardware_k(model: ModelKind) -> Option<KCoeffs> {
    match model {
        ModelKind::Pwl2 => Some(KCoeffs::two(0.75, 20.0)),
        ModelKind::Pwl3 => Some(KCoeffs::new(0.625, 5.8, 6.4)),
        ModelKind::Pwl4 => Some(KCoeffs::new(0.375, 0.75, 11.0)),
        _ => None,
    }
}

/// Neuron used for the resting → bursting → tonic staircase: a bursting
/// cell (`b = 0.26`, `c = -52`, `d = 2`) whose bursts merge into regular
/// spiking at high drive.
pub fn regime_transition(model: ModelKind, k: KCoeffs) -> Result<NeuronParams, NeuronError> {
    NeuronParams::new(model, 0.02, 0.26, -52.0, 2.0, k)
}

/// Staircase levels used to sweep through the regimes. 2PWL needs a higher
/// drive because its vertex sits below the quadratic one.
pub fn staircase_levels(model: ModelKind) -> [f64; 4] {
    match model {
        ModelKind::Pwl2 => [0.0, 5.5, 14.0, 22.0],
        _ => [0.0, 4.5, 12.5, 19.5],
    }
}

/// K used for the staircase runs.
pub fn staircase_k(model: ModelKind) -> KCoeffs {
    match model {
        ModelKind::Pwl2 => KCoeffs::two(0.625, 20.0),
        ModelKind::Pwl3 => KCoeffs::new(0.625, 5.8, 6.4),
        ModelKind::Pwl4 => PWL4_SHARED,
        _ => KCoeffs::default(),
    }
}
