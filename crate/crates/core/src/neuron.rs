//! Floating-point neuron models: the quadratic Izhikevich model, its rescaled
//! hardware variant and the three piecewise-linear (PWL) approximations.
//!
//! All PWL nullclines are built from absolute-value terms centred on the
//! breakpoint `v = -62.5 mV`, the vertex of `0.04 v² + 5 v + 140`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stimulus::Stimulus;

/// Membrane potential at which every PWL absolute-value term is centred (mV).
pub const BREAKPOINT: f64 = -62.5;

/// Value of the original quadratic nullcline at its vertex `v = -62.5`.
pub const ORIGINAL_VERTEX: f64 = -16.25;

/// Default spike apex (mV); all spikes are equalized at this value.
pub const DEFAULT_V_TH: f64 = 30.0;

/// Default integration step (ms), `1 / (16 * 1024)`.
pub const DEFAULT_DT: f64 = 1.0 / 16384.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuronError {
    #[error("non-finite state at step {step}: v = {v}, u = {u}")]
    NonFinite { step: usize, v: f64, u: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("integration step must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("window holds {spikes} spikes, at least 3 are needed for a spiking label")]
    WindowTooShort { spikes: usize },
    #[error("window {start}..{end} exceeds the train extent of {len} steps")]
    WindowOutOfRange { start: usize, end: usize, len: usize },
}

/// Which v-equation a neuron integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `0.04 v² + 5 v + 140`
    Original,
    /// `k1 |v + 62.5| - k2`
    Pwl2,
    /// `k1 (|v + 62.5 + k2| + |v + 62.5 - k2|) - k3 k2 k1`
    Pwl3,
    /// `k2 (|v + 62.5 + k3| + |v + 62.5 - k3|) + k1 |v + 62.5| - 4 k2 k3`
    Pwl4,
    /// `v² / 32 + 4 v + 140`, the shift-friendly coefficient set used by
    /// the hardware datapath. Its vertex sits at `v = -64`, not `-62.5`.
    OriginalDiscretized,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Original,
        ModelKind::Pwl2,
        ModelKind::Pwl3,
        ModelKind::Pwl4,
        ModelKind::OriginalDiscretized,
    ];

    pub const PWL: [ModelKind; 3] = [ModelKind::Pwl2, ModelKind::Pwl3, ModelKind::Pwl4];

    pub fn is_pwl(self) -> bool {
        matches!(self, ModelKind::Pwl2 | ModelKind::Pwl3 | ModelKind::Pwl4)
    }

    /// Short lowercase name used on the command line and in file headers.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Original => "original",
            ModelKind::Pwl2 => "pwl2",
            ModelKind::Pwl3 => "pwl3",
            ModelKind::Pwl4 => "pwl4",
            ModelKind::OriginalDiscretized => "original_discretized",
        }
    }

    /// Number of K coefficients the model consults.
    pub fn k_arity(self) -> usize {
        match self {
            ModelKind::Pwl2 => 2,
            ModelKind::Pwl3 | ModelKind::Pwl4 => 3,
            _ => 0,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "original" | "orig" | "izhikevich" => Ok(ModelKind::Original),
            "pwl2" | "2pwl" => Ok(ModelKind::Pwl2),
            "pwl3" | "3pwl" => Ok(ModelKind::Pwl3),
            "pwl4" | "4pwl" => Ok(ModelKind::Pwl4),
            "original_discretized" | "discretized" => Ok(ModelKind::OriginalDiscretized),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

/// Slope/offset coefficients of a PWL nullcline. `k3` is ignored by 2PWL.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KCoeffs {
    pub k1: f64,
    pub k2: f64,
    #[serde(default)]
    pub k3: f64,
}

impl KCoeffs {
    pub const fn new(k1: f64, k2: f64, k3: f64) -> Self {
        KCoeffs { k1, k2, k3 }
    }

    pub const fn two(k1: f64, k2: f64) -> Self {
        KCoeffs { k1, k2, k3: 0.0 }
    }

    /// Checks the sign constraints for `model`; non-PWL models accept anything.
    pub fn validate(&self, model: ModelKind) -> Result<(), NeuronError> {
        if !model.is_pwl() {
            return Ok(());
        }
        let finite = self.k1.is_finite() && self.k2.is_finite() && self.k3.is_finite();
        if !finite || self.k1 <= 0.0 || self.k2 <= 0.0 {
            return Err(NeuronError::InvalidParams(format!(
                "{model} needs k1 > 0 and k2 > 0, got {self:?}"
            )));
        }
        if model != ModelKind::Pwl2 && self.k3 <= 0.0 {
            return Err(NeuronError::InvalidParams(format!(
                "{model} needs k3 > 0, got {}",
                self.k3
            )));
        }
        Ok(())
    }
}

/// Right-hand side of the v-equation with `u = 0` and `I = 0`.
pub fn nullcline_value(model: ModelKind, k: KCoeffs, v: f64) -> f64 {
    let x = v - BREAKPOINT;
    match model {
        ModelKind::Original => 0.04 * v * v + 5.0 * v + 140.0,
        ModelKind::OriginalDiscretized => v * v / 32.0 + 4.0 * v + 140.0,
        ModelKind::Pwl2 => k.k1 * x.abs() - k.k2,
        ModelKind::Pwl3 => k.k1 * ((x + k.k2).abs() + (x - k.k2).abs()) - k.k3 * k.k2 * k.k1,
        ModelKind::Pwl4 => k.k2 * ((x + k.k3).abs() + (x - k.k3).abs()) + k.k1 * x.abs() - 4.0 * k.k2 * k.k3,
    }
}

/// Analytic slope of the nullcline, `d f / d v`. At a kink the right-hand
/// derivative is returned.
pub fn nullcline_slope(model: ModelKind, k: KCoeffs, v: f64) -> f64 {
    let x = v - BREAKPOINT;
    let sgn = |y: f64| if y >= 0.0 { 1.0 } else { -1.0 };
    match model {
        ModelKind::Original => 0.08 * v + 5.0,
        ModelKind::OriginalDiscretized => v / 16.0 + 4.0,
        ModelKind::Pwl2 => k.k1 * sgn(x),
        ModelKind::Pwl3 => k.k1 * (sgn(x + k.k2) + sgn(x - k.k2)),
        ModelKind::Pwl4 => k.k2 * (sgn(x + k.k3) + sgn(x - k.k3)) + k.k1 * sgn(x),
    }
}

/// Full parameter set of one neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    pub model: ModelKind,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    #[serde(default = "default_v_th")]
    pub v_th: f64,
    #[serde(default)]
    pub k: KCoeffs,
}

fn default_v_th() -> f64 {
    DEFAULT_V_TH
}

impl NeuronParams {
    /// Builds and validates a parameter set with the default threshold.
    pub fn new(model: ModelKind, a: f64, b: f64, c: f64, d: f64, k: KCoeffs) -> Result<Self, NeuronError> {
        let p = NeuronParams {
            model,
            a,
            b,
            c,
            d,
            v_th: DEFAULT_V_TH,
            k,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_threshold(mut self, v_th: f64) -> Result<Self, NeuronError> {
        self.v_th = v_th;
        self.validate()?;
        Ok(self)
    }

    /// Same neuron with a different v-equation.
    pub fn with_model(mut self, model: ModelKind, k: KCoeffs) -> Result<Self, NeuronError> {
        self.model = model;
        self.k = k;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), NeuronError> {
        let all = [self.a, self.b, self.c, self.d, self.v_th];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(NeuronError::InvalidParams(format!("non-finite field in {self:?}")));
        }
        // Negative `a` is legitimate: the inhibition-induced behaviors use it.
        if self.a == 0.0 {
            return Err(NeuronError::InvalidParams("a must be nonzero".into()));
        }
        if self.v_th <= self.c {
            return Err(NeuronError::InvalidParams(format!(
                "threshold {} must exceed reset {}",
                self.v_th, self.c
            )));
        }
        self.k.validate(self.model)
    }
}

/// The `(v, u)` pair evolved by integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub v: f64,
    pub u: f64,
}

impl NeuronState {
    pub const fn new(v: f64, u: f64) -> Self {
        NeuronState { v, u }
    }

    /// `v = v0`, `u = b · v0`.
    pub fn resting(params: &NeuronParams, v0: f64) -> Self {
        NeuronState {
            v: v0,
            u: params.b * v0,
        }
    }

    /// Lowest fixed point of the dynamics under constant input `i_in`: the
    /// first downward crossing of `f(v) - b·v + I` scanning up from -120 mV
    /// towards `v_th`. `None` if the neuron has no resting state there.
    pub fn equilibrium(params: &NeuronParams, i_in: f64) -> Option<Self> {
        let g = |v: f64| nullcline_value(params.model, params.k, v) - params.b * v + i_in;
        let step = 0.01;
        let mut lo = -120.0;
        if g(lo) <= 0.0 {
            return None;
        }
        while lo < params.v_th {
            let hi = lo + step;
            if g(hi) <= 0.0 {
                let (mut a, mut b) = (lo, hi);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if g(m) > 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                return Some(Self::resting(params, 0.5 * (a + b)));
            }
            lo = hi;
        }
        None
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.u.is_finite()
    }
}

/// `(dv/dt, du/dt)` at `state` under input current `i_in`.
pub fn derivative(params: &NeuronParams, state: NeuronState, i_in: f64) -> (f64, f64) {
    let dv = nullcline_value(params.model, params.k, state.v) - state.u + i_in;
    let du = params.a * (params.b * state.v - state.u);
    (dv, du)
}

/// Result of one Euler step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub state: NeuronState,
    pub fired: bool,
    /// Membrane potential reported for this step: `v_th` on a spike.
    pub emitted_v: f64,
}

/// One forward-Euler step followed by the threshold/reset rule.
pub fn step(params: &NeuronParams, state: NeuronState, i_in: f64, dt: f64) -> Result<StepOutput, NeuronError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(NeuronError::InvalidDt(dt));
    }
    let (dv, du) = derivative(params, state, i_in);
    let next = NeuronState::new(state.v + dt * dv, state.u + dt * du);
    if !next.is_finite() || !i_in.is_finite() {
        return Err(NeuronError::NonFinite {
            step: 0,
            v: next.v,
            u: next.u,
        });
    }
    Ok(apply_reset(params, next))
}

#[inline]
fn apply_reset(params: &NeuronParams, next: NeuronState) -> StepOutput {
    if next.v >= params.v_th {
        StepOutput {
            state: NeuronState::new(params.c, next.u + params.d),
            fired: true,
            emitted_v: params.v_th,
        }
    } else {
        StepOutput {
            state: next,
            fired: false,
            emitted_v: next.v,
        }
    }
}

/// Spike times of one run, in integration steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub spike_steps: Vec<usize>,
    pub dt: f64,
    /// Number of integrated steps.
    pub n_steps: usize,
    /// `trace[s]` is the emitted membrane potential after step `s`.
    pub trace: Option<Vec<f64>>,
}

impl SpikeTrain {
    pub fn empty(dt: f64, n_steps: usize) -> Self {
        SpikeTrain {
            spike_steps: Vec::new(),
            dt,
            n_steps,
            trace: None,
        }
    }

    pub fn spike_times_ms(&self) -> impl Iterator<Item = f64> + '_ {
        self.spike_steps.iter().map(move |&s| s as f64 * self.dt)
    }

    pub fn len(&self) -> usize {
        self.spike_steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spike_steps.is_empty()
    }

    /// Spikes with step index in `range`.
    pub fn spikes_in(&self, range: std::ops::Range<usize>) -> &[usize] {
        let lo = self.spike_steps.partition_point(|&s| s < range.start);
        let hi = self.spike_steps.partition_point(|&s| s < range.end);
        &self.spike_steps[lo..hi]
    }

    pub fn duration_ms(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

/// Options for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub n_steps: usize,
    pub record_trace: bool,
}

impl SimOptions {
    pub fn for_duration(duration_ms: f64, dt: f64) -> Self {
        SimOptions {
            dt,
            n_steps: (duration_ms / dt).round() as usize,
            record_trace: false,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

/// Integrates `params` from `initial` for `opts.n_steps` steps. The input
/// current at step `s` is sampled at `t = s · dt`.
pub fn simulate(
    params: &NeuronParams,
    initial: NeuronState,
    input: &Stimulus,
    opts: SimOptions,
) -> Result<SpikeTrain, NeuronError> {
    simulate_with(params, initial, |t| input.current_at(t), opts)
}

/// Like [`simulate`] but with an arbitrary input function of time (ms).
pub fn simulate_with<F>(
    params: &NeuronParams,
    initial: NeuronState,
    mut input: F,
    opts: SimOptions,
) -> Result<SpikeTrain, NeuronError>
where
    F: FnMut(f64) -> f64,
{
    let SimOptions {
        dt,
        n_steps,
        record_trace,
    } = opts;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(NeuronError::InvalidDt(dt));
    }
    if n_steps == 0 {
        return Err(NeuronError::InvalidParams("n_steps must be at least 1".into()));
    }
    params.validate()?;
    let mut trace = record_trace.then(|| Vec::with_capacity(n_steps));
    let mut spikes = Vec::new();
    let mut state = initial;
    for s in 0..n_steps {
        let i_in = input(s as f64 * dt);
        let (dv, du) = derivative(params, state, i_in);
        let next = NeuronState::new(state.v + dt * dv, state.u + dt * du);
        if !next.is_finite() {
            return Err(NeuronError::NonFinite {
                step: s,
                v: next.v,
                u: next.u,
            });
        }
        let out = apply_reset(params, next);
        if out.fired {
            spikes.push(s);
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(out.emitted_v);
        }
        state = out.state;
    }
    Ok(SpikeTrain {
        spike_steps: spikes,
        dt,
        n_steps,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tonic(model: ModelKind, k: KCoeffs) -> NeuronParams {
        NeuronParams::new(model, 0.02, 0.2, -65.0, 6.0, k).unwrap()
    }

    #[test]
    fn nullcline_vertex_values() {
        assert_eq!(nullcline_value(ModelKind::Original, KCoeffs::default(), -62.5), -16.25);
        assert_eq!(nullcline_value(ModelKind::Pwl2, KCoeffs::two(0.75, 20.0), -62.5), -20.0);
        let v = nullcline_value(ModelKind::Pwl4, KCoeffs::new(0.375, 0.75, 11.0), -62.5);
        assert!((v - (-16.5)).abs() < 1e-12);
        let v3 = nullcline_value(ModelKind::Pwl3, KCoeffs::new(0.625, 5.8, 6.4), -62.5);
        assert!((v3 - (-15.95)).abs() < 1e-12);
    }

    #[test]
    fn discretized_vertex_is_at_minus_64() {
        let f = |v| nullcline_value(ModelKind::OriginalDiscretized, KCoeffs::default(), v);
        assert_eq!(f(-64.0), 12.0);
        assert!(f(-63.0) > 12.0 && f(-65.0) > 12.0);
    }

    #[test]
    fn derivative_at_rest_is_zero() {
        let p = tonic(ModelKind::Original, KCoeffs::default());
        let (dv, du) = derivative(&p, NeuronState::new(-70.0, -14.0), 0.0);
        assert!(dv.abs() < 1e-12 && du.abs() < 1e-12);
    }

    #[test]
    fn derivative_pwl2_cancels_input() {
        let p = tonic(ModelKind::Pwl2, KCoeffs::two(0.75, 20.0));
        let (dv, du) = derivative(&p, NeuronState::new(-62.5, 0.0), 20.0);
        assert_eq!(dv, 0.0);
        assert_eq!(du, 0.02 * 0.2 * -62.5);
    }

    #[test]
    fn derivative_pwl3_at_breakpoint() {
        let p = tonic(ModelKind::Pwl3, KCoeffs::new(0.625, 5.8, 6.4));
        let (dv, _) = derivative(&p, NeuronState::new(-62.5, 0.0), 0.0);
        assert!((dv + 15.95).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_step_is_stationary() {
        let p = tonic(ModelKind::Original, KCoeffs::default());
        let s = NeuronState::new(-70.0, -14.0);
        let out = step(&p, s, 0.0, 0.1).unwrap();
        assert!(!out.fired);
        assert!((out.state.v - s.v).abs() < 1e-12 && (out.state.u - s.u).abs() < 1e-12);
    }

    #[test]
    fn reset_rule_equalizes_spike() {
        let p = tonic(ModelKind::Original, KCoeffs::default());
        let s = NeuronState::new(31.0, 2.0);
        let out = step(&p, s, 0.0, DEFAULT_DT).unwrap();
        assert!(out.fired);
        assert_eq!(out.emitted_v, 30.0);
        assert_eq!(out.state.v, -65.0);
        let (_, du) = derivative(&p, s, 0.0);
        assert_eq!(out.state.u, s.u + DEFAULT_DT * du + 6.0);
    }

    #[test]
    fn step_rejects_bad_dt_and_divergence() {
        let p = tonic(ModelKind::Original, KCoeffs::default());
        assert!(matches!(
            step(&p, NeuronState::new(-65.0, 0.0), 0.0, 0.0),
            Err(NeuronError::InvalidDt(_))
        ));
        let r = step(&p, NeuronState::new(1e200, 0.0), 0.0, 1.0);
        assert!(matches!(r, Err(NeuronError::NonFinite { .. })));
        let r = step(&p, NeuronState::new(-65.0, 0.0), f64::NAN, 1.0);
        assert!(matches!(r, Err(NeuronError::NonFinite { .. })));
    }

    #[test]
    fn params_validation() {
        assert!(NeuronParams::new(ModelKind::Original, 0.02, 0.2, 40.0, 6.0, KCoeffs::default()).is_err());
        assert!(NeuronParams::new(ModelKind::Original, 0.0, 0.2, -65.0, 6.0, KCoeffs::default()).is_err());
        assert!(NeuronParams::new(ModelKind::Pwl3, 0.02, 0.2, -65.0, 6.0, KCoeffs::two(0.5, 7.0)).is_err());
        assert!(NeuronParams::new(ModelKind::Pwl2, 0.02, 0.2, -65.0, 6.0, KCoeffs::two(0.5, 7.0)).is_ok());
    }

    #[test]
    fn zero_input_stays_silent() {
        for (model, k) in [
            (ModelKind::Original, KCoeffs::default()),
            (ModelKind::Pwl2, KCoeffs::two(0.75, 20.0)),
            (ModelKind::Pwl3, KCoeffs::new(0.625, 5.8, 6.4)),
            (ModelKind::Pwl4, KCoeffs::new(0.375, 0.75, 11.0)),
        ] {
            let p = tonic(model, k);
            let tr = simulate(
                &p,
                NeuronState::resting(&p, -70.0),
                &Stimulus::Constant(0.0),
                SimOptions::for_duration(300.0, 0.0625),
            )
            .unwrap();
            assert!(tr.is_empty(), "{model} fired at rest");
        }
    }

    #[test]
    fn trace_is_clamped_at_spikes() {
        let p = tonic(ModelKind::Original, KCoeffs::default());
        let tr = simulate(
            &p,
            NeuronState::resting(&p, -70.0),
            &Stimulus::Constant(14.0),
            SimOptions::for_duration(300.0, 0.0625).with_trace(),
        )
        .unwrap();
        let trace = tr.trace.as_ref().unwrap();
        assert_eq!(trace.len(), tr.n_steps);
        assert!(!tr.is_empty());
        for &s in &tr.spike_steps {
            assert_eq!(trace[s], 30.0);
        }
        assert!(trace.iter().all(|&v| v <= 30.0));
        assert!(tr.spike_steps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn slope_matches_finite_difference() {
        let k4 = KCoeffs::new(0.375, 0.75, 11.0);
        for model in ModelKind::ALL {
            let k = match model {
                ModelKind::Pwl2 => KCoeffs::two(0.75, 20.0),
                ModelKind::Pwl3 => KCoeffs::new(0.625, 5.8, 6.4),
                _ => k4,
            };
            for v in [-90.0, -70.3, -55.1, -40.0, 0.0, 25.0] {
                let h = 1e-6;
                let fd = (nullcline_value(model, k, v + h) - nullcline_value(model, k, v - h)) / (2.0 * h);
                assert!((fd - nullcline_slope(model, k, v)).abs() < 1e-6, "{model} at {v}");
            }
        }
    }

    #[test]
    fn model_kind_parses() {
        assert_eq!("2pwl".parse::<ModelKind>().unwrap(), ModelKind::Pwl2);
        assert_eq!("Original".parse::<ModelKind>().unwrap(), ModelKind::Original);
        assert!("pwl5".parse::<ModelKind>().is_err());
    }
}
