//! Randomly coupled excitatory/inhibitory networks with noisy thalamic
//! input, spike rasters, population rhythm and spike-timing error (MRE).
//!
//! Construction follows the Izhikevich (2003) random cortical network:
//! excitatory cells lean regular spiking (`c = −65 + 15 r²`, `d = 8 − 6 r²`),
//! inhibitory cells lean fast spiking (`a = 0.02 + 0.08 r`,
//! `b = 0.25 − 0.05 r`), excitatory weights are `w_e · U(0,1)` and inhibitory
//! weights `−w_i · U(0,1)`. Synapses inject a current pulse on the step after
//! the presynaptic spike.
//!
//! Thalamic input is a constant bias plus noise from a counter-based
//! generator keyed by `(seed, neuron, sample)`, so every model variant sees
//! the same noise and the result does not depend on update order.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neuron::{
    nullcline_value, step, KCoeffs, ModelKind, NeuronError, NeuronParams, NeuronState, SpikeTrain, BREAKPOINT,
    ORIGINAL_VERTEX,
};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("neuron {neuron} diverged at step {step}")]
    NonFinite { neuron: usize, step: usize },
    #[error("reference raster has no spikes")]
    EmptyReference,
    #[error("rasters hold {reference} and {candidate} neurons")]
    CountMismatch { reference: usize, candidate: usize },
    #[error("rhythm estimation needs at least {min_ms} ms, raster covers {ms} ms")]
    TooShort { ms: f64, min_ms: f64 },
    #[error("population rate has no spectral peak")]
    NoPeak,
    #[error("bad raster file: {0}")]
    Parse(String),
    #[error(transparent)]
    Neuron(#[from] NeuronError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronClass {
    Excitatory,
    Inhibitory,
}

impl NeuronClass {
    pub fn label(self) -> &'static str {
        match self {
            NeuronClass::Excitatory => "exc",
            NeuronClass::Inhibitory => "inh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_total: usize,
    pub exc_ratio: f64,
    pub seed: u64,
    pub sim_ms: f64,
    pub dt: f64,
    pub model: ModelKind,
    #[serde(default)]
    pub k: KCoeffs,
    /// Standard deviation of the thalamic input to excitatory cells.
    pub noise_exc: f64,
    pub noise_inh: f64,
    /// Upper bound of excitatory weights.
    pub exc_weight: f64,
    /// Inhibitory-to-excitatory weight magnitude ratio.
    pub inh_factor: f64,
    /// Constant part of the thalamic input; zero in the reference recipe.
    #[serde(default)]
    pub bias_exc: f64,
    #[serde(default)]
    pub bias_inh: f64,
    /// A fresh noise sample is drawn every `noise_hold_ms`.
    pub noise_hold_ms: f64,
    /// Adds `−16.25 − f(−62.5)` to every PWL neuron's input so its rheobase
    /// matches the quadratic model.
    #[serde(default)]
    pub vertex_compensation: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            n_total: 200,
            exc_ratio: 0.8,
            seed: 1,
            sim_ms: 1000.0,
            dt: 0.5,
            model: ModelKind::Original,
            k: KCoeffs::default(),
            noise_exc: 5.0,
            noise_inh: 2.0,
            exc_weight: 0.5,
            inh_factor: 2.0,
            bias_exc: 0.0,
            bias_inh: 0.0,
            noise_hold_ms: 1.0,
            vertex_compensation: false,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::InvalidConfig(m));
        if self.n_total < 2 {
            return bad(format!("n_total must be at least 2, got {}", self.n_total));
        }
        if !(0.0..=1.0).contains(&self.exc_ratio) {
            return bad(format!("exc_ratio {} outside [0, 1]", self.exc_ratio));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.sim_ms > 0.0 && self.sim_ms.is_finite()) {
            return bad(format!("dt {} / sim_ms {} must be positive", self.dt, self.sim_ms));
        }
        if !(self.noise_hold_ms > 0.0 && self.noise_hold_ms.is_finite()) {
            return bad(format!("noise_hold_ms must be positive, got {}", self.noise_hold_ms));
        }
        if !(self.bias_exc.is_finite() && self.bias_inh.is_finite()) {
            return bad("thalamic bias must be finite".into());
        }
        let nonneg = [self.noise_exc, self.noise_inh, self.exc_weight, self.inh_factor];
        if nonneg.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return bad("noise and weight scales must be finite and nonnegative".into());
        }
        self.k.validate(self.model)?;
        Ok(())
    }

    pub fn n_exc(&self) -> usize {
        (self.n_total as f64 * self.exc_ratio).round() as usize
    }

    pub fn n_steps(&self) -> usize {
        (self.sim_ms / self.dt).round() as usize
    }

    /// Tonic-spiking-dominant variant of the default network: a strong
    /// constant thalamic bias, weak noise, and PWL input compensation.
    pub fn tonic_dominant() -> NetworkConfig {
        NetworkConfig {
            noise_exc: 1.0,
            noise_inh: 0.4,
            bias_exc: 15.0,
            bias_inh: 6.0,
            vertex_compensation: true,
            ..NetworkConfig::default()
        }
    }

    /// Same network with another neuron model.
    pub fn with_model(&self, model: ModelKind, k: KCoeffs) -> NetworkConfig {
        NetworkConfig { model, k, ..*self }
    }

    /// Input offset applied to every neuron of this model.
    pub fn input_offset(&self) -> f64 {
        if self.vertex_compensation && self.model.is_pwl() {
            ORIGINAL_VERTEX - nullcline_value(self.model, self.k, BREAKPOINT)
        } else {
            0.0
        }
    }
}

/// Dense `n × n` weights; row = postsynaptic neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(n: usize) -> Self {
        WeightMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn get(&self, post: usize, pre: usize) -> f64 {
        self.data[post * self.n + pre]
    }

    pub fn set(&mut self, post: usize, pre: usize, w: f64) {
        self.data[post * self.n + pre] = w;
    }

    pub fn row(&self, post: usize) -> &[f64] {
        &self.data[post * self.n..(post + 1) * self.n]
    }

    /// Sum of the column of presynaptic neuron `pre`.
    pub fn column_sum(&self, pre: usize) -> f64 {
        (0..self.n).map(|i| self.get(i, pre)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Network {
    pub config: NetworkConfig,
    pub weights: WeightMatrix,
    pub params: Vec<NeuronParams>,
    pub classes: Vec<NeuronClass>,
}

/// Deterministic heterogeneous network from `cfg.seed`.
pub fn build_network(cfg: &NetworkConfig) -> Result<Network, NetworkError> {
    cfg.validate()?;
    let n = cfg.n_total;
    let ne = cfg.n_exc();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    for i in 0..n {
        let r: f64 = rng.random();
        let (a, b, c, d, class) = if i < ne {
            (
                0.02,
                0.2,
                -65.0 + 15.0 * r * r,
                8.0 - 6.0 * r * r,
                NeuronClass::Excitatory,
            )
        } else {
            (0.02 + 0.08 * r, 0.25 - 0.05 * r, -65.0, 2.0, NeuronClass::Inhibitory)
        };
        params.push(NeuronParams::new(cfg.model, a, b, c, d, cfg.k)?);
        classes.push(class);
    }
    let mut weights = WeightMatrix::zeros(n);
    let w_inh = cfg.exc_weight * cfg.inh_factor;
    for post in 0..n {
        for pre in 0..n {
            let r: f64 = rng.random();
            if post == pre {
                continue;
            }
            let w = if pre < ne { cfg.exc_weight * r } else { -w_inh * r };
            weights.set(post, pre, w);
        }
    }
    Ok(Network {
        config: *cfg,
        weights,
        params,
        classes,
    })
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Standard normal sample determined by `(seed, neuron, step)`.
pub fn counter_normal(seed: u64, neuron: usize, step: usize) -> f64 {
    let key = splitmix64(seed ^ splitmix64((neuron as u64) << 32 ^ step as u64));
    let h1 = splitmix64(key);
    let h2 = splitmix64(key ^ 0xD1B5_4A32_D192_ED03);
    let u1 = ((h1 >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    let u2 = (h2 >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Spike rasters of one network run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterData {
    /// Spike step indices per neuron.
    pub spikes: Vec<Vec<usize>>,
    pub classes: Vec<NeuronClass>,
    pub dt: f64,
    pub n_steps: usize,
}

impl RasterData {
    pub fn n_neurons(&self) -> usize {
        self.spikes.len()
    }

    pub fn sim_ms(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn total_spikes(&self) -> usize {
        self.spikes.iter().map(Vec::len).sum()
    }

    pub fn train(&self, neuron: usize) -> SpikeTrain {
        SpikeTrain {
            spike_steps: self.spikes[neuron].clone(),
            dt: self.dt,
            n_steps: self.n_steps,
            trace: None,
        }
    }

    /// Mean firing rate over all neurons (Hz).
    pub fn mean_rate_hz(&self) -> f64 {
        self.total_spikes() as f64 / self.n_neurons() as f64 / (self.sim_ms() / 1000.0)
    }

    /// Writes `neuron_id,class,spike_time_ms` rows ordered by neuron.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), NetworkError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["neuron_id", "class", "spike_time_ms"])?;
        for (i, s) in self.spikes.iter().enumerate() {
            for &step in s {
                w.write_record([
                    i.to_string(),
                    self.classes[i].label().to_string(),
                    (step as f64 * self.dt).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a raster written by [`RasterData::write_csv`]. Neuron count and
    /// classes must be supplied because silent neurons have no rows.
    pub fn read_csv<R: Read>(
        input: R,
        classes: Vec<NeuronClass>,
        dt: f64,
        n_steps: usize,
    ) -> Result<RasterData, NetworkError> {
        let mut spikes = vec![Vec::new(); classes.len()];
        let mut rdr = csv::Reader::from_reader(input);
        for rec in rdr.records() {
            let rec = rec?;
            let id: usize = rec[0].parse().map_err(|e| NetworkError::Parse(format!("{e}")))?;
            let t: f64 = rec[2].parse().map_err(|e| NetworkError::Parse(format!("{e}")))?;
            let slot = spikes
                .get_mut(id)
                .ok_or_else(|| NetworkError::Parse(format!("neuron {id} out of range")))?;
            slot.push((t / dt).round() as usize);
        }
        Ok(RasterData {
            spikes,
            classes,
            dt,
            n_steps,
        })
    }
}

/// Simulates the network for `cfg.sim_ms`.
pub fn run_network(net: &Network) -> Result<RasterData, NetworkError> {
    let cfg = &net.config;
    let n = cfg.n_total;
    let n_steps = cfg.n_steps();
    let mut state: Vec<NeuronState> = net.params.iter().map(|p| NeuronState::resting(p, -65.0)).collect();
    let mut spikes = vec![Vec::new(); n];
    let mut fired: Vec<usize> = Vec::new();
    let mut next_fired: Vec<usize> = Vec::new();
    let offset = cfg.input_offset();
    for s in 0..n_steps {
        next_fired.clear();
        let sample = (s as f64 * cfg.dt / cfg.noise_hold_ms + 1e-9).floor() as usize;
        for i in 0..n {
            let (sigma, bias) = match net.classes[i] {
                NeuronClass::Excitatory => (cfg.noise_exc, cfg.bias_exc),
                NeuronClass::Inhibitory => (cfg.noise_inh, cfg.bias_inh),
            };
            let row = net.weights.row(i);
            let syn: f64 = fired.iter().map(|&j| row[j]).sum();
            let input = bias + offset + sigma * counter_normal(cfg.seed, i, sample) + syn;
            let out = step(&net.params[i], state[i], input, cfg.dt)
                .map_err(|_| NetworkError::NonFinite { neuron: i, step: s })?;
            if out.fired {
                spikes[i].push(s);
                next_fired.push(i);
            }
            state[i] = out.state;
        }
        std::mem::swap(&mut fired, &mut next_fired);
    }
    Ok(RasterData {
        spikes,
        classes: net.classes.clone(),
        dt: cfg.dt,
        n_steps,
    })
}

/// Mean relative spike-timing error in percent.
///
/// The i-th spike of each candidate neuron is paired with the i-th spike of
/// the same reference neuron and contributes `|Δt / t_ref|`, with `t_ref` the
/// absolute reference spike time. Spikes without a partner are charged the
/// mean error of the matched pairs.
pub fn mre(reference: &RasterData, candidate: &RasterData) -> Result<f64, NetworkError> {
    if reference.n_neurons() != candidate.n_neurons() {
        return Err(NetworkError::CountMismatch {
            reference: reference.n_neurons(),
            candidate: candidate.n_neurons(),
        });
    }
    if reference.total_spikes() == 0 {
        return Err(NetworkError::EmptyReference);
    }
    let mut sum = 0.0;
    let mut matched = 0usize;
    let mut surplus = 0usize;
    for (r, c) in reference.spikes.iter().zip(&candidate.spikes) {
        for (&sr, &sc) in r.iter().zip(c) {
            let tr = sr as f64 * reference.dt;
            if tr == 0.0 {
                continue;
            }
            let tc = sc as f64 * candidate.dt;
            sum += ((tc - tr) / tr).abs();
            matched += 1;
        }
        surplus += r.len().abs_diff(c.len());
    }
    if matched == 0 {
        return Ok(100.0);
    }
    let mean = sum / matched as f64;
    let total = sum + surplus as f64 * mean;
    Ok(total / (matched + surplus) as f64 * 100.0)
}

/// Population rate per bin (Hz per neuron).
pub fn population_rate(raster: &RasterData, bin_ms: f64) -> Vec<f64> {
    let n_bins = (raster.sim_ms() / bin_ms).floor() as usize;
    let mut counts = vec![0.0; n_bins];
    for s in &raster.spikes {
        for &step in s {
            let b = (step as f64 * raster.dt / bin_ms).floor() as usize;
            if b < n_bins {
                counts[b] += 1.0;
            }
        }
    }
    let scale = 1000.0 / (bin_ms * raster.n_neurons() as f64);
    counts.iter().map(|c| c * scale).collect()
}

pub fn write_rate_csv<W: Write>(rate: &[f64], bin_ms: f64, out: W) -> Result<(), NetworkError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "rate"])?;
    for (i, r) in rate.iter().enumerate() {
        w.write_record([(i as f64 * bin_ms).to_string(), r.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Minimum raster length accepted by [`population_rhythm`].
pub const RHYTHM_MIN_MS: f64 = 1000.0;

/// Dominant nonzero frequency (Hz) of the binned population rate.
pub fn population_rhythm(raster: &RasterData, bin_ms: f64) -> Result<f64, NetworkError> {
    if raster.sim_ms() + 1e-9 < RHYTHM_MIN_MS {
        return Err(NetworkError::TooShort {
            ms: raster.sim_ms(),
            min_ms: RHYTHM_MIN_MS,
        });
    }
    if raster.total_spikes() == 0 {
        return Err(NetworkError::NoPeak);
    }
    let rate = population_rate(raster, bin_ms);
    let mean = rate.iter().sum::<f64>() / rate.len() as f64;
    let mut buf: Vec<Complex<f64>> = rate.iter().map(|r| Complex::new(r - mean, 0.0)).collect();
    let len = buf.len();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let (best, mag) = (1..=len / 2)
        .map(|i| (i, buf[i].norm()))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if best == 0 || mag <= 1e-12 {
        return Err(NetworkError::NoPeak);
    }
    Ok(best as f64 * 1000.0 / (len as f64 * bin_ms))
}
