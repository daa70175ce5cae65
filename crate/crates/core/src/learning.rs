//! Two-layer rate-coded classifier trained with a supervised spike-rate
//! rule.
//!
//! Each output neuron receives `I_j = Σ_i I_i W_ij + I_0`, where `I_i` is the
//! bipolar pixel code. Whenever output `j` fires, its inter-spike counter is
//! compared with the target period `t_j` and every weight of column `j`
//! moves by `α · I_i · (counter_j − t_j)`. The target output is driven
//! towards `f_high`, all others towards `f_low`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datapath::{FixedConfig, FixedNeuron, FixedState};
use crate::fixed::{FixedError, QFormat, FRAC_BITS};
use crate::neuron::{step, KCoeffs, ModelKind, NeuronError, NeuronParams, NeuronState};

#[derive(Debug, Error)]
pub enum LearningError {
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
    #[error("output neuron stays silent at the bias current {current}")]
    NoFiring { current: f64 },
    #[error("label {label} outside 0..{n_outputs}")]
    LabelOutOfRange { label: usize, n_outputs: usize },
    #[error("bad dataset file {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error(transparent)]
    Fixed(#[from] FixedError),
    #[error(transparent)]
    Neuron(#[from] NeuronError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Binary bitmap; `true` is a black pixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<bool>,
    pub label: usize,
}

impl Pattern {
    /// Black → +1, white → −1.
    pub fn bipolar(&self) -> impl Iterator<Item = f64> + '_ {
        self.pixels.iter().map(|&p| if p { 1.0 } else { -1.0 })
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Float,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub n_inputs: usize,
    pub n_outputs: usize,
    /// Learning rate `α = 2^−alpha_shift`.
    pub alpha_shift: u32,
    /// Disables learning when set; `α = 0`.
    #[serde(default)]
    pub frozen: bool,
    /// Bias current; found by bisection when absent.
    pub i_bias: Option<f64>,
    pub f_high: f64,
    pub f_low: f64,
    pub window_ms: f64,
    pub dt: f64,
    pub epochs: usize,
    pub seed: u64,
    pub model: ModelKind,
    #[serde(default)]
    pub k: KCoeffs,
    pub backend: Backend,
}

impl LearnerConfig {
    pub fn new(n_inputs: usize, n_outputs: usize) -> Self {
        LearnerConfig {
            n_inputs,
            n_outputs,
            alpha_shift: 16,
            frozen: false,
            i_bias: None,
            f_high: 80.0,
            f_low: 10.0,
            window_ms: 250.0,
            dt: 1.0 / 16.0,
            epochs: 5,
            seed: 1,
            model: ModelKind::Original,
            k: KCoeffs::default(),
            backend: Backend::Float,
        }
    }

    pub fn validate(&self) -> Result<(), LearningError> {
        let bad = |m: String| Err(LearningError::InvalidConfig(m));
        if self.n_inputs == 0 || self.n_outputs == 0 {
            return bad("need at least one input and one output".into());
        }
        if !(self.f_low > 0.0 && self.f_high > self.f_low && self.f_high.is_finite()) {
            return bad(format!("need f_high > f_low > 0, got {} / {}", self.f_high, self.f_low));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.alpha_shift > 40 {
            return bad(format!("alpha_shift {} too large", self.alpha_shift));
        }
        let expected_spikes = self.window_ms * self.f_low / 1000.0;
        if expected_spikes.is_nan() || expected_spikes < 2.0 {
            return bad(format!(
                "window of {} ms holds fewer than two spikes at {} Hz",
                self.window_ms, self.f_low
            ));
        }
        if self.backend == Backend::Fixed && (self.dt - self.fixed_config().dt_ms()).abs() > 1e-15 {
            return bad(format!("fixed backend needs dt = 2^-k ms, got {}", self.dt));
        }
        if let Some(b) = self.i_bias {
            if !b.is_finite() {
                return bad("bias current must be finite".into());
            }
        }
        self.k.validate(self.model)?;
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        if self.frozen {
            0.0
        } else {
            2f64.powi(-(self.alpha_shift as i32))
        }
    }

    /// Target period in steps, `round(1 / (f · dt))`.
    pub fn period_steps(&self, f_hz: f64) -> u32 {
        (1000.0 / (f_hz * self.dt)).round() as u32
    }

    pub fn t_high(&self) -> u32 {
        self.period_steps(self.f_high)
    }

    pub fn t_low(&self) -> u32 {
        self.period_steps(self.f_low)
    }

    pub fn window_steps(&self) -> usize {
        (self.window_ms / self.dt).round() as usize
    }

    /// Tonic-spiking output neuron.
    pub fn neuron_params(&self) -> Result<NeuronParams, LearningError> {
        Ok(NeuronParams::new(self.model, 0.02, 0.2, -65.0, 6.0, self.k)?)
    }

    fn fixed_config(&self) -> FixedConfig {
        let shift = (-self.dt.log2()).round().max(0.0) as u32;
        FixedConfig {
            dt_shift: shift,
            ..FixedConfig::default()
        }
    }
}

/// Output neuron of either backend.
#[derive(Debug, Clone)]
enum Unit {
    Float(NeuronParams, f64),
    Fixed(Box<FixedNeuron>),
}

#[derive(Debug, Clone, Copy)]
enum UnitState {
    Float(NeuronState),
    Fixed(FixedState),
}

impl Unit {
    fn build(cfg: &LearnerConfig) -> Result<Unit, LearningError> {
        let p = cfg.neuron_params()?;
        Ok(match cfg.backend {
            Backend::Float => Unit::Float(p, cfg.dt),
            Backend::Fixed => Unit::Fixed(Box::new(FixedNeuron::compile(&p, cfg.fixed_config())?)),
        })
    }

    fn rest(&self) -> UnitState {
        match self {
            Unit::Float(p, _) => UnitState::Float(NeuronState::resting(p, -65.0)),
            Unit::Fixed(n) => UnitState::Fixed(FixedState::encode(-65.0, n.params.b * -65.0)),
        }
    }

    fn step(&self, s: &mut UnitState, i: f64) -> Result<bool, LearningError> {
        match (self, s) {
            (Unit::Float(p, dt), UnitState::Float(st)) => {
                let out = step(p, *st, i, *dt)?;
                *st = out.state;
                Ok(out.fired)
            }
            (Unit::Fixed(n), UnitState::Fixed(st)) => {
                let out = n.step_counted(*st, QFormat::Q8_12.encode(i).0, &mut Default::default());
                *st = out.state;
                Ok(out.fired)
            }
            _ => unreachable!("state built by the same unit"),
        }
    }
}

/// Mean firing rate over a window: from the mean inter-spike interval when
/// at least two spikes occur, otherwise from the spike count.
pub fn measured_rate_hz(spikes: &[usize], dt: f64, window_steps: usize) -> f64 {
    if spikes.len() >= 2 {
        let span = (spikes[spikes.len() - 1] - spikes[0]) as f64 * dt;
        1000.0 * (spikes.len() - 1) as f64 / span
    } else {
        spikes.len() as f64 * 1000.0 / (window_steps as f64 * dt)
    }
}

/// Weights and counters of a learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub config: LearnerConfig,
    /// Resolved bias current.
    pub i_bias: f64,
    /// Row-major `M × n_outputs`.
    pub weights: Vec<f64>,
    /// Steps since the last spike of each output.
    pub counters: Vec<u32>,
}

/// One presentation of a pattern.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Presentation {
    pub spikes: Vec<Vec<usize>>,
    pub rates_hz: Vec<f64>,
    pub updates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub class: usize,
    pub frequency_hz: f64,
}

/// Bipolar dot product plus bias.
pub fn input_current(pattern: &[f64], column: &[f64], i_bias: f64) -> Result<f64, LearningError> {
    if pattern.len() != column.len() {
        return Err(LearningError::DimensionMismatch {
            expected: column.len(),
            got: pattern.len(),
        });
    }
    Ok(pattern.iter().zip(column).map(|(x, w)| x * w).sum::<f64>() + i_bias)
}

/// `α · I_i · (counter − t)`.
pub fn weight_update(i_i: f64, counter: u32, target: u32, alpha: f64) -> f64 {
    alpha * i_i * (counter as f64 - target as f64)
}

/// Fixed-point form of [`weight_update`]: the counter difference is shifted
/// right by `alpha_shift` in Q8.12 raw units.
pub fn weight_update_raw(i_i: f64, counter: u32, target: u32, alpha_shift: u32) -> i64 {
    let diff = (counter as i64 - target as i64) * i_i.signum() as i64;
    let wide = diff << FRAC_BITS;
    wide >> alpha_shift
}

/// Smallest constant current at which the output fires at `f_low` or more.
pub fn calibrate_bias(cfg: &LearnerConfig) -> Result<f64, LearningError> {
    let unit = Unit::build(cfg)?;
    let n = cfg.window_steps();
    let rate = |i: f64| -> Result<f64, LearningError> {
        let mut s = unit.rest();
        let mut spikes = Vec::new();
        for t in 0..n {
            if unit.step(&mut s, i)? {
                spikes.push(t);
            }
        }
        Ok(measured_rate_hz(&spikes, cfg.dt, n))
    };
    let (mut lo, mut hi) = (0.0, 200.0);
    if rate(hi)? < cfg.f_low {
        return Err(LearningError::NoFiring { current: hi });
    }
    if rate(lo)? >= cfg.f_low {
        return Ok(lo);
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? >= cfg.f_low {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(match cfg.backend {
        Backend::Float => hi,
        Backend::Fixed => (hi * (1u64 << FRAC_BITS) as f64).ceil() / (1u64 << FRAC_BITS) as f64,
    })
}

impl LearnerState {
    /// Zero weights; the bias is calibrated unless configured.
    pub fn new(config: LearnerConfig) -> Result<Self, LearningError> {
        config.validate()?;
        let i_bias = match config.i_bias {
            Some(b) => b,
            None => calibrate_bias(&config)?,
        };
        Ok(LearnerState {
            config,
            i_bias,
            weights: vec![0.0; config.n_inputs * config.n_outputs],
            counters: vec![0; config.n_outputs],
        })
    }

    pub fn weight(&self, input: usize, output: usize) -> f64 {
        self.weights[input * self.config.n_outputs + output]
    }

    pub fn column(&self, output: usize) -> Vec<f64> {
        (0..self.config.n_inputs).map(|i| self.weight(i, output)).collect()
    }

    fn check(&self, pattern: &Pattern) -> Result<Vec<f64>, LearningError> {
        if pattern.len() != self.config.n_inputs {
            return Err(LearningError::DimensionMismatch {
                expected: self.config.n_inputs,
                got: pattern.len(),
            });
        }
        Ok(pattern.bipolar().collect())
    }

    fn current(&self, x: &[f64], output: usize) -> f64 {
        let n_out = self.config.n_outputs;
        let i = x
            .iter()
            .enumerate()
            .map(|(i, xi)| xi * self.weights[i * n_out + output])
            .sum::<f64>()
            + self.i_bias;
        match self.config.backend {
            Backend::Float => i,
            Backend::Fixed => QFormat::Q8_12.encode(i).0.to_f64(),
        }
    }

    fn apply_update(&mut self, x: &[f64], output: usize, counter: u32, target: u32) {
        let n_out = self.config.n_outputs;
        let cfg = self.config;
        if cfg.frozen {
            return;
        }
        for (i, &xi) in x.iter().enumerate() {
            let w = &mut self.weights[i * n_out + output];
            match cfg.backend {
                Backend::Float => *w += weight_update(xi, counter, target, cfg.alpha()),
                Backend::Fixed => {
                    let raw = (*w * (1u64 << FRAC_BITS) as f64) as i64
                        + weight_update_raw(xi, counter, target, cfg.alpha_shift);
                    *w = QFormat::Q8_12.narrow(raw).0.to_f64();
                }
            }
        }
    }

    /// Presents `pattern` for one window. With `target` set, the weights of
    /// every output are updated on each of its spikes after the first; an
    /// output that stays silent the whole window is updated once with the
    /// window length as its counter.
    pub fn present(&mut self, pattern: &Pattern, target: Option<usize>) -> Result<Presentation, LearningError> {
        let x = self.check(pattern)?;
        let unit = Unit::build(&self.config)?;
        let n = self.config.window_steps();
        let mut spikes = vec![Vec::new(); self.config.n_outputs];
        let mut updates = 0;
        for (j, fired) in spikes.iter_mut().enumerate() {
            let goal = target.map(|t| {
                if t == j {
                    self.config.t_high()
                } else {
                    self.config.t_low()
                }
            });
            let mut s = unit.rest();
            let mut i_j = self.current(&x, j);
            let mut counter = 0u32;
            for t in 0..n {
                counter += 1;
                if unit.step(&mut s, i_j)? {
                    if let (Some(g), false) = (goal, fired.is_empty()) {
                        self.apply_update(&x, j, counter, g);
                        i_j = self.current(&x, j);
                        updates += 1;
                    }
                    fired.push(t);
                    counter = 0;
                }
            }
            if let (Some(g), true) = (goal, fired.is_empty()) {
                self.apply_update(&x, j, counter, g);
                updates += 1;
            }
            self.counters[j] = counter;
        }
        let rates_hz = spikes.iter().map(|s| measured_rate_hz(s, self.config.dt, n)).collect();
        Ok(Presentation {
            spikes,
            rates_hz,
            updates,
        })
    }

    /// Output rates for `pattern` without learning.
    pub fn respond(&self, pattern: &Pattern) -> Result<Vec<f64>, LearningError> {
        self.clone().present(pattern, None).map(|p| p.rates_hz)
    }

    /// Mean inter-spike interval of `output` in steps, if it fires twice.
    pub fn mean_period_steps(&self, pattern: &Pattern, output: usize) -> Result<Option<f64>, LearningError> {
        let p = self.clone().present(pattern, None)?;
        let s = &p.spikes[output];
        Ok((s.len() >= 2).then(|| (s[s.len() - 1] - s[0]) as f64 / (s.len() - 1) as f64))
    }

    /// Writes `m,n_outputs,format` followed by one row of weights per input.
    pub fn write_weights_csv<W: Write>(&self, out: W) -> Result<(), LearningError> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["m", "n_outputs", "format"])?;
        let format = match self.config.backend {
            Backend::Float => "f64",
            Backend::Fixed => "q8.12",
        };
        w.write_record([
            self.config.n_inputs.to_string(),
            self.config.n_outputs.to_string(),
            format.into(),
        ])?;
        for i in 0..self.config.n_inputs {
            w.write_record((0..self.config.n_outputs).map(|j| self.weight(i, j).to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads weights written by [`LearnerState::write_weights_csv`] into
    /// this state.
    pub fn read_weights_csv<R: Read>(&mut self, input: R) -> Result<(), LearningError> {
        let perr = |msg: String| LearningError::Parse {
            path: "weights".into(),
            msg,
        };
        let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(input);
        let mut rows = r.records();
        let head = rows.next().ok_or_else(|| perr("missing header row".into()))??;
        let m: usize = head[0].parse().map_err(|e| perr(format!("{e}")))?;
        let n: usize = head[1].parse().map_err(|e| perr(format!("{e}")))?;
        if m != self.config.n_inputs || n != self.config.n_outputs {
            return Err(LearningError::DimensionMismatch {
                expected: self.config.n_inputs * self.config.n_outputs,
                got: m * n,
            });
        }
        let mut weights = Vec::with_capacity(m * n);
        for rec in rows {
            for v in rec?.iter() {
                weights.push(v.parse::<f64>().map_err(|e| perr(format!("{e}")))?);
            }
        }
        if weights.len() != m * n {
            return Err(LearningError::DimensionMismatch {
                expected: m * n,
                got: weights.len(),
            });
        }
        self.weights = weights;
        Ok(())
    }
}

/// Presentation order: round-robin over classes, each class list shuffled
/// once with `seed`.
pub fn training_order(patterns: &[Pattern], n_classes: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, p) in patterns.iter().enumerate() {
        if p.label < n_classes {
            per_class[p.label].push(i);
        }
    }
    for list in &mut per_class {
        list.shuffle(&mut rng);
    }
    let longest = per_class.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .flat_map(|r| per_class.iter().filter_map(move |l| l.get(r).copied()))
        .collect()
}

/// Trains for `config.epochs` passes over `patterns`.
pub fn train(patterns: &[Pattern], config: LearnerConfig) -> Result<(LearnerState, Vec<EpochLog>), LearningError> {
    let mut state = LearnerState::new(config)?;
    let log = train_state(&mut state, patterns, config.epochs)?;
    Ok((state, log))
}

/// Continues training an existing state.
pub fn train_state(
    state: &mut LearnerState,
    patterns: &[Pattern],
    epochs: usize,
) -> Result<Vec<EpochLog>, LearningError> {
    let n_out = state.config.n_outputs;
    for p in patterns {
        if p.label >= n_out {
            return Err(LearningError::LabelOutOfRange {
                label: p.label,
                n_outputs: n_out,
            });
        }
    }
    let order = training_order(patterns, n_out, state.config.seed);
    let mut log = Vec::new();
    for epoch in 0..epochs {
        let mut sum = vec![0.0; n_out];
        let mut count = vec![0usize; n_out];
        for &idx in &order {
            let p = &patterns[idx];
            let pres = state.present(p, Some(p.label))?;
            sum[p.label] += pres.rates_hz[p.label];
            count[p.label] += 1;
        }
        for class in 0..n_out {
            if count[class] > 0 {
                log.push(EpochLog {
                    epoch,
                    class,
                    frequency_hz: sum[class] / count[class] as f64,
                });
            }
        }
    }
    Ok(log)
}

pub fn write_log_csv<W: Write>(log: &[EpochLog], out: W) -> Result<(), LearningError> {
    let mut w = csv::Writer::from_writer(out);
    for e in log {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

/// Classification result over a test set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub predicted: Vec<usize>,
    /// Mean output rate per `[true class][output]`.
    pub frequency_table: Vec<Vec<f64>>,
}

/// Predicted class is the output with the highest rate; ties go to the
/// lowest index.
pub fn evaluate(state: &LearnerState, patterns: &[Pattern]) -> Result<Evaluation, LearningError> {
    let n_out = state.config.n_outputs;
    let rates: Vec<Vec<f64>> = patterns
        .par_iter()
        .map(|p| state.respond(p))
        .collect::<Result<_, _>>()?;
    let predicted: Vec<usize> = rates
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
                .0
        })
        .collect();
    let correct = predicted
        .iter()
        .zip(patterns)
        .filter(|(p, pat)| **p == pat.label)
        .count();
    let mut table = vec![vec![0.0; n_out]; n_out];
    let mut counts = vec![0usize; n_out];
    for (r, p) in rates.iter().zip(patterns) {
        if p.label < n_out {
            counts[p.label] += 1;
            for (t, x) in table[p.label].iter_mut().zip(r) {
                *t += x;
            }
        }
    }
    for (row, c) in table.iter_mut().zip(&counts) {
        if *c > 0 {
            row.iter_mut().for_each(|x| *x /= *c as f64);
        }
    }
    Ok(Evaluation {
        accuracy: if patterns.is_empty() {
            0.0
        } else {
            correct as f64 / patterns.len() as f64
        },
        predicted,
        frequency_table: table,
    })
}

/// Labeled train/test split.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub train: Vec<Pattern>,
    pub test: Vec<Pattern>,
}

impl Dataset {
    pub fn n_inputs(&self) -> usize {
        self.train.first().or(self.test.first()).map_or(0, Pattern::len)
    }
}

/// Random bipolar prototypes per class; each writer flips every pixel of
/// its prototype with probability `flip_prob`.
pub fn synthetic_dataset(
    n_classes: usize,
    rows: usize,
    cols: usize,
    train_writers: usize,
    test_writers: usize,
    flip_prob: f64,
    seed: u64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protos: Vec<Vec<bool>> = (0..n_classes)
        .map(|_| (0..rows * cols).map(|_| rng.random_bool(0.5)).collect())
        .collect();
    let writer = |label: usize, rng: &mut ChaCha8Rng| Pattern {
        rows,
        cols,
        pixels: protos[label].iter().map(|&p| p ^ rng.random_bool(flip_prob)).collect(),
        label,
    };
    let mut ds = Dataset {
        class_names: (0..n_classes)
            .map(|c| char::from(b'A' + (c % 26) as u8).to_string())
            .collect(),
        ..Dataset::default()
    };
    for c in 0..n_classes {
        for _ in 0..train_writers {
            ds.train.push(writer(c, &mut rng));
        }
        for _ in 0..test_writers {
            ds.test.push(writer(c, &mut rng));
        }
    }
    ds
}

/// Parses a plain (`P1`) or raw (`P4`) portable bitmap.
pub fn parse_pbm(bytes: &[u8]) -> Result<(usize, usize, Vec<bool>), String> {
    let mut pos = 0;
    let mut token = |bytes: &[u8]| -> Option<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token(bytes).ok_or("empty file")?;
    let cols: usize = token(bytes).and_then(|t| t.parse().ok()).ok_or("bad width")?;
    let rows: usize = token(bytes).and_then(|t| t.parse().ok()).ok_or("bad height")?;
    let mut pixels = Vec::with_capacity(rows * cols);
    match magic.as_str() {
        "P1" => {
            let rest = &bytes[pos..];
            for &b in rest {
                match b {
                    b'0' => pixels.push(false),
                    b'1' => pixels.push(true),
                    b if b.is_ascii_whitespace() => {}
                    _ => return Err(format!("unexpected byte {b:#x} in pixel data")),
                }
                if pixels.len() == rows * cols {
                    break;
                }
            }
        }
        "P4" => {
            let data = bytes.get(pos + 1..).ok_or("missing pixel data")?;
            let stride = cols.div_ceil(8);
            if data.len() < stride * rows {
                return Err("truncated pixel data".into());
            }
            for r in 0..rows {
                for c in 0..cols {
                    pixels.push(data[r * stride + c / 8] & (0x80 >> (c % 8)) != 0);
                }
            }
        }
        m => return Err(format!("unsupported magic `{m}`")),
    }
    if pixels.len() != rows * cols {
        return Err(format!("expected {} pixels, found {}", rows * cols, pixels.len()));
    }
    Ok((rows, cols, pixels))
}

/// Plain `P1` encoding.
pub fn write_pbm<W: Write>(p: &Pattern, mut out: W) -> std::io::Result<()> {
    writeln!(out, "P1\n{} {}", p.cols, p.rows)?;
    for r in 0..p.rows {
        let line: Vec<&str> = (0..p.cols)
            .map(|c| if p.pixels[r * p.cols + c] { "1" } else { "0" })
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

#[derive(Debug, Deserialize, Serialize)]
struct ManifestRow {
    path: String,
    label: String,
    #[serde(default)]
    split: Option<String>,
}

/// Loads a dataset from a CSV manifest with columns `path,label[,split]`.
/// Paths are relative to the manifest; rows without `split` or with
/// `split = train` go to the training set, `split = test` to the test set.
pub fn load_manifest(manifest: &Path) -> Result<Dataset, LearningError> {
    let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut rdr = csv::Reader::from_path(manifest)?;
    let mut ds = Dataset::default();
    let mut shape = None;
    for row in rdr.deserialize() {
        let row: ManifestRow = row?;
        let label = match ds.class_names.iter().position(|c| *c == row.label) {
            Some(i) => i,
            None => {
                ds.class_names.push(row.label.clone());
                ds.class_names.len() - 1
            }
        };
        let path: PathBuf = base.join(&row.path);
        let bytes = std::fs::read(&path)?;
        let perr = |msg: String| LearningError::Parse {
            path: path.display().to_string(),
            msg,
        };
        let (rows, cols, pixels) = parse_pbm(&bytes).map_err(perr)?;
        if *shape.get_or_insert((rows, cols)) != (rows, cols) {
            return Err(perr(format!("size {rows}x{cols} differs from the first bitmap")));
        }
        let p = Pattern {
            rows,
            cols,
            pixels,
            label,
        };
        match row.split.as_deref().map(str::trim) {
            None | Some("") | Some("train") => ds.train.push(p),
            Some("test") => ds.test.push(p),
            Some(s) => return Err(perr(format!("unknown split `{s}`"))),
        }
    }
    Ok(ds)
}

/// Writes every pattern as a PBM file plus `manifest.csv` into `dir`.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<PathBuf, LearningError> {
    std::fs::create_dir_all(dir)?;
    let manifest = dir.join("manifest.csv");
    let mut w = csv::Writer::from_path(&manifest)?;
    for (split, list) in [("train", &ds.train), ("test", &ds.test)] {
        for (i, p) in list.iter().enumerate() {
            let name = format!("{split}_{}_{i:04}.pbm", ds.class_names[p.label]);
            write_pbm(p, std::fs::File::create(dir.join(&name))?)?;
            w.serialize(ManifestRow {
                path: name,
                label: ds.class_names[p.label].clone(),
                split: Some(split.into()),
            })?;
        }
    }
    w.flush()?;
    Ok(manifest)
}
