//! Analytic nullcline errors, the trace cost function and the exhaustive
//! K-coefficient grid search.
//!
//! The cost function is the mean squared relative error between two
//! membrane-potential traces after both are synchronized on their first
//! threshold crossing past the settle time:
//!
//! `CF = (1/N) Σ (v_ref(i) − v_cand(i))² / v_ref(i)²`
//!
//! Samples where `|v_ref| < div_guard_mv` are skipped (the trace crosses
//! zero twice per spike, so the raw ratio is singular) and `N` shrinks
//! accordingly. This changes absolute CF values.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixed::decompose_constant;
use crate::neuron::{
    nullcline_value, simulate, KCoeffs, ModelKind, NeuronError, NeuronParams, NeuronState, SimOptions, SpikeTrain,
    BREAKPOINT, ORIGINAL_VERTEX,
};
use crate::registry::NeuronType;
use crate::stimulus::Stimulus;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("need {needed} samples after synchronization, only {available} available")]
    InsufficientSamples { needed: usize, available: usize },
    #[error("every compared reference sample is within the division guard of zero")]
    DivisionGuard,
    #[error("{which} trace never reaches threshold inside the sync window")]
    NoSpikeFound { which: &'static str },
    #[error("cost function needs recorded traces")]
    MissingTrace,
    #[error("search grid is empty")]
    EmptyGrid,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Neuron(#[from] NeuronError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Slope of the outer linear branch of each PWL nullcline.
pub fn outer_slope(model: ModelKind, k: KCoeffs) -> f64 {
    match model {
        ModelKind::Pwl2 => k.k1,
        ModelKind::Pwl3 => 2.0 * k.k1,
        ModelKind::Pwl4 => 2.0 * k.k2 + k.k1,
        ModelKind::Original => 0.0,
        ModelKind::OriginalDiscretized => 0.0,
    }
}

/// Slope error on the excitation path: `|0.08 v + 5 − s|` with `s` the outer
/// slope of the PWL model. Zero for non-PWL models.
pub fn err_slope(model: ModelKind, k: KCoeffs, v: f64) -> f64 {
    if !model.is_pwl() {
        return 0.0;
    }
    (0.08 * v + 5.0 - outer_slope(model, k)).abs()
}

/// Vertex error: distance between the model's nullcline at `v = −62.5` and
/// the quadratic vertex value `−16.25`.
pub fn err_peak(model: ModelKind, k: KCoeffs) -> f64 {
    (nullcline_value(model, k, BREAKPOINT) - ORIGINAL_VERTEX).abs()
}

/// Cost-function settings. Times are in ms and converted with the run's dt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfConfig {
    /// Transient discarded before synchronization (S).
    pub settle_ms: f64,
    /// Reference spike periods compared (M).
    pub cycles: usize,
    /// Fixed sample count (N); when absent N spans `cycles` reference periods.
    pub sample_points: Option<usize>,
    /// Window after S in which both traces must cross threshold (T).
    pub sync_window_ms: f64,
    /// Reference samples with smaller magnitude are skipped.
    pub div_guard_mv: f64,
    pub dt: f64,
    /// Simulated time after the sync window.
    pub tail_ms: f64,
    /// Shift the candidate's input by its vertex offset
    /// `−16.25 − f_PWL(−62.5)` so both models start from the same rheobase.
    #[serde(default)]
    pub vertex_compensation: bool,
}

impl Default for CfConfig {
    fn default() -> Self {
        CfConfig {
            settle_ms: 200.0,
            cycles: 5,
            sample_points: None,
            sync_window_ms: 500.0,
            div_guard_mv: 0.5,
            dt: 1.0 / 64.0,
            tail_ms: 300.0,
            vertex_compensation: false,
        }
    }
}

impl CfConfig {
    pub fn settle_steps(&self, dt: f64) -> usize {
        (self.settle_ms / dt).round() as usize
    }

    pub fn window_steps(&self, dt: f64) -> usize {
        (self.sync_window_ms / dt).round() as usize
    }

    pub fn run_ms(&self) -> f64 {
        self.settle_ms + self.sync_window_ms + self.tail_ms
    }
}

fn first_crossing(trace: &[f64], v_th: f64, start: usize, window: usize) -> Option<usize> {
    let end = trace.len().min(start.saturating_add(window));
    (start..end).find(|&i| trace[i] >= v_th)
}

/// First threshold crossing at or after `start` in each trace, looking at
/// most `window` samples ahead.
pub fn synchronize(
    reference: &[f64],
    candidate: &[f64],
    v_th: f64,
    start: usize,
    window: usize,
) -> Result<(usize, usize), SearchError> {
    let r = first_crossing(reference, v_th, start, window).ok_or(SearchError::NoSpikeFound { which: "reference" })?;
    let c = first_crossing(candidate, v_th, start, window).ok_or(SearchError::NoSpikeFound { which: "candidate" })?;
    Ok((r, c))
}

/// Mean squared relative error over `n` samples starting at the given
/// offsets, skipping guarded reference samples.
pub fn relative_sq_error(
    reference: &[f64],
    candidate: &[f64],
    (r0, c0): (usize, usize),
    n: usize,
    div_guard: f64,
) -> Result<f64, SearchError> {
    let available = (reference.len().saturating_sub(r0)).min(candidate.len().saturating_sub(c0));
    if available < n || n == 0 {
        return Err(SearchError::InsufficientSamples {
            needed: n.max(1),
            available,
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in 0..n {
        let r = reference[r0 + j];
        if r.abs() < div_guard {
            continue;
        }
        let e = (r - candidate[c0 + j]) / r;
        sum += e * e;
        count += 1;
    }
    if count == 0 {
        return Err(SearchError::DivisionGuard);
    }
    Ok(sum / count as f64)
}

/// CF between two recorded runs with the same dt.
///
/// Without an explicit sample count N covers `cycles` reference periods from
/// the sync point. A reference with fewer spikes left (phasic responses) is
/// compared over the rest of the common run instead.
pub fn cost_function(
    reference: &SpikeTrain,
    candidate: &SpikeTrain,
    v_th: f64,
    cfg: &CfConfig,
) -> Result<f64, SearchError> {
    let rt = reference.trace.as_deref().ok_or(SearchError::MissingTrace)?;
    let ct = candidate.trace.as_deref().ok_or(SearchError::MissingTrace)?;
    let dt = reference.dt;
    let s = cfg.settle_steps(dt);
    let (r0, c0) = synchronize(rt, ct, v_th, s, cfg.window_steps(dt))?;
    let n = match cfg.sample_points {
        Some(n) => n,
        None => {
            let idx = reference.spike_steps.partition_point(|&x| x < r0);
            match reference.spike_steps.get(idx + cfg.cycles) {
                Some(&end) => end - r0,
                None => (rt.len() - r0).min(ct.len() - c0),
            }
        }
    };
    relative_sq_error(rt, ct, (r0, c0), n, cfg.div_guard_mv)
}

/// A neuron and protocol to fit against: the reference is always the
/// quadratic model with the same `(a, b, c, d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfTarget {
    pub params: NeuronParams,
    pub initial: NeuronState,
    pub stimulus: Stimulus,
}

impl CfTarget {
    /// Registry type with its protocol delayed past the settle time, so
    /// onset responses (phasic, latency, rebound) land inside the compared
    /// window.
    pub fn for_type(t: NeuronType, cfg: &CfConfig) -> CfTarget {
        let (stim, _) = t.protocol();
        CfTarget {
            params: t.params(),
            initial: t.initial_state(),
            stimulus: stim.delayed(cfg.settle_ms),
        }
    }

    /// Constant drive from the start; the settle window absorbs the onset.
    pub fn constant(params: NeuronParams, v0: f64, current: f64) -> CfTarget {
        CfTarget {
            initial: NeuronState::resting(&params, v0),
            params,
            stimulus: Stimulus::Constant(current),
        }
    }

    pub fn run(&self, model: ModelKind, k: KCoeffs, cfg: &CfConfig) -> Result<SpikeTrain, SearchError> {
        let p = self.params.with_model(model, k)?;
        let opts = SimOptions::for_duration(cfg.run_ms(), cfg.dt).with_trace();
        let stim = if cfg.vertex_compensation && model.is_pwl() {
            self.stimulus
                .offset(ORIGINAL_VERTEX - nullcline_value(model, k, BREAKPOINT))
        } else {
            self.stimulus.clone()
        };
        Ok(simulate(&p, self.initial, &stim, opts)?)
    }

    pub fn reference(&self, cfg: &CfConfig) -> Result<SpikeTrain, SearchError> {
        self.run(ModelKind::Original, KCoeffs::default(), cfg)
    }

    /// CF of `model` with `k` against the reference run.
    pub fn cf(&self, reference: &SpikeTrain, model: ModelKind, k: KCoeffs, cfg: &CfConfig) -> Result<f64, SearchError> {
        let cand = self.run(model, k, cfg)?;
        cost_function(reference, &cand, self.params.v_th, cfg)
    }
}

/// Closed interval `[lo, hi]` sampled every `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridAxis {
    pub const fn new(lo: f64, hi: f64, step: f64) -> Self {
        GridAxis { lo, hi, step }
    }

    pub const fn point(x: f64) -> Self {
        GridAxis {
            lo: x,
            hi: x,
            step: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let ok = self.lo.is_finite() && self.hi.is_finite() && self.step.is_finite();
        if !ok || self.step <= 0.0 || self.lo > self.hi {
            return Err(SearchError::InvalidGrid(format!("{self:?}")));
        }
        Ok(())
    }

    /// Loop count `span / step` of the search loops.
    pub fn loop_count(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize
    }

    /// Grid values, endpoints included, snapped to 1e-9 to avoid drift.
    pub fn values(&self) -> Vec<f64> {
        (0..=self.loop_count())
            .map(|i| ((self.lo + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }

    pub fn halved(&self) -> GridAxis {
        GridAxis {
            step: self.step / 2.0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub k1: GridAxis,
    pub k2: GridAxis,
    /// Absent for 2PWL.
    pub k3: Option<GridAxis>,
}

impl SearchGrid {
    /// Full-resolution 2PWL grid: k1 0.1–8 by 0.01, k2 10–25 by 1.
    pub fn pwl2_full() -> Self {
        SearchGrid {
            k1: GridAxis::new(0.1, 8.0, 0.01),
            k2: GridAxis::new(10.0, 25.0, 1.0),
            k3: None,
        }
    }

    /// Desk-scale 2PWL grid with k1 step 0.05.
    pub fn pwl2_desk() -> Self {
        SearchGrid {
            k1: GridAxis::new(0.1, 8.0, 0.05),
            ..Self::pwl2_full()
        }
    }

    /// Coarse 3D grids: Δ = 0.125 for k1/k2 and 0.5 for k3 (k2 of 3PWL is an
    /// offset and uses the k3 step).
    pub fn default_for(model: ModelKind) -> Self {
        match model {
            ModelKind::Pwl3 => SearchGrid {
                k1: GridAxis::new(0.125, 1.5, 0.125),
                k2: GridAxis::new(1.0, 12.0, 0.5),
                k3: Some(GridAxis::new(1.0, 12.0, 0.5)),
            },
            ModelKind::Pwl4 => SearchGrid {
                k1: GridAxis::new(0.125, 1.5, 0.125),
                k2: GridAxis::new(0.125, 1.5, 0.125),
                k3: Some(GridAxis::new(1.0, 16.0, 0.5)),
            },
            _ => Self::pwl2_desk(),
        }
    }

    /// Finer variant of [`SearchGrid::default_for`].
    pub fn full_for(model: ModelKind) -> Self {
        match model {
            ModelKind::Pwl3 | ModelKind::Pwl4 => {
                let g = Self::default_for(model);
                SearchGrid {
                    k1: g.k1.halved(),
                    k2: g.k2.halved(),
                    k3: g.k3.map(|a| a.halved()),
                }
            }
            _ => Self::pwl2_full(),
        }
    }

    /// Single-point grid.
    pub fn point(k: KCoeffs, model: ModelKind) -> Self {
        SearchGrid {
            k1: GridAxis::point(k.k1),
            k2: GridAxis::point(k.k2),
            k3: (model != ModelKind::Pwl2).then(|| GridAxis::point(k.k3)),
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        self.k1.validate()?;
        self.k2.validate()?;
        if let Some(k3) = self.k3 {
            k3.validate()?;
        }
        Ok(())
    }

    /// `(R, Q, P)`: loop counts for k1, k2 and k3.
    pub fn loop_counts(&self) -> (usize, usize, usize) {
        (
            self.k1.loop_count(),
            self.k2.loop_count(),
            self.k3.map_or(0, |a| a.loop_count()),
        )
    }

    pub fn halved(&self) -> SearchGrid {
        SearchGrid {
            k1: self.k1.halved(),
            k2: self.k2.halved(),
            k3: self.k3.map(|a| a.halved()),
        }
    }
}

/// Axis-aligned bounds of a set of grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: KCoeffs,
    pub hi: KCoeffs,
}

/// CF over every grid point, plus the low-error zones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSurface {
    pub model: ModelKind,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    /// `[0.0]` for 2PWL.
    pub k3: Vec<f64>,
    /// Row-major over `(k1, k2, k3)`; failed points hold `+inf`.
    pub cf: Vec<f64>,
    pub argmin: usize,
    pub stability_factor: f64,
    /// Connected region around the argmin with `CF ≤ factor · min`.
    pub stable_area: Vec<usize>,
    /// Stable points whose multiplicative coefficients are shift-add friendly.
    pub target_area: Vec<usize>,
}

impl ErrorSurface {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.k1.len(), self.k2.len(), self.k3.len())
    }

    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        let (_, n2, n3) = self.dims();
        (i1 * n2 + i2) * n3 + i3
    }

    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let (_, n2, n3) = self.dims();
        (idx / (n2 * n3), (idx / n3) % n2, idx % n3)
    }

    pub fn k_at(&self, idx: usize) -> KCoeffs {
        let (i1, i2, i3) = self.coords(idx);
        KCoeffs::new(self.k1[i1], self.k2[i2], self.k3[i3])
    }

    pub fn min_cf(&self) -> f64 {
        self.cf[self.argmin]
    }

    pub fn argmin_k(&self) -> KCoeffs {
        self.k_at(self.argmin)
    }

    /// Index of the grid point closest to `k`, if `k` lies on the grid.
    pub fn find(&self, k: KCoeffs) -> Option<usize> {
        let pos = |axis: &[f64], x: f64| axis.iter().position(|&a| (a - x).abs() < 1e-9);
        let i1 = pos(&self.k1, k.k1)?;
        let i2 = pos(&self.k2, k.k2)?;
        let i3 = if self.k3.len() == 1 { 0 } else { pos(&self.k3, k.k3)? };
        Some(self.index(i1, i2, i3))
    }

    pub fn in_stable_area(&self, k: KCoeffs) -> bool {
        self.find(k).is_some_and(|i| self.stable_area.binary_search(&i).is_ok())
    }

    pub fn stable_bounds(&self) -> Option<BoundingBox> {
        bounds(self, &self.stable_area)
    }

    /// Writes `k1,k2[,k3],cf`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SearchError> {
        let mut w = csv::Writer::from_writer(out);
        let three = self.model != ModelKind::Pwl2;
        if three {
            w.write_record(["k1", "k2", "k3", "cf"])?;
        } else {
            w.write_record(["k1", "k2", "cf"])?;
        }
        for (idx, cf) in self.cf.iter().enumerate() {
            let k = self.k_at(idx);
            let mut row = vec![k.k1.to_string(), k.k2.to_string()];
            if three {
                row.push(k.k3.to_string());
            }
            row.push(cf.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> SearchSummary {
        SearchSummary {
            model: self.model,
            argmin: self.argmin_k(),
            min_cf: self.min_cf(),
            grid_points: self.cf.len(),
            stable_points: self.stable_area.len(),
            stable_area: self.stable_bounds(),
            target_area: self.target_area.iter().map(|&i| self.k_at(i)).collect(),
        }
    }
}

fn bounds(s: &ErrorSurface, idx: &[usize]) -> Option<BoundingBox> {
    let mut it = idx.iter().map(|&i| s.k_at(i));
    let first = it.next()?;
    let (mut lo, mut hi) = (first, first);
    for k in it {
        lo = KCoeffs::new(lo.k1.min(k.k1), lo.k2.min(k.k2), lo.k3.min(k.k3));
        hi = KCoeffs::new(hi.k1.max(k.k1), hi.k2.max(k.k2), hi.k3.max(k.k3));
    }
    Some(BoundingBox { lo, hi })
}

/// JSON summary of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub model: ModelKind,
    pub argmin: KCoeffs,
    pub min_cf: f64,
    pub grid_points: usize,
    pub stable_points: usize,
    pub stable_area: Option<BoundingBox>,
    pub target_area: Vec<KCoeffs>,
}

/// Search options beyond the grid and CF settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub stability_factor: f64,
    /// Term budget for the shift-add filter of the target area.
    pub max_terms: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            stability_factor: 2.0,
            max_terms: 3,
        }
    }
}

fn multiplicative(model: ModelKind, k: KCoeffs) -> Vec<f64> {
    match model {
        ModelKind::Pwl4 => vec![k.k1, k.k2],
        _ => vec![k.k1],
    }
}

/// Flood fill over face-adjacent grid neighbours.
fn stable_region(s: &ErrorSurface, limit: f64) -> Vec<usize> {
    let (n1, n2, n3) = s.dims();
    let mut seen = vec![false; s.cf.len()];
    let mut stack = vec![s.argmin];
    seen[s.argmin] = true;
    let mut out = Vec::new();
    while let Some(idx) = stack.pop() {
        out.push(idx);
        let (i1, i2, i3) = s.coords(idx);
        let mut visit = |a: isize, b: isize, c: isize| {
            let (j1, j2, j3) = (i1 as isize + a, i2 as isize + b, i3 as isize + c);
            if j1 < 0 || j2 < 0 || j3 < 0 || j1 >= n1 as isize || j2 >= n2 as isize || j3 >= n3 as isize {
                return;
            }
            let j = s.index(j1 as usize, j2 as usize, j3 as usize);
            if !seen[j] && s.cf[j] <= limit {
                seen[j] = true;
                stack.push(j);
            }
        };
        for (a, b, c) in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)] {
            visit(a, b, c);
        }
    }
    out.sort_unstable();
    out
}

/// Evaluates CF at every grid point. Failed points become `+inf`; ties at the
/// minimum resolve to the lexicographically smallest `(k1, k2, k3)`.
pub fn grid_search(
    model: ModelKind,
    target: &CfTarget,
    grid: &SearchGrid,
    cfg: &CfConfig,
    opts: &SearchOptions,
) -> Result<ErrorSurface, SearchError> {
    if !model.is_pwl() {
        return Err(SearchError::InvalidGrid(format!("{model} has no K coefficients")));
    }
    grid.validate()?;
    let k1 = grid.k1.values();
    let k2 = grid.k2.values();
    let k3 = match (model, grid.k3) {
        (ModelKind::Pwl2, _) => vec![0.0],
        (_, Some(a)) => a.values(),
        (_, None) => return Err(SearchError::InvalidGrid(format!("{model} needs a k3 axis"))),
    };
    if k1.is_empty() || k2.is_empty() || k3.is_empty() {
        return Err(SearchError::EmptyGrid);
    }
    let reference = target.reference(cfg)?;
    let total = k1.len() * k2.len() * k3.len();
    let (n2, n3) = (k2.len(), k3.len());
    let cf: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let k = KCoeffs::new(k1[idx / (n2 * n3)], k2[(idx / n3) % n2], k3[idx % n3]);
            target.cf(&reference, model, k, cfg).unwrap_or(f64::INFINITY)
        })
        .collect();
    let argmin = cf
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v < cf[best] { i } else { best });
    let mut surface = ErrorSurface {
        model,
        k1,
        k2,
        k3,
        cf,
        argmin,
        stability_factor: opts.stability_factor,
        stable_area: Vec::new(),
        target_area: Vec::new(),
    };
    if surface.min_cf().is_finite() {
        surface.stable_area = stable_region(&surface, opts.stability_factor * surface.min_cf());
        surface.target_area = surface
            .stable_area
            .iter()
            .copied()
            .filter(|&i| {
                multiplicative(model, surface.k_at(i))
                    .into_iter()
                    .all(|c| decompose_constant(c, opts.max_terms).is_ok())
            })
            .collect();
    }
    Ok(surface)
}

/// CF of every registry type for `model` at its tabulated coefficients.
pub fn type_cf_table(model: ModelKind, cfg: &CfConfig) -> Vec<(NeuronType, Result<f64, SearchError>)> {
    NeuronType::ALL
        .par_iter()
        .map(|&t| {
            let target = CfTarget::for_type(t, cfg);
            let k = t.coeffs().row(model).map(|r| r.k).unwrap_or_default();
            let r = target
                .reference(cfg)
                .and_then(|reference| target.cf(&reference, model, k, cfg));
            (t, r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::nullcline_slope;

    fn train(trace: Vec<f64>) -> SpikeTrain {
        let spikes = trace
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= 30.0)
            .map(|(i, _)| i)
            .collect();
        SpikeTrain {
            spike_steps: spikes,
            dt: 1.0,
            n_steps: trace.len(),
            trace: Some(trace),
        }
    }

    fn saw(len: usize, shift: usize) -> Vec<f64> {
        (0..len)
            .map(|i| {
                let p = (i + 20 - shift % 20) % 20;
                if p == 0 {
                    30.0
                } else {
                    -70.0 + 3.0 * p as f64
                }
            })
            .collect()
    }

    fn cfg() -> CfConfig {
        CfConfig {
            settle_ms: 10.0,
            cycles: 3,
            sync_window_ms: 50.0,
            ..CfConfig::default()
        }
    }

    #[test]
    fn slope_and_peak_examples() {
        assert!((err_slope(ModelKind::Pwl2, KCoeffs::two(0.75, 20.0), -62.5) - 0.75).abs() < 1e-12);
        let v = 10.0;
        assert_eq!(err_slope(ModelKind::Pwl2, KCoeffs::two(0.08 * v + 5.0, 20.0), v), 0.0);
        assert!((err_slope(ModelKind::Pwl4, KCoeffs::new(0.375, 0.75, 11.0), 0.0) - 3.125).abs() < 1e-12);
        assert_eq!(err_peak(ModelKind::Pwl2, KCoeffs::two(0.75, 20.0)), 3.75);
        assert_eq!(err_peak(ModelKind::Pwl4, KCoeffs::new(0.375, 0.75, 11.0)), 0.25);
        assert_eq!(err_peak(ModelKind::Pwl2, KCoeffs::two(1.0, 16.25)), 0.0);
    }

    #[test]
    fn analytic_errors_match_numeric_nullclines() {
        let k = KCoeffs::new(0.5, 0.75, 11.0);
        for model in ModelKind::PWL {
            for v in [-40.0, -20.0, 0.0, 20.0] {
                let num = (nullcline_slope(ModelKind::Original, k, v) - nullcline_slope(model, k, v)).abs();
                assert!((num - err_slope(model, k, v)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cf_basics() {
        let r = train(saw(200, 0));
        assert_eq!(cost_function(&r, &r, 30.0, &cfg()).unwrap(), 0.0);
        let scaled: Vec<f64> = saw(200, 0).iter().map(|v| 1.1 * v).collect();
        // Scaled spikes still cross 30 at the same samples.
        let c = train(scaled);
        let cf = cost_function(&r, &c, 30.0, &cfg()).unwrap();
        assert!((cf - 0.01).abs() < 1e-12);
    }

    #[test]
    fn sync_finds_shift() {
        let a = saw(200, 0);
        let b = saw(200, 7);
        let (i, j) = synchronize(&a, &b, 30.0, 10, 50).unwrap();
        assert_eq!(j as isize - i as isize, 7);
        let silent = vec![-70.0; 200];
        assert!(matches!(
            synchronize(&a, &silent, 30.0, 10, 50),
            Err(SearchError::NoSpikeFound { which: "candidate" })
        ));
        // Shifting both traces together leaves CF unchanged.
        let r = train(saw(300, 3));
        let c = train(saw(300, 9));
        let r2 = train(saw(300, 5));
        let c2 = train(saw(300, 11));
        let x = cost_function(&r, &c, 30.0, &cfg()).unwrap();
        let y = cost_function(&r2, &c2, 30.0, &cfg()).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn insufficient_and_guard() {
        let r = train(saw(40, 0));
        let c = CfConfig {
            sample_points: Some(100),
            ..cfg()
        };
        assert!(matches!(
            cost_function(&r, &r, 30.0, &c),
            Err(SearchError::InsufficientSamples { .. })
        ));
        let z = vec![0.0, 0.1, 0.2];
        assert!(matches!(
            relative_sq_error(&z, &z, (0, 0), 3, 0.5),
            Err(SearchError::DivisionGuard)
        ));
    }

    #[test]
    fn grid_axes() {
        let g = SearchGrid::pwl2_full();
        assert_eq!(g.k1.values().len(), 791);
        assert_eq!(g.k2.values().len(), 16);
        assert_eq!(g.loop_counts(), (790, 15, 0));
        assert!(SearchGrid::pwl2_desk().k1.values().contains(&0.75));
        assert!(GridAxis::new(1.0, 0.0, 0.1).validate().is_err());
        assert!(GridAxis::new(0.0, 1.0, 0.0).validate().is_err());
    }

    #[test]
    fn singleton_grid_argmin() {
        let c = CfConfig {
            dt: 0.125,
            ..CfConfig::default()
        };
        let target = CfTarget::for_type(NeuronType::TonicSpiking, &c);
        let k = KCoeffs::two(0.75, 20.0);
        let s = grid_search(
            ModelKind::Pwl2,
            &target,
            &SearchGrid::point(k, ModelKind::Pwl2),
            &c,
            &SearchOptions::default(),
        )
        .unwrap();
        assert_eq!(s.argmin_k(), k);
        assert_eq!(s.stable_area, vec![0]);
        assert_eq!(s.target_area, vec![0]);
    }
}
