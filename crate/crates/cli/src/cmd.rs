//! Subcommand implementations. Each returns the JSON summary printed on
//! stdout and writes its artifacts into the output directory.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use spikepwl::datapath::{fixed_simulate, FixedConfig, FixedNeuron, FixedState};
use spikepwl::hw::{plan_pipeline, resources, schedule_simulate, write_trace_csv};
use spikepwl::learning::{
    evaluate, load_manifest, synthetic_dataset, train_state, write_log_csv, Backend, Dataset, LearnerConfig,
    LearnerState,
};
use spikepwl::network::{
    build_network, mre, population_rate, population_rhythm, run_network, write_rate_csv, NetworkConfig, NeuronClass,
    RasterData, RHYTHM_MIN_MS,
};
use spikepwl::neuron::{simulate, SimOptions, DEFAULT_DT};
use spikepwl::regime::{classify_staircase, RegimeThresholds};
use spikepwl::registry::{hardware_k, hardware_tonic};
use spikepwl::search::{cost_function, grid_search, CfConfig, CfTarget, SearchGrid, SearchOptions};
use spikepwl::{KCoeffs, ModelKind, NeuronParams, NeuronType, SpikeTrain, Stimulus};

use crate::error::CliError;
use crate::svg;
use crate::{BackendArg, Format, Globals};

fn cfg_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, CliError> {
    s.parse::<ModelKind>().map_err(cfg_err)
}

fn parse_type(s: &str) -> Result<NeuronType, CliError> {
    s.parse::<NeuronType>().map_err(cfg_err)
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| cfg_err(format!("bad {what} value `{x}`: {e}")))
        })
        .collect()
}

/// `k1,k2[,k3]`.
fn parse_k(s: &str) -> Result<KCoeffs, CliError> {
    match parse_list(s, "K")?.as_slice() {
        [a, b] => Ok(KCoeffs::two(*a, *b)),
        [a, b, c] => Ok(KCoeffs::new(*a, *b, *c)),
        _ => Err(cfg_err("K needs two or three comma-separated values")),
    }
}

/// K from the flag, else the coefficient table row of `t`, else the
/// hardware set.
fn resolve_k(flag: Option<&str>, model: ModelKind, t: Option<NeuronType>) -> Result<KCoeffs, CliError> {
    if let Some(s) = flag {
        return parse_k(s);
    }
    Ok(t.and_then(|t| t.coeffs().row(model))
        .map(|r| r.k)
        .or_else(|| hardware_k(model))
        .unwrap_or_default())
}

fn require_file(p: &Path) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(cfg_err(format!("input file {} does not exist", p.display())))
    }
}

/// Tracks written artifacts for the summary.
struct Outputs<'a> {
    g: &'a Globals,
    files: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(g: &'a Globals) -> Self {
        Outputs { g, files: Vec::new() }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.g.out.join(name);
        self.files.push(p.display().to_string());
        p
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let p = self.path(name);
        std::fs::write(p, body)?;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(value)?;
        self.text(name, &(body + "\n"))
    }

    fn csv_rows<T: Serialize>(&mut self, name: &str, header: &[&str], rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows as CSV, or as a JSON array under the json format.
    fn table<T: Serialize>(&mut self, stem: &str, header: &[&str], rows: &[T]) -> Result<(), CliError> {
        match self.g.format {
            Format::Json => self.json(&format!("{stem}.json"), &rows),
            Format::Csv | Format::Svg => self.csv_rows(&format!("{stem}.csv"), header, rows),
        }
    }

    fn done(self, mut summary: Value) -> Value {
        summary["files"] = json!(self.files);
        summary
    }
}

const TRACE_HEADER: &[&str] = &["t_ms", "v"];
const SPIKE_HEADER: &[&str] = &["step", "t_ms"];
const RASTER_HEADER: &[&str] = &["neuron_id", "class", "spike_time_ms"];
const PREDICTION_HEADER: &[&str] = &["index", "label", "predicted"];

#[derive(Debug, Clone, Serialize)]
struct TraceRow {
    t_ms: f64,
    v: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SpikeRow {
    step: usize,
    t_ms: f64,
}

/// Block maxima of the trace, one row per `every` steps, so spikes stay
/// visible after thinning.
fn thin_trace(train: &SpikeTrain, every: usize) -> Vec<TraceRow> {
    let Some(tr) = train.trace.as_ref() else {
        return Vec::new();
    };
    tr.chunks(every.max(1))
        .enumerate()
        .map(|(i, c)| TraceRow {
            t_ms: (i * every) as f64 * train.dt,
            v: c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}

fn spike_rows(train: &SpikeTrain) -> Vec<SpikeRow> {
    train
        .spike_steps
        .iter()
        .map(|&s| SpikeRow {
            step: s,
            t_ms: s as f64 * train.dt,
        })
        .collect()
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct NeuronArgs {
    #[arg(long)]
    pub model: Option<String>,
    /// Registry neuron type, e.g. `tonic_spiking`.
    #[arg(long = "type")]
    #[serde(rename = "type")]
    pub neuron_type: Option<String>,
    /// Explicit `a,b,c,d`; overrides the type's parameters.
    #[arg(long)]
    pub params: Option<String>,
    /// `k1,k2[,k3]`; defaults to the coefficient table.
    #[arg(long)]
    pub k: Option<String>,
    /// Constant input current instead of the type's protocol.
    #[arg(long = "i")]
    #[serde(rename = "i")]
    pub current: Option<f64>,
    /// Comma-separated staircase levels.
    #[arg(long)]
    pub staircase: Option<String>,
    #[arg(long)]
    pub segment_ms: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Fixed backend: dt = 2^-dt_shift ms.
    #[arg(long)]
    pub dt_shift: Option<u32>,
    #[arg(long)]
    pub duration: Option<f64>,
    /// Two models, `a,b`: runs both and reports the CF of `b` against `a`.
    #[arg(long)]
    pub compare: Option<String>,
    /// Trace sampling interval (ms).
    #[arg(long)]
    pub trace_ms: Option<f64>,
}

pub fn neuron(a: &NeuronArgs, g: &Globals) -> Result<Value, CliError> {
    let t = parse_type(a.neuron_type.as_deref().unwrap_or("tonic_spiking"))?;
    let model = parse_model(a.model.as_deref().unwrap_or("original"))?;
    let base = match &a.params {
        Some(s) => match parse_list(s, "parameter")?.as_slice() {
            [pa, pb, pc, pd] => NeuronParams::new(ModelKind::Original, *pa, *pb, *pc, *pd, KCoeffs::default())?,
            _ => return Err(cfg_err("--params needs a,b,c,d")),
        },
        None => t.params(),
    };
    let initial = spikepwl::NeuronState::resting(&base, t.v0());
    let (proto, proto_ms) = t.protocol();
    let segment_ms = a.segment_ms.unwrap_or(200.0);
    let (stim, default_ms) = match (&a.staircase, a.current) {
        (Some(s), _) => {
            let st = Stimulus::parse_staircase(s, segment_ms).map_err(cfg_err)?;
            let n = s.split(',').count() as f64;
            (st, n * segment_ms)
        }
        (None, Some(i)) => (Stimulus::Constant(i), 1000.0),
        (None, None) => (proto, proto_ms),
    };
    let duration = a.duration.unwrap_or(default_ms);
    let trace_ms = a.trace_ms.unwrap_or(0.1);
    let mut out = Outputs::new(g);

    if let Some(pair) = &a.compare {
        let models: Vec<ModelKind> = pair
            .split(',')
            .map(|m| parse_model(m.trim()))
            .collect::<Result<_, _>>()?;
        let [ma, mb] = models.as_slice() else {
            return Err(cfg_err("--compare needs exactly two models"));
        };
        let cfg = CfConfig {
            dt: a.dt.unwrap_or(CfConfig::default().dt),
            ..CfConfig::default()
        };
        let target = CfTarget {
            params: base,
            initial,
            stimulus: stim.delayed(cfg.settle_ms),
        };
        let ka = resolve_k(None, *ma, Some(t))?;
        let kb = resolve_k(a.k.as_deref(), *mb, Some(t))?;
        let ra = target.run(*ma, ka, &cfg)?;
        let rb = target.run(*mb, kb, &cfg)?;
        let cf = cost_function(&ra, &rb, base.v_th, &cfg)?;
        let every = (trace_ms / cfg.dt).round() as usize;
        for (m, r) in [(ma, &ra), (mb, &rb)] {
            out.table(&format!("trace_{}", m.name()), TRACE_HEADER, &thin_trace(r, every))?;
            out.table(&format!("spikes_{}", m.name()), SPIKE_HEADER, &spike_rows(r))?;
        }
        if g.format == Format::Svg {
            let series: Vec<(&str, Vec<(f64, f64)>)> = [(ma, &ra), (mb, &rb)]
                .iter()
                .map(|(m, r)| {
                    (
                        m.name(),
                        thin_trace(r, every).into_iter().map(|p| (p.t_ms, p.v)).collect(),
                    )
                })
                .collect();
            out.text("compare.svg", &svg::line_plot(&format!("{} vs {}", ma, mb), &series))?;
        }
        return Ok(out.done(json!({
            "command": "neuron",
            "type": t.key(),
            "reference": ma.name(),
            "candidate": mb.name(),
            "k": kb,
            "cf": cf,
            "reference_spikes": ra.len(),
            "candidate_spikes": rb.len(),
        })));
    }

    let k = resolve_k(a.k.as_deref(), model, Some(t))?;
    let params = base.with_model(model, k)?;
    // Staircase runs start at rest so the first segment is not a transient.
    let initial = match &a.staircase {
        Some(_) => spikepwl::NeuronState::equilibrium(&params, stim.current_at(0.0)).unwrap_or(initial),
        None => initial,
    };
    let (train, dt) = match g.backend {
        BackendArg::Float => {
            let dt = a.dt.unwrap_or(DEFAULT_DT);
            let opts = SimOptions::for_duration(duration, dt).with_trace();
            (simulate(&params, initial, &stim, opts)?, dt)
        }
        BackendArg::Fixed => {
            let fc = FixedConfig {
                dt_shift: a.dt_shift.unwrap_or(FixedConfig::default().dt_shift),
                ..FixedConfig::default()
            };
            let nr = FixedNeuron::compile(&params, fc)?;
            let dt = fc.dt_ms();
            let n_steps = (duration / dt).round() as usize;
            let run = fixed_simulate(
                &nr,
                FixedState::encode(initial.v, initial.u),
                |t| stim.current_at(t),
                n_steps,
                true,
            )?;
            (run.train, dt)
        }
    };
    let every = (trace_ms / dt).round() as usize;
    let trace = thin_trace(&train, every);
    out.table("trace", TRACE_HEADER, &trace)?;
    out.table("spikes", SPIKE_HEADER, &spike_rows(&train))?;
    let mut summary = json!({
        "command": "neuron",
        "type": t.key(),
        "model": model.name(),
        "k": k,
        "backend": g.backend,
        "dt_ms": dt,
        "duration_ms": duration,
        "n_spikes": train.len(),
    });
    if let (Some(_), Stimulus::Staircase { levels, segment_ms }) = (&a.staircase, &stim) {
        let seg = (segment_ms / dt).round() as usize;
        let labels = classify_staircase(&train, levels.len(), seg, RegimeThresholds::default())?;
        let regimes: Vec<Value> = levels
            .iter()
            .zip(&labels)
            .map(|(l, r)| json!({"level": l, "regime": r.to_string()}))
            .collect();
        summary["regimes"] = json!(regimes);
    }
    if g.format == Format::Svg {
        let pts = trace.iter().map(|p| (p.t_ms, p.v)).collect();
        out.text(
            "trace.svg",
            &svg::line_plot(&format!("{} {}", t.key(), model), &[(model.name(), pts)]),
        )?;
    }
    Ok(out.done(summary))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long = "type")]
    #[serde(rename = "type")]
    pub neuron_type: Option<String>,
    /// `default`, `full`, or `point` (with `--k`).
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    /// Fit against constant drive instead of the type's protocol.
    #[arg(long)]
    pub constant_i: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub stability_factor: Option<f64>,
    #[arg(long)]
    pub max_terms: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub vertex_compensation: Option<bool>,
}

pub fn search(a: &SearchArgs, g: &Globals) -> Result<Value, CliError> {
    if g.backend == BackendArg::Fixed {
        return Err(cfg_err("search runs on the float backend only"));
    }
    let model = parse_model(a.model.as_deref().unwrap_or("pwl2"))?;
    let t = parse_type(a.neuron_type.as_deref().unwrap_or("tonic_spiking"))?;
    let grid = match a.grid.as_deref().unwrap_or("default") {
        "default" => SearchGrid::default_for(model),
        "full" => SearchGrid::full_for(model),
        "point" => SearchGrid::point(resolve_k(a.k.as_deref(), model, Some(t))?, model),
        other => return Err(cfg_err(format!("unknown grid `{other}`"))),
    };
    let cfg = CfConfig {
        dt: a.dt.unwrap_or(CfConfig::default().dt),
        vertex_compensation: a.vertex_compensation.unwrap_or(false),
        ..CfConfig::default()
    };
    let opts = SearchOptions {
        stability_factor: a.stability_factor.unwrap_or(SearchOptions::default().stability_factor),
        max_terms: a.max_terms.unwrap_or(SearchOptions::default().max_terms),
    };
    let target = match a.constant_i {
        Some(i) => CfTarget::constant(t.params(), t.v0(), i),
        None => CfTarget::for_type(t, &cfg),
    };
    let surface = grid_search(model, &target, &grid, &cfg, &opts)?;
    let summary = surface.summary();
    let mut out = Outputs::new(g);
    match g.format {
        Format::Json => out.json("surface.json", &surface)?,
        _ => {
            let p = out.path("surface.csv");
            surface.write_csv(std::fs::File::create(p)?)?;
        }
    }
    out.json("argmin.json", &summary)?;
    if g.format == Format::Svg {
        let (n1, n2, _) = surface.dims();
        let i3 = surface.coords(surface.argmin).2;
        let rows: Vec<Vec<f64>> = (0..n2)
            .map(|i2| (0..n1).map(|i1| surface.cf[surface.index(i1, i2, i3)]).collect())
            .collect();
        let xr = (surface.k1[0], surface.k1[n1 - 1]);
        let yr = (surface.k2[0], surface.k2[n2 - 1]);
        out.text(
            "surface.svg",
            &svg::heat_map(&format!("CF of {model}, {}", t.key()), &rows, xr, yr),
        )?;
    }
    let stable = surface.in_stable_area(summary.argmin);
    Ok(out.done(json!({
        "command": "search",
        "model": model.name(),
        "type": t.key(),
        "argmin": summary.argmin,
        "min_cf": summary.min_cf,
        "grid_points": summary.grid_points,
        "stable_points": summary.stable_points,
        "argmin_stable": stable,
    })))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct NetworkArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Candidate model.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    /// Reference model for the MRE comparison.
    #[arg(long)]
    pub compare: Option<String>,
    #[arg(long)]
    pub sim_ms: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// `default` or `tonic`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub exc_weight: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct RasterRow {
    neuron_id: usize,
    class: &'static str,
    spike_time_ms: f64,
}

fn raster_rows(r: &RasterData) -> Vec<RasterRow> {
    r.spikes
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            s.iter().map(move |&step| RasterRow {
                neuron_id: i,
                class: r.classes[i].label(),
                spike_time_ms: step as f64 * r.dt,
            })
        })
        .collect()
}

pub fn network(a: &NetworkArgs, g: &Globals) -> Result<Value, CliError> {
    if g.backend == BackendArg::Fixed {
        return Err(cfg_err("network runs on the float backend only"));
    }
    let base = match a.preset.as_deref().unwrap_or("default") {
        "default" => NetworkConfig::default(),
        "tonic" => NetworkConfig::tonic_dominant(),
        other => return Err(cfg_err(format!("unknown preset `{other}`"))),
    };
    let model = parse_model(a.model.as_deref().unwrap_or("original"))?;
    let cfg = NetworkConfig {
        n_total: a.n.unwrap_or(base.n_total),
        seed: g.seed,
        sim_ms: a.sim_ms.unwrap_or(base.sim_ms),
        dt: a.dt.unwrap_or(base.dt),
        exc_weight: a.exc_weight.unwrap_or(base.exc_weight),
        model,
        k: resolve_k(a.k.as_deref(), model, Some(NeuronType::TonicSpiking))?,
        ..base
    };
    let raster = run_network(&build_network(&cfg)?)?;
    let mut out = Outputs::new(g);
    out.table(
        &format!("raster_{}", model.name()),
        RASTER_HEADER,
        &raster_rows(&raster),
    )?;
    let rate = population_rate(&raster, 5.0);
    match g.format {
        Format::Json => out.json("rate.json", &rate)?,
        _ => write_rate_csv(&rate, 5.0, std::fs::File::create(out.path("rate.csv"))?)?,
    }
    let rhythm = if raster.sim_ms() + 1e-9 >= RHYTHM_MIN_MS {
        population_rhythm(&raster, 5.0).ok()
    } else {
        None
    };
    let mut summary = json!({
        "command": "network",
        "model": model.name(),
        "k": cfg.k,
        "n": cfg.n_total,
        "seed": cfg.seed,
        "mean_rate_hz": raster.mean_rate_hz(),
        "rhythm_hz": rhythm,
    });
    if let Some(m) = &a.compare {
        let rm = parse_model(m)?;
        let rcfg = cfg.with_model(rm, resolve_k(None, rm, Some(NeuronType::TonicSpiking))?);
        let reference = run_network(&build_network(&rcfg)?)?;
        out.table(
            &format!("raster_{}", rm.name()),
            RASTER_HEADER,
            &raster_rows(&reference),
        )?;
        summary["reference"] = json!(rm.name());
        summary["mre_percent"] = json!(mre(&reference, &raster)?);
    }
    if g.format == Format::Svg {
        let dots: Vec<(f64, usize, bool)> = raster_rows(&raster)
            .iter()
            .map(|r| {
                (
                    r.spike_time_ms,
                    r.neuron_id,
                    raster.classes[r.neuron_id] == NeuronClass::Inhibitory,
                )
            })
            .collect();
        out.text(
            "raster.svg",
            &svg::raster_plot(&format!("{model} network"), &dots, raster.sim_ms(), cfg.n_total),
        )?;
    }
    Ok(out.done(summary))
}

/// Dataset selection shared by `train` and `eval`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// CSV manifest (`path,label[,split]`); synthetic data when absent.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub train_writers: Option<usize>,
    #[arg(long)]
    pub test_writers: Option<usize>,
    #[arg(long)]
    pub flip: Option<f64>,
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<Dataset, CliError> {
        match &self.dataset {
            Some(p) => {
                require_file(p)?;
                Ok(load_manifest(p)?)
            }
            None => {
                let flip = self.flip.unwrap_or(0.15);
                if !(0.0..=1.0).contains(&flip) {
                    return Err(cfg_err(format!("--flip {flip} outside [0, 1]")));
                }
                Ok(synthetic_dataset(
                    self.classes.unwrap_or(5),
                    20,
                    16,
                    self.train_writers.unwrap_or(29),
                    self.test_writers.unwrap_or(10),
                    flip,
                    seed,
                ))
            }
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub alpha_shift: Option<u32>,
    #[arg(long)]
    pub i_bias: Option<f64>,
    #[arg(long)]
    pub window_ms: Option<f64>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct PredictionRow {
    index: usize,
    label: String,
    predicted: String,
}

fn prediction_rows(ds: &Dataset, predicted: &[usize]) -> Vec<PredictionRow> {
    ds.test
        .iter()
        .zip(predicted)
        .enumerate()
        .map(|(i, (p, &q))| PredictionRow {
            index: i,
            label: ds.class_names[p.label].clone(),
            predicted: ds.class_names[q].clone(),
        })
        .collect()
}

pub fn train(a: &TrainArgs, g: &Globals) -> Result<Value, CliError> {
    let ds = a.data.load(g.seed)?;
    if ds.train.is_empty() {
        return Err(cfg_err("dataset has no training patterns"));
    }
    let model = parse_model(a.model.as_deref().unwrap_or("original"))?;
    let defaults = LearnerConfig::new(ds.n_inputs(), ds.class_names.len());
    let cfg = LearnerConfig {
        alpha_shift: a.alpha_shift.unwrap_or(defaults.alpha_shift),
        i_bias: a.i_bias,
        window_ms: a.window_ms.unwrap_or(defaults.window_ms),
        epochs: a.epochs.unwrap_or(defaults.epochs),
        seed: g.seed,
        model,
        k: resolve_k(a.k.as_deref(), model, Some(NeuronType::TonicSpiking))?,
        backend: match g.backend {
            BackendArg::Float => Backend::Float,
            BackendArg::Fixed => Backend::Fixed,
        },
        ..defaults
    };
    let mut state = LearnerState::new(cfg)?;
    let log = train_state(&mut state, &ds.train, cfg.epochs)?;
    let mut out = Outputs::new(g);
    state.write_weights_csv(std::fs::File::create(out.path("weights.csv"))?)?;
    out.json("state.json", &state)?;
    match g.format {
        Format::Json => out.json("convergence.json", &log)?,
        _ => write_log_csv(&log, std::fs::File::create(out.path("convergence.csv"))?)?,
    }
    let mut summary = json!({
        "command": "train",
        "classes": ds.class_names,
        "train_patterns": ds.train.len(),
        "i_bias": state.i_bias,
        "epochs": cfg.epochs,
        "final_target_hz": log.iter().rev().take(cfg.n_outputs).map(|l| l.frequency_hz).collect::<Vec<_>>(),
    });
    if !ds.test.is_empty() {
        let ev = evaluate(&state, &ds.test)?;
        out.table("predictions", PREDICTION_HEADER, &prediction_rows(&ds, &ev.predicted))?;
        summary["test_accuracy"] = json!(ev.accuracy);
    }
    if g.format == Format::Svg {
        let series: Vec<(String, Vec<(f64, f64)>)> = (0..cfg.n_outputs)
            .map(|c| {
                let pts = log
                    .iter()
                    .filter(|l| l.class == c)
                    .map(|l| (l.epoch as f64, l.frequency_hz))
                    .collect();
                (ds.class_names[c].clone(), pts)
            })
            .collect();
        let refs: Vec<(&str, Vec<(f64, f64)>)> = series.iter().map(|(n, p)| (n.as_str(), p.clone())).collect();
        out.text(
            "convergence.svg",
            &svg::line_plot("target output rate per epoch", &refs),
        )?;
    }
    Ok(out.done(summary))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// `state.json` written by `train`.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
}

pub fn eval(a: &EvalArgs, g: &Globals) -> Result<Value, CliError> {
    let path = a.state.as_ref().ok_or_else(|| cfg_err("--state is required"))?;
    require_file(path)?;
    let text = std::fs::read_to_string(path)?;
    let state: LearnerState = serde_json::from_str(&text).map_err(|e| cfg_err(format!("bad state file: {e}")))?;
    let ds = a.data.load(g.seed)?;
    if ds.test.is_empty() {
        return Err(cfg_err("dataset has no test patterns"));
    }
    if ds.n_inputs() != state.config.n_inputs || ds.class_names.len() != state.config.n_outputs {
        return Err(cfg_err("dataset shape does not match the trained state"));
    }
    let ev = evaluate(&state, &ds.test)?;
    let mut out = Outputs::new(g);
    out.table("predictions", PREDICTION_HEADER, &prediction_rows(&ds, &ev.predicted))?;
    Ok(out.done(json!({
        "command": "eval",
        "test_patterns": ds.test.len(),
        "accuracy": ev.accuracy,
        "frequency_table": ev.frequency_table,
    })))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct HwplanArgs {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub neurons: Option<usize>,
    /// Input-unit stages.
    #[arg(long = "is")]
    #[serde(rename = "is")]
    pub i_s: Option<usize>,
    /// Emulate this many time steps of the shared pipeline.
    #[arg(long)]
    pub simulate_steps: Option<usize>,
    /// Constant input current for the emulation.
    #[arg(long = "i")]
    #[serde(rename = "i")]
    pub current: Option<f64>,
}

pub fn hwplan(a: &HwplanArgs, g: &Globals) -> Result<Value, CliError> {
    let model = parse_model(a.model.as_deref().unwrap_or("pwl2"))?;
    let spec = plan_pipeline(model, a.neurons.unwrap_or(30), a.i_s.unwrap_or(25))?;
    let report = resources(model);
    let mut out = Outputs::new(g);
    out.json("pipeline.json", &json!({"spec": spec, "resources": report}))?;
    let mut summary = json!({
        "command": "hwplan",
        "model": model.name(),
        "V_S": spec.v_s,
        "U_S": spec.u_s,
        "I_S": spec.i_s,
        "D_S": spec.d_s,
        "V_buffer_size": spec.v_buffer_size,
        "U_buffer_size": spec.u_buffer_size,
        "N": spec.n,
        "resources": report,
    });
    let steps = a.simulate_steps.unwrap_or(0);
    if steps > 0 {
        let k = hardware_k(model).unwrap_or_default();
        let params = hardware_tonic(model, k)?;
        let nr = FixedNeuron::compile(&params, FixedConfig::default())?;
        let init = FixedState::encode(-65.0, params.b * -65.0);
        let i = a.current.unwrap_or(10.0);
        let neurons = vec![nr.clone(); spec.n];
        let run = schedule_simulate(&spec, &neurons, &vec![init; spec.n], |_, _| i, steps, true)?;
        let direct = fixed_simulate(&nr, init, |_| i, steps, false)?;
        let trace = run.trace.as_deref().unwrap_or_default();
        let limit = trace.len().min(20 * spec.n * spec.v_s.max(1));
        write_trace_csv(&trace[..limit], std::fs::File::create(out.path("schedule_trace.csv"))?)?;
        summary["spikes_per_neuron"] = json!(run.trains[0].len());
        summary["general_multiplies"] = json!(run.stats.general_muls);
        summary["matches_direct"] = json!(run.trains.iter().all(|t| t.spike_steps == direct.train.spike_steps));
    }
    Ok(out.done(summary))
}
