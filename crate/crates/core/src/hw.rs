//! Pipelined hardware architecture model: synchronization constraints,
//! buffer and delay sizing, resource counts, and a cycle-level emulation of
//! neurons sharing one V/U pipeline.
//!
//! Timing of the shared pipeline: neuron `j` enters the V pipeline at cycles
//! `j + s·N`, spends `V_S` cycles in it, then waits in the buffer for
//! `N − V_S` cycles. The input unit works `I_S + D_S` cycles ahead of the V
//! pipeline, so its output is held in a delay line of that length.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datapath::{v_stages, FixedNeuron, FixedState, OpStats, U_PHYSICAL_STAGES};
use crate::fixed::{FixedError, FixedPoint, WORD_BITS};
use crate::neuron::{ModelKind, SpikeTrain};

#[derive(Debug, Error)]
pub enum HwError {
    #[error("invalid pipeline spec: {0}")]
    InvalidSpec(String),
    #[error("{n} neurons cannot fill {needed} pipeline stages")]
    Infeasible { n: usize, needed: usize },
    #[error("neuron {neuron} uses {found}, pipeline is built for {expected}")]
    ModelMismatch {
        neuron: usize,
        expected: ModelKind,
        found: ModelKind,
    },
    #[error("expected {expected} neurons, got {got}")]
    NeuronCount { expected: usize, got: usize },
    #[error("non-finite input at cycle {cycle} for neuron {neuron}")]
    NonFiniteInput { cycle: u64, neuron: usize },
    #[error(transparent)]
    Fixed(#[from] FixedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Stage counts, buffer depths and word lengths of one neuron pack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub model: ModelKind,
    pub v_s: usize,
    pub u_s: usize,
    pub i_s: usize,
    pub d_s: usize,
    pub v_buffer_size: usize,
    pub u_buffer_size: usize,
    pub n: usize,
    pub wb: u32,
    pub vb: u32,
    pub ub: u32,
}

impl PipelineSpec {
    /// Checks the synchronization identities.
    pub fn validate(&self) -> Result<(), HwError> {
        let bad = |m: String| Err(HwError::InvalidSpec(m));
        if self.v_s == 0 {
            return bad("V pipeline needs at least one stage".into());
        }
        if self.n != self.v_buffer_size + self.v_s || self.n != self.u_buffer_size + self.u_s {
            return bad(format!(
                "N = {} must equal V_buffer + V_S = {} and U_buffer + U_S = {}",
                self.n,
                self.v_buffer_size + self.v_s,
                self.u_buffer_size + self.u_s
            ));
        }
        if self.v_buffer_size != self.u_buffer_size || self.v_s != self.u_s {
            return bad("V and U pipelines must have equal stages and buffers".into());
        }
        if self.i_s + self.d_s + self.v_s != self.n {
            return bad(format!(
                "I_S + D_S + V_S = {} differs from N = {}",
                self.i_s + self.d_s + self.v_s,
                self.n
            ));
        }
        if self.v_s != v_stages(self.model) {
            return bad(format!(
                "{} uses {} V stages, spec has {}",
                self.model,
                v_stages(self.model),
                self.v_s
            ));
        }
        if [self.wb, self.vb, self.ub].iter().any(|&b| b == 0 || b > 32) {
            return bad("word lengths must be in 1..=32 bits".into());
        }
        Ok(())
    }

    /// Delay stages appended to the U pipeline.
    pub fn u_delay_stages(&self) -> usize {
        self.u_s.saturating_sub(U_PHYSICAL_STAGES)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// Sizes the pipeline for `n_neurons` neurons and an `i_s`-stage input unit.
pub fn plan_pipeline(model: ModelKind, n_neurons: usize, i_s: usize) -> Result<PipelineSpec, HwError> {
    let v_s = v_stages(model);
    if n_neurons < i_s + v_s {
        return Err(HwError::Infeasible {
            n: n_neurons,
            needed: i_s + v_s,
        });
    }
    let spec = PipelineSpec {
        model,
        v_s,
        u_s: v_s,
        i_s,
        d_s: n_neurons - i_s - v_s,
        v_buffer_size: n_neurons - v_s,
        u_buffer_size: n_neurons - v_s,
        n: n_neurons,
        wb: WORD_BITS,
        vb: WORD_BITS,
        ub: WORD_BITS,
    };
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalPath {
    Multiply,
    Add,
}

/// Minimum resources of the V scheduling.
///
/// Reported clock rates are not modeled; only the class of the slowest
/// stage is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub model: ModelKind,
    pub adders: u32,
    pub multipliers: u32,
    pub multiplexers: u32,
    pub critical_path: CriticalPath,
    pub v_pipeline_stages: usize,
}

pub fn resources(model: ModelKind) -> ResourceReport {
    let (adders, multipliers, multiplexers) = match model {
        ModelKind::Original | ModelKind::OriginalDiscretized => (6, 1, 2),
        ModelKind::Pwl2 => (6, 0, 3),
        ModelKind::Pwl3 => (8, 0, 4),
        ModelKind::Pwl4 => (11, 0, 5),
    };
    ResourceReport {
        model,
        adders,
        multipliers,
        multiplexers,
        critical_path: if multipliers > 0 {
            CriticalPath::Multiply
        } else {
            CriticalPath::Add
        },
        v_pipeline_stages: v_stages(model),
    }
}

/// One unit occupancy in the schedule trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cycle: u64,
    pub unit: String,
    pub neuron_id: usize,
}

pub fn write_trace_csv<W: Write>(events: &[TraceEvent], out: W) -> Result<(), HwError> {
    let mut w = csv::Writer::from_writer(out);
    for e in events {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

/// Output of [`schedule_simulate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleRun {
    pub trains: Vec<SpikeTrain>,
    pub final_states: Vec<FixedState>,
    pub saturated_steps: Vec<usize>,
    pub stats: OpStats,
    pub cycles: u64,
    #[serde(skip)]
    pub trace: Option<Vec<TraceEvent>>,
}

struct Slot {
    neuron: usize,
    step: usize,
    regs: Vec<i64>,
    saturated: bool,
}

/// Emulates `n_steps` time steps of the shared pipeline clock by clock.
///
/// `input(neuron, t_ms)` is sampled like [`crate::datapath::fixed_simulate`]
/// samples its input, so each train equals an independent fixed-point run.
pub fn schedule_simulate<F>(
    spec: &PipelineSpec,
    neurons: &[FixedNeuron],
    initial: &[FixedState],
    mut input: F,
    n_steps: usize,
    record_trace: bool,
) -> Result<ScheduleRun, HwError>
where
    F: FnMut(usize, f64) -> f64,
{
    spec.validate()?;
    let n = spec.n;
    for (got, expected) in [(neurons.len(), n), (initial.len(), n)] {
        if got != expected {
            return Err(HwError::NeuronCount { expected, got });
        }
    }
    for (j, nr) in neurons.iter().enumerate() {
        if nr.params.model != spec.model {
            return Err(HwError::ModelMismatch {
                neuron: j,
                expected: spec.model,
                found: nr.params.model,
            });
        }
        if nr.program.v_stages.len() != spec.v_s || nr.program.u_stages.len() > spec.u_s {
            return Err(HwError::InvalidSpec(format!(
                "neuron {j} program does not fit the pipeline"
            )));
        }
    }
    let mut trace = record_trace.then(Vec::new);
    fn log(trace: &mut Option<Vec<TraceEvent>>, cycle: u64, unit: &str, neuron: usize) {
        if let Some(t) = trace.as_mut() {
            t.push(TraceEvent {
                cycle,
                unit: unit.to_string(),
                neuron_id: neuron,
            });
        }
    }

    let lead = spec.i_s + spec.d_s;
    let total_entries = n * n_steps;
    let dts: Vec<f64> = neurons.iter().map(|nr| nr.config.dt_ms()).collect();
    // Input for the V-pipeline entry at `cycle`, if any.
    let mut compute_input = |cycle: u64| -> Result<Option<(usize, FixedPoint, bool)>, HwError> {
        let e = cycle as usize;
        if e >= total_entries {
            return Ok(None);
        }
        let (j, s) = (e % n, e / n);
        let i = input(j, s as f64 * dts[j]);
        if !i.is_finite() {
            return Err(HwError::NonFiniteInput { cycle, neuron: j });
        }
        let (fx, sat) = neurons[j].config.format.encode(i);
        Ok(Some((j, fx, sat)))
    };
    let mut i_line: VecDeque<Option<(usize, FixedPoint, bool)>> = VecDeque::with_capacity(lead + 1);
    for c in 0..lead as u64 {
        i_line.push_back(compute_input(c)?);
    }

    let mut buffer: VecDeque<(usize, FixedState)> = initial.iter().copied().enumerate().collect();
    let mut pipe: Vec<Option<Slot>> = (0..spec.v_s).map(|_| None).collect();
    let mut stats = OpStats::default();
    let mut spikes = vec![Vec::new(); n];
    let mut saturated_steps = vec![0usize; n];
    let mut finals = initial.to_vec();
    let total_cycles = (total_entries + spec.v_s) as u64;

    for cycle in 0..total_cycles {
        // Retire the slot leaving the last stage through the control unit.
        if let Some(slot) = pipe[spec.v_s - 1].take() {
            let nr = &neurons[slot.neuron];
            let out = nr.finish(&slot.regs, slot.saturated, &mut stats);
            log(&mut trace, cycle, "control", slot.neuron);
            if out.fired {
                spikes[slot.neuron].push(slot.step);
            }
            if out.saturated {
                saturated_steps[slot.neuron] += 1;
            }
            finals[slot.neuron] = out.state;
            buffer.push_back((slot.neuron, out.state));
        }
        pipe.rotate_right(1);

        // The input unit starts work for the entry `lead` cycles ahead.
        i_line.push_back(compute_input(cycle + lead as u64)?);
        let entering = i_line.pop_front().flatten();
        if let Some((j, i_in, i_sat)) = entering {
            let (bj, state) = buffer.pop_front().expect("buffer holds every idle neuron");
            debug_assert_eq!(bj, j, "input and state streams out of sync");
            debug_assert!(cycle < n as u64 || buffer.len() == spec.v_buffer_size);
            let regs = neurons[j].load(state, i_in);
            pipe[0] = Some(Slot {
                neuron: j,
                step: cycle as usize / n,
                regs,
                saturated: i_sat,
            });
        }

        for (k, slot) in pipe.iter_mut().enumerate() {
            let Some(slot) = slot.as_mut() else { continue };
            let prog = &neurons[slot.neuron].program;
            for op in &prog.v_stages[k] {
                slot.saturated |= op.exec(&mut slot.regs, &mut stats);
            }
            match prog.u_stages.get(k) {
                Some(ops) => {
                    for op in ops {
                        slot.saturated |= op.exec(&mut slot.regs, &mut stats);
                    }
                }
                None => log(&mut trace, cycle, "u_delay", slot.neuron),
            }
            if trace.is_some() {
                log(&mut trace, cycle, &format!("v_stage{k}"), slot.neuron);
            }
        }
        if let Some(Some((j, _, _))) = i_line.back() {
            log(&mut trace, cycle, "i_unit", *j);
        }
    }

    let trains = (0..n)
        .map(|j| SpikeTrain {
            spike_steps: std::mem::take(&mut spikes[j]),
            dt: dts[j],
            n_steps,
            trace: None,
        })
        .collect();
    Ok(ScheduleRun {
        trains,
        final_states: finals,
        saturated_steps,
        stats,
        cycles: total_cycles,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapath::{fixed_simulate, FixedConfig};
    use crate::neuron::KCoeffs;
    use crate::registry::{hardware_tonic, NeuronType};

    #[test]
    fn spec_json_round_trip() {
        let spec = plan_pipeline(ModelKind::Pwl4, 12, 3).unwrap();
        let parsed: PipelineSpec = serde_json::from_str(&spec.to_json().unwrap()).unwrap();
        assert_eq!(parsed, spec);
    }

    #[test]
    fn plan_examples() {
        let p = plan_pipeline(ModelKind::Pwl2, 30, 25).unwrap();
        assert_eq!((p.v_s, p.d_s, p.v_buffer_size), (5, 0, 25));
        let p = plan_pipeline(ModelKind::Pwl4, 30, 20).unwrap();
        assert_eq!(
            (p.v_s, p.u_s, p.d_s, p.v_buffer_size, p.u_buffer_size),
            (7, 7, 3, 23, 23)
        );
        assert_eq!(p.n, p.v_buffer_size + p.v_s);
        assert_eq!(p.n, p.i_s + p.d_s + p.v_s);
        assert_eq!(p.u_delay_stages(), 4);
        assert!(matches!(
            plan_pipeline(ModelKind::Pwl3, 5, 25),
            Err(HwError::Infeasible { n: 5, needed: 31 })
        ));
    }

    #[test]
    fn broken_spec_is_rejected() {
        let mut p = plan_pipeline(ModelKind::Pwl3, 20, 4).unwrap();
        p.d_s += 1;
        assert!(matches!(p.validate(), Err(HwError::InvalidSpec(_))));
        let run = schedule_simulate(&p, &[], &[], |_, _| 0.0, 1, false);
        assert!(matches!(run, Err(HwError::InvalidSpec(_))));
    }

    #[test]
    fn resource_table() {
        let r = resources(ModelKind::Original);
        assert_eq!(
            (r.adders, r.multipliers, r.multiplexers, r.critical_path),
            (6, 1, 2, CriticalPath::Multiply)
        );
        let r = resources(ModelKind::Pwl4);
        assert_eq!(
            (r.adders, r.multipliers, r.multiplexers, r.critical_path),
            (11, 0, 5, CriticalPath::Add)
        );
        let r = resources(ModelKind::Pwl2);
        assert_eq!(
            (r.adders, r.multipliers, r.multiplexers, r.critical_path),
            (6, 0, 3, CriticalPath::Add)
        );
        assert_eq!(resources(ModelKind::Pwl3).v_pipeline_stages, 6);
    }

    #[test]
    fn identical_neurons_match_single_run() {
        let params = hardware_tonic(ModelKind::Pwl2, KCoeffs::two(0.75, 20.0)).unwrap();
        let nr = FixedNeuron::compile(&params, FixedConfig::default()).unwrap();
        let spec = plan_pipeline(ModelKind::Pwl2, 8, 2).unwrap();
        let init = FixedState::encode(-65.0, params.b * -65.0);
        let run = schedule_simulate(&spec, &vec![nr.clone(); 8], &[init; 8], |_, _| 20.0, 4000, false).unwrap();
        let single = fixed_simulate(&nr, init, |_| 20.0, 4000, false).unwrap();
        assert!(!single.train.spike_steps.is_empty());
        for t in &run.trains {
            assert_eq!(t.spike_steps, single.train.spike_steps);
        }
        assert_eq!(run.stats.general_muls, 0);
        assert_eq!(run.final_states[3], single.final_state);
    }

    #[test]
    fn mixed_types_match_direct_runs() {
        let model = ModelKind::Pwl3;
        let spec = plan_pipeline(model, 12, 3).unwrap();
        let cfg = FixedConfig::default();
        let types: Vec<NeuronType> = NeuronType::ALL.iter().copied().take(12).collect();
        let neurons: Vec<FixedNeuron> = types
            .iter()
            .map(|t| {
                let p = t.params().with_model(model, t.coeffs().pwl3.k).unwrap();
                FixedNeuron::compile(&p, cfg).unwrap()
            })
            .collect();
        let init: Vec<FixedState> = types
            .iter()
            .map(|t| {
                let s = t.initial_state();
                FixedState::encode(s.v, s.u)
            })
            .collect();
        let drive = |j: usize, t: f64| 2.0 + j as f64 + (t / 40.0).sin() * 3.0;
        let run = schedule_simulate(&spec, &neurons, &init, drive, 3000, true).unwrap();
        for (j, nr) in neurons.iter().enumerate() {
            let direct = fixed_simulate(nr, init[j], |t| drive(j, t), 3000, false).unwrap();
            assert_eq!(run.trains[j].spike_steps, direct.train.spike_steps, "neuron {j}");
            assert_eq!(run.final_states[j], direct.final_state);
        }
        assert_eq!(run.stats.general_muls, 0);
        let trace = run.trace.unwrap();
        assert!(trace.iter().any(|e| e.unit == "u_delay"));
        let mut buf = Vec::new();
        write_trace_csv(&trace[..5], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("cycle,unit,neuron_id"));
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let spec = plan_pipeline(ModelKind::Pwl2, 6, 1).unwrap();
        let params = hardware_tonic(ModelKind::Pwl2, KCoeffs::two(0.75, 20.0)).unwrap();
        let nr = FixedNeuron::compile(&params, FixedConfig::default()).unwrap();
        let init = FixedState::encode(-65.0, 0.0);
        let r = schedule_simulate(&spec, &vec![nr.clone(); 5], &[init; 5], |_, _| 0.0, 2, false);
        assert!(matches!(r, Err(HwError::NeuronCount { expected: 6, got: 5 })));
        let r = schedule_simulate(&spec, &vec![nr; 6], &[init; 6], |_, _| f64::NAN, 2, false);
        assert!(matches!(r, Err(HwError::NonFiniteInput { .. })));
    }
}
