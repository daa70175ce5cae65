//! Fixed-point neuron datapath.
//!
//! One Euler step is compiled into a short program of micro-operations
//! grouped into pipeline stages: the V pipeline computes `v[n+1]`, the U
//! pipeline `u[n+1]`, and the control unit applies the threshold/reset rule.
//! State registers are Q8.12; intermediate registers are 48-bit wide so the
//! adder trees never overflow mid-computation. The same program drives both
//! the direct simulation here and the shared pipeline in [`crate::hw`].

use serde::{Deserialize, Serialize};

use crate::fixed::{plan_for, CoeffPolicy, FixedError, FixedPoint, QFormat, ShiftAddPlan, FRAC_BITS};
use crate::neuron::{ModelKind, NeuronError, NeuronParams, SpikeTrain, BREAKPOINT};

/// Width of the intermediate accumulator.
pub const ACC_BITS: u32 = 48;

pub const V_REG: usize = 0;
pub const U_REG: usize = 1;
pub const I_REG: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OpKind {
    Add(usize, usize),
    Sub(usize, usize),
    Abs(usize),
    /// Adds a stored constant; offsets are adder inputs, not multiplies.
    AddConst(usize, i64),
    /// Shift-add constant multiplication.
    MulPlan(usize, ShiftAddPlan),
    /// General multiplier computing `r²`.
    Square(usize),
    /// Arithmetic right shift.
    Shr(usize, u32),
    Shl(usize, u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroOp {
    pub dst: usize,
    pub kind: OpKind,
}

/// Operation counts recorded while executing a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpStats {
    pub adds: u64,
    pub abs: u64,
    pub shifts: u64,
    /// Constant multiplications done with shifts and adds.
    pub shift_add_muls: u64,
    /// True multiplier uses.
    pub general_muls: u64,
    pub compares: u64,
}

impl OpStats {
    pub fn merge(&mut self, o: &OpStats) {
        self.adds += o.adds;
        self.abs += o.abs;
        self.shifts += o.shifts;
        self.shift_add_muls += o.shift_add_muls;
        self.general_muls += o.general_muls;
        self.compares += o.compares;
    }
}

#[inline]
fn sat_wide(x: i128) -> (i64, bool) {
    let max = (1i128 << (ACC_BITS - 1)) - 1;
    let min = -(1i128 << (ACC_BITS - 1));
    if x > max {
        (max as i64, true)
    } else if x < min {
        (min as i64, true)
    } else {
        (x as i64, false)
    }
}

fn plan_product(x: i64, plan: &ShiftAddPlan) -> i128 {
    let guard = plan.terms.iter().map(|t| (-t.shift).max(0)).max().unwrap_or(0);
    let mut acc: i128 = 0;
    for t in &plan.terms {
        acc += t.sign as i128 * ((x as i128) << (guard + t.shift) as u32);
    }
    acc >> guard
}

impl MicroOp {
    /// Executes the op on wide registers; returns true if it saturated.
    #[inline]
    pub fn exec(&self, regs: &mut [i64], stats: &mut OpStats) -> bool {
        let r = |i: usize| regs[i] as i128;
        let wide = match &self.kind {
            OpKind::Add(a, b) => {
                stats.adds += 1;
                r(*a) + r(*b)
            }
            OpKind::Sub(a, b) => {
                stats.adds += 1;
                r(*a) - r(*b)
            }
            OpKind::Abs(a) => {
                stats.abs += 1;
                r(*a).abs()
            }
            OpKind::AddConst(a, c) => {
                stats.adds += 1;
                r(*a) + *c as i128
            }
            OpKind::MulPlan(a, plan) => {
                stats.shift_add_muls += 1;
                stats.shifts += plan.len() as u64;
                stats.adds += plan.adder_count() as u64;
                plan_product(regs[*a], plan)
            }
            OpKind::Square(a) => {
                stats.general_muls += 1;
                (r(*a) * r(*a)) >> FRAC_BITS
            }
            OpKind::Shr(a, s) => {
                stats.shifts += 1;
                r(*a) >> *s
            }
            OpKind::Shl(a, s) => {
                stats.shifts += 1;
                r(*a) << *s
            }
        };
        let (v, sat) = sat_wide(wide);
        regs[self.dst] = v;
        sat
    }
}

/// Settings for compiling a neuron into a fixed-point datapath.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedConfig {
    pub format: QFormat,
    /// `dt = 2^-dt_shift` ms.
    pub dt_shift: u32,
    pub policy: CoeffPolicy,
    pub max_terms: usize,
}

impl Default for FixedConfig {
    fn default() -> Self {
        FixedConfig {
            format: QFormat::Q8_12,
            dt_shift: 4,
            policy: CoeffPolicy::Quantize,
            max_terms: 6,
        }
    }
}

impl FixedConfig {
    pub fn dt_ms(&self) -> f64 {
        2f64.powi(-(self.dt_shift as i32))
    }
}

/// Number of V-pipeline stages per model.
pub fn v_stages(model: ModelKind) -> usize {
    match model {
        ModelKind::Pwl2 => 5,
        ModelKind::Pwl3 => 6,
        ModelKind::Pwl4 => 7,
        ModelKind::Original | ModelKind::OriginalDiscretized => 6,
    }
}

/// Physical U-pipeline stages before delay padding.
pub const U_PHYSICAL_STAGES: usize = 3;

/// Compiled per-neuron datapath.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Program {
    pub v_stages: Vec<Vec<MicroOp>>,
    pub u_stages: Vec<Vec<MicroOp>>,
    pub n_regs: usize,
    pub v_out: usize,
    pub u_out: usize,
}

struct Builder {
    ops: Vec<MicroOp>,
    next: usize,
}

impl Builder {
    fn new() -> Self {
        Builder {
            ops: Vec::new(),
            next: I_REG + 1,
        }
    }

    fn push(&mut self, kind: OpKind) -> usize {
        let dst = self.next;
        self.next += 1;
        self.ops.push(MicroOp { dst, kind });
        dst
    }
}

fn raw_const(x: f64) -> i64 {
    (x * (1u64 << FRAC_BITS) as f64).round_ties_even() as i64
}

/// Splits `ops` into `n` contiguous groups of near-equal size.
fn partition(ops: Vec<MicroOp>, n: usize) -> Vec<Vec<MicroOp>> {
    let len = ops.len();
    let mut out: Vec<Vec<MicroOp>> = (0..n).map(|_| Vec::new()).collect();
    for (i, op) in ops.into_iter().enumerate() {
        out[i * n / len.max(1)].push(op);
    }
    out
}

impl Program {
    /// Builds the V and U trees for `params`.
    pub fn compile(params: &NeuronParams, cfg: &FixedConfig) -> Result<Program, FixedError> {
        let plan = |c: f64| plan_for(c, cfg.max_terms, cfg.policy);
        let k = params.k;
        let mut b = Builder::new();
        let f = match params.model {
            ModelKind::Pwl2 => {
                let x = b.push(OpKind::AddConst(V_REG, raw_const(-BREAKPOINT)));
                let ax = b.push(OpKind::Abs(x));
                let m = b.push(OpKind::MulPlan(ax, plan(k.k1)?));
                b.push(OpKind::AddConst(m, -raw_const(k.k2)))
            }
            ModelKind::Pwl3 => {
                let x = b.push(OpKind::AddConst(V_REG, raw_const(-BREAKPOINT)));
                let p = b.push(OpKind::AddConst(x, raw_const(k.k2)));
                let q = b.push(OpKind::AddConst(x, -raw_const(k.k2)));
                let ap = b.push(OpKind::Abs(p));
                let aq = b.push(OpKind::Abs(q));
                let s = b.push(OpKind::Add(ap, aq));
                let m = b.push(OpKind::MulPlan(s, plan(k.k1)?));
                b.push(OpKind::AddConst(m, -raw_const(k.k3 * k.k2 * k.k1)))
            }
            ModelKind::Pwl4 => {
                let x = b.push(OpKind::AddConst(V_REG, raw_const(-BREAKPOINT)));
                let p = b.push(OpKind::AddConst(x, raw_const(k.k3)));
                let q = b.push(OpKind::AddConst(x, -raw_const(k.k3)));
                let ap = b.push(OpKind::Abs(p));
                let aq = b.push(OpKind::Abs(q));
                let s = b.push(OpKind::Add(ap, aq));
                let m2 = b.push(OpKind::MulPlan(s, plan(k.k2)?));
                let ax = b.push(OpKind::Abs(x));
                let m1 = b.push(OpKind::MulPlan(ax, plan(k.k1)?));
                let t = b.push(OpKind::Add(m2, m1));
                b.push(OpKind::AddConst(t, -raw_const(4.0 * k.k2 * k.k3)))
            }
            ModelKind::Original => {
                let sq = b.push(OpKind::Square(V_REG));
                let q = b.push(OpKind::MulPlan(sq, plan(0.04)?));
                let l = b.push(OpKind::MulPlan(V_REG, plan(5.0)?));
                let s = b.push(OpKind::Add(q, l));
                b.push(OpKind::AddConst(s, raw_const(140.0)))
            }
            ModelKind::OriginalDiscretized => {
                let sq = b.push(OpKind::Square(V_REG));
                let q = b.push(OpKind::Shr(sq, 5));
                let l = b.push(OpKind::Shl(V_REG, 2));
                let s = b.push(OpKind::Add(q, l));
                b.push(OpKind::AddConst(s, raw_const(140.0)))
            }
        };
        let t = b.push(OpKind::Sub(f, U_REG));
        let t = b.push(OpKind::Add(t, I_REG));
        let t = b.push(OpKind::Shr(t, cfg.dt_shift));
        let v_out = b.push(OpKind::Add(V_REG, t));
        let v_ops = std::mem::take(&mut b.ops);

        let bv = b.push(OpKind::MulPlan(V_REG, plan(params.b)?));
        let diff = b.push(OpKind::Sub(bv, U_REG));
        let adu = b.push(OpKind::MulPlan(diff, plan(params.a)?));
        let sdu = b.push(OpKind::Shr(adu, cfg.dt_shift));
        let u_out = b.push(OpKind::Add(U_REG, sdu));
        let u_ops = std::mem::take(&mut b.ops);

        Ok(Program {
            v_stages: partition(v_ops, v_stages(params.model)),
            u_stages: partition(u_ops, U_PHYSICAL_STAGES),
            n_regs: b.next,
            v_out,
            u_out,
        })
    }

    pub fn all_ops(&self) -> impl Iterator<Item = &MicroOp> {
        self.v_stages.iter().chain(self.u_stages.iter()).flatten()
    }
}

/// Fixed-point `(v, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FixedState {
    pub v: FixedPoint,
    pub u: FixedPoint,
}

impl FixedState {
    pub fn encode(v: f64, u: f64) -> FixedState {
        FixedState {
            v: FixedPoint::from_f64(v),
            u: FixedPoint::from_f64(u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedStepOutput {
    pub state: FixedState,
    pub fired: bool,
    pub emitted_v: FixedPoint,
    pub saturated: bool,
}

/// A neuron compiled for fixed-point simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedNeuron {
    pub params: NeuronParams,
    pub config: FixedConfig,
    pub program: Program,
    pub c: FixedPoint,
    pub d: FixedPoint,
    pub v_th: FixedPoint,
}

impl FixedNeuron {
    pub fn compile(params: &NeuronParams, config: FixedConfig) -> Result<FixedNeuron, FixedError> {
        config.format.validate()?;
        let enc = |x: f64| config.format.encode(x).0;
        Ok(FixedNeuron {
            params: *params,
            config,
            program: Program::compile(params, &config)?,
            c: enc(params.c),
            d: enc(params.d),
            v_th: enc(params.v_th),
        })
    }

    /// Fresh register file holding the state and input.
    pub fn load(&self, state: FixedState, i_in: FixedPoint) -> Vec<i64> {
        let mut regs = vec![0i64; self.program.n_regs];
        regs[V_REG] = state.v.raw() as i64;
        regs[U_REG] = state.u.raw() as i64;
        regs[I_REG] = i_in.raw() as i64;
        regs
    }

    /// Control unit: narrows the pipeline outputs and applies threshold/reset.
    pub fn finish(&self, regs: &[i64], mut saturated: bool, stats: &mut OpStats) -> FixedStepOutput {
        let fmt = &self.config.format;
        let (v, sv) = fmt.narrow(regs[self.program.v_out]);
        let (u, su) = fmt.narrow(regs[self.program.u_out]);
        saturated |= sv | su;
        stats.compares += 1;
        if v >= self.v_th {
            stats.adds += 1;
            let (u2, s2) = fmt.add(u, self.d);
            FixedStepOutput {
                state: FixedState { v: self.c, u: u2 },
                fired: true,
                emitted_v: self.v_th,
                saturated: saturated | s2,
            }
        } else {
            FixedStepOutput {
                state: FixedState { v, u },
                fired: false,
                emitted_v: v,
                saturated,
            }
        }
    }

    /// One Euler step in fixed point, counting operations into `stats`.
    pub fn step_counted(&self, state: FixedState, i_in: FixedPoint, stats: &mut OpStats) -> FixedStepOutput {
        let mut regs = self.load(state, i_in);
        let mut sat = false;
        for op in self.program.all_ops() {
            sat |= op.exec(&mut regs, stats);
        }
        self.finish(&regs, sat, stats)
    }
}

/// One fixed-point Euler step.
pub fn fixed_step(neuron: &FixedNeuron, state: FixedState, i_in: FixedPoint) -> FixedStepOutput {
    neuron.step_counted(state, i_in, &mut OpStats::default())
}

/// Result of a fixed-point run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedRun {
    pub train: SpikeTrain,
    /// Steps in which any register saturated.
    pub saturated_steps: usize,
    pub stats: OpStats,
    pub final_state: FixedState,
}

/// Runs `n_steps` fixed-point steps; the input function is sampled at
/// `t = s · dt` and encoded to Q8.12.
pub fn fixed_simulate<F>(
    neuron: &FixedNeuron,
    initial: FixedState,
    mut input: F,
    n_steps: usize,
    record_trace: bool,
) -> Result<FixedRun, NeuronError>
where
    F: FnMut(f64) -> f64,
{
    if n_steps == 0 {
        return Err(NeuronError::InvalidParams("n_steps must be at least 1".into()));
    }
    let dt = neuron.config.dt_ms();
    let mut stats = OpStats::default();
    let mut trace = record_trace.then(|| Vec::with_capacity(n_steps));
    let mut spikes = Vec::new();
    let mut state = initial;
    let mut saturated_steps = 0;
    for s in 0..n_steps {
        let i = input(s as f64 * dt);
        if !i.is_finite() {
            return Err(NeuronError::NonFinite {
                step: s,
                v: state.v.to_f64(),
                u: state.u.to_f64(),
            });
        }
        let (i_fx, si) = neuron.config.format.encode(i);
        let out = neuron.step_counted(state, i_fx, &mut stats);
        if out.saturated || si {
            saturated_steps += 1;
        }
        if out.fired {
            spikes.push(s);
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(out.emitted_v.to_f64());
        }
        state = out.state;
    }
    Ok(FixedRun {
        train: SpikeTrain {
            spike_steps: spikes,
            dt,
            n_steps,
            trace,
        },
        saturated_steps,
        stats,
        final_state: state,
    })
}
