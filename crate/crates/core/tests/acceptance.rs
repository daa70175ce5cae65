//! Acceptance suite: one PASS/FAIL line per criterion on stderr, followed by
//! the measured numbers. Exits nonzero if any criterion fails.

use std::io::Write;
use std::time::Instant;

use spikepwl::datapath::{fixed_simulate, FixedConfig, FixedNeuron, FixedState};
use spikepwl::hw::{plan_pipeline, resources, schedule_simulate, CriticalPath};
use spikepwl::learning::{evaluate, synthetic_dataset, train, weight_update, LearnerConfig, LearnerState, Pattern};
use spikepwl::network::{build_network, mre, population_rhythm, run_network, NetworkConfig};
use spikepwl::regime::{classify_staircase, collapse_runs, Regime, RegimeThresholds};
use spikepwl::registry::{hardware_k, hardware_tonic, regime_transition, staircase_k, staircase_levels};
use spikepwl::search::{
    err_peak, grid_search, type_cf_table, CfConfig, CfTarget, SearchError, SearchGrid, SearchOptions,
};
use spikepwl::{decompose_constant, simulate, KCoeffs, ModelKind, NeuronState, NeuronType, SimOptions, Stimulus};

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn line(msg: &str) {
    let mut e = std::io::stderr().lock();
    let _ = writeln!(e, "{msg}");
}

fn c1_err_peak() -> Outcome {
    let mut mismatches = Vec::new();
    for t in NeuronType::ALL {
        let rows = t.coeffs();
        for m in ModelKind::PWL {
            let row = rows.row(m).unwrap();
            let got = err_peak(m, row.k);
            if (got - row.err_p).abs() > 1e-9 {
                mismatches.push(format!(
                    "{} {}: table {} computed {}",
                    t.key(),
                    m.name(),
                    row.err_p,
                    got
                ));
            }
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!("{} of 60 cells differ {:?}", mismatches.len(), mismatches),
    }
}

fn c2_staircase() -> Outcome {
    let segment_ms = 200.0;
    let dt = spikepwl::neuron::DEFAULT_DT;
    let mut all = true;
    let mut parts = Vec::new();
    for m in [ModelKind::Original, ModelKind::Pwl4, ModelKind::Pwl3, ModelKind::Pwl2] {
        let params = regime_transition(m, staircase_k(m)).unwrap();
        let levels = staircase_levels(m);
        let stim = Stimulus::Staircase {
            levels: levels.to_vec(),
            segment_ms,
        };
        let opts = SimOptions::for_duration(segment_ms * levels.len() as f64, dt);
        let rest = NeuronState::equilibrium(&params, levels[0]).unwrap();
        let train = simulate(&params, rest, &stim, opts).unwrap();
        let seg = (segment_ms / dt).round() as usize;
        let labels = classify_staircase(&train, levels.len(), seg, RegimeThresholds::default()).unwrap();
        let ok = collapse_runs(&labels) == [Regime::Resting, Regime::Bursting, Regime::TonicSpiking];
        all &= ok;
        parts.push(format!("{}: {:?}", m.name(), labels));
    }
    Outcome {
        pass: all,
        detail: parts.join("; "),
    }
}

fn c3_cf_ordering() -> Outcome {
    let cfg = CfConfig::default();
    let mut means = Vec::new();
    let mut table = String::new();
    let mut per_model = Vec::new();
    for m in ModelKind::PWL {
        per_model.push(type_cf_table(m, &cfg));
    }
    let mut finite = [Vec::new(), Vec::new(), Vec::new()];
    for (i, t) in NeuronType::ALL.iter().enumerate() {
        let cells: Vec<&Result<f64, SearchError>> = per_model.iter().map(|r| &r[i].1).collect();
        let reference_silent = cells
            .iter()
            .any(|c| matches!(c, Err(SearchError::NoSpikeFound { which: "reference" })));
        let shown: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Ok(v) => format!("{v:.3}"),
                Err(e) => format!("({e})"),
            })
            .collect();
        table.push_str(&format!("\n    {:<30} {}", t.key(), shown.join("  ")));
        if reference_silent {
            continue;
        }
        for (k, c) in cells.iter().enumerate() {
            finite[k].push(match c {
                Ok(v) => *v,
                Err(_) => f64::INFINITY,
            });
        }
    }
    for (k, m) in ModelKind::PWL.iter().enumerate() {
        let v = &finite[k];
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let fin: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
        let fin_mean = fin.iter().sum::<f64>() / fin.len().max(1) as f64;
        means.push((m.name(), mean, fin_mean, v.len(), fin.len()));
    }
    let pass = means[2].1 < means[1].1 && means[1].1 < means[0].1;
    Outcome {
        pass,
        detail: format!(
            "mean CF over comparable types (failed candidates = inf) {:?}; columns pwl2 pwl3 pwl4:{}",
            means, table
        ),
    }
}

fn c4_search_zone() -> Outcome {
    let cfg = CfConfig::default();
    let target = CfTarget::for_type(NeuronType::TonicSpiking, &cfg);
    let s = grid_search(
        ModelKind::Pwl2,
        &target,
        &SearchGrid::pwl2_desk(),
        &cfg,
        &SearchOptions::default(),
    )
    .unwrap();
    let paper = KCoeffs::two(0.75, 20.0);
    let at = s.find(paper).map(|i| s.cf[i]).unwrap_or(f64::INFINITY);
    let ratio = at / s.min_cf();
    let stable = s.in_stable_area(paper);
    Outcome {
        pass: ratio <= 1.5 && stable,
        detail: format!(
            "min CF {:.4} at {:?}; CF(0.75, 20) = {:.4} ({:.2}x); inside stable area: {}; stable points {}",
            s.min_cf(),
            s.argmin_k(),
            at,
            ratio,
            stable,
            s.stable_area.len()
        ),
    }
}

fn c5_network_mre() -> Outcome {
    let models = [
        (ModelKind::Pwl2, hardware_k(ModelKind::Pwl2).unwrap()),
        (ModelKind::Pwl3, hardware_k(ModelKind::Pwl3).unwrap()),
        (ModelKind::Pwl4, hardware_k(ModelKind::Pwl4).unwrap()),
    ];
    let mut sums = [0.0; 3];
    let mut per_seed = Vec::new();
    for seed in 1..=3 {
        let cfg = NetworkConfig {
            seed,
            ..NetworkConfig::tonic_dominant()
        };
        let reference = run_network(&build_network(&cfg).unwrap()).unwrap();
        let mut row = Vec::new();
        for (k, (m, kc)) in models.iter().enumerate() {
            let cand = run_network(&build_network(&cfg.with_model(*m, *kc)).unwrap()).unwrap();
            let e = mre(&reference, &cand).unwrap();
            sums[k] += e / 3.0;
            row.push(format!("{e:.2}"));
        }
        per_seed.push(format!(
            "seed {seed} rate {:.1} Hz MRE {:?}",
            reference.mean_rate_hz(),
            row
        ));
    }
    let [m2, m3, m4] = sums;
    let pass = m4 < m3 && m3 < m2 && (3.0..=12.0).contains(&m2) && m4 <= 4.0;
    Outcome {
        pass,
        detail: format!(
            "mean MRE pwl2 {m2:.2}% pwl3 {m3:.2}% pwl4 {m4:.2}%; ordering {}, pwl2 in [3,12] {}, pwl4 <= 4 {}; {}",
            m4 < m3 && m3 < m2,
            (3.0..=12.0).contains(&m2),
            m4 <= 4.0,
            per_seed.join("; ")
        ),
    }
}

fn c6_rhythm() -> Outcome {
    let cfg = NetworkConfig {
        n_total: 2000,
        ..NetworkConfig::default()
    };
    let r = run_network(&build_network(&cfg).unwrap()).unwrap();
    let f = population_rhythm(&r, 5.0);
    let pass = matches!(f, Ok(x) if (3.0..=8.0).contains(&x));
    Outcome {
        pass,
        detail: format!(
            "dominant frequency {:?} Hz, mean rate {:.2} Hz",
            f.ok(),
            r.mean_rate_hz()
        ),
    }
}

/// Spike counts `(fixed, float)`, max per-spike deviation in steps and
/// saturated steps for the hardware tonic neuron over 1000 ms.
fn fixed_vs_float(m: ModelKind) -> (usize, usize, usize, usize) {
    let params = hardware_tonic(m, hardware_k(m).unwrap()).unwrap();
    let cfg = FixedConfig::default();
    let nr = FixedNeuron::compile(&params, cfg).unwrap();
    let dt = cfg.dt_ms();
    let (stim, _) = NeuronType::TonicSpiking.protocol();
    let n = (1000.0 / dt) as usize;
    let init = NeuronState::resting(&params, -65.0);
    let fixed = fixed_simulate(
        &nr,
        FixedState::encode(init.v, init.u),
        |t| stim.current_at(t),
        n,
        false,
    )
    .unwrap();
    let float = simulate(&params, init, &stim, SimOptions::for_duration(1000.0, dt)).unwrap();
    let (a, b) = (&fixed.train.spike_steps, &float.spike_steps);
    let max_dev = a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0);
    (a.len(), b.len(), max_dev, fixed.saturated_steps)
}

fn c7_fixed_point() -> Outcome {
    let (na, nb, max_dev, saturated) = fixed_vs_float(ModelKind::Pwl2);
    let count_ok = na.abs_diff(nb) <= 1;
    let others: Vec<String> = [ModelKind::Pwl3, ModelKind::Pwl4]
        .iter()
        .map(|&m| {
            let (x, y, d, _) = fixed_vs_float(m);
            format!("{} {x}/{y} spikes dev {d}", m.name())
        })
        .collect();

    let expected: [(f64, &[(i8, i32)]); 8] = [
        (0.203125, &[(1, -3), (1, -4), (1, -6)]),
        (0.3125, &[(1, -2), (1, -4)]),
        (0.75, &[(1, -1), (1, -2)]),
        (0.625, &[(1, -1), (1, -3)]),
        (0.375, &[(1, -2), (1, -3)]),
        (20.0, &[(1, 4), (1, 2)]),
        (11.0, &[(1, 3), (1, 1), (1, 0)]),
        (0.75, &[(1, -1), (1, -2)]),
    ];
    let mut bad = Vec::new();
    for (c, terms) in expected {
        let got: Vec<(i8, i32)> = decompose_constant(c, 6)
            .map(|p| p.terms.iter().map(|t| (t.sign, t.shift)).collect())
            .unwrap_or_default();
        if got != terms {
            bad.push(format!("{c}: {got:?}"));
        }
    }
    Outcome {
        pass: count_ok && max_dev <= 2 && bad.is_empty() && saturated == 0,
        detail: format!(
            "pwl2 spikes fixed {na} float {nb}; max timing deviation {max_dev} steps; saturated steps {saturated}; \
             decomposition mismatches {bad:?}; for reference {}",
            others.join(", ")
        ),
    }
}

fn c8_pipeline() -> Outcome {
    let cfg = FixedConfig::default();
    let mut notes = Vec::new();
    let mut ok = true;
    for m in ModelKind::PWL {
        let spec = plan_pipeline(m, 30, 10).unwrap();
        let types: Vec<NeuronType> = (0..30).map(|j| NeuronType::ALL[j % 20]).collect();
        let neurons: Vec<FixedNeuron> = types
            .iter()
            .map(|t| {
                let k = t.coeffs().row(m).unwrap().k;
                FixedNeuron::compile(&t.params().with_model(m, k).unwrap(), cfg).unwrap()
            })
            .collect();
        let init: Vec<FixedState> = types
            .iter()
            .map(|t| {
                let s = t.initial_state();
                FixedState::encode(s.v, s.u)
            })
            .collect();
        let drive = |j: usize, t: f64| (j % 7) as f64 * 3.0 + if t > 50.0 { 4.0 } else { 0.0 };
        let steps = 4000;
        let run = schedule_simulate(&spec, &neurons, &init, drive, steps, false).unwrap();
        let mut same = true;
        for (j, nr) in neurons.iter().enumerate() {
            let d = fixed_simulate(nr, init[j], |t| drive(j, t), steps, false).unwrap();
            same &= d.train.spike_steps == run.trains[j].spike_steps && d.final_state == run.final_states[j];
        }
        ok &= same && run.stats.general_muls == 0;
        notes.push(format!(
            "{}: identical {} general multiplies {}",
            m.name(),
            same,
            run.stats.general_muls
        ));
    }
    let mut identities = 0;
    for m in ModelKind::ALL {
        for n in 1..64 {
            for i_s in 0..n {
                if let Ok(s) = plan_pipeline(m, n, i_s) {
                    ok &= s.n == s.v_buffer_size + s.v_s
                        && s.n == s.u_buffer_size + s.u_s
                        && s.v_buffer_size == s.u_buffer_size
                        && s.v_s == s.u_s
                        && s.i_s + s.d_s + s.v_s == s.n;
                    identities += 1;
                }
            }
        }
    }
    let table = [
        (ModelKind::Original, 6, 1, 2, CriticalPath::Multiply),
        (ModelKind::Pwl2, 6, 0, 3, CriticalPath::Add),
        (ModelKind::Pwl3, 8, 0, 4, CriticalPath::Add),
        (ModelKind::Pwl4, 11, 0, 5, CriticalPath::Add),
    ];
    for (m, add, mul, mux, cp) in table {
        let r = resources(m);
        ok &= (r.adders, r.multipliers, r.multiplexers, r.critical_path) == (add, mul, mux, cp);
    }
    Outcome {
        pass: ok,
        detail: format!(
            "{}; {} specs checked; resource table matched",
            notes.join("; "),
            identities
        ),
    }
}

fn c9_learning() -> Outcome {
    // (a) single pattern, two outputs.
    let one = synthetic_dataset(1, 20, 16, 1, 0, 0.0, 11).train[0].clone();
    let cfg = LearnerConfig::new(320, 2);
    let mut st = LearnerState::new(cfg).unwrap();
    let mut reached = None;
    for n in 0..500 {
        st.present(&one, Some(0)).unwrap();
        let r = st.respond(&one).unwrap();
        if (r[0] - 80.0).abs() <= 5.0 && r[1] <= 20.0 {
            reached = Some((n + 1, r));
            break;
        }
    }
    let a_ok = reached.is_some();

    // (b) five classes, 29 train and 10 test writers.
    let ds = synthetic_dataset(5, 20, 16, 29, 10, 0.15, 12);
    let (trained, _) = train(
        &ds.train,
        LearnerConfig {
            epochs: 3,
            ..LearnerConfig::new(320, 5)
        },
    )
    .unwrap();
    let acc = evaluate(&trained, &ds.test).unwrap().accuracy;
    let b_ok = acc >= 0.7;

    // (c) sign of the update rule against a finite difference of E.
    let (agree, probes) = gradient_probes(&trained, &ds.train);
    let c_ok = agree as f64 >= 0.9 * probes as f64;
    Outcome {
        pass: a_ok && b_ok && c_ok,
        detail: format!(
            "(a) {:?}; (b) accuracy {:.3}; (c) sign agreement {}/{}",
            reached.map(|(n, r)| format!("{n} presentations, rates {:.1} / {:.1} Hz", r[0], r[1])),
            acc,
            agree,
            probes
        ),
    }
}

fn gradient_probes(state: &LearnerState, patterns: &[Pattern]) -> (usize, usize) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let h = 0.05;
    let (mut agree, mut probes) = (0, 0);
    let cfg = state.config;
    while probes < 100 {
        let p = &patterns[rng.random_range(0..patterns.len())];
        let j = rng.random_range(0..cfg.n_outputs);
        let i = rng.random_range(0..cfg.n_inputs);
        let target = if p.label == j { cfg.t_high() } else { cfg.t_low() } as f64;
        let err = |w: f64| -> Option<f64> {
            let mut s = state.clone();
            s.weights[i * cfg.n_outputs + j] = w;
            s.mean_period_steps(p, j).unwrap().map(|c| (c - target).powi(2))
        };
        let w0 = state.weight(i, j);
        let (Some(c0), Some(ep), Some(em)) = (state.mean_period_steps(p, j).unwrap(), err(w0 + h), err(w0 - h)) else {
            continue;
        };
        let dw = weight_update(
            if p.pixels[i] { 1.0 } else { -1.0 },
            c0.round() as u32,
            target as u32,
            cfg.alpha(),
        );
        let neg_grad = -(ep - em) / (2.0 * h);
        if dw == 0.0 || neg_grad == 0.0 {
            continue;
        }
        probes += 1;
        if dw.signum() == neg_grad.signum() {
            agree += 1;
        }
    }
    (agree, probes)
}

fn c10_determinism() -> Outcome {
    let mut notes = Vec::new();
    let net = || {
        let cfg = NetworkConfig {
            n_total: 100,
            sim_ms: 300.0,
            seed: 9,
            ..NetworkConfig::default()
        };
        let mut buf = Vec::new();
        run_network(&build_network(&cfg).unwrap())
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        buf
    };
    let net_ok = net() == net();
    notes.push(format!("network raster {net_ok}"));

    let learn = || {
        let ds = synthetic_dataset(3, 8, 8, 4, 2, 0.1, 3);
        let (st, _) = train(
            &ds.train,
            LearnerConfig {
                epochs: 1,
                ..LearnerConfig::new(64, 3)
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        st.write_weights_csv(&mut buf).unwrap();
        buf
    };
    let learn_ok = learn() == learn();
    notes.push(format!("trained weights {learn_ok}"));

    let surf = || {
        let cfg = CfConfig::default();
        let target = CfTarget::for_type(NeuronType::TonicSpiking, &cfg);
        let grid = SearchGrid {
            k1: spikepwl::search::GridAxis::new(0.5, 1.0, 0.25),
            k2: spikepwl::search::GridAxis::new(18.0, 20.0, 1.0),
            k3: None,
        };
        let s = grid_search(ModelKind::Pwl2, &target, &grid, &cfg, &SearchOptions::default()).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        buf
    };
    let surf_ok = surf() == surf();
    notes.push(format!("search surface {surf_ok}"));
    Outcome {
        pass: net_ok && learn_ok && surf_ok,
        detail: notes.join(", "),
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 vertex error reproduction", c1_err_peak),
        ("2 regime staircase", c2_staircase),
        ("3 error-complexity ordering", c3_cf_ordering),
        ("4 coefficient-search zone", c4_search_zone),
        ("5 network MRE ordering", c5_network_mre),
        ("6 population rhythm", c6_rhythm),
        ("7 fixed-point fidelity", c7_fixed_point),
        ("8 pipeline equivalence", c8_pipeline),
        ("9 learning convergence", c9_learning),
        ("10 determinism", c10_determinism),
    ];
    // Answer the libtest listing protocol so `cargo test -- --list` works.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(&format!("{o} "))) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        line(&format!("{tag} criterion {name} ({:.1} s)", t.elapsed().as_secs_f64()));
        line(&format!("     {}", o.detail));
        failed += usize::from(!o.pass);
    }
    line(&format!("acceptance: {failed} criteria failed"));
    if failed > 0 {
        std::process::exit(1);
    }
}
