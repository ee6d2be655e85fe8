//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 1-5, 8 and 9 are exact properties and abort the run when they
//! fail. Criteria 6 and 7 are empirical trends; their lines are printed either
//! way and only abort the run when `CILFAIR_STRICT` is set.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command as Process, Stdio};
use std::time::{Duration, Instant};

use cilfair::config::{Command, ExperimentConfig, Prepared};
use cilfair::probe::run_probe;
use cilfair::run::{run_prepared, RunOptions, Summary};
use cilfair::ProbeKind;
use cilfair_core::coverage::{neuron_coverage, verified_sample, CoverageConfig, Quantifier};
use cilfair_core::data::{synth_generate, LabeledDataset, Sample, SynthParams};
use cilfair_core::metrics::{cwv, mcd, pearson_correlation, ClassAccuracies};
use cilfair_core::nn::{cross_entropy, distillation_loss, softmax, DropoutSpec, Mlp, Tensor2};
use cilfair_core::refine::{
    hellinger_distance, js_divergence, kl_divergence, select_samples, DivergenceRecord,
};
use cilfair_core::seed;
use cilfair_core::train::{
    balanced_objective, balanced_train_phase, cil_objective, ciliate_step, compute_error_set,
    draw_memory, expand_for_step, traditional_cil_step, train_base, CilDistill, Phase, RefinedLoss,
    TermAssignment, TrainConfig,
};
use rand::Rng;

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

// ---------------------------------------------------------------- criterion 1

const H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-5;
const GRAD_CASES: u64 = 20;

fn random_tensor(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor2 {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.5..1.5))
        .collect();
    Tensor2::from_vec(rows, cols, data).unwrap()
}

fn random_probs(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor2 {
    let rows: Vec<Vec<f64>> = (0..rows)
        .map(|_| {
            let z: Vec<f64> = (0..cols).map(|_| rng.random_range(-2.0..2.0)).collect();
            softmax(&z, 1.0).unwrap()
        })
        .collect();
    Tensor2::from_rows(cols, rows.iter().map(Vec::as_slice)).unwrap()
}

fn random_net(rng: &mut impl Rng, input: usize, classes: usize) -> Mlp {
    let hidden: Vec<usize> = (0..rng.random_range(1..3))
        .map(|_| rng.random_range(3..7))
        .collect();
    let mut sizes = vec![input];
    sizes.extend(hidden);
    sizes.push(classes);
    let mut net = Mlp::new(&sizes, rng.random()).unwrap();
    for b in net.biases_mut() {
        b.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
    }
    net
}

fn perturbed(net: &Mlp, i: usize, delta: f64) -> Mlp {
    let mut copy = net.clone();
    let mut k = i;
    for l in 0..copy.weights().len() {
        let wlen = copy.weights()[l].as_slice().len();
        if k < wlen {
            copy.weights_mut()[l].as_mut_slice()[k] += delta;
            return copy;
        }
        k -= wlen;
        let blen = copy.biases()[l].len();
        if k < blen {
            copy.biases_mut()[l][k] += delta;
            return copy;
        }
        k -= blen;
    }
    unreachable!("parameter index out of range")
}

fn param_count(net: &Mlp) -> usize {
    net.weights()
        .iter()
        .map(|w| w.as_slice().len())
        .sum::<usize>()
        + net.biases().iter().map(Vec::len).sum::<usize>()
}

fn numeric_param_grad(net: &Mlp, f: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    (0..param_count(net))
        .map(|i| (f(&perturbed(net, i, H)) - f(&perturbed(net, i, -H))) / (2.0 * H))
        .collect()
}

fn numeric_logit_grad(z: &Tensor2, f: impl Fn(&Tensor2) -> f64) -> Vec<f64> {
    (0..z.as_slice().len())
        .map(|i| {
            let mut plus = z.clone();
            plus.as_mut_slice()[i] += H;
            let mut minus = z.clone();
            minus.as_mut_slice()[i] -= H;
            (f(&plus) - f(&minus)) / (2.0 * H)
        })
        .collect()
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-12)
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut worst = [0.0f64; 4];
    let mut dropout_cases = 0;
    for case in 0..GRAD_CASES {
        let mut rng = seed::rng(91_000 + case);
        let (d, c, b) = (
            rng.random_range(2..5),
            rng.random_range(3..6),
            rng.random_range(1..5),
        );
        let net = random_net(&mut rng, d, c);
        let x = random_tensor(&mut rng, b, d);
        let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..c)).collect();
        let drop = (case % 2 == 0).then(|| DropoutSpec::new(0.4, case).unwrap());
        dropout_cases += usize::from(drop.is_some());

        // Cross-entropy through the network, dropout active on even cases.
        let ce = |m: &Mlp| {
            let (z, _) = m.forward(&x, drop.as_ref()).unwrap();
            cross_entropy(&z, &labels).unwrap().0
        };
        let (z, cache) = net.forward(&x, drop.as_ref()).unwrap();
        let (_, gz) = cross_entropy(&z, &labels).unwrap();
        let g = net.backward(&cache, &gz).unwrap().flatten();
        worst[0] = worst[0].max(relative_error(&g, &numeric_param_grad(&net, ce)));

        // Distillation on logits against a teacher with fewer columns.
        let t = rng.random_range(0.5..4.0);
        let teacher = random_probs(&mut rng, b, c - 1);
        let z = random_tensor(&mut rng, b, c);
        let (_, g) = distillation_loss(&z, &teacher, t).unwrap();
        let n = numeric_logit_grad(&z, |z| distillation_loss(z, &teacher, t).unwrap().0);
        worst[1] = worst[1].max(relative_error(g.as_slice(), &n));

        // New-data/memory composite, with distillation every third case.
        let bs = rng.random_range(0..4);
        let xs = random_tensor(&mut rng, bs, d);
        let ys: Vec<usize> = (0..bs).map(|_| rng.random_range(0..c)).collect();
        let lambda = rng.random_range(0.0..1.0);
        let kd_probs = random_probs(&mut rng, b + bs, c - 1);
        let kd = || {
            (case % 3 == 0).then_some(CilDistill {
                teacher_probs: &kd_probs,
                temperature: 2.0,
            })
        };
        let (_, g) = cil_objective(&net, &x, &labels, &xs, &ys, lambda, kd()).unwrap();
        let n = numeric_param_grad(&net, |m| {
            cil_objective(m, &x, &labels, &xs, &ys, lambda, kd())
                .unwrap()
                .0
                .total
        });
        worst[2] = worst[2].max(relative_error(&g.flatten(), &n));

        // Balanced composite, dropout active on even cases.
        let flags: Vec<bool> = (0..b).map(|_| rng.random_bool(0.4)).collect();
        let probs = random_probs(&mut rng, b, c);
        let assignment = if case % 4 == 3 {
            TermAssignment::ErrorsDistillation
        } else {
            TermAssignment::ErrorsCrossEntropy
        };
        let f = |m: &Mlp| {
            balanced_objective(
                m,
                &x,
                &labels,
                &flags,
                &probs,
                lambda,
                2.0,
                assignment,
                drop.as_ref(),
            )
            .unwrap()
            .0
            .total
        };
        let (_, g) = balanced_objective(
            &net,
            &x,
            &labels,
            &flags,
            &probs,
            lambda,
            2.0,
            assignment,
            drop.as_ref(),
        )
        .unwrap();
        worst[3] = worst[3].max(relative_error(&g.flatten(), &numeric_param_grad(&net, f)));
    }
    let elapsed = start.elapsed();
    let pass = worst.iter().all(|&w| w < GRAD_TOL) && within(elapsed, 10);
    outcome(
        pass,
        format!(
            "{GRAD_CASES} cases per loss ({dropout_cases} with dropout); worst relative error \
             ce {:.1e}, distill {:.1e}, cil {:.1e}, balanced {:.1e}; {:.2} s",
            worst[0],
            worst[1],
            worst[2],
            worst[3],
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

fn metric_oracles() -> Outcome {
    let mut rng = seed::rng(92_000);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let acc: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let a = ClassAccuracies::from_values(&acc);
        let m = acc.iter().sum::<f64>() / n as f64;
        let var = acc.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        let spread = acc.iter().cloned().fold(f64::MIN, f64::max)
            - acc.iter().cloned().fold(f64::MAX, f64::min);
        worst = worst.max((cwv(&a).unwrap() - var).abs());
        worst = worst.max((mcd(&a).unwrap() - spread).abs());
        if n >= 3 {
            let ys: Vec<f64> = acc
                .iter()
                .map(|x| rng.random_range(-1.0..1.0) + 0.5 * x)
                .collect();
            let my = ys.iter().sum::<f64>() / n as f64;
            let sxy: f64 = acc.iter().zip(&ys).map(|(x, y)| (x - m) * (y - my)).sum();
            let sxx: f64 = acc.iter().map(|x| (x - m).powi(2)).sum();
            let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
            let r = sxy / (sxx * syy).sqrt();
            worst = worst.max((pearson_correlation(&acc, &ys).unwrap() - r).abs());
        }
    }
    let c = cwv(&ClassAccuracies::from_values(&[0.5, 0.7])).unwrap();
    let d = mcd(&ClassAccuracies::from_values(&[0.9, 0.4, 0.6])).unwrap();
    let pass = worst <= 1e-12 && (c - 0.01).abs() <= 1e-15 && d == 0.5;
    outcome(
        pass,
        format!("1000 vectors, worst deviation {worst:.1e}; CWV(0.5,0.7) = {c:e}; MCD(0.9,0.4,0.6) = {d}"),
    )
}

// ---------------------------------------------------------------- criterion 3

fn divergence_suite() -> Outcome {
    let mut rng = seed::rng(93_000);
    let mut ok = true;
    for _ in 0..500 {
        let n = rng.random_range(2..8);
        let p = softmax(
            &(0..n)
                .map(|_| rng.random_range(-4.0..4.0))
                .collect::<Vec<_>>(),
            1.0,
        )
        .unwrap();
        let q = softmax(
            &(0..n)
                .map(|_| rng.random_range(-4.0..4.0))
                .collect::<Vec<_>>(),
            1.0,
        )
        .unwrap();
        let pq = js_divergence(&p, &q).unwrap();
        ok &= (pq - js_divergence(&q, &p).unwrap()).abs() < 1e-12;
        ok &= (0.0..=std::f64::consts::LN_2 + 1e-15).contains(&pq);
        ok &= js_divergence(&p, &p).unwrap().abs() < 1e-15;
    }
    let ln2 = std::f64::consts::LN_2;
    let js = js_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
    let he = hellinger_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
    let kl = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
    let pass =
        ok && (js - ln2).abs() <= 1e-12 && (he - 1.0).abs() <= 1e-15 && (kl - ln2).abs() <= 1e-15;
    outcome(
        pass,
        format!(
            "500 random pairs symmetric and bounded: {ok}; JS = {js}, Hellinger = {he}, KL = {kl}"
        ),
    )
}

// ---------------------------------------------------------------- criterion 4

fn selection_contract() -> Outcome {
    // eta as an exact fraction so the floor is computed without rounding
    let etas = [
        (0.0, 0, 1),
        (0.01, 1, 100),
        (0.1, 1, 10),
        (0.5, 1, 2),
        (1.0, 1, 1),
    ];
    let mut rng = seed::rng(94_000);
    let mut checked = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..120);
        let levels = rng.random_range(1..12);
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / 7.0)
            .collect();
        let samples: Vec<Sample> = (0..n)
            .map(|i| Sample {
                id: (i as u64) * 5 + rng.random_range(0..5),
                features: vec![0.0],
                label: 0,
            })
            .collect();
        let ds = LabeledDataset::from_samples(samples, 1).unwrap();
        let records: Vec<DivergenceRecord> = ds
            .samples()
            .iter()
            .zip(&scores)
            .map(|(s, &v)| DivergenceRecord {
                sample_id: s.id,
                divergence: v,
            })
            .collect();
        let mut oracle = records.clone();
        oracle.sort_by(|a, b| {
            b.divergence
                .total_cmp(&a.divergence)
                .then(a.sample_id.cmp(&b.sample_id))
        });
        for &(eta, num, den) in &etas {
            let k = n * num / den;
            let split = select_samples(&records, &ds, eta).unwrap();
            let want: BTreeSet<u64> = oracle[..k].iter().map(|r| r.sample_id).collect();
            let got: BTreeSet<u64> = split.high.ids().into_iter().collect();
            if got != want || split.high.len() + split.low.len() != n {
                return outcome(
                    false,
                    format!("n = {n}, eta = {eta}: high set differs from the sort oracle"),
                );
            }
            checked += 1;
        }
    }
    outcome(true, format!("{checked} selections match the sort oracle"))
}

// ---------------------------------------------------------------- criterion 5

fn coverage_properties() -> Outcome {
    let start = Instant::now();
    let net = Mlp::new(&[8, 16, 16, 4], 95_000).unwrap();
    let ds = synth_generate(&SynthParams {
        classes: 4,
        per_class: 50,
        feature_dim: 8,
        seed: 95_001,
        ..Default::default()
    })
    .unwrap();
    let at = |t: f64, quantifier| {
        neuron_coverage(
            &net,
            &ds,
            &CoverageConfig {
                activation_threshold: t,
                quantifier,
                ..Default::default()
            },
        )
        .unwrap()
        .coverage
    };
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let ex: Vec<f64> = grid
        .iter()
        .map(|&t| at(t, Quantifier::Existential))
        .collect();
    let un: Vec<f64> = grid.iter().map(|&t| at(t, Quantifier::Universal)).collect();
    let monotone = ex.windows(2).all(|w| w[1] <= w[0]) && un.windows(2).all(|w| w[1] <= w[0]);
    let ordered = ex.iter().zip(&un).all(|(e, u)| u <= e);
    let cfg = CoverageConfig {
        max_resample_attempts: 5,
        ..Default::default()
    };
    let replay = (0..20u64).all(|s| {
        verified_sample(&net, &ds, 40, &cfg, s).unwrap()
            == verified_sample(&net, &ds, 40, &cfg, s).unwrap()
    });
    let elapsed = start.elapsed();
    outcome(
        monotone && ordered && replay && within(elapsed, 5),
        format!(
            "t grid of {} points on a 200-sample set: monotone {monotone}, universal <= existential \
             {ordered}, verified_sample replay {replay}; {:.2} s",
            grid.len(),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn prepared(json: &str, command: Command) -> Prepared {
    ExperimentConfig::from_json(json)
        .unwrap()
        .prepare(command, Path::new("."))
        .unwrap()
}

fn fairness_trend(scratch: &Path) -> Outcome {
    let start = Instant::now();
    let seeds: Vec<u64> = (1..=31).collect();
    let json = format!(
        r#"{{"schema_version": 1, "methods": ["traditional", "ciliate"], "seeds": {seeds:?}}}"#
    );
    let p = prepared(&json, Command::Run);
    let dir = scratch.join("trend");
    run_prepared(
        &p,
        &RunOptions {
            out: Some(dir.clone()),
            ..Default::default()
        },
    )
    .unwrap();
    let summary: Summary =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    let last = |i: usize| summary.methods[i].steps.last().unwrap().clone();
    let (trad, cil) = (last(0), last(1));
    let elapsed = start.elapsed();
    let fairer = cil.cwv.median < trad.cwv.median;
    let accurate = cil.acc.median >= trad.acc.median - 0.02;
    outcome(
        fairer && accurate && within(elapsed, 180),
        format!(
            "{} seeds, final-step median CWV ciliate {:.5} vs traditional {:.5} (lower: {fairer}); \
             median acc {:.4} vs {:.4} (within 2 points: {accurate}); {:.0} s",
            seeds.len(),
            cil.cwv.median,
            trad.cwv.median,
            cil.acc.median,
            trad.acc.median,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 7

fn root_cause_probes() -> Outcome {
    let start = Instant::now();
    let trend_seeds = r#""seeds": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11]"#;
    let medians = |kind: ProbeKind, json: &str| {
        let (_, s) = run_probe(kind, &prepared(json, Command::Probe(kind))).unwrap();
        s.conditions
            .iter()
            .map(|c| (c.acc.median, c.cwv.median))
            .collect::<Vec<_>>()
    };
    let mask = medians(
        ProbeKind::Mask,
        &format!(
            r#"{{"schema_version": 1, {trend_seeds}, "probe": {{"mask_ratios": [0.0, 0.1, 0.2]}}}}"#
        ),
    );
    let mask_ok = mask
        .windows(2)
        .all(|w| w[1].0 <= w[0].0 && w[1].1 >= w[0].1);
    let memory = medians(
        ProbeKind::Memory,
        &format!(
            r#"{{"schema_version": 1, {trend_seeds}, "probe": {{"memory_sizes": [50, 100, 200, 400]}}}}"#
        ),
    );
    let memory_ok = memory
        .windows(2)
        .all(|w| w[1].0 >= w[0].0 && w[1].1 <= w[0].1);
    let kind = ProbeKind::CoverageBias;
    let (runs, bias) = run_probe(
        kind,
        &prepared(
            r#"{"schema_version": 1, "seeds": [1, 2, 3, 4, 5], "probe": {"repetitions": 20}}"#,
            Command::Probe(kind),
        ),
    )
    .unwrap();
    let r = bias.pearson_r.unwrap_or(f64::NAN);
    let bias_ok = r < 0.0;
    let elapsed = start.elapsed();
    let fmt = |v: &[(f64, f64)]| {
        v.iter()
            .map(|(a, c)| format!("{a:.4}/{c:.5}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        mask_ok && memory_ok && bias_ok && within(elapsed, 240),
        format!(
            "(a) mask acc/cwv medians {} -> {mask_ok}; (b) memory {} -> {memory_ok}; \
             (c) r = {r:.3} over {} redraws (pooled raw r = {:.3}) -> {bias_ok}; {:.0} s",
            fmt(&mask),
            fmt(&memory),
            runs.len(),
            bias.pooled_pearson_r.unwrap_or(f64::NAN),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 8

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files_under(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

fn determinism(scratch: &Path) -> Outcome {
    let config = scratch.join("determinism.json");
    std::fs::write(
        &config,
        r#"{
  "schema_version": 1,
  "dataset": {"synthetic": {"classes": 8, "train_per_class": 30, "test_per_class": 10, "feature_dim": 8}},
  "schedule": {"steps": 3, "classes_per_step": 2, "order_seed": 4},
  "train": {"hidden_sizes": [16], "epochs_base": 10, "epochs_cil": 8,
            "epochs_dropout_phase": 4, "epochs_ordinary_phase": 4, "memory_capacity": 12},
  "methods": ["traditional", "ciliate"],
  "seeds": [1, 2]
}"#,
    )
    .unwrap();
    let run = |out: &Path| {
        Process::new(env!("CARGO_BIN_EXE_cilfair"))
            .arg("run")
            .arg(&config)
            .arg("--out")
            .arg(out)
            .stdout(Stdio::null())
            .status()
            .unwrap()
            .success()
    };
    let (a, b) = (scratch.join("det_a"), scratch.join("det_b"));
    if !run(&a) || !run(&b) {
        return outcome(false, "cilfair run exited with an error");
    }
    let fa = files_under(&a);
    let fb = files_under(&b);
    let names = |v: &[PathBuf], root: &Path| {
        v.iter()
            .map(|p| p.strip_prefix(root).unwrap().to_path_buf())
            .collect::<Vec<_>>()
    };
    let same_names = names(&fa, &a) == names(&fb, &b);
    let same_bytes = same_names
        && fa
            .iter()
            .zip(&fb)
            .all(|(x, y)| std::fs::read(x).unwrap() == std::fs::read(y).unwrap());
    outcome(
        same_bytes,
        format!("{} files compared, identical: {same_bytes}", fa.len()),
    )
}

// ---------------------------------------------------------------- criterion 9

fn degenerate_eta() -> Outcome {
    let cfg = TrainConfig {
        hidden_sizes: vec![12],
        epochs_base: 8,
        epochs_cil: 6,
        epochs_dropout_phase: 3,
        epochs_ordinary_phase: 4,
        batch_size: 8,
        memory_capacity: 12,
        seed: 99,
        ..Default::default()
    };
    let all = synth_generate(&SynthParams {
        classes: 4,
        per_class: 15,
        feature_dim: 6,
        seed: 97,
        ..Default::default()
    })
    .unwrap();
    let old = all.filter_classes(&[0, 1]).unwrap();
    let new = all.filter_classes(&[2, 3]).unwrap();
    let base = train_base(&old, &cfg).unwrap();

    let reference = |cfg: &TrainConfig, dropout: Option<f64>, epochs: usize, phase: Phase| {
        let (memory, _) = draw_memory(&base, &old, cfg.verify_coverage, cfg).unwrap();
        let teacher = traditional_cil_step(&base, &new, &memory, cfg).unwrap();
        let x_t = new.union(memory.data()).unwrap();
        let errors = compute_error_set(&teacher, &x_t).unwrap();
        let mut net = expand_for_step(&base, teacher.classes(), cfg).unwrap();
        let lambda = cfg.lambda.resolve(base.classes(), teacher.classes());
        balanced_train_phase(
            &mut net,
            &x_t,
            &teacher,
            &errors,
            RefinedLoss::Balanced { lambda },
            dropout,
            epochs,
            phase,
            cfg,
        )
        .unwrap();
        (net, x_t.len())
    };

    let zero = TrainConfig {
        eta: 0.0,
        ..cfg.clone()
    };
    let out0 = ciliate_step(&base, &new, &old, &zero).unwrap();
    let (expect0, _) = reference(&zero, None, zero.epochs_ordinary_phase, Phase::Ordinary);
    let zero_ok = out0.split.high.is_empty() && out0.model.bit_eq(&expect0);

    let one = TrainConfig { eta: 1.0, ..cfg };
    let out1 = ciliate_step(&base, &new, &old, &one).unwrap();
    let (expect1, n_t) = reference(
        &one,
        Some(one.dropout_rate),
        one.epochs_dropout_phase,
        Phase::Dropout,
    );
    let one_ok =
        out1.split.low.is_empty() && out1.split.high.len() == n_t && out1.model.bit_eq(&expect1);
    outcome(
        zero_ok && one_ok,
        format!(
            "eta = 0: empty X^h and bit-equal to ordinary balanced training: {zero_ok}; \
             eta = 1: all {n_t} samples in the dropout phase, bit-equal to dropout-only training: {one_ok}"
        ),
    )
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let strict = std::env::var_os("CILFAIR_STRICT").is_some();
    let criteria: Vec<(usize, &str, bool, Check)> = vec![
        (1, "gradient suite", true, Box::new(gradient_suite)),
        (2, "metric oracles", true, Box::new(metric_oracles)),
        (3, "divergence suite", true, Box::new(divergence_suite)),
        (4, "selection contract", true, Box::new(selection_contract)),
        (
            5,
            "coverage properties",
            true,
            Box::new(coverage_properties),
        ),
        (
            6,
            "fairness-fix trend",
            false,
            Box::new(|| fairness_trend(scratch.path())),
        ),
        (7, "root-cause probes", false, Box::new(root_cause_probes)),
        (
            8,
            "determinism",
            true,
            Box::new(|| determinism(scratch.path())),
        ),
        (9, "degenerate eta", true, Box::new(degenerate_eta)),
    ];
    let mut hard_failures = Vec::new();
    let mut soft_failures = Vec::new();
    for (n, name, exact, check) in &criteria {
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n} [{name}]: {verdict} - {}", o.detail);
        if !o.pass {
            if *exact || strict {
                hard_failures.push(*n);
            } else {
                soft_failures.push(*n);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - hard_failures.len() - soft_failures.len(),
        criteria.len()
    );
    if !soft_failures.is_empty() {
        println!("acceptance: empirical criteria not met (reported, not fatal): {soft_failures:?}");
    }
    if !hard_failures.is_empty() {
        eprintln!("acceptance: failing criteria {hard_failures:?}");
        std::process::exit(1);
    }
}
