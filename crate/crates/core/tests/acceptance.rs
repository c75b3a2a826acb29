//! End-to-end acceptance checks. Prints one PASS / FAIL / WAIVED line per
//! criterion and exits non-zero if anything failed.
//!
//! The reproduction check on the real candidate set runs only when
//! `CRATER_DATA_DIR` points at a directory holding `candidates.csv` and a
//! `tiles/` directory of `<tile_id>.pgm` files.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{chance_f1, check_network_gradients, FD_TOL};
use crater_cnn::data::{
    attach_patches, kfold_split, load_candidates, synth_dataset, to_samples, Normalization, Region,
};
use crater_cnn::eval::{cross_validate, f1, ConfusionMatrix, CrossValidation, EvalReport};
use crater_cnn::layers::Activation;
use crater_cnn::network::LayerKind;
use crater_cnn::viz::{false_color, read_image, write_image, BLUE, RED};
use crater_cnn::{train, NetConfig, Network, Sample, Tensor, TrainConfig, CRATER};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CV_SEED: u64 = 42;
const SYNTH_PER_CLASS: usize = 100;
const FULL_F1: f64 = 0.95;
const FULL_BUDGET: Duration = Duration::from_secs(15 * 60);
const REDUCED_EPOCHS: usize = 50;
const REDUCED_F1: f64 = 0.90;
const REDUCED_BUDGET: Duration = Duration::from_secs(120);
const CHANCE_TOL: f64 = 0.10;
const REPRO_TOL_POINTS: f64 = 3.0;
const REPRO_TARGETS: [(Region, f64); 3] =
    [(Region::West, 88.78), (Region::Center, 88.81), (Region::East, 90.29)];

enum Outcome {
    Pass(String),
    Fail(String),
    Waived(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn cv(jobs: usize) -> CrossValidation {
    CrossValidation { k: 10, seed: CV_SEED, jobs }
}

fn synthetic_samples() -> Vec<Sample> {
    to_samples(&synth_dataset(SYNTH_PER_CLASS, CV_SEED).unwrap()).unwrap()
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut checked = 0;
    for seed in 0..20 {
        let r = check_network_gradients(seed);
        checked += r.checked;
        if r.worst >= worst {
            worst = r.worst;
            worst_at = format!("seed {seed} {}", r.worst_at);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst < FD_TOL && elapsed < Duration::from_secs(10),
        format!(
            "{checked} gradients over 20 random tiny networks, worst relative error {worst:.2e} \
             at {worst_at}, {}",
            secs(elapsed)
        ),
    )
}

fn architecture() -> Outcome {
    let net = Network::new(NetConfig::default(), CV_SEED).unwrap();
    let chain = net.shape_chain().unwrap();
    let hidden = net.config().hidden;
    let want: Vec<Vec<usize>> = vec![
        vec![1, 15, 15],
        vec![20, 12, 12],
        vec![20, 9, 9],
        vec![1620],
        vec![hidden],
        vec![2],
    ];
    let kinds = net.layer_kinds();
    let want_kinds = vec![
        LayerKind::Conv,
        LayerKind::Conv,
        LayerKind::Flatten,
        LayerKind::Dense(Activation::Relu),
        LayerKind::Dense(Activation::Linear),
        LayerKind::Softmax,
    ];
    let pass = net.forward_pass(&Tensor::full(&[1, 15, 15], 0.5).unwrap()).unwrap();
    let observed = vec![
        pass.input.shape().to_vec(),
        pass.conv1.shape().to_vec(),
        pass.conv2.shape().to_vec(),
        vec![pass.conv2.len()],
        vec![pass.hidden.len()],
        vec![pass.probs.len()],
    ];
    let filters_ok = net.conv1().filters().shape() == [20, 1, 4, 4]
        && net.conv2().filters().shape() == [20, 20, 4, 4]
        && net.conv1().stride() == 1
        && net.conv2().stride() == 1;
    verdict(
        chain == want && observed == want && kinds == want_kinds && filters_ok,
        format!("shape chain {chain:?}, stages {kinds:?}"),
    )
}

fn memorization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let data: Vec<Sample> = (0..20)
        .map(|_| Sample {
            patch: Tensor::from_vec(&[1, 15, 15], (0..225).map(|_| rng.gen()).collect()).unwrap(),
            label: rng.gen_range(0..2),
        })
        .collect();
    let cfg = TrainConfig { seed: 7, ..TrainConfig::default() };
    let mut net = Network::new(NetConfig::default(), cfg.seed).unwrap();
    let start = Instant::now();
    let trace = train(&mut net, &data, &cfg).unwrap();
    let elapsed = start.elapsed();
    let acc = crater_cnn::train::accuracy(&net, &data).unwrap();
    let first_perfect = trace.epochs.iter().position(|e| e.accuracy == 1.0).map(|e| e + 1);
    verdict(
        acc == 1.0 && elapsed < Duration::from_secs(60),
        format!(
            "training accuracy {:.0}% after {} epochs at lr {} (first perfect epoch {:?}), {}",
            acc * 100.0,
            cfg.epochs,
            cfg.learning_rate,
            first_perfect,
            secs(elapsed)
        ),
    )
}

fn timed_cv(samples: &[Sample], epochs: usize) -> (EvalReport, Duration) {
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let start = Instant::now();
    let report =
        cross_validate(samples, "Synthetic", &cv(0), NetConfig::default(), &cfg).unwrap();
    (report, start.elapsed())
}

fn synthetic_generalization() -> Outcome {
    let samples = synthetic_samples();
    let (reduced, t_reduced) = timed_cv(&samples, REDUCED_EPOCHS);
    let (full, t_full) = timed_cv(&samples, TrainConfig::default().epochs);
    let ok = full.mean_f1 >= FULL_F1
        && t_full < FULL_BUDGET
        && reduced.mean_f1 >= REDUCED_F1
        && t_reduced < REDUCED_BUDGET;
    verdict(
        ok,
        format!(
            "{} epochs: mean F1 {:.4} (need >= {FULL_F1}) in {}; {REDUCED_EPOCHS} epochs: mean F1 {:.4} \
             (need >= {REDUCED_F1}) in {}",
            full.train.epochs,
            full.mean_f1,
            secs(t_full),
            reduced.mean_f1,
            secs(t_reduced)
        ),
    )
}

fn chance_control() -> Outcome {
    let mut samples = synthetic_samples();
    let mut labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
    for (s, l) in samples.iter_mut().zip(labels) {
        s.label = l;
    }
    let q = samples.iter().filter(|s| s.label == CRATER).count() as f64 / samples.len() as f64;
    let oracle = chance_f1(q);
    let (report, elapsed) = timed_cv(&samples, TrainConfig::default().epochs);
    verdict(
        (report.mean_f1 - oracle).abs() <= CHANCE_TOL,
        format!(
            "shuffled labels: mean F1 {:.4}, base-rate oracle {:.4} (q = {q}), tolerance {CHANCE_TOL}, {}",
            report.mean_f1,
            oracle,
            secs(elapsed)
        ),
    )
}

fn run_property(
    name: &str,
    cases: u32,
    failures: &mut Vec<String>,
    test: impl Fn(&mut TestRunner) -> Result<(), String>,
) {
    let mut runner = TestRunner::new(RunnerConfig { cases, ..RunnerConfig::default() });
    if let Err(e) = test(&mut runner) {
        failures.push(format!("{name}: {e}"));
    }
}

fn f1_and_fold_properties() -> Outcome {
    let mut failures = Vec::new();
    run_property("partition", 256, &mut failures, |r| {
        r.run(&(1usize..12, 0usize..300, any::<u64>()), |(k, extra, seed)| {
            let n = k + extra;
            let plan = kfold_split(n, k, seed).unwrap();
            let mut seen = vec![0u32; n];
            for f in 0..k {
                let test = plan.test_indices(f);
                let train = plan.train_indices(f);
                prop_assert_eq!(test.len() + train.len(), n);
                prop_assert!(test.iter().all(|i| !train.contains(i)));
                for i in test {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let sizes = plan.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run_property("f1 range", 1024, &mut failures, |r| {
        r.run(&(0usize..500, 0usize..500, 0usize..500, 0usize..500), |(tp, fp, tn, fn_)| {
            let score = f1(&ConfusionMatrix { tp, fp, tn, fn_ });
            prop_assert!((0.0..=1.0).contains(&score.value));
            let degenerate = tp == 0;
            prop_assert_eq!(score.degenerate, degenerate);
            if degenerate {
                prop_assert_eq!(score.value, 0.0);
            } else {
                let p = tp as f64 / (tp + fp) as f64;
                let rc = tp as f64 / (tp + fn_) as f64;
                prop_assert!((score.value - 2.0 * p * rc / (p + rc)).abs() < 1e-12);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run_property("run determinism", 4, &mut failures, |r| {
        r.run(&(any::<u64>(), 5usize..10), |(seed, per_class)| {
            let samples = to_samples(&synth_dataset(per_class, seed).unwrap()).unwrap();
            let cfg = TrainConfig { epochs: 2, seed, ..TrainConfig::default() };
            let cvc = CrossValidation { k: 5, seed, jobs: 1 };
            let a = cross_validate(&samples, "s", &cvc, NetConfig::default(), &cfg).unwrap();
            let b = cross_validate(&samples, "s", &CrossValidation { jobs: 2, ..cvc }, NetConfig::default(), &cfg)
                .unwrap();
            prop_assert_eq!(a.mean_f1.to_bits(), b.mean_f1.to_bits());
            let preds = |r: &EvalReport| -> Vec<(usize, usize)> {
                r.folds.iter().flat_map(|f| f.predictions.clone()).collect()
            };
            prop_assert_eq!(preds(&a), preds(&b));
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            "fold partition, F1 in [0,1], degenerate F1 = 0, seeded determinism".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn reproduction() -> Outcome {
    let Some(dir) = std::env::var_os("CRATER_DATA_DIR").map(PathBuf::from) else {
        return Outcome::Waived("CRATER_DATA_DIR not set; real candidate set unavailable".into());
    };
    let tiles = dir.join("tiles");
    let known: Vec<String> = std::fs::read_dir(&tiles)
        .map(|entries| {
            entries
                .filter_map(|e| e.ok()?.path().file_stem()?.to_str().map(String::from))
                .collect()
        })
        .unwrap_or_default();
    let cands = match load_candidates(&dir.join("candidates.csv"), &known) {
        Ok(c) => c,
        Err(e) => return Outcome::Fail(format!("loading candidates: {e}")),
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for (region, target) in REPRO_TARGETS {
        let mut picked: Vec<_> = cands
            .iter()
            .filter(|c| Region::of_tile(&c.tile_id) == Some(region))
            .cloned()
            .collect();
        if let Err(e) = attach_patches(&mut picked, &tiles, Normalization::MinMax) {
            return Outcome::Fail(format!("{region}: {e}"));
        }
        let samples = to_samples(&picked).unwrap();
        let report = match cross_validate(
            &samples,
            &region.label(),
            &cv(0),
            NetConfig::default(),
            &TrainConfig::default(),
        ) {
            Ok(r) => r,
            Err(e) => return Outcome::Fail(format!("{region}: {e}")),
        };
        let got = report.mean_f1 * 100.0;
        ok &= (got - target).abs() <= REPRO_TOL_POINTS;
        lines.push(format!("{region} {got:.2} vs {target:.2}"));
    }
    verdict(ok, format!("{} (tolerance {REPRO_TOL_POINTS} points)", lines.join(", ")))
}

fn visualization() -> Outcome {
    let mut failures = Vec::new();
    run_property("endpoints and affine invariance", 512, &mut failures, |r| {
        r.run(
            &(prop::collection::vec(-100.0..100.0f64, 2..200), 1e-3..1e3f64, -1e3..1e3f64),
            |(data, a, b)| {
                let n = data.len();
                let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assume!(hi > lo);
                let map = Tensor::from_vec(&[1, n], data.clone()).unwrap();
                let img = false_color(&map).unwrap();
                for (v, p) in data.iter().zip(&img.pixels) {
                    if *v == lo {
                        prop_assert_eq!(*p, BLUE);
                    }
                    if *v == hi {
                        prop_assert_eq!(*p, RED);
                    }
                }
                let moved = Tensor::from_vec(&[1, n], data.iter().map(|v| a * v + b).collect())
                    .unwrap();
                prop_assert_eq!(false_color(&moved).unwrap(), img);
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
    });
    let dir = tempfile::tempdir().unwrap();
    let net = Network::new(NetConfig::default(), 3).unwrap();
    let patch = synth_dataset(1, 3).unwrap()[0].patch.clone().unwrap();
    for (i, map) in crater_cnn::viz::activation_maps(&net, &patch).unwrap().iter().enumerate() {
        let img = false_color(map).unwrap();
        let path = dir.path().join(format!("{i}.ppm"));
        write_image(&img, &path).unwrap();
        if read_image(&path).unwrap() != img {
            failures.push(format!("activation map {i} did not round-trip"));
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            "min -> (0,0,255), max -> (255,0,0), affine invariant, PPM round trip bit-exact"
                .to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("gradient correctness", gradients),
        ("architecture conformance", architecture),
        ("memorization", memorization),
        ("synthetic generalization", synthetic_generalization),
        ("chance-level control", chance_control),
        ("F1 and fold properties", f1_and_fold_properties),
        ("reproduction on real candidates", reproduction),
        ("visualization contract", visualization),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Outcome::Pass(d) => println!("PASS   {name}: {d}"),
            Outcome::Waived(d) => println!("WAIVED {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL   {name}: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
