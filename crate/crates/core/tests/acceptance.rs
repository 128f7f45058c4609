//! Acceptance run: each criterion prints one PASS or FAIL line, and the
//! test fails if any criterion does.

mod common;

use std::time::Instant;

use common::{brute_score, toy_bundle, view_inputs};
use lrfr::bench::{bench_predict, count_flops, count_flops_detailed, synthetic_model, synthetic_workload, WorkloadSpec};
use lrfr::features::{cluster_reduce, FeatureAtom, FeatureSet, FeatureSpace, RawAtom, Vocab};
use lrfr::io::model_file::{from_bytes, to_bytes};
use lrfr::io::{ClusterMap, UNK_CLUSTER};
use lrfr::model::{
    param_count, Form, LowRankTensor, Model, ModelDims, ModelSpec, Rank, RankSpec, Task, MATERIALIZE_CAP,
};
use lrfr::par::Execution;
use lrfr::scoring::{argmax, softmax, Scorer};
use lrfr::synth::{planted, random_atom, random_instance, random_model, PlantedSpec, ToySpec};
use lrfr::tensor::{frobenius_dot, outer_product};
use lrfr::training::{accuracy, finite_diff_check, max_rel_error, train, Loss, TrainConfig, FD_EPS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)*));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Factored scores equal the full tensor contracted with one-hot inputs.
fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for form in [Form::Tucker, Form::Cp] {
            let labels = rng.gen_range(1..=4);
            let spec = ToySpec {
                task: Task::Classify { labels },
                properties: rng.gen_range(1..=5),
                vocab: rng.gen_range(1..=6),
                embedding: None,
                fine_tune: false,
                arities: vec![1, 2],
                unigram_form: form,
                ngram_form: form,
                tucker_ranks: [rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3)],
                cp_rank: rng.gen_range(1..=3),
            };
            let model = ok(random_model(&spec, 1.0, &mut rng))?;
            let scorer = Scorer::new(&model);
            for n in [1, 2] {
                let full = ok(model.tensor(n).ok_or("missing tensor").map_err(String::from)?.materialize(MATERIALIZE_CAP))?;
                for _ in 0..4 {
                    let atom = random_atom(&model, n, &mut rng);
                    let y = rng.gen_range(0..labels);
                    let s = ok(scorer.score_feature(Some(y), &atom))?;
                    let x = ok(outer_product(&view_inputs(&model, Some(y), &atom)))?;
                    let oracle = ok(frobenius_dot(&full, &x))?;
                    let brute = brute_score(&model, Some(y), &atom);
                    worst = worst.max((s - oracle).abs()).max((s - brute).abs());
                    checked += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(worst < 1e-9, "max error {worst:.3e} over {checked} scores");
    ensure!(secs < 10.0, "took {secs:.1} s");
    Ok(format!("{checked} scores, max error {worst:.2e}, {secs:.2} s"))
}

/// Every parameter block matches central differences.
fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut configs = 0;
    for task in [Task::Classify { labels: 3 }, Task::Rank] {
        for form in [Form::Tucker, Form::Cp] {
            for (embedding, fine_tune) in [(None, false), (Some(3), false), (Some(3), true)] {
                let spec = ToySpec {
                    task,
                    embedding,
                    fine_tune,
                    unigram_form: form,
                    ngram_form: form,
                    ..ToySpec::default()
                };
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + configs);
                for _ in 0..20 {
                    let model = ok(random_model(&spec, 1.0, &mut rng))?;
                    let inst = random_instance(&model, &[3, 2], 3, &mut rng);
                    let checks = ok(finite_diff_check(&model, &inst, FD_EPS, Execution::Parallel))?;
                    let e = max_rel_error(&checks);
                    ensure!(
                        e < 1e-4,
                        "{} {task:?} {form:?} embedding={embedding:?} fine_tune={fine_tune}: relative error {e:.3e}",
                        Loss::for_task(task).name()
                    );
                    worst = worst.max(e);
                }
                configs += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!("{configs} configurations x 20 instances, max relative error {worst:.2e}, {secs:.2} s"))
}

/// Exact parameter counts at the reference dimensions.
fn parameter_counts() -> Outcome {
    let dims = |arity| ModelDims {
        labels: 32,
        properties: 264,
        embedding: 200,
        arity,
    };
    let cases = [
        (RankSpec::Full, 1, 1_689_600u128),
        (RankSpec::Tucker(32, 20, 200), 1, 174_304),
        (RankSpec::Cp(200), 1, 99_200),
        (RankSpec::Cp(200), 2, 139_200),
        (RankSpec::Tucker(32, 20, 200), 2, 25_646_304),
    ];
    for (spec, n, want) in cases {
        let got = ok(param_count(spec, dims(n)))?;
        ensure!(got == want, "{spec:?} n={n}: {got} != {want}");
    }
    Ok("5 configurations exact".into())
}

/// Flop counts: CP linear in r and n+1, Tucker core grows by r3 per word;
/// CP scores a large workload faster than Tucker.
fn prediction_complexity() -> Outcome {
    let dims = ModelDims {
        labels: 32,
        properties: 264,
        embedding: 200,
        arity: 1,
    };
    for r in [1usize, 7, 50, 100, 200] {
        for n in 1..=3usize {
            let f = ok(count_flops(Form::Cp, dims, RankSpec::Cp(r), n))?;
            ensure!(f == ((n + 1) * r) as u64, "cp r={r} n={n}: {f}");
        }
    }
    let r100 = ok(count_flops(Form::Cp, dims, RankSpec::Cp(100), 1))?;
    let r200 = ok(count_flops(Form::Cp, dims, RankSpec::Cp(200), 1))?;
    ensure!(r200 == 2 * r100, "cp r=200 vs r=100: {r200} vs {r100}");
    for (r1, r2, r3) in [(2, 3, 200), (4, 5, 7), (1, 1, 13), (3, 2, 50)] {
        let c1 = ok(count_flops_detailed(RankSpec::Tucker(r1, r2, r3), 1))?.core();
        let c2 = ok(count_flops_detailed(RankSpec::Tucker(r1, r2, r3), 2))?.core();
        ensure!(c2 == c1 * r3 as u64, "tucker ({r1},{r2},{r3}): core {c1} -> {c2}");
        ensure!(c1 == (r1 * r2 * r3) as u64, "tucker ({r1},{r2},{r3}) core {c1}");
    }
    let workload = WorkloadSpec {
        features: 100_000,
        arity: 1,
        vocab: 1000,
        seed: 3,
    };
    let mut ms = Vec::new();
    for ranks in [RankSpec::Cp(200), RankSpec::Tucker(32, 20, 200)] {
        let model = ok(synthetic_model(dims, ranks, workload.vocab, 1))?;
        let atoms = synthetic_workload(&model, &workload);
        ms.push(ok(bench_predict(&model, &atoms, Execution::Sequential))?.wall_ms);
    }
    ensure!(ms[0] < ms[1], "cp {:.1} ms is not faster than tucker {:.1} ms", ms[0], ms[1]);
    Ok(format!("counts exact; 1e5 features: cp {:.1} ms, tucker {:.1} ms", ms[0], ms[1]))
}

/// Bigram scores in cluster form equal the sum of their two reduced unigrams.
fn cluster_reduction_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let word_names: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
    let mut clusters = ClusterMap::new(None);
    for w in word_names.iter().take(9) {
        let bits: String = (0..3).map(|_| if rng.gen::<bool>() { '1' } else { '0' }).collect();
        clusters.insert(w, &bits).map_err(|e| e.to_string())?;
    }
    let base: Vec<String> = (0..5).map(|i| format!("p{i}")).collect();
    let mut space = FeatureSpace::new(Vocab::with_unk());
    for w in &word_names {
        space.words.intern(w);
    }
    for u in &base {
        space.properties.intern(u);
    }
    let raw: Vec<RawAtom> = (0..1000)
        .map(|_| {
            let u = &base[rng.gen_range(0..base.len())];
            let a = &word_names[rng.gen_range(0..word_names.len())];
            let b = &word_names[rng.gen_range(0..word_names.len())];
            RawAtom::new(u.as_str(), &[a.as_str(), b.as_str()])
        })
        .collect();
    let reduced: Vec<[RawAtom; 2]> = raw.iter().map(|a| cluster_reduce(a, &clusters)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    for pair in &reduced {
        for a in pair {
            space.properties.intern(&a.property);
        }
    }
    space.freeze();
    ensure!(reduced.iter().flatten().any(|a| a.property.ends_with(UNK_CLUSTER)), "no unknown-cluster atom drawn");

    let spec = ToySpec {
        task: Task::Classify { labels: 3 },
        properties: space.properties.len(),
        vocab: space.words.len(),
        arities: vec![1],
        unigram_form: Form::Tucker,
        ..ToySpec::default()
    };
    let model = ok(random_model(&spec, 1.0, &mut rng))?;
    let scorer = Scorer::new(&model);
    let intern = |a: &RawAtom| -> Result<FeatureAtom, String> {
        let p = space.properties.get(&a.property).ok_or("property missing")?;
        let w = a.words.iter().map(|w| space.words.get(w).ok_or("word missing")).collect::<Result<Vec<_>, _>>()?;
        Ok(FeatureAtom::new(p, w))
    };
    let mut set = FeatureSet::new();
    for (atom, pair) in raw.iter().zip(&reduced) {
        let bigram = intern(atom)?;
        ok(set.push(bigram.clone()))?;
        for y in 0..3 {
            let direct = ok(scorer.score_clustered_atom(Some(y), &bigram, &space, &clusters))?;
            let a = ok(scorer.score_feature(Some(y), &intern(&pair[0])?))?;
            let b = ok(scorer.score_feature(Some(y), &intern(&pair[1])?))?;
            ensure!(direct.to_bits() == (a + b).to_bits(), "{atom:?} label {y}: {direct} != {}", a + b);
        }
    }
    let whole = ok(scorer.class_scores_clustered(&set, &space, &clusters))?;
    for (y, &w) in whole.iter().enumerate() {
        let mut total = 0.0;
        for pair in &reduced {
            let a = ok(scorer.score_feature(Some(y), &intern(&pair[0])?))?;
            let b = ok(scorer.score_feature(Some(y), &intern(&pair[1])?))?;
            total += a + b;
        }
        ensure!(w.to_bits() == total.to_bits(), "instance score for label {y}: {w} != {total}");
    }
    Ok("1000 bigram atoms and their instance score equal bit for bit".into())
}

/// A CP tensor equals the Tucker tensor with its superdiagonal core.
fn cp_as_tucker() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let spec = ToySpec {
            properties: rng.gen_range(1..=5),
            vocab: rng.gen_range(1..=6),
            unigram_form: Form::Cp,
            ngram_form: Form::Cp,
            cp_rank: rng.gen_range(1..=3),
            ..ToySpec::default()
        };
        let model = ok(random_model(&spec, 1.0, &mut rng))?;
        for (_, t) in model.tensors() {
            let LowRankTensor::Cp(cp) = t else {
                return Err("expected a CP tensor".into());
            };
            let a = ok(cp.materialize(MATERIALIZE_CAP))?;
            let b = ok(cp.as_tucker().materialize(MATERIALIZE_CAP))?;
            ensure!(a.shape() == b.shape(), "shapes differ");
            for (x, y) in a.data().iter().zip(b.data()) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    ensure!(worst < 1e-12, "max difference {worst:.3e}");
    Ok(format!("20 models, max difference {worst:.2e}"))
}

fn learn(planted_spec: &PlantedSpec, student: &ModelSpec) -> Result<(f64, usize, f64), String> {
    let start = Instant::now();
    let data = ok(planted(planted_spec))?;
    let words = data.teacher.words().clone();
    let mut model = ok(Model::init(student, planted_spec.task(), planted_spec.properties, words, &[1], false, 5))?;
    let config = TrainConfig {
        eta: 0.05,
        lambda: 0.005,
        epochs: 100,
        patience: 10,
        seed: 1,
        loss: Loss::for_task(planted_spec.task()),
        ..TrainConfig::default()
    };
    let history = ok(train(&mut model, &data.train, &data.dev, &config, |_| {}))?;
    let acc = ok(accuracy(&model, &data.dev, Execution::Parallel))?;
    Ok((acc, history.best_epoch, start.elapsed().as_secs_f64()))
}

/// Students recover planted CP teachers on held-out data.
fn learnability() -> Outcome {
    let cp = |r| ModelSpec {
        unigram_form: Form::Cp,
        cp_rank: r,
        ..ModelSpec::default()
    };
    let classify = PlantedSpec::default();
    // Rank 4 matches the label count, so the label factor starts at I.
    let (acc, epoch, secs) = learn(&classify, &cp(4))?;
    ensure!(acc >= 0.90 && secs < 120.0, "classification dev accuracy {acc:.3} at epoch {epoch} in {secs:.1} s");
    let rank = PlantedSpec {
        labels: None,
        ..PlantedSpec::default()
    };
    let (acc_r, epoch_r, secs_r) = learn(&rank, &cp(3))?;
    ensure!(acc_r >= 0.85 && secs_r < 120.0, "ranking accuracy@1 {acc_r:.3} at epoch {epoch_r} in {secs_r:.1} s");
    Ok(format!(
        "classification {acc:.3} (epoch {epoch}, {secs:.1} s); ranking {acc_r:.3} (epoch {epoch_r}, {secs_r:.1} s)"
    ))
}

/// Identical training runs give identical bytes; reloaded models predict
/// identically.
fn determinism() -> Outcome {
    let spec = PlantedSpec {
        train: 200,
        dev: 50,
        ..PlantedSpec::default()
    };
    let data = ok(planted(&spec))?;
    let student = ModelSpec {
        tucker_ranks: [Rank::Full, Rank::Fixed(4), Rank::Fixed(4)],
        ..ModelSpec::default()
    };
    let config = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let mut files = Vec::new();
    for _ in 0..2 {
        let mut model = ok(Model::init(&student, spec.task(), spec.properties, data.teacher.words().clone(), &[1], false, 9))?;
        ok(train(&mut model, &data.train, &data.dev, &config, |_| {}))?;
        files.push(to_bytes(&toy_bundle(model)));
    }
    ensure!(files[0] == files[1], "library runs differ");

    let dir = ok(tempfile::tempdir())?;
    let samples = common::samples();
    let mut outputs = Vec::new();
    for name in ["a.model", "b.model"] {
        let out = dir.path().join(name);
        let status = ok(std::process::Command::new(env!("CARGO_BIN_EXE_lrfr"))
            .arg("train")
            .arg("--train")
            .arg(samples.join("relations.train.jsonl"))
            .arg("--dev")
            .arg(samples.join("relations.dev.jsonl"))
            .arg("--templates")
            .arg(samples.join("relations.templates"))
            .arg("--model-out")
            .arg(&out)
            .args(["--epochs", "4", "--r1", "d", "--r2", "6", "--r3", "6", "--cp-rank", "6"])
            .output())?;
        ensure!(status.status.success(), "train failed: {}", String::from_utf8_lossy(&status.stderr));
        outputs.push(ok(std::fs::read(&out))?);
    }
    ensure!(outputs[0] == outputs[1], "CLI model files differ");

    let bundle = ok(from_bytes(&files[0]))?;
    ensure!(to_bytes(&bundle) == files[0], "save after load changed the bytes");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let original = ok(Model::init(&student, spec.task(), spec.properties, data.teacher.words().clone(), &[1], false, 9))?;
    let reloaded = ok(from_bytes(&to_bytes(&toy_bundle(original.clone()))))?.model;
    let (a, b) = (Scorer::new(&original), Scorer::new(&reloaded));
    for inst in data.dev.iter().take(50) {
        ensure!(ok(a.predict(inst))? == ok(b.predict(inst))?, "posteriors differ after reload");
    }
    for _ in 0..50 {
        let inst = random_instance(&original, &[4], 3, &mut rng);
        ensure!(ok(a.predict(&inst))? == ok(b.predict(&inst))?, "posteriors differ after reload");
    }
    Ok("library and CLI runs byte-identical; 100 posteriors equal after reload".into())
}

/// Posteriors sum to one and the argmax ignores large constant shifts.
fn softmax_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for trial in 0..2000 {
        let n = rng.gen_range(1..=30);
        let scale = [1.0, 50.0, 1e3, 1e6][trial % 4];
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
        let p = ok(softmax(&scores, "label"))?;
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
        for c in [1e6, -1e6, rng.gen_range(-1e6..1e6)] {
            let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
            let q = ok(softmax(&shifted, "label"))?;
            ensure!(q.iter().all(|v| v.is_finite()), "non-finite posterior under shift {c}");
            worst = worst.max((q.iter().sum::<f64>() - 1.0).abs());
            // Shifting may merge scores closer than the rounding step of s + c.
            let distinct = scores.iter().all(|&s| s == scores[argmax(&scores)] || (scores[argmax(&scores)] - s) > 1e-9);
            if distinct {
                ensure!(argmax(&q) == argmax(&p), "argmax moved under shift {c}");
            }
        }
    }
    ensure!(worst < 1e-12, "posterior sums off by {worst:.3e}");
    Ok(format!("2000 score vectors, max |sum - 1| {worst:.2e}"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("oracle score equivalence", oracle_equivalence),
        ("gradient correctness", gradient_correctness),
        ("parameter counts", parameter_counts),
        ("prediction complexity", prediction_complexity),
        ("cluster reduction identity", cluster_reduction_identity),
        ("CP as Tucker", cp_as_tucker),
        ("learnability", learnability),
        ("determinism", determinism),
        ("softmax contract", softmax_contract),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
