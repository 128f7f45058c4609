//! Scoring throughput: CP against Tucker on one synthetic workload, and
//! sequential against data-parallel batch prediction.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lrfr::bench::{synthetic_model, synthetic_workload, WorkloadSpec};
use lrfr::model::{Form, ModelDims, RankSpec};
use lrfr::par::Execution;
use lrfr::scoring::Scorer;
use lrfr::synth::{planted, PlantedSpec};

const DIMS: ModelDims = ModelDims {
    labels: 32,
    properties: 264,
    embedding: 200,
    arity: 1,
};

fn forms(c: &mut Criterion) {
    let workload = WorkloadSpec {
        features: 1000,
        arity: 1,
        vocab: 1000,
        seed: 1,
    };
    let mut group = c.benchmark_group("score_1k_features");
    for ranks in [RankSpec::Cp(200), RankSpec::Tucker(32, 20, 200)] {
        let model = synthetic_model(DIMS, ranks, workload.vocab, 1).expect("model");
        let atoms = synthetic_workload(&model, &workload);
        let scorer = Scorer::cached(&model, Execution::Parallel);
        let name = match ranks {
            RankSpec::Cp(_) => Form::Cp.name(),
            _ => Form::Tucker.name(),
        };
        group.bench_function(name, |b| {
            b.iter(|| {
                let mut total = 0.0;
                for (y, atom) in &atoms {
                    total += scorer.score_feature(Some(*y), atom).expect("score");
                }
                black_box(total)
            })
        });
    }
    group.finish();
}

fn batch(c: &mut Criterion) {
    let spec = PlantedSpec {
        train: 0,
        dev: 2000,
        atoms_per_set: 20,
        embedding: 50,
        ..PlantedSpec::default()
    };
    let data = planted(&spec).expect("planted data");
    let scorer = Scorer::cached(&data.teacher, Execution::Parallel);
    let mut group = c.benchmark_group("predict_batch_2k");
    for exec in [Execution::Sequential, Execution::Parallel] {
        let label = if exec.is_parallel() { "parallel" } else { "sequential" };
        group.bench_with_input(BenchmarkId::from_parameter(label), &exec, |b, &exec| {
            b.iter(|| black_box(scorer.predict_batch(&data.dev, exec).expect("predict")))
        });
    }
    group.finish();
}

criterion_group!(benches, forms, batch);
criterion_main!(benches);
