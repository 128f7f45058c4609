//! Parameter and prediction-cost accounting.
//!
//! Multiply-add counts come from running the scoring kernels with a
//! [`FlopCounter`]. They cover the contraction after hidden vectors are
//! available; the lookups and word transforms that can be precomputed are
//! not counted.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::FeatureAtom;
use crate::flops::FlopCounter;
use crate::model::{
    param_count, CpModel, FactorMatrix, Form, LowRankTensor, Model, ModelDims, RankSpec, Task,
    TuckerModel, ViewRole, WordEncoding,
};
use crate::par::{self, Execution};
use crate::scoring::Scorer;
use crate::synth::random_embeddings;
use crate::tensor::DenseTensor;

fn roles(n: usize) -> Vec<ViewRole> {
    let mut r = vec![ViewRole::Label, ViewRole::Property];
    r.extend((0..n).map(ViewRole::Word));
    r
}

fn rank_list(ranks: RankSpec, n: usize) -> Result<Vec<usize>> {
    match ranks {
        RankSpec::Tucker(r1, r2, r3) => {
            let mut v = vec![r1, r2];
            v.extend(std::iter::repeat_n(r3, n));
            Ok(v)
        }
        RankSpec::Cp(r) => Ok(vec![r; n + 2]),
        RankSpec::Full => Err(Error::Config("flop counts need a low-rank form".into())),
    }
}

fn check(ranks: &[usize], n: usize) -> Result<()> {
    if n == 0 || ranks.contains(&0) {
        return Err(Error::Config("arity and ranks must be positive".into()));
    }
    Ok(())
}

/// Per-stage multiply-adds of scoring one feature of arity `n` against one
/// label.
pub fn count_flops_detailed(ranks: RankSpec, n: usize) -> Result<FlopCounter> {
    let rs = rank_list(ranks, n)?;
    check(&rs, n)?;
    let t = match ranks {
        RankSpec::Tucker(..) => {
            let core = DenseTensor::zeros(rs.clone())?;
            let factors = rs.iter().map(|&r| FactorMatrix::zeros(r, 1)).collect();
            LowRankTensor::Tucker(TuckerModel::new(core, factors, roles(n))?)
        }
        _ => {
            let factors = rs.iter().map(|&r| FactorMatrix::zeros(r, 1)).collect();
            LowRankTensor::Cp(CpModel::new(factors, roles(n))?)
        }
    };
    let hidden: Vec<Vec<f64>> = rs.iter().map(|&r| vec![0.0; r]).collect();
    let refs: Vec<&[f64]> = hidden.iter().map(Vec::as_slice).collect();
    let mut counter = FlopCounter::new();
    t.score_hidden(&refs, &mut counter);
    Ok(counter)
}

/// Total multiply-adds of scoring one feature. The form is implied by
/// `ranks`; dims do not enter the count but are validated.
pub fn count_flops(form: Form, dims: ModelDims, ranks: RankSpec, n: usize) -> Result<u64> {
    match (form, ranks) {
        (Form::Tucker, RankSpec::Tucker(..)) | (Form::Cp, RankSpec::Cp(_)) => {}
        _ => return Err(Error::Config("ranks do not match the tensor form".into())),
    }
    param_count(ranks, ModelDims { arity: n, ..dims })?;
    Ok(count_flops_detailed(ranks, n)?.total())
}

/// Features to score in a benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorkloadSpec {
    pub features: usize,
    pub arity: usize,
    /// Vocabulary rows of the synthetic embedding table.
    pub vocab: usize,
    pub seed: u64,
}

/// A classification model with random parameters and one tensor of the
/// workload's arity, over random embeddings of dimension `dims.embedding`.
pub fn synthetic_model(dims: ModelDims, ranks: RankSpec, vocab: usize, seed: u64) -> Result<Model> {
    let n = dims.arity;
    let rs = rank_list(ranks, n)?;
    check(&rs, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut view_dims = vec![dims.labels, dims.properties];
    view_dims.extend(std::iter::repeat_n(dims.embedding, n));
    let t = match ranks {
        RankSpec::Tucker(..) => LowRankTensor::Tucker(TuckerModel::init(roles(n), &view_dims, &rs, 0.1, &mut rng)?),
        _ => LowRankTensor::Cp(CpModel::init(roles(n), &view_dims, rs[0], 0.1, &mut rng)?),
    };
    let words = WordEncoding::Embedded(random_embeddings(&mut rng, vocab.max(2), dims.embedding, 1.0));
    Model::new(Task::Classify { labels: dims.labels }, dims.properties, words, vec![t], false)
}

/// Random `(label, atom)` pairs for a model.
pub fn synthetic_workload(model: &Model, spec: &WorkloadSpec) -> Vec<(usize, FeatureAtom)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels = model.labels().unwrap_or(1);
    let vocab = model.words().vocab_size();
    (0..spec.features)
        .map(|_| {
            let words = (0..spec.arity).map(|_| rng.gen_range(0..vocab)).collect();
            let atom = FeatureAtom::new(rng.gen_range(0..model.properties()), words);
            (rng.gen_range(0..labels), atom)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub form: String,
    pub labels: usize,
    pub properties: usize,
    pub embedding: usize,
    pub arity: usize,
    pub ranks: Vec<usize>,
    pub param_count: u128,
    pub features: usize,
    /// Multiply-adds per feature; 0 for an empty workload.
    pub flops_per_feature: u64,
    /// The first contraction stage of one feature.
    pub core_flops_per_feature: u64,
    pub wall_ms: f64,
    pub ms_per_10k: f64,
}

pub const REPORT_HEADER: &str = "form\tlabels\tproperties\tembedding\tarity\tranks\tparam_count\tfeatures\tflops_per_feature\tcore_flops_per_feature\twall_ms\tms_per_10k";

impl CostReport {
    pub fn tsv(&self) -> String {
        let ranks: Vec<String> = self.ranks.iter().map(usize::to_string).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.3}\t{:.3}",
            self.form,
            self.labels,
            self.properties,
            self.embedding,
            self.arity,
            ranks.join(","),
            self.param_count,
            self.features,
            self.flops_per_feature,
            self.core_flops_per_feature,
            self.wall_ms,
            self.ms_per_10k
        )
    }

    pub fn json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Times scoring every `(label, atom)` of a workload against a model with
/// a single tensor. Word vectors are precomputed before timing starts.
pub fn bench_predict(model: &Model, workload: &[(usize, FeatureAtom)], exec: Execution) -> Result<CostReport> {
    let (n, t) = model
        .tensors()
        .next()
        .ok_or_else(|| Error::Config("model has no tensor".into()))?;
    let ranks = t.ranks();
    let spec = match t {
        LowRankTensor::Tucker(_) => RankSpec::Tucker(ranks[0], ranks[1], ranks[2]),
        LowRankTensor::Cp(c) => RankSpec::Cp(c.rank()),
    };
    let dims = ModelDims {
        labels: model.labels().unwrap_or(1),
        properties: model.properties(),
        embedding: model.words().view_dim(),
        arity: n,
    };
    let scorer = Scorer::cached(model, Execution::Parallel);
    let (flops, core) = match workload.first() {
        Some((y, atom)) => {
            let mut c = FlopCounter::new();
            scorer.score_feature_counted(Some(*y), atom, &mut c)?;
            (c.total(), c.core())
        }
        None => (0, 0),
    };
    let start = Instant::now();
    let scores = par::try_map(exec, workload, |(y, atom)| scorer.score_feature(Some(*y), atom))?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    std::hint::black_box(scores);
    let features = workload.len();
    Ok(CostReport {
        form: t.form().name().to_string(),
        labels: dims.labels,
        properties: dims.properties,
        embedding: dims.embedding,
        arity: n,
        ranks,
        param_count: param_count(spec, dims)?,
        features,
        flops_per_feature: flops,
        core_flops_per_feature: core,
        wall_ms: if features == 0 { 0.0 } else { wall_ms },
        ms_per_10k: if features == 0 {
            0.0
        } else {
            wall_ms * 1e4 / features as f64
        },
    })
}
