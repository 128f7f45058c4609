//! Reference implementations shared by integration tests. Everything here
//! is written with plain loops over full index ranges and deliberately
//! avoids the library's contraction kernels.

#![allow(dead_code)]

use lrfr::features::FeatureAtom;
use lrfr::model::{LowRankTensor, Model, WordEncoding};

/// Advances a row-major multi-index; false once every index has wrapped.
pub fn next_index(idx: &mut [usize], shape: &[usize]) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return true;
        }
        idx[k] = 0;
    }
    false
}

/// Every entry of the full tensor, row-major, built entry by entry from the
/// factors (and the core for Tucker).
pub fn brute_tensor(t: &LowRankTensor) -> (Vec<usize>, Vec<f64>) {
    let dims = t.dims();
    let ranks = t.ranks();
    let factors = t.factors();
    let mut out = Vec::new();
    let mut idx = vec![0; dims.len()];
    loop {
        let v = match t {
            LowRankTensor::Cp(_) => (0..ranks[0])
                .map(|r| {
                    factors
                        .iter()
                        .zip(&idx)
                        .map(|(f, &i)| f.get(r, i))
                        .product::<f64>()
                })
                .sum(),
            LowRankTensor::Tucker(m) => {
                let core = m.core();
                let mut s = 0.0;
                let mut r = vec![0; ranks.len()];
                loop {
                    let mut term = core.get(&r);
                    for (k, f) in factors.iter().enumerate() {
                        term *= f.get(r[k], idx[k]);
                    }
                    s += term;
                    if !next_index(&mut r, &ranks) {
                        break;
                    }
                }
                s
            }
        };
        out.push(v);
        if !next_index(&mut idx, &dims) {
            break;
        }
    }
    (dims, out)
}

/// Input vector of each view for scoring `atom` against `label`.
pub fn view_inputs(model: &Model, label: Option<usize>, atom: &FeatureAtom) -> Vec<Vec<f64>> {
    let t = model.tensor(atom.arity()).expect("tensor for arity");
    let dims = t.dims();
    let one_hot = |d: usize, i: usize| {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    };
    let mut inputs = Vec::new();
    let mut k = 0;
    if let Some(y) = label {
        inputs.push(one_hot(dims[0], y));
        k = 1;
    }
    inputs.push(one_hot(dims[k], atom.property));
    for &w in &atom.words {
        inputs.push(match model.words() {
            WordEncoding::OneHot { vocab } => one_hot(*vocab, w),
            WordEncoding::Embedded(e) => e.row(w).to_vec(),
        });
    }
    inputs
}

/// `Σ_idx T[idx] Π_k x_k[idx_k]` over the brute-force tensor.
pub fn brute_score(model: &Model, label: Option<usize>, atom: &FeatureAtom) -> f64 {
    let t = model.tensor(atom.arity()).expect("tensor for arity");
    let (dims, data) = brute_tensor(t);
    let inputs = view_inputs(model, label, atom);
    let mut idx = vec![0; dims.len()];
    let mut s = 0.0;
    for v in data {
        let mut w = v;
        for (k, &i) in idx.iter().enumerate() {
            w *= inputs[k][i];
        }
        s += w;
        next_index(&mut idx, &dims);
    }
    s
}

/// Numerically stable reference softmax.
pub fn ref_softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Wraps a synthetic model with placeholder vocabularies of matching sizes.
pub fn toy_bundle(model: lrfr::model::Model) -> lrfr::pipeline::ModelBundle {
    use lrfr::features::{FeatureSpace, Vocab, UNK};
    let names = |prefix: &str, n: usize, unk: bool| {
        let mut v: Vec<String> = (0..n).map(|i| format!("{prefix}{i}")).collect();
        if unk {
            v[0] = UNK.to_string();
        }
        Vocab::from_items(v, unk).expect("distinct names")
    };
    let space = FeatureSpace {
        labels: names("L", model.labels().unwrap_or(0), false),
        properties: names("p", model.properties(), true),
        words: names("w", model.words().vocab_size(), true),
    };
    lrfr::pipeline::ModelBundle {
        model,
        space,
        templates: String::new(),
        candidate_bias: false,
        ngram_mode: lrfr::pipeline::NgramMode::MultiTensor,
        cluster_prefix: None,
        config: Default::default(),
    }
}

/// Directory of the sample data files shipped with the repository.
pub fn samples() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../samples")
}
