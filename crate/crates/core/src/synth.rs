//! Seeded synthetic models and data: random toy problems for oracle and
//! gradient checks, planted teachers for learnability tests, and feature
//! workloads for benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::features::{FeatureAtom, FeatureInstance, FeatureSet};
use crate::model::{
    EmbeddingMatrix, Form, Model, ModelSpec, Rank, Task, WordEncoding,
};
use crate::scoring::{argmax, Scorer};

/// Shape of a random toy problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub task: Task,
    pub properties: usize,
    /// Word vocabulary size, including the unknown entry.
    pub vocab: usize,
    /// Embedding dimension; `None` for one-hot words.
    pub embedding: Option<usize>,
    pub fine_tune: bool,
    pub arities: Vec<usize>,
    pub unigram_form: Form,
    pub ngram_form: Form,
    pub tucker_ranks: [usize; 3],
    pub cp_rank: usize,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            task: Task::Classify { labels: 3 },
            properties: 4,
            vocab: 5,
            embedding: None,
            fine_tune: false,
            arities: vec![1, 2],
            unigram_form: Form::Tucker,
            ngram_form: Form::Cp,
            tucker_ranks: [2, 3, 2],
            cp_rank: 3,
        }
    }
}

fn uniform(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..=scale)).collect()
}

/// Embedding table with a zero unknown row and uniform other rows.
pub fn random_embeddings(rng: &mut impl Rng, rows: usize, dim: usize, scale: f64) -> EmbeddingMatrix {
    let mut data = vec![0.0; dim];
    data.extend(uniform(rng, (rows - 1) * dim, scale));
    EmbeddingMatrix::new(rows, dim, data).expect("positive sizes")
}

/// Model whose every parameter is uniform in `[-scale, scale]`.
pub fn random_model(spec: &ToySpec, scale: f64, rng: &mut impl Rng) -> Result<Model> {
    let words = match spec.embedding {
        None => WordEncoding::OneHot { vocab: spec.vocab },
        Some(d) => WordEncoding::Embedded(random_embeddings(rng, spec.vocab, d, scale)),
    };
    let ms = ModelSpec {
        unigram_form: spec.unigram_form,
        ngram_form: spec.ngram_form,
        tucker_ranks: spec.tucker_ranks.map(Rank::Fixed),
        cp_rank: spec.cp_rank,
        init_scale: scale,
    };
    let mut model = Model::init(
        &ms,
        spec.task,
        spec.properties,
        words,
        &spec.arities,
        spec.fine_tune,
        rng.gen(),
    )?;
    for id in model.block_ids() {
        let block = model.block_mut(id).expect("listed block exists");
        for v in block.iter_mut() {
            *v = rng.gen_range(-scale..=scale);
        }
    }
    Ok(model)
}

fn vocab_size(model: &Model) -> usize {
    model.words().vocab_size()
}

/// Random atom of the given arity over a model's vocabularies.
pub fn random_atom(model: &Model, arity: usize, rng: &mut impl Rng) -> FeatureAtom {
    let words = (0..arity).map(|_| rng.gen_range(0..vocab_size(model))).collect();
    FeatureAtom::new(rng.gen_range(0..model.properties()), words)
}

/// Random feature set with `counts[k]` atoms of arity `k + 1`.
pub fn random_set(model: &Model, counts: &[usize], rng: &mut impl Rng) -> FeatureSet {
    let mut set = FeatureSet::new();
    for (k, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            set.push(random_atom(model, k + 1, rng)).expect("arity >= 1");
        }
    }
    set
}

/// Random labeled instance for the model's task. Ranking instances have
/// `candidates` choices; atoms are drawn per arity in the model.
pub fn random_instance(
    model: &Model,
    counts: &[usize],
    candidates: usize,
    rng: &mut impl Rng,
) -> FeatureInstance {
    match model.task() {
        Task::Classify { labels } => {
            FeatureInstance::classify(random_set(model, counts, rng), Some(rng.gen_range(0..labels)))
        }
        Task::Rank => {
            let sets = (0..candidates).map(|_| random_set(model, counts, rng)).collect();
            FeatureInstance::rank(sets, Some(rng.gen_range(0..candidates)))
        }
    }
}

/// Dataset labelled by a planted teacher.
#[derive(Debug, Clone)]
pub struct PlantedData {
    pub teacher: Model,
    pub train: Vec<FeatureInstance>,
    pub dev: Vec<FeatureInstance>,
}

/// Sizes of a planted problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    /// `Some(labels)` for classification, `None` for ranking.
    pub labels: Option<usize>,
    pub properties: usize,
    pub embedding: usize,
    pub vocab: usize,
    pub rank: usize,
    pub atoms_per_set: usize,
    /// Inclusive range of candidate counts for ranking.
    pub candidates: (usize, usize),
    pub train: usize,
    pub dev: usize,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            labels: Some(4),
            properties: 10,
            embedding: 8,
            vocab: 100,
            rank: 3,
            atoms_per_set: 3,
            candidates: (3, 8),
            train: 2000,
            dev: 500,
            seed: 7,
        }
    }
}

impl PlantedSpec {
    pub fn task(&self) -> Task {
        match self.labels {
            Some(labels) => Task::Classify { labels },
            None => Task::Rank,
        }
    }
}

/// Unigram data whose gold choices are the argmax of a random CP teacher
/// over pre-trained style embeddings.
pub fn planted(spec: &PlantedSpec) -> Result<PlantedData> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let toy = ToySpec {
        task: spec.task(),
        properties: spec.properties,
        vocab: spec.vocab,
        embedding: Some(spec.embedding),
        fine_tune: false,
        arities: vec![1],
        unigram_form: Form::Cp,
        ngram_form: Form::Cp,
        tucker_ranks: [spec.rank; 3],
        cp_rank: spec.rank,
    };
    let teacher = random_model(&toy, 1.0, &mut rng)?;
    let scorer = Scorer::new(&teacher);
    let make = |rng: &mut ChaCha8Rng| -> Result<FeatureInstance> {
        let set = |rng: &mut ChaCha8Rng| {
            let mut s = FeatureSet::new();
            for _ in 0..spec.atoms_per_set {
                let w = rng.gen_range(1..spec.vocab);
                let p = rng.gen_range(1..spec.properties);
                s.push(FeatureAtom::new(p, vec![w])).expect("unigram");
            }
            s
        };
        let mut inst = match spec.labels {
            Some(_) => FeatureInstance::classify(set(rng), None),
            None => {
                let k = rng.gen_range(spec.candidates.0..=spec.candidates.1);
                FeatureInstance::rank((0..k).map(|_| set(rng)).collect(), None)
            }
        };
        let scores = scorer.scores(&inst, Default::default())?;
        inst.gold = Some(argmax(&scores));
        Ok(inst)
    };
    let train = (0..spec.train).map(|_| make(&mut rng)).collect::<Result<Vec<_>>>()?;
    let dev = (0..spec.dev).map(|_| make(&mut rng)).collect::<Result<Vec<_>>>()?;
    Ok(PlantedData { teacher, train, dev })
}

/// Separable two-label toy: the label is fixed by which of two cue words
/// occurs; every instance also carries two distractor atoms.
pub fn separable(instances: usize, seed: u64) -> (Vec<FeatureInstance>, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (properties, vocab) = (3, 8);
    let data = (0..instances)
        .map(|i| {
            let y = i % 2;
            let mut s = FeatureSet::new();
            s.push(FeatureAtom::new(1, vec![1 + y])).expect("unigram");
            for _ in 0..2 {
                let w = rng.gen_range(3..vocab);
                s.push(FeatureAtom::new(2, vec![w])).expect("unigram");
            }
            FeatureInstance::classify(s, Some(y))
        })
        .collect();
    (data, properties, vocab)
}
