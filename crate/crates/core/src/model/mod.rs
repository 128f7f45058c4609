//! Low-rank parameterizations of the feature scoring tensor.
//!
//! A tensor scoring features with `n` lexical parts has views ordered
//! `[label, property, word_1, …, word_n]`. Ranking models drop the label view.

mod count;
mod cp;
mod factor;
mod tucker;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use count::{param_count, ModelDims, RankSpec};
pub use cp::CpModel;
pub use factor::{FactorMatrix, ViewInput};
pub use tucker::TuckerModel;

use crate::error::{Error, Result};
use crate::flops::Tally;
use crate::tensor::DenseTensor;

/// Default cap on the number of entries a materialized tensor may hold.
pub const MATERIALIZE_CAP: usize = 10_000_000;

/// Default half-width of the uniform initializer for non-square factors.
pub const INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViewRole {
    Label,
    Property,
    /// Lexical slot, 0-based.
    Word(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Tucker,
    Cp,
}

impl Form {
    pub fn name(self) -> &'static str {
        match self {
            Form::Tucker => "tucker",
            Form::Cp => "cp",
        }
    }
}

impl std::str::FromStr for Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tucker" => Ok(Form::Tucker),
            "cp" => Ok(Form::Cp),
            other => Err(Error::Config(format!("unknown tensor form `{other}`"))),
        }
    }
}

pub(crate) fn check_cap(dims: &[usize], cap: usize) -> Result<()> {
    let entries = dims.iter().map(|&d| d as u128).product::<u128>();
    if entries > cap as u128 {
        return Err(Error::Oversize { entries, cap });
    }
    Ok(())
}

/// Either parameterization behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum LowRankTensor {
    Tucker(TuckerModel),
    Cp(CpModel),
}

impl LowRankTensor {
    pub fn form(&self) -> Form {
        match self {
            LowRankTensor::Tucker(_) => Form::Tucker,
            LowRankTensor::Cp(_) => Form::Cp,
        }
    }

    pub fn factors(&self) -> &[FactorMatrix] {
        match self {
            LowRankTensor::Tucker(t) => t.factors(),
            LowRankTensor::Cp(c) => c.factors(),
        }
    }

    pub fn factors_mut(&mut self) -> &mut [FactorMatrix] {
        match self {
            LowRankTensor::Tucker(t) => t.factors_mut(),
            LowRankTensor::Cp(c) => c.factors_mut(),
        }
    }

    pub fn roles(&self) -> &[ViewRole] {
        match self {
            LowRankTensor::Tucker(t) => t.roles(),
            LowRankTensor::Cp(c) => c.roles(),
        }
    }

    pub fn order(&self) -> usize {
        self.factors().len()
    }

    /// Number of lexical views.
    pub fn arity(&self) -> usize {
        self.roles()
            .iter()
            .filter(|r| matches!(r, ViewRole::Word(_)))
            .count()
    }

    pub fn has_label_view(&self) -> bool {
        self.roles().first() == Some(&ViewRole::Label)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors().iter().map(FactorMatrix::dim).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.factors().iter().map(FactorMatrix::rank).collect()
    }

    pub fn num_params(&self) -> usize {
        match self {
            LowRankTensor::Tucker(t) => t.num_params(),
            LowRankTensor::Cp(c) => c.num_params(),
        }
    }

    pub fn materialize(&self, cap: usize) -> Result<DenseTensor> {
        match self {
            LowRankTensor::Tucker(t) => t.materialize(cap),
            LowRankTensor::Cp(c) => c.materialize(cap),
        }
    }

    /// Score of one feature given one input per view, in view order.
    pub fn score(&self, inputs: &[ViewInput<'_>]) -> Result<f64> {
        self.score_counted(inputs, &mut ())
    }

    pub fn score_counted<T: Tally>(&self, inputs: &[ViewInput<'_>], tally: &mut T) -> Result<f64> {
        if inputs.len() != self.order() {
            let expected = self.arity();
            let found = inputs.len() as isize - (self.order() - expected) as isize;
            return Err(Error::Arity {
                expected,
                found: found.max(0) as usize,
            });
        }
        let hidden = self
            .factors()
            .iter()
            .zip(inputs)
            .map(|(f, &x)| f.apply(x))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[f64]> = hidden.iter().map(|h| h.as_ref()).collect();
        Ok(self.score_hidden(&refs, tally))
    }

    /// Score from hidden representations of all views.
    pub fn score_hidden<T: Tally>(&self, hidden: &[&[f64]], tally: &mut T) -> f64 {
        match self {
            LowRankTensor::Tucker(t) => t.score_hidden(hidden, tally),
            LowRankTensor::Cp(c) => c.score_hidden(hidden, tally),
        }
    }

    /// Contraction of every view but the first; dotting the result with the
    /// first view's hidden vector gives the score.
    pub fn leading_vector<T: Tally>(&self, trailing: &[&[f64]], tally: &mut T) -> Vec<f64> {
        match self {
            LowRankTensor::Tucker(t) => t.leading_vector(trailing, tally),
            LowRankTensor::Cp(c) => c.leading_vector(trailing, tally),
        }
    }

    pub fn partials(&self, hidden: &[&[f64]]) -> Vec<Vec<f64>> {
        match self {
            LowRankTensor::Tucker(t) => t.partials(hidden),
            LowRankTensor::Cp(c) => c.partials(hidden),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classify { labels: usize },
    Rank,
}

/// Dense `rows × dim` table of word embeddings, row-major. Row 0 is the
/// unknown word.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || dim == 0 || data.len() != rows * dim {
            return Err(Error::InvalidShape(format!(
                "embedding table {}x{} with {} entries",
                rows,
                dim,
                data.len()
            )));
        }
        Ok(EmbeddingMatrix { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, w: usize) -> &[f64] {
        &self.data[w * self.dim..(w + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WordEncoding {
    OneHot { vocab: usize },
    Embedded(EmbeddingMatrix),
}

impl WordEncoding {
    pub fn vocab_size(&self) -> usize {
        match self {
            WordEncoding::OneHot { vocab } => *vocab,
            WordEncoding::Embedded(e) => e.rows(),
        }
    }

    /// Input dimension of a lexical view.
    pub fn view_dim(&self) -> usize {
        match self {
            WordEncoding::OneHot { vocab } => *vocab,
            WordEncoding::Embedded(e) => e.dim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Fixed(usize),
    /// Equal to the view's input dimension.
    Full,
}

impl Rank {
    pub fn resolve(self, dim: usize) -> usize {
        match self {
            Rank::Fixed(r) => r,
            Rank::Full => dim,
        }
    }
}

impl std::str::FromStr for Rank {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "d" | "full" => Ok(Rank::Full),
            v => match v.parse::<usize>() {
                Ok(r) if r > 0 => Ok(Rank::Fixed(r)),
                _ => Err(Error::Config(format!("invalid rank `{v}`"))),
            },
        }
    }
}

impl std::fmt::Display for Rank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rank::Fixed(r) => write!(f, "{r}"),
            Rank::Full => f.write_str("d"),
        }
    }
}

/// How to build the tensors of a fresh model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    /// Form of the unigram tensor.
    pub unigram_form: Form,
    /// Form of tensors for two or more lexical parts.
    pub ngram_form: Form,
    /// Tucker ranks `(r_1, r_2, r_3)`; the lexical rank is shared by all
    /// lexical views. `r_1` is ignored for ranking models.
    pub tucker_ranks: [Rank; 3],
    pub cp_rank: usize,
    pub init_scale: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            unigram_form: Form::Tucker,
            ngram_form: Form::Cp,
            tucker_ranks: [Rank::Fixed(20), Rank::Fixed(20), Rank::Fixed(50)],
            cp_rank: 50,
            init_scale: INIT_SCALE,
        }
    }
}

/// Identifies one parameter block of a [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockId {
    Core { arity: usize },
    Factor { arity: usize, view: usize },
    Embeddings,
}

impl std::fmt::Display for BlockId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlockId::Core { arity } => write!(f, "t{arity}.core"),
            BlockId::Factor { arity, view } => write!(f, "t{arity}.w{view}"),
            BlockId::Embeddings => f.write_str("embeddings"),
        }
    }
}

/// L2 target of a parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    /// Not regularized.
    None,
    Zero,
    /// Square factor of side `n` started at the identity.
    Identity(usize),
}

/// A complete scorer: one low-rank tensor per lexical arity plus the word
/// input encoding shared by all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    task: Task,
    properties: usize,
    tensors: Vec<Option<LowRankTensor>>,
    words: WordEncoding,
    fine_tune: bool,
}

impl Model {
    pub fn new(
        task: Task,
        properties: usize,
        words: WordEncoding,
        tensors: Vec<LowRankTensor>,
        fine_tune: bool,
    ) -> Result<Self> {
        if properties == 0 {
            return Err(Error::Config("property vocabulary is empty".into()));
        }
        if fine_tune && matches!(words, WordEncoding::OneHot { .. }) {
            return Err(Error::Config(
                "embedding fine-tuning needs pre-trained embeddings".into(),
            ));
        }
        let mut slots: Vec<Option<LowRankTensor>> = Vec::new();
        for t in tensors {
            let arity = t.arity();
            if arity == 0 {
                return Err(Error::Config("tensor without lexical views".into()));
            }
            let expected = view_layout(task, properties, &words, arity);
            let found: Vec<(ViewRole, usize)> =
                t.roles().iter().copied().zip(t.dims()).collect();
            if expected != found {
                return Err(Error::Shape(format!(
                    "tensor for arity {arity} has views {found:?}, expected {expected:?}"
                )));
            }
            if slots.len() < arity {
                slots.resize(arity, None);
            }
            if slots[arity - 1].is_some() {
                return Err(Error::Config(format!("two tensors for arity {arity}")));
            }
            slots[arity - 1] = Some(t);
        }
        Ok(Model {
            task,
            properties,
            tensors: slots,
            words,
            fine_tune,
        })
    }

    /// Fresh model with one tensor per requested arity.
    pub fn init(
        spec: &ModelSpec,
        task: Task,
        properties: usize,
        words: WordEncoding,
        arities: &[usize],
        fine_tune: bool,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut arities = arities.to_vec();
        arities.sort_unstable();
        arities.dedup();
        let mut tensors = Vec::new();
        for &n in &arities {
            let layout = view_layout(task, properties, &words, n);
            let (roles, dims): (Vec<ViewRole>, Vec<usize>) = layout.into_iter().unzip();
            let form = if n == 1 {
                spec.unigram_form
            } else {
                spec.ngram_form
            };
            let t = match form {
                Form::Tucker => {
                    let ranks: Vec<usize> = roles
                        .iter()
                        .zip(&dims)
                        .map(|(role, &d)| {
                            let r = match role {
                                ViewRole::Label => spec.tucker_ranks[0],
                                ViewRole::Property => spec.tucker_ranks[1],
                                ViewRole::Word(_) => spec.tucker_ranks[2],
                            };
                            r.resolve(d)
                        })
                        .collect();
                    LowRankTensor::Tucker(TuckerModel::init(
                        roles,
                        &dims,
                        &ranks,
                        spec.init_scale,
                        &mut rng,
                    )?)
                }
                Form::Cp => LowRankTensor::Cp(CpModel::init(
                    roles,
                    &dims,
                    spec.cp_rank,
                    spec.init_scale,
                    &mut rng,
                )?),
            };
            tensors.push(t);
        }
        Model::new(task, properties, words, tensors, fine_tune)
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn labels(&self) -> Option<usize> {
        match self.task {
            Task::Classify { labels } => Some(labels),
            Task::Rank => None,
        }
    }

    pub fn properties(&self) -> usize {
        self.properties
    }

    pub fn words(&self) -> &WordEncoding {
        &self.words
    }

    pub fn fine_tune(&self) -> bool {
        self.fine_tune
    }

    pub fn tensor(&self, arity: usize) -> Option<&LowRankTensor> {
        arity
            .checked_sub(1)
            .and_then(|i| self.tensors.get(i))
            .and_then(Option::as_ref)
    }

    pub fn tensor_mut(&mut self, arity: usize) -> Option<&mut LowRankTensor> {
        arity
            .checked_sub(1)
            .and_then(|i| self.tensors.get_mut(i))
            .and_then(Option::as_mut)
    }

    /// `(arity, tensor)` pairs in increasing arity.
    pub fn tensors(&self) -> impl Iterator<Item = (usize, &LowRankTensor)> {
        self.tensors
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.as_ref().map(|t| (i + 1, t)))
    }

    /// Index of the property view inside every tensor.
    pub fn property_view(&self) -> usize {
        match self.task {
            Task::Classify { .. } => 1,
            Task::Rank => 0,
        }
    }

    pub fn word_input(&self, w: usize) -> ViewInput<'_> {
        match &self.words {
            WordEncoding::OneHot { .. } => ViewInput::Index(w),
            WordEncoding::Embedded(e) => ViewInput::Dense(e.row(w)),
        }
    }

    pub fn num_params(&self) -> usize {
        let tensors: usize = self.tensors().map(|(_, t)| t.num_params()).sum();
        let emb = match &self.words {
            WordEncoding::Embedded(e) if self.fine_tune => e.data().len(),
            _ => 0,
        };
        tensors + emb
    }

    /// Trainable blocks in a fixed order: per arity the core (Tucker) then the
    /// factors by view, then embeddings when fine-tuned.
    pub fn block_ids(&self) -> Vec<BlockId> {
        let mut ids = Vec::new();
        for (arity, t) in self.tensors() {
            if let LowRankTensor::Tucker(_) = t {
                ids.push(BlockId::Core { arity });
            }
            ids.extend((0..t.order()).map(|view| BlockId::Factor { arity, view }));
        }
        if self.fine_tune {
            ids.push(BlockId::Embeddings);
        }
        ids
    }

    /// Every stored parameter block, including frozen embeddings.
    pub(crate) fn stored_block_ids(&self) -> Vec<BlockId> {
        let mut ids = self.block_ids();
        if !self.fine_tune && matches!(self.words, WordEncoding::Embedded(_)) {
            ids.push(BlockId::Embeddings);
        }
        ids
    }

    pub fn block(&self, id: BlockId) -> Option<&[f64]> {
        match id {
            BlockId::Core { arity } => match self.tensor(arity)? {
                LowRankTensor::Tucker(t) => Some(t.core().data()),
                LowRankTensor::Cp(_) => None,
            },
            BlockId::Factor { arity, view } => {
                self.tensor(arity)?.factors().get(view).map(FactorMatrix::data)
            }
            BlockId::Embeddings => match &self.words {
                WordEncoding::Embedded(e) => Some(e.data()),
                WordEncoding::OneHot { .. } => None,
            },
        }
    }

    pub fn block_mut(&mut self, id: BlockId) -> Option<&mut [f64]> {
        match id {
            BlockId::Core { arity } => match self.tensor_mut(arity)? {
                LowRankTensor::Tucker(t) => Some(t.core_mut().data_mut()),
                LowRankTensor::Cp(_) => None,
            },
            BlockId::Factor { arity, view } => self
                .tensor_mut(arity)?
                .factors_mut()
                .get_mut(view)
                .map(FactorMatrix::data_mut),
            BlockId::Embeddings => match &mut self.words {
                WordEncoding::Embedded(e) => Some(e.data_mut()),
                WordEncoding::OneHot { .. } => None,
            },
        }
    }

    /// Length of one column of a block (the unit of sparse updates).
    pub fn block_column_len(&self, id: BlockId) -> usize {
        match id {
            BlockId::Core { .. } => self.block(id).map_or(0, <[f64]>::len),
            BlockId::Factor { arity, view } => self
                .tensor(arity)
                .and_then(|t| t.factors().get(view))
                .map_or(0, FactorMatrix::rank),
            BlockId::Embeddings => self.words.view_dim(),
        }
    }

    pub fn block_anchor(&self, id: BlockId) -> Anchor {
        match id {
            BlockId::Core { .. } => Anchor::Zero,
            BlockId::Factor { arity, view } => {
                match self.tensor(arity).and_then(|t| t.factors().get(view)) {
                    Some(f) if f.is_square() => Anchor::Identity(f.rank()),
                    _ => Anchor::Zero,
                }
            }
            BlockId::Embeddings => Anchor::None,
        }
    }
}

/// `(role, input dimension)` of every view for a tensor of the given arity.
pub fn view_layout(
    task: Task,
    properties: usize,
    words: &WordEncoding,
    arity: usize,
) -> Vec<(ViewRole, usize)> {
    let mut v = Vec::with_capacity(arity + 2);
    if let Task::Classify { labels } = task {
        v.push((ViewRole::Label, labels));
    }
    v.push((ViewRole::Property, properties));
    v.extend((0..arity).map(|i| (ViewRole::Word(i), words.view_dim())));
    v
}
