//! Glue from annotated instances to interned feature instances, and the
//! bundle that travels with a trained model.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::features::{parse_templates, reduce_instance, Extractor, FeatureInstance, FeatureSpace};
use crate::io::{AnnotatedInstance, ClusterMap};
use crate::model::Model;

/// How features with two or more words are scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NgramMode {
    /// One tensor per arity.
    #[default]
    MultiTensor,
    /// Bigrams rewritten as cluster-conjoined unigrams; one unigram tensor.
    Cluster,
}

impl NgramMode {
    pub fn name(self) -> &'static str {
        match self {
            NgramMode::MultiTensor => "multi-tensor",
            NgramMode::Cluster => "cluster",
        }
    }
}

impl std::str::FromStr for NgramMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multi-tensor" => Ok(NgramMode::MultiTensor),
            "cluster" => Ok(NgramMode::Cluster),
            other => Err(Error::Config(format!("unknown n-gram mode `{other}`"))),
        }
    }
}

/// Extraction settings plus the vocabularies they intern into.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub extractor: Extractor,
    pub space: FeatureSpace,
    pub ngram_mode: NgramMode,
    pub clusters: Option<ClusterMap>,
}

impl Pipeline {
    pub fn new(
        extractor: Extractor,
        space: FeatureSpace,
        ngram_mode: NgramMode,
        clusters: Option<ClusterMap>,
    ) -> Result<Self> {
        if ngram_mode == NgramMode::Cluster && clusters.is_none() {
            return Err(Error::Config("cluster mode needs a cluster file".into()));
        }
        Ok(Pipeline {
            extractor,
            space,
            ngram_mode,
            clusters,
        })
    }

    fn raw(&self, inst: &AnnotatedInstance) -> Result<crate::features::RawInstance> {
        let raw = self.extractor.extract(inst)?;
        match (self.ngram_mode, &self.clusters) {
            (NgramMode::Cluster, Some(c)) => reduce_instance(&raw, c),
            _ => Ok(raw),
        }
    }

    /// Extracts and interns with the gold annotation. Vocabularies grow
    /// unless frozen.
    pub fn prepare(&mut self, inst: &AnnotatedInstance) -> Result<FeatureInstance> {
        let raw = self.raw(inst)?;
        self.space.intern(&raw)
    }

    /// Extracts and interns features only.
    pub fn prepare_unlabeled(&mut self, inst: &AnnotatedInstance) -> Result<FeatureInstance> {
        let raw = self.raw(inst)?;
        self.space.intern_unlabeled(&raw)
    }

    pub fn prepare_all(&mut self, insts: &[AnnotatedInstance]) -> Result<Vec<FeatureInstance>> {
        insts.iter().map(|i| self.prepare(i)).collect()
    }
}

/// Everything needed to predict with a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: Model,
    pub space: FeatureSpace,
    /// Source text of the template file.
    pub templates: String,
    pub candidate_bias: bool,
    pub ngram_mode: NgramMode,
    pub cluster_prefix: Option<usize>,
    /// Settings the model was trained with, echoed for reference.
    pub config: BTreeMap<String, String>,
}

impl ModelBundle {
    /// A frozen pipeline for prediction. Cluster mode needs the cluster map.
    pub fn pipeline(&self, clusters: Option<ClusterMap>) -> Result<Pipeline> {
        let templates = parse_templates(&self.templates, "<model templates>")?;
        let mut space = self.space.clone();
        space.freeze();
        Pipeline::new(
            Extractor::new(templates, self.candidate_bias),
            space,
            self.ngram_mode,
            clusters,
        )
    }
}
