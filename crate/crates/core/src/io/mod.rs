//! File formats: embeddings, clusters, instances, templates and models.

pub mod clusters;
pub mod embeddings;
pub mod instances;
pub mod model_file;

pub use clusters::{load_clusters, ClusterMap, UNK_CLUSTER};
pub use embeddings::{load_embeddings, EmbeddingTable};
pub use instances::{load_instances, parse_instances, write_instances, AnnotatedInstance, Annotation};
pub use model_file::{load_model, save_model, FORMAT_VERSION};

use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{parse_templates, Template};

pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<Template>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_templates(&text, &path.display().to_string())
}
