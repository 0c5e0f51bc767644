//! Versioned JSON document for a trained model. Trees are stored as nested
//! node records rather than the in-memory arena.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use viewtrace_core::benchmark::WindowSpec;
use viewtrace_core::classifier::{ModelParams, Node, Reconstructor, Tree, TreeEnsembleModel};

use crate::error::DataError;

pub const FORMAT: &str = "viewtrace-gbdt";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeRecord {
    Split {
        feature: u32,
        threshold: f64,
        left: Box<NodeRecord>,
        right: Box<NodeRecord>,
    },
    Leaf {
        leaf: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub params: ModelParams,
    pub n_features: usize,
    pub base_score: f64,
    /// Window used for magnitudes at flagged hours.
    pub window: WindowSpec,
    pub trees: Vec<NodeRecord>,
}

fn nest(nodes: &[Node], i: usize) -> NodeRecord {
    match &nodes[i] {
        Node::Leaf { weight } => NodeRecord::Leaf { leaf: *weight },
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => NodeRecord::Split {
            feature: *feature,
            threshold: *threshold,
            left: Box::new(nest(nodes, *left as usize)),
            right: Box::new(nest(nodes, *right as usize)),
        },
    }
}

// Pre-order flattening, so children always follow their parent.
fn flatten(rec: &NodeRecord, nodes: &mut Vec<Node>) -> u32 {
    let at = nodes.len();
    match rec {
        NodeRecord::Leaf { leaf } => nodes.push(Node::Leaf { weight: *leaf }),
        NodeRecord::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            nodes.push(Node::Leaf { weight: 0.0 });
            let l = flatten(left, nodes);
            let r = flatten(right, nodes);
            nodes[at] = Node::Split {
                feature: *feature,
                threshold: *threshold,
                left: l,
                right: r,
            };
        }
    }
    at as u32
}

impl ModelDocument {
    pub fn new(model: &TreeEnsembleModel, window: WindowSpec) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            params: model.params.clone(),
            n_features: model.n_features,
            base_score: model.base_score,
            window,
            trees: model.trees.iter().map(|t| nest(&t.nodes, 0)).collect(),
        }
    }

    pub fn to_model(&self) -> viewtrace_core::Result<TreeEnsembleModel> {
        let model = TreeEnsembleModel {
            params: self.params.clone(),
            n_features: self.n_features,
            base_score: self.base_score,
            trees: self
                .trees
                .iter()
                .map(|r| {
                    let mut nodes = Vec::new();
                    flatten(r, &mut nodes);
                    Tree { nodes }
                })
                .collect(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn reconstructor(&self) -> viewtrace_core::Result<Reconstructor> {
        Ok(Reconstructor {
            model: self.to_model()?,
            window: self.window,
        })
    }
}

pub fn save(path: &Path, doc: &ModelDocument) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn load(path: &Path) -> anyhow::Result<ModelDocument> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: ModelDocument = serde_json::from_str(&text).map_err(|e| DataError::in_file(path, e))?;
    if doc.format != FORMAT || doc.version != VERSION {
        return Err(DataError::in_file(
            path,
            format!("unsupported model format {} v{}", doc.format, doc.version),
        )
        .into());
    }
    doc.to_model().map_err(|e| DataError::in_file(path, e))?;
    Ok(doc)
}
