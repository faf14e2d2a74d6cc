//! The alignment mapping artifact and its lookup index.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::peakedness::PeakednessReport;
use crate::schema::{is_identifier, ComponentKind, ComponentRef};

use super::io::write_atomically;

pub const MAPPING_FORMAT: &str = "toolalign-mapping/1";

#[derive(Debug, thiserror::Error)]
pub enum MappingError {
    #[error("mapping i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed mapping: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported mapping format `{0}`")]
    Format(String),
    #[error("{scope}: `{name}` is mapped from both `{first}` and `{second}`")]
    InverseViolation {
        scope: String,
        name: String,
        first: String,
        second: String,
    },
    #[error("{scope}: `{name}` appears in more than one record")]
    DuplicateOriginal { scope: String, name: String },
    #[error("record `{path}`: {reason}")]
    InvalidRecord { path: String, reason: String },
}

/// How a record's final name was settled against earlier claims in its
/// scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionResolution {
    /// The peakedness selection was free and kept.
    None,
    /// The selection was taken; the best free candidate was used instead.
    NextBest,
    /// No candidate was free (or the component was not aligned); the
    /// original name is kept.
    KeptOriginal,
}

/// Outcome for one component.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentRecord {
    pub component: ComponentRef,
    pub original_name: String,
    pub aligned_name: String,
    /// `None` for components that were skipped (empty description).
    pub peakedness_report: Option<PeakednessReport<f64>>,
    pub candidate_set_digest: Option<String>,
    pub collision_resolution: CollisionResolution,
}

impl AlignmentRecord {
    /// A record that keeps its original name without sampling.
    pub fn kept(component: ComponentRef) -> Self {
        let name = component.name().to_string();
        Self {
            component,
            original_name: name.clone(),
            aligned_name: name,
            peakedness_report: None,
            candidate_set_digest: None,
            collision_resolution: CollisionResolution::KeptOriginal,
        }
    }

    pub fn path(&self) -> String {
        self.component.path()
    }

    pub fn scope(&self) -> Scope {
        Scope::of(&self.component)
    }
}

/// Namespace within which names must be unique: all tools, or the
/// siblings under one parent inside a tool.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    Tools,
    Params {
        /// Original tool name.
        tool: String,
        /// Original names of the enclosing object parameters.
        parent: Vec<String>,
    },
}

impl Scope {
    pub fn of(component: &ComponentRef) -> Self {
        match &component.param_path {
            None => Scope::Tools,
            Some(path) => Scope::Params {
                tool: component.tool_name.clone(),
                parent: path[..path.len().saturating_sub(1)].to_vec(),
            },
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Tools => f.write_str("tools"),
            Scope::Params { tool, parent } if parent.is_empty() => {
                write!(f, "parameters of {tool}")
            }
            Scope::Params { tool, parent } => {
                write!(f, "parameters of {tool}.{}", parent.join("."))
            }
        }
    }
}

/// Run parameters recorded alongside the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingMetadata {
    pub model_id: String,
    pub num_candidates: usize,
    pub temperature: f64,
    pub alpha: f64,
    pub seed: u64,
    pub source_digest: String,
    /// Caller-supplied; left empty for reproducible fixture runs.
    pub timestamp: Option<String>,
}

/// Records for every component of a schema, in traversal order.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMapping {
    pub metadata: MappingMetadata,
    pub records: Vec<AlignmentRecord>,
}

/// Bidirectional name map for one scope.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScopeMap {
    pub forward: HashMap<String, String>,
    pub backward: HashMap<String, String>,
}

impl ScopeMap {
    fn insert(&mut self, scope: &Scope, original: &str, aligned: &str) -> Result<(), MappingError> {
        if self.forward.contains_key(original) {
            return Err(MappingError::DuplicateOriginal {
                scope: scope.to_string(),
                name: original.to_string(),
            });
        }
        if let Some(first) = self.backward.get(aligned) {
            return Err(MappingError::InverseViolation {
                scope: scope.to_string(),
                name: aligned.to_string(),
                first: first.clone(),
                second: original.to_string(),
            });
        }
        self.forward
            .insert(original.to_string(), aligned.to_string());
        self.backward
            .insert(aligned.to_string(), original.to_string());
        Ok(())
    }

    /// Names on one side of the map, sorted.
    pub fn names(&self, aligned_side: bool) -> Vec<&str> {
        let mut v: Vec<&str> = if aligned_side {
            self.backward.keys().map(String::as_str).collect()
        } else {
            self.forward.keys().map(String::as_str).collect()
        };
        v.sort_unstable();
        v
    }
}

/// Validated lookup structure over a mapping. Parameter scopes are keyed
/// by original tool name and original parent path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappingIndex {
    pub tools: ScopeMap,
    pub params: HashMap<(String, Vec<String>), ScopeMap>,
}

impl MappingIndex {
    pub fn params_of(&self, tool: &str, parent: &[String]) -> Option<&ScopeMap> {
        self.params.get(&(tool.to_string(), parent.to_vec()))
    }
}

impl AlignmentMapping {
    /// Checks every invariant and builds the forward/backward maps.
    pub fn index(&self) -> Result<MappingIndex, MappingError> {
        let mut index = MappingIndex::default();
        for r in &self.records {
            let path = r.path();
            let invalid = |reason: &str| MappingError::InvalidRecord {
                path: path.clone(),
                reason: reason.to_string(),
            };
            if !is_identifier(&r.aligned_name) {
                return Err(invalid("aligned name is not an identifier"));
            }
            if r.original_name != r.component.name() {
                return Err(invalid("original name does not match the component path"));
            }
            if let Some(report) = &r.peakedness_report {
                if r.collision_resolution == CollisionResolution::None
                    && r.aligned_name != report.selected
                {
                    return Err(invalid("unresolved record must carry the selected name"));
                }
                if report.threshold != report.alpha * report.max_length as f64 {
                    return Err(invalid("threshold is not alpha × max_length"));
                }
                if report.scores.len() != report.candidates.len()
                    || report.selected_index >= report.candidates.len()
                {
                    return Err(invalid("report scores do not match its candidates"));
                }
            }
            let scope = r.scope();
            let map = match &scope {
                Scope::Tools => &mut index.tools,
                Scope::Params { tool, parent } => index
                    .params
                    .entry((tool.clone(), parent.clone()))
                    .or_default(),
            };
            map.insert(&scope, &r.original_name, &r.aligned_name)?;
        }
        for (tool, parent) in index.params.keys() {
            if !index.tools.forward.contains_key(tool) {
                return Err(MappingError::InvalidRecord {
                    path: tool.clone(),
                    reason: "parameters recorded for a tool with no record".into(),
                });
            }
            if !parent.is_empty()
                && !index
                    .params
                    .contains_key(&(tool.clone(), parent[..parent.len() - 1].to_vec()))
            {
                return Err(MappingError::InvalidRecord {
                    path: format!("{tool}.{}", parent.join(".")),
                    reason: "nested parameters recorded without their parent".into(),
                });
            }
        }
        Ok(index)
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        self.index().map(|_| ())
    }

    pub fn record(&self, path: &str) -> Option<&AlignmentRecord> {
        self.records.iter().find(|r| r.path() == path)
    }

    /// Canonical JSON text with a trailing newline.
    pub fn to_json(&self) -> Result<String, MappingError> {
        self.validate()?;
        let doc = MappingDoc {
            format: MAPPING_FORMAT.to_string(),
            metadata: self.metadata.clone(),
            records: self.records.iter().map(RecordDoc::from).collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self, MappingError> {
        let doc: MappingDoc = serde_json::from_str(text)?;
        if doc.format != MAPPING_FORMAT {
            return Err(MappingError::Format(doc.format));
        }
        let tool_descriptions: BTreeMap<String, String> = doc
            .records
            .iter()
            .filter(|r| r.kind == ComponentKind::Tool)
            .map(|r| (r.tool.clone(), r.description.clone()))
            .collect();
        let records = doc
            .records
            .into_iter()
            .map(|r| r.into_record(&tool_descriptions))
            .collect::<Result<Vec<_>, _>>()?;
        let mapping = Self {
            metadata: doc.metadata,
            records,
        };
        mapping.validate()?;
        Ok(mapping)
    }

    pub fn load(path: &Path) -> Result<Self, MappingError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Validates and writes the mapping atomically to `destination`.
pub fn emit_mapping(mapping: &AlignmentMapping, destination: &Path) -> Result<(), MappingError> {
    let text = mapping.to_json()?;
    write_atomically(&[(destination, text.as_bytes())])?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct MappingDoc {
    format: String,
    metadata: MappingMetadata,
    records: Vec<RecordDoc>,
}

#[derive(Serialize, Deserialize)]
struct RecordDoc {
    path: String,
    kind: ComponentKind,
    tool: String,
    param_path: Option<Vec<String>>,
    description: String,
    original: String,
    aligned: String,
    collision_resolution: CollisionResolution,
    selected_peakedness: Option<usize>,
    threshold: Option<f64>,
    candidate_set_digest: Option<String>,
    report: Option<PeakednessReport<f64>>,
}

impl From<&AlignmentRecord> for RecordDoc {
    fn from(r: &AlignmentRecord) -> Self {
        Self {
            path: r.path(),
            kind: r.component.kind,
            tool: r.component.tool_name.clone(),
            param_path: r.component.param_path.clone(),
            description: r.component.description.clone(),
            original: r.original_name.clone(),
            aligned: r.aligned_name.clone(),
            collision_resolution: r.collision_resolution,
            selected_peakedness: r
                .peakedness_report
                .as_ref()
                .map(|p| p.selected_peakedness()),
            threshold: r.peakedness_report.as_ref().map(|p| p.threshold),
            candidate_set_digest: r.candidate_set_digest.clone(),
            report: r.peakedness_report.clone(),
        }
    }
}

impl RecordDoc {
    fn into_record(
        self,
        tool_descriptions: &BTreeMap<String, String>,
    ) -> Result<AlignmentRecord, MappingError> {
        let component = ComponentRef {
            kind: self.kind,
            tool_description: tool_descriptions
                .get(&self.tool)
                .cloned()
                .unwrap_or_default(),
            tool_name: self.tool,
            param_path: self.param_path,
            description: self.description,
        };
        let consistent = match (component.kind, &component.param_path) {
            (ComponentKind::Tool, None) => true,
            (ComponentKind::Parameter, Some(p)) => !p.is_empty(),
            _ => false,
        };
        if !consistent || component.path() != self.path {
            return Err(MappingError::InvalidRecord {
                path: self.path,
                reason: "kind, tool and param_path disagree with the path".into(),
            });
        }
        Ok(AlignmentRecord {
            component,
            original_name: self.original,
            aligned_name: self.aligned,
            peakedness_report: self.report,
            candidate_set_digest: self.candidate_set_digest,
            collision_resolution: self.collision_resolution,
        })
    }
}
