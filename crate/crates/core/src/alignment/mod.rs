//! Schema alignment: sample, score and select a name for every component,
//! keep names unique per scope, and produce the renamed schema plus the
//! mapping artifact.

mod collision;
mod io;
mod mapping;

pub use collision::{resolve_collisions, CollisionResolver};
pub use mapping::{
    emit_mapping, AlignmentMapping, AlignmentRecord, CollisionResolution, MappingError,
    MappingIndex, MappingMetadata, Scope, ScopeMap, MAPPING_FORMAT,
};

use std::collections::HashMap;
use std::path::Path;

use crate::peakedness::{analyze, PeakednessError};
use crate::sampling::{
    build_prompt, sample_candidates, ConfigError, Sampler, SamplerConfig, SamplingError,
};
use crate::schema::{ComponentKind, ComponentRef, ParamDef, ParseOptions, SchemaError, ToolSchema};

#[derive(Debug, thiserror::Error)]
pub enum AlignmentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("selection failed for `{component}`: {source}")]
    Peakedness {
        component: String,
        #[source]
        source: PeakednessError,
    },
    #[error("{scope}: original name `{name}` is already taken; conflicting components: {}", conflict.join(", "))]
    Collision {
        scope: String,
        name: String,
        conflict: Vec<String>,
    },
    #[error("aligned schema is invalid: {0}")]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

/// Samples candidates for one component and selects its representative.
/// `tool_context` overrides the tool name shown in parameter prompts.
/// The returned record has not been checked for collisions yet.
pub fn align_component<S: Sampler + ?Sized>(
    component: &ComponentRef,
    tool_context: Option<&str>,
    config: &SamplerConfig,
    sampler: &S,
) -> Result<AlignmentRecord, AlignmentError> {
    let mut prompt = build_prompt(component)?;
    if let Some(name) = tool_context {
        prompt = prompt.with_tool_name(name);
    }
    let path = component.path();
    let set = sample_candidates(&path, &prompt, config, sampler)?;
    let report = analyze(&set.candidates, &set.reference, config.alpha).map_err(|source| {
        AlignmentError::Peakedness {
            component: path.clone(),
            source,
        }
    })?;
    Ok(AlignmentRecord {
        component: component.clone(),
        original_name: component.name().to_string(),
        aligned_name: report.selected.clone(),
        peakedness_report: Some(report),
        candidate_set_digest: Some(set.digest()),
        collision_resolution: CollisionResolution::None,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignOptions {
    /// Recorded verbatim in the mapping metadata.
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentOutput {
    pub schema: ToolSchema,
    pub mapping: AlignmentMapping,
}

/// Aligns every component in traversal order. Each tool is settled before
/// its parameters, whose prompts then show the tool's aligned name.
/// Components with empty descriptions keep their names.
pub fn align_schema<S: Sampler + ?Sized>(
    schema: &ToolSchema,
    config: &SamplerConfig,
    sampler: &S,
    options: &AlignOptions,
) -> Result<AlignmentOutput, AlignmentError> {
    config.validate()?;
    let components = schema.iterate_components();
    let is_skipped = |c: &ComponentRef| c.description.trim().is_empty();
    let fixed: Vec<AlignmentRecord> = components
        .iter()
        .filter(|c| is_skipped(c))
        .cloned()
        .map(AlignmentRecord::kept)
        .collect();
    let mut resolver = CollisionResolver::new(&fixed);

    let mut aligned_tools: HashMap<String, String> = HashMap::new();
    let mut records = Vec::with_capacity(components.len());
    for component in &components {
        let record = if is_skipped(component) {
            AlignmentRecord::kept(component.clone())
        } else {
            let context = match component.kind {
                ComponentKind::Tool => None,
                ComponentKind::Parameter => {
                    aligned_tools.get(&component.tool_name).map(String::as_str)
                }
            };
            let mut record = align_component(component, context, config, sampler)?;
            resolver.resolve(&mut record)?;
            record
        };
        if component.kind == ComponentKind::Tool {
            aligned_tools.insert(component.tool_name.clone(), record.aligned_name.clone());
        }
        records.push(record);
    }

    let mapping = AlignmentMapping {
        metadata: MappingMetadata {
            model_id: config.model_id.clone(),
            num_candidates: config.num_candidates,
            temperature: config.temperature,
            alpha: config.alpha,
            seed: config.rng_seed,
            source_digest: schema.source_digest().to_string(),
            timestamp: options.timestamp.clone(),
        },
        records,
    };
    let index = mapping.index()?;
    let aligned = rename_schema(schema, &index)?;
    Ok(AlignmentOutput {
        schema: aligned,
        mapping,
    })
}

/// Applies a mapping's forward direction to a schema. Names without a
/// record are kept. Descriptions, types and required flags are untouched.
pub fn rename_schema(schema: &ToolSchema, index: &MappingIndex) -> Result<ToolSchema, SchemaError> {
    fn rename_params(
        params: &mut [ParamDef],
        tool: &str,
        parent: &mut Vec<String>,
        index: &MappingIndex,
    ) {
        let scope = index.params_of(tool, parent).cloned();
        for p in params.iter_mut() {
            let original = p.name.clone();
            parent.push(original.clone());
            rename_params(&mut p.properties, tool, parent, index);
            parent.pop();
            if let Some(new) = scope.as_ref().and_then(|s| s.forward.get(&original)) {
                p.name = new.clone();
            }
        }
    }

    let mut tools = schema.tools().to_vec();
    for tool in &mut tools {
        let original = tool.name.clone();
        rename_params(&mut tool.parameters, &original, &mut Vec::new(), index);
        if let Some(new) = index.tools.forward.get(&original) {
            tool.name = new.clone();
        }
    }
    ToolSchema::new(tools, ParseOptions { permissive: true })
}

/// Writes the aligned schema and its mapping together: both go to temp
/// files first and are renamed into place schema-first.
pub fn write_outputs(
    output: &AlignmentOutput,
    schema_path: &Path,
    mapping_path: &Path,
) -> Result<(), MappingError> {
    let schema_text = output.schema.serialize();
    let mapping_text = output.mapping.to_json()?;
    io::write_atomically(&[
        (schema_path, schema_text.as_bytes()),
        (mapping_path, mapping_text.as_bytes()),
    ])?;
    Ok(())
}
