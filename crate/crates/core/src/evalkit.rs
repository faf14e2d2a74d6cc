//! Small harness comparing the original and aligned schemas on scripted
//! tool-selection tasks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::{rename_schema, AlignmentMapping, MappingError, MappingIndex};
use crate::sampling::{CompletionRequest, Sampler, SamplerError, Slot};
use crate::schema::{SchemaError, ToolSchema};
use crate::translation::{detect_misalignment, CallRecord, Misalignment, Namespace, ToolCall};

/// One tool-selection query. Tool names are in the original namespace; an
/// empty `gold` set means no listed tool is suitable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureTask {
    pub id: String,
    pub query: String,
    pub candidate_tools: Vec<String>,
    #[serde(default)]
    pub gold: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("task `{task}`: no scripted response for the {variant} variant")]
    ScriptExhausted { task: String, variant: Namespace },
    #[error("task `{task}`: unknown tool `{tool}`")]
    UnknownTool { task: String, tool: String },
    #[error("task `{task}`: gold tool `{tool}` is not among the candidates")]
    GoldNotCandidate { task: String, tool: String },
    #[error("duplicate task id `{0}`")]
    DuplicateTask(String),
    #[error("task `{task}`: agent failed: {source}")]
    Agent {
        task: String,
        #[source]
        source: SamplerError,
    },
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

/// Something that picks tools for a query given the schema it is shown.
/// An empty response means "no suitable tool".
pub trait Agent: Sync {
    fn respond(
        &self,
        task: &FixtureTask,
        variant: Namespace,
        schema: &ToolSchema,
    ) -> Result<Vec<ToolCall>, EvalError>;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedResponses {
    #[serde(default)]
    pub original: Option<Vec<CallRecord>>,
    #[serde(default)]
    pub aligned: Option<Vec<CallRecord>>,
}

/// Replays fixed responses keyed by task id and variant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedAgent {
    pub responses: BTreeMap<String, ScriptedResponses>,
}

impl ScriptedAgent {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        Ok(Self::from_json(&std::fs::read_to_string(path)?)?)
    }
}

impl Agent for ScriptedAgent {
    fn respond(
        &self,
        task: &FixtureTask,
        variant: Namespace,
        _schema: &ToolSchema,
    ) -> Result<Vec<ToolCall>, EvalError> {
        let exhausted = || EvalError::ScriptExhausted {
            task: task.id.clone(),
            variant,
        };
        let entry = self.responses.get(&task.id).ok_or_else(exhausted)?;
        let calls = match variant {
            Namespace::Original => &entry.original,
            Namespace::Aligned => &entry.aligned,
        };
        calls
            .as_ref()
            .ok_or_else(exhausted)?
            .iter()
            .map(|c| {
                c.clone()
                    .into_call(variant)
                    .map(|(call, _)| call)
                    .map_err(|e| {
                        EvalError::Json(serde::de::Error::custom(format!(
                            "task `{}`: {e}",
                            task.id
                        )))
                    })
            })
            .collect()
    }
}

/// Adapter for a live model behind a [`Sampler`]. The template's
/// `{schema}` and `{query}` placeholders are filled in; every reply line
/// that parses as a `{name, arguments}` record counts as a call.
pub struct SamplerAgent<S> {
    pub sampler: S,
    pub template: String,
    pub temperature: f64,
}

impl<S: Sampler> Agent for SamplerAgent<S> {
    fn respond(
        &self,
        task: &FixtureTask,
        variant: Namespace,
        schema: &ToolSchema,
    ) -> Result<Vec<ToolCall>, EvalError> {
        let prompt = self
            .template
            .replace("{schema}", &schema.serialize())
            .replace("{query}", &task.query);
        let request = CompletionRequest {
            component: &task.id,
            prompt: &prompt,
            temperature: self.temperature,
            slot: Slot::Greedy,
        };
        let reply = self
            .sampler
            .complete(&request)
            .map_err(|source| EvalError::Agent {
                task: task.id.clone(),
                source,
            })?;
        Ok(reply
            .lines()
            .filter_map(|l| serde_json::from_str::<CallRecord>(l.trim()).ok())
            .filter_map(|r| r.into_call(variant).ok().map(|(c, _)| c))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub variant: Namespace,
    /// Tools the agent chose, mapped to original names where possible.
    pub selected: BTreeSet<String>,
    pub correct: bool,
    /// Emitted names absent from the schema shown to the agent.
    pub misaligned: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Namespace,
    pub total: usize,
    pub correct: usize,
    /// `None` when there are no tasks.
    pub accuracy: Option<f64>,
    pub misalignments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variants: Vec<VariantSummary>,
    pub outcomes: Vec<TaskOutcome>,
}

impl EvalReport {
    pub fn variant(&self, variant: Namespace) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.variant == variant)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<10} {:>6} {:>8} {:>9} {:>14}",
            "variant", "tasks", "correct", "accuracy", "misalignments"
        );
        for v in &self.variants {
            let acc = v
                .accuracy
                .map_or_else(|| "n/a".to_string(), |a| format!("{a:.3}"));
            let _ = writeln!(
                out,
                "{:<10} {:>6} {:>8} {:>9} {:>14}",
                v.variant.to_string(),
                v.total,
                v.correct,
                acc,
                v.misalignments
            );
        }
        out
    }
}

pub fn load_tasks(path: &Path) -> Result<Vec<FixtureTask>, EvalError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Runs every task against both variants. `schema` is the original schema;
/// the aligned one is derived from `mapping`. Each variant sees only the
/// task's candidate tools.
pub fn run_eval<A: Agent + ?Sized>(
    tasks: &[FixtureTask],
    schema: &ToolSchema,
    mapping: &AlignmentMapping,
    agent: &A,
) -> Result<EvalReport, EvalError> {
    let index = mapping.index()?;
    let mut seen = BTreeSet::new();
    for task in tasks {
        if !seen.insert(task.id.as_str()) {
            return Err(EvalError::DuplicateTask(task.id.clone()));
        }
        for tool in &task.candidate_tools {
            if schema.tool(tool).is_none() {
                return Err(EvalError::UnknownTool {
                    task: task.id.clone(),
                    tool: tool.clone(),
                });
            }
        }
        if let Some(tool) = task.gold.iter().find(|g| !task.candidate_tools.contains(g)) {
            return Err(EvalError::GoldNotCandidate {
                task: task.id.clone(),
                tool: tool.clone(),
            });
        }
    }

    let mut outcomes = Vec::with_capacity(tasks.len() * 2);
    let mut variants = Vec::with_capacity(2);
    for variant in [Namespace::Original, Namespace::Aligned] {
        let mut summary = VariantSummary {
            variant,
            total: tasks.len(),
            correct: 0,
            accuracy: None,
            misalignments: 0,
        };
        for task in tasks {
            let shown = shown_schema(schema, &task.candidate_tools, variant, &index)?;
            let calls = agent.respond(task, variant, &shown)?;
            let mut misaligned = Vec::new();
            let mut selected = BTreeSet::new();
            for call in &calls {
                if let Misalignment::Misaligned(names) = detect_misalignment(call, &shown) {
                    misaligned.extend(names);
                }
                let original = match variant {
                    Namespace::Original => call.name.clone(),
                    Namespace::Aligned => index
                        .tools
                        .backward
                        .get(&call.name)
                        .cloned()
                        .unwrap_or_else(|| call.name.clone()),
                };
                selected.insert(original);
            }
            let correct = selected == task.gold;
            summary.correct += usize::from(correct);
            summary.misalignments += misaligned.len();
            outcomes.push(TaskOutcome {
                task_id: task.id.clone(),
                variant,
                selected,
                correct,
                misaligned,
            });
        }
        if summary.total > 0 {
            summary.accuracy = Some(summary.correct as f64 / summary.total as f64);
        }
        variants.push(summary);
    }
    Ok(EvalReport { variants, outcomes })
}

fn shown_schema(
    schema: &ToolSchema,
    candidates: &[String],
    variant: Namespace,
    index: &MappingIndex,
) -> Result<ToolSchema, SchemaError> {
    let subset = ToolSchema::new(
        schema
            .tools()
            .iter()
            .filter(|t| candidates.contains(&t.name))
            .cloned()
            .collect(),
        crate::schema::ParseOptions { permissive: true },
    )?;
    match variant {
        Namespace::Original => Ok(subset),
        Namespace::Aligned => rename_schema(&subset, index),
    }
}
