//! Runtime bridge between the aligned and original namespaces.
//!
//! Agents prompted with the aligned schema emit calls using aligned names;
//! those calls are translated back before execution. Names that exist in
//! neither direction are reported as schema misalignment.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::alignment::{MappingIndex, ScopeMap};
use crate::peakedness::edit_distance;
use crate::schema::{ParamDef, ToolSchema, ValueType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Namespace {
    Original,
    Aligned,
}

impl Namespace {
    pub fn flip(self) -> Self {
        match self {
            Namespace::Original => Namespace::Aligned,
            Namespace::Aligned => Namespace::Original,
        }
    }
}

impl fmt::Display for Namespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Namespace::Original => "original",
            Namespace::Aligned => "aligned",
        })
    }
}

/// A named invocation. Argument values are opaque except where they are
/// objects described by the schema, whose keys are names too.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolCall {
    pub name: String,
    pub arguments: Map<String, Value>,
    pub namespace: Namespace,
}

impl ToolCall {
    pub fn new(
        name: impl Into<String>,
        arguments: Map<String, Value>,
        namespace: Namespace,
    ) -> Self {
        Self {
            name: name.into(),
            arguments,
            namespace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationErrorKind {
    UnknownTool,
    UnknownParameter,
    AmbiguousRepair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{}", self.describe())]
pub struct TranslationError {
    pub kind: TranslationErrorKind,
    /// The unknown name; nested parameters are given as a dotted path.
    pub offending_name: String,
    /// Closest in-scope name and its edit distance.
    pub nearest: Option<(String, usize)>,
    /// In-scope names that tied for an ambiguous repair.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ambiguous_with: Vec<String>,
    /// Whether fuzzy repair was enabled and tried on this name.
    pub repaired: bool,
}

impl TranslationError {
    fn describe(&self) -> String {
        let what = match self.kind {
            TranslationErrorKind::UnknownTool => "unknown tool",
            TranslationErrorKind::UnknownParameter => "unknown parameter",
            TranslationErrorKind::AmbiguousRepair => "ambiguous repair for",
        };
        let mut s = format!("{what} `{}`", self.offending_name);
        if !self.ambiguous_with.is_empty() {
            s.push_str(&format!(
                " (candidates: {})",
                self.ambiguous_with.join(", ")
            ));
        } else if let Some((name, d)) = &self.nearest {
            s.push_str(&format!(" (nearest: `{name}`, distance {d})"));
        }
        s
    }
}

/// A fuzzy correction applied during translation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repair {
    pub from: String,
    pub to: String,
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub call: ToolCall,
    pub repairs: Vec<Repair>,
}

/// Translates a call into the other namespace. With `fuzzy = Some(τ)`, an
/// unknown name is repaired only when exactly one in-scope name lies
/// within edit distance `τ`.
pub fn translate_call(
    call: &ToolCall,
    index: &MappingIndex,
    fuzzy: Option<f64>,
) -> Result<Translation, TranslationError> {
    let from_aligned = call.namespace == Namespace::Aligned;
    let mut repairs = Vec::new();
    let (tool_in_call, translated_tool) = resolve(
        &index.tools,
        &call.name,
        &call.name,
        from_aligned,
        fuzzy,
        TranslationErrorKind::UnknownTool,
        &mut repairs,
    )?;
    let original_tool = if from_aligned {
        translated_tool.clone()
    } else {
        tool_in_call
    };
    let arguments = translate_args(
        &call.arguments,
        index,
        &original_tool,
        &mut Vec::new(),
        from_aligned,
        fuzzy,
        &mut repairs,
    )?;
    Ok(Translation {
        call: ToolCall {
            name: translated_tool,
            arguments,
            namespace: call.namespace.flip(),
        },
        repairs,
    })
}

fn translate_args(
    args: &Map<String, Value>,
    index: &MappingIndex,
    original_tool: &str,
    parent: &mut Vec<String>,
    from_aligned: bool,
    fuzzy: Option<f64>,
    repairs: &mut Vec<Repair>,
) -> Result<Map<String, Value>, TranslationError> {
    let empty = ScopeMap::default();
    let scope = index.params_of(original_tool, parent).unwrap_or(&empty);
    let mut out = Map::with_capacity(args.len());
    for (key, value) in args {
        let display = dotted(parent, key);
        let (in_call, translated) = resolve(
            scope,
            key,
            &display,
            from_aligned,
            fuzzy,
            TranslationErrorKind::UnknownParameter,
            repairs,
        )?;
        let original_key = if from_aligned {
            translated.clone()
        } else {
            in_call
        };
        parent.push(original_key);
        let nested = index.params_of(original_tool, parent).is_some();
        let value = match value {
            Value::Object(inner) if nested => Value::Object(translate_args(
                inner,
                index,
                original_tool,
                parent,
                from_aligned,
                fuzzy,
                repairs,
            )?),
            other => other.clone(),
        };
        parent.pop();
        out.insert(translated, value);
    }
    Ok(out)
}

fn dotted(parent: &[String], key: &str) -> String {
    if parent.is_empty() {
        key.to_string()
    } else {
        format!("{}.{key}", parent.join("."))
    }
}

/// Returns `(name as it exists in the call's namespace, translated name)`.
fn resolve(
    scope: &ScopeMap,
    name: &str,
    display: &str,
    from_aligned: bool,
    fuzzy: Option<f64>,
    kind: TranslationErrorKind,
    repairs: &mut Vec<Repair>,
) -> Result<(String, String), TranslationError> {
    let lookup = if from_aligned {
        &scope.backward
    } else {
        &scope.forward
    };
    if let Some(t) = lookup.get(name) {
        return Ok((name.to_string(), t.clone()));
    }
    let names = scope.names(from_aligned);
    let mut by_distance: Vec<(usize, &str)> =
        names.iter().map(|n| (edit_distance(name, n), *n)).collect();
    by_distance.sort();
    let nearest = by_distance.first().map(|(d, n)| (n.to_string(), *d));
    if let Some(tau) = fuzzy {
        let within: Vec<&(usize, &str)> = by_distance
            .iter()
            .filter(|(d, _)| (*d as f64) <= tau)
            .collect();
        match within.as_slice() {
            [(d, n)] => {
                repairs.push(Repair {
                    from: display.to_string(),
                    to: n.to_string(),
                    distance: *d,
                });
                return Ok((n.to_string(), lookup[*n].clone()));
            }
            [] => {}
            several => {
                return Err(TranslationError {
                    kind: TranslationErrorKind::AmbiguousRepair,
                    offending_name: display.to_string(),
                    nearest,
                    ambiguous_with: several.iter().map(|(_, n)| n.to_string()).collect(),
                    repaired: true,
                })
            }
        }
    }
    Err(TranslationError {
        kind,
        offending_name: display.to_string(),
        nearest,
        ambiguous_with: Vec::new(),
        repaired: fuzzy.is_some(),
    })
}

/// Canonical text of an aligned schema, as handed to an agent framework.
pub fn render_aligned_schema(schema: &ToolSchema) -> String {
    schema.serialize()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "offending", rename_all = "snake_case")]
pub enum Misalignment {
    Ok,
    /// Names in the call that do not exist in the schema.
    Misaligned(Vec<String>),
}

impl Misalignment {
    pub fn is_ok(&self) -> bool {
        matches!(self, Misalignment::Ok)
    }
}

/// Mechanical check that a call only uses names present in `schema`.
pub fn detect_misalignment(call: &ToolCall, schema: &ToolSchema) -> Misalignment {
    let Some(tool) = schema.tool(&call.name) else {
        return Misalignment::Misaligned(vec![call.name.clone()]);
    };
    let mut offending = Vec::new();
    check_args(
        &call.arguments,
        &tool.parameters,
        &mut Vec::new(),
        &mut offending,
    );
    if offending.is_empty() {
        Misalignment::Ok
    } else {
        Misalignment::Misaligned(offending)
    }
}

fn check_args(
    args: &Map<String, Value>,
    params: &[ParamDef],
    parent: &mut Vec<String>,
    offending: &mut Vec<String>,
) {
    for (key, value) in args {
        match params.iter().find(|p| &p.name == key) {
            None => offending.push(dotted(parent, key)),
            Some(p) => {
                if let (ValueType::Object, Value::Object(inner)) = (p.value_type, value) {
                    if !p.properties.is_empty() {
                        parent.push(key.clone());
                        check_args(inner, &p.properties, parent, offending);
                        parent.pop();
                    }
                }
            }
        }
    }
}

/// Wire form of a call: `{"name": ..., "arguments": {...}}`. Arguments
/// may also arrive JSON-encoded in a string, as some APIs send them; the
/// same encoding is used on output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub name: String,
    #[serde(default = "empty_args")]
    pub arguments: Value,
}

fn empty_args() -> Value {
    Value::Object(Map::new())
}

impl CallRecord {
    pub fn into_call(self, namespace: Namespace) -> Result<(ToolCall, bool), String> {
        let (arguments, encoded) = match self.arguments {
            Value::Object(m) => (m, false),
            Value::String(s) => match serde_json::from_str(&s) {
                Ok(Value::Object(m)) => (m, true),
                _ => return Err("`arguments` string does not hold a JSON object".into()),
            },
            Value::Null => (Map::new(), false),
            _ => return Err("`arguments` must be an object".into()),
        };
        Ok((ToolCall::new(self.name, arguments, namespace), encoded))
    }

    pub fn from_call(call: &ToolCall, encoded: bool) -> Self {
        let object = Value::Object(call.arguments.clone());
        Self {
            name: call.name.clone(),
            arguments: if encoded {
                Value::String(object.to_string())
            } else {
                object
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamOptions {
    /// Namespace of incoming calls.
    pub from: Namespace,
    pub fuzzy: Option<f64>,
    pub fail_fast: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub translated: usize,
    pub repaired: usize,
    pub errors: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum StreamError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Failed {
        line: usize,
        /// `malformed_call` or `translation`.
        category: String,
        message: String,
    },
}

/// Line-delimited filter: one call per input line, one translated call or
/// error record per output line. Blank lines are skipped. Errors are
/// written as `{"error": {...}}` records and the stream continues unless
/// `fail_fast` is set.
pub fn translate_stream<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    index: &MappingIndex,
    options: StreamOptions,
) -> Result<StreamStats, StreamError> {
    let mut stats = StreamStats::default();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let result = serde_json::from_str::<CallRecord>(&line)
            .map_err(|e| error_record(line_no, "malformed_call", &e.to_string(), None))
            .and_then(|rec| {
                rec.into_call(options.from)
                    .map_err(|e| error_record(line_no, "malformed_call", &e, None))
            })
            .and_then(|(call, encoded)| {
                translate_call(&call, index, options.fuzzy)
                    .map(|t| (t, encoded))
                    .map_err(|e| error_record(line_no, "translation", &e.to_string(), Some(&e)))
            });
        match result {
            Ok((t, encoded)) => {
                stats.translated += 1;
                if !t.repairs.is_empty() {
                    stats.repaired += 1;
                }
                serde_json::to_writer(&mut output, &CallRecord::from_call(&t.call, encoded))
                    .map_err(std::io::Error::from)?;
                output.write_all(b"\n")?;
            }
            Err(record) => {
                stats.errors += 1;
                serde_json::to_writer(&mut output, &record).map_err(std::io::Error::from)?;
                output.write_all(b"\n")?;
                if options.fail_fast {
                    output.flush()?;
                    return Err(StreamError::Failed {
                        line: line_no,
                        category: record["error"]["category"]
                            .as_str()
                            .unwrap_or_default()
                            .to_string(),
                        message: record["error"]["message"]
                            .as_str()
                            .unwrap_or_default()
                            .to_string(),
                    });
                }
            }
        }
    }
    output.flush()?;
    Ok(stats)
}

fn error_record(
    line: usize,
    category: &str,
    message: &str,
    detail: Option<&TranslationError>,
) -> Value {
    let mut err = Map::new();
    err.insert("line".into(), line.into());
    err.insert("category".into(), category.into());
    err.insert("message".into(), message.into());
    if let Some(d) = detail {
        err.insert(
            "detail".into(),
            serde_json::to_value(d).expect("errors serialize"),
        );
    }
    let mut root = Map::new();
    root.insert("error".into(), Value::Object(err));
    Value::Object(root)
}
