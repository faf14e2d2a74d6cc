//! Tool schemas: parsing, validation, component addressing and canonical
//! serialization.
//!
//! The on-disk format follows the common function-calling convention: a
//! top-level `tools` array whose entries carry `name`, `description` and a
//! JSON object-schema under `parameters`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::digest::sha256_hex;

/// Returns true when `name` is a valid component identifier: an ASCII letter
/// or underscore followed by ASCII letters, digits or underscores.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("malformed schema document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed schema at {at}: {reason}")]
    Malformed { at: String, reason: String },
    #[error("duplicate tool name `{name}` at tools[{first}] and tools[{second}]")]
    DuplicateTool {
        name: String,
        first: usize,
        second: usize,
    },
    #[error("duplicate parameter name `{name}` in {scope} (positions {first} and {second})")]
    DuplicateParameter {
        scope: String,
        name: String,
        first: usize,
        second: usize,
    },
    #[error("empty description on {path}")]
    EmptyDescription { path: String },
    #[error("`{name}` at {at} is not a valid identifier")]
    InvalidIdentifier { at: String, name: String },
}

/// JSON-schema value types accepted on parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    String,
    Number,
    Integer,
    Boolean,
    Array,
    Object,
}

impl ValueType {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::String => "string",
            ValueType::Number => "number",
            ValueType::Integer => "integer",
            ValueType::Boolean => "boolean",
            ValueType::Array => "array",
            ValueType::Object => "object",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "string" => ValueType::String,
            "number" => ValueType::Number,
            "integer" => ValueType::Integer,
            "boolean" => ValueType::Boolean,
            "array" => ValueType::Array,
            "object" => ValueType::Object,
            _ => return None,
        })
    }
}

/// A parameter, possibly an object with nested properties.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDef {
    pub name: String,
    pub description: String,
    pub value_type: ValueType,
    pub required: bool,
    /// Names from the tool root down to and including this parameter.
    /// Recomputed whenever a schema is constructed.
    pub path: Vec<String>,
    /// Nested properties; only populated for `object` parameters.
    pub properties: Vec<ParamDef>,
    /// Any other keys of the property node (`enum`, `items`, `default`, ...),
    /// kept verbatim in document order.
    pub extra: Map<String, Value>,
}

impl ParamDef {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        value_type: ValueType,
    ) -> Self {
        let name = name.into();
        Self {
            path: vec![name.clone()],
            name,
            description: description.into(),
            value_type,
            required: false,
            properties: Vec::new(),
            extra: Map::new(),
        }
    }

    pub fn required(mut self, required: bool) -> Self {
        self.required = required;
        self
    }

    pub fn with_properties(mut self, properties: Vec<ParamDef>) -> Self {
        self.properties = properties;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolDef {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ParamDef>,
    /// Extra keys on the root `parameters` node besides type/properties/required.
    pub parameters_extra: Map<String, Value>,
    /// Extra keys on the tool entry besides name/description/parameters.
    pub extra: Map<String, Value>,
}

impl ToolDef {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        parameters: Vec<ParamDef>,
    ) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            parameters,
            parameters_extra: Map::new(),
            extra: Map::new(),
        }
    }

    /// Looks up a parameter by its path of names from the tool root.
    pub fn param<S: AsRef<str>>(&self, path: &[S]) -> Option<&ParamDef> {
        let (first, rest) = path.split_first()?;
        let mut current = self.parameters.iter().find(|p| p.name == first.as_ref())?;
        for name in rest {
            current = current
                .properties
                .iter()
                .find(|p| p.name == name.as_ref())?;
        }
        Some(current)
    }

    /// Sibling parameters under `parent` (the root when `parent` is empty).
    pub fn children<S: AsRef<str>>(&self, parent: &[S]) -> Option<&[ParamDef]> {
        if parent.is_empty() {
            Some(&self.parameters)
        } else {
            self.param(parent).map(|p| p.properties.as_slice())
        }
    }
}

/// Options controlling validation at construction time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Accept components with empty descriptions; alignment keeps them
    /// under their original name.
    pub permissive: bool,
}

/// A validated tool schema.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolSchema {
    tools: Vec<ToolDef>,
    source_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Tool,
    Parameter,
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentKind::Tool => "tool",
            ComponentKind::Parameter => "parameter",
        })
    }
}

/// Addresses one renamable component and carries the description fed to
/// the sampler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentRef {
    pub kind: ComponentKind,
    pub tool_name: String,
    /// Path of parameter names below the tool; `None` for tools.
    pub param_path: Option<Vec<String>>,
    pub description: String,
    /// Description of the owning tool, used as prompt context for parameters.
    pub tool_description: String,
}

impl ComponentRef {
    /// Dotted address, e.g. `search` or `search.filters.lang`.
    pub fn path(&self) -> String {
        match &self.param_path {
            None => self.tool_name.clone(),
            Some(p) => format!("{}.{}", self.tool_name, p.join(".")),
        }
    }

    /// The component's own (current) name.
    pub fn name(&self) -> &str {
        match &self.param_path {
            None => &self.tool_name,
            Some(p) => p.last().map(String::as_str).unwrap_or_default(),
        }
    }
}

impl ToolSchema {
    /// Builds a schema from tool definitions, checking every invariant and
    /// normalizing parameter paths.
    pub fn new(mut tools: Vec<ToolDef>, options: ParseOptions) -> Result<Self, SchemaError> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, tool) in tools.iter().enumerate() {
            if let Some(&first) = seen.get(tool.name.as_str()) {
                return Err(SchemaError::DuplicateTool {
                    name: tool.name.clone(),
                    first,
                    second: i,
                });
            }
            seen.insert(&tool.name, i);
        }
        for (i, tool) in tools.iter_mut().enumerate() {
            if !is_identifier(&tool.name) {
                return Err(SchemaError::InvalidIdentifier {
                    at: format!("tools[{i}]"),
                    name: tool.name.clone(),
                });
            }
            if tool.description.trim().is_empty() && !options.permissive {
                return Err(SchemaError::EmptyDescription {
                    path: tool.name.clone(),
                });
            }
            normalize_params(&tool.name, &mut tool.parameters, &[], options)?;
        }
        let mut schema = Self {
            tools,
            source_digest: String::new(),
        };
        schema.source_digest = format!("sha256:{}", sha256_hex(schema.serialize().as_bytes()));
        Ok(schema)
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), ParseOptions::default()).expect("empty schema is valid")
    }

    pub fn tools(&self) -> &[ToolDef] {
        &self.tools
    }

    pub fn into_tools(self) -> Vec<ToolDef> {
        self.tools
    }

    /// Content hash of the canonical serialization.
    pub fn source_digest(&self) -> &str {
        &self.source_digest
    }

    pub fn tool(&self, name: &str) -> Option<&ToolDef> {
        self.tools.iter().find(|t| t.name == name)
    }

    /// Parses a schema document. Ordering of tools and parameters is kept.
    pub fn parse(document: &str) -> Result<Self, SchemaError> {
        Self::parse_with(document, ParseOptions::default())
    }

    pub fn parse_with(document: &str, options: ParseOptions) -> Result<Self, SchemaError> {
        let root: Value = serde_json::from_str(document)?;
        let root = root
            .as_object()
            .ok_or_else(|| malformed("$", "document must be an object"))?;
        let tools = match root.get("tools") {
            Some(Value::Array(items)) => items,
            Some(_) => return Err(malformed("$.tools", "must be an array")),
            None => return Err(malformed("$", "missing `tools` array")),
        };
        let tools = tools
            .iter()
            .enumerate()
            .map(|(i, v)| parse_tool(v, &format!("tools[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(tools, options)
    }

    /// Every renamable component: each tool followed by its parameters in
    /// document order, nested properties directly after their parent.
    pub fn iterate_components(&self) -> Vec<ComponentRef> {
        let mut out = Vec::new();
        for tool in &self.tools {
            out.push(ComponentRef {
                kind: ComponentKind::Tool,
                tool_name: tool.name.clone(),
                param_path: None,
                description: tool.description.clone(),
                tool_description: tool.description.clone(),
            });
            fn walk(tool: &ToolDef, params: &[ParamDef], out: &mut Vec<ComponentRef>) {
                for p in params {
                    out.push(ComponentRef {
                        kind: ComponentKind::Parameter,
                        tool_name: tool.name.clone(),
                        param_path: Some(p.path.clone()),
                        description: p.description.clone(),
                        tool_description: tool.description.clone(),
                    });
                    walk(tool, &p.properties, out);
                }
            }
            walk(tool, &tool.parameters, &mut out);
        }
        out
    }

    /// Canonical text: tool keys ordered name, description, parameters;
    /// property keys in document order; two-space indent; trailing newline.
    pub fn serialize(&self) -> String {
        let tools: Vec<Value> = self.tools.iter().map(tool_to_value).collect();
        let mut root = Map::new();
        root.insert("tools".into(), Value::Array(tools));
        let mut text = serde_json::to_string_pretty(&Value::Object(root))
            .expect("json values always serialize");
        text.push('\n');
        text
    }
}

impl fmt::Display for ToolSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

fn normalize_params(
    tool: &str,
    params: &mut [ParamDef],
    parent: &[String],
    options: ParseOptions,
) -> Result<(), SchemaError> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, p) in params.iter_mut().enumerate() {
        let mut path = parent.to_vec();
        path.push(p.name.clone());
        let display = format!("{tool}.{}", path.join("."));
        if !is_identifier(&p.name) {
            return Err(SchemaError::InvalidIdentifier {
                at: display,
                name: p.name.clone(),
            });
        }
        if let Some(&first) = seen.get(&p.name) {
            let scope = if parent.is_empty() {
                tool.to_string()
            } else {
                format!("{tool}.{}", parent.join("."))
            };
            return Err(SchemaError::DuplicateParameter {
                scope,
                name: p.name.clone(),
                first,
                second: i,
            });
        }
        seen.insert(p.name.clone(), i);
        if p.description.trim().is_empty() && !options.permissive {
            return Err(SchemaError::EmptyDescription { path: display });
        }
        if p.value_type != ValueType::Object && !p.properties.is_empty() {
            return Err(malformed(
                &display,
                "only object parameters may have properties",
            ));
        }
        normalize_params(tool, &mut p.properties, &path, options)?;
        p.path = path;
    }
    Ok(())
}

fn malformed(at: &str, reason: &str) -> SchemaError {
    SchemaError::Malformed {
        at: at.to_string(),
        reason: reason.to_string(),
    }
}

fn string_field(
    obj: &Map<String, Value>,
    key: &str,
    at: &str,
) -> Result<Option<String>, SchemaError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(malformed(&format!("{at}.{key}"), "must be a string")),
    }
}

fn parse_tool(value: &Value, at: &str) -> Result<ToolDef, SchemaError> {
    let obj = value
        .as_object()
        .ok_or_else(|| malformed(at, "tool entry must be an object"))?;
    let name = string_field(obj, "name", at)?.ok_or_else(|| malformed(at, "missing `name`"))?;
    let description = string_field(obj, "description", at)?.unwrap_or_default();
    let (parameters, parameters_extra) = match obj.get("parameters") {
        None | Some(Value::Null) => (Vec::new(), Map::new()),
        Some(node) => {
            let at = format!("{at}.parameters");
            let node = node
                .as_object()
                .ok_or_else(|| malformed(&at, "must be an object"))?;
            match node.get("type") {
                None => {}
                Some(Value::String(t)) if t == "object" => {}
                Some(_) => {
                    return Err(malformed(
                        &at,
                        "root parameters node must have type `object`",
                    ))
                }
            }
            let params = parse_properties(node, &at)?;
            let extra = node
                .iter()
                .filter(|(k, _)| !matches!(k.as_str(), "type" | "properties" | "required"))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            (params, extra)
        }
    };
    let extra = obj
        .iter()
        .filter(|(k, _)| !matches!(k.as_str(), "name" | "description" | "parameters"))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    Ok(ToolDef {
        name,
        description,
        parameters,
        parameters_extra,
        extra,
    })
}

fn parse_properties(node: &Map<String, Value>, at: &str) -> Result<Vec<ParamDef>, SchemaError> {
    let required: Vec<&str> = match node.get("required") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .ok_or_else(|| malformed(&format!("{at}.required"), "entries must be strings"))
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(malformed(&format!("{at}.required"), "must be an array")),
    };
    let props = match node.get("properties") {
        None | Some(Value::Null) => return required_check(&[], &required, at).map(|_| Vec::new()),
        Some(Value::Object(props)) => props,
        Some(_) => return Err(malformed(&format!("{at}.properties"), "must be an object")),
    };
    let names: Vec<&str> = props.keys().map(String::as_str).collect();
    required_check(&names, &required, at)?;
    props
        .iter()
        .map(|(name, v)| {
            let mut p = parse_param(name, v, &format!("{at}.properties.{name}"))?;
            p.required = required.contains(&name.as_str());
            Ok(p)
        })
        .collect()
}

fn required_check(names: &[&str], required: &[&str], at: &str) -> Result<(), SchemaError> {
    match required.iter().find(|r| !names.contains(r)) {
        Some(r) => Err(malformed(
            &format!("{at}.required"),
            &format!("`{r}` is not a declared property"),
        )),
        None => Ok(()),
    }
}

fn parse_param(name: &str, value: &Value, at: &str) -> Result<ParamDef, SchemaError> {
    let obj = value
        .as_object()
        .ok_or_else(|| malformed(at, "property node must be an object"))?;
    let type_name =
        string_field(obj, "type", at)?.ok_or_else(|| malformed(at, "missing `type`"))?;
    let value_type = ValueType::parse(&type_name).ok_or_else(|| {
        malformed(
            &format!("{at}.type"),
            &format!("unsupported type `{type_name}`"),
        )
    })?;
    let description = string_field(obj, "description", at)?.unwrap_or_default();
    let is_object = value_type == ValueType::Object;
    let properties = if is_object {
        parse_properties(obj, at)?
    } else {
        Vec::new()
    };
    let extra = obj
        .iter()
        .filter(|(k, _)| match k.as_str() {
            "type" | "description" => false,
            "properties" | "required" => !is_object,
            _ => true,
        })
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    Ok(ParamDef {
        name: name.to_string(),
        description,
        value_type,
        required: false,
        path: vec![name.to_string()],
        properties,
        extra,
    })
}

fn tool_to_value(tool: &ToolDef) -> Value {
    let mut obj = Map::new();
    obj.insert("name".into(), Value::String(tool.name.clone()));
    obj.insert(
        "description".into(),
        Value::String(tool.description.clone()),
    );
    let mut params = Map::new();
    params.insert("type".into(), Value::String("object".into()));
    write_properties(&mut params, &tool.parameters);
    for (k, v) in &tool.parameters_extra {
        params.insert(k.clone(), v.clone());
    }
    obj.insert("parameters".into(), Value::Object(params));
    for (k, v) in &tool.extra {
        obj.insert(k.clone(), v.clone());
    }
    Value::Object(obj)
}

fn write_properties(node: &mut Map<String, Value>, params: &[ParamDef]) {
    let props: Map<String, Value> = params
        .iter()
        .map(|p| (p.name.clone(), param_to_value(p)))
        .collect();
    node.insert("properties".into(), Value::Object(props));
    let required: Vec<Value> = params
        .iter()
        .filter(|p| p.required)
        .map(|p| Value::String(p.name.clone()))
        .collect();
    if !required.is_empty() {
        node.insert("required".into(), Value::Array(required));
    }
}

fn param_to_value(p: &ParamDef) -> Value {
    let mut obj = Map::new();
    obj.insert("type".into(), Value::String(p.value_type.as_str().into()));
    obj.insert("description".into(), Value::String(p.description.clone()));
    for (k, v) in &p.extra {
        obj.insert(k.clone(), v.clone());
    }
    if p.value_type == ValueType::Object {
        write_properties(&mut obj, &p.properties);
    }
    Value::Object(obj)
}
