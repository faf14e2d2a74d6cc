use std::fmt::Write as _;

use crate::schema::{ComponentKind, ComponentRef};

use super::SamplingError;

/// Tool shown as context when naming one of its parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolContext {
    pub name: String,
    pub description: String,
}

/// A rendered-on-demand name-generation prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub component_kind: ComponentKind,
    pub description: String,
    /// Present for parameters, absent for tools.
    pub tool_context: Option<ToolContext>,
}

/// Builds the prompt for a component. Parameters carry their tool (under
/// its original name; see [`PromptSpec::with_tool_name`]) as context.
pub fn build_prompt(component: &ComponentRef) -> Result<PromptSpec, SamplingError> {
    if component.description.trim().is_empty() {
        return Err(SamplingError::EmptyDescription {
            component: component.path(),
        });
    }
    let tool_context = match component.kind {
        ComponentKind::Tool => None,
        ComponentKind::Parameter => Some(ToolContext {
            name: component.tool_name.clone(),
            description: component.tool_description.clone(),
        }),
    };
    Ok(PromptSpec {
        component_kind: component.kind,
        description: component.description.clone(),
        tool_context,
    })
}

impl PromptSpec {
    /// Replaces the tool name shown in the context block, e.g. with the
    /// tool's already-aligned name. No-op for tool prompts.
    pub fn with_tool_name(mut self, name: &str) -> Self {
        if let Some(ctx) = &mut self.tool_context {
            ctx.name = name.to_string();
        }
        self
    }

    pub fn render(&self) -> String {
        let component = self.component_kind.to_string();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Generate a {component} name from the description below."
        );
        let _ = writeln!(
            out,
            "The {component} will be used in a tool agent scenario."
        );
        out.push('\n');
        out.push_str("Description:\n");
        out.push_str(&self.description);
        out.push_str("\n\n");
        match &self.tool_context {
            None => {
                out.push_str("Example:\n");
                out.push_str(
                    "Description: A tool that manages files and directories on the system.\n",
                );
                out.push_str("Output: file_manager\n\n");
            }
            Some(ctx) => {
                // the example block has no description line of its own
                out.push_str("Example:\n");
                out.push_str("Context:\n");
                out.push_str("Tool: file_manager - A tool for managing files and directories\n");
                out.push_str("Output: file_path\n\n");
                out.push_str("Context:\n");
                let _ = writeln!(out, "Tool: {} - {}", ctx.name, ctx.description);
                out.push('\n');
            }
        }
        out.push_str("Generate only the name without additional explanation.");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tool(desc: &str) -> ComponentRef {
        ComponentRef {
            kind: ComponentKind::Tool,
            tool_name: "fs".into(),
            param_path: None,
            description: desc.into(),
            tool_description: desc.into(),
        }
    }

    #[test]
    fn tool_prompt() {
        let p = build_prompt(&tool("A tool that manages files and directories")).unwrap();
        assert!(p.tool_context.is_none());
        let text = p.render();
        assert!(text.starts_with("Generate a tool name from the description below.\n"));
        assert!(text.contains("Description:\nA tool that manages files and directories\n"));
        assert!(text.contains("Output: file_manager"));
        assert!(text.ends_with("Generate only the name without additional explanation."));
        assert!(!text.contains("Context:"));
    }

    #[test]
    fn parameter_prompt_carries_tool_context() {
        let c = ComponentRef {
            kind: ComponentKind::Parameter,
            tool_name: "file_manager".into(),
            param_path: Some(vec!["path".into()]),
            description: "Path of the file to operate on".into(),
            tool_description: "A tool for managing files and directories".into(),
        };
        let p = build_prompt(&c).unwrap();
        let text = p.render();
        assert!(text.starts_with("Generate a parameter name"));
        assert!(text.contains("Output: file_path"));
        assert!(text.contains("Context:\nTool: file_manager - A tool for managing files and directories\n\nGenerate only"));

        let renamed = p.with_tool_name("fs_tool").render();
        assert!(renamed
            .contains("Tool: fs_tool - A tool for managing files and directories\n\nGenerate"));
    }

    #[test]
    fn empty_description_is_an_error() {
        assert!(matches!(
            build_prompt(&tool("  ")),
            Err(SamplingError::EmptyDescription { .. })
        ));
    }
}
