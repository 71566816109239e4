//! Prompt construction for every variant of the ablation catalog.
//!
//! The instruction text lives in versioned template files under
//! `templates/`, compiled into the binary as defaults and loadable from a
//! directory for customization. Bias definitions are one file per category,
//! so definition-subset variants toggle file inclusion instead of editing
//! strings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::{Message, Role};
use crate::error::{Error, Result};
use crate::types::{BiasType, FindingOut, CANONICAL_TYPES};

/// Which prompt variant and parameters a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    /// Embed the fictional worked example (one-shot prompting).
    pub include_example: bool,
    /// Include the three context-dependent definitions (text-level,
    /// reporting-level, cognitive). Implies `include_definitions`.
    pub include_context_defs: bool,
    /// Include bias-type definitions at all.
    pub include_definitions: bool,
    /// Use the reworded second-round instruction template.
    pub restructured: bool,
    /// Put the instructions into a system message; otherwise they are
    /// prepended to the user message.
    pub use_system_message: bool,
    pub temperature: f64,
    /// When present, findings below this score do not flag their sentence.
    pub score_threshold: Option<f64>,
}

impl PromptSpec {
    /// The default configuration: one-shot, all nine
    /// definitions, system message, temperature 0.0, no threshold.
    pub fn base() -> Self {
        PromptSpec {
            include_example: true,
            include_context_defs: true,
            include_definitions: true,
            restructured: false,
            use_system_message: true,
            temperature: 0.0,
            score_threshold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.include_context_defs && !self.include_definitions {
            return Err(Error::Config(
                "include_context_defs requires include_definitions".into(),
            ));
        }
        if self.temperature < 0.0 {
            return Err(Error::Config("temperature must be >= 0".into()));
        }
        if let Some(t) = self.score_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config("score threshold must lie in [0,1]".into()));
            }
        }
        Ok(())
    }
}

/// The fictional worked example shipped with the templates: input lines plus
/// the canonical findings the model should produce for them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkedExample {
    pub input: Vec<String>,
    pub findings: Vec<FindingOut>,
}

/// The instruction templates a prompt is assembled from.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    base_system: String,
    base_user: String,
    restructured_system: String,
    /// Definition text per canonical category, in declaration order.
    definitions: Vec<(BiasType, String)>,
    example: WorkedExample,
}

const DEFINITIONS_SLOT: &str = "{{DEFINITIONS}}";
const EXAMPLE_SLOT: &str = "{{EXAMPLE}}";

macro_rules! builtin_definition {
    ($slug:literal) => {
        include_str!(concat!("../templates/definitions/", $slug, ".txt"))
    };
}

impl TemplateSet {
    /// The templates compiled into the crate.
    pub fn builtin() -> Self {
        let definitions = vec![
            (BiasType::Linguistic, builtin_definition!("linguistic")),
            (BiasType::TextLevelContext, builtin_definition!("text-level-context")),
            (
                BiasType::ReportingLevelContext,
                builtin_definition!("reporting-level-context"),
            ),
            (BiasType::Cognitive, builtin_definition!("cognitive")),
            (BiasType::HateSpeech, builtin_definition!("hate-speech")),
            (BiasType::FakeNews, builtin_definition!("fake-news")),
            (BiasType::Racial, builtin_definition!("racial")),
            (BiasType::Gender, builtin_definition!("gender")),
            (BiasType::Political, builtin_definition!("political")),
        ]
        .into_iter()
        .map(|(t, text)| (t, text.trim().to_string()))
        .collect();
        let example: WorkedExample =
            serde_json::from_str(include_str!("../templates/example.json"))
                .expect("builtin example.json is valid");
        TemplateSet {
            base_system: include_str!("../templates/base.system.txt").to_string(),
            base_user: include_str!("../templates/base.user.txt").trim().to_string(),
            restructured_system: include_str!("../templates/restructured.system.txt").to_string(),
            definitions,
            example,
        }
    }

    /// Load a template directory with the layout `base.system.txt`,
    /// `base.user.txt`, `restructured.system.txt`, `definitions/<category>.txt`,
    /// `example.json`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<String> {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| Error::Config(format!("template {name} in {}: {e}", dir.display())))
        };
        let mut definitions = Vec::new();
        for t in CANONICAL_TYPES {
            let slug = t.slug().expect("canonical types have slugs");
            let text = read(&format!("definitions/{slug}.txt"))?;
            definitions.push((t, text.trim().to_string()));
        }
        let example: WorkedExample = serde_json::from_str(&read("example.json")?)
            .map_err(|e| Error::Config(format!("example.json in {}: {e}", dir.display())))?;
        Ok(TemplateSet {
            base_system: read("base.system.txt")?,
            base_user: read("base.user.txt")?.trim().to_string(),
            restructured_system: read("restructured.system.txt")?,
            definitions,
            example,
        })
    }

    pub fn example(&self) -> &WorkedExample {
        &self.example
    }

    pub fn definition_texts(&self) -> impl Iterator<Item = &str> {
        self.definitions.iter().map(|(_, text)| text.as_str())
    }
}

/// System/user message pair for one prompt variant, before any content is
/// attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    /// Absent when the variant sends no system message; its content then
    /// lives at the start of `user_prefix`.
    pub system_text: Option<String>,
    pub user_prefix: String,
    /// The canonical example findings embedded in the instructions, empty
    /// when the variant omits the example.
    pub example_output: Vec<FindingOut>,
}

fn collapse_blank_lines(text: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    let mut blank_run = 0usize;
    for line in text.lines() {
        if line.trim().is_empty() {
            blank_run += 1;
            if blank_run > 1 {
                continue;
            }
            out.push("");
        } else {
            blank_run = 0;
            out.push(line);
        }
    }
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    while out.first().is_some_and(|l| l.is_empty()) {
        out.remove(0);
    }
    out.join("\n")
}

/// Assemble the instruction bundle for a prompt spec.
///
/// The instructions always contain, in order: the expert-role framing, the
/// step-by-step task decomposition, the bias definitions selected by the
/// spec, the output-format contract naming the four finding fields, and the
/// worked example when requested.
pub fn build_prompt(spec: &PromptSpec, templates: &TemplateSet) -> Result<PromptBundle> {
    spec.validate()?;

    let template = if spec.restructured {
        &templates.restructured_system
    } else {
        &templates.base_system
    };

    let definitions_section = if spec.include_definitions {
        let selected: Vec<&str> = templates
            .definitions
            .iter()
            .filter(|(t, _)| {
                spec.include_context_defs
                    || !matches!(
                        t,
                        BiasType::TextLevelContext
                            | BiasType::ReportingLevelContext
                            | BiasType::Cognitive
                    )
            })
            .map(|(_, text)| text.as_str())
            .collect();
        let mut section = String::from("Consider exactly the following bias types:\n");
        for def in selected {
            section.push_str("- ");
            section.push_str(def);
            section.push('\n');
        }
        section.trim_end().to_string()
    } else {
        String::new()
    };

    let example_section = if spec.include_example {
        format!(
            "Example:\nInput:\n{}\nOutput:\n{}",
            templates.example.input.join("\n"),
            crate::types::findings_to_canonical_json(&templates.example.findings)
        )
    } else {
        String::new()
    };

    let instructions = collapse_blank_lines(
        &template
            .replace(DEFINITIONS_SLOT, &definitions_section)
            .replace(EXAMPLE_SLOT, &example_section),
    );

    let example_output = if spec.include_example {
        templates.example.findings.clone()
    } else {
        Vec::new()
    };

    if spec.use_system_message {
        Ok(PromptBundle {
            system_text: Some(instructions),
            user_prefix: templates.base_user.clone(),
            example_output,
        })
    } else {
        let user_prefix = if templates.base_user.is_empty() {
            instructions
        } else {
            format!("{instructions}\n\n{}", templates.base_user)
        };
        Ok(PromptBundle {
            system_text: None,
            user_prefix,
            example_output,
        })
    }
}

/// Attach content to a bundle, producing the ordered message list sent to
/// the backend. Two messages with a system message, one without.
pub fn render_messages(bundle: &PromptBundle, content: &str) -> Result<Vec<Message>> {
    if content.trim().is_empty() {
        return Err(Error::Data("cannot render messages for empty content".into()));
    }
    let user_text = if bundle.user_prefix.is_empty() {
        content.to_string()
    } else {
        format!("{}\n\n{content}", bundle.user_prefix)
    };
    let mut messages = Vec::new();
    if let Some(system) = &bundle.system_text {
        messages.push(Message {
            role: Role::System,
            content: system.clone(),
        });
    }
    messages.push(Message {
        role: Role::User,
        content: user_text,
    });
    Ok(messages)
}

/// The named prompt variants of the ablation catalog, in table order.
pub const VARIANT_NAMES: [&str; 8] = [
    "base",
    "no-example",
    "no-context-defs",
    "restructured",
    "threshold-0.6",
    "no-definitions",
    "no-system",
    "temp-0.7",
];

/// The canonical named prompt specs, in catalog order.
pub fn list_variants() -> Vec<(&'static str, PromptSpec)> {
    VARIANT_NAMES
        .iter()
        .map(|&name| (name, variant_spec(name).expect("catalog names are valid")))
        .collect()
}

/// Look up a canonical variant by its catalog name.
pub fn variant_spec(name: &str) -> Result<PromptSpec> {
    let mut spec = PromptSpec::base();
    match name {
        "base" => {}
        "no-example" => spec.include_example = false,
        "no-context-defs" => spec.include_context_defs = false,
        "restructured" => spec.restructured = true,
        "threshold-0.6" => spec.score_threshold = Some(0.6),
        "no-definitions" => {
            spec.include_definitions = false;
            spec.include_context_defs = false;
        }
        "no-system" => spec.use_system_message = false,
        "temp-0.7" => spec.temperature = 0.7,
        other => {
            return Err(Error::Config(format!(
                "unknown prompt variant {other:?}; expected one of: {}",
                VARIANT_NAMES.join(", ")
            )))
        }
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn templates() -> TemplateSet {
        TemplateSet::builtin()
    }

    #[test]
    fn catalog_has_eight_named_entries_in_order() {
        let catalog = list_variants();
        assert_eq!(catalog.len(), 8);
        let names: Vec<&str> = catalog.iter().map(|(n, _)| *n).collect();
        assert_eq!(names, VARIANT_NAMES);
    }

    #[test]
    fn high_temperature_and_threshold_variants() {
        assert_eq!(variant_spec("temp-0.7").unwrap().temperature, 0.7);
        assert_eq!(
            variant_spec("threshold-0.6").unwrap().score_threshold,
            Some(0.6)
        );
        assert!(variant_spec("warmup").is_err());
    }

    #[test]
    fn base_bundle_has_nine_definitions_and_example() {
        let bundle = build_prompt(&PromptSpec::base(), &templates()).unwrap();
        let system = bundle.system_text.as_deref().unwrap();
        for def in templates().definition_texts() {
            assert!(system.contains(def), "missing definition: {def}");
        }
        assert!(system.contains("Example:"));
        assert_eq!(bundle.example_output.len(), 1);

        // Structural order: role framing, steps, definitions, format, example.
        let role = system.find("expert media bias analyst").unwrap();
        let steps = system.find("step by step").unwrap();
        let defs = system.find("Consider exactly the following bias types").unwrap();
        let format = system.find("\"bias_score\"").unwrap();
        let example = system.find("Example:").unwrap();
        assert!(role < steps && steps < defs && defs < format && format < example);
    }

    #[test]
    fn no_definitions_bundle_contains_no_definition_paragraphs() {
        let bundle =
            build_prompt(&variant_spec("no-definitions").unwrap(), &templates()).unwrap();
        let system = bundle.system_text.as_deref().unwrap();
        for def in templates().definition_texts() {
            assert!(!system.contains(def));
        }
        // format contract intact
        assert!(system.contains("\"bias_type\""));
        assert!(system.contains("\"bias_description\""));
    }

    #[test]
    fn no_context_defs_bundle_has_exactly_six() {
        let bundle =
            build_prompt(&variant_spec("no-context-defs").unwrap(), &templates()).unwrap();
        let system = bundle.system_text.as_deref().unwrap();
        let t = templates();
        let included: Vec<bool> = t
            .definition_texts()
            .map(|def| system.contains(def))
            .collect();
        assert_eq!(included.iter().filter(|x| **x).count(), 6);
        assert!(!system.contains("text-level context bias:"));
        assert!(!system.contains("reporting-level context bias:"));
        assert!(!system.contains("cognitive bias:"));
    }

    #[test]
    fn no_example_bundle_omits_the_example() {
        let bundle = build_prompt(&variant_spec("no-example").unwrap(), &templates()).unwrap();
        let system = bundle.system_text.as_deref().unwrap();
        assert!(!system.contains("Example:"));
        assert!(bundle.example_output.is_empty());
    }

    #[test]
    fn restructured_uses_second_template() {
        let bundle = build_prompt(&variant_spec("restructured").unwrap(), &templates()).unwrap();
        let system = bundle.system_text.as_deref().unwrap();
        assert!(system.contains("Step 1:"));
    }

    #[test]
    fn invalid_spec_is_a_config_error() {
        let mut spec = PromptSpec::base();
        spec.include_definitions = false; // but context defs still requested
        assert!(build_prompt(&spec, &templates()).is_err());
    }

    #[test]
    fn build_prompt_is_deterministic() {
        let a = build_prompt(&PromptSpec::base(), &templates()).unwrap();
        let b = build_prompt(&PromptSpec::base(), &templates()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.system_text, b.system_text);
    }

    #[test]
    fn render_with_system_yields_two_messages_user_is_content() {
        let bundle = build_prompt(&PromptSpec::base(), &templates()).unwrap();
        let msgs = render_messages(&bundle, "One sentence.").unwrap();
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0].role, Role::System);
        assert_eq!(msgs[1].role, Role::User);
        assert_eq!(msgs[1].content, "One sentence.");
    }

    #[test]
    fn render_without_system_prepends_instructions() {
        let bundle = build_prompt(&variant_spec("no-system").unwrap(), &templates()).unwrap();
        assert!(bundle.system_text.is_none());
        let msgs = render_messages(&bundle, "Block of text.").unwrap();
        assert_eq!(msgs.len(), 1);
        assert_eq!(msgs[0].role, Role::User);
        assert!(msgs[0].content.starts_with(&bundle.user_prefix));
        assert!(msgs[0].content.ends_with("Block of text."));
    }

    #[test]
    fn render_rejects_empty_content() {
        let bundle = build_prompt(&PromptSpec::base(), &templates()).unwrap();
        assert!(render_messages(&bundle, "  ").is_err());
    }

    #[test]
    fn from_dir_loads_the_documented_layout() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("templates");
        let loaded = TemplateSet::from_dir(&dir).unwrap();
        let builtin = TemplateSet::builtin();
        let a = build_prompt(&PromptSpec::base(), &loaded).unwrap();
        let b = build_prompt(&PromptSpec::base(), &builtin).unwrap();
        assert_eq!(a, b);
        assert!(TemplateSet::from_dir(std::path::Path::new("/nonexistent")).is_err());
    }

    #[test]
    fn embedded_example_output_parses_strictly() {
        let bundle = build_prompt(&PromptSpec::base(), &templates()).unwrap();
        let json = crate::types::findings_to_canonical_json(&bundle.example_output);
        match crate::pipeline::parse_findings(&json) {
            crate::pipeline::ParseOutcome::Parsed { findings } => {
                assert_eq!(findings.len(), bundle.example_output.len());
            }
            other => panic!("worked example must parse strictly, got {other:?}"),
        }
        // the embedded text in the instructions is the same serialization
        let system = bundle.system_text.as_deref().unwrap();
        assert!(system.contains(&json));
        // every example finding quotes an input line
        let example = templates().example().clone();
        for finding in &bundle.example_output {
            assert!(example.input.contains(&finding.sentence));
        }
    }

    #[test]
    fn message_count_is_two_iff_system_message() {
        for (name, spec) in list_variants() {
            let bundle = build_prompt(&spec, &templates()).unwrap();
            let msgs = render_messages(&bundle, "text").unwrap();
            assert_eq!(
                msgs.len() == 2,
                spec.use_system_message,
                "variant {name}"
            );
        }
    }
}
