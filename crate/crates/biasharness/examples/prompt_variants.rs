//! List the prompt-variant catalog and show what a variant renders to.
//!
//! ```bash
//! cargo run --example prompt_variants
//! ```

use biasharness::{build_prompt, list_variants, render_messages, TemplateSet};

fn main() -> biasharness::Result<()> {
    let templates = TemplateSet::builtin();

    println!("catalog:");
    for (name, spec) in list_variants() {
        println!(
            "  {name:<16} example={} definitions={} context_defs={} restructured={} system={} temperature={} threshold={:?}",
            spec.include_example,
            spec.include_definitions,
            spec.include_context_defs,
            spec.restructured,
            spec.use_system_message,
            spec.temperature,
            spec.score_threshold,
        );
    }

    let (name, spec) = &list_variants()[0];
    let bundle = build_prompt(spec, &templates)?;
    let content = "The senator mumbled through another uninspired speech.\n\
                   The committee will reconvene on Thursday.";
    let messages = render_messages(&bundle, content)?;

    println!("\nrendered messages for variant {name:?}:");
    for message in &messages {
        println!("--- {:?} ---", message.role);
        println!("{}", message.content);
    }
    Ok(())
}
