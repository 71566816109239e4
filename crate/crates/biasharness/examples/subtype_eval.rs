//! Majority-voted subtype evaluation: judge verdicts per sample become a
//! silver label, aggregated into per-category accuracy.
//!
//! ```bash
//! cargo run --example subtype_eval
//! ```

use biasharness::{
    render_subtype, silver_label, subtype_accuracy, BiasType, ReportFormat, SubtypeJudgment,
    Verdict,
};

fn main() -> biasharness::Result<()> {
    use Verdict::*;

    // three judges per sample; the silver label is the majority
    println!(
        "majority of [right, right, wrong] = {:?}",
        silver_label(&[Correct, Correct, Incorrect])?
    );

    let mut judgments = Vec::new();
    let mut add = |category: BiasType, verdict_sets: &[[Verdict; 3]]| {
        for verdicts in verdict_sets {
            judgments.push(SubtypeJudgment {
                sample_id: format!("s{:03}", judgments.len()),
                category: category.clone(),
                verdicts: verdicts.to_vec(),
            });
        }
    };

    add(
        BiasType::Political,
        &[
            [Correct, Correct, Correct],
            [Correct, Correct, Incorrect],
            [Correct, Incorrect, Correct],
            [Incorrect, Incorrect, Correct],
        ],
    );
    add(
        BiasType::Linguistic,
        &[[Correct, Correct, Correct], [Correct, Correct, Incorrect]],
    );
    add(BiasType::Gender, &[[Incorrect, Incorrect, Incorrect]]);
    // a model-invented category counts as a sub-type violation
    add(
        BiasType::Other("economic bias".into()),
        &[[Incorrect, Incorrect, Correct]],
    );

    let report = subtype_accuracy(&judgments)?;
    println!("\n{}", render_subtype(&report, ReportFormat::Markdown));
    println!(
        "overall accuracy {} over {} samples, {} violation(s)",
        biasharness::report::fmt_percent(report.overall_accuracy()),
        report.total,
        report.violation_count
    );
    Ok(())
}
