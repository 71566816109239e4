//! Load, clean and inspect a labeled sentence file.
//!
//! ```bash
//! cargo run --example ingest
//! ```

use std::io::Write;

use biasharness::{ColumnMap, Dataset, EvaluationMode};

fn main() -> biasharness::Result<()> {
    // a small file in the default MBIC-like shape
    let mut file = tempfile::NamedTempFile::new()?;
    writeln!(file, "text,outlet,topic,label_bias")?;
    let rows = [
        ("The council approved the budget after a short debate.", "Non-biased"),
        ("Once again the out-of-touch council wasted everyone's money.", "Biased"),
        ("Residents can comment on the plan until Friday.", "Non-biased"),
        ("The mayor's cronies rubber-stamped the reckless scheme.", "Biased"),
        ("Opinions on the new bike lanes differ sharply.", "No agreement"),
        ("Turnout figures will be published next week.", "Non-biased"),
    ];
    for (text, label) in rows {
        writeln!(file, "\"{text}\",Example Post,local,{label}")?;
    }
    file.flush()?;

    let loaded = Dataset::load(file.path(), &ColumnMap::default())?;
    println!("loaded {} rows (sha256 {})", loaded.len(), &loaded.provenance.sha256[..12]);

    let cleaned = loaded.clean();
    let stats = cleaned.stats();
    println!(
        "{} sentences ({} biased, {} non-biased)",
        cleaned.len(),
        stats.biased,
        stats.non_biased
    );

    let prepared = cleaned.prepare_for_mode(&EvaluationMode::Blocks { size: 2 })?;
    println!(
        "block mode (size 2): {} sentences in {} blocks",
        prepared.len(),
        prepared.len() / 2
    );
    for sentence in &prepared.sentences {
        println!("  [{}] {:?} {}", sentence.id, sentence.gold, sentence.text);
    }
    Ok(())
}
