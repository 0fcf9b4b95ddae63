//! Writes the synthetic corpus: `cargo run --example gen_synthetic -- <dir> [seed]`.

use std::path::PathBuf;

use kbqa_core::synthetic::{generate, DEFAULT_SEED};

fn main() -> kbqa_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "fixtures/synthetic".into()));
    let seed = args.next().map_or(DEFAULT_SEED, |s| {
        s.parse().expect("seed must be an integer")
    });
    let corpus = generate(seed);
    corpus.write(&dir)?;
    eprintln!(
        "{} questions ({} from hard templates) written to {}",
        corpus.questions,
        corpus.hard_questions,
        dir.display()
    );
    Ok(())
}
