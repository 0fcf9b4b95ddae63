use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use kbqa_core::linking::{link_all, Question};
use kbqa_core::pipeline::{
    answer, eval_csv, evaluate_dataset, load_rank_model, load_rerank_model, ranking_oracle_curve,
    save_rank_model, save_rerank_model, train_rank_stage, train_rerank_stage, write_text, Config,
    Resources,
};

#[derive(Parser)]
#[command(
    name = "kbqa",
    about = "Question answering over a triple store with ranked query graphs"
)]
struct Cli {
    /// Pipeline config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the number of candidates passed to the reranker.
    #[arg(long, global = true)]
    top_n: Option<usize>,
    /// Overrides the number of negatives sampled per positive.
    #[arg(long, global = true)]
    negatives: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelPaths {
    #[arg(long)]
    rank_model: Option<PathBuf>,
    #[arg(long)]
    rerank_model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Counts of entities, relations, triples and types.
    KbStats,
    /// Focus links of a question as JSON.
    Link { question: String },
    /// Candidate query graphs of a question, one verbalized graph per line.
    Generate {
        question: String,
        /// Also write the generation report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Trains the ranking model on the train split.
    TrainRank {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trains the reranking model on the ranker's top-n lists.
    TrainRerank {
        #[arg(long)]
        rank_model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Train without the answer-type channel.
        #[arg(long)]
        no_type: bool,
    },
    /// Answers one question and prints the answers with a trace.
    Answer {
        question: String,
        #[command(flatten)]
        models: ModelPaths,
        /// Skip reranking and answer with the ranker's top graph.
        #[arg(long)]
        no_rerank: bool,
    },
    /// Evaluates a split and writes per-question scores as CSV.
    Eval {
        #[arg(long, default_value = "test")]
        split: String,
        #[command(flatten)]
        models: ModelPaths,
        #[arg(long)]
        no_rerank: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Oracle F1 of the ranker's top-n for n = 1..=n_max, as CSV.
    OracleCurve {
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
        #[arg(long)]
        rank_model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<Config> {
    let Some(path) = &cli.config else {
        bail!("--config is required");
    };
    let mut config =
        Config::load(path).with_context(|| format!("loading config {}", path.display()))?;
    if let Some(seed) = cli.seed {
        config.training.seed = seed;
    }
    if let Some(n) = cli.top_n {
        config.training.top_n = n;
    }
    if let Some(n) = cli.negatives {
        config.training.negatives_per_positive = n;
    }
    Ok(config)
}

fn output_dir(config: &Config) -> PathBuf {
    config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn or_default(path: &Option<PathBuf>, config: &Config, file: &str) -> PathBuf {
    path.clone()
        .unwrap_or_else(|| output_dir(config).join(file))
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(p) => {
            write_text(p, content)?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = load_config(&cli)?;
    let res = Resources::load(&config)?;
    let encoder = res.encoder();

    match &cli.command {
        Command::KbStats => {
            println!("entities\t{}", res.kb.entities().len());
            println!("typed_entities\t{}", res.kb.typed_entity_count());
            println!("relations\t{}", res.kb.relation_count());
            println!("triples\t{}", res.kb.triples().len());
            println!("type_labels\t{}", res.kb.type_labels().len());
        }
        Command::Link { question } => {
            let q = Question::new(question);
            let g = &res.generation;
            let links = link_all(
                &q,
                &g.lexicon,
                &g.embeddings,
                res.kb.type_labels(),
                &g.ordinals,
                g.type_top_k,
            );
            println!("{}", serde_json::to_string_pretty(&links)?);
        }
        Command::Generate { question, report } => {
            let generation = res.generate(&Question::new(question));
            for g in &generation.candidates.graphs {
                let seq = kbqa_core::query_graph::serialize(g, &res.names);
                println!("{}\t{}", g.provenance, seq.text());
            }
            if let Some(p) = report {
                write_text(
                    p,
                    &(serde_json::to_string_pretty(&generation.report)? + "\n"),
                )?;
            }
        }
        Command::TrainRank { out } => {
            let train = res.label_all(&config.split("train")?);
            let valid = res.label_all(&config.split("valid")?);
            let (model, report) = train_rank_stage(&train, &valid, &config.training, &encoder)?;
            let path = or_default(out, &config, "rank_model.json");
            save_rank_model(&path, &model, Some(&config.training))?;
            eprintln!(
                "best epoch {} of {:?}",
                report.best_epoch, report.validation_f1
            );
            eprintln!("wrote {}", path.display());
        }
        Command::TrainRerank {
            rank_model,
            out,
            no_type,
        } => {
            let rank = load_rank_model(or_default(rank_model, &config, "rank_model.json"))?;
            let train = res.label_all(&config.split("train")?);
            let valid = res.label_all(&config.split("valid")?);
            let (model, report) = train_rerank_stage(
                &rank,
                &train,
                &valid,
                &config.rerank_training(),
                &encoder,
                &res.kb,
                !no_type,
            )?;
            let path = or_default(out, &config, "rerank_model.json");
            save_rerank_model(&path, &model)?;
            eprintln!(
                "best epoch {} of {:?}",
                report.best_epoch, report.validation_f1
            );
            eprintln!("wrote {}", path.display());
        }
        Command::Answer {
            question,
            models,
            no_rerank,
        } => {
            let rank = load_rank_model(or_default(&models.rank_model, &config, "rank_model.json"))?;
            let rerank = if *no_rerank {
                None
            } else {
                Some(load_rerank_model(or_default(
                    &models.rerank_model,
                    &config,
                    "rerank_model.json",
                ))?)
            };
            let a = answer(
                &res,
                &rank,
                rerank.as_ref(),
                config.training.top_n,
                question,
            )?;
            println!("{}", serde_json::to_string_pretty(&a)?);
        }
        Command::Eval {
            split,
            models,
            no_rerank,
            out,
        } => {
            let pairs = config.split(split)?;
            let rank = load_rank_model(or_default(&models.rank_model, &config, "rank_model.json"))?;
            let rerank = if *no_rerank {
                None
            } else {
                Some(load_rerank_model(or_default(
                    &models.rerank_model,
                    &config,
                    "rerank_model.json",
                ))?)
            };
            let result =
                evaluate_dataset(&res, &rank, rerank.as_ref(), config.training.top_n, &pairs)?;
            eprintln!(
                "P {:.4}  R {:.4}  F1 {:.4}  over {} questions",
                result.avg_precision,
                result.avg_recall,
                result.avg_f1,
                result.records.len()
            );
            emit(out.as_deref(), &eval_csv(&result)?)?;
        }
        Command::OracleCurve {
            split,
            n_max,
            rank_model,
            out,
        } => {
            let labeled = res.label_all(&config.split(split)?);
            let rank = load_rank_model(or_default(rank_model, &config, "rank_model.json"))?;
            let curve = ranking_oracle_curve(&rank, &encoder, &labeled, *n_max)?;
            emit(out.as_deref(), &curve.to_csv())?;
        }
    }
    Ok(())
}
