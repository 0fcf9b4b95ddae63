//! End-to-end plumbing: datasets, config, resources, training stages,
//! answering with a trace, evaluation and model files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::WordEmbeddings;
use crate::error::{Error, Result};
use crate::kb::{load_kb, read_file, DisplayNames, KnowledgeBase, Node};
use crate::linking::{AliasLexicon, OrdinalDictionary, Question};
use crate::matcher::{BaselineEncoder, LinearHead, PairEncoder};
use crate::metrics::{evaluate, oracle_curve, EvalResult, OracleCurve};
use crate::query_graph::{
    execute, generate_candidates, Generation, GenerationResources, SearchLimits,
};
use crate::ranking::{
    label_candidates, rank_candidates, rank_labeled, top_n, train_ranker, LabeledQuestion,
    RankModel, ScoredCandidate, TrainConfig, TrainReport,
};
use crate::reranking::{build_rerank_training, rerank, train_reranker, RerankModel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
}

/// Newline-delimited JSON, one `{"id", "question", "answers"}` object per
/// line. Blank lines are skipped.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<QAPair>> {
    let path = path.as_ref();
    let content = read_file(path)?;
    parse_dataset(path, &content)
}

pub fn parse_dataset(path: &Path, content: &str) -> Result<Vec<QAPair>> {
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}

pub fn dataset_to_ndjson(pairs: &[QAPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p).expect("plain struct serializes"));
        out.push('\n');
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, content: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn default_type_top_k() -> usize {
    3
}

/// Pipeline config. Relative paths are resolved against the directory of
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub kb_triples: PathBuf,
    pub kb_types: PathBuf,
    pub names: PathBuf,
    pub lexicon: PathBuf,
    pub embeddings: PathBuf,
    #[serde(default)]
    pub ordinal_dict: Option<PathBuf>,
    #[serde(default)]
    pub train: Option<PathBuf>,
    #[serde(default)]
    pub valid: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    #[serde(default = "default_type_top_k")]
    pub type_top_k: usize,
    #[serde(default)]
    pub limits: SearchLimits,
    #[serde(flatten)]
    pub training: TrainConfig,
    /// Reranker overrides; unset keys fall back to the ranking values.
    #[serde(default)]
    pub rerank_learning_rate: Option<f64>,
    #[serde(default)]
    pub rerank_epochs: Option<usize>,
    /// Where the CLI writes models and reports.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = read_file(path)?;
        let mut config: Config = serde_json::from_str(&content)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        config.resolve(&base);
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.kb_triples);
        join(&mut self.kb_types);
        join(&mut self.names);
        join(&mut self.lexicon);
        join(&mut self.embeddings);
        for p in [
            &mut self.ordinal_dict,
            &mut self.train,
            &mut self.valid,
            &mut self.test,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            join(p);
        }
    }

    pub fn rerank_training(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self
                .rerank_learning_rate
                .unwrap_or(self.training.learning_rate),
            epochs: self.rerank_epochs.unwrap_or(self.training.epochs),
            ..self.training.clone()
        }
    }

    pub fn split(&self, name: &str) -> Result<Vec<QAPair>> {
        let path = match name {
            "train" => &self.train,
            "valid" => &self.valid,
            "test" => &self.test,
            other => return Err(Error::Config(format!("unknown split {other:?}"))),
        };
        match path {
            Some(p) => load_dataset(p),
            None => Err(Error::Config(format!("no {name} dataset configured"))),
        }
    }
}

/// Everything loaded from disk that answering needs.
pub struct Resources {
    pub kb: KnowledgeBase,
    pub names: DisplayNames,
    pub generation: GenerationResources,
}

impl Resources {
    pub fn load(config: &Config) -> Result<Self> {
        let kb = load_kb(&config.kb_triples, &config.kb_types)?;
        let names = DisplayNames::load(&config.names)?;
        let ordinals = match &config.ordinal_dict {
            Some(p) => OrdinalDictionary::load(p)?,
            None => OrdinalDictionary::english(),
        };
        Ok(Resources {
            kb,
            names,
            generation: GenerationResources {
                lexicon: AliasLexicon::load(&config.lexicon)?,
                embeddings: WordEmbeddings::load(&config.embeddings)?,
                ordinals,
                type_top_k: config.type_top_k,
                limits: config.limits,
            },
        })
    }

    pub fn encoder(&self) -> BaselineEncoder<'_> {
        BaselineEncoder::new(&self.generation.embeddings)
    }

    pub fn generate(&self, question: &Question) -> Generation {
        generate_candidates(&self.kb, question, &self.generation)
    }

    /// Generates and labels the candidates of one QA pair, in generation
    /// order.
    pub fn label(&self, pair: &QAPair) -> LabeledQuestion {
        let question = Question::new(&pair.question);
        let generation = self.generate(&question);
        LabeledQuestion {
            id: pair.id.clone(),
            candidates: label_candidates(
                &generation.candidates,
                &pair.answers,
                &self.kb,
                &self.names,
            ),
            question,
            gold: pair.answers.clone(),
        }
    }

    pub fn label_all(&self, pairs: &[QAPair]) -> Vec<LabeledQuestion> {
        pairs.iter().map(|p| self.label(p)).collect()
    }

    pub fn render_answers<'a>(&self, answers: impl IntoIterator<Item = &'a Node>) -> Vec<String> {
        answers.into_iter().map(|a| self.names.render(a)).collect()
    }
}

pub fn train_rank_stage(
    train: &[LabeledQuestion],
    valid: &[LabeledQuestion],
    config: &TrainConfig,
    encoder: &dyn PairEncoder,
) -> Result<(RankModel, TrainReport)> {
    train_ranker(train, valid, config, encoder)
}

/// Builds top-n lists with the ranker for both splits and trains the
/// reranker on them.
pub fn train_rerank_stage(
    rank_model: &RankModel,
    train: &[LabeledQuestion],
    valid: &[LabeledQuestion],
    config: &TrainConfig,
    encoder: &dyn PairEncoder,
    kb: &KnowledgeBase,
    use_type_feature: bool,
) -> Result<(RerankModel, TrainReport)> {
    let train_lists = build_rerank_training(rank_model, encoder, train, config.top_n)?;
    let valid_lists = build_rerank_training(rank_model, encoder, valid, config.top_n)?;
    train_reranker(
        &train_lists,
        &valid_lists,
        config,
        encoder,
        kb,
        use_type_feature,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub provenance: usize,
    pub sequence: String,
    pub rank_score: f64,
    pub type_score: Option<f64>,
    pub combined: Option<f64>,
}

impl From<&ScoredCandidate> for TraceEntry {
    fn from(c: &ScoredCandidate) -> Self {
        TraceEntry {
            provenance: c.graph.provenance,
            sequence: c.sequence.text(),
            rank_score: c.rank_score,
            type_score: c.type_score,
            combined: c.combined,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerTrace {
    pub question: String,
    pub entity_links: usize,
    pub candidates: usize,
    pub top_n: Vec<TraceEntry>,
    pub chosen: Option<TraceEntry>,
    /// Set when no graph could be built.
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub answers: Vec<String>,
    pub nodes: Vec<Node>,
    pub trace: AnswerTrace,
}

/// Generate, rank, keep the top `n`, rerank (when a reranker is given) and
/// execute the best graph.
pub fn answer(
    res: &Resources,
    rank_model: &RankModel,
    rerank_model: Option<&RerankModel>,
    n: usize,
    text: &str,
) -> Result<Answer> {
    let question = Question::new(text);
    let generation = res.generate(&question);
    let mut trace = AnswerTrace {
        question: text.to_string(),
        entity_links: generation.links.entities.len(),
        candidates: generation.candidates.len(),
        top_n: Vec::new(),
        chosen: None,
        reason: None,
    };
    if generation.candidates.is_empty() {
        trace.reason = Some(
            if generation.links.entities.is_empty() {
                "no entity link"
            } else {
                "no path"
            }
            .into(),
        );
        return Ok(Answer {
            answers: Vec::new(),
            nodes: Vec::new(),
            trace,
        });
    }

    let encoder = res.encoder();
    let ranked = rank_candidates(rank_model, &encoder, &generation.candidates, &res.names)?;
    let kept = top_n(&ranked, n.max(1));
    let final_list = match rerank_model {
        Some(m) => rerank(m, &kept, &question, &res.kb, &encoder)?,
        None => kept,
    };
    trace.top_n = final_list.iter().map(TraceEntry::from).collect();
    let best = &final_list[0];
    trace.chosen = Some(TraceEntry::from(best));
    let nodes: Vec<Node> = execute(&res.kb, &best.graph).into_iter().collect();
    Ok(Answer {
        answers: res.render_answers(&nodes),
        nodes,
        trace,
    })
}

pub fn evaluate_dataset(
    res: &Resources,
    rank_model: &RankModel,
    rerank_model: Option<&RerankModel>,
    n: usize,
    pairs: &[QAPair],
) -> Result<EvalResult> {
    let mut outputs = Vec::with_capacity(pairs.len());
    for p in pairs {
        let a = answer(res, rank_model, rerank_model, n, &p.question)?;
        outputs.push((p.id.clone(), a.answers, p.answers.clone()));
    }
    Ok(evaluate(outputs))
}

/// Per-question rows `id,precision,recall,f1` followed by an `average` row.
pub fn eval_csv(result: &EvalResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "precision", "recall", "f1"])?;
    for r in &result.records {
        w.write_record([
            r.id.clone(),
            r.prf.precision.to_string(),
            r.prf.recall.to_string(),
            r.prf.f1.to_string(),
        ])?;
    }
    w.write_record([
        "average".to_string(),
        result.avg_precision.to_string(),
        result.avg_recall.to_string(),
        result.avg_f1.to_string(),
    ])?;
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Oracle curve over ranker-ordered candidate lists.
pub fn ranking_oracle_curve(
    rank_model: &RankModel,
    encoder: &dyn PairEncoder,
    labeled: &[LabeledQuestion],
    n_max: usize,
) -> Result<OracleCurve> {
    let lists = labeled
        .iter()
        .map(|q| rank_labeled(rank_model, encoder, q).map(|r| r.f1s()))
        .collect::<Result<Vec<_>>>()?;
    Ok(oracle_curve(&lists, n_max))
}

const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct RankModelFile {
    version: u32,
    dimension: usize,
    weights: Vec<f64>,
    bias: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<TrainConfig>,
}

#[derive(Serialize, Deserialize)]
struct RerankModelFile {
    version: u32,
    dimension: usize,
    seq_head: LinearHead,
    type_head: LinearHead,
}

fn model_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Model {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn check_head(path: &Path, name: &str, head: &LinearHead, dimension: usize) -> Result<()> {
    if head.dimension() != dimension {
        return Err(model_error(
            path,
            format!(
                "{name} has {} weights, expected {dimension}",
                head.dimension()
            ),
        ));
    }
    if !head.is_finite() {
        return Err(model_error(path, format!("{name} has non-finite values")));
    }
    Ok(())
}

fn check_version(path: &Path, version: u32) -> Result<()> {
    if version != MODEL_VERSION {
        return Err(model_error(path, format!("unsupported version {version}")));
    }
    Ok(())
}

pub fn rank_model_json(model: &RankModel, config: Option<&TrainConfig>) -> String {
    let file = RankModelFile {
        version: MODEL_VERSION,
        dimension: model.head.dimension(),
        weights: model.head.weights.clone(),
        bias: model.head.bias,
        config: config.cloned(),
    };
    serde_json::to_string_pretty(&file).expect("model serializes") + "\n"
}

pub fn save_rank_model(
    path: impl AsRef<Path>,
    model: &RankModel,
    config: Option<&TrainConfig>,
) -> Result<()> {
    write_text(path, &rank_model_json(model, config))
}

pub fn load_rank_model(path: impl AsRef<Path>) -> Result<RankModel> {
    let path = path.as_ref();
    let file: RankModelFile =
        serde_json::from_str(&read_file(path)?).map_err(|e| model_error(path, e.to_string()))?;
    check_version(path, file.version)?;
    let head = LinearHead {
        weights: file.weights,
        bias: file.bias,
    };
    check_head(path, "weights", &head, file.dimension)?;
    Ok(RankModel { head })
}

pub fn rerank_model_json(model: &RerankModel) -> String {
    let file = RerankModelFile {
        version: MODEL_VERSION,
        dimension: model.dimension(),
        seq_head: model.seq_head.clone(),
        type_head: model.type_head.clone(),
    };
    serde_json::to_string_pretty(&file).expect("model serializes") + "\n"
}

pub fn save_rerank_model(path: impl AsRef<Path>, model: &RerankModel) -> Result<()> {
    write_text(path, &rerank_model_json(model))
}

pub fn load_rerank_model(path: impl AsRef<Path>) -> Result<RerankModel> {
    let path = path.as_ref();
    let file: RerankModelFile =
        serde_json::from_str(&read_file(path)?).map_err(|e| model_error(path, e.to_string()))?;
    check_version(path, file.version)?;
    check_head(path, "seq_head", &file.seq_head, file.dimension)?;
    check_head(path, "type_head", &file.type_head, file.dimension)?;
    Ok(RerankModel {
        seq_head: file.seq_head,
        type_head: file.type_head,
    })
}
