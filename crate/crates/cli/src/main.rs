use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use termex::cascade::{Cascade, PipelineModels};
use termex::classifier::{train_classifier, ClassifierError, ClassifierModel};
use termex::config::RunConfig;
use termex::corpus::io::{read_conll, read_corpus, write_conll, write_corpus};
use termex::corpus::{load_gazetteer, Document, Gazetteer, LabeledSentence, Sentence};
use termex::crf::{train_crf, CrfError, CrfModel};
use termex::embeddings::{train_skipgram, EmbeddingError, EmbeddingModel};
use termex::eval::{evaluate_stage2, EvalMode};
use termex::pipeline::{class_counts, crf_dataset, embed_all, prepare, run, PipelineError};
use termex::render::{render_ansi, render_html, Highlights};
use termex::synth::{default_gazetteer, generate};

const EMBEDDINGS_FILE: &str = "embeddings.bin";
const CLASSIFIER_FILE: &str = "classifier.bin";
const CRF_FILE: &str = "crf.bin";

#[derive(Parser)]
#[command(name = "termex", version, about = "Two-stage technology term extraction")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// TOML run configuration.
    #[arg(long, global = true, env = "TERMEX_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Label a JSON-lines corpus with a gazetteer, balance it, and write
    /// CoNLL-style TSV.
    Annotate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        /// Write train/validation/test TSVs into the --out directory
        /// instead of one balanced file.
        #[arg(long)]
        split: bool,
    },
    /// Train one stage.
    Train {
        #[command(subcommand)]
        stage: Stage,
    },
    /// Run the cascade over documents.
    Extract {
        /// JSON-lines documents, or a plain text file read as one document.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: Format,
        /// Gold TSV; gold terms the cascade misses are marked in ansi/html.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Score trained models on a labelled TSV.
    Evaluate {
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = "end_to_end")]
        mode: EvalMode,
    },
    /// Generate a synthetic corpus with gold labels.
    Synth {
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[arg(long)]
        sentences: Option<usize>,
    },
    /// Synthesize (or read) a corpus, annotate, balance, split, train all
    /// stages and evaluate, from one configuration.
    Pipeline {
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Stage {
    /// Skipgram embeddings from JSON-lines documents or a TSV.
    Embeddings {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Sentence classifier over averaged embeddings.
    Classifier {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        validation: Option<PathBuf>,
    },
    /// CRF tagger on the positive sentences of a TSV.
    Crf {
        #[arg(long)]
        train: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Ansi,
    Html,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const INPUT_ERROR: u8 = 2;
const NUMERIC_ERROR: u8 = 3;

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: INPUT_ERROR, error: e.into() }
    }
}

fn numeric(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: NUMERIC_ERROR, error: error.into() }
}

type Result<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { error, .. })
            if error.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut config = match &cli.shared.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.shared.seed {
        config.set_seed(seed);
    }
    let out = cli.shared.out;
    match cli.command {
        Command::Annotate { corpus, gazetteer, split } => annotate(&config, &corpus, gazetteer, split, out),
        Command::Train { stage } => train(&config, stage, out),
        Command::Extract { input, models, format, gold } => extract(&config, &input, models, format, gold, out),
        Command::Evaluate { models, test, mode } => evaluate(&config, models, &test, mode, out),
        Command::Synth { gazetteer, sentences } => synth(&mut config, gazetteer, sentences, out),
        Command::Pipeline { gazetteer, corpus } => pipeline(&mut config, gazetteer, corpus, out),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn read_gazetteer(flag: Option<PathBuf>, config: &RunConfig) -> Result<Gazetteer> {
    match flag.or_else(|| config.paths.gazetteer.clone()) {
        Some(path) => {
            let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
            Ok(load_gazetteer(&text).with_context(|| format!("gazetteer {}", path.display()))?)
        }
        None => Ok(default_gazetteer()),
    }
}

fn read_documents(path: &Path) -> Result<Vec<Document>> {
    if path.extension().is_some_and(|e| e == "txt") {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(vec![Document { id, text }]);
    }
    Ok(read_corpus(open(path)?).with_context(|| format!("corpus {}", path.display()))?)
}

fn read_tsv(path: &Path) -> Result<Vec<LabeledSentence>> {
    Ok(read_conll(open(path)?).with_context(|| format!("{}", path.display()))?)
}

fn write_tsv(path: &Path, sentences: &[LabeledSentence]) -> Result<()> {
    let mut w = create(path)?;
    write_conll(&mut w, sentences)?;
    w.flush()?;
    Ok(())
}

fn is_tsv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "tsv" || e == "conll")
}

fn models_dir(flag: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    flag.or_else(|| config.paths.models.clone()).unwrap_or_else(|| PathBuf::from("models"))
}

fn load_models(dir: &Path) -> Result<Cascade> {
    let embeddings = EmbeddingModel::load(open(&dir.join(EMBEDDINGS_FILE))?).context("embeddings model")?;
    let classifier = ClassifierModel::load(open(&dir.join(CLASSIFIER_FILE))?).context("classifier model")?;
    let crf = CrfModel::load(open(&dir.join(CRF_FILE))?).context("crf model")?;
    Ok(Cascade::new(PipelineModels { embeddings, classifier, crf })?)
}

fn save_models(dir: &Path, models: &PipelineModels) -> Result<()> {
    let mut w = create(&dir.join(EMBEDDINGS_FILE))?;
    models.embeddings.save(&mut w)?;
    w.flush()?;
    let mut w = create(&dir.join(CLASSIFIER_FILE))?;
    models.classifier.save(&mut w)?;
    w.flush()?;
    let mut w = create(&dir.join(CRF_FILE))?;
    models.crf.save(&mut w)?;
    w.flush()?;
    Ok(())
}

fn annotate(config: &RunConfig, corpus: &Path, gazetteer: Option<PathBuf>, split: bool, out: Option<PathBuf>) -> Result<()> {
    let gazetteer = read_gazetteer(gazetteer, config)?;
    let docs = read_documents(corpus)?;
    let (annotated, data, stats) = prepare(&docs, &gazetteer, config)?;
    println!("sentences: {}", annotated.len());
    println!("before balancing: ContainsTech {} NoTech {}", stats.positives, stats.negatives);
    let half = stats.balanced / 2;
    println!("after balancing: ContainsTech {half} NoTech {half}");
    if split {
        let dir = out.unwrap_or_else(|| PathBuf::from("."));
        for (name, part) in [("train", &data.train), ("validation", &data.validation), ("test", &data.test)] {
            write_tsv(&dir.join(format!("{name}.tsv")), part)?;
            println!("{name}: {} sentences", part.len());
        }
    } else {
        // Recombine in a fixed order: the split already shuffled each part.
        let mut balanced = data.train;
        balanced.extend(data.validation);
        balanced.extend(data.test);
        write_tsv(&out.unwrap_or_else(|| PathBuf::from("annotated.tsv")), &balanced)?;
    }
    Ok(())
}

fn embedding_error(e: EmbeddingError) -> Failure {
    match e {
        EmbeddingError::NonFinite => numeric(e),
        e => e.into(),
    }
}

fn classifier_error(e: ClassifierError) -> Failure {
    match e {
        ClassifierError::NonFinite(_) => numeric(e),
        e => e.into(),
    }
}

fn crf_error(e: CrfError) -> Failure {
    match e {
        CrfError::NonFinite(_) => numeric(e),
        e => e.into(),
    }
}

fn train(config: &RunConfig, stage: Stage, out: Option<PathBuf>) -> Result<()> {
    config.validate()?;
    let default_out = |file: &str| out.clone().unwrap_or_else(|| models_dir(None, config).join(file));
    match stage {
        Stage::Embeddings { corpus } => {
            let sentences: Vec<Sentence> = if is_tsv(&corpus) {
                read_tsv(&corpus)?.into_iter().map(|s| s.into_parts().0).collect()
            } else {
                read_documents(&corpus)?.iter().flat_map(Document::sentences).collect()
            };
            let model = train_skipgram(&sentences, &config.embeddings).map_err(embedding_error)?;
            let path = default_out(EMBEDDINGS_FILE);
            let mut w = create(&path)?;
            model.save(&mut w)?;
            w.flush()?;
            println!("vocabulary {} words, dim {}; wrote {}", model.vocab.len(), model.dim, path.display());
        }
        Stage::Classifier { embeddings, train, validation } => {
            let embeddings = EmbeddingModel::load(open(&embeddings)?).context("embeddings model")?;
            let train = read_tsv(&train)?;
            let validation = match validation {
                Some(path) => read_tsv(&path)?,
                None => Vec::new(),
            };
            let (model, report) = train_classifier(
                &embed_all(&embeddings, &train),
                &embed_all(&embeddings, &validation),
                &config.classifier,
            )
            .map_err(classifier_error)?;
            if let Some(loss) = report.train_loss.last() {
                println!("final train loss {loss:.6}");
            }
            if let Some(epoch) = report.best_epoch {
                println!("best epoch {} validation F {:.4}", epoch + 1, report.validation_f[epoch]);
            }
            let path = default_out(CLASSIFIER_FILE);
            let mut w = create(&path)?;
            model.save(&mut w)?;
            w.flush()?;
            println!("wrote {}", path.display());
        }
        Stage::Crf { train } => {
            let train = read_tsv(&train)?;
            let data = crf_dataset(&train, &config.crf.features);
            if data.is_empty() {
                return Err(anyhow!("no sentence in the training file contains a term").into());
            }
            let (model, report) = train_crf(&data, &config.crf).map_err(crf_error)?;
            for (epoch, nll) in report.negative_log_likelihood().enumerate() {
                println!("epoch {} nll {nll:.6}", epoch + 1);
            }
            let positives: Vec<LabeledSentence> =
                train.into_iter().filter(|s| s.sentence_label().is_positive()).collect();
            let fit = evaluate_stage2(&positives, |s| model.viterbi(&termex::features::sentence_features(s, &model.features)));
            println!("train token F {:.4}", fit.f_score);
            let path = default_out(CRF_FILE);
            let mut w = create(&path)?;
            model.save(&mut w)?;
            w.flush()?;
            println!("{} features; wrote {}", model.feature_index.len(), path.display());
        }
    }
    Ok(())
}

fn extract(
    config: &RunConfig,
    input: &Path,
    models: Option<PathBuf>,
    format: Format,
    gold: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let cascade = load_models(&models_dir(models, config))?;
    let docs = read_documents(input)?;
    let gold = gold.map(|p| read_tsv(&p)).transpose()?;
    let mut w: Box<dyn Write> = match &out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    for doc in &docs {
        let sentences = doc.sentences();
        let extractions: Vec<_> = sentences.iter().map(|s| cascade.extract_sentence(s)).collect();
        match format {
            Format::Jsonl => {
                for e in &extractions {
                    writeln!(w, "{}", serde_json::to_string(e).map_err(anyhow::Error::from)?)?;
                }
            }
            Format::Ansi | Format::Html => {
                let doc_gold: Option<Vec<LabeledSentence>> =
                    gold.as_ref().map(|g| g.iter().filter(|s| s.sentence().doc_id == doc.id).cloned().collect());
                let h = Highlights::build(&sentences, &extractions, doc_gold.as_deref());
                let rendered =
                    if matches!(format, Format::Ansi) { render_ansi(&doc.text, &h) } else { render_html(&doc.text, &h) };
                writeln!(w, "{rendered}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn evaluate(config: &RunConfig, models: Option<PathBuf>, test: &Path, mode: EvalMode, out: Option<PathBuf>) -> Result<()> {
    let cascade = load_models(&models_dir(models, config))?;
    let test = read_tsv(test)?;
    let report = cascade.evaluate(mode, &test);
    println!("{report}");
    let json = report.to_json();
    match out {
        Some(path) => {
            let mut w = create(&path)?;
            writeln!(w, "{json}")?;
            w.flush()?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn synth(config: &mut RunConfig, gazetteer: Option<PathBuf>, sentences: Option<usize>, out: Option<PathBuf>) -> Result<()> {
    let gazetteer = read_gazetteer(gazetteer, config)?;
    if let Some(n) = sentences {
        config.synth.n_sentences = n;
    }
    let corpus = generate(&gazetteer, &config.synth)?;
    let dir = out.or_else(|| config.paths.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    let mut w = create(&dir.join("corpus.jsonl"))?;
    write_corpus(&mut w, &corpus.documents)?;
    w.flush()?;
    write_tsv(&dir.join("gold.tsv"), &corpus.gold)?;
    let (pos, neg) = class_counts(&corpus.gold);
    println!("{} documents, {} sentences ({pos} with terms, {neg} without)", corpus.documents.len(), corpus.gold.len());
    Ok(())
}

fn pipeline(config: &mut RunConfig, gazetteer: Option<PathBuf>, corpus: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    if corpus.is_some() {
        config.paths.corpus = corpus;
    }
    config.validate()?;
    let gazetteer = read_gazetteer(gazetteer, config)?;
    let documents = config.paths.corpus.as_deref().map(read_documents).transpose()?;
    let dir = out.or_else(|| config.paths.output.clone()).unwrap_or_else(|| PathBuf::from("run"));
    let outcome = run(&gazetteer, documents, config).map_err(|e: PipelineError| {
        if e.is_numeric() {
            numeric(e)
        } else {
            e.into()
        }
    })?;
    if let Some(gold) = &outcome.gold {
        let mut w = create(&dir.join("corpus.jsonl"))?;
        write_corpus(&mut w, &outcome.documents)?;
        w.flush()?;
        write_tsv(&dir.join("gold.tsv"), gold)?;
        if gold != &outcome.annotated {
            eprintln!("warning: gazetteer annotation differs from the generator labels");
        }
    }
    let split = &outcome.split;
    for (name, part) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
        write_tsv(&dir.join(format!("{name}.tsv")), part)?;
    }
    save_models(&dir.join("models"), &outcome.models)?;
    let b = outcome.balance;
    println!("annotated: ContainsTech {} NoTech {}; balanced to {}", b.positives, b.negatives, b.balanced);
    println!("split: train {} validation {} test {}", split.train.len(), split.validation.len(), split.test.len());
    if let Some(nll) = outcome.training.crf.negative_log_likelihood().last() {
        println!("crf final nll {nll:.4}");
    }
    let mut reports = Vec::new();
    for r in &outcome.evaluation {
        println!("{r}");
        reports.push(serde_json::to_value(r).map_err(anyhow::Error::from)?);
    }
    let mut w = create(&dir.join("report.json"))?;
    writeln!(w, "{}", serde_json::to_string_pretty(&reports).map_err(anyhow::Error::from)?)?;
    w.flush()?;
    fs::write(dir.join("config.toml"), config.to_toml())?;
    println!("elapsed {:.1}s; outputs in {}", outcome.elapsed.as_secs_f64(), dir.display());
    Ok(())
}
