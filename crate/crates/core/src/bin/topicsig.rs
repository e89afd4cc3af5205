use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use topicsig::cluster::{Level, Linkage};
use topicsig::evalharness::Method;
use topicsig::lexicon::{load_lexicon, CueSource};
use topicsig::pipeline::{run_pipeline, PipelineConfig, Stage};
use topicsig::retrieval::SourceKind;
use topicsig::synth::{generate, SynthSpec};

/// Topic signatures for word senses: queries, retrieval, signatures,
/// sense hierarchies, disambiguation and evaluation.
#[derive(Parser)]
#[command(name = "topicsig", version)]
struct Cli {
    /// Configuration file (a single JSON object).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Re-run stages even when their cached outputs are current.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads for instance-level parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Same-named overrides for configuration fields.
#[derive(Args)]
struct Overrides {
    #[arg(long, global = true)]
    lexicon_path: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus_path: Option<PathBuf>,
    /// `local` or `remote`.
    #[arg(long, global = true)]
    source_kind: Option<String>,
    /// Corpus directory (local) or search endpoint (remote).
    #[arg(long, global = true)]
    root_or_endpoint: Option<String>,
    #[arg(long, global = true)]
    max_docs: Option<usize>,
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    #[arg(long, global = true)]
    timeout: Option<f64>,
    #[arg(long, global = true)]
    retries: Option<u32>,
    #[arg(long, global = true)]
    api_key_env: Option<String>,
    /// Comma separated cueword sources, or `all`.
    #[arg(long, global = true, value_delimiter = ',')]
    sources: Option<Vec<String>>,
    #[arg(long, global = true)]
    gloss_nouns_only: bool,
    #[arg(long, global = true)]
    window: Option<usize>,
    /// single, complete, median or ward.
    #[arg(long, global = true)]
    linkage: Option<String>,
    /// Comma separated: fine, medium, coarse, k<N>.
    #[arg(long, global = true, value_delimiter = ',')]
    levels: Option<Vec<String>>,
    /// Comma separated: Ran, Syn, S+def, S+all, Sign, Hier-Orig, Hier-New.
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Comma separated `lemma#pos` words.
    #[arg(long, global = true, value_delimiter = ',')]
    targets: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Lexicon utilities.
    Lexicon {
        #[command(subcommand)]
        action: LexiconAction,
    },
    /// Build per-sense retrieval queries.
    Queries,
    /// Retrieve one document collection per sense.
    Fetch,
    /// Compute frequency vectors and topic signatures.
    Signatures,
    /// Cluster senses into hierarchies and build cluster signatures.
    Cluster,
    /// Disambiguate the tagged corpus with every configured method.
    Wsd,
    /// Write precision reports from stored predictions.
    Eval,
    /// Run several stages in order.
    Pipeline {
        /// Comma separated stages; all when omitted.
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<String>>,
    },
    /// Write a seeded synthetic fixture with a ready-to-run config.json.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        senses: usize,
        #[arg(long)]
        docs_per_sense: Option<usize>,
        #[arg(long)]
        instances: Option<usize>,
    },
}

#[derive(Subcommand)]
enum LexiconAction {
    /// Parse and check a lexicon file.
    Validate { path: Option<PathBuf> },
}

fn parse_list<T: std::str::FromStr<Err = topicsig::Error>>(items: &[String]) -> Result<Vec<T>> {
    items.iter().map(|s| Ok(s.trim().parse()?)).collect()
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = &o.lexicon_path {
        cfg.lexicon_path = v.clone();
    }
    if let Some(v) = &o.corpus_path {
        cfg.corpus_path = Some(v.clone());
    }
    if let Some(v) = &o.source_kind {
        cfg.source.kind = match v.as_str() {
            "local" => SourceKind::Local,
            "remote" => SourceKind::Remote,
            _ => anyhow::bail!(topicsig::Error::Config(format!("unknown source kind `{v}`"))),
        };
    }
    if let Some(v) = &o.root_or_endpoint {
        cfg.source.root_or_endpoint = v.clone();
    }
    if let Some(v) = o.max_docs {
        cfg.source.max_docs = v;
    }
    if let Some(v) = o.concurrency {
        cfg.source.concurrency = v;
    }
    if let Some(v) = o.timeout {
        cfg.source.timeout = v;
    }
    if let Some(v) = o.retries {
        cfg.source.retries = v;
    }
    if let Some(v) = &o.api_key_env {
        cfg.source.api_key_env = Some(v.clone());
    }
    if let Some(v) = &o.sources {
        cfg.sources = if v.len() == 1 && v[0] == "all" {
            CueSource::ALL.to_vec()
        } else {
            parse_list(v)?
        };
    }
    if o.gloss_nouns_only {
        cfg.gloss_nouns_only = true;
    }
    if let Some(v) = o.window {
        cfg.window = v;
    }
    if let Some(v) = &o.linkage {
        cfg.linkage = v.parse::<Linkage>()?;
    }
    if let Some(v) = &o.levels {
        cfg.levels = parse_list::<Level>(v)?;
    }
    if let Some(v) = &o.methods {
        cfg.methods = parse_list::<Method>(v)?;
    }
    if let Some(v) = &o.targets {
        cfg.targets = v.clone();
    }
    if let Some(v) = &cli.output_dir {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let cfg = effective_config(&cli)?;
    let stages: Vec<Stage> = match &cli.command {
        Command::Lexicon {
            action: LexiconAction::Validate { path },
        } => {
            let path = path.clone().unwrap_or(cfg.lexicon_path.clone());
            let lex = load_lexicon(&path)?;
            println!("{}: {} senses of {} words", path.display(), lex.len(), lex.words().count());
            return Ok(());
        }
        Command::Synth {
            out,
            senses,
            docs_per_sense,
            instances,
        } => {
            let defaults = SynthSpec::default();
            let spec = SynthSpec {
                seed: cli.seed.unwrap_or(defaults.seed),
                senses: *senses,
                docs_per_sense: docs_per_sense.unwrap_or(defaults.docs_per_sense),
                instances: instances.unwrap_or(defaults.instances),
                ..defaults
            };
            let fixture = generate(&spec)?;
            let paths = fixture.write(out)?;
            let config = PipelineConfig {
                lexicon_path: "lexicon.lex".into(),
                corpus_path: Some("tagged.jsonl".into()),
                source: topicsig::retrieval::SourceConfig::local("corpus"),
                seed: spec.seed,
                output_dir: "out".into(),
                ..PipelineConfig::default()
            };
            topicsig::fsutil::write_atomic(&out.join("config.json"), config.render().as_bytes())?;
            println!(
                "wrote {} documents and {} tagged instances under {}",
                fixture.documents.len(),
                fixture.instances.len(),
                paths.manifest.parent().unwrap_or(out).display()
            );
            return Ok(());
        }
        Command::Queries => vec![Stage::Queries],
        Command::Fetch => vec![Stage::Fetch],
        Command::Signatures => vec![Stage::Signatures],
        Command::Cluster => vec![Stage::Cluster],
        Command::Wsd => vec![Stage::Wsd],
        Command::Eval => vec![Stage::Eval],
        Command::Pipeline { stages } => match stages {
            Some(list) => parse_list(list)?,
            None => Stage::ALL.to_vec(),
        },
    };
    let manifest = run_pipeline(&cfg, &stages, cli.force)?;
    for s in &manifest.stages {
        let status = if s.cached { "cached" } else { "ran" };
        println!("{:<11} {status:<7} {:>6} ms  {} files", s.stage, s.millis, s.outputs);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<topicsig::Error>().map_or(1, topicsig::Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
