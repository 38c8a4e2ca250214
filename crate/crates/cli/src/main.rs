mod config;

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use lrme::attributional::{
    combine_with_pos, ExternalSimilarity, PmiIrSimilarity, PosSimilarity, PosTag, SimilarityProvider,
};
use lrme::corpus::{corpus_files, digest_files, CorpusError};
use lrme::evaluation::{self, CoherenceConfig, EvalConfig, EvalError, Scorer, Sources, SweepPoint};
use lrme::pipeline::{Harvest, SpaceConfig};
use lrme::solver::{SolveError, SolveOptions};
use lrme::{CorpusIndex, Dataset, Mode, Term, Tokenizer};

use config::{parse_range, ConfigFile, ProviderBase, Settings};

/// Analogical mapping between term lists from corpus pattern statistics.
#[derive(Parser)]
#[command(name = "lrme", version)]
struct Cli {
    /// `key = value` config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for tie-breaking and sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index a corpus directory and cache the index.
    Index(CorpusArgs),
    /// Solve mapping problems and print the mappings.
    Solve {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        problems: ProblemArgs,
        /// Write the mappings here instead of stdout.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Score solved mappings against the intended ones.
    Eval {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        problems: ProblemArgs,
        /// Report file (TSV); a JSON sidecar is written next to it.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Compare internal and total coherence on reduced problems.
    Coherence {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        problems: ProblemArgs,
        /// Size of each reduced problem.
        #[arg(long, default_value_t = 3)]
        m_prime: usize,
        /// Reduced problems per problem.
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Accuracy over a grid of space parameters.
    Sweep {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        problems: ProblemArgs,
        /// Values of k, as start:end:step or a,b,c.
        #[arg(long, value_name = "RANGE")]
        k: Option<String>,
        /// Values of t, as start:end:step or a,b,c.
        #[arg(long, value_name = "RANGE")]
        t: Option<String>,
        /// Add a row without SVD smoothing.
        #[arg(long)]
        no_svd: bool,
        /// Add a row with log-entropy weighting.
        #[arg(long)]
        log_entropy: bool,
        /// The full grid: baseline, k and t ranges, no SVD, log entropy.
        #[arg(long)]
        full_grid: bool,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CorpusArgs {
    /// Directory of .txt files.
    #[arg(long, value_name = "DIR")]
    corpus: Option<PathBuf>,
    /// Directory for cached indexes.
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct SpaceArgs {
    /// SVD rank.
    #[arg(long)]
    k: Option<usize>,
    /// Pattern columns per row.
    #[arg(long)]
    t: Option<usize>,
    /// ppmic or logentropy.
    #[arg(long)]
    transform: Option<String>,
    /// Use the weighted matrix directly, without SVD.
    #[arg(long)]
    no_svd: bool,
}

#[derive(Args)]
struct ModelArgs {
    /// relational, attributional, hybrid-add or hybrid-mul.
    #[arg(long)]
    mode: Option<String>,
    /// pos, pmi-ir or external:PATH, optionally with +pos.
    #[arg(long)]
    provider: Option<String>,
    /// `term<TAB>tag` file, added to the tags in the problem file.
    #[arg(long, value_name = "FILE")]
    pos_tags: Option<PathBuf>,
    /// PMI-IR co-occurrence window in words.
    #[arg(long)]
    pmi_window: Option<usize>,
    /// Largest problem size to search exhaustively.
    #[arg(long)]
    max_m: Option<usize>,
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem file (JSON).
    #[arg(value_name = "PROBLEMS")]
    file: Option<PathBuf>,
    /// Problem file (JSON), same as the positional argument.
    #[arg(long, value_name = "FILE", conflicts_with = "file")]
    problems: Option<PathBuf>,
    /// Use the twenty builtin problems.
    #[arg(long, conflicts_with_all = ["file", "problems"])]
    builtin: bool,
    /// Restrict to these problem ids.
    #[arg(long, value_delimiter = ',', value_name = "IDS")]
    only: Vec<String>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Budget(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Budget(m) => f.write_str(m),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        match e {
            EvalError::Solve(SolveError::BudgetExceeded { .. }) => CliError::Budget(e.to_string()),
            EvalError::MissingInput { .. } | EvalError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> CliError {
        match e {
            CorpusError::MissingDir(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn settings(cli: &Cli) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    if let Some(path) = &cli.config {
        s.apply_file(ConfigFile::load(path).map_err(CliError::Usage)?).map_err(CliError::Usage)?;
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn apply_corpus(s: &mut Settings, a: &CorpusArgs) {
    if a.corpus.is_some() {
        s.corpus_dir = a.corpus.clone();
    }
    if a.cache.is_some() {
        s.cache_dir = a.cache.clone();
    }
}

fn apply_space(s: &mut Settings, a: &SpaceArgs) -> Result<(), CliError> {
    s.k = a.k.unwrap_or(s.k);
    s.t = a.t.unwrap_or(s.t);
    if let Some(v) = &a.transform {
        s.transform = v.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
    }
    if a.no_svd {
        s.svd = false;
    }
    s.check().map_err(CliError::Usage)
}

fn apply_model(s: &mut Settings, a: &ModelArgs) -> Result<(), CliError> {
    if let Some(v) = &a.mode {
        s.mode = v.parse().map_err(CliError::Usage)?;
    }
    if let Some(v) = &a.provider {
        s.provider = Some(v.parse().map_err(CliError::Usage)?);
    }
    s.pmi_window = a.pmi_window.unwrap_or(s.pmi_window);
    s.max_m = a.max_m.unwrap_or(s.max_m);
    s.check().map_err(CliError::Usage)
}

fn load_problems(a: &ProblemArgs) -> Result<Dataset, CliError> {
    let dataset = match (a.builtin, a.file.as_ref().or(a.problems.as_ref())) {
        (true, _) => Dataset::builtin(),
        (false, Some(path)) => Dataset::load(path).map_err(data)?,
        (false, None) => return Err(CliError::Usage("give a problem file or --builtin".into())),
    };
    if a.only.is_empty() {
        return Ok(dataset);
    }
    let ids: Vec<&str> = a.only.iter().map(String::as_str).collect();
    if let Some(missing) = ids.iter().find(|id| dataset.get(id).is_none()) {
        return Err(CliError::Usage(format!("no problem with id {missing}")));
    }
    Ok(dataset.select(&ids))
}

/// Loads the corpus index, reusing a cached copy when its digest matches.
fn load_index(s: &Settings) -> Result<CorpusIndex, CliError> {
    let dir = s
        .corpus_dir
        .as_ref()
        .ok_or_else(|| CliError::Usage("this command needs --corpus DIR".into()))?;
    let files = corpus_files(dir)?;
    if files.is_empty() {
        log::warn!("no .txt files under {}; the index is empty", dir.display());
    }
    let Some(cache) = &s.cache_dir else {
        return Ok(CorpusIndex::ingest(&files, Tokenizer::default())?);
    };
    let digest = digest_files(&files)?;
    let path = cache.join(format!("index-{digest}.json"));
    if path.is_file() {
        log::info!("cache hit: {}", path.display());
        return Ok(CorpusIndex::load(&path)?);
    }
    log::info!("cache miss: indexing {} files", files.len());
    let index = CorpusIndex::ingest(&files, Tokenizer::default())?;
    fs::create_dir_all(cache).map_err(|e| CliError::Data(format!("cannot create {}: {e}", cache.display())))?;
    index.save(&path)?;
    Ok(index)
}

fn pos_tags(dataset: &Dataset, extra: Option<&Path>) -> Result<HashMap<Term, PosTag>, CliError> {
    let mut tags = HashMap::new();
    for p in dataset.problems() {
        for (terms, side) in [(&p.source, &p.source_tags), (&p.target, &p.target_tags)] {
            if let Some(side) = side {
                for (term, tag) in terms.iter().zip(side) {
                    tags.insert(term.clone(), tag.clone());
                }
            }
        }
    }
    if let Some(path) = extra {
        tags.extend(PosSimilarity::load(path).map_err(data)?.tags().clone());
    }
    Ok(tags)
}

fn build_provider(
    s: &Settings,
    dataset: &Dataset,
    model: &ModelArgs,
    index: Option<&Arc<CorpusIndex>>,
) -> Result<Box<dyn SimilarityProvider>, CliError> {
    let spec = s.provider_or_default();
    let pos = || -> Result<PosSimilarity, CliError> { Ok(PosSimilarity::new(pos_tags(dataset, model.pos_tags.as_deref())?)) };
    let base: Box<dyn SimilarityProvider> = match &spec.base {
        ProviderBase::Pos => Box::new(pos()?),
        ProviderBase::PmiIr => {
            let index = index.ok_or_else(|| CliError::Usage("pmi-ir needs --corpus DIR".into()))?;
            Box::new(PmiIrSimilarity::new(Arc::clone(index), s.pmi_window))
        }
        ProviderBase::External(path) => Box::new(ExternalSimilarity::load(path).map_err(data)?),
    };
    Ok(if spec.plus_pos {
        Box::new(combine_with_pos(base, pos()?))
    } else {
        base
    })
}

/// Everything a solving command needs, built according to the mode.
struct Inputs {
    dataset: Dataset,
    harvest: Option<Harvest>,
    provider: Option<Box<dyn SimilarityProvider>>,
}

impl Inputs {
    fn build(s: &Settings, model: &ModelArgs, dataset: Dataset) -> Result<Inputs, CliError> {
        let needs_space = s.mode != Mode::Attributional;
        let needs_provider = s.mode != Mode::Relational;
        let needs_index = needs_space || (needs_provider && s.provider_or_default().base == ProviderBase::PmiIr);
        let index = if needs_index { Some(Arc::new(load_index(s)?)) } else { None };
        let harvest = match (&index, needs_space) {
            (Some(index), true) => Some(Harvest::new(index, dataset.problems(), None).map_err(data)?),
            _ => None,
        };
        let provider = if needs_provider {
            Some(build_provider(s, &dataset, model, index.as_ref())?)
        } else {
            None
        };
        Ok(Inputs {
            dataset,
            harvest,
            provider,
        })
    }

    fn sources(&self) -> Sources<'_> {
        Sources {
            harvest: self.harvest.as_ref(),
            provider: self.provider.as_deref(),
        }
    }
}

fn eval_config(s: &Settings, space: SpaceConfig) -> EvalConfig {
    EvalConfig {
        mode: s.mode,
        space,
        seed: s.seed,
        max_m: s.max_m,
        ..EvalConfig::default()
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Data(e.to_string())),
    }
}

fn cmd_index(s: &Settings) -> Result<(), CliError> {
    if s.cache_dir.is_none() {
        return Err(CliError::Usage("index needs --cache DIR".into()));
    }
    let index = load_index(s)?;
    println!(
        "{}\t{} documents\t{} tokens\t{} types",
        index.digest(),
        index.num_documents(),
        index.total_tokens(),
        index.vocabulary_size()
    );
    Ok(())
}

fn cmd_solve(s: &Settings, inputs: &Inputs, out: Option<&Path>) -> Result<(), CliError> {
    let config = eval_config(s, s.space());
    let (scorer, _) = Scorer::new(&inputs.sources(), &config)?;
    let opts = SolveOptions {
        seed: s.seed,
        max_m: s.max_m,
        ..SolveOptions::default()
    };
    let mut text = String::new();
    let mut refused = Vec::new();
    for problem in inputs.dataset.problems() {
        match scorer.solve(problem, &opts) {
            Ok(result) => {
                text.push_str(&format!("# {}\n", problem.id));
                text.push_str(&result.to_text(problem));
            }
            Err(EvalError::Solve(e @ SolveError::BudgetExceeded { .. })) => {
                log::error!("problem {}: refused: {e}", problem.id);
                refused.push(problem.id.clone());
            }
            Err(e) => return Err(e.into()),
        }
    }
    emit(&text, out)?;
    if refused.is_empty() {
        Ok(())
    } else {
        Err(CliError::Budget(format!("refused over-budget problems: {}", refused.join(", "))))
    }
}

fn refusals(report: &evaluation::Report) -> Result<(), CliError> {
    let refused: Vec<&str> = report.refused().map(|r| r.id.as_str()).collect();
    if refused.is_empty() {
        Ok(())
    } else {
        Err(CliError::Budget(format!("refused over-budget problems: {}", refused.join(", "))))
    }
}

fn cmd_eval(s: &Settings, inputs: &Inputs, out: Option<&Path>) -> Result<(), CliError> {
    let report = evaluation::run_batch(&inputs.dataset, &inputs.sources(), &eval_config(s, s.space()))?;
    print!("{}", report.to_tsv());
    if let Some(path) = out {
        report.write(path)?;
    }
    refusals(&report)
}

fn cmd_coherence(s: &Settings, inputs: &Inputs, m_prime: usize, trials: usize, out: Option<&Path>) -> Result<(), CliError> {
    let config = CoherenceConfig {
        m_prime,
        trials,
        eval: eval_config(s, s.space()),
    };
    let report = evaluation::coherence_experiment(&inputs.dataset, &inputs.sources(), &config)?;
    print!("{}", report.to_tsv());
    if let Some(path) = out {
        report.write(path)?;
    }
    Ok(())
}

fn sweep_grid(k: Option<&str>, t: Option<&str>, no_svd: bool, log_entropy: bool, full_grid: bool) -> Result<Vec<SweepPoint>, CliError> {
    if full_grid {
        return Ok(evaluation::full_grid());
    }
    let mut grid = Vec::new();
    if let Some(k) = k {
        grid.extend(evaluation::vary_k(parse_range(k).map_err(CliError::Usage)?));
    }
    if let Some(t) = t {
        grid.extend(evaluation::vary_t(parse_range(t).map_err(CliError::Usage)?));
    }
    if no_svd {
        grid.push(evaluation::no_svd_point());
    }
    if log_entropy {
        grid.push(evaluation::log_entropy_point());
    }
    if grid.is_empty() {
        return Err(CliError::Usage("give --k, --t, --no-svd, --log-entropy or --full-grid".into()));
    }
    Ok(grid)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut s = settings(&cli)?;
    match &cli.command {
        Command::Index(corpus) => {
            apply_corpus(&mut s, corpus);
            cmd_index(&s)
        }
        Command::Solve {
            corpus,
            space,
            model,
            problems,
            out,
        }
        | Command::Eval {
            corpus,
            space,
            model,
            problems,
            out,
        } => {
            apply_corpus(&mut s, corpus);
            apply_space(&mut s, space)?;
            apply_model(&mut s, model)?;
            let inputs = Inputs::build(&s, model, load_problems(problems)?)?;
            if matches!(cli.command, Command::Solve { .. }) {
                cmd_solve(&s, &inputs, out.as_deref())
            } else {
                cmd_eval(&s, &inputs, out.as_deref())
            }
        }
        Command::Coherence {
            corpus,
            space,
            model,
            problems,
            m_prime,
            trials,
            out,
        } => {
            apply_corpus(&mut s, corpus);
            apply_space(&mut s, space)?;
            apply_model(&mut s, model)?;
            if matches!(s.mode, Mode::HybridAdd | Mode::HybridMul) {
                return Err(CliError::Usage("coherence supports relational or attributional mode".into()));
            }
            let inputs = Inputs::build(&s, model, load_problems(problems)?)?;
            cmd_coherence(&s, &inputs, *m_prime, *trials, out.as_deref())
        }
        Command::Sweep {
            corpus,
            model,
            problems,
            k,
            t,
            no_svd,
            log_entropy,
            full_grid,
            out,
        } => {
            apply_corpus(&mut s, corpus);
            apply_model(&mut s, model)?;
            if s.mode == Mode::Attributional {
                return Err(CliError::Usage("sweep varies the relation space; use a relational or hybrid mode".into()));
            }
            let grid = sweep_grid(k.as_deref(), t.as_deref(), *no_svd, *log_entropy, *full_grid)?;
            let inputs = Inputs::build(&s, model, load_problems(problems)?)?;
            let report = evaluation::sensitivity_sweep(&inputs.dataset, &inputs.sources(), &eval_config(&s, s.space()), &grid)?;
            print!("{}", report.to_tsv());
            if let Some(path) = out {
                report.write(path)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
