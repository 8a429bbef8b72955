//! Command-line front end: data generation, splitting, training, parsing,
//! evaluation, ablations and gamma tuning.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use promptfill::constraint::Schema;
use promptfill::decode::UncertaintyMode;
use promptfill::eval::{
    evaluate, load_dataset, make_compositional_split, run_ablations, Dataset, Example, Split,
    TemplateFamily,
};
use promptfill::grammar::ClauseId;
use promptfill::pipeline::{
    grid_search_gamma, parse_utterance, read_corpus, ContextMode, ModelBundle, Models,
    PipelineConfig, RemoteZeroShot, TrainOptions,
};
use promptfill::synth::{shipped_files, SHIPPED_DATASETS, SHIPPED_SEED};
use promptfill::{Error, Result};

#[derive(Parser)]
#[command(
    name = "promptfill",
    version,
    about = "Prompt-filling text-to-SQL parser"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic data directory (dataset, scheme, schema, config, corpus).
    GenData {
        /// One of: ecommerce, geoquery.
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SHIPPED_SEED)]
        seed: u64,
    },
    /// Load a dataset, validate every example and print split sizes.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Reassign splits by template.
    Split {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Train, dev and test shares.
        #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.15, 0.15])]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Template family kept out of train, as `name=substring`. Repeatable.
        #[arg(long = "hold-out", value_parser = parse_family)]
        hold_out: Vec<TemplateFamily>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train few-shot and zero-shot models and save them as one JSON bundle.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Generic text for the zero-shot model, one sentence per line.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Table and column names, as JSON `{"tables": {"t": ["c", ..]}}`.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// JSON file with training options; flags below override it.
        #[arg(long)]
        options: Option<PathBuf>,
        #[arg(long)]
        order: Option<usize>,
        /// Interpolation weights of the few-shot n-grams, lowest order first.
        #[arg(long, value_delimiter = ',')]
        smoothing: Option<Vec<f64>>,
        /// Same for the zero-shot n-gram.
        #[arg(long, value_delimiter = ',')]
        zero_smoothing: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse utterances and print the SQL, one line each.
    Parse {
        #[command(flatten)]
        run: RunArgs,
        /// Utterances to parse.
        utterances: Vec<String>,
        /// Also read utterances from a file, one per line.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Write one JSON trace per utterance to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Keep per-step distributions in traces.
        #[arg(long)]
        distributions: bool,
    },
    /// Exact-match and per-clause accuracy on one split.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Write the full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Full system, without sequential filling and without the zero-shot model.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Grid-search each clause's gamma on a split and write the tuned config.
    TuneGamma {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        /// Tuned config; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Dev,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Dev => Split::Dev,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ContextArg {
    Sql,
    Canonical,
}

#[derive(Clone, Copy, ValueEnum)]
enum UncertaintyArg {
    Off,
    Moc,
    Roc,
}

/// Config and model plus flags overriding config values.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Gamma for every clause without its own override.
    #[arg(long)]
    default_gamma: Option<f64>,
    /// Per-clause gamma as `clause=value`. Repeatable.
    #[arg(long = "gamma", value_parser = parse_gamma)]
    gammas: Vec<(ClauseId, f64)>,
    /// Decode the whole query as one slot.
    #[arg(long)]
    seq_off: bool,
    /// Few-shot model only.
    #[arg(long)]
    zero_off: bool,
    #[arg(long, value_enum)]
    context: Option<ContextArg>,
    /// Choose between few-shot and zero-shot outputs by uncertainty.
    #[arg(long, value_enum)]
    uncertainty: Option<UncertaintyArg>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Score zero-shot steps with a remote endpoint.
    #[arg(long)]
    remote: Option<String>,
}

fn parse_gamma(s: &str) -> std::result::Result<(ClauseId, f64), String> {
    let (id, g) = s
        .split_once('=')
        .ok_or_else(|| format!("expected clause=gamma, got `{s}`"))?;
    let g: f64 = g.parse().map_err(|e| format!("gamma `{g}`: {e}"))?;
    Ok((ClauseId::from(id), g))
}

fn parse_family(s: &str) -> std::result::Result<TemplateFamily, String> {
    let (name, sub) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=substring, got `{s}`"))?;
    Ok(TemplateFamily::new(name, sub))
}

impl RunArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        let mut apply = |e: &mut promptfill::decode::EnsembleConfig| {
            if let Some(u) = self.uncertainty {
                e.uncertainty = match u {
                    UncertaintyArg::Off => UncertaintyMode::Off,
                    UncertaintyArg::Moc => UncertaintyMode::Moc,
                    UncertaintyArg::Roc => UncertaintyMode::Roc,
                };
            }
            if let Some(t) = self.threshold {
                e.threshold = t;
            }
            if let Some(m) = self.max_len {
                e.max_len = m;
            }
        };
        apply(&mut cfg.default_ensemble);
        cfg.ensemble.values_mut().for_each(&mut apply);
        if let Some(g) = self.default_gamma {
            cfg.default_ensemble.gamma = g;
        }
        for (id, g) in &self.gammas {
            cfg.set_gamma(id, *g);
        }
        cfg.seq_off |= self.seq_off;
        cfg.zero_off |= self.zero_off;
        if let Some(c) = self.context {
            cfg.context_mode = match c {
                ContextArg::Sql => ContextMode::Sql,
                ContextArg::Canonical => ContextMode::Canonical,
            };
        }
        if let Some(endpoint) = &self.remote {
            let (timeout_ms, top_k) = cfg
                .remote_zero
                .as_ref()
                .map_or((10_000, 50), |r| (r.timeout_ms, r.top_k));
            cfg.remote_zero = Some(RemoteZeroShot {
                endpoint: endpoint.clone(),
                timeout_ms,
                top_k,
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn load(&self) -> Result<(PipelineConfig, Models)> {
        let cfg = self.config()?;
        let models = ModelBundle::load(&self.model)?.to_models().bind(&cfg)?;
        Ok((cfg, models))
    }
}

impl DataArgs {
    fn examples(&self, cfg: &PipelineConfig, default: Split) -> Result<Vec<Example>> {
        let ds = load_dataset(&self.dataset, &cfg.scheme)?;
        let split = self.split.map_or(default, Split::from);
        let out = ds.split(split);
        if out.is_empty() {
            return Err(Error::Data(format!(
                "{}: no {split} examples",
                self.dataset.display()
            )));
        }
        Ok(out)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData { name, out, seed } => {
            if !SHIPPED_DATASETS.contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "unknown dataset `{name}`, expected one of {SHIPPED_DATASETS:?}"
                )));
            }
            fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
            for (file, text) in shipped_files(&name, seed)? {
                write_file(&out.join(file), &text)?;
            }
            println!("wrote {name} data to {}", out.display());
        }
        Command::Check { config, dataset } => {
            let cfg = PipelineConfig::load(&config)?;
            let ds = load_dataset(&dataset, &cfg.scheme)?;
            print_counts(&ds);
        }
        Command::Split {
            config,
            dataset,
            ratios,
            seed,
            hold_out,
            out,
        } => {
            let cfg = PipelineConfig::load(&config)?;
            let ds = load_dataset(&dataset, &cfg.scheme)?;
            let ratios: [f64; 3] = ratios.try_into().map_err(|r: Vec<f64>| {
                Error::Config(format!("--ratios needs three values, got {}", r.len()))
            })?;
            let split = make_compositional_split(ds.examples, ratios, seed, &hold_out)?;
            split.save_jsonl(&out)?;
            print_counts(&split);
        }
        Command::Train {
            config,
            dataset,
            corpus,
            schema,
            options,
            order,
            smoothing,
            zero_smoothing,
            out,
        } => {
            let cfg = PipelineConfig::load(&config)?;
            let ds = load_dataset(&dataset, &cfg.scheme)?;
            let corpus = corpus.map(read_corpus).transpose()?.unwrap_or_default();
            let schema = match schema {
                Some(p) => Schema::load(p)?,
                None => Schema::default(),
            };
            let mut opts = match options {
                Some(p) => {
                    let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
                    serde_json::from_str::<TrainOptions>(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
                None => TrainOptions::default(),
            };
            if let Some(o) = order {
                opts.order = o;
            }
            if smoothing.is_some() {
                opts.few_smoothing = smoothing;
            }
            if zero_smoothing.is_some() {
                opts.zero_smoothing = zero_smoothing;
            }
            let train = ds.split(Split::Train);
            // every utterance may be parsed later, so all of them enter the vocabulary
            let utterances: Vec<String> = ds.examples.iter().map(|e| e.utterance.clone()).collect();
            let bundle = ModelBundle::train(&train, &utterances, &corpus, &cfg, schema, &opts)?;
            bundle.save(&out)?;
            println!(
                "trained on {} examples, {} corpus lines, vocabulary {}; saved {}",
                train.len(),
                corpus.len(),
                bundle.vocab.len(),
                out.display()
            );
        }
        Command::Parse {
            run,
            mut utterances,
            input,
            trace,
            distributions,
        } => {
            let (mut cfg, models) = run.load()?;
            cfg.record_distributions = distributions;
            if let Some(p) = input {
                let f = fs::File::open(&p).map_err(|e| io_err(&p, e))?;
                for line in std::io::BufReader::new(f).lines() {
                    let line = line.map_err(|e| io_err(&p, e))?;
                    if !line.trim().is_empty() {
                        utterances.push(line);
                    }
                }
            }
            if utterances.is_empty() {
                return Err(Error::Config("nothing to parse".into()));
            }
            let mut lines = String::new();
            let mut first_err = None;
            for u in &utterances {
                match parse_utterance(u, &cfg, &models) {
                    Ok(t) => {
                        println!("{}", t.sql);
                        lines.push_str(&serde_json::to_string(&t)?);
                    }
                    Err(f) => {
                        eprintln!("failed: {u}: {f}");
                        let partial = serde_json::json!({
                            "utterance": f.utterance,
                            "clauses": f.clauses,
                            "error": f.error.to_string(),
                        });
                        lines.push_str(&partial.to_string());
                        first_err.get_or_insert(f.into_error());
                    }
                }
                lines.push('\n');
            }
            if let Some(p) = trace {
                write_file(&p, &lines)?;
            }
            if let Some(e) = first_err {
                return Err(e);
            }
        }
        Command::Eval { run, data, report } => {
            let (cfg, models) = run.load()?;
            let examples = data.examples(&cfg, Split::Test)?;
            let rep = evaluate(&examples, &cfg, &models)?;
            println!("examples     {}", rep.examples);
            println!("exact match  {:.4}", rep.exact_match);
            for c in &rep.clauses {
                println!(
                    "{:<12} cascading {:.4}  marginal {:.4}",
                    c.clause.as_str(),
                    c.cascading,
                    c.marginal
                );
            }
            println!("errors       {:?}", rep.taxonomy);
            if let Some(p) = report {
                write_json(&p, &rep)?;
            }
        }
        Command::Ablate { run, data, report } => {
            let (cfg, models) = run.load()?;
            let examples = data.examples(&cfg, Split::Test)?;
            let rows = run_ablations(&examples, &cfg, &models)?;
            for r in &rows {
                println!("{:<8} exact match {:.4}", r.name, r.report.exact_match);
            }
            if let Some(p) = report {
                write_json(&p, &rows)?;
            }
        }
        Command::TuneGamma {
            run,
            data,
            step,
            out,
        } => {
            let (mut cfg, models) = run.load()?;
            let examples = data.examples(&cfg, Split::Dev)?;
            let search = grid_search_gamma(&examples, &cfg, &models, step)?;
            for (id, g) in &search.gammas {
                eprintln!("{:<12} gamma {g}", id.as_str());
            }
            search.apply(&mut cfg);
            let text = serde_json::to_string_pretty(&cfg)? + "\n";
            match out {
                Some(p) => write_file(&p, &text)?,
                None => {
                    std::io::stdout()
                        .write_all(text.as_bytes())
                        .map_err(|e| io_err(Path::new("<stdout>"), e))?;
                }
            }
        }
    }
    Ok(())
}

fn print_counts(ds: &Dataset) {
    for (split, n) in ds.counts() {
        println!("{:<6} {n}", split.to_string());
    }
    println!("templates {}", ds.templates().len());
}
