use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use transaug::pipeline::{self, Command, PipelineConfig, PipelineError, CONFIG_ENV};
use transaug::{DatasetKind, Origin};

#[derive(Parser)]
#[command(name = "transaug", version, about = "Code-translation data augmentation and evaluation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Pipeline config (TOML); falls back to $TRANSAUG_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Validate and print the plan without touching any file.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print record counts per language pair, origin and problem.
    Stats {
        input: PathBuf,
        #[arg(long, default_value = "parallel", value_parser = parse_kind)]
        kind: DatasetKind,
    },
    /// Build a comparable corpus of one origin.
    BuildComp {
        #[arg(long, value_parser = parse_origin)]
        origin: Origin,
        /// Swap the source and target corpora.
        #[arg(long)]
        reverse: bool,
        #[arg(long)]
        max_per_problem: Option<usize>,
        #[arg(long)]
        knn_k: Option<usize>,
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Request translation candidates for every parallel example (resumable).
    GenRefs {
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Build execution-verified test suites from the source programs.
    MakeTests {
        #[arg(long)]
        n_inputs: Option<usize>,
    },
    /// Judge candidates, select diverse references, write the augmented dataset.
    JudgeSelect {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Compute CA@k, BLEU, syntax accuracy, construct match and histograms.
    Eval {
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        verdicts: Option<PathBuf>,
        #[arg(long)]
        no_syntax: bool,
    },
}

fn parse_kind(s: &str) -> Result<DatasetKind, String> {
    s.parse()
}

fn parse_origin(s: &str) -> Result<Origin, String> {
    s.parse()
}

fn load_config(g: &Global) -> Result<PipelineConfig, PipelineError> {
    let path = g.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(&p)?,
        None => PipelineConfig::default(),
    };
    if let Some(d) = &g.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = load_config(&cli.global).and_then(|mut cfg| {
        let cmd = match cli.cmd {
            Cmd::Stats { input, kind } => Command::Stats { input, kind },
            Cmd::BuildComp { origin, reverse, max_per_problem, knn_k, endpoint } => {
                if let Some(m) = max_per_problem {
                    cfg.pairing.max_per_problem = m;
                }
                if let Some(k) = knn_k {
                    cfg.pairing.knn_k = k;
                }
                if let Some(e) = endpoint {
                    cfg.generation.endpoint = e;
                }
                Command::BuildComp { origin, reverse }
            }
            Cmd::GenRefs { endpoint, n } => {
                if let Some(e) = endpoint {
                    cfg.generation.endpoint = e;
                }
                if let Some(n) = n {
                    cfg.generation.n_candidates = n;
                }
                Command::GenRefs
            }
            Cmd::MakeTests { n_inputs } => {
                if let Some(n) = n_inputs {
                    cfg.testgen.n_inputs = n;
                }
                Command::MakeTests
            }
            Cmd::JudgeSelect { k } => {
                if let Some(k) = k {
                    cfg.selection.k = k;
                }
                Command::JudgeSelect
            }
            Cmd::Eval { candidates, verdicts, no_syntax } => {
                cfg.eval.candidates = candidates.or(cfg.eval.candidates);
                cfg.eval.verdicts = verdicts.or(cfg.eval.verdicts);
                cfg.eval.syntax &= !no_syntax;
                Command::Eval
            }
        };
        pipeline::run(&cmd, &cfg, cli.global.dry_run)
    });
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
