use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use infomotif::cli::{self, CliConfig};
use infomotif::gradcheck::{DEFAULT_STEP, DEFAULT_TOL};
use infomotif::Result;

#[derive(Parser)]
#[command(name = "infomotif", version, about = "Motif-regularized GNNs for node classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Flat JSON config with dotted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set train.q=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    directed: bool,
    /// Root seed; repeat or comma-separate for several runs.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for motif enumeration.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Count motif instances in a graph.
    Motifs(Common),
    /// Train one model per seed.
    Train(Common),
    /// Evaluate a checkpoint with accuracy breakdowns.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Per-epoch runtime on Barabasi-Albert graphs.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,8000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        m: usize,
    },
    /// Finite-difference checks of every differentiable op.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        configs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
}

fn build_config(c: &Common) -> Result<CliConfig> {
    let mut flat = match &c.config {
        Some(p) => cli::read_config_file(p)?,
        None => Map::new(),
    };
    for s in &c.set {
        let (k, v) = cli::parse_assignment(s)?;
        flat.insert(k, v);
    }
    let path = |p: &PathBuf| Value::String(p.display().to_string());
    if let Some(p) = &c.edges {
        flat.insert("data.edges".into(), path(p));
    }
    if let Some(p) = &c.features {
        flat.insert("data.features".into(), path(p));
    }
    if let Some(p) = &c.labels {
        flat.insert("data.labels".into(), path(p));
    }
    if c.directed {
        flat.insert("data.directed".into(), Value::Bool(true));
    }
    if !c.seed.is_empty() {
        flat.insert("seeds".into(), serde_json::to_value(&c.seed)?);
    }
    if let Some(p) = &c.out {
        flat.insert("out".into(), path(p));
    }
    if let Some(t) = c.threads {
        flat.insert("threads".into(), t.into());
    }
    cli::apply_overrides(&CliConfig::default(), &flat)
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Motifs(c) => {
            let cfg = build_config(&c)?;
            println!("{}", cli::cmd_motifs(&cfg)?);
        }
        Command::Train(c) => {
            let cfg = build_config(&c)?;
            let s = cli::cmd_train(&cfg)?;
            match s.summary.std {
                Some(sd) => println!("test accuracy {:.4} +- {:.4} over {} seeds", s.summary.mean, sd, s.summary.n),
                None => println!("test accuracy {:.4}", s.summary.mean),
            }
        }
        Command::Eval { common, checkpoint } => {
            let cfg = build_config(&common)?;
            let r = cli::cmd_eval(&cfg, &checkpoint)?;
            println!("test accuracy {:.4}", r.test_accuracy);
            for (name, rows) in [
                ("degree", &r.by_degree),
                ("label fraction", &r.by_label_fraction),
                ("attribute diversity", &r.by_attribute_diversity),
            ] {
                let accs: Vec<String> = rows.iter().map(|b| format!("{:.3}", b.accuracy)).collect();
                println!("by {name}: {}", accs.join(" "));
            }
        }
        Command::Bench { common, sizes, m } => {
            let cfg = build_config(&common)?;
            let r = cli::cmd_bench(&cfg, &sizes, m)?;
            println!("n\tedges\tbase_s\tinfomotif_s\toverhead_s");
            for row in &r.rows {
                println!(
                    "{}\t{}\t{:.4}\t{:.4}\t{:.4}",
                    row.n, row.edges, row.base_epoch_secs, row.infomotif_epoch_secs, row.overhead_secs
                );
            }
            println!("overhead fit: slope {:.3e} s/node, R^2 {:.4}", r.overhead_fit.slope, r.overhead_fit.r2);
        }
        Command::Gradcheck { configs, seed, step, tol } => {
            let reps = cli::cmd_gradcheck(configs, seed, step, tol)?;
            let mut ok = true;
            for r in &reps {
                println!(
                    "{:<18} {} configs  max rel err {:.2e}  {}",
                    r.name,
                    r.configs,
                    r.max_rel_err,
                    if r.passed { "ok" } else { "FAIL" }
                );
                ok &= r.passed;
            }
            if !ok {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
