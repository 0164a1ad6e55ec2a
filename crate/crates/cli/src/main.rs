use std::error::Error;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use activeval::environment::{JudgmentDataset, SyntheticSpec, SystemOutputs};
use activeval::harness::{
    accuracy_curve, annotation_complexity, curve_csv, judgment_validation, k_scaling, run_experiment,
    ComplexityConfig, Manifest, RunSetup, RunTrace,
};
use activeval::learners::Algorithm;
use activeval::metric::{LexicalKind, MetricScoreTable};
use activeval::preference::SystemId;
use activeval::probability::{calibrate, BtlShift, ProbabilityModelKind};
use activeval_service::{serve, ApiState, SessionStore};
use clap::{Parser, Subcommand};

type Result<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "activeval", version, about = "Active evaluation of text-generation systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configuration of a manifest and print the complexity table.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory for complexity.csv, curves.csv, traces and elimination audits.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Annotation complexity of trace files (one JSONL file per configuration).
    Complexity {
        /// A trace file or a directory of them.
        #[arg(long)]
        traces: PathBuf,
        /// Index of the true best system.
        #[arg(long)]
        truth: usize,
        #[arg(long, default_value_t = 0.05)]
        delta_acc: f64,
    },
    /// Accuracy against human annotations for one trace file.
    Curve {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        truth: usize,
    },
    /// Complexity against the number of systems on geometric BTL instances.
    Scaling {
        #[arg(long)]
        algorithm: Algorithm,
        #[arg(long, value_delimiter = ',', default_values_t = [4, 8, 12, 16])]
        k: Vec<usize>,
        #[arg(long, default_value_t = 1.3)]
        ratio: f64,
        #[arg(long, default_value_t = 0.2)]
        tie: f64,
        #[arg(long, default_value_t = 200)]
        seeds: usize,
        #[arg(long, default_value_t = 50_000)]
        max_budget: u64,
        #[arg(long, default_value_t = 10)]
        stride: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score system outputs against references.
    Score {
        #[arg(long)]
        outputs: PathBuf,
        #[arg(long)]
        references: PathBuf,
        #[arg(long, default_value = "chrf")]
        metric: LexicalKind,
        /// Number of bootstrap replicas per score.
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a probability model for a metric from recorded judgments.
    Calibrate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long, default_value = "linear", value_parser = kebab::<ProbabilityModelKind>)]
        model: ProbabilityModelKind,
        #[arg(long, default_value = "min-to-zero", value_parser = kebab::<BtlShift>)]
        btl_shift: BtlShift,
        #[arg(long, default_value = "metric")]
        name: String,
    },
    /// Host live annotation sessions over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080", env = "ACTIVEVAL_ADDR")]
        addr: SocketAddr,
        #[arg(long, default_value = "sessions", env = "ACTIVEVAL_DATA_DIR")]
        data_dir: PathBuf,
        /// Shared bearer token required on every request.
        #[arg(long, env = "ACTIVEVAL_TOKEN", hide_env_values = true)]
        token: Option<String>,
    },
}

fn kebab<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn read_traces(path: &Path) -> Result<Vec<RunTrace>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn trace_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::result::Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "jsonl"));
    files.sort();
    Ok(files)
}

fn fmt_opt(v: Option<u64>) -> String {
    v.map(|n| n.to_string()).unwrap_or_else(|| "not identified".into())
}

fn run(cmd: Command) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cmd {
        Command::Run { manifest, out: dir } => {
            let m = Manifest::load(&manifest)?;
            let bundle = run_experiment(&m)?;
            if let Some(dir) = dir {
                bundle.write(&dir)?;
            }
            write!(out, "{}", bundle.complexity_csv())?;
        }
        Command::Complexity { traces, truth, delta_acc } => {
            writeln!(out, "file,seeds,complexity,first_crossing")?;
            for f in trace_files(&traces)? {
                let t = read_traces(&f)?;
                let c = annotation_complexity(&t, SystemId(truth), delta_acc)?;
                let name = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                writeln!(out, "{name},{},{},{}", t.len(), fmt_opt(c.last_crossing), fmt_opt(c.first_crossing))?;
            }
        }
        Command::Curve { traces, truth } => {
            let t = read_traces(&traces)?;
            write!(out, "{}", curve_csv(&accuracy_curve(&t, SystemId(truth))?))?;
        }
        Command::Scaling { algorithm, k, ratio, tie, seeds, max_budget, stride, seed } => {
            let sources = k
                .iter()
                .map(|&k| SyntheticSpec::geometric_btl(k, ratio, tie).build())
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let refs: Vec<&dyn activeval::environment::PreferenceSource> = sources.iter().map(|s| s as _).collect();
            let cfg = ComplexityConfig { seeds, max_budget, checkpoint_stride: stride, ..Default::default() };
            let report = k_scaling(&RunSetup::new(algorithm), &refs, &cfg, seed)?;
            writeln!(out, "k,complexity")?;
            for p in &report.points {
                writeln!(out, "{},{}", p.k, fmt_opt(p.complexity))?;
            }
            let f = report.fit;
            writeln!(out, "# linear a={:.4} b={:.4} rss={:.4e}", f.linear.a, f.linear.b, f.linear.rss)?;
            writeln!(out, "# quadratic a={:.4} b={:.4} rss={:.4e}", f.quadratic.a, f.quadratic.b, f.quadratic.rss)?;
            writeln!(out, "# preferred {}", f.preferred())?;
        }
        Command::Score { outputs, references, metric, bootstrap, seed, out: dest } => {
            let outputs = SystemOutputs::load(&outputs)?;
            let refs = SystemOutputs::read_references(BufReader::new(File::open(&references)?))?;
            let table = outputs.score(&refs, metric, bootstrap.map(|l| (l, seed)))?;
            match dest {
                Some(p) => table.write_jsonl(File::create(p)?)?,
                None => table.write_jsonl(&mut out)?,
            }
        }
        Command::Calibrate { scores, judgments, model, btl_shift, name } => {
            let table = MetricScoreTable::load(&scores)?;
            let ds = JudgmentDataset::load(&judgments)?;
            let validation = judgment_validation(&ds, &table)?;
            let rec = calibrate(&name, model, &validation, btl_shift)?;
            if rec.non_informative {
                log::warn!("{name}: validation scores carry no pairwise signal");
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&rec)?)?;
        }
        Command::Serve { addr, data_dir, token } => {
            let store = Arc::new(SessionStore::open(&data_dir)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(addr, ApiState { store, token }))?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
