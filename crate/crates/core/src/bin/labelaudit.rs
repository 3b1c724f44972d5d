//! `labelaudit` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use labelaudit::audit::{run_audit, AuditOptions, AuditReport, ThresholdPolicy};
use labelaudit::base::{load_softmax, train_base, BaseConfig};
use labelaudit::config::ConfigFile;
use labelaudit::conformal::{fn_threshold, fp_threshold};
use labelaudit::detector::DetectorConfig;
use labelaudit::graph::{labels_csv, load_graph, parse_labels, parse_splits, write_graph, Graph, Split};
use labelaudit::harness::experiment::{
    fp_curve_gnuplot, reports_csv, run_trial, sort_reports, summarize, summary_json, trial_fp_curve, ExperimentConfig, MetricReport,
};
use labelaudit::harness::sbm::{gen_sbm, SbmConfig};
use labelaudit::noise::{inject_per_set, NoiseKind};
use labelaudit::pipeline::PipelineConfig;
use labelaudit::review::{export_clean, EffectiveVerdicts};
use labelaudit::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "labelaudit", version, about = "Find and fix mislabelled nodes in graph datasets")]
struct Cli {
    /// Seed for every random choice; recorded in outputs.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// `key = value` settings file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every labelled node and write a ranked audit report.
    Audit(AuditArgs),
    /// Inject symmetric or asymmetric label noise into each split.
    Inject(InjectArgs),
    /// Generate a planted-partition graph dataset.
    GenSbm(GenSbmArgs),
    /// Run the noisy-label experiment grid on generated graphs.
    Evaluate(EvaluateArgs),
    /// Select a conformal threshold over an audit report's scores.
    Conformal(ConformalArgs),
    /// Apply reviewer verdicts and write cleaned label/split files.
    ExportClean(ExportArgs),
    /// Serve the review API over an audit report.
    #[cfg(feature = "serve")]
    Serve(ServeArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    splits: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Defaults to one more than the largest label.
    #[arg(long)]
    num_classes: Option<usize>,
}

impl DataArgs {
    fn load(&self) -> Result<Graph> {
        let (g, _) = load_graph(
            &self.edges,
            &self.labels,
            &self.splits,
            self.features.as_deref(),
            self.num_classes,
        )?;
        Ok(g)
    }
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Base-classifier probabilities, one CSV row per node.
    #[arg(long, conflicts_with = "train_base")]
    softmax: Option<PathBuf>,
    /// Train the built-in classifier on the training split instead.
    #[arg(long)]
    train_base: bool,
    #[arg(long)]
    k_hops: Option<usize>,
    /// fixed:<x>, bayes:<rate>, conformal-fp:<alpha>,<p> or conformal-fn:<alpha>,<p>.
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    synthetic_ratio: Option<f64>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the probabilities used (useful with --train-base).
    #[arg(long)]
    save_softmax: Option<PathBuf>,
    #[arg(long)]
    save_detector: Option<PathBuf>,
    #[arg(long)]
    save_base_model: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Sym,
    Asym,
}

impl From<NoiseArg> for NoiseKind {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Sym => NoiseKind::Sym,
            NoiseArg::Asym => NoiseKind::Asym,
        }
    }
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    splits: PathBuf,
    #[arg(long)]
    num_classes: Option<usize>,
    #[arg(long, value_enum)]
    noise: NoiseArg,
    #[arg(long)]
    eps: f64,
    /// Corrupted label CSV.
    #[arg(long)]
    out_labels: PathBuf,
    /// `node_id,original,corrupted,flipped` for every labelled node.
    #[arg(long)]
    out_flips: Option<PathBuf>,
}

#[derive(Args)]
struct SbmArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 0.03)]
    p_in: f64,
    #[arg(long, default_value_t = 0.002)]
    p_out: f64,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 1.5)]
    signal: f64,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.4, 0.3, 0.3])]
    split_fractions: Vec<f64>,
}

impl SbmArgs {
    fn config(&self, seed: u64) -> SbmConfig {
        SbmConfig {
            n: self.n,
            c: self.classes,
            p_in: self.p_in,
            p_out: self.p_out,
            d: self.dim,
            signal: self.signal,
            splits: [self.split_fractions[0], self.split_fractions[1], self.split_fractions[2]],
            seed,
        }
    }
}

#[derive(Args)]
struct GenSbmArgs {
    #[command(flatten)]
    sbm: SbmArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    sbm: SbmArgs,
    /// Number of seeds, counting up from --seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [NoiseArg::Sym, NoiseArg::Asym])]
    noise: Vec<NoiseArg>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.025, 0.05, 0.1])]
    eps: Vec<f64>,
    #[arg(long)]
    k_hops: Option<usize>,
    /// Fixed decision threshold on scores.
    #[arg(long, default_value_t = labelaudit::detector::DEFAULT_THRESHOLD)]
    cutoff: f64,
    /// Levels for the conformal false-positive curve.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5])]
    alphas: Vec<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fp,
    Fn,
}

#[derive(Args)]
struct ConformalArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    alpha: f64,
    /// Expected mislabel fraction.
    #[arg(long)]
    p: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    splits: PathBuf,
    /// JSON-lines verdict log; a missing file means no verdicts.
    #[arg(long)]
    verdicts: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[cfg(feature = "serve")]
#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Probabilities shown as neighbor context.
    #[arg(long)]
    softmax: Option<PathBuf>,
    #[arg(long)]
    verdicts: PathBuf,
    #[arg(long)]
    bind: Option<std::net::IpAddr>,
    #[arg(long)]
    port: Option<u16>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Internal => 3,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let conf = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let seed = conf.resolve(cli.seed, "seed", 0u64)?;
    match cli.command {
        Command::Audit(a) => audit(a, &conf, seed),
        Command::Inject(a) => inject(a, seed),
        Command::GenSbm(a) => {
            let g = gen_sbm(&a.sbm.config(seed))?;
            write_graph(&g, &a.out_dir)?;
            println!(
                "wrote {} nodes, {} edges, {} classes to {}",
                g.num_nodes(),
                g.num_edges(),
                g.num_classes(),
                a.out_dir.display()
            );
            Ok(())
        }
        Command::Evaluate(a) => evaluate(a, &conf, seed),
        Command::Conformal(a) => conformal(a),
        Command::ExportClean(a) => export(a),
        #[cfg(feature = "serve")]
        Command::Serve(a) => serve(a, &conf),
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn detector_config(conf: &ConfigFile) -> Result<DetectorConfig> {
    let d = DetectorConfig::default();
    Ok(DetectorConfig {
        step: conf.resolve(None, "detector_step", d.step)?,
        max_epochs: conf.resolve(None, "detector_epochs", d.max_epochs)?,
        patience: conf.resolve(None, "detector_patience", d.patience)?,
        ..d
    })
}

fn base_config(conf: &ConfigFile, seed: u64) -> Result<BaseConfig> {
    let d = BaseConfig::default();
    Ok(BaseConfig {
        k_base: conf.resolve(None, "k_base", d.k_base)?,
        epochs: conf.resolve(None, "base_epochs", d.epochs)?,
        step: conf.resolve(None, "base_step", d.step)?,
        seed,
        ..d
    })
}

fn audit(a: AuditArgs, conf: &ConfigFile, seed: u64) -> Result<()> {
    let g = a.data.load()?;
    let (p, source) = match (&a.softmax, a.train_base) {
        (Some(path), false) => (
            load_softmax(path, g.num_nodes(), g.num_classes()).map_err(|e| e.in_module("base_classifier"))?,
            path.display().to_string(),
        ),
        (None, true) => {
            let trained = train_base(&g, base_config(conf, seed)?).map_err(|e| e.in_module("base_classifier"))?;
            log::info!("base classifier training accuracy {:.4}", trained.train_accuracy);
            if let Some(path) = &a.save_base_model {
                trained.model.save(path)?;
            }
            (trained.probabilities, "trained".to_string())
        }
        _ => {
            return Err(Error::InvalidArgument(
                "audit needs base predictions: pass --softmax <file> or --train-base".into(),
            ))
        }
    };
    let threshold: ThresholdPolicy = match a.threshold {
        Some(t) => t.parse()?,
        None => conf.get("threshold")?.unwrap_or_default(),
    };
    let opts = AuditOptions {
        dataset: a.dataset.unwrap_or_else(|| dataset_name(&a.data.labels)),
        pipeline: PipelineConfig {
            k_hops: conf.resolve(a.k_hops, "k_hops", 2)?,
            synthetic_ratio: conf.resolve(a.synthetic_ratio, "synthetic_ratio", 0.5)?,
            detector: detector_config(conf)?,
            seed,
        },
        threshold,
        softmax_source: source,
    };
    let result = run_audit(&g, &p, &opts)?;
    result.report.save(&a.out)?;
    if let Some(path) = &a.save_softmax {
        write(path, &p.to_csv())?;
    }
    if let Some(path) = &a.save_detector {
        result.detector.save(path)?;
    }
    let r = &result.report;
    println!(
        "audited {} labelled nodes: {} flagged under {} (cutoff {}); report written to {}",
        r.records.len(),
        r.num_flagged(),
        r.config.threshold.policy,
        r.config.threshold.cutoff,
        a.out.display()
    );
    if r.transition.uncounted > 0 {
        println!(
            "transition estimate: {} validation nodes reached no class threshold",
            r.transition.uncounted
        );
    }
    Ok(())
}

fn dataset_name(labels: &Path) -> String {
    labels
        .parent()
        .and_then(|d| d.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn inject(a: InjectArgs, seed: u64) -> Result<()> {
    let labels = parse_labels(&a.labels, a.num_classes)?;
    let splits = parse_splits(&a.splits, &labels)?;
    let c = a
        .num_classes
        .unwrap_or_else(|| labels.iter().flatten().max().map_or(1, |m| m + 1));
    let dense: Vec<usize> = labels.iter().map(|l| l.unwrap_or(0)).collect();
    let sets: Vec<Vec<usize>> = [Split::Train, Split::Val, Split::Test]
        .iter()
        .map(|&s| (0..labels.len()).filter(|&v| splits[v] == s).collect())
        .collect();
    let set_refs: Vec<&[usize]> = sets.iter().map(|s| s.as_slice()).collect();
    let out = inject_per_set(&dense, &set_refs, c, a.noise.into(), a.eps, seed)?;
    let corrupted: Vec<Option<usize>> = labels
        .iter()
        .zip(&out.labels)
        .map(|(l, &n)| l.map(|_| n))
        .collect();
    write(&a.out_labels, &labels_csv(&corrupted))?;
    if let Some(path) = &a.out_flips {
        let labelled = (0..labels.len()).filter(|&v| labels[v].is_some());
        write(path, &out.to_csv(labelled))?;
    }
    println!("flipped {} of {} labelled nodes", out.num_flipped(), labels.iter().flatten().count());
    Ok(())
}

fn evaluate(a: EvaluateArgs, conf: &ConfigFile, seed: u64) -> Result<()> {
    let cfg = ExperimentConfig {
        sbm: a.sbm.config(seed),
        base: base_config(conf, seed)?,
        pipeline: PipelineConfig {
            k_hops: conf.resolve(a.k_hops, "k_hops", 2)?,
            detector: detector_config(conf)?,
            ..PipelineConfig::default()
        },
        threshold: a.cutoff,
    };
    let seeds: Vec<u64> = (seed..seed + a.seeds).collect();
    let mut reports: Vec<MetricReport> = Vec::new();
    let mut curve = String::new();
    for &noise in &a.noise {
        for &eps in &a.eps {
            for &s in &seeds {
                let trial = run_trial(&cfg, noise.into(), eps, s)?;
                if curve.is_empty() {
                    let pts = trial_fp_curve(&trial, eps, s, &a.alphas);
                    curve = format!("# noise {} eps {eps} seed {s}\n{}", NoiseKind::from(noise), fp_curve_gnuplot(&pts));
                }
                reports.extend(trial.reports);
            }
        }
    }
    let mut sorted = reports;
    sort_reports(&mut sorted);
    write(&a.out_dir.join("reports.csv"), &reports_csv(&sorted))?;
    write(&a.out_dir.join("summary.json"), &(summary_json(&sorted)? + "\n"))?;
    write(&a.out_dir.join("fp_curve.dat"), &curve)?;
    println!("{}", summary_table(&sorted));
    Ok(())
}

fn summary_table(reports: &[MetricReport]) -> String {
    let mut s = format!("{:<16} {:<5} {:>6} {:>7} {:>7} {:>7}\n", "method", "noise", "eps", "f1", "mcc", "p@t");
    for row in summarize(reports) {
        s.push_str(&format!(
            "{:<16} {:<5} {:>6} {:>7.3} {:>7.3} {:>7.3}\n",
            row.method, row.noise, row.eps, row.f1.mean, row.mcc.mean, row.p_at_t.mean
        ));
    }
    s
}

fn conformal(a: ConformalArgs) -> Result<()> {
    let report = AuditReport::load(&a.report)?;
    let scores = report.scores();
    let t = match a.mode {
        ModeArg::Fp => fp_threshold(&scores, a.p, a.alpha)?,
        ModeArg::Fn => fn_threshold(&scores, a.p, a.alpha)?,
    };
    let json = t.to_json()?;
    match &a.out {
        Some(p) => write(p, &(json + "\n"))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let report = AuditReport::load(&a.report)?;
    let labels = parse_labels(&a.labels, Some(report.num_classes))?;
    let splits = parse_splits(&a.splits, &labels)?;
    if labels.len() != report.num_nodes {
        return Err(Error::InvalidData(format!(
            "{} lists {} nodes but the report covers {}",
            a.labels.display(),
            labels.len(),
            report.num_nodes
        )));
    }
    let verdicts = EffectiveVerdicts::load(&a.verdicts)?;
    let cleaned = export_clean(&labels, &splits, report.num_classes, &verdicts)?;
    cleaned.write(&a.out_dir)?;
    println!(
        "applied {} verdicts: {} labels replaced, {} nodes excluded; wrote {}",
        verdicts.len(),
        cleaned.replaced,
        cleaned.excluded,
        a.out_dir.display()
    );
    Ok(())
}

#[cfg(feature = "serve")]
fn serve(a: ServeArgs, conf: &ConfigFile) -> Result<()> {
    use labelaudit::service::{self, ReviewSession};
    use std::net::{IpAddr, Ipv4Addr, SocketAddr};
    use std::sync::Arc;

    let report = AuditReport::load(&a.report)?;
    let g = a.data.load()?;
    let p = a
        .softmax
        .as_ref()
        .map(|path| load_softmax(path, g.num_nodes(), g.num_classes()))
        .transpose()?;
    let bind = conf.resolve(a.bind, "bind", IpAddr::V4(Ipv4Addr::LOCALHOST))?;
    let port = conf.resolve(a.port, "port", 8080u16)?;
    let session = Arc::new(ReviewSession::new(report, g, p, a.verdicts)?);
    let addr = SocketAddr::new(bind, port);
    println!("review service on http://{addr}");
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("tokio runtime", e))?
        .block_on(service::serve(session, addr))
}
