//! `pdnpulse`: simulate boards, build golden models, detect and classify
//! anomalies, and run seeded campaigns.
//!
//! Exit codes: 0 success or genuine, 2 anomalous, 1 error (one line on
//! stderr).

mod files;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pdnpulse_core::detector::histogram;
use pdnpulse_core::report::{histogram_to_csv, roc_to_csv};
use pdnpulse_core::touchstone::{n_ports_from_path, DataFormat, ParamKind};
use pdnpulse_core::{
    detect, fd_knn, fit_golden, parse_touchstone, roc, run_campaign, s_to_z, solve_z, write_touchstone, z_to_s,
    CampaignConfig, FdConfig, FrequencyGrid, GoldenModel, LabeledBoard, LabeledLibrary, Norm, PdnNetlist, Provenance,
    SParamSweep, Statistic, ToleranceModel, TouchstoneDocument, Verdict,
};

use files::{load_signature, manifest_path_for, read_text, save_signature, sha256_hex, write_text, Manifest};

const SEED_ENV: &str = "PDNPULSE_SEED";

#[derive(Parser)]
#[command(name = "pdnpulse", version, about = "PDN impedance signatures and board anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    S,
    Z,
}

impl From<Param> for ParamKind {
    fn from(p: Param) -> Self {
        match p {
            Param::S => ParamKind::S,
            Param::Z => ParamKind::Z,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Ri,
    Ma,
    Db,
}

impl From<Format> for DataFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Ri => DataFormat::Ri,
            Format::Ma => DataFormat::Ma,
            Format::Db => DataFormat::Db,
        }
    }
}

#[derive(clap::Args)]
struct GridArgs {
    /// First frequency in Hz.
    #[arg(long, default_value_t = 3e5)]
    start: f64,
    /// Last frequency in Hz.
    #[arg(long, default_value_t = 3e9)]
    stop: f64,
    #[arg(long, default_value_t = 1024)]
    points: usize,
    #[arg(long, value_enum, default_value = "log")]
    spacing: GridSpacing,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridSpacing {
    Log,
    Linear,
}

impl GridArgs {
    fn build(&self) -> Result<FrequencyGrid> {
        Ok(match self.spacing {
            GridSpacing::Log => FrequencyGrid::log(self.start, self.stop, self.points)?,
            GridSpacing::Linear => FrequencyGrid::linear(self.start, self.stop, self.points)?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve a netlist into an impedance signature (.csv or .sNp).
    Simulate {
        #[arg(long)]
        netlist: PathBuf,
        /// Anomaly id from the netlist to apply; repeatable.
        #[arg(long = "anomaly")]
        anomalies: Vec<String>,
        /// Draw a process-variation instance at this tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Variation seed; defaults to $PDNPULSE_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[command(flatten)]
        grid: GridArgs,
        /// Parameter written to a Touchstone output.
        #[arg(long, value_enum, default_value = "z")]
        param: Param,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a Touchstone file into a signature CSV.
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a golden model from genuine boards.
    Golden {
        /// Genuine board files (.csv or .sNp), at least two.
        #[arg(long = "genuine", required = true, num_args = 1..)]
        genuine: Vec<PathBuf>,
        /// Threshold multiplier in μ + kσ.
        #[arg(long, default_value_t = 3.0)]
        k: f64,
        #[arg(long, default_value = "l2")]
        norm: Norm,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a board with a golden model; exits 2 when anomalous.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        board: PathBuf,
        #[arg(long, default_value = "min")]
        statistic: Statistic,
        /// Detection report JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// FD-KNN classification against a labelled library.
    Classify {
        /// Library JSON with `entries: [{class, signature}]`.
        #[arg(long, required_unless_present = "entry")]
        library: Option<PathBuf>,
        /// Library entry as CLASS=PATH; repeatable.
        #[arg(long)]
        entry: Vec<String>,
        #[arg(long)]
        board: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value = "l2")]
        norm: Norm,
        /// Exit 2 unless the predicted class equals this one.
        #[arg(long)]
        genuine_class: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// ROC curve from genuine and anomalous statistic lists.
    Roc {
        /// One statistic per line; a non-numeric first line is a header.
        #[arg(long)]
        genuine: PathBuf,
        #[arg(long)]
        anomalous: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a histogram CSV with this many bins.
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Run a campaign config and write its CSV tables into a directory.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite a Touchstone file as S or Z parameters.
    Convert {
        input: PathBuf,
        #[arg(long, value_enum)]
        to: Param,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| anyhow!("{SEED_ENV}=`{v}` is not an unsigned integer")),
        Err(_) => Ok(None),
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    netlist_path: &Path,
    anomalies: &[String],
    tolerance: Option<f64>,
    seed: Option<u64>,
    trial: u64,
    grid: &GridArgs,
    param: Param,
    out: &Path,
) -> Result<u8> {
    let mut manifest = Manifest::new("simulate");
    manifest.input(netlist_path)?;
    let text = read_text(netlist_path)?;
    let mut netlist = PdnNetlist::from_json(&text).with_context(|| format!("{}", netlist_path.display()))?;
    let ids: Vec<&str> = anomalies.iter().map(String::as_str).collect();
    netlist = netlist.apply_anomalies(&ids)?;
    let mut comments = vec![
        format!("pdnpulse {}", env!("CARGO_PKG_VERSION")),
        format!("netlist sha256 {}", sha256_hex(text.as_bytes())),
    ];
    if let Some(t) = tolerance {
        if !(0.0..1.0).contains(&t) {
            bail!("tolerance {t} must be in [0, 1)");
        }
        let seed = match seed {
            Some(s) => s,
            None => env_seed()?.unwrap_or(0),
        };
        manifest.seed(seed);
        netlist = netlist.sample_variation(&ToleranceModel::gaussian(t, seed), trial);
        comments.push(format!("variation tolerance {t} seed {seed} trial {trial}"));
    }
    let sig = solve_z(&netlist, &grid.build()?)?;
    save_signature(out, &sig, param.into(), comments)?;
    manifest.output(out)?;
    manifest.finish(&manifest_path_for(out))?;
    Ok(0)
}

fn import(input: &Path, label: Option<&str>, out: &Path) -> Result<u8> {
    let mut manifest = Manifest::new("import");
    manifest.input(input)?;
    let n = n_ports_from_path(input)?;
    let doc = parse_touchstone(&read_text(input)?, n).with_context(|| format!("{}", input.display()))?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("board");
    let sig = doc.to_signature(label.unwrap_or(stem))?;
    save_signature(out, &sig, ParamKind::Z, doc.comments.clone())?;
    manifest.output(out)?;
    manifest.finish(&manifest_path_for(out))?;
    Ok(0)
}

fn golden(genuine: &[PathBuf], k: f64, norm: Norm, out: &Path) -> Result<u8> {
    let mut manifest = Manifest::new("golden");
    let mut boards = Vec::with_capacity(genuine.len());
    for p in genuine {
        manifest.input(p)?;
        boards.push(load_signature(p)?);
    }
    let model = fit_golden(&boards, FdConfig { norm }, k)?;
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
    write_text(out, &serde_json::to_string(&model)?)?;
    manifest.output(out)?;
    manifest.finish(&manifest_path_for(out))?;
    println!("mu={} sigma={} threshold={}", model.mu, model.sigma, model.threshold);
    Ok(0)
}

fn detect_cmd(model_path: &Path, board: &Path, statistic: Statistic, out: Option<&Path>) -> Result<u8> {
    let mut manifest = Manifest::new("detect");
    manifest.input(model_path)?;
    manifest.input(board)?;
    let model: GoldenModel =
        serde_json::from_str(&read_text(model_path)?).with_context(|| format!("{}", model_path.display()))?;
    let report = detect(&model, &load_signature(board)?, statistic)?;
    if let Some(out) = out {
        write_text(out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
        manifest.output(out)?;
        manifest.finish(&manifest_path_for(out))?;
    }
    let verdict = match report.verdict {
        Verdict::Genuine => "genuine",
        Verdict::Anomalous => "anomalous",
    };
    println!(
        "verdict={verdict} statistic={} threshold={}",
        report.decision_statistic, report.threshold_used
    );
    Ok(if report.verdict == Verdict::Anomalous { 2 } else { 0 })
}

fn load_library(library: Option<&Path>, entries: &[String], manifest: &mut Manifest) -> Result<LabeledLibrary> {
    let mut lib = match library {
        Some(p) => {
            manifest.input(p)?;
            serde_json::from_str(&read_text(p)?).with_context(|| format!("{}", p.display()))?
        }
        None => LabeledLibrary {
            format_version: 1,
            entries: Vec::new(),
        },
    };
    for e in entries {
        let (class, path) = e.split_once('=').ok_or_else(|| anyhow!("entry `{e}` is not CLASS=PATH"))?;
        let path = Path::new(path);
        manifest.input(path)?;
        lib.entries.push(LabeledBoard {
            class: class.to_string(),
            signature: load_signature(path)?,
        });
    }
    Ok(lib)
}

#[allow(clippy::too_many_arguments)]
fn classify(
    library: Option<&Path>,
    entries: &[String],
    board: &Path,
    k: usize,
    norm: Norm,
    genuine_class: Option<&str>,
    out: Option<&Path>,
) -> Result<u8> {
    let mut manifest = Manifest::new("classify");
    let lib = load_library(library, entries, &mut manifest)?;
    manifest.input(board)?;
    let label = fd_knn(&lib, &load_signature(board)?, k, FdConfig { norm })?;
    if let Some(out) = out {
        let body = serde_json::json!({ "format_version": 1, "label": label, "k": k, "norm": norm });
        write_text(out, &(serde_json::to_string_pretty(&body)? + "\n"))?;
        manifest.output(out)?;
        manifest.finish(&manifest_path_for(out))?;
    }
    println!("{label}");
    Ok(match genuine_class {
        Some(g) if g != label => 2,
        _ => 0,
    })
}

fn read_statistics(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next_back().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if out.is_empty() && i == 0 => {}
            Err(_) => bail!("{} line {}: `{field}` is not a number", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn roc_cmd(genuine: &Path, anomalous: &Path, out: &Path, hist: Option<&Path>, bins: usize) -> Result<u8> {
    let mut manifest = Manifest::new("roc");
    manifest.input(genuine)?;
    manifest.input(anomalous)?;
    let (g, a) = (read_statistics(genuine)?, read_statistics(anomalous)?);
    let curve = roc(&g, &a)?;
    write_text(out, &roc_to_csv(&curve))?;
    manifest.output(out)?;
    if let Some(h) = hist {
        write_text(h, &histogram_to_csv(&histogram(&g, &a, bins)?))?;
        manifest.output(h)?;
    }
    manifest.finish(&manifest_path_for(out))?;
    println!(
        "auc={} best_accuracy={} best_threshold={}",
        curve.auc, curve.best_accuracy, curve.best_threshold
    );
    Ok(0)
}

fn campaign(config: &Path, out: &Path) -> Result<u8> {
    let mut manifest = Manifest::new("campaign");
    manifest.input(config)?;
    manifest.config(&read_text(config)?);
    let mut cfg = CampaignConfig::load(config)?;
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    manifest.seed(cfg.seed);
    let outcome = run_campaign(&cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    for (name, table) in outcome.tables() {
        let path = out.join(name);
        write_text(&path, &table)?;
        manifest.output(&path)?;
    }
    manifest.finish(&out.join("manifest.json"))?;
    Ok(0)
}

fn convert(input: &Path, to: Param, format: Option<Format>, out: &Path) -> Result<u8> {
    let mut manifest = Manifest::new("convert");
    manifest.input(input)?;
    let n = n_ports_from_path(input)?;
    let n_out = n_ports_from_path(out)?;
    if n != n_out {
        bail!("{} has {n} ports but {} names {n_out}", input.display(), out.display());
    }
    let doc = parse_touchstone(&read_text(input)?, n).with_context(|| format!("{}", input.display()))?;
    let z0 = vec![doc.options.reference; n];
    let to: ParamKind = to.into();
    let data = match (doc.options.kind, to) {
        (a, b) if a == b => doc.data.clone(),
        (ParamKind::S, ParamKind::Z) => {
            let sweep = SParamSweep {
                label: String::new(),
                freqs: doc.freqs.clone(),
                z0,
                s: doc.data.clone(),
            };
            s_to_z(&sweep, Provenance::Measured)?.z
        }
        _ => {
            let sig = doc.to_signature("")?;
            z_to_s(&sig)?.s
        }
    };
    let mut options = doc.options;
    options.kind = to;
    if let Some(f) = format {
        options.format = f.into();
    }
    let converted = TouchstoneDocument {
        options,
        n_ports: n,
        freqs: doc.freqs.clone(),
        data,
        comments: doc.comments.clone(),
    };
    write_text(out, &write_touchstone(&converted))?;
    manifest.output(out)?;
    manifest.finish(&manifest_path_for(out))?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate {
            netlist,
            anomalies,
            tolerance,
            seed,
            trial,
            grid,
            param,
            out,
        } => simulate(&netlist, &anomalies, tolerance, seed, trial, &grid, param, &out),
        Command::Import { input, label, out } => import(&input, label.as_deref(), &out),
        Command::Golden { genuine, k, norm, out } => golden(&genuine, k, norm, &out),
        Command::Detect {
            model,
            board,
            statistic,
            out,
        } => detect_cmd(&model, &board, statistic, out.as_deref()),
        Command::Classify {
            library,
            entry,
            board,
            k,
            norm,
            genuine_class,
            out,
        } => classify(
            library.as_deref(),
            &entry,
            &board,
            k,
            norm,
            genuine_class.as_deref(),
            out.as_deref(),
        ),
        Command::Roc {
            genuine,
            anomalous,
            out,
            histogram,
            bins,
        } => roc_cmd(&genuine, &anomalous, &out, histogram.as_deref(), bins),
        Command::Campaign { config, out } => campaign(&config, &out),
        Command::Convert { input, to, format, out } => convert(&input, to, format, &out),
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", one_line(first));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", one_line(&format!("{e:#}")));
            ExitCode::from(1)
        }
    }
}
