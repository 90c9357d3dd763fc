//! `faultbench` command-line tool.
//!
//! Exit codes: 0 success, 1 runtime error, 2 configuration error, 3 some
//! model cells failed (the report is still written) or a split audit found
//! leaking bearings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use faultbench::features::{extract, read_features, write_features, FeatureFamily, FeatureSample, StftSpec, WindowSpec};
use faultbench::ingest::manifest::{scan_dataset, DatasetManifest, Layout};
use faultbench::ingest::resample::downsample;
use faultbench::ingest::waveform::{load_waveform, write_waveform_csv};
use faultbench::ingest::WaveformRecord;
use faultbench::labeling::{
    declared_labels, pca_kmeans_label, read_labels, threshold_label, write_labels, LabelAssignment, LabelIndex,
    PcaKmeansParams,
};
use faultbench::models::{fit_with_validation, ModelSpec};
use faultbench::runner::config::ENV_THREADS;
use faultbench::runner::{
    compare_labelers, compare_splits, render_report, run_experiment, EvaluationReport, ExperimentConfig,
    LabelingConfig, ReportFormat,
};
use faultbench::splits::{leakage_audit, read_split, split_by_bearing, split_random, write_split, BearingTable, Partition};
use faultbench::synthgen::{generate_run_to_failure, write_femto_tree, SynthConfig};
use faultbench::Error;

#[derive(Parser)]
#[command(name = "faultbench", version, about = "Bearing fault-classification benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or transform dataset manifests.
    #[command(subcommand)]
    Ingest(IngestCmd),
    /// Generate synthetic datasets.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Window a dataset and write one feature matrix.
    Featurize(FeaturizeArgs),
    /// Label waveforms or windows.
    #[command(subcommand)]
    Label(LabelCmd),
    /// Assign samples to train/val/test or audit an assignment.
    #[command(subcommand)]
    Split(SplitCmd),
    /// Fit one model on the train partition.
    Train(TrainArgs),
    /// Run experiment configs.
    #[command(subcommand)]
    Bench(BenchCmd),
}

#[derive(Subcommand)]
enum IngestCmd {
    Scan {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        layout: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Downsample every record; writes CSVs and a manifest under `--out`.
    Resample {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Run-to-failure bearings in femto_like layout plus `ground_truth.json`.
    /// The config holds one generator config or a list of them.
    R2f {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct WindowArgs {
    #[arg(long, default_value_t = 2048)]
    window: usize,
    #[arg(long, default_value_t = 0.25)]
    overlap: f64,
    #[arg(long, default_value_t = 256)]
    stft_len: usize,
    #[arg(long, default_value_t = 0.5)]
    stft_overlap: f64,
}

impl WindowArgs {
    fn specs(&self) -> (WindowSpec, StftSpec) {
        (
            WindowSpec {
                length: self.window,
                overlap_fraction: self.overlap,
            },
            StftSpec {
                sub_len: self.stft_len,
                sub_overlap: self.stft_overlap,
            },
        )
    }
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "rfft")]
    family: String,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum LabelCmd {
    /// First-exceedance labels per bearing.
    Threshold {
        #[arg(long)]
        g: f64,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster RFFT features per bearing.
    Pca {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 4)]
        clusters: usize,
        #[arg(long, default_value_t = 2)]
        components: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pass through the fault labels declared in the manifest.
    Declared {
        #[arg(long)]
        manifest: PathBuf,
        /// Collapse every fault class to `failure`.
        #[arg(long)]
        binary: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SplitCmd {
    Bearing {
        /// Built-in table name (`femto`, `xjtu`, `cwru`) or JSON path.
        #[arg(long)]
        table: String,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Random {
        #[arg(long, default_value = "0.8,0.1,0.1")]
        fractions: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report bearings whose samples span partitions.
    Audit {
        #[arg(long)]
        split: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BenchCmd {
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    CompareSplits {
        #[arg(long)]
        config: PathBuf,
    },
    /// Methods: `threshold=<g>`, `pca`, `declared`.
    CompareLabelers {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "method", required = true)]
        methods: Vec<String>,
    },
    /// Render a saved `report.json`.
    Report {
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
    },
}

type CliResult = faultbench::Result<ExitCode>;

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> faultbench::Result<T> {
    s.parse()
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> faultbench::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}

fn load_records(manifest_path: &Path) -> faultbench::Result<(DatasetManifest, Vec<WaveformRecord>)> {
    let mut m = DatasetManifest::load(manifest_path)?;
    m.sort();
    m.validate(true)?;
    let records = m.records.iter().map(|e| load_waveform(&m, e)).collect::<faultbench::Result<Vec<_>>>()?;
    Ok((m, records))
}

fn group_by_bearing<T: Clone>(items: &[T], id: impl Fn(&T) -> &str) -> BTreeMap<String, Vec<T>> {
    let mut map: BTreeMap<String, Vec<T>> = BTreeMap::new();
    for it in items {
        map.entry(id(it).to_string()).or_default().push(it.clone());
    }
    map
}

fn ingest(cmd: IngestCmd) -> CliResult {
    match cmd {
        IngestCmd::Scan { root, layout, out } => {
            let m = scan_dataset(&root, parse::<Layout>(&layout)?)?;
            m.save(&out)?;
            eprintln!("{} records, {} rejected", m.records.len(), m.rejects.len());
        }
        IngestCmd::Resample { manifest, rate, out } => {
            let (m, records) = load_records(&manifest)?;
            let mut resampled = DatasetManifest::new(m.dataset_id.clone(), out.clone());
            resampled.layout = m.layout;
            for (entry, rec) in m.records.iter().zip(&records) {
                let r = downsample(rec, rate)?;
                let rel = entry.path.clone();
                let path = out.join(&rel);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                write_waveform_csv(&path, &r.samples)?;
                let mut e = entry.clone();
                e.path = rel;
                e.sampling_rate_hz = r.sampling_rate_hz;
                e.expected_len = None;
                resampled.records.push(e);
            }
            resampled.save(&out.join("manifest.json"))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn synth(cmd: SynthCmd) -> CliResult {
    let SynthCmd::R2f { config, out } = cmd;
    let text = fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let configs: Vec<SynthConfig> = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|c| vec![c])
    }
    .map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
    let mut truth = Vec::new();
    for c in &configs {
        let (records, t) = generate_run_to_failure(c)?;
        write_femto_tree(&out, &records)?;
        truth.push(t);
    }
    write_json(&out.join("ground_truth.json"), &truth)?;
    Ok(ExitCode::SUCCESS)
}

fn featurize(a: FeaturizeArgs) -> CliResult {
    let family = parse::<FeatureFamily>(&a.family)?;
    let (window, stft) = a.window.specs();
    let (_, records) = load_records(&a.manifest)?;
    let samples = extract(&records, family, &window, &stft)?;
    write_features(&a.out, &samples, family, &window, &stft)?;
    eprintln!("{} samples x {} features", samples.len(), family.dimension(window.length, &stft));
    Ok(ExitCode::SUCCESS)
}

fn label(cmd: LabelCmd) -> CliResult {
    let (assignments, out): (Vec<LabelAssignment>, PathBuf) = match cmd {
        LabelCmd::Threshold { g, manifest, out } => {
            let (_, records) = load_records(&manifest)?;
            let a = group_by_bearing(&records, |r| &r.bearing_id)
                .into_values()
                .map(|recs| threshold_label(&recs, g))
                .collect::<faultbench::Result<_>>()?;
            (a, out)
        }
        LabelCmd::Pca {
            features,
            clusters,
            components,
            seed,
            out,
        } => {
            let (_, samples) = read_features(&features)?;
            let params = PcaKmeansParams {
                n_clusters: clusters,
                n_components: components,
                seed,
                ..PcaKmeansParams::default()
            };
            let a = group_by_bearing(&samples, |s: &FeatureSample| &s.bearing_id)
                .into_values()
                .map(|mut g| {
                    g.sort_by_key(|s| (s.waveform_seq_index, s.window_index));
                    pca_kmeans_label(&g, &params)
                })
                .collect::<faultbench::Result<_>>()?;
            (a, out)
        }
        LabelCmd::Declared { manifest, binary, out } => {
            let m = DatasetManifest::load(&manifest)?;
            let d = declared_labels(&m.records)?;
            for w in &d.warnings {
                eprintln!("warning: {w}");
            }
            let a = if binary {
                d.assignments.iter().map(LabelAssignment::binarize).collect()
            } else {
                d.assignments
            };
            (a, out)
        }
    };
    for a in &assignments {
        let onset = a.onset_seq_index.map(|o| o.to_string()).unwrap_or_else(|| "none".into());
        eprintln!("{}: onset {onset}", a.bearing_id);
    }
    write_labels(&out, &assignments)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_fractions(s: &str) -> faultbench::Result<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::Config(format!("fractions {s:?}: {e}")))?;
    v.try_into()
        .map_err(|_| Error::Config(format!("fractions {s:?}: need three values")))
}

fn split(cmd: SplitCmd) -> CliResult {
    match cmd {
        SplitCmd::Bearing { table, features, out } => {
            let (_, samples) = read_features(&features)?;
            let keys: Vec<_> = samples.iter().map(FeatureSample::key).collect();
            let s = split_by_bearing(&keys, &BearingTable::load(&table)?)?;
            write_split(&out, &s)?;
        }
        SplitCmd::Random {
            fractions,
            seed,
            features,
            out,
        } => {
            let (_, samples) = read_features(&features)?;
            let keys: Vec<_> = samples.iter().map(FeatureSample::key).collect();
            let s = split_random(&keys, parse_fractions(&fractions)?, seed)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            write_split(&out, &s)?;
        }
        SplitCmd::Audit { split } => {
            let s = read_split(&split)?;
            let keys: Vec<_> = s.entries.iter().map(|e| e.key.clone()).collect();
            let report = leakage_audit(&s, &keys);
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.leak_free {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn train(a: TrainArgs) -> CliResult {
    let spec = ModelSpec::load(&a.spec)?;
    let (_, samples) = read_features(&a.features)?;
    let assignments = read_labels(&a.labels)?;
    let labels = LabelIndex::new(&assignments).label_samples(&samples)?;
    let split = read_split(&a.split)?;
    let pick = |part: Partition| -> (Array2<f64>, Vec<_>) {
        let idx: Vec<usize> = (0..samples.len())
            .filter(|&i| split.get(&samples[i].key()) == Some(part))
            .collect();
        let d = samples.first().map(|s| s.values.len()).unwrap_or(0);
        let x = Array2::from_shape_fn((idx.len(), d), |(r, c)| samples[idx[r]].values[c]);
        (x, idx.iter().map(|&i| labels[i].clone()).collect())
    };
    let (xtr, ytr) = pick(Partition::Train);
    let (xva, yva) = pick(Partition::Val);
    let validation = (!yva.is_empty()).then(|| (xva.view(), yva.as_slice()));
    let model = fit_with_validation(&spec, xtr.view(), &ytr, validation)?;
    model.save(&a.out)?;
    eprintln!("trained {} on {} samples", spec.kind, ytr.len());
    Ok(ExitCode::SUCCESS)
}

fn labeling_method(s: &str) -> faultbench::Result<LabelingConfig> {
    let (name, arg) = s.split_once('=').unwrap_or((s, ""));
    match name {
        "threshold" => Ok(LabelingConfig::Threshold {
            threshold_g: arg
                .trim_end_matches('g')
                .parse()
                .map_err(|_| Error::Config(format!("method {s:?}: expected threshold=<g>")))?,
            fault_types: None,
        }),
        "pca" | "pca_kmeans" => Ok(LabelingConfig::PcaKmeans {
            params: PcaKmeansParams::default(),
            fault_types: None,
        }),
        "declared" => Ok(LabelingConfig::Declared),
        _ => Err(Error::Config(format!("unknown labeling method {s:?}"))),
    }
}

fn partial(report: &EvaluationReport) -> ExitCode {
    let failed = report.failed_cells();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", report.cells.len());
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

fn bench(cmd: BenchCmd) -> CliResult {
    match cmd {
        BenchCmd::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(&cfg)?;
            print!("{}", render_report(&report, ReportFormat::Markdown)?);
            Ok(partial(&report))
        }
        BenchCmd::CompareSplits { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let cmp = compare_splits(&cfg)?;
            print!("{}", faultbench::runner::compare::render_split_comparison(&cmp));
            Ok(if cmp.failed_cells() > 0 { ExitCode::from(3) } else { ExitCode::SUCCESS })
        }
        BenchCmd::CompareLabelers { config, methods } => {
            let cfg = ExperimentConfig::load(&config)?;
            let methods = methods.iter().map(|m| labeling_method(m)).collect::<faultbench::Result<Vec<_>>>()?;
            let cmp = compare_labelers(&cfg, &methods)?;
            print!("{}", faultbench::runner::compare::render_labeler_comparison(&cmp));
            let failed: usize = cmp.runs.iter().map(|r| r.report.failed_cells()).sum();
            Ok(if failed > 0 { ExitCode::from(3) } else { ExitCode::SUCCESS })
        }
        BenchCmd::Report { report, format } => {
            let text = fs::read_to_string(&report).map_err(|e| Error::io(&report, e))?;
            let r: EvaluationReport = serde_json::from_str(&text)?;
            print!("{}", render_report(&r, parse::<ReportFormat>(&format)?)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn configure_threads() -> faultbench::Result<()> {
    if let Ok(v) = std::env::var(ENV_THREADS) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Config(format!("{ENV_THREADS}={v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Ingest(c) => ingest(c),
        Command::Synth(c) => synth(c),
        Command::Featurize(a) => featurize(a),
        Command::Label(c) => label(c),
        Command::Split(c) => split(c),
        Command::Train(a) => train(a),
        Command::Bench(c) => bench(c),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::MissingBearings(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
