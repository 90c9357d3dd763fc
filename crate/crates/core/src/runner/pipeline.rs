use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{self, read_features, write_features, FeatureFamily, FeatureSample, SampleKey};
use crate::ingest::{downsample, load_waveform, DatasetManifest, WaveformRecord};
use crate::labeling::declared::{apply_fault_types, declared_from_records};
use crate::labeling::{pca_kmeans_label, read_labels, threshold_label, write_labels, Label, LabelAssignment, LabelIndex};
use crate::metrics::{confusion, score};
use crate::models::{fit_with_validation, ModelSpec};
use crate::rng::derive_seed;
use crate::runner::config::{load_fault_table, ExperimentConfig, LabelingConfig, SourceConfig, Task};
use crate::runner::report::{
    render_report, BearingOnset, Cell, EvaluationReport, Fingerprint, FitProvenance, PartitionCounts, ReportFormat,
    Statistic, REPORT_SCHEMA_VERSION,
};
use crate::splits::io::{read_split, write_split};
use crate::splits::{leakage_audit, split_by_bearing, split_random, Partition, SplitAssignment, SplitStrategy};
use crate::synthgen::{add_bearing_nuisance, generate_injected, generate_run_to_failure, GroundTruth};

const SPLIT_SEED_TAG: u64 = 0x53_50_4c_49_54;
const LABEL_SEED_TAG: u64 = 0x4c_41_42_45_4c;

/// Waveforms plus ground truth when the source is synthetic.
pub struct LoadedSource {
    pub dataset_id: String,
    pub records: Vec<WaveformRecord>,
    pub truth: Vec<GroundTruth>,
}

pub fn load_source(cfg: &ExperimentConfig) -> Result<LoadedSource> {
    match &cfg.source {
        SourceConfig::Synthetic { dataset_id, bearings } => {
            let mut records = Vec::new();
            let mut truth = Vec::new();
            for b in bearings {
                let mut c = b.config.clone();
                c.seed = derive_seed(cfg.seed, c.seed);
                let (mut recs, t) = if c.degradation.is_some() {
                    generate_run_to_failure(&c)?
                } else {
                    generate_injected(&c)?
                };
                if let Some(n) = &b.nuisance {
                    recs = add_bearing_nuisance(&recs, &c.bearing_id, n.gain_db, n.freq_hz)?;
                }
                records.extend(recs);
                truth.push(t);
            }
            Ok(LoadedSource {
                dataset_id: dataset_id.clone(),
                records,
                truth,
            })
        }
        SourceConfig::Manifest { path, resample_hz } => {
            let mut manifest = DatasetManifest::load(path)?;
            manifest.sort();
            manifest.validate(true)?;
            let records = manifest
                .records
                .par_iter()
                .map(|e| {
                    let r = load_waveform(&manifest, e)?;
                    match resample_hz {
                        Some(rate) if *rate != r.sampling_rate_hz => downsample(&r, *rate),
                        _ => Ok(r),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LoadedSource {
                dataset_id: manifest.dataset_id.clone(),
                records,
                truth: Vec::new(),
            })
        }
    }
}

fn by_bearing<T, F: Fn(&T) -> &str>(items: &[T], id: F) -> BTreeMap<String, Vec<&T>> {
    let mut map: BTreeMap<String, Vec<&T>> = BTreeMap::new();
    for it in items {
        map.entry(id(it).to_string()).or_default().push(it);
    }
    map
}

/// Run the configured labeler and adapt the labels to the task.
pub fn label_source(
    cfg: &ExperimentConfig,
    source: &LoadedSource,
    rfft: Option<&[FeatureSample]>,
    labeling: &LabelingConfig,
    warnings: &mut Vec<String>,
) -> Result<Vec<LabelAssignment>> {
    let assignments: Vec<LabelAssignment> = match labeling {
        LabelingConfig::Declared => {
            let d = declared_from_records(&source.records)?;
            warnings.extend(d.warnings);
            d.assignments
        }
        LabelingConfig::Threshold { threshold_g, .. } => by_bearing(&source.records, |r| &r.bearing_id)
            .into_values()
            .map(|recs| {
                let mut recs: Vec<WaveformRecord> = recs.into_iter().cloned().collect();
                recs.sort_by_key(|r| r.seq_index);
                threshold_label(&recs, *threshold_g)
            })
            .collect::<Result<_>>()?,
        LabelingConfig::PcaKmeans { params, .. } => {
            let samples = rfft.ok_or_else(|| Error::InvalidInput("PCA labeling needs RFFT features".into()))?;
            let mut p = params.clone();
            p.seed = derive_seed(cfg.seed ^ LABEL_SEED_TAG, params.seed);
            let groups: Vec<Vec<FeatureSample>> = by_bearing(samples, |s| &s.bearing_id)
                .into_values()
                .map(|v| v.into_iter().cloned().collect())
                .collect();
            groups.par_iter().map(|g| pca_kmeans_label(g, &p)).collect::<Result<_>>()?
        }
    };
    for a in &assignments {
        warnings.extend(a.warnings.iter().map(|w| format!("{}: {w}", a.bearing_id)));
    }
    match cfg.task {
        Task::Binary => Ok(assignments.iter().map(LabelAssignment::binarize).collect()),
        Task::Multiclass => match labeling.fault_types() {
            None => Ok(assignments),
            Some("ground_truth") => {
                if source.truth.is_empty() {
                    return Err(Error::Config("fault_types \"ground_truth\" needs a synthetic source".into()));
                }
                let table = source
                    .truth
                    .iter()
                    .map(|t| (t.bearing_id.clone(), t.fault_type.label().to_string()))
                    .collect();
                apply_fault_types(&assignments, &table)
            }
            Some(spec) => apply_fault_types(&assignments, &load_fault_table(spec)?),
        },
    }
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn matrix(samples: &[FeatureSample], idx: &[usize]) -> Array2<f64> {
    let d = samples.first().map(|s| s.values.len()).unwrap_or(0);
    let mut x = Array2::zeros((idx.len(), d));
    for (r, &i) in idx.iter().enumerate() {
        for (c, v) in samples[i].values.iter().enumerate() {
            x[[r, c]] = *v;
        }
    }
    x
}

fn partitions_of(split: &SplitAssignment, keys: &[SampleKey], idx: &[usize]) -> Vec<Partition> {
    let mut seen = [false; 3];
    for &i in idx {
        if let Some(p) = split.get(&keys[i]) {
            seen[p.index()] = true;
        }
    }
    Partition::ALL.into_iter().filter(|p| seen[p.index()]).collect()
}

struct CellInputs<'a> {
    keys: &'a [SampleKey],
    labels: &'a [Label],
    split: &'a SplitAssignment,
    train: &'a [usize],
    val: &'a [usize],
    test: &'a [usize],
}

fn run_cell(
    cfg: &ExperimentConfig,
    index: usize,
    spec: &ModelSpec,
    family: FeatureFamily,
    samples: &[FeatureSample],
    inp: &CellInputs,
    model_dir: &Path,
) -> Result<(Cell, Vec<FitProvenance>)> {
    if inp.train.is_empty() {
        return Err(Error::InvalidInput("train partition is empty".into()));
    }
    if inp.test.is_empty() {
        return Err(Error::InvalidInput("test partition is empty".into()));
    }
    let mut spec = spec.clone();
    spec.seed = derive_seed(cfg.seed, spec.seed);
    let pick = |idx: &[usize]| -> Vec<Label> { idx.iter().map(|&i| inp.labels[i].clone()).collect() };
    let xtr = matrix(samples, inp.train);
    let ytr = pick(inp.train);
    let xva = matrix(samples, inp.val);
    let yva = pick(inp.val);
    let validation = (!inp.val.is_empty()).then(|| (xva.view(), yva.as_slice()));
    let model = fit_with_validation(&spec, xtr.view(), &ytr, validation)?;
    if cfg.save_models {
        let name = format!("{index:02}_{}_{}.json", spec.kind.short_name(), family);
        model.save(&model_dir.join(name))?;
    }
    let xte = matrix(samples, inp.test);
    let yte = pick(inp.test);
    let pred = model.predict(xte.view())?;
    let mut classes = model.vocabulary.clone();
    classes.extend(yte.iter().cloned());
    classes.sort();
    classes.dedup();
    let cm = confusion(&yte, &pred, &classes)?;
    let metrics = cfg.modes().into_iter().map(|m| score(&cm, m)).collect::<Result<Vec<_>>>()?;

    let owner = format!("{}/{}", spec.kind.short_name(), family);
    let train_parts = partitions_of(inp.split, inp.keys, inp.train);
    let mut prov = vec![
        FitProvenance {
            statistic: Statistic::Standardizer,
            owner: owner.clone(),
            partitions: train_parts.clone(),
        },
        FitProvenance {
            statistic: Statistic::Model,
            owner: owner.clone(),
            partitions: train_parts,
        },
    ];
    if model.info.best_epoch.is_some() {
        prov.push(FitProvenance {
            statistic: Statistic::EarlyStopping,
            owner,
            partitions: partitions_of(inp.split, inp.keys, inp.val),
        });
    }
    Ok((
        Cell {
            model: spec.kind,
            family,
            metrics,
            confusion: Some(cm),
            fit: Some(model.info),
            error: None,
        },
        prov,
    ))
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".into()
    }
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

pub fn features_path(out: &Path, family: FeatureFamily) -> PathBuf {
    out.join(format!("features_{family}.csv"))
}

/// Run the whole pipeline, persisting every intermediate under
/// `cfg.output_dir`. Each stage reads the previous stage's files back.
/// Stage errors before model fitting abort the run; model cells fail
/// independently of each other.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    mkdir(out)?;
    let model_dir = out.join("models");
    if cfg.save_models {
        mkdir(&model_dir)?;
    }
    let mut warnings = Vec::new();
    fs::write(out.join("config.json"), serde_json::to_string_pretty(cfg)?).map_err(|e| Error::io(out, e))?;

    let source = load_source(cfg)?;
    if source.records.is_empty() {
        return Err(Error::InvalidInput("the data source has no records".into()));
    }
    if !source.truth.is_empty() {
        let p = out.join("ground_truth.json");
        fs::write(&p, serde_json::to_string_pretty(&source.truth)?).map_err(|e| Error::io(&p, e))?;
    }

    // featurize every family; a family that fails only fails its cells
    let mut family_samples: BTreeMap<FeatureFamily, std::result::Result<Vec<FeatureSample>, String>> = BTreeMap::new();
    let mut needed = cfg.families.clone();
    let pca = matches!(cfg.labeling, LabelingConfig::PcaKmeans { .. });
    if pca && !needed.contains(&FeatureFamily::Rfft) {
        needed.push(FeatureFamily::Rfft);
    }
    for &fam in &needed {
        let path = features_path(out, fam);
        let res = features::extract(&source.records, fam, &cfg.window, &cfg.stft)
            .and_then(|s| write_features(&path, &s, fam, &cfg.window, &cfg.stft))
            .and_then(|_| read_features(&path))
            .map(|(_, s)| s);
        family_samples.insert(fam, res.map_err(|e| e.to_string()));
    }
    let Some(keys) = cfg
        .families
        .iter()
        .chain(&needed)
        .find_map(|f| family_samples[f].as_ref().ok())
        .map(|s| s.iter().map(FeatureSample::key).collect::<Vec<SampleKey>>())
    else {
        let first = family_samples.values().find_map(|r| r.as_ref().err()).cloned().unwrap_or_default();
        return Err(Error::InvalidInput(format!("feature extraction failed: {first}")));
    };
    for (fam, res) in family_samples.iter_mut() {
        if let Ok(s) = res {
            if s.len() != keys.len() || s.iter().zip(&keys).any(|(a, k)| a.key() != *k) {
                *res = Err(format!("{fam} samples do not line up with the other families"));
            }
        }
    }

    // labels
    let rfft = match family_samples.get(&FeatureFamily::Rfft) {
        Some(Ok(s)) => Some(s.as_slice()),
        Some(Err(e)) if pca => return Err(Error::InvalidInput(format!("RFFT features for labeling: {e}"))),
        _ => None,
    };
    let assignments = label_source(cfg, &source, rfft, &cfg.labeling, &mut warnings)?;
    let label_path = out.join("labels.csv");
    write_labels(&label_path, &assignments)?;
    let assignments = read_labels(&label_path)?;
    let index = LabelIndex::new(&assignments);
    let labels: Vec<Label> = keys
        .iter()
        .map(|k| {
            index
                .get(k)
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("no label for {} seq {} window {}", k.bearing_id, k.seq_index, k.window_index)))
        })
        .collect::<Result<_>>()?;

    // split
    let split = match cfg.split.strategy {
        SplitStrategy::ByBearing => split_by_bearing(&keys, &cfg.split.bearing_table()?)?,
        SplitStrategy::Random => split_random(&keys, cfg.split.fractions, derive_seed(cfg.seed, SPLIT_SEED_TAG))?,
    };
    let split_path = out.join("split.csv");
    write_split(&split_path, &split)?;
    let split = read_split(&split_path)?;
    warnings.extend(split.warnings.iter().cloned());
    let leakage = leakage_audit(&split, &keys);
    let train = split.indices(&keys, Partition::Train)?;
    let val = split.indices(&keys, Partition::Val)?;
    let test = split.indices(&keys, Partition::Test)?;

    let sample_counts = [(&train, Partition::Train), (&val, Partition::Val), (&test, Partition::Test)]
        .into_iter()
        .map(|(idx, partition)| {
            let mut per_class = BTreeMap::new();
            for &i in idx.iter() {
                *per_class.entry(labels[i].to_string()).or_insert(0) += 1;
            }
            PartitionCounts {
                partition,
                total: idx.len(),
                per_class,
            }
        })
        .collect();

    let mut provenance = Vec::new();
    let mut onsets = Vec::new();
    let truth: BTreeMap<&str, &GroundTruth> = source.truth.iter().map(|t| (t.bearing_id.as_str(), t)).collect();
    for a in &assignments {
        let idx: Vec<usize> = (0..keys.len()).filter(|&i| keys[i].bearing_id == a.bearing_id).collect();
        if a.method != crate::labeling::LabelMethod::Declared {
            provenance.push(FitProvenance {
                statistic: Statistic::Labeler,
                owner: a.bearing_id.clone(),
                partitions: partitions_of(&split, &keys, &idx),
            });
            onsets.push(BearingOnset {
                bearing_id: a.bearing_id.clone(),
                detected: a.onset_seq_index,
                truth: truth.get(a.bearing_id.as_str()).and_then(|t| t.onset_index),
                n_failure_windows: idx.iter().filter(|&&i| !labels[i].is_normal()).count(),
                n_windows: idx.len(),
            });
        }
    }

    if cfg.models.is_empty() {
        let w = "no model specs configured; the result grid is empty".to_string();
        log::warn!("{w}");
        warnings.push(w);
    }
    let inputs = CellInputs {
        keys: &keys,
        labels: &labels,
        split: &split,
        train: &train,
        val: &val,
        test: &test,
    };
    let jobs: Vec<(usize, &ModelSpec, FeatureFamily)> = cfg
        .models
        .iter()
        .enumerate()
        .flat_map(|(i, m)| cfg.families.iter().map(move |&f| (i, m, f)))
        .collect();
    let results: Vec<(Cell, Vec<FitProvenance>)> = jobs
        .par_iter()
        .map(|&(i, spec, fam)| {
            let failed = |reason: String| {
                log::warn!("cell {}/{fam} failed: {reason}", spec.kind.short_name());
                (Cell::failed(spec.kind, fam, reason), Vec::new())
            };
            match &family_samples[&fam] {
                Err(e) => failed(format!("feature extraction: {e}")),
                Ok(samples) => {
                    match catch_unwind(AssertUnwindSafe(|| run_cell(cfg, i, spec, fam, samples, &inputs, &model_dir))) {
                        Ok(Ok(r)) => r,
                        Ok(Err(e)) => failed(e.to_string()),
                        Err(p) => failed(format!("panic: {}", panic_message(p))),
                    }
                }
            }
        })
        .collect();
    let mut cells = Vec::with_capacity(results.len());
    for (c, p) in results {
        cells.push(c);
        provenance.extend(p);
    }

    let report = EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        name: cfg.name.clone(),
        dataset_id: source.dataset_id.clone(),
        task: cfg.task,
        split_strategy: cfg.split.strategy,
        labeling: cfg.labeling.name(),
        fingerprint: Fingerprint {
            config_hash: sha256_hex(&cfg.canonical_json()?),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        sample_counts,
        leakage,
        onsets,
        cells,
        provenance,
        warnings,
    };
    report.check_provenance()?;
    write_report(&report, out)?;
    Ok(report)
}

/// Write `report.json`, `report.md` and `report.csv` into `dir`.
pub fn write_report(report: &EvaluationReport, dir: &Path) -> Result<()> {
    for (name, fmt) in [
        ("report.json", ReportFormat::Json),
        ("report.md", ReportFormat::Markdown),
        ("report.csv", ReportFormat::Csv),
    ] {
        let p = dir.join(name);
        fs::write(&p, render_report(report, fmt)?).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}
