//! The five pipeline stages. Each reads the previous stage's artifacts from
//! the output directory and writes its own; all file writes happen on the
//! calling thread.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pdm_core::decision::Aggregation;
use pdm_core::features::{build_feature_matrix, FeatureMatrix};
use pdm_core::labelling::{labels, LabelScheme};
use pdm_core::run_store::{RunMeta, SyntheticGenerator};
use pdm_core::validation::{double_cv_sweep, plan_folds, FoldPlan, Preprocessor};
use rayon::prelude::*;

use crate::artifacts::{
    read_feature_manifest, read_features, read_indicators, read_json, write_alarms, write_features,
    write_indicators, write_json, write_report_csv, write_selected, ChosenParams, ModelDocument, ReportDocument,
    ReportEntry, FORMAT_VERSION,
};
use crate::config::ExperimentConfig;
use crate::dataset::{self, read_manifest, write_manifest, write_run, ManifestEntry};
use crate::error::{DataError, Result};

/// Where each stage puts its outputs.
#[derive(Debug, Clone)]
pub struct Layout {
    pub out: PathBuf,
}

impl Layout {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Layout { out: out.into() }
    }

    pub fn dataset(&self) -> PathBuf {
        self.out.join("dataset")
    }

    pub fn features(&self) -> PathBuf {
        self.out.join("features")
    }

    pub fn selected(&self) -> PathBuf {
        self.out.join("selected_features.csv")
    }

    pub fn cv(&self) -> PathBuf {
        self.out.join("cv")
    }

    pub fn fold_dir(&self, formulation: &str, fold: usize) -> PathBuf {
        self.cv().join(formulation).join(format!("fold_{fold:02}"))
    }

    pub fn report_csv(&self) -> PathBuf {
        self.out.join("report.csv")
    }

    pub fn report_json(&self) -> PathBuf {
        self.out.join("report.json")
    }

    pub fn tables(&self) -> PathBuf {
        self.out.join("tables")
    }

    pub fn traces(&self) -> PathBuf {
        self.out.join("traces")
    }
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(DataError::io(p))?;
    Ok(())
}

fn clear_dir(p: &Path) -> Result<()> {
    if p.exists() {
        fs::remove_dir_all(p).map_err(DataError::io(p))?;
    }
    mkdir(p)
}

/// Dataset to read: the configured path, else the generated one.
fn dataset_root(cfg: &ExperimentConfig, layout: &Layout) -> Result<PathBuf> {
    if let Some(p) = cfg.dataset_path() {
        return Ok(p);
    }
    let p = layout.dataset();
    if !p.join(dataset::MANIFEST).is_file() {
        return Err(DataError::StageDependencyMissing { what: "dataset", path: p, command: "generate" }.into());
    }
    Ok(p)
}

pub fn cmd_generate(cfg: &ExperimentConfig, layout: &Layout) -> Result<Vec<ManifestEntry>> {
    let d = &cfg.data;
    let generator = SyntheticGenerator::new(cfg.seed, d.n_corrective, d.n_preventive, d.profile.clone())?;
    let root = layout.dataset();
    clear_dir(&root)?;
    let mut entries = Vec::with_capacity(generator.len());
    for i in 0..generator.len() {
        let run = generator.run(i);
        run.validate()?;
        write_run(&root, &run)?;
        entries.push(ManifestEntry::from(&run));
    }
    write_manifest(&root, &entries)?;
    eprintln!(
        "generated {} runs ({} corrective, {} preventive) in {}",
        entries.len(),
        d.n_corrective,
        d.n_preventive,
        root.display()
    );
    Ok(entries)
}

/// Builds the feature matrices of every run, in manifest order.
pub fn extract_features(cfg: &ExperimentConfig, root: &Path) -> Result<Vec<FeatureMatrix>> {
    let entries = read_manifest(root)?;
    let geometry = cfg.geometry();
    let features: Vec<std::result::Result<FeatureMatrix, DataError>> = entries
        .par_iter()
        .map(|e| {
            let run = dataset::load_run(root, e)?;
            Ok(build_feature_matrix(&run, &geometry)?)
        })
        .collect();
    Ok(features.into_iter().collect::<std::result::Result<_, _>>()?)
}

pub fn cmd_extract(cfg: &ExperimentConfig, layout: &Layout, label: Option<&LabelScheme>) -> Result<Vec<FeatureMatrix>> {
    let root = dataset_root(cfg, layout)?;
    let features = extract_features(cfg, &root)?;
    let label_series = match label {
        Some(scheme) => {
            Some(features.iter().map(|fm| labels(&fm.meta, scheme)).collect::<std::result::Result<Vec<_>, _>>().map_err(DataError::from)?)
        }
        None => None,
    };
    let dir = layout.features();
    clear_dir(&dir)?;
    write_features(&dir, &features, label_series.as_deref())?;
    eprintln!(
        "extracted {} features for {} runs into {}",
        features.first().map_or(0, FeatureMatrix::n_cols),
        features.len(),
        dir.display()
    );
    Ok(features)
}

/// Feature selection on every run, for inspection. Cross-validation refits
/// the selection inside each training split.
pub fn cmd_select(cfg: &ExperimentConfig, layout: &Layout) -> Result<Vec<String>> {
    let features = read_features(&layout.features())?;
    let refs: Vec<&FeatureMatrix> = features.iter().collect();
    let (pre, scores) = Preprocessor::fit_scored(&refs, cfg.features.k, &cfg.pipeline())?;
    write_selected(&layout.selected(), pre.selected(), &scores)?;
    for (i, name) in pre.selected().iter().enumerate() {
        println!("{:>3}  {name}", i + 1);
    }
    Ok(pre.selected().to_vec())
}

fn fold_plan(cfg: &ExperimentConfig, metas: &[RunMeta]) -> Result<FoldPlan> {
    let corrective = metas.iter().filter(|m| m.is_corrective()).count();
    let n = cfg.validation.n_folds.unwrap_or(corrective);
    Ok(plan_folds(metas, n, cfg.seed)?)
}

fn metas_for_plan(cfg: &ExperimentConfig, layout: &Layout) -> Result<Vec<RunMeta>> {
    match read_feature_manifest(&layout.features()) {
        Ok(m) => Ok(m),
        Err(DataError::StageDependencyMissing { .. }) => {
            let root = dataset_root(cfg, layout)?;
            Ok(read_manifest(&root)?
                .into_iter()
                .map(|e| RunMeta {
                    id: e.id,
                    maintenance: e.maintenance,
                    duration_hours: (e.end_unix_s - e.start_unix_s) as f64 / 3600.0,
                })
                .collect())
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub plan: FoldPlan,
    pub entries: Vec<ReportEntry>,
}

pub fn cmd_run(cfg: &ExperimentConfig, layout: &Layout, dry_run: bool) -> Result<RunSummary> {
    let formulations = cfg.formulations()?;
    let aggregations = cfg.aggregations()?;
    let pipeline = cfg.pipeline();
    if dry_run {
        let metas = metas_for_plan(cfg, layout)?;
        let plan = fold_plan(cfg, &metas)?;
        println!(
            "{} runs, {} outer folds, seed {}",
            metas.len(),
            plan.len(),
            plan.seed
        );
        for (i, fold) in plan.folds.iter().enumerate() {
            println!("  fold {i:02}: {}", fold.join(" "));
        }
        for f in &formulations {
            let points = f.grid.points(&f.formulation)?;
            println!("  {:<14} {:>3} grid points", f.name(), points.len());
        }
        let names: Vec<String> = aggregations.iter().map(Aggregation::to_string).collect();
        println!("  aggregations: {}", names.join(" "));
        return Ok(RunSummary { plan, entries: Vec::new() });
    }

    let features = read_features(&layout.features())?;
    let metas: Vec<RunMeta> = features.iter().map(|fm| fm.meta.clone()).collect();
    let plan = fold_plan(cfg, &metas)?;
    let hours: BTreeMap<&str, &[f64]> = features.iter().map(|fm| (fm.run_id(), fm.hours.as_slice())).collect();
    let cv = layout.cv();
    clear_dir(&cv)?;
    write_json(&cv.join("plan.json"), &plan)?;

    let mut entries = Vec::new();
    for f in &formulations {
        let name = f.name();
        let results = double_cv_sweep(&features, &f.formulation, &f.grid, &aggregations, &pipeline, &plan)?;
        for fold in 0..plan.len() {
            let dir = layout.fold_dir(&name, fold);
            mkdir(&dir)?;
            let per_g: Vec<_> = results.iter().map(|r| &r.folds[fold]).collect();
            if let Some(p) = &per_g[0].pipeline {
                write_json(&dir.join("model.json"), &ModelDocument::new(p))?;
            }
            write_json(&dir.join("chosen_params.json"), &ChosenParams::new(&per_g))?;
            write_indicators(&dir.join("indicators.csv"), &per_g[0].test_indicators, |id| {
                hours.get(id).map_or_else(Vec::new, |h| h.to_vec())
            })?;
            for (g, r) in aggregations.iter().zip(&per_g) {
                let gdir = dir.join(g.to_string());
                mkdir(&gdir)?;
                write_alarms(&gdir.join("alarms.csv"), &r.outcomes)?;
            }
        }
        for r in &results {
            let e = ReportEntry::new(r);
            eprintln!(
                "{:<14} {:<12} FP {:>2}/{} TP {:>2}/{} B {:.3} F {:.3} final {:.3}",
                e.formulation,
                e.aggregation,
                e.report.fp,
                e.report.corrective + e.report.preventive,
                e.report.tp,
                e.report.corrective,
                e.report.business_mean,
                e.report.f_score,
                e.report.final_score
            );
            entries.push(e);
        }
    }
    write_report_csv(&layout.report_csv(), &entries)?;
    let doc = ReportDocument {
        format_version: FORMAT_VERSION,
        seed: cfg.seed,
        beta: cfg.scoring.beta,
        alpha: cfg.scoring.alpha,
        entries: entries.clone(),
    };
    write_json(&layout.report_json(), &doc)?;
    Ok(RunSummary { plan, entries })
}

/// Table label of an aggregation: `identity`, `MA 12h`, `EX 5D`, ...
pub fn aggregation_label(g: &Aggregation) -> String {
    let span = |h: usize| if h % 24 == 0 && h > 48 { format!("{}D", h / 24) } else { format!("{h}h") };
    match g {
        Aggregation::Identity => "identity".into(),
        Aggregation::Ma { hours } => format!("MA {}", span(*hours)),
        Aggregation::Ema { hours, exact: false } => format!("EX {}", span(*hours)),
        Aggregation::Ema { hours, exact: true } => format!("EX {} exact", span(*hours)),
    }
}

fn frac(k: usize, n: usize) -> String {
    format!("{k}/{n}")
}

fn table_row(label: String, e: &ReportEntry) -> Vec<String> {
    let r = &e.report;
    vec![
        label,
        frac(r.fp, r.corrective + r.preventive),
        frac(r.tp, r.corrective),
        format!("{:.3}", r.business_mean),
        format!("{:.3}", r.f_score),
        format!("{:.3}", r.final_score),
    ]
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = dataset::writer(path)?;
    w.write_record(header).map_err(dataset::csv_err(path))?;
    for r in rows {
        w.write_record(r).map_err(dataset::csv_err(path))?;
    }
    dataset::flush(w, path)?;
    Ok(())
}

fn print_table(title: &str, header: &[&str], rows: &[Vec<String>]) {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| -> String {
        cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ")
    };
    println!("{title}");
    println!("{}", line(header.to_vec()));
    for r in rows {
        println!("{}", line(r.iter().map(String::as_str).collect()));
    }
    println!();
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub formulation_rows: Vec<Vec<String>>,
    pub aggregation_tables: Vec<(String, Vec<Vec<String>>)>,
}

/// Renders comparison tables and indicator traces from stored results,
/// after checking every stored final score against its recomputation.
pub fn cmd_report(layout: &Layout) -> Result<ReportSummary> {
    let path = layout.report_json();
    if !path.is_file() {
        return Err(DataError::StageDependencyMissing { what: "cross-validation results", path, command: "run" }.into());
    }
    let doc: ReportDocument = read_json(&path)?;
    for e in &doc.entries {
        let v = e.recomputed_final(doc.beta, doc.alpha)?;
        if v.to_bits() != e.report.final_score.to_bits() {
            return Err(DataError::Inconsistent(format!(
                "{} / {}: stored final score {} but counts give {v}",
                e.formulation, e.aggregation, e.report.final_score
            ))
            .into());
        }
    }

    let mut order: Vec<&str> = Vec::new();
    for e in &doc.entries {
        if !order.contains(&e.formulation.as_str()) {
            order.push(&e.formulation);
        }
    }
    let tables = layout.tables();
    clear_dir(&tables)?;
    let header = ["formulation", "aggregation", "FP", "TP", "B_score", "F_score", "final_score"];
    let mut formulation_rows = Vec::new();
    let mut aggregation_tables = Vec::new();
    for name in &order {
        let rows: Vec<&ReportEntry> = doc.entries.iter().filter(|e| e.formulation == *name).collect();
        let level1 = rows.iter().find(|e| e.aggregation == "identity").unwrap_or(&rows[0]);
        let mut row = table_row(name.to_string(), level1);
        row.insert(1, level1.aggregation.clone());
        formulation_rows.push(row);

        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|e| {
                let label = e.aggregation.parse::<Aggregation>().map_or_else(|_| e.aggregation.clone(), |g| aggregation_label(&g));
                table_row(label, e)
            })
            .collect();
        let agg_header = ["aggregation", "FP", "TP", "B_score", "F_score", "final_score"];
        write_table(&tables.join(format!("aggregations_{name}.csv")), &agg_header, &table)?;
        print_table(&format!("{name} by aggregation"), &agg_header, &table);
        aggregation_tables.push((name.to_string(), table));
    }
    write_table(&tables.join("formulations.csv"), &header, &formulation_rows)?;
    print_table("formulations", &header, &formulation_rows);

    let traces = layout.traces();
    clear_dir(&traces)?;
    for name in &order {
        write_traces(layout, &traces, name, &doc)?;
    }
    Ok(ReportSummary { formulation_rows, aggregation_tables })
}

/// `traces/<f>.csv` holds the raw indicators of every test run with its
/// fold; `traces/<f>_thresholds.csv` the tuned level-2 threshold of every
/// fold and aggregation.
fn write_traces(layout: &Layout, dir: &Path, name: &str, doc: &ReportDocument) -> Result<()> {
    let entries: Vec<&ReportEntry> = doc.entries.iter().filter(|e| e.formulation == name).collect();
    let n_folds = entries[0].folds.len();
    let path = dir.join(format!("{name}.csv"));
    let mut w = dataset::writer(&path)?;
    let mut wrote_header = false;
    for fold in 0..n_folds {
        let src = layout.fold_dir(name, fold).join("indicators.csv");
        if !src.is_file() {
            return Err(DataError::StageDependencyMissing { what: "fold indicators", path: src, command: "run" }.into());
        }
        for (ri, hours) in read_indicators(&src)? {
            if !wrote_header {
                let mut h = vec!["run_id".to_string(), "fold".to_string(), "hours_since_start".to_string()];
                h.extend((0..ri.series.len()).map(|k| format!("h{k}")));
                w.write_record(&h).map_err(dataset::csv_err(&path))?;
                wrote_header = true;
            }
            for (t, hour) in hours.iter().enumerate() {
                let mut rec = vec![ri.run_id.clone(), fold.to_string(), dataset::fmt_f64(*hour)];
                rec.extend(ri.series.iter().map(|s| dataset::fmt_f64(s[t])));
                w.write_record(&rec).map_err(dataset::csv_err(&path))?;
            }
        }
    }
    if !wrote_header {
        w.write_record(["run_id", "fold", "hours_since_start"]).map_err(dataset::csv_err(&path))?;
    }
    dataset::flush(w, &path)?;

    let mut rows = Vec::new();
    for e in &entries {
        for f in &e.folds {
            rows.push(vec![
                f.fold.to_string(),
                e.aggregation.clone(),
                f.rule.and_then(|r| r.threshold()).map(dataset::fmt_f64).unwrap_or_default(),
            ]);
        }
    }
    write_table(&dir.join(format!("{name}_thresholds.csv")), &["fold", "aggregation", "threshold"], &rows)
}
