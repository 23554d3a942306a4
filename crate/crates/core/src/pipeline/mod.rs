//! End-to-end runs behind the `bandsel` subcommands.
//!
//! Each command loads the scene, masks background, standardizes per band,
//! builds the method's features, and writes its artifacts plus a manifest
//! recording every effective setting.

mod config;
pub mod import;

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{Method, RunConfig, DEFAULT_PCA_K, DEFAULT_SEED};

use crate::bandcorr::{
    average_band_correlation, correlation_matrix, select_bands_by_abc, BandSelection,
    CorrelationMatrix, ExtractBands,
};
use crate::baselines::{pca_fit, pca_transform, sb_select};
use crate::classify::{stratified_split, stratified_subsample, svm_predict, svm_train, Kernel};
use crate::cube::{load_cube, load_ground_truth, save_label_raster, LabelRaster};
use crate::error::{Error, Result, StageExt};
use crate::evaluate::{confusion, render_map, report, EvaluationReport, Palette};
use crate::preprocess::{mask_background, standardize, BandStats, PixelMatrix};

const TOOL: &str = "bandsel";

/// Audit record written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: RunConfig,
    pub conventions: BTreeMap<&'static str, &'static str>,
    pub timings_ms: BTreeMap<String, f64>,
    pub image_width: usize,
    pub image_height: usize,
    pub n_pixels: usize,
    pub n_bands: usize,
    pub n_classes: usize,
    pub zero_variance_bands: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_band_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_bands: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sb_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pca_cumulative_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolved_kernel: Option<Kernel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_support_vectors: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svm_converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overall_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

fn conventions() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("preprocessing_order", "mask background, then standardize"),
        (
            "standardization",
            "per-band z-score over labeled pixels, population variance",
        ),
        (
            "zero_variance_bands",
            "kept as zeros; correlation against them is 0",
        ),
        (
            "threshold_rule",
            "select band when ABC < threshold (strict)",
        ),
        ("split", "stratified per class, SplitMix64 shuffle"),
        (
            "multiclass",
            "one-vs-rest, argmax decision value, ties to lowest label",
        ),
        (
            "sb_method",
            "sb-greedy: max-min 1-|r| dissimilarity seeded at lowest ABC",
        ),
    ])
}

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn new() -> Self {
        Timer(BTreeMap::new())
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let ms = start.elapsed().as_secs_f64() * 1e3;
        *self.0.entry(stage.to_string()).or_default() += ms;
        out
    }
}

/// Loaded, masked and standardized scene, with a lazily built correlation
/// matrix shared by the methods that need it.
pub struct Prepared {
    pub pixels: PixelMatrix,
    pub stats: BandStats,
    pub n_classes: usize,
    pub class_names: Option<Vec<String>>,
    correlation: OnceCell<CorrelationMatrix>,
}

impl Prepared {
    pub fn from_parts(pixels: PixelMatrix, n_classes: usize) -> Result<Self> {
        let (pixels, stats) = standardize(&pixels).stage("standardize")?;
        Ok(Self {
            pixels,
            stats,
            n_classes,
            class_names: None,
            correlation: OnceCell::new(),
        })
    }

    pub fn correlation(&self) -> Result<&CorrelationMatrix> {
        if let Some(cm) = self.correlation.get() {
            return Ok(cm);
        }
        let cm = correlation_matrix(&self.pixels).stage("correlation")?;
        Ok(self.correlation.get_or_init(|| cm))
    }

    /// ABC threshold selection over all bands.
    pub fn abc_selection(&self, threshold: f64) -> Result<BandSelection> {
        let abc = average_band_correlation(self.correlation()?);
        select_bands_by_abc(&abc, threshold).stage("select")
    }
}

fn prepare(config: &RunConfig, timer: &mut Timer) -> Result<Prepared> {
    let cube = timer.time("load", || load_cube(config.cube_path()?).stage("load cube"))?;
    let gt = timer.time("load", || {
        load_ground_truth(config.ground_truth_path()?).stage("load ground truth")
    })?;
    let pixels = timer.time("mask", || mask_background(&cube, &gt).stage("mask"))?;
    let mut prepared = timer.time("standardize", || {
        Prepared::from_parts(pixels, gt.n_classes())
    })?;
    prepared.class_names = gt.class_names().map(<[String]>::to_vec);
    Ok(prepared)
}

fn manifest(command: &'static str, config: &RunConfig, prepared: &Prepared) -> RunManifest {
    let (w, h) = prepared.pixels.image_size();
    RunManifest {
        tool: TOOL,
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: config.clone(),
        conventions: conventions(),
        timings_ms: BTreeMap::new(),
        image_width: w,
        image_height: h,
        n_pixels: prepared.pixels.n_pixels(),
        n_bands: prepared.pixels.n_bands(),
        n_classes: prepared.n_classes,
        zero_variance_bands: prepared.stats.zero_variance_bands(),
        selected_band_count: None,
        selected_bands: None,
        sb_k: None,
        pca_cumulative_variance: None,
        resolved_kernel: None,
        train_size: None,
        test_size: None,
        n_support_vectors: None,
        svm_converged: None,
        overall_accuracy: None,
        kappa: None,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    write_text(path, &(json + "\n"))
}

pub struct SelectOutcome {
    pub selection: BandSelection,
    pub manifest: RunManifest,
}

/// Correlation → ABC → threshold selection; writes `selection.txt`,
/// `selection.json`, `abc.csv`, optionally `correlation.csv`, and
/// `select_manifest.json`.
pub fn cmd_select(config: &RunConfig) -> Result<SelectOutcome> {
    config.validate()?;
    let mut timer = Timer::new();
    let prepared = prepare(config, &mut timer)?;
    let cm = timer.time("correlation", || prepared.correlation())?;
    let selection = timer.time("select", || prepared.abc_selection(config.threshold))?;

    let out = &config.out_dir;
    ensure_dir(out)?;
    selection.write(out.join("selection.txt"))?;
    if let Some(abc) = &selection.abc {
        write_text(out.join("abc.csv"), &abc.to_csv())?;
    }
    if config.emit_correlation_csv {
        write_text(out.join("correlation.csv"), &cm.to_csv())?;
    }

    let mut m = manifest("select", config, &prepared);
    m.selected_band_count = Some(selection.len());
    m.selected_bands = Some(selection.selected.clone());
    m.timings_ms = timer.0;
    write_json(out.join("select_manifest.json"), &m)?;
    Ok(SelectOutcome {
        selection,
        manifest: m,
    })
}

/// Features for one method plus what the manifest should record about them.
pub struct Features {
    pub matrix: PixelMatrix,
    pub selection: Option<BandSelection>,
    pub pca_cumulative_variance: Option<f64>,
    pub sb_k: Option<usize>,
}

/// Builds a method's feature matrix from prepared data.
pub fn build_features(prepared: &Prepared, method: Method, config: &RunConfig) -> Result<Features> {
    let abc_selection = || -> Result<BandSelection> {
        match &config.selection {
            Some(path) => {
                let sel = BandSelection::read(path).stage("read selection")?;
                if sel
                    .selected
                    .last()
                    .is_some_and(|&b| b >= prepared.pixels.n_bands())
                {
                    return Err(Error::BandOutOfRange {
                        index: *sel.selected.last().unwrap(),
                        n_bands: prepared.pixels.n_bands(),
                    })
                    .stage("read selection");
                }
                Ok(sel)
            }
            None => prepared.abc_selection(config.threshold),
        }
    };
    match method {
        Method::Abc => {
            let sel = abc_selection()?;
            let matrix = prepared.pixels.extract(&sel.selected).stage("extract")?;
            Ok(Features {
                matrix,
                selection: Some(sel),
                pca_cumulative_variance: None,
                sb_k: None,
            })
        }
        Method::Pca => {
            let model = pca_fit(&prepared.pixels, config.pca_k).stage("pca")?;
            let matrix = pca_transform(&prepared.pixels, &model).stage("pca")?;
            Ok(Features {
                matrix,
                selection: None,
                pca_cumulative_variance: Some(model.cumulative_variance_ratio),
                sb_k: None,
            })
        }
        Method::Sb => {
            let k = match config.sb_k {
                Some(k) => k,
                None => abc_selection()?.len(),
            };
            let sel = sb_select(prepared.correlation()?, k).stage("sb select")?;
            let matrix = prepared.pixels.extract(&sel.selected).stage("extract")?;
            Ok(Features {
                matrix,
                selection: Some(sel),
                pca_cumulative_variance: None,
                sb_k: Some(k),
            })
        }
    }
}

pub struct Classification {
    pub report: EvaluationReport,
    /// Test-set predictions scattered to image positions; everything else 0.
    pub test_map: LabelRaster,
    /// Predictions for every labeled pixel, when requested.
    pub full_map: Option<LabelRaster>,
    pub kernel: Kernel,
    pub train_size: usize,
    pub test_size: usize,
    pub n_support_vectors: usize,
    pub converged: bool,
}

fn scatter(template: &PixelMatrix, predictions: &[u16]) -> LabelRaster {
    let (w, h) = template.image_size();
    let mut labels = vec![0u16; w * h];
    for (&(r, c), &p) in template.coords().iter().zip(predictions) {
        labels[r * w + c] = p;
    }
    LabelRaster {
        width: w,
        height: h,
        labels,
        class_names: None,
    }
}

/// Split, train, predict the held-out pixels and score them.
pub fn classify_features(
    features: &PixelMatrix,
    n_classes: usize,
    method: Method,
    config: &RunConfig,
) -> Result<Classification> {
    let split =
        stratified_split(features.labels(), config.train_fraction, config.seed).stage("split")?;
    let train_rows = match config.svm_subsample {
        Some(cap) => stratified_subsample(&split.train, features.labels(), cap, config.seed),
        None => split.train.clone(),
    };
    let train = features.subset(&train_rows);
    let test = features.subset(&split.test);
    let model = svm_train(&train, train.labels(), &config.svm).stage("train")?;
    let predicted = svm_predict(&model, &test).stage("predict")?;
    let cm = confusion(test.labels(), &predicted, n_classes).stage("evaluate")?;
    let report = report(&cm).stage("evaluate")?.with_method(method.tag());
    let full_map = if config.full_map {
        let all = svm_predict(&model, features).stage("predict")?;
        Some(scatter(features, &all))
    } else {
        None
    };
    Ok(Classification {
        report,
        test_map: scatter(&test, &predicted),
        full_map,
        kernel: model.kernel,
        train_size: train_rows.len(),
        test_size: split.test.len(),
        n_support_vectors: model.n_support,
        converged: model.converged(),
    })
}

pub struct ClassifyOutcome {
    pub classification: Classification,
    pub features: Features,
    pub manifest: RunManifest,
}

fn write_classification(
    out: &Path,
    method: Method,
    c: &Classification,
    class_names: Option<&[String]>,
) -> Result<()> {
    let tag = method.tag();
    write_json(out.join(format!("{tag}_report.json")), &c.report)?;
    write_text(out.join(format!("{tag}_report.txt")), &c.report.to_table())?;
    let palette = Palette::default();
    let mut test_map = c.test_map.clone();
    test_map.class_names = class_names.map(<[String]>::to_vec);
    save_label_raster(&test_map, out.join(format!("{tag}_predictions.hdr")))?;
    render_map(&test_map, &palette, out.join(format!("{tag}_map.png"))).stage("render")?;
    if let Some(full) = &c.full_map {
        save_label_raster(full, out.join(format!("{tag}_full_predictions.hdr")))?;
        render_map(full, &palette, out.join(format!("{tag}_full_map.png"))).stage("render")?;
    }
    Ok(())
}

/// Full classification run for `config.method`; writes
/// `<method>_report.{json,txt}`, `<method>_predictions.{hdr,raw}`,
/// `<method>_map.png` (plus full-map variants) and
/// `<method>_manifest.json`.
pub fn cmd_classify(config: &RunConfig) -> Result<ClassifyOutcome> {
    config.validate()?;
    let mut timer = Timer::new();
    let prepared = prepare(config, &mut timer)?;
    let features = timer.time("features", || {
        build_features(&prepared, config.method, config)
    })?;
    let classification = timer.time("classify", || {
        classify_features(&features.matrix, prepared.n_classes, config.method, config)
    })?;

    let out = &config.out_dir;
    ensure_dir(out)?;
    timer.time("write", || {
        write_classification(
            out,
            config.method,
            &classification,
            prepared.class_names.as_deref(),
        )
    })?;

    let mut m = manifest("classify", config, &prepared);
    fill_manifest(&mut m, &features, &classification);
    m.timings_ms = timer.0;
    write_json(out.join(format!("{}_manifest.json", config.method)), &m)?;
    Ok(ClassifyOutcome {
        classification,
        features,
        manifest: m,
    })
}

fn fill_manifest(m: &mut RunManifest, f: &Features, c: &Classification) {
    if let Some(sel) = &f.selection {
        m.selected_band_count = Some(sel.len());
        m.selected_bands = Some(sel.selected.clone());
    }
    m.sb_k = f.sb_k;
    m.pca_cumulative_variance = f.pca_cumulative_variance;
    m.resolved_kernel = Some(c.kernel);
    m.train_size = Some(c.train_size);
    m.test_size = Some(c.test_size);
    m.n_support_vectors = Some(c.n_support_vectors);
    m.svm_converged = Some(c.converged);
    m.overall_accuracy = Some(c.report.overall_accuracy);
    m.kappa = Some(c.report.kappa);
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodResult {
    pub method: Method,
    pub feature_count: usize,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub overall_accuracy: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub seed: u64,
    pub abc_band_count: usize,
    pub sb_k: usize,
    pub pca_k: usize,
    pub pca_cumulative_variance: f64,
    pub results: Vec<MethodResult>,
    pub seed_sweep: Vec<SeedSummary>,
}

impl Comparison {
    pub fn result(&self, method: Method) -> Option<&MethodResult> {
        self.results.iter().find(|r| r.method == method)
    }

    /// Side-by-side PCA / SB / PROPOSED table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let name = |m: Method| match m {
            Method::Pca => "PCA",
            Method::Sb => "SB",
            Method::Abc => "PROPOSED",
        };
        let _ = write!(s, "{:>6}", "");
        for r in &self.results {
            let _ = write!(s, "  {:<24}", name(r.method));
        }
        let _ = writeln!(s);
        let _ = write!(s, "{:>6}", "CLASS");
        for _ in &self.results {
            let _ = write!(s, "  {:>9} {:>6} {:>6} ", "PRECISION", "RECALL", "F1");
        }
        let _ = writeln!(s);
        let n_classes = self.results.first().map_or(0, |r| r.report.classes.len());
        for c in 0..n_classes {
            let _ = write!(s, "{:>6}", c + 1);
            for r in &self.results {
                let m = &r.report.classes[c];
                let _ = write!(s, "  {:>9.2} {:>6.2} {:>6.2} ", m.precision, m.recall, m.f1);
            }
            let _ = writeln!(s);
        }
        let _ = write!(s, "{:>6}", "OA");
        for r in &self.results {
            let _ = write!(s, "  {:<24.2}", r.report.overall_accuracy);
        }
        let _ = writeln!(s);
        let _ = write!(s, "{:>6}", "KAPPA");
        for r in &self.results {
            let _ = write!(s, "  {:<24.2}", r.report.kappa);
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "\nseed {} | proposed bands {} | SB bands {} (sb-greedy stand-in) | PCA k {} ({:.2}% variance)",
            self.seed,
            self.abc_band_count,
            self.sb_k,
            self.pca_k,
            100.0 * self.pca_cumulative_variance
        );
        if self.seed_sweep.len() > 1 {
            let _ = writeln!(s, "\nseed sweep (OA):");
            for sw in &self.seed_sweep {
                let cols: Vec<String> = sw
                    .overall_accuracy
                    .iter()
                    .map(|(m, oa)| format!("{m} {oa:.2}"))
                    .collect();
                let _ = writeln!(s, "  seed {:>6}: {}", sw.seed, cols.join("  "));
            }
        }
        s
    }
}

/// Merges per-method configs into one base config and a method list.
///
/// A single config runs all three methods. Several configs must agree on
/// dataset, seed and split fraction; otherwise the comparison is refused.
fn compare_plan(configs: &[RunConfig]) -> Result<(RunConfig, Vec<(Method, RunConfig)>)> {
    let Some(first) = configs.first() else {
        return Err(Error::InvalidParameter(
            "compare needs at least one config".into(),
        ));
    };
    if configs.len() == 1 {
        let plan = Method::ALL
            .iter()
            .map(|&m| {
                (
                    m,
                    RunConfig {
                        method: m,
                        ..first.clone()
                    },
                )
            })
            .collect();
        return Ok((first.clone(), plan));
    }
    for c in &configs[1..] {
        if c.seed != first.seed {
            return Err(Error::InvalidParameter(format!(
                "configs use different seeds ({} vs {}); comparison would be invalid",
                first.seed, c.seed
            )));
        }
        if c.cube != first.cube || c.ground_truth != first.ground_truth {
            return Err(Error::InvalidParameter(
                "configs use different datasets".into(),
            ));
        }
        if c.train_fraction != first.train_fraction {
            return Err(Error::InvalidParameter(
                "configs use different train fractions".into(),
            ));
        }
    }
    let mut plan: Vec<(Method, RunConfig)> = Vec::new();
    for c in configs {
        if plan.iter().any(|(m, _)| *m == c.method) {
            return Err(Error::InvalidParameter(format!(
                "method {} given twice",
                c.method
            )));
        }
        plan.push((c.method, c.clone()));
    }
    plan.sort_by_key(|(m, _)| Method::ALL.iter().position(|x| x == m));
    let base = plan
        .iter()
        .find(|(m, _)| *m == Method::Abc)
        .map_or_else(|| first.clone(), |(_, c)| c.clone());
    Ok((base, plan))
}

/// Runs every method on one shared split and tabulates them side by side.
/// Extra `sweep_seeds` rerun the split and SVM per seed and report OA only.
pub fn cmd_compare(configs: &[RunConfig], sweep_seeds: &[u64]) -> Result<Comparison> {
    let (base, plan) = compare_plan(configs)?;
    for (_, c) in &plan {
        c.validate()?;
    }
    let mut timer = Timer::new();
    let prepared = prepare(&base, &mut timer)?;
    let abc_band_count = match &base.selection {
        Some(p) => BandSelection::read(p).stage("read selection")?.len(),
        None => prepared.abc_selection(base.threshold)?.len(),
    };

    let out = &base.out_dir;
    ensure_dir(out)?;
    let mut results = Vec::new();
    let mut features_by_method = Vec::new();
    let mut sb_k = abc_band_count;
    let mut pca = (base.pca_k, 0.0);
    for (method, cfg) in &plan {
        let mut cfg = cfg.clone();
        if *method == Method::Sb && cfg.sb_k.is_none() {
            cfg.sb_k = Some(abc_band_count);
        }
        let features = build_features(&prepared, *method, &cfg)?;
        if let Some(k) = features.sb_k {
            sb_k = k;
        }
        if let Some(v) = features.pca_cumulative_variance {
            pca = (cfg.pca_k, v);
        }
        let c = classify_features(&features.matrix, prepared.n_classes, *method, &cfg)?;
        write_classification(out, *method, &c, prepared.class_names.as_deref())?;
        results.push(MethodResult {
            method: *method,
            feature_count: features.matrix.n_bands(),
            report: c.report,
        });
        features_by_method.push((features, cfg));
    }

    let mut seed_sweep = vec![SeedSummary {
        seed: base.seed,
        overall_accuracy: results
            .iter()
            .map(|r| (r.method.tag().to_string(), r.report.overall_accuracy))
            .collect(),
    }];
    for &seed in sweep_seeds.iter().filter(|&&s| s != base.seed) {
        let mut oa = BTreeMap::new();
        for ((features, cfg), r) in features_by_method.iter().zip(&results) {
            let cfg = RunConfig {
                seed,
                ..cfg.clone()
            };
            let c = classify_features(&features.matrix, prepared.n_classes, r.method, &cfg)?;
            oa.insert(r.method.tag().to_string(), c.report.overall_accuracy);
        }
        seed_sweep.push(SeedSummary {
            seed,
            overall_accuracy: oa,
        });
    }

    let comparison = Comparison {
        seed: base.seed,
        abc_band_count,
        sb_k,
        pca_k: pca.0,
        pca_cumulative_variance: pca.1,
        results,
        seed_sweep,
    };
    write_text(out.join("comparison.txt"), &comparison.to_table())?;
    write_json(out.join("comparison.json"), &comparison)?;
    Ok(comparison)
}
