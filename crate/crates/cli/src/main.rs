//! `bandsel`: command-line front end for correlation-based band selection.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hsi_bandsel::cube::{load_label_raster, save_cube, save_ground_truth, SyntheticSpec};
use hsi_bandsel::pipeline::import::{
    import_cube, import_ground_truth, RawDims, RawLayout, RawType,
};
use hsi_bandsel::pipeline::{cmd_classify, cmd_compare, cmd_select, RunConfig};
use hsi_bandsel::{render_map, synthesize_cube, Error, ErrorKind, Palette, Result};

#[derive(Parser)]
#[command(
    name = "bandsel",
    version,
    about = "Correlation-based hyperspectral band selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an external raw cube (and optional label raster) to the native format.
    Import(ImportArgs),
    /// Write a seeded synthetic cube, ground truth and matching config.
    Synth(SynthArgs),
    /// Compute correlations, ABC scores and the thresholded band selection.
    Select(RunArgs),
    /// Train and evaluate an SVM on one method's features.
    Classify(RunArgs),
    /// Run PCA, SB and the proposed selection on one split and tabulate them.
    Compare(CompareArgs),
    /// Render a label raster as a PNG map.
    Render(RenderArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

/// Every flag overrides the config value of the same name.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    cube: Option<String>,
    #[arg(long = "ground-truth")]
    ground_truth: Option<String>,
    /// abc, pca or sb.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long = "pca-k")]
    pca_k: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "train-fraction")]
    train_fraction: Option<String>,
    /// linear or rbf.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long = "c")]
    c: Option<String>,
    /// RBF width; `auto` derives it from the training features.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    tolerance: Option<String>,
    #[arg(long = "max-iterations")]
    max_iterations: Option<String>,
    #[arg(long = "svm-cache-mb")]
    svm_cache_mb: Option<String>,
    /// Stratified cap on training pixels.
    #[arg(long = "svm-subsample")]
    svm_subsample: Option<String>,
    #[arg(long = "out-dir")]
    out_dir: Option<String>,
    /// Saved selection file to use instead of recomputing it.
    #[arg(long)]
    selection: Option<String>,
    #[arg(long = "sb-k")]
    sb_k: Option<String>,
    #[arg(long = "emit-correlation-csv")]
    emit_correlation_csv: bool,
    #[arg(long = "full-map")]
    full_map: bool,
}

impl Overrides {
    fn apply(&self, config: &mut RunConfig) -> Result<()> {
        let pairs = [
            ("cube", &self.cube),
            ("ground_truth", &self.ground_truth),
            ("method", &self.method),
            ("threshold", &self.threshold),
            ("pca_k", &self.pca_k),
            ("seed", &self.seed),
            ("train_fraction", &self.train_fraction),
            ("kernel", &self.kernel),
            ("c", &self.c),
            ("gamma", &self.gamma),
            ("tolerance", &self.tolerance),
            ("max_iterations", &self.max_iterations),
            ("svm_cache_mb", &self.svm_cache_mb),
            ("svm_subsample", &self.svm_subsample),
            ("out_dir", &self.out_dir),
            ("selection", &self.selection),
            ("sb_k", &self.sb_k),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        if self.emit_correlation_csv {
            config.emit_correlation_csv = true;
        }
        if self.full_map {
            config.full_map = true;
        }
        Ok(())
    }
}

#[derive(Args)]
struct CompareArgs {
    /// One config for all methods, or one per method (repeatable).
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Extra seeds for an OA sensitivity sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ImportArgs {
    /// Raw cube file.
    #[arg(long)]
    raw: PathBuf,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long)]
    bands: usize,
    /// u8, u16, i16, f32 or f64 (little endian).
    #[arg(long, default_value = "u16")]
    dtype: String,
    /// bsq or bip.
    #[arg(long, default_value = "bsq")]
    interleave: String,
    /// Output cube header.
    #[arg(long)]
    out: PathBuf,
    /// Raw label raster to import alongside.
    #[arg(long = "gt-raw")]
    gt_raw: Option<PathBuf>,
    #[arg(long = "gt-dtype", default_value = "u8")]
    gt_dtype: String,
    /// Output ground-truth header.
    #[arg(long = "gt-out")]
    gt_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON synthetic spec; the built-in demo scene when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long = "out-dir", default_value = "synthetic")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Label raster header (predictions or ground truth).
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Text palette, one `r,g,b` line per class starting at label 1.
    #[arg(long)]
    palette: Option<PathBuf>,
}

fn run_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut config)?;
    config.validate()?;
    Ok(config)
}

fn read_palette(path: &Path) -> Result<Palette> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut colors = Vec::new();
    for line in text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        let parts: Vec<&str> = line
            .split([',', ' ', '\t'])
            .filter(|s| !s.is_empty())
            .collect();
        let rgb: Option<Vec<u8>> = parts.iter().map(|p| p.parse().ok()).collect();
        match rgb.as_deref() {
            Some(&[r, g, b]) => colors.push([r, g, b]),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "bad palette line `{line}`"
                )))
            }
        }
    }
    Ok(Palette(colors))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Import(a) => {
            let ty: RawType = a.dtype.parse()?;
            let layout: RawLayout = a.interleave.parse()?;
            let dims = RawDims {
                width: a.width,
                height: a.height,
                bands: a.bands,
            };
            let cube = import_cube(&a.raw, dims, ty, layout)?;
            save_cube(&cube, &a.out)?;
            println!("wrote {}", a.out.display());
            match (a.gt_raw, a.gt_out) {
                (Some(raw), Some(out)) => {
                    let gt = import_ground_truth(&raw, a.width, a.height, a.gt_dtype.parse()?)?;
                    save_ground_truth(&gt, &out)?;
                    println!("wrote {} ({} classes)", out.display(), gt.n_classes());
                }
                (None, None) => {}
                _ => {
                    return Err(Error::InvalidParameter(
                        "--gt-raw and --gt-out must be given together".into(),
                    ))
                }
            }
        }
        Command::Synth(a) => {
            let spec = match &a.spec {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    serde_json::from_str::<SyntheticSpec>(&text)
                        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", p.display())))?
                }
                None => SyntheticSpec::demo(),
            };
            let (cube, gt) = synthesize_cube(&spec, a.seed)?;
            std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
            save_cube(&cube, a.out_dir.join("synthetic.hdr"))?;
            save_ground_truth(&gt, a.out_dir.join("synthetic_gt.hdr"))?;
            let cfg = a.out_dir.join("synthetic.cfg");
            let text = format!(
                "# generated by bandsel synth\ncube = synthetic.hdr\nground_truth = synthetic_gt.hdr\nseed = {}\nout_dir = out\n",
                a.seed
            );
            std::fs::write(&cfg, text).map_err(|e| Error::io(&cfg, e))?;
            println!(
                "wrote {} ({}x{}, {} bands, {} classes)",
                a.out_dir.display(),
                cube.width(),
                cube.height(),
                cube.n_bands(),
                gt.n_classes()
            );
        }
        Command::Select(a) => {
            let config = run_config(a.config.as_deref(), &a.overrides)?;
            let out = cmd_select(&config)?;
            println!(
                "selected {} of {} bands at threshold {}: {:?}",
                out.selection.len(),
                out.selection.n_bands,
                config.threshold,
                out.selection.selected
            );
        }
        Command::Classify(a) => {
            let config = run_config(a.config.as_deref(), &a.overrides)?;
            let out = cmd_classify(&config)?;
            print!("{}", out.classification.report.to_table());
            if !out.classification.converged {
                eprintln!("warning: SVM hit the iteration cap before converging");
            }
        }
        Command::Compare(a) => {
            let configs = if a.config.is_empty() {
                vec![run_config(None, &a.overrides)?]
            } else {
                a.config
                    .iter()
                    .map(|p| run_config(Some(p), &a.overrides))
                    .collect::<Result<Vec<_>>>()?
            };
            let comparison = cmd_compare(&configs, &a.seeds)?;
            print!("{}", comparison.to_table());
        }
        Command::Render(a) => {
            let raster = load_label_raster(&a.labels)?;
            let palette = match &a.palette {
                Some(p) => read_palette(p)?,
                None => Palette::default(),
            };
            render_map(&raster, &palette, &a.out)?;
            println!("wrote {}", a.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            })
        }
    }
}
