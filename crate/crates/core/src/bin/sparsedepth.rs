use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sparsedepth::edgestats::{conditional_probabilities, depth_boundaries, overlay, rgb_edges, EdgeParams};
use sparsedepth::harness::{generate_synthetic_scene, run_matrix, ExperimentConfig, SyntheticEntry};
use sparsedepth::io;
use sparsedepth::manifest::{config_hash_toml, RunManifest};
use sparsedepth::mtf::{compute_mtf, generate_chart, read_chart, write_chart, write_mtf_csv, ChartParams};
use sparsedepth::planar::{fit_model, PlanarFitParams};
use sparsedepth::reconstruct::{
    bilinear_baseline, first_order_reconstruct, reconstruct_from_samples, reconstruct_unsegmented, BilateralParams,
    SceneType,
};
use sparsedepth::sampler::{com_pattern, execute, grid_pattern, random_pattern};
use sparsedepth::superpixel::{slic_segment, SlicParams};
use sparsedepth::{DepthMap, Error, SegmentMap};

#[derive(Parser)]
#[command(name = "sparsedepth", version, about = "Image-guided adaptive depth sampling and reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleMethod {
    Com,
    Grid,
    Random,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ReconMethod {
    Ours,
    ZeroOrder,
    Bilinear,
    FirstOrder,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputKind {
    /// 16-bit gray PNGs are labels, anything else is RGB.
    Auto,
    Rgb,
    Labels,
}

#[derive(Subcommand)]
enum Command {
    /// SLIC superpixels of an RGB image, written as a 16-bit label PNG.
    Segment {
        rgb: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 20.0)]
        compactness: f64,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Builds a sampling pattern and reads it from a ground-truth depth map.
    Sample {
        /// RGB image (com runs SLIC on it) or a label PNG.
        input: PathBuf,
        #[arg(long, value_enum)]
        method: SampleMethod,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "auto")]
        input_kind: InputKind,
        #[arg(long, default_value_t = 20.0)]
        compactness: f64,
        /// Also write the unexecuted pattern here.
        #[arg(long)]
        pattern_out: Option<PathBuf>,
        /// Also write the superpixel labels used by com here.
        #[arg(long)]
        labels_out: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Dense depth from a sample CSV.
    Reconstruct {
        #[arg(long, value_enum)]
        method: ReconMethod,
        #[arg(long)]
        samples: PathBuf,
        /// Guide image; superpixels are recomputed from it with `--n`.
        #[arg(long)]
        rgb: Option<PathBuf>,
        /// Superpixel labels; take precedence over `--rgb`.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Sampling budget the samples were taken with (defaults to their count).
        #[arg(long)]
        n: Option<usize>,
        /// Image size as WIDTHxHEIGHT when neither --rgb nor --labels is given.
        #[arg(long)]
        size: Option<String>,
        #[arg(long, default_value = "outdoor")]
        scene: String,
        #[arg(long, default_value_t = 20.0)]
        compactness: f64,
        #[arg(long)]
        spatial_sigma: Option<f64>,
        #[arg(long)]
        range_sigma: Option<f64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Piecewise-planar model of a depth map.
    FitModel {
        depth: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        tol: f64,
        /// Use a fixed tolerance instead of one growing with depth.
        #[arg(long)]
        absolute: bool,
        #[arg(long, default_value_t = 0.1)]
        delta_target: f64,
        #[arg(long, default_value_t = 128)]
        max_regions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Agreement between RGB edges and depth discontinuities.
    EdgeStats {
        rgb: PathBuf,
        depth: PathBuf,
        #[arg(long, default_value_t = 2)]
        tol_px: usize,
        #[arg(long, default_value_t = 0.05)]
        rel_threshold: f64,
        #[arg(long, default_value_t = 0.15)]
        high: f64,
        #[arg(long, default_value_t = 0.05)]
        low: f64,
        /// Directory for edge_stats.json and overlay.png.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Writes the star chart, or measures a reconstruction of it.
    Mtf {
        #[arg(long, conflicts_with_all = ["eval", "chart"])]
        chart_out: Option<PathBuf>,
        #[arg(long, requires = "chart")]
        eval: Option<PathBuf>,
        #[arg(long, requires = "eval")]
        chart: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        size: usize,
        #[arg(long, default_value_t = 72)]
        sectors: usize,
        #[arg(long, default_value_t = 5.0)]
        near: f64,
        #[arg(long, default_value_t = 20.0)]
        far: f64,
        #[arg(long, default_value_t = 0)]
        texture_seed: u64,
        #[arg(long, default_value_t = 16)]
        radii: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Runs an experiment config (TOML).
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generates the `[[synthetic]]` scenes of a TOML file as a dataset directory.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::BudgetExceedsPixels { .. } | Error::RadiusOutOfRange { .. } => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: msg.into(),
    }
}

fn invariant(msg: impl Into<String>) -> Failure {
    Failure {
        code: 3,
        message: format!("internal invariant violated: {}", msg.into()),
    }
}

type CliResult = Result<(), Failure>;

fn tag(v: impl ValueEnum) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn manifest_dir_for(output: &Path) -> PathBuf {
    output.parent().filter(|p| !p.as_os_str().is_empty()).map(Path::to_path_buf).unwrap_or_else(|| ".".into())
}

/// Manifest next to a file output (`<stem>.manifest.json`) or inside a
/// directory output (`manifest.json`).
fn emit_manifest(mut m: RunManifest, output: &Path, is_dir: bool) -> CliResult {
    m.outputs.push(output.display().to_string());
    m.finish();
    if is_dir {
        m.write(output)?;
    } else {
        let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        io::write_json(manifest_dir_for(output).join(format!("{stem}.manifest.json")), &m)?;
    }
    Ok(())
}

fn check_depth(d: &DepthMap) -> CliResult {
    if d.depth().iter().zip(d.valid()).any(|(v, &ok)| ok && !(v.is_finite() && *v >= 0.0)) {
        return Err(invariant("reconstruction produced a non-finite or negative depth"));
    }
    Ok(())
}

fn is_label_png(path: &Path) -> Result<bool, Failure> {
    let img = image::open(path).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    Ok(matches!(img, image::DynamicImage::ImageLuma16(_)))
}

fn parse_size(s: &str) -> Result<(usize, usize), Failure> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| usage("--size must look like 640x480"))?;
    match (w.trim().parse(), h.trim().parse()) {
        (Ok(w), Ok(h)) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(usage("--size must look like 640x480")),
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Segment {
            rgb,
            n,
            compactness,
            iterations,
            output,
        } => {
            let params = SlicParams {
                target_segments: n,
                compactness,
                max_iterations: iterations,
                ..SlicParams::default()
            };
            let m = RunManifest::start("segment", json!({ "slic": params, "input": rgb }), None);
            let img = io::read_rgb(&rgb)?;
            let seg = slic_segment(&img, &params)?;
            if !seg.is_connected() {
                return Err(invariant("a superpixel is not 4-connected"));
            }
            io::write_labels(&output, &seg)?;
            eprintln!("{} segments", seg.num_segments());
            emit_manifest(m, &output, false)
        }
        Command::Sample {
            input,
            method,
            n,
            gt,
            seed,
            input_kind,
            compactness,
            pattern_out,
            labels_out,
            output,
        } => {
            let gt_map = io::read_depth(&gt)?;
            let (w, h) = gt_map.dims();
            let labels = match input_kind {
                InputKind::Labels => true,
                InputKind::Rgb => false,
                InputKind::Auto => is_label_png(&input)?,
            };
            let slic = SlicParams {
                target_segments: n,
                compactness,
                ..SlicParams::default()
            };
            let m = RunManifest::start(
                "sample",
                json!({ "method": tag(method), "n": n, "seed": seed, "slic": slic, "input": input, "gt": gt }),
                Some(seed),
            );
            let segments: Option<SegmentMap> = match (method, labels) {
                (SampleMethod::Com, true) => Some(io::read_labels(&input)?),
                (SampleMethod::Com, false) => Some(slic_segment(&io::read_rgb(&input)?, &slic)?),
                _ => None,
            };
            let pattern = match method {
                SampleMethod::Com => com_pattern(segments.as_ref().expect("segments")),
                SampleMethod::Grid => grid_pattern(w, h, n)?,
                SampleMethod::Random => random_pattern(w, h, n, seed)?,
            };
            if let Some(s) = &segments {
                if s.dims() != (w, h) {
                    return Err(Error::DimensionMismatch {
                        expected: (w, h),
                        actual: s.dims(),
                    }
                    .into());
                }
                if let Some(p) = &labels_out {
                    io::write_labels(p, s)?;
                }
            }
            let samples = execute(&pattern, &gt_map, segments.as_ref(), None)?;
            if let Some(s) = &segments {
                let mut seen = vec![false; s.num_segments()];
                for e in samples.entries() {
                    let l = s.label(e.x, e.y);
                    if std::mem::replace(&mut seen[l], true) {
                        return Err(invariant("two center-of-mass samples in one segment"));
                    }
                }
            }
            if let Some(p) = &pattern_out {
                io::write_pattern(p, &pattern)?;
            }
            io::write_samples(&output, &samples)?;
            eprintln!(
                "{} samples ({} dropped, {} relocated)",
                samples.len(),
                samples.dropped,
                samples.relocated
            );
            emit_manifest(m, &output, false)
        }
        Command::Reconstruct {
            method,
            samples,
            rgb,
            labels,
            n,
            size,
            scene,
            compactness,
            spatial_sigma,
            range_sigma,
            output,
        } => {
            let scene: SceneType = scene.parse()?;
            let rgb_img = rgb.as_ref().map(io::read_rgb).transpose()?;
            let label_map = labels.as_ref().map(io::read_labels).transpose()?;
            let (w, h) = match (&label_map, &rgb_img, &size) {
                (Some(l), _, _) => l.dims(),
                (None, Some(i), _) => (i.width(), i.height()),
                (None, None, Some(s)) => parse_size(s)?,
                _ => return Err(usage("give --labels, --rgb or --size to fix the image size")),
            };
            let set = io::read_samples(&samples, w, h)?;
            if set.is_empty() {
                return Err(Error::DegenerateSamples(0).into());
            }
            let n = n.unwrap_or(set.len());
            let mut filter = BilateralParams::for_budget(w * h, n, scene);
            if let Some(s) = spatial_sigma {
                filter = BilateralParams::new(s, filter.range_sigma);
            }
            if let Some(r) = range_sigma {
                filter.range_sigma = r;
            }
            let target = if method == ReconMethod::FirstOrder { (n / 3).max(1) } else { n };
            let slic = SlicParams {
                target_segments: target,
                compactness,
                ..SlicParams::default()
            };
            let m = RunManifest::start(
                "reconstruct",
                json!({ "method": tag(method), "n": n, "bilateral": filter, "slic": slic, "samples": samples }),
                None,
            );
            let segments = match (label_map, &rgb_img) {
                (Some(l), _) => Some(l),
                (None, Some(img)) if method != ReconMethod::Bilinear => Some(slic_segment(img, &slic)?),
                _ => None,
            };
            let depth = match (method, &segments) {
                (ReconMethod::Bilinear, _) => bilinear_baseline(&set, w, h)?,
                (ReconMethod::Ours, Some(s)) => reconstruct_from_samples(s, &set, Some(&filter))?,
                (ReconMethod::ZeroOrder, Some(s)) => reconstruct_from_samples(s, &set, None)?,
                (ReconMethod::Ours, None) => reconstruct_unsegmented(&set, Some(&filter))?,
                (ReconMethod::ZeroOrder, None) => reconstruct_unsegmented(&set, None)?,
                (ReconMethod::FirstOrder, Some(s)) => first_order_reconstruct(s, &set)?.0,
                (ReconMethod::FirstOrder, None) => return Err(usage("first-order needs --labels or --rgb")),
            };
            check_depth(&depth)?;
            io::write_depth(&output, &depth)?;
            emit_manifest(m, &output, false)
        }
        Command::FitModel {
            depth,
            tol,
            absolute,
            delta_target,
            max_regions,
            seed,
            output,
        } => {
            let params = PlanarFitParams {
                inlier_tol: tol,
                relative: !absolute,
                delta_target,
                max_regions,
                seed,
                ..PlanarFitParams::default()
            };
            let m = RunManifest::start("fit-model", json!({ "planar": params, "input": depth }), Some(seed));
            let d = io::read_depth(&depth)?;
            let model = fit_model(&d, &params)?;
            if model.min_samples() != 3 * model.stats.regions {
                return Err(invariant("min_samples differs from 3N"));
            }
            io::write_planar_model(&output, &model)?;
            println!(
                "N={} delta={} epsilon_m={} min_samples={}",
                model.stats.regions,
                model.stats.delta,
                model.stats.epsilon,
                model.min_samples()
            );
            emit_manifest(m, &output, true)
        }
        Command::EdgeStats {
            rgb,
            depth,
            tol_px,
            rel_threshold,
            high,
            low,
            output,
        } => {
            let edges = EdgeParams {
                high_threshold: high,
                low_threshold: low,
            };
            let m = RunManifest::start(
                "edge-stats",
                json!({ "edges": edges, "rel_threshold": rel_threshold, "tol_px": tol_px, "rgb": rgb, "depth": depth }),
                None,
            );
            let img = io::read_rgb(&rgb)?;
            let d = io::read_depth(&depth)?;
            let b_rgb = rgb_edges(&img, &edges)?;
            let b_d = depth_boundaries(&d, rel_threshold)?;
            let p = conditional_probabilities(&b_rgb, &b_d, tol_px)?;
            if !(0.0..=1.0).contains(&p.p_rgb_given_d) || !(0.0..=1.0).contains(&p.p_d_given_rgb) {
                return Err(invariant("probability outside [0, 1]"));
            }
            io::write_json(
                output.join("edge_stats.json"),
                &json!({
                    "p_rgb_given_d": p.p_rgb_given_d,
                    "p_d_given_rgb": p.p_d_given_rgb,
                    "rgb_edge_pixels": b_rgb.count(),
                    "depth_boundary_pixels": b_d.count(),
                    "tol_px": tol_px,
                    "rel_threshold": rel_threshold,
                }),
            )?;
            io::write_rgb(output.join("overlay.png"), &overlay(&img, &b_rgb, &b_d)?)?;
            println!("P(rgb|d)={} P(d|rgb)={}", p.p_rgb_given_d, p.p_d_given_rgb);
            emit_manifest(m, &output, true)
        }
        Command::Mtf {
            chart_out,
            eval,
            chart,
            size,
            sectors,
            near,
            far,
            texture_seed,
            radii,
            output,
        } => match (chart_out, eval, chart) {
            (Some(dir), None, None) => {
                let params = ChartParams {
                    size,
                    sectors,
                    near_m: near,
                    far_m: far,
                    texture_seed,
                };
                let m = RunManifest::start("mtf --chart-out", json!({ "chart": params }), Some(texture_seed));
                write_chart(&dir, &generate_chart(&params)?)?;
                emit_manifest(m, &dir, true)
            }
            (None, Some(recon), Some(dir)) => {
                let output = output.ok_or_else(|| usage("mtf --eval needs -o <csv>"))?;
                let chart = read_chart(&dir)?;
                let m = RunManifest::start(
                    "mtf --eval",
                    json!({ "chart": chart.params, "radii": radii, "recon": recon }),
                    None,
                );
                let d = io::read_depth(&recon)?;
                let curve = compute_mtf(&chart, &d, &chart.default_radii(radii))?;
                write_mtf_csv(&output, &curve)?;
                emit_manifest(m, &output, false)
            }
            _ => Err(usage("use either --chart-out <dir> or --eval <depth> --chart <dir> -o <csv>")),
        },
        Command::Evaluate { config, output } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Failure {
                code: 2,
                message: format!("cannot read {}: {e}", config.display()),
            })?;
            let cfg = ExperimentConfig::load(&config)?;
            let mut m = RunManifest::start("evaluate", serde_json::to_value(&cfg).map_err(Error::from)?, Some(cfg.seed));
            m.config_hash = config_hash_toml(&text)?;
            let report = run_matrix(&cfg)?;
            report.write(&output)?;
            for e in &report.errors {
                eprintln!("error: {} {}: {}", e.image, e.context, e.message);
            }
            eprintln!("{} rows, {} errors", report.rows.len(), report.errors.len());
            emit_manifest(m, &output, true)
        }
        Command::Synth { spec, output } => {
            #[derive(serde::Deserialize)]
            #[serde(deny_unknown_fields)]
            struct SynthFile {
                synthetic: Vec<SyntheticEntry>,
            }
            let text = std::fs::read_to_string(&spec).map_err(|e| Failure {
                code: 2,
                message: format!("cannot read {}: {e}", spec.display()),
            })?;
            let file: SynthFile = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            let mut m = RunManifest::start("synth", json!({ "synthetic": file.synthetic }), None);
            m.config_hash = config_hash_toml(&text)?;
            for e in &file.synthetic {
                let s = generate_synthetic_scene(&e.scene_spec(), e.seed)?;
                let (w, h) = s.depth.dims();
                io::write_rgb(output.join(format!("{}_rgb.png", e.id)), &s.rgb)?;
                io::write_depth(output.join(format!("{}_depth.png", e.id)), &s.depth)?;
                if s.obstacle_mask.count() > 0 {
                    io::write_mask(output.join(format!("{}_mask.png", e.id)), w, h, s.obstacle_mask.include())?;
                }
                io::write_labels(output.join(format!("{}_regions.png", e.id)), &s.regions)?;
            }
            emit_manifest(m, &output, true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(3),
    }
}
