//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsedepth::edgestats::{conditional_probability, BoundaryMap};
use sparsedepth::harness::*;
use sparsedepth::metrics::{rmse, NO_CAP};
use sparsedepth::mtf::{compute_mtf, gaussian_blur, generate_chart, ChartParams, MtfPoint};
use sparsedepth::planar::{fit_model, fit_plane, rmse_v, PlanarFitParams};
use sparsedepth::reconstruct::*;
use sparsedepth::sampler::{com_pattern, random_pattern};
use sparsedepth::superpixel::{slic_segment, SlicParams};
use sparsedepth::{DepthMap, EvalMask, RgbImage, SamplerKind};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn full_rmse(gt: &DepthMap, pred: &DepthMap) -> Result<f64, String> {
    rmse(gt, pred, &EvalMask::full(gt.width(), gt.height()), NO_CAP).map_err(err)
}

fn image_data(id: &str, scene: SyntheticScene) -> ImageData {
    let has_objects = scene.obstacle_mask.count() > 0;
    ImageData {
        id: id.to_string(),
        rgb: scene.rgb,
        depth: scene.depth,
        mask: has_objects.then_some(scene.obstacle_mask),
    }
}

fn naive_bilateral(d: &DepthMap, p: &BilateralParams) -> Vec<f64> {
    let (w, h) = d.dims();
    let r = p.window_radius as i64;
    let mut out = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let c = d.at(x as usize, y as usize);
            let (mut num, mut den) = (0.0, 0.0);
            for qy in (y - r).max(0)..=(y + r).min(h as i64 - 1) {
                for qx in (x - r).max(0)..=(x + r).min(w as i64 - 1) {
                    let v = d.at(qx as usize, qy as usize);
                    let ds = ((qx - x).pow(2) + (qy - y).pow(2)) as f64;
                    let wgt = (-ds / (2.0 * p.spatial_sigma.powi(2))).exp()
                        * (-(c - v).powi(2) / (2.0 * p.range_sigma.powi(2))).exp();
                    num += wgt * v;
                    den += wgt;
                }
            }
            out[y as usize * w + x as usize] = num / den;
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = DepthMap::dense(16, 16, (0..256).map(|_| rng.random_range(0.1..10.0)).collect()).map_err(err)?;
        let p = BilateralParams::new(rng.random_range(0.5..4.0), rng.random_range(0.05..3.0));
        let fast = bilateral_filter(&d, &p).map_err(err)?;
        let slow = naive_bilateral(&d, &p);
        for (a, b) in fast.depth().iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-12, format!("max deviation from the double-loop oracle {worst:.2e}"))
}

/// Normal equations of `z = a x + b y + c` solved by Cramer's rule.
fn normal_equations(pts: &[(f64, f64, f64)]) -> [f64; 3] {
    let mut m = [[0.0; 3]; 3];
    let mut v = [0.0; 3];
    for &(x, y, z) in pts {
        let row = [x, y, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            v[i] += row[i] * z;
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for i in 0..3 {
            mk[i][k] = v[i];
        }
        *o = det(&mk) / d;
    }
    out
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (a, b, c) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..10.0));
        let pts: Vec<(f64, f64, f64)> = (0..25)
            .map(|i| {
                let (x, y) = ((i % 5) as f64, (i / 5) as f64);
                (x, y, a * x + b * y + c + rng.random_range(-0.5..0.5))
            })
            .collect();
        let plane = fit_plane(&pts).map_err(err)?;
        let oracle = normal_equations(&pts);
        worst = worst
            .max((plane.a - oracle[0]).abs())
            .max((plane.b - oracle[1]).abs())
            .max((plane.c - oracle[2]).abs());
    }
    check(worst <= 1e-9, format!("max coefficient deviation {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let scene = generate_synthetic_scene(&SceneSpec::preset(ScenePreset::Indoor), 3).map_err(err)?;
    let (w, h) = scene.depth.dims();
    let constant = DepthMap::constant(w, h, 3.7).map_err(err)?;
    let params = OursParams {
        scene: SceneType::Indoor,
        ..Default::default()
    };
    let out = reconstruct_ours(&scene.rgb, &mut GroundTruthSensor::new(&constant), 100, &params).map_err(err)?;
    let e_const = full_rmse(&constant, &out.depth)?;

    let plane = DepthMap::from_fn(w, h, |x, y| 4.0 + 0.01 * x as f64 - 0.02 * y as f64).map_err(err)?;
    let fo = first_order_baseline(&scene.rgb, &mut GroundTruthSensor::new(&plane), 300, &SlicParams::default()).map_err(err)?;
    let e_plane = full_rmse(&plane, &fo.depth)?;
    check(
        e_const <= 1e-9 && e_plane <= 1e-9 && fo.degenerate_segments.is_empty(),
        format!("constant scene {e_const:.2e} m, planar scene first-order {e_plane:.2e} m"),
    )
}

fn criterion_4() -> Outcome {
    let spec = SceneSpec::preset(ScenePreset::Planes);
    let exact = PlanarFitParams {
        delta_target: 0.0,
        ..Default::default()
    };
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..5 {
        let scene = generate_synthetic_scene(&spec, seed).map_err(err)?;
        let m = fit_model(&scene.depth, &exact).map_err(err)?;
        ok &= m.stats.regions == 3 && m.stats.delta == 0.0 && m.stats.epsilon <= 1e-9;
        let noisy = generate_synthetic_scene(
            &SceneSpec {
                noise_sigma: 0.05,
                ..spec.clone()
            },
            seed,
        )
        .map_err(err)?;
        let mn = fit_model(&noisy.depth, &PlanarFitParams::default()).map_err(err)?;
        ok &= mn.stats.epsilon <= 0.06;
        lines.push(format!(
            "seed {seed}: N={} delta={} eps={:.1e}, noisy eps={:.3}",
            m.stats.regions, m.stats.delta, m.stats.epsilon, mn.stats.epsilon
        ));
    }
    check(ok, lines.join("; "))
}

fn criterion_5() -> Outcome {
    let scenes = bundled_scenes().map_err(err)?;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut fitted = 0;
    for (_, scene) in &scenes {
        for delta_target in [0.0, 0.1] {
            let p = PlanarFitParams {
                delta_target,
                ..Default::default()
            };
            let m = fit_model(&scene.depth, &p).map_err(err)?;
            ok &= m.min_samples() == 3 * m.stats.regions;
            ok &= (rmse_v(&scene.depth, &m).map_err(err)? - m.stats.epsilon).abs() <= 1e-12;
            fitted += 1;
        }
        let opt = optimal_scenario(scene).map_err(err)?;
        ok &= opt.samples <= 3 * opt.regions;
        worst = worst.max(opt.rmse);
    }
    check(
        ok && worst <= 1e-6,
        format!("{fitted} models with 3N samples; optimal scenario worst RMSE {worst:.2e} m on {} scenes", scenes.len()),
    )
}

fn criterion_6() -> Outcome {
    let params = MethodParams {
        scene: SceneType::Indoor,
        ..Default::default()
    };
    let images: Vec<ImageData> = (100..110)
        .map(|seed| {
            generate_synthetic_scene(&SceneSpec::preset(ScenePreset::Indoor), seed).map(|s| image_data(&format!("indoor-{seed}"), s))
        })
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let mut ok = true;
    let mut lines = Vec::new();
    for n in [100, 300] {
        let mut sums = [0.0; 3];
        for img in &images {
            let seg = superpixels(img, n, &params).map_err(err)?;
            let methods = [
                (ReconstructorKind::Ours, Some(&seg)),
                (ReconstructorKind::FirstOrder, None),
                (ReconstructorKind::ZeroOrder, Some(&seg)),
            ];
            for (k, (rec, seg)) in methods.into_iter().enumerate() {
                let ev = run_method(img, SamplerKind::Com, rec, n, seg, &params).map_err(err)?;
                sums[k] += full_rmse(&img.depth, &ev.depth)?;
            }
        }
        let [ours, first, zero] = sums.map(|s| s / images.len() as f64);
        ok &= ours < first && ours < zero;
        lines.push(format!("n={n}: ours {ours:.4} m, first-order {first:.4} m, zero-order {zero:.4} m"));
    }
    check(ok, lines.join("; "))
}

fn criterion_7() -> Outcome {
    let mut toml = String::from(
        r#"
budgets = [60]
samplers = ["com"]
reconstructors = ["ours"]
scene = "outdoor"

[sweep]
reference = { sampler = "com", reconstructor = "ours", budget = 60 }
competitors = [{ sampler = "random", reconstructor = "bilinear" }]
"#,
    );
    for seed in 200..210 {
        toml.push_str(&format!("\n[[synthetic]]\nid = \"obstacle-{seed}\"\npreset = \"obstacle\"\nseed = {seed}\n"));
    }
    let cfg = ExperimentConfig::from_toml_str(&toml).map_err(err)?;
    let report = run_matrix(&cfg).map_err(err)?;
    if !report.errors.is_empty() {
        return Err(format!("harness errors: {:?}", report.errors));
    }
    let ratios: Vec<f64> = report
        .sweep
        .iter()
        .map(|r| r.samples_needed.map_or(f64::INFINITY, |n| n as f64 / 60.0))
        .collect();
    let wins = ratios.iter().filter(|&&r| r >= 3.0).count();
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.1}")).collect();
    check(
        ratios.len() == 10 && wins >= 8,
        format!("factor >= 3 in {wins}/10 scenes (factors {})", shown.join(", ")),
    )
}

fn criterion_8() -> Outcome {
    let chart = generate_chart(&ChartParams::default()).map_err(err)?;
    let (w, h) = chart.depth.dims();
    let n = w * h / 100;
    let ours = reconstruct_ours(&chart.rgb, &mut GroundTruthSensor::new(&chart.depth), n, &OursParams::default()).map_err(err)?;
    let pattern = random_pattern(w, h, n, 0).map_err(err)?;
    let samples = sparsedepth::sampler::execute(&pattern, &chart.depth, None, None).map_err(err)?;
    let bilinear = bilinear_baseline(&samples, w, h).map_err(err)?;
    let radii = chart.default_radii(40);
    let a = compute_mtf(&chart, &ours.depth, &radii).map_err(err)?;
    let b = compute_mtf(&chart, &bilinear, &radii).map_err(err)?;
    let mut ok = true;
    let mut min_band_margin = f64::INFINITY;
    let mut min_margin = f64::INFINITY;
    for (p, q) in a.iter().zip(&b) {
        let margin = p.mtf - q.mtf;
        min_margin = min_margin.min(margin);
        ok &= margin >= 0.0;
        if (0.05..=0.2).contains(&p.frequency_cpp) {
            min_band_margin = min_band_margin.min(margin);
        }
    }
    let hi = a.last().map_or(0.0, |p| p.frequency_cpp);
    check(
        ok && min_band_margin >= 0.05 && hi >= 0.2,
        format!(
            "{} frequencies up to {hi:.3} cyc/px; smallest margin {min_margin:.3}, smallest in [0.05, 0.2] {min_band_margin:.3}",
            a.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let chart = generate_chart(&ChartParams::default()).map_err(err)?;
    let sigma = 2.0;
    let blurred = gaussian_blur(&chart.depth, sigma).map_err(err)?;
    let curve: Vec<MtfPoint> = compute_mtf(&chart, &blurred, &chart.default_radii(40)).map_err(err)?;
    let mut worst: f64 = 0.0;
    for p in curve.iter().filter(|p| p.frequency_cpp <= 0.25) {
        let analytic = (-2.0 * std::f64::consts::PI.powi(2) * sigma * sigma * p.frequency_cpp.powi(2)).exp();
        worst = worst.max((p.mtf - analytic).abs());
    }
    check(worst <= 0.05, format!("max deviation from exp(-2 pi^2 sigma^2 f^2) {worst:.4}"))
}

fn criterion_10() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for (w, h, n) in [(100, 100, 25), (120, 80, 24), (200, 150, 48)] {
        let img = RgbImage::filled(w, h, [128, 128, 128]).map_err(err)?;
        let seg = slic_segment(&img, &SlicParams::with_segments(n)).map_err(err)?;
        let pattern = com_pattern(&seg);
        let s = ((w * h) as f64 / n as f64).sqrt();
        let (cw, ch) = (s, s);
        let near = pattern
            .coords
            .iter()
            .filter(|&&(x, y)| {
                let lx = ((x as f64 / cw).floor() + 0.5) * cw - 0.5;
                let ly = ((y as f64 / ch).floor() + 0.5) * ch - 0.5;
                (x as f64 - lx).hypot(y as f64 - ly) <= 0.2 * s
            })
            .count();
        let frac = near as f64 / pattern.len() as f64;
        ok &= seg.num_segments() == n && frac >= 0.95;
        lines.push(format!("{w}x{h} n={n}: {} segments, {:.0}% on lattice", seg.num_segments(), 100.0 * frac));
    }

    let params = MethodParams::default();
    for seed in 0..3 {
        let scene = generate_synthetic_scene(&SceneSpec::preset(ScenePreset::Camouflage), seed).map_err(err)?;
        let img = image_data("camouflage", scene);
        for n in [60, 120] {
            let ours = run_method(&img, SamplerKind::Com, ReconstructorKind::Ours, n, None, &params).map_err(err)?;
            let grid = run_method(&img, SamplerKind::Grid, ReconstructorKind::Ours, n, None, &params).map_err(err)?;
            let (eo, eg) = (full_rmse(&img.depth, &ours.depth)?, full_rmse(&img.depth, &grid.depth)?);
            let rel = (eo - eg).abs() / eg;
            ok &= rel <= 0.1;
            if seed == 0 {
                lines.push(format!("camouflage n={n}: ours {eo:.4} m vs grid {eg:.4} m ({:.1}%)", 100.0 * rel));
            }
        }
    }
    check(ok, lines.join("; "))
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    for _ in 0..20 {
        let (w, h) = (rng.random_range(8..40), rng.random_range(8..40));
        let pixels: Vec<u8> = (0..w * h * 3).map(|_| rng.random()).collect();
        let img = RgbImage::new(w, h, pixels).map_err(err)?;
        let n = rng.random_range(1..(w * h / 4));
        let seg = slic_segment(&img, &SlicParams::with_segments(n)).map_err(err)?;
        if !seg.is_connected() || seg.sizes().contains(&0) {
            failures.push("partition");
        }
        if seg != slic_segment(&img, &SlicParams::with_segments(n)).map_err(err)? {
            failures.push("slic determinism");
        }
        let pattern = com_pattern(&seg);
        if pattern.len() != seg.num_segments() || pattern.coords.iter().enumerate().any(|(k, &(x, y))| seg.label(x, y) != k) {
            failures.push("com in segment");
        }

        let d = DepthMap::dense(w, h, (0..w * h).map(|_| rng.random_range(0.0..50.0)).collect()).map_err(err)?;
        let back = exp_transform(&log_transform(&d).map_err(err)?).map_err(err)?;
        if d.depth().iter().zip(back.depth()).any(|(a, b)| (a - b).abs() > 1e-12) {
            failures.push("log/exp round trip");
        }
        let f = bilateral_filter(&d, &BilateralParams::new(rng.random_range(0.5..3.0), rng.random_range(0.1..20.0))).map_err(err)?;
        let (lo, hi) = d.valid_range().unwrap_or((0.0, 0.0));
        if f.depth().iter().any(|&v| v < lo - 1e-12 || v > hi + 1e-12) {
            failures.push("bilateral bounds");
        }

        let a = BoundaryMap::new(w, h, (0..w * h).map(|_| rng.random_bool(0.2)).collect()).map_err(err)?;
        let b = BoundaryMap::new(w, h, (0..w * h).map(|_| rng.random_bool(0.2)).collect()).map_err(err)?;
        if a.count() > 0 && b.count() > 0 {
            let mut last = 0.0;
            for tol in 0..4 {
                let p = conditional_probability(&a, &b, tol).map_err(err)?;
                if !(0.0..=1.0).contains(&p) || p < last {
                    failures.push("edge probability bounds/monotonicity");
                }
                last = p;
            }
        }
        if random_pattern(w, h, n, 5).map_err(err)? != random_pattern(w, h, n, 5).map_err(err)? {
            failures.push("random pattern determinism");
        }
    }

    let mut cfg = ExperimentConfig::from_toml_str(BUNDLED_CONFIG).map_err(err)?;
    cfg.workers = 1;
    let one = serde_json::to_string(&run_matrix(&cfg).map_err(err)?).map_err(err)?;
    cfg.workers = 4;
    let four = serde_json::to_string(&run_matrix(&cfg).map_err(err)?).map_err(err)?;
    if one != four {
        failures.push("report determinism across worker counts");
    }
    failures.dedup();
    check(
        failures.is_empty(),
        if failures.is_empty() {
            "partition, com placement, filter bounds, log/exp, edge probabilities, seeded determinism, identical reports with 1 and 4 workers".into()
        } else {
            format!("violated: {}", failures.join(", "))
        },
    )
}

fn criterion_12() -> Outcome {
    let cfg = ExperimentConfig::from_toml_str(BUNDLED_CONFIG).map_err(err)?;
    let report = run_matrix(&cfg).map_err(err)?;
    let stats = report.statistics.as_ref().ok_or("no statistics in the report")?;
    let dir = tempfile::tempdir().map_err(err)?;
    report.write(dir.path()).map_err(err)?;
    let csv = std::fs::read_to_string(dir.path().join("statistics.csv")).map_err(err)?;
    let header = csv.lines().next().unwrap_or_default();
    let expected = "image,regions,delta,epsilon,min_samples,p_rgb_given_d,p_d_given_rgb";
    let hists = ["regions", "delta", "epsilon", "p_rgb_given_d", "p_d_given_rgb"]
        .iter()
        .all(|c| dir.path().join(format!("hist_{c}.csv")).exists());
    let ok = header == expected
        && hists
        && stats.images.len() == cfg.synthetic.len()
        && stats.mean_min_samples == 3.0 * stats.mean_regions;
    check(
        ok,
        format!(
            "mean N={:.1}, delta={:.3}, eps={:.3} m, P(rgb|d)={:.1}%, P(d|rgb)={:.1}% (reference on the outdoor set: N 66.6, delta 0.1, eps 1.35 m; 69.3% / 33.7%, indoor 80.8% / 22.9%)",
            stats.mean_regions,
            stats.mean_delta,
            stats.mean_epsilon,
            100.0 * stats.mean_p_rgb_given_d.unwrap_or(f64::NAN),
            100.0 * stats.mean_p_d_given_rgb.unwrap_or(f64::NAN),
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 12] = [
        ("bilateral filter matches oracle", Duration::from_secs(1), criterion_1),
        ("plane fit matches normal equations", Duration::from_secs(1), criterion_2),
        ("exact reconstruction of constant and planar scenes", Duration::from_secs(30), criterion_3),
        ("planar model recovery", Duration::from_secs(10), criterion_4),
        ("three samples per plane suffice", Duration::from_secs(60), criterion_5),
        ("filtered zero-order beats first-order and plain zero-order", Duration::from_secs(60), criterion_6),
        ("sample economy on obstacle scenes", Duration::from_secs(300), criterion_7),
        ("resolution dominance on the star chart", Duration::from_secs(120), criterion_8),
        ("resolution of a Gaussian blur", Duration::from_secs(60), criterion_9),
        ("degeneration to grid sampling", Duration::from_secs(60), criterion_10),
        ("invariants and determinism", Duration::from_secs(120), criterion_11),
        ("statistics report format", Duration::from_secs(60), criterion_12),
    ];
    let mut failed = Vec::new();
    for (k, (title, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) => (took <= *budget, d),
            Err(d) => (false, d),
        };
        println!(
            "criterion {:>2}: {} {title} ({:.2} s of {} s): {detail}",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
        if !pass {
            failed.push(k + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
