//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use cassi_gsm::filters::{self, Axis};
use cassi_gsm::metrics;
use cassi_gsm::noise::{self, NoiseModel};
use cassi_gsm::prior;
use cassi_gsm::scene::{generate_scene, SceneSpec};
use cassi_gsm::solver;
use cassi_gsm::{Dims, ForwardOperator, HsiCube, Mask2D, Measurement, ScalePrior, SolverConfig};

/// Frozen PSNR gain required of the default reconstruction on the
/// acceptance scene.
const E2E_MARGIN_DB: f64 = 3.0;

const SCENE_DIMS: (usize, usize, usize) = (48, 48, 8);
const SCENE_BLOBS: usize = 12;
const SCENE_SEED: u64 = 7;
const MASK_SEED: u64 = 11;
const MASK_FILL: f64 = 0.5;
const DISPERSION: usize = 2;

type Criterion = (&'static str, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn random_cube(rng: &mut ChaCha8Rng, d: Dims) -> HsiCube {
    let data = (0..d.len()).map(|_| rng.random::<f32>()).collect();
    HsiCube::from_vec(d, data).unwrap()
}

fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Mask2D {
    Mask2D::new(h, w, (0..h * w).map(|_| rng.random::<f32>()).collect()).unwrap()
}

fn random_measurement(rng: &mut ChaCha8Rng, op: &ForwardOperator) -> Measurement {
    let d = op.cube_dims();
    let wm = op.sensor_width();
    let data = (0..d.height * wm).map(|_| rng.random::<f32>()).collect();
    Measurement::new(d.height, wm, op.step(), d.bands, data).unwrap()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

fn a1_adjoint_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let d = Dims::new(8, 8, 4).unwrap();
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for s in [1usize, 2] {
        for _ in 0..100 {
            let op = ForwardOperator::new(random_mask(&mut rng, 8, 8), d.bands, s).unwrap();
            let x = random_cube(&mut rng, d);
            let y = random_measurement(&mut rng, &op);
            let ax = op.forward(&x).unwrap();
            let aty = op.adjoint(&y).unwrap();
            let lhs = dot(ax.data(), y.data());
            let rhs = dot(x.data(), aty.data());
            let scale = norm(ax.data()) * norm(y.data());
            worst = worst.max((lhs - rhs).abs() / scale);
            pairs += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-5 && within_budget(elapsed, 1.0),
        format!("{pairs} pairs, worst |<Ax,y>-<x,A^T y>|/(|Ax||y|) = {worst:.2e} (tol 1e-5), {elapsed:.2?} (limit 1 s)"),
    )
}

/// Explicit matrix of the coded-aperture model, built entry by entry.
fn explicit_matrix(mask: &Mask2D, d: Dims, s: usize) -> (Vec<f64>, usize, usize) {
    let wm = d.width + s * (d.bands - 1);
    let rows = d.height * wm;
    let cols = d.len();
    let mut m = vec![0.0; rows * cols];
    for l in 0..d.bands {
        for r in 0..d.height {
            for c in 0..d.width {
                let row = r * wm + c + s * l;
                let col = l * d.plane() + r * d.width + c;
                m[row * cols + col] = mask.data()[r * d.width + c] as f64;
            }
        }
    }
    (m, rows, cols)
}

fn rel_err(got: &[f32], want: &[f64]) -> f64 {
    let num: f64 = got
        .iter()
        .zip(want)
        .map(|(&g, &w)| (g as f64 - w).powi(2))
        .sum();
    let den: f64 = want.iter().map(|w| w * w).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn a2_dense_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut shapes = vec![
        (1, 1, 1),
        (1, 7, 3),
        (5, 1, 4),
        (4, 4, 1),
        (32, 32, 1),
        (8, 8, 16),
        (16, 8, 8),
    ];
    while shapes.len() < 40 {
        let (h, w, l) = (
            rng.random_range(1..=16),
            rng.random_range(1..=16),
            rng.random_range(1..=12),
        );
        if h * w * l <= 1024 {
            shapes.push((h, w, l));
        }
    }
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &(h, w, l) in &shapes {
        for s in [0usize, 1, 2] {
            let d = Dims::new(h, w, l).unwrap();
            let mask = random_mask(&mut rng, h, w);
            let op = ForwardOperator::new(mask.clone(), l, s).unwrap();
            let (m, rows, cols) = explicit_matrix(&mask, d, s);

            let x = random_cube(&mut rng, d);
            let want_y: Vec<f64> = (0..rows)
                .map(|i| {
                    (0..cols)
                        .map(|j| m[i * cols + j] * x.data()[j] as f64)
                        .sum()
                })
                .collect();
            worst = worst.max(rel_err(op.forward(&x).unwrap().data(), &want_y));

            let y = random_measurement(&mut rng, &op);
            let want_x: Vec<f64> = (0..cols)
                .map(|j| {
                    (0..rows)
                        .map(|i| m[i * cols + j] * y.data()[i] as f64)
                        .sum()
                })
                .collect();
            worst = worst.max(rel_err(op.adjoint(&y).unwrap().data(), &want_x));
            cases += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && within_budget(elapsed, 5.0),
        format!("{cases} operator cases (N <= 1024, s in 0..=2), worst relative error {worst:.2e} (tol 1e-6), {elapsed:.2?} (limit 5 s)"),
    )
}

fn clamp(base: usize, off: isize, len: usize) -> usize {
    (base as isize + off).clamp(0, len as isize - 1) as usize
}

/// Full `q^3` kernel applied directly at every pixel.
#[allow(clippy::needless_range_loop)]
fn brute_force_mean(x: &HsiCube, field: &filters::SeparableFilterField) -> Vec<f64> {
    let d = x.dims();
    let q = field.q();
    let half = (q / 2) as isize;
    let mut out = vec![0.0; d.len()];
    for l in 0..d.bands {
        for r in 0..d.height {
            for c in 0..d.width {
                let p = d.index(l, r, c);
                let (fr, fc, fs) = (
                    field.filter(Axis::Row, p),
                    field.filter(Axis::Col, p),
                    field.filter(Axis::Band, p),
                );
                let mut acc = 0.0;
                for a in 0..q {
                    for b in 0..q {
                        for s in 0..q {
                            let k = fr[a] as f64 * fc[b] as f64 * fs[s] as f64;
                            let rr = clamp(r, a as isize - half, d.height);
                            let cc = clamp(c, b as isize - half, d.width);
                            let ll = clamp(l, s as isize - half, d.bands);
                            acc += k * x.data()[d.index(ll, rr, cc)] as f64;
                        }
                    }
                }
                out[p] = acc;
            }
        }
    }
    out
}

fn a3_separable_filters() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let d = Dims::new(6, 6, 4).unwrap();
    let mut worst = 0.0f64;
    let mut cubes = 0;
    for q in [3usize, 5, 7] {
        for _ in 0..10 {
            let x = random_cube(&mut rng, d);
            let h = rng.random_range(0.05..1.0);
            let field = filters::build_filters(&x, q, h).unwrap();
            let fast = filters::local_mean(&x, &field).unwrap();
            let slow = brute_force_mean(&x, &field);
            for (a, b) in fast.iter().zip(&slow) {
                worst = worst.max((*a as f64 - b).abs());
            }
            cubes += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-5 && within_budget(elapsed, 2.0),
        format!("{cubes} random 6x6x4 cubes, q in {{3,5,7}}, worst |separable - brute force| = {worst:.2e} (tol 1e-5), {elapsed:.2?} (limit 2 s)"),
    )
}

/// Minimise `sigma^2 e^2 / theta^2 + 4 sigma^2 log(theta)` over `t = log(theta)`
/// by golden-section search and return `sigma^2 / theta^2`.
fn numeric_weight(e: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let f = |t: f64| s2 * e * e * (-2.0 * t).exp() + 4.0 * s2 * t;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (e.ln() - 20.0, e.ln() + 20.0);
    let mut c = b - g * (b - a);
    let mut dd = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(dd));
    for _ in 0..200 {
        if fc < fd {
            b = dd;
            dd = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = dd;
            fc = fd;
            dd = a + g * (b - a);
            fd = f(dd);
        }
    }
    let t = 0.5 * (a + b);
    s2 * (-2.0 * t).exp()
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn a4_jeffreys_closed_form() -> Outcome {
    let es = logspace(1e-3, 10.0, 20);
    let sigmas = logspace(0.01, 1.0, 20);
    let d = Dims::new(1, es.len(), 1).unwrap();
    let x = HsiCube::from_vec(d, es.iter().map(|&e| e as f32).collect()).unwrap();
    let zeros = vec![0.0f32; es.len()];
    // eps far below every e^2 on the grid
    let prior = ScalePrior::Jeffreys { eps: 1e-30 };
    let mut worst = 0.0f64;
    for &sigma in &sigmas {
        let w = prior::update_weights(&x, &zeros, sigma, &prior).unwrap();
        for (i, &wi) in w.iter().enumerate() {
            let e = x.data()[i] as f64;
            let want = numeric_weight(e, sigma);
            worst = worst.max((wi as f64 - want).abs() / want);
        }
    }
    outcome(
        worst <= 1e-6,
        format!(
            "20x20 (e, sigma) grid, worst relative gap to numeric minimiser {worst:.2e} (tol 1e-6)"
        ),
    )
}

fn acceptance_scene() -> (HsiCube, ForwardOperator) {
    let (h, w, l) = SCENE_DIMS;
    let truth = generate_scene(&SceneSpec::new(
        Dims::new(h, w, l).unwrap(),
        SCENE_BLOBS,
        SCENE_SEED,
    ))
    .unwrap();
    let mask = Mask2D::random_binary(h, w, MASK_FILL, MASK_SEED).unwrap();
    (truth, ForwardOperator::new(mask, l, DISPERSION).unwrap())
}

fn gain_over_init(truth: &HsiCube, op: &ForwardOperator, y: &Measurement) -> (f64, f64, bool) {
    let cfg = SolverConfig::default();
    let init = solver::initialize(y, op, cfg.init).unwrap();
    let (x, trace) = solver::run(y, op, &cfg).unwrap();
    let p0 = metrics::psnr(truth, &init, 1.0).unwrap();
    let p1 = metrics::psnr(truth, &x, 1.0).unwrap();
    (p0, p1, trace.is_monotone_within_stages())
}

fn a5_end_to_end() -> Outcome {
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let defaults_ok = cfg.stages == 4 && cfg.inner_steps == 10 && cfg.q == 7;
    let (truth, op) = acceptance_scene();
    let y = op.forward(&truth).unwrap();
    let (p0, p1, mono) = gain_over_init(&truth, &op, &y);
    let elapsed = start.elapsed();
    let gain = p1 - p0;
    outcome(
        defaults_ok && p1 > p0 && gain >= E2E_MARGIN_DB && mono && within_budget(elapsed, 60.0),
        format!("48x48x8 noiseless, T=4 K=10 q=7: init {p0:.2} dB -> final {p1:.2} dB (gain {gain:.2} dB, margin {E2E_MARGIN_DB} dB), trace nonincreasing: {mono}, {elapsed:.2?} (limit 60 s)"),
    )
}

fn a6_gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let d = Dims::new(4, 4, 3).unwrap();
    let h = 1e-3f32;
    let delta = 1e-2;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let s = 1 + i % 2;
        let op = ForwardOperator::new(random_mask(&mut rng, 4, 4), 3, s).unwrap();
        let x = random_cube(&mut rng, d);
        let u: Vec<f32> = (0..d.len()).map(|_| rng.random()).collect();
        let w: Vec<f32> = (0..d.len()).map(|_| rng.random_range(0.0..5.0)).collect();
        let y = random_measurement(&mut rng, &op);
        let f = |c: &HsiCube| solver::objective(c, &w, &u, &y, &op).unwrap().total;

        let fd: Vec<f64> = (0..d.len())
            .map(|j| {
                let mut plus = x.clone();
                let mut minus = x.clone();
                plus.data_mut()[j] += h;
                minus.data_mut()[j] -= h;
                let span = plus.data()[j] as f64 - minus.data()[j] as f64;
                (f(&plus) - f(&minus)) / span
            })
            .collect();
        let stepped = solver::x_step(&x, &w, &u, &y, &op, delta).unwrap();
        let dir: Vec<f64> = x
            .data()
            .iter()
            .zip(stepped.data())
            .map(|(&a, &b)| (a as f64 - b as f64) / delta)
            .collect();
        let num: f64 = dir.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = fd.iter().map(|b| b * b).sum();
        worst = worst.max((num / den).sqrt());
    }
    outcome(
        worst <= 1e-3,
        format!("20 random 4x4x3 instances, worst relative gap between step direction and central differences {worst:.2e} (tol 1e-3)"),
    )
}

fn a7_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let a = random_cube(&mut rng, Dims::new(24, 24, 4).unwrap());
    let self_ssim = metrics::ssim(&a, &a, 1.0).unwrap();

    let d = Dims::new(16, 16, 2).unwrap();
    let zero = HsiCube::zeros(d);
    let tenth = HsiCube::filled(d, 0.1);
    let p_formula = metrics::psnr_from_mse(0.01, 1.0);
    let p_cube = metrics::psnr(&zero, &tenth, 1.0).unwrap();
    let psnr_ok = (p_formula - 20.0).abs() <= 1e-6 && (p_cube - 20.0).abs() <= 1e-6;

    let (truth, _) = acceptance_scene();
    let ladder: Vec<f64> = [0.01, 0.02, 0.05, 0.1]
        .iter()
        .map(|&sd| {
            let normal = Normal::new(0.0f64, sd).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(77);
            let noisy: Vec<f32> = truth
                .data()
                .iter()
                .map(|&v| (v as f64 + normal.sample(&mut r)) as f32)
                .collect();
            metrics::psnr(
                &truth,
                &HsiCube::from_vec(truth.dims(), noisy).unwrap(),
                1.0,
            )
            .unwrap()
        })
        .collect();
    let monotone = ladder.windows(2).all(|p| p[1] < p[0]);
    outcome(
        self_ssim == 1.0 && psnr_ok && monotone,
        format!(
            "ssim(a,a) = {self_ssim}; psnr(mse 0.01) = {p_formula:.9} / cube {p_cube:.9} dB (20 +- 1e-6); noise ladder {:?} dB strictly decreasing: {monotone}",
            ladder.iter().map(|p| (p * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    )
}

fn cassi(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cassi"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        fs::write(dir.join(format!("{}.stdout", args[0])), &out.stdout)
            .map_err(|e| e.to_string())?;
        Ok(())
    } else {
        Err(format!(
            "{} failed: {}",
            args[0],
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn pipeline(dir: &Path) -> Result<(), String> {
    cassi(
        dir,
        &["gen", "--out", "truth.hsc", "--seed", "7", "--blobs", "12"],
    )?;
    cassi(dir, &["gen-mask", "--out", "mask.msk", "--seed", "11"])?;
    cassi(
        dir,
        &[
            "simulate",
            "--cube",
            "truth.hsc",
            "--mask",
            "mask.msk",
            "--noise",
            "shot",
            "--noise-bits",
            "11",
            "--noise-seed",
            "5",
            "--out",
            "y.mea",
        ],
    )?;
    cassi(
        dir,
        &[
            "reconstruct",
            "--measurement",
            "y.mea",
            "--mask",
            "mask.msk",
            "--out",
            "x.hsc",
            "--trace",
            "trace.csv",
        ],
    )?;
    cassi(
        dir,
        &[
            "evaluate",
            "--reference",
            "truth.hsc",
            "--estimate",
            "x.hsc",
            "--out",
            "report.csv",
        ],
    )
}

fn a8_determinism() -> Outcome {
    let artifacts = [
        "truth.hsc",
        "mask.msk",
        "y.mea",
        "x.hsc",
        "trace.csv",
        "report.csv",
        "evaluate.stdout",
    ];
    let runs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for r in &runs {
        if let Err(e) = pipeline(r.path()) {
            return outcome(false, e);
        }
    }
    let mut differing = Vec::new();
    for name in artifacts {
        let first = fs::read(runs[0].path().join(name)).unwrap();
        if runs[1..]
            .iter()
            .any(|r| fs::read(r.path().join(name)).unwrap() != first)
        {
            differing.push(name);
        }
    }
    outcome(
        differing.is_empty(),
        format!("3 simulate -> reconstruct -> evaluate runs, {} artifacts compared, differing: {differing:?}", artifacts.len()),
    )
}

fn a9_shot_noise() -> Outcome {
    let (truth, op) = acceptance_scene();
    let clean = op.forward(&truth).unwrap();
    let y = noise::add_noise(&clean, &NoiseModel::shot(11, 5)).unwrap();
    let (p0, p1, _) = gain_over_init(&truth, &op, &y);
    outcome(
        p1 > p0,
        format!(
            "11-bit shot noise: init {p0:.2} dB -> final {p1:.2} dB (gain {:.2} dB)",
            p1 - p0
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("A1", "adjoint identity", a1_adjoint_identity),
        ("A2", "dense-oracle equivalence", a2_dense_oracle),
        ("A3", "separable-filter equivalence", a3_separable_filters),
        ("A4", "Jeffreys closed form", a4_jeffreys_closed_form),
        ("A5", "end-to-end reconstruction", a5_end_to_end),
        ("A6", "gradient check", a6_gradient_check),
        ("A7", "metrics", a7_metrics),
        ("A8", "pipeline determinism", a8_determinism),
        ("A9", "shot-noise robustness", a9_shot_noise),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{id} {} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
