use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cassi_gsm::solver::{self, TvConfig};
use cassi_gsm::{metrics, Dims, ForwardOperator, HsiCube, InitMode, Mask2D, Measurement};

struct Problem {
    op: ForwardOperator,
    y: Measurement,
    w: Vec<f32>,
    u: Vec<f32>,
}

fn problem(seed: u64, d: Dims, step: usize) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = Mask2D::random_uniform(d.height, d.width, seed).unwrap();
    let op = ForwardOperator::new(mask, d.bands, step).unwrap();
    let wm = op.sensor_width();
    let y = Measurement::new(
        d.height,
        wm,
        step,
        d.bands,
        (0..d.height * wm).map(|_| rng.random::<f32>()).collect(),
    )
    .unwrap();
    Problem {
        w: (0..d.len()).map(|_| rng.random_range(0.2..2.0)).collect(),
        u: (0..d.len()).map(|_| rng.random()).collect(),
        op,
        y,
    }
}

/// Columns of the operator, one forward call per unit vector.
fn columns(op: &ForwardOperator) -> Vec<Vec<f64>> {
    let d = op.cube_dims();
    (0..d.len())
        .map(|j| {
            let mut e = HsiCube::zeros(d);
            e.data_mut()[j] = 1.0;
            op.forward(&e)
                .unwrap()
                .data()
                .iter()
                .map(|&v| v as f64)
                .collect()
        })
        .collect()
}

#[allow(clippy::needless_range_loop)]
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Minimiser of `||y - A x||^2 + sum w (x - u)^2` from the normal equations
/// `(A^T A + W) x = A^T y + W u`.
fn normal_equations(p: &Problem) -> Vec<f64> {
    let cols = columns(&p.op);
    let n = cols.len();
    let y: Vec<f64> = p.y.data().iter().map(|&v| v as f64).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut m = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = dot(&cols[i], &cols[j]);
        }
        m[i][i] += p.w[i] as f64;
        rhs[i] = dot(&cols[i], &y) + p.w[i] as f64 * p.u[i] as f64;
    }
    solve(m, rhs)
}

fn max_abs_diff(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, y)| (x as f64 - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn normal_equation_solution_is_a_fixed_point() {
    let d = Dims::new(4, 4, 3).unwrap();
    for seed in 0..5 {
        let p = problem(seed, d, 1 + seed as usize % 2);
        let star = normal_equations(&p);
        let x = HsiCube::from_vec(d, star.iter().map(|&v| v as f32).collect()).unwrap();
        let g = solver::gradient(&x, &p.w, &p.u, &p.y, &p.op).unwrap();
        let g_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(g_norm < 1e-5, "gradient norm {g_norm}");
        let next = solver::x_step(&x, &p.w, &p.u, &p.y, &p.op, 0.1).unwrap();
        assert!(max_abs_diff(next.data(), &star) < 1e-6);
    }
}

#[test]
fn repeated_steps_converge_to_least_squares() {
    let d = Dims::new(5, 4, 3).unwrap();
    let p = problem(42, d, 2);
    let star = normal_equations(&p);
    let w_max = p.w.iter().copied().fold(0.0f32, f32::max) as f64;
    // ||A^T A|| <= L for masks in [0, 1]
    let delta = 0.9 / (2.0 * (d.bands as f64 + w_max));
    let mut x = HsiCube::zeros(d);
    let start = solver::objective(&x, &p.w, &p.u, &p.y, &p.op)
        .unwrap()
        .total;
    for _ in 0..2000 {
        x = solver::x_step(&x, &p.w, &p.u, &p.y, &p.op, delta).unwrap();
    }
    let end = solver::objective(&x, &p.w, &p.u, &p.y, &p.op)
        .unwrap()
        .total;
    assert!(end < start);
    assert!(max_abs_diff(x.data(), &star) < 1e-4);
}

#[test]
fn tv_baseline_recovers_constant_scene() {
    let d = Dims::new(12, 12, 4).unwrap();
    let truth = HsiCube::filled(d, 0.4);
    let op = ForwardOperator::new(Mask2D::random_binary(12, 12, 0.5, 8).unwrap(), 4, 1).unwrap();
    let y = op.forward(&truth).unwrap();
    let init = solver::initialize(&y, &op, InitMode::Adjoint).unwrap();
    let (x, trace) = solver::tv_baseline(&y, &op, &TvConfig::default()).unwrap();
    let p0 = metrics::psnr(&truth, &init, 1.0).unwrap();
    let p1 = metrics::psnr(&truth, &x, 1.0).unwrap();
    assert!(p1 > p0 + 3.0, "init {p0} final {p1}");
    assert!(solver::total_variation(&x) < solver::total_variation(&init));
    assert!(trace.is_monotone_within_stages());
}

#[test]
fn both_methods_beat_initialization() {
    use cassi_gsm::scene::{generate_scene, SceneSpec};
    let d = Dims::new(32, 32, 6).unwrap();
    let truth = generate_scene(&SceneSpec::new(d, 8, 21)).unwrap();
    let op = ForwardOperator::new(Mask2D::random_binary(32, 32, 0.5, 4).unwrap(), 6, 2).unwrap();
    let y = op.forward(&truth).unwrap();
    let (gsm, _) = solver::run(&y, &op, &Default::default()).unwrap();
    let (tv, _) = solver::tv_baseline(&y, &op, &TvConfig::default()).unwrap();
    let init = solver::initialize(&y, &op, InitMode::Adjoint).unwrap();
    let p_init = metrics::psnr(&truth, &init, 1.0).unwrap();
    let p_gsm = metrics::psnr(&truth, &gsm, 1.0).unwrap();
    let p_tv = metrics::psnr(&truth, &tv, 1.0).unwrap();
    assert!(
        p_gsm > p_init && p_tv > p_init,
        "init {p_init} gsm {p_gsm} tv {p_tv}"
    );
}
