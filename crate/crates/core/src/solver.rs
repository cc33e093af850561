//! MAP reconstruction under the Gaussian-scale-mixture prior.
//!
//! Each outer stage rebuilds the separable filters from the current
//! estimate, takes local means `u`, solves the weight subproblem for `w`,
//! and then runs `inner_steps` gradient steps on
//!
//! ```text
//! ||y - A x||^2 + sum_i w_i (x_i - u_i)^2
//! ```
//!
//! with `u` and `w` held fixed. One inner step per stage is the fully
//! interleaved scheme; more steps amortise the filter rebuild.

use std::fmt::Write as _;

use crate::cube::{HsiCube, Measurement};
use crate::error::{Error, Result};
use crate::filters::{self, DEFAULT_BANDWIDTH, DEFAULT_Q};
use crate::operator::ForwardOperator;
use crate::prior::{self, ScalePrior, DEFAULT_SIGMA};

/// Give up on a backtracking step after this many shrinks and keep `x`.
const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    /// Start every step at `initial`, multiply by `shrink` until the
    /// objective does not increase.
    Backtracking {
        initial: f64,
        shrink: f64,
    },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Backtracking {
            initial: 0.5,
            shrink: 0.5,
        }
    }
}

impl StepRule {
    fn validate(&self) -> Result<()> {
        match *self {
            StepRule::Fixed(d) if !(d.is_finite() && d >= 0.0) => {
                Err(Error::param(format!("step size must be >= 0, got {d}")))
            }
            StepRule::Backtracking { initial, shrink } => {
                if !(initial.is_finite() && initial > 0.0) {
                    return Err(Error::param(format!(
                        "initial step must be positive, got {initial}"
                    )));
                }
                if !(shrink > 0.0 && shrink < 1.0) {
                    return Err(Error::param(format!(
                        "backtracking shrink must lie in (0, 1), got {shrink}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn initial(&self) -> f64 {
        match *self {
            StepRule::Fixed(d) => d,
            StepRule::Backtracking { initial, .. } => initial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    #[default]
    Adjoint,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub stages: usize,
    pub inner_steps: usize,
    pub step: StepRule,
    pub sigma: f64,
    pub prior: ScalePrior,
    pub q: usize,
    pub bandwidth: f64,
    pub init: InitMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            stages: 4,
            inner_steps: 10,
            step: StepRule::default(),
            sigma: DEFAULT_SIGMA,
            prior: ScalePrior::default(),
            q: DEFAULT_Q,
            bandwidth: DEFAULT_BANDWIDTH,
            init: InitMode::Adjoint,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(Error::param("at least one stage is required"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::param(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.q == 0 || self.q.is_multiple_of(2) {
            return Err(Error::param(format!("q must be odd, got {}", self.q)));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::param(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        self.step.validate()?;
        self.prior.validate()
    }
}

/// Objective split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub total: f64,
    pub data_term: f64,
    pub prior_term: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub stage: usize,
    /// 0 is the state at stage entry; `k >= 1` follows the k-th step.
    pub inner_iter: usize,
    pub objective: f64,
    pub data_term: f64,
    pub prior_term: f64,
    /// Step size used; 0 when no step was taken.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
}

impl SolverTrace {
    fn push(&mut self, stage: usize, inner_iter: usize, obj: Objective, step: f64) {
        self.records.push(IterationRecord {
            stage,
            inner_iter,
            objective: obj.total,
            data_term: obj.data_term,
            prior_term: obj.prior_term,
            step,
        });
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,inner_iter,objective,data_term,prior_term,step\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{:e}",
                r.stage, r.inner_iter, r.objective, r.data_term, r.prior_term, r.step
            );
        }
        s
    }

    /// True when the objective never increases inside a stage.
    pub fn is_monotone_within_stages(&self) -> bool {
        self.records
            .windows(2)
            .filter(|p| p[0].stage == p[1].stage)
            .all(|p| p[1].objective <= p[0].objective)
    }
}

/// Starting estimate: zeros, or `A^T y` scaled by one global factor so its
/// maximum equals the per-band average `max(y) / L` of the measurement.
pub fn initialize(meas: &Measurement, op: &ForwardOperator, mode: InitMode) -> Result<HsiCube> {
    op.check_measurement(meas)?;
    let zero = HsiCube::zeros(op.cube_dims());
    if mode == InitMode::Zero {
        return Ok(zero);
    }
    let mut x = op.adjoint(meas)?;
    let current = x.max_value();
    if current <= 0.0 {
        return Ok(zero);
    }
    let target = meas.max_value() as f64 / op.bands() as f64;
    let scale = (target / current as f64) as f32;
    x.data_mut().iter_mut().for_each(|v| *v *= scale);
    Ok(x)
}

fn check_fields(x: &HsiCube, w: &[f32], u: &[f32]) -> Result<()> {
    let n = x.data().len();
    if w.len() != n || u.len() != n {
        return Err(Error::shape(format!(
            "weights ({}) and means ({}) must match the cube ({n})",
            w.len(),
            u.len()
        )));
    }
    Ok(())
}

/// `A x - y` accumulated in 64-bit.
fn residual(x: &HsiCube, y: &Measurement, op: &ForwardOperator) -> Vec<f64> {
    let d = op.cube_dims();
    let wm = op.sensor_width();
    let mut r: Vec<f64> = y.data().iter().map(|&v| -(v as f64)).collect();
    let mask = op.mask().data();
    let xs = x.data();
    for l in 0..d.bands {
        let off = op.shift(l);
        for row in 0..d.height {
            for c in 0..d.width {
                r[row * wm + c + off] +=
                    mask[row * d.width + c] as f64 * xs[d.index(l, row, c)] as f64;
            }
        }
    }
    r
}

fn prior_energy(x: &[f32], w: &[f32], u: &[f32]) -> f64 {
    x.iter()
        .zip(w)
        .zip(u)
        .map(|((&xi, &wi), &ui)| {
            let e = xi as f64 - ui as f64;
            wi as f64 * e * e
        })
        .sum()
}

/// `||y - A x||^2 + sum_i w_i (x_i - u_i)^2`.
pub fn objective(
    x: &HsiCube,
    w: &[f32],
    u: &[f32],
    y: &Measurement,
    op: &ForwardOperator,
) -> Result<Objective> {
    op.check_cube(x)?;
    op.check_measurement(y)?;
    check_fields(x, w, u)?;
    let data_term: f64 = residual(x, y, op).iter().map(|r| r * r).sum();
    let prior_term = prior_energy(x.data(), w, u);
    Ok(Objective {
        total: data_term + prior_term,
        data_term,
        prior_term,
    })
}

/// Gradient of [`objective`]: `2 (A^T (A x - y) + w (x - u))`.
pub fn gradient(
    x: &HsiCube,
    w: &[f32],
    u: &[f32],
    y: &Measurement,
    op: &ForwardOperator,
) -> Result<Vec<f64>> {
    op.check_cube(x)?;
    op.check_measurement(y)?;
    check_fields(x, w, u)?;
    let r = residual(x, y, op);
    Ok(data_gradient_from_residual(&r, op)
        .into_iter()
        .zip(x.data().iter().zip(w).zip(u))
        .map(|(g, ((&xi, &wi), &ui))| g + 2.0 * wi as f64 * (xi as f64 - ui as f64))
        .collect())
}

/// `2 A^T r` in 64-bit.
fn data_gradient_from_residual(r: &[f64], op: &ForwardOperator) -> Vec<f64> {
    let d = op.cube_dims();
    let wm = op.sensor_width();
    let mask = op.mask().data();
    let mut g = vec![0.0f64; d.len()];
    for l in 0..d.bands {
        let off = op.shift(l);
        for row in 0..d.height {
            for c in 0..d.width {
                g[d.index(l, row, c)] =
                    2.0 * mask[row * d.width + c] as f64 * r[row * wm + c + off];
            }
        }
    }
    g
}

fn descend(x: &HsiCube, grad: &[f64], delta: f64) -> Result<HsiCube> {
    let data = x
        .data()
        .iter()
        .zip(grad)
        .map(|(&xi, &g)| (xi as f64 - delta * g) as f32)
        .collect();
    HsiCube::from_vec(x.dims(), data).map(|c| c.with_peak(x.peak()))
}

/// One gradient step `x - 2 delta (A^T (A x - y) + w (x - u))`.
pub fn x_step(
    x: &HsiCube,
    w: &[f32],
    u: &[f32],
    y: &Measurement,
    op: &ForwardOperator,
    delta: f64,
) -> Result<HsiCube> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::param(format!("step size must be >= 0, got {delta}")));
    }
    let g = gradient(x, w, u, y, op)?;
    descend(x, &g, delta).map_err(|_| Error::Divergence {
        context: "x_step produced a non-finite value".into(),
    })
}

/// Take one step under `rule`, returning the new iterate, its objective and
/// the step size actually used.
fn line_step<F>(
    x: &HsiCube,
    current: Objective,
    grad: &[f64],
    rule: StepRule,
    eval: F,
) -> Result<(HsiCube, Objective, f64)>
where
    F: Fn(&HsiCube) -> Result<Objective>,
{
    match rule {
        StepRule::Fixed(delta) => {
            let next = descend(x, grad, delta)?;
            let obj = eval(&next)?;
            Ok((next, obj, delta))
        }
        StepRule::Backtracking { initial, shrink } => {
            let mut delta = initial;
            for _ in 0..MAX_BACKTRACKS {
                if let Ok(next) = descend(x, grad, delta) {
                    let obj = eval(&next)?;
                    if obj.total.is_finite() && obj.total <= current.total {
                        return Ok((next, obj, delta));
                    }
                }
                delta *= shrink;
            }
            Ok((x.clone(), current, 0.0))
        }
    }
}

fn diverged(stage: usize, inner: usize, what: &str) -> Error {
    Error::Divergence {
        context: format!("stage {stage}, inner step {inner}: {what}"),
    }
}

/// Full reconstruction: `cfg.stages` stages of filter/mean/weight refresh
/// followed by `cfg.inner_steps` gradient steps.
pub fn run(
    meas: &Measurement,
    op: &ForwardOperator,
    cfg: &SolverConfig,
) -> Result<(HsiCube, SolverTrace)> {
    cfg.validate()?;
    let mut x = initialize(meas, op, cfg.init)?;
    let mut trace = SolverTrace::default();
    for stage in 1..=cfg.stages {
        if cfg.inner_steps == 0 {
            continue;
        }
        let field = filters::build_filters(&x, cfg.q, cfg.bandwidth)?;
        let u = filters::local_mean(&x, &field)?;
        let w = prior::update_weights(&x, &u, cfg.sigma, &cfg.prior)?;
        let eval = |c: &HsiCube| objective(c, &w, &u, meas, op);
        let mut obj = eval(&x)?;
        if !obj.total.is_finite() {
            return Err(diverged(stage, 0, "objective is not finite"));
        }
        trace.push(stage, 0, obj, 0.0);
        for k in 1..=cfg.inner_steps {
            let g = gradient(&x, &w, &u, meas, op)?;
            if g.iter().any(|v| !v.is_finite()) {
                return Err(diverged(stage, k, "gradient is not finite"));
            }
            let (next, next_obj, delta) =
                line_step(&x, obj, &g, cfg.step, eval).map_err(|e| match e {
                    Error::NonFinite(_) => diverged(stage, k, "iterate is not finite"),
                    other => other,
                })?;
            if !next_obj.total.is_finite() {
                return Err(diverged(stage, k, "objective is not finite"));
            }
            x = next;
            obj = next_obj;
            trace.push(stage, k, obj, delta);
        }
    }
    Ok((x, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvConfig {
    /// Weight of the anisotropic spatial total variation.
    pub lambda: f64,
    pub iterations: usize,
    /// Dual projection sweeps per denoising call.
    pub sweeps: usize,
    pub step: StepRule,
    pub init: InitMode,
}

impl Default for TvConfig {
    fn default() -> Self {
        TvConfig {
            lambda: 0.01,
            iterations: 100,
            sweeps: 20,
            step: StepRule::default(),
            init: InitMode::Adjoint,
        }
    }
}

/// Anisotropic spatial TV, summed over bands.
pub fn total_variation(x: &HsiCube) -> f64 {
    let d = x.dims();
    let mut tv = 0.0f64;
    for l in 0..d.bands {
        let b = x.band(l);
        for r in 0..d.height {
            for c in 0..d.width {
                let v = b[r * d.width + c] as f64;
                if r + 1 < d.height {
                    tv += (b[(r + 1) * d.width + c] as f64 - v).abs();
                }
                if c + 1 < d.width {
                    tv += (b[r * d.width + c + 1] as f64 - v).abs();
                }
            }
        }
    }
    tv
}

/// Approximate `argmin_x 0.5 ||x - z||^2 + tau * TV(x)` by projected
/// gradient on the dual (box-constrained) variables.
fn tv_denoise(z: &HsiCube, tau: f64, sweeps: usize) -> Result<HsiCube> {
    if tau <= 0.0 || sweeps == 0 {
        return Ok(z.clone());
    }
    let d = z.dims();
    let (h, w) = (d.height, d.width);
    let gamma = 0.25;
    let mut out = Vec::with_capacity(d.len());
    for l in 0..d.bands {
        let zb: Vec<f64> = z.band(l).iter().map(|&v| v as f64).collect();
        // p_v on vertical edges (r, r+1), p_h on horizontal edges (c, c+1)
        let mut pv = vec![0.0f64; h * w];
        let mut ph = vec![0.0f64; h * w];
        let mut xb = zb.clone();
        for _ in 0..sweeps {
            for r in 0..h {
                for c in 0..w {
                    let i = r * w + c;
                    if r + 1 < h {
                        pv[i] = (pv[i] + gamma * (xb[i + w] - xb[i])).clamp(-tau, tau);
                    }
                    if c + 1 < w {
                        ph[i] = (ph[i] + gamma * (xb[i + 1] - xb[i])).clamp(-tau, tau);
                    }
                }
            }
            // x = z - D^T p
            for r in 0..h {
                for c in 0..w {
                    let i = r * w + c;
                    let mut dt = 0.0;
                    if r + 1 < h {
                        dt -= pv[i];
                    }
                    if r > 0 {
                        dt += pv[i - w];
                    }
                    if c + 1 < w {
                        dt -= ph[i];
                    }
                    if c > 0 {
                        dt += ph[i - 1];
                    }
                    xb[i] = zb[i] - dt;
                }
            }
        }
        out.extend(xb.into_iter().map(|v| v as f32));
    }
    HsiCube::from_vec(d, out)
}

/// Total-variation baseline: proximal gradient on
/// `||y - A x||^2 + lambda * TV(x)` with an inexact TV proximal step.
pub fn tv_baseline(
    meas: &Measurement,
    op: &ForwardOperator,
    cfg: &TvConfig,
) -> Result<(HsiCube, SolverTrace)> {
    if !(cfg.lambda.is_finite() && cfg.lambda >= 0.0) {
        return Err(Error::param(format!(
            "lambda must be >= 0, got {}",
            cfg.lambda
        )));
    }
    cfg.step.validate()?;
    let mut x = initialize(meas, op, cfg.init)?;
    let eval = |c: &HsiCube| -> Objective {
        let data_term: f64 = residual(c, meas, op).iter().map(|r| r * r).sum();
        let prior_term = cfg.lambda * total_variation(c);
        Objective {
            total: data_term + prior_term,
            data_term,
            prior_term,
        }
    };
    let mut trace = SolverTrace::default();
    let mut obj = eval(&x);
    trace.push(1, 0, obj, 0.0);
    for k in 1..=cfg.iterations {
        let g = data_gradient_from_residual(&residual(&x, meas, op), op);
        let attempt = |delta: f64| -> Option<(HsiCube, Objective)> {
            let z = descend(&x, &g, delta).ok()?;
            let next = tv_denoise(&z, delta * cfg.lambda, cfg.sweeps).ok()?;
            let o = eval(&next);
            o.total.is_finite().then_some((next, o))
        };
        let (next, next_obj, used) = match cfg.step {
            StepRule::Fixed(delta) => {
                let (n, o) =
                    attempt(delta).ok_or_else(|| diverged(1, k, "non-finite TV iterate"))?;
                (n, o, delta)
            }
            StepRule::Backtracking { initial, shrink } => {
                let mut delta = initial;
                let mut found = None;
                for _ in 0..MAX_BACKTRACKS {
                    if let Some((n, o)) = attempt(delta) {
                        if o.total <= obj.total {
                            found = Some((n, o, delta));
                            break;
                        }
                    }
                    delta *= shrink;
                }
                found.unwrap_or((x.clone(), obj, 0.0))
            }
        };
        x = next;
        obj = next_obj;
        trace.push(1, k, obj, used);
    }
    Ok((x, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::{Dims, Mask2D};
    use rand::{Rng, SeedableRng};

    fn example_op() -> ForwardOperator {
        ForwardOperator::new(Mask2D::new(1, 2, vec![1.0, 0.5]).unwrap(), 2, 1).unwrap()
    }

    fn random_cube(d: Dims, seed: u64) -> HsiCube {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        HsiCube::from_vec(d, (0..d.len()).map(|_| rng.random()).collect()).unwrap()
    }

    #[test]
    fn zero_measurement_initializes_to_zero() {
        let op = example_op();
        let y = Measurement::new(1, 3, 1, 2, vec![0.0; 3]).unwrap();
        for mode in [InitMode::Adjoint, InitMode::Zero] {
            let x = initialize(&y, &op, mode).unwrap();
            assert!(x.data().iter().all(|&v| v == 0.0));
        }
        let y = Measurement::new(1, 3, 1, 2, vec![1.0, 2.0, 3.0]).unwrap();
        let x = initialize(&y, &op, InitMode::Zero).unwrap();
        assert!(x.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn objective_zero_at_truth() {
        let op = example_op();
        let x = HsiCube::from_vec(op.cube_dims(), vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        let y = op.forward(&x).unwrap();
        let w = vec![1.0; 4];
        let o = objective(&x, &w, x.data(), &y, &op).unwrap();
        assert_eq!((o.total, o.data_term, o.prior_term), (0.0, 0.0, 0.0));
    }

    #[test]
    fn zero_weights_leave_data_term() {
        let op = example_op();
        let x = HsiCube::from_vec(op.cube_dims(), vec![1.0, 0.0, 0.5, 0.25]).unwrap();
        let y = Measurement::new(1, 3, 1, 2, vec![0.3, 0.1, 0.9]).unwrap();
        let o = objective(&x, &[0.0; 4], &[0.7; 4], &y, &op).unwrap();
        assert_eq!(o.total, o.data_term);
        // A x = [1, 0.5, 0.125]
        let expected = 0.7f64.powi(2) + 0.4f64.powi(2) + 0.775f64.powi(2);
        assert!((o.data_term - expected).abs() < 1e-6);
    }

    #[test]
    fn zero_step_is_identity() {
        let op = example_op();
        let x = HsiCube::from_vec(op.cube_dims(), vec![1.0, 0.0, 0.5, 0.25]).unwrap();
        let y = Measurement::new(1, 3, 1, 2, vec![0.3, 0.1, 0.9]).unwrap();
        assert_eq!(x_step(&x, &[1.0; 4], &[0.2; 4], &y, &op, 0.0).unwrap(), x);
    }

    #[test]
    fn unregularised_step_on_zero_data() {
        let mask = Mask2D::random_uniform(3, 3, 1).unwrap();
        let op = ForwardOperator::new(mask, 2, 1).unwrap();
        let x = random_cube(op.cube_dims(), 2);
        let zero_y = op.forward(&HsiCube::zeros(op.cube_dims())).unwrap();
        let n = x.data().len();
        let delta = 0.1;
        let stepped = x_step(&x, &vec![0.0; n], &vec![0.0; n], &zero_y, &op, delta).unwrap();
        let atax = op.adjoint(&op.forward(&x).unwrap()).unwrap();
        for ((s, &xi), &a) in stepped.data().iter().zip(x.data()).zip(atax.data()) {
            assert!((s - (xi - 2.0 * delta as f32 * a)).abs() < 1e-6);
        }
    }

    #[test]
    fn no_inner_steps_returns_init() {
        let mask = Mask2D::random_binary(12, 12, 0.5, 3).unwrap();
        let op = ForwardOperator::new(mask, 4, 2).unwrap();
        let y = op.forward(&random_cube(op.cube_dims(), 4)).unwrap();
        let cfg = SolverConfig {
            stages: 1,
            inner_steps: 0,
            ..SolverConfig::default()
        };
        let (x, trace) = run(&y, &op, &cfg).unwrap();
        assert_eq!(x, initialize(&y, &op, InitMode::Adjoint).unwrap());
        assert!(trace.records.is_empty());
    }

    #[test]
    fn run_trace_monotone_and_deterministic() {
        let mask = Mask2D::random_binary(12, 12, 0.5, 5).unwrap();
        let op = ForwardOperator::new(mask, 4, 2).unwrap();
        let y = op.forward(&random_cube(op.cube_dims(), 6)).unwrap();
        let cfg = SolverConfig {
            stages: 2,
            inner_steps: 5,
            q: 3,
            ..SolverConfig::default()
        };
        let (a, ta) = run(&y, &op, &cfg).unwrap();
        let (b, tb) = run(&y, &op, &cfg).unwrap();
        assert!(ta.is_monotone_within_stages());
        assert_eq!(ta.records.len(), 2 * 6);
        let bits = |c: &HsiCube| c.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(ta.to_csv(), tb.to_csv());
    }

    #[test]
    fn invalid_config() {
        let op = example_op();
        let y = Measurement::new(1, 3, 1, 2, vec![0.0; 3]).unwrap();
        let bad = [
            SolverConfig {
                stages: 0,
                ..SolverConfig::default()
            },
            SolverConfig {
                sigma: 0.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                q: 4,
                ..SolverConfig::default()
            },
            SolverConfig {
                step: StepRule::Backtracking {
                    initial: 0.5,
                    shrink: 1.0,
                },
                ..SolverConfig::default()
            },
            SolverConfig {
                step: StepRule::Backtracking {
                    initial: 0.0,
                    shrink: 0.5,
                },
                ..SolverConfig::default()
            },
        ];
        for cfg in bad {
            assert!(
                matches!(run(&y, &op, &cfg), Err(Error::Parameter(_))),
                "{cfg:?}"
            );
        }
    }

    #[test]
    fn fixed_step_divergence_is_reported() {
        let mask = Mask2D::ones(6, 6).unwrap();
        let op = ForwardOperator::new(mask, 3, 1).unwrap();
        let y = op.forward(&random_cube(op.cube_dims(), 8)).unwrap();
        let cfg = SolverConfig {
            stages: 1,
            inner_steps: 400,
            q: 3,
            step: StepRule::Fixed(50.0),
            ..SolverConfig::default()
        };
        match run(&y, &op, &cfg) {
            Err(Error::Divergence { context }) => assert!(context.contains("stage 1")),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn tv_zero_lambda_is_least_squares_descent() {
        let mask = Mask2D::random_uniform(5, 5, 9).unwrap();
        let op = ForwardOperator::new(mask, 3, 1).unwrap();
        let y = op.forward(&random_cube(op.cube_dims(), 10)).unwrap();
        let cfg = TvConfig {
            lambda: 0.0,
            iterations: 1,
            step: StepRule::Fixed(0.05),
            ..TvConfig::default()
        };
        let (x, _) = tv_baseline(&y, &op, &cfg).unwrap();
        let x0 = initialize(&y, &op, InitMode::Adjoint).unwrap();
        let n = x0.data().len();
        let expected = x_step(&x0, &vec![0.0; n], &vec![0.0; n], &y, &op, 0.05).unwrap();
        assert_eq!(x, expected);
    }

    #[test]
    fn tv_denoise_flattens_and_respects_zero_tau() {
        let d = Dims::new(6, 6, 1).unwrap();
        let z = random_cube(d, 11);
        assert_eq!(tv_denoise(&z, 0.0, 10).unwrap(), z);
        let smooth = tv_denoise(&z, 0.05, 200).unwrap();
        assert!(total_variation(&smooth) < total_variation(&z));
        // mean is preserved by the dual update
        let mean = |c: &HsiCube| c.data().iter().map(|&v| v as f64).sum::<f64>();
        assert!((mean(&smooth) - mean(&z)).abs() < 1e-4);
    }

    #[test]
    fn trace_csv_header() {
        let mut t = SolverTrace::default();
        t.push(
            1,
            0,
            Objective {
                total: 1.5,
                data_term: 1.0,
                prior_term: 0.5,
            },
            0.0,
        );
        assert_eq!(
            t.to_csv(),
            "stage,inner_iter,objective,data_term,prior_term,step\n1,0,1.5e0,1e0,5e-1,0e0\n"
        );
    }
}
