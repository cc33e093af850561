//! Coordinate search over solver hyperparameters, minimising the mean
//! per-element L1 reconstruction error over a set of training pairs.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cube::{HsiCube, Measurement};
use crate::error::{Error, Result};
use crate::operator::ForwardOperator;
use crate::prior::ScalePrior;
use crate::solver::{self, SolverConfig, StepRule, TvConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Sigma,
    Eps,
    Bandwidth,
    Delta0,
    LambdaTv,
}

impl Param {
    pub const ALL: [Param; 5] = [
        Param::Sigma,
        Param::Eps,
        Param::Bandwidth,
        Param::Delta0,
        Param::LambdaTv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Sigma => "sigma",
            Param::Eps => "eps",
            Param::Bandwidth => "bandwidth",
            Param::Delta0 => "delta0",
            Param::LambdaTv => "lambda_tv",
        }
    }
}

/// A full hyperparameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPoint {
    pub sigma: f64,
    pub eps: f64,
    pub bandwidth: f64,
    pub delta0: f64,
    pub lambda_tv: f64,
}

impl ParamPoint {
    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Sigma => self.sigma,
            Param::Eps => self.eps,
            Param::Bandwidth => self.bandwidth,
            Param::Delta0 => self.delta0,
            Param::LambdaTv => self.lambda_tv,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::Sigma => self.sigma = v,
            Param::Eps => self.eps = v,
            Param::Bandwidth => self.bandwidth = v,
            Param::Delta0 => self.delta0 = v,
            Param::LambdaTv => self.lambda_tv = v,
        }
    }
}

/// Which reconstruction the parameters drive.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Gsm(SolverConfig),
    Tv(TvConfig),
}

impl Method {
    pub fn base_point(&self) -> ParamPoint {
        let (sigma, eps, bandwidth, delta0, lambda_tv) = match self {
            Method::Gsm(c) => {
                let eps = match c.prior {
                    ScalePrior::Jeffreys { eps } | ScalePrior::LocalVariance { eps, .. } => eps,
                    ScalePrior::Constant { .. } => crate::prior::DEFAULT_EPS,
                };
                (
                    c.sigma,
                    eps,
                    c.bandwidth,
                    c.step.initial(),
                    TvConfig::default().lambda,
                )
            }
            Method::Tv(t) => {
                let g = SolverConfig::default();
                (
                    g.sigma,
                    crate::prior::DEFAULT_EPS,
                    g.bandwidth,
                    t.step.initial(),
                    t.lambda,
                )
            }
        };
        ParamPoint {
            sigma,
            eps,
            bandwidth,
            delta0,
            lambda_tv,
        }
    }

    fn with_step(rule: StepRule, delta0: f64) -> StepRule {
        match rule {
            StepRule::Fixed(_) => StepRule::Fixed(delta0),
            StepRule::Backtracking { shrink, .. } => StepRule::Backtracking {
                initial: delta0,
                shrink,
            },
        }
    }

    pub fn reconstruct(
        &self,
        point: &ParamPoint,
        meas: &Measurement,
        op: &ForwardOperator,
    ) -> Result<HsiCube> {
        match self {
            Method::Gsm(base) => {
                let mut cfg = base.clone();
                cfg.sigma = point.sigma;
                cfg.bandwidth = point.bandwidth;
                cfg.step = Self::with_step(cfg.step, point.delta0);
                cfg.prior = match cfg.prior {
                    ScalePrior::Jeffreys { .. } => ScalePrior::Jeffreys { eps: point.eps },
                    ScalePrior::LocalVariance { window, .. } => ScalePrior::LocalVariance {
                        window,
                        eps: point.eps,
                    },
                    c @ ScalePrior::Constant { .. } => c,
                };
                solver::run(meas, op, &cfg).map(|(x, _)| x)
            }
            Method::Tv(base) => {
                let mut cfg = base.clone();
                cfg.lambda = point.lambda_tv;
                cfg.step = Self::with_step(cfg.step, point.delta0);
                solver::tv_baseline(meas, op, &cfg).map(|(x, _)| x)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub measurement: Measurement,
    pub truth: HsiCube,
}

/// `(1/D) sum_d ||reconstruct(y_d) - x_d||_1 / N`.
pub fn loss(
    point: &ParamPoint,
    pairs: &[TrainingPair],
    op: &ForwardOperator,
    method: &Method,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::param("loss needs at least one training pair"));
    }
    let mut total = 0.0;
    for (d, pair) in pairs.iter().enumerate() {
        op.check_cube(&pair.truth)?;
        let est = method
            .reconstruct(point, &pair.measurement, op)
            .map_err(|e| match e {
                Error::Divergence { context } => Error::Divergence {
                    context: format!("training pair {d}: {context}"),
                },
                other => other,
            })?;
        let l1: f64 = est
            .data()
            .iter()
            .zip(pair.truth.data())
            .map(|(&a, &b)| (a as f64 - b as f64).abs())
            .sum();
        total += l1 / est.data().len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub param: Param,
    pub values: Vec<f64>,
    /// Index into `values` of the starting point.
    pub start: usize,
}

impl ParamGrid {
    pub fn new(param: Param, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param(format!("grid for {} is empty", param.name())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param(format!(
                "grid for {} has non-finite values",
                param.name()
            )));
        }
        let start = values.len() / 2;
        Ok(ParamGrid {
            param,
            values,
            start,
        })
    }

    /// `n` evenly spaced values over `[lo, hi]`.
    pub fn linear(param: Param, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let values = match n {
            0 => vec![],
            1 => vec![lo],
            _ => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        };
        Self::new(param, values)
    }

    /// `n` log-spaced values over `[lo, hi]`, both positive.
    pub fn log(param: Param, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > 0.0) {
            return Err(Error::param("log grid bounds must be positive"));
        }
        let g = Self::linear(param, lo.ln(), hi.ln(), n)?;
        Self::new(param, g.values.into_iter().map(f64::exp).collect())
    }

    pub fn starting_at(mut self, start: usize) -> Result<Self> {
        if start >= self.values.len() {
            return Err(Error::Bounds(format!(
                "start index {start} outside grid of {}",
                self.values.len()
            )));
        }
        self.start = start;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunerSpec {
    pub grids: Vec<ParamGrid>,
    pub pairs: Vec<TrainingPair>,
    pub operator: ForwardOperator,
    pub method: Method,
    pub seed: u64,
    pub max_cycles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchEntry {
    pub eval_index: usize,
    pub point: ParamPoint,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: ParamPoint,
    pub best_loss: f64,
    pub initial_loss: f64,
    pub log: Vec<SearchEntry>,
}

impl SearchOutcome {
    pub fn log_csv(&self) -> String {
        let mut s = String::from("eval_index");
        for p in Param::ALL {
            s.push(',');
            s.push_str(p.name());
        }
        s.push_str(",loss\n");
        for e in &self.log {
            let _ = write!(s, "{}", e.eval_index);
            for p in Param::ALL {
                let _ = write!(s, ",{}", e.point.get(p));
            }
            let _ = writeln!(s, ",{}", e.loss);
        }
        s
    }
}

/// Cyclic coordinate search over the index lattice of `grids`.
///
/// Each coordinate is line-scanned over its whole grid with the others held
/// fixed; the search stops after a cycle without improvement or after
/// `max_cycles`. Points are evaluated at most once. Coordinate order is a
/// seeded shuffle.
pub fn coordinate_search_with<F>(
    grids: &[ParamGrid],
    base: ParamPoint,
    seed: u64,
    max_cycles: usize,
    mut eval: F,
) -> Result<SearchOutcome>
where
    F: FnMut(&ParamPoint) -> Result<f64>,
{
    if grids.is_empty() {
        return Err(Error::param("no parameter grids given"));
    }
    for (i, g) in grids.iter().enumerate() {
        if g.values.is_empty() {
            return Err(Error::param(format!(
                "grid for {} is empty",
                g.param.name()
            )));
        }
        if grids[..i].iter().any(|o| o.param == g.param) {
            return Err(Error::param(format!("{} appears twice", g.param.name())));
        }
    }
    let point_of = |idx: &[usize]| {
        let mut p = base;
        for (g, &i) in grids.iter().zip(idx) {
            p.set(g.param, g.values[i]);
        }
        p
    };

    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut log = Vec::new();
    let mut lookup = |idx: &[usize], log: &mut Vec<SearchEntry>| -> Result<f64> {
        if let Some(&v) = cache.get(idx) {
            return Ok(v);
        }
        let point = point_of(idx);
        let loss = eval(&point)?;
        log.push(SearchEntry {
            eval_index: log.len(),
            point,
            loss,
        });
        cache.insert(idx.to_vec(), loss);
        Ok(loss)
    };

    let mut current: Vec<usize> = grids
        .iter()
        .map(|g| g.start.min(g.values.len() - 1))
        .collect();
    let initial_loss = lookup(&current, &mut log)?;
    let mut best_loss = initial_loss;

    let mut order: Vec<usize> = (0..grids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    for _ in 0..max_cycles {
        let mut improved = false;
        for &k in &order {
            let mut best_j = current[k];
            for j in 0..grids[k].values.len() {
                let mut cand = current.clone();
                cand[k] = j;
                let l = lookup(&cand, &mut log)?;
                // NaN never wins
                if l < best_loss {
                    best_loss = l;
                    best_j = j;
                }
            }
            if best_j != current[k] {
                current[k] = best_j;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    Ok(SearchOutcome {
        best: point_of(&current),
        best_loss,
        initial_loss,
        log,
    })
}

/// Coordinate search driven by [`loss`] over `spec.pairs`.
pub fn coordinate_search(spec: &TunerSpec) -> Result<SearchOutcome> {
    if spec.pairs.is_empty() {
        return Err(Error::param("tuner needs at least one training pair"));
    }
    for (d, p) in spec.pairs.iter().enumerate() {
        spec.operator
            .check_measurement(&p.measurement)
            .map_err(|e| Error::Shape(format!("training pair {d}: {e}")))?;
        spec.operator
            .check_cube(&p.truth)
            .map_err(|e| Error::Shape(format!("training pair {d}: {e}")))?;
    }
    coordinate_search_with(
        &spec.grids,
        spec.method.base_point(),
        spec.seed,
        spec.max_cycles,
        |p| loss(p, &spec.pairs, &spec.operator, &spec.method),
    )
}
