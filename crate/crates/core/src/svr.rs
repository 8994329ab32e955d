//! ε-insensitive support vector regression.
//!
//! The dual is solved in its 2n-variable form
//!
//! ```text
//! min_β  ½ βᵀQβ + pᵀβ    s.t.  zᵀβ = 0,  0 ≤ β ≤ C
//! β = [α; α*],  z = [+1; −1],  p = [ε − y; ε + y],  Q_st = z_s z_t K(x_s, x_t)
//! ```
//!
//! by sequential pairwise optimization: each step picks the maximal
//! violating pair (ties resolved to the lowest index), minimizes the
//! objective analytically along the feasible direction, and clips to the
//! box. Kernel rows are held in an LRU cache of configurable size.

use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, KernelSpec, SvrConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SvrError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training set is empty")]
    Empty,
    #[error("target has {got} entries for {expected} rows")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Config(#[from] DomainError),
}

/// Curvature floor for non positive-definite pairs.
const TAU: f64 = 1e-12;
/// Relative distance to a box bound below which a variable is put on it.
const BOUND_SNAP: f64 = 1e-12;

impl KernelSpec {
    /// Kernel value without a dimension check.
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        let dot = || u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        match *self {
            KernelSpec::Linear => dot(),
            KernelSpec::Polynomial {
                degree,
                gamma,
                coef0,
            } => (gamma * dot() + coef0).powi(degree as i32),
            KernelSpec::Radial { gamma } => {
                let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            KernelSpec::Sigmoid { gamma, coef0 } => (gamma * dot() + coef0).tanh(),
        }
    }
}

pub fn kernel_eval(k: &KernelSpec, u: &[f64], v: &[f64]) -> Result<f64, SvrError> {
    if u.len() != v.len() {
        return Err(SvrError::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(k.eval(u, v))
}

/// Per-feature centering and scaling learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let p = x.first().map_or(0, Vec::len);
        let n = x.len() as f64;
        let mut means = vec![0.0; p];
        for row in x {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut scales = vec![0.0; p];
        for row in x {
            for j in 0..p {
                scales[j] += (row[j] - means[j]).powi(2) / n;
            }
        }
        // Constant columns are only centered.
        let scales = scales
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Standardizer { means, scales }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    /// Support vectors in the (possibly standardized) input space.
    pub support_vectors: Vec<Vec<f64>>,
    /// `α − α*` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub config: SvrConfig,
    /// Tube half-width actually used.
    pub epsilon: f64,
    pub n_support: usize,
    pub n_features: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Maximized dual objective at the returned solution.
    pub dual_objective: f64,
    pub scaler: Option<Standardizer>,
    /// Target centering and scaling; predictions are mapped back through it.
    pub target: Option<TargetScale>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub mean: f64,
    pub scale: f64,
}

impl TargetScale {
    pub fn fit(y: &[f64]) -> Self {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let sd = std_dev(y);
        TargetScale {
            mean,
            scale: if sd > 0.0 { sd } else { 1.0 },
        }
    }
}

/// Full dual variables of a fit, indexed like the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    /// Maximized dual objective after every pairwise update.
    pub objective_trace: Vec<f64>,
    /// Final maximal KKT violation `m(β) − M(β)`.
    pub kkt_gap: f64,
}

struct KernelCache<'a> {
    x: &'a [Vec<f64>],
    kernel: KernelSpec,
    capacity: usize,
    rows: HashMap<usize, (Rc<Vec<f64>>, u64)>,
    clock: u64,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a [Vec<f64>], kernel: KernelSpec, capacity: usize) -> Self {
        KernelCache {
            x,
            kernel,
            capacity: capacity.max(2),
            rows: HashMap::new(),
            clock: 0,
        }
    }

    fn row(&mut self, i: usize) -> Rc<Vec<f64>> {
        self.clock += 1;
        let clock = self.clock;
        if let Some(entry) = self.rows.get_mut(&i) {
            entry.1 = clock;
            return Rc::clone(&entry.0);
        }
        if self.rows.len() >= self.capacity {
            let oldest = self
                .rows
                .iter()
                .min_by_key(|(_, (_, stamp))| *stamp)
                .map(|(k, _)| *k)
                .expect("cache is non-empty");
            self.rows.remove(&oldest);
        }
        let xi = &self.x[i];
        let row: Vec<f64> = self.x.iter().map(|xj| self.kernel.eval(xi, xj)).collect();
        let row = Rc::new(row);
        self.rows.insert(i, (Rc::clone(&row), clock));
        row
    }
}

fn std_dev(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Default tube half-width: a tenth of the target's standard deviation.
pub fn default_epsilon(y: &[f64]) -> f64 {
    0.1 * std_dev(y)
}

pub fn svr_fit(x: &[Vec<f64>], y: &[f64], cfg: &SvrConfig) -> Result<SvrModel, SvrError> {
    svr_solve(x, y, cfg, false).map(|(m, _)| m)
}

/// Fits the model and returns the full dual solution. With `trace` set, the
/// dual objective is recorded after every update.
pub fn svr_solve(
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &SvrConfig,
    trace: bool,
) -> Result<(SvrModel, DualSolution), SvrError> {
    let cfg = cfg.validate()?;
    if x.is_empty() {
        return Err(SvrError::Empty);
    }
    if y.len() != x.len() {
        return Err(SvrError::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let p = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != p) {
        return Err(SvrError::DimensionMismatch {
            expected: p,
            got: bad.len(),
        });
    }

    let scaler = cfg.standardize.then(|| Standardizer::fit(x));
    let scaled: Vec<Vec<f64>>;
    let xs: &[Vec<f64>] = match &scaler {
        Some(s) => {
            scaled = x.iter().map(|r| s.apply(r)).collect();
            &scaled
        }
        None => x,
    };

    let epsilon = cfg.epsilon.unwrap_or_else(|| default_epsilon(y));
    // With standardization the dual is solved for (y - mean) / sd, and the
    // tube shrinks by the same factor.
    let target = cfg.standardize.then(|| TargetScale::fit(y));
    let ys: Vec<f64> = match &target {
        Some(t) => y.iter().map(|v| (v - t.mean) / t.scale).collect(),
        None => y.to_vec(),
    };
    let y = &ys[..];
    let eps = target.as_ref().map_or(epsilon, |t| epsilon / t.scale);
    let c = cfg.cost;
    let l = xs.len();
    let m = 2 * l;
    let z = |t: usize| if t < l { 1.0 } else { -1.0 };
    let src = |t: usize| if t < l { t } else { t - l };

    let lin: Vec<f64> = (0..m)
        .map(|t| if t < l { eps - y[t] } else { eps + y[t - l] })
        .collect();
    let diag: Vec<f64> = xs.iter().map(|r| cfg.kernel.eval(r, r)).collect();
    let mut beta = vec![0.0; m];
    let mut grad = lin.clone();
    let mut cache = KernelCache::new(xs, cfg.kernel, cfg.cache_rows);

    let objective = |beta: &[f64], grad: &[f64]| -> f64 {
        // f(β) = ½ Σ β_t (G_t + p_t); the dual maximizes −f.
        -0.5 * beta
            .iter()
            .zip(grad.iter().zip(&lin))
            .map(|(b, (g, p))| b * (g + p))
            .sum::<f64>()
    };
    let mut objective_trace = Vec::new();
    if trace {
        objective_trace.push(objective(&beta, &grad));
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut kkt_gap = f64::INFINITY;
    while iterations < cfg.max_iterations {
        // Maximal violating pair.
        let (mut i, mut g_max) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut g_max2) = (usize::MAX, f64::NEG_INFINITY);
        for t in 0..m {
            let zt = z(t);
            let in_up = if zt > 0.0 { beta[t] < c } else { beta[t] > 0.0 };
            let in_low = if zt > 0.0 { beta[t] > 0.0 } else { beta[t] < c };
            if in_up && -zt * grad[t] > g_max {
                g_max = -zt * grad[t];
                i = t;
            }
            if in_low && zt * grad[t] > g_max2 {
                g_max2 = zt * grad[t];
                j = t;
            }
        }
        kkt_gap = g_max + g_max2;
        if kkt_gap < cfg.tolerance || i == usize::MAX || j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let ki = cache.row(src(i));
        let kj = cache.row(src(j));
        let (zi, zj) = (z(i), z(j));
        let q_ij = zi * zj * ki[src(j)];
        let (qd_i, qd_j) = (diag[src(i)], diag[src(j)]);
        let (old_i, old_j) = (beta[i], beta[j]);

        if zi != zj {
            let mut quad = qd_i + qd_j + 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = beta[i] - beta[j];
            beta[i] += delta;
            beta[j] += delta;
            if diff > 0.0 {
                if beta[j] < 0.0 {
                    beta[j] = 0.0;
                    beta[i] = diff;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = -diff;
            }
            if diff > 0.0 {
                if beta[i] > c {
                    beta[i] = c;
                    beta[j] = c - diff;
                }
            } else if beta[j] > c {
                beta[j] = c;
                beta[i] = c + diff;
            }
        } else {
            let mut quad = qd_i + qd_j - 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = beta[i] + beta[j];
            beta[i] -= delta;
            beta[j] += delta;
            if sum > c {
                if beta[i] > c {
                    beta[i] = c;
                    beta[j] = sum - c;
                }
            } else if beta[j] < 0.0 {
                beta[j] = 0.0;
                beta[i] = sum;
            }
            if sum > c {
                if beta[j] > c {
                    beta[j] = c;
                    beta[i] = sum - c;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = sum;
            }
        }

        // Rounding in the clipped updates can leave a variable an ulp away
        // from its bound, which would later count it as free.
        for t in [i, j] {
            if beta[t] < BOUND_SNAP * c {
                beta[t] = 0.0;
            } else if beta[t] > c - BOUND_SNAP * c {
                beta[t] = c;
            }
        }
        let (d_i, d_j) = (beta[i] - old_i, beta[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            let k = src(t);
            *g += z(t) * (zi * ki[k] * d_i + zj * kj[k] * d_j);
        }
        if trace {
            objective_trace.push(objective(&beta, &grad));
        }
    }

    // Bias from free variables, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut n_free) = (0.0, 0usize);
    for t in 0..m {
        let zg = z(t) * grad[t];
        let at_upper = beta[t] >= c;
        let at_lower = beta[t] <= 0.0;
        if at_upper {
            if z(t) < 0.0 {
                ub = ub.min(zg);
            } else {
                lb = lb.max(zg);
            }
        } else if at_lower {
            if z(t) > 0.0 {
                ub = ub.min(zg);
            } else {
                lb = lb.max(zg);
            }
        } else {
            n_free += 1;
            free_sum += zg;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    let alpha: Vec<f64> = beta[..l].to_vec();
    let alpha_star: Vec<f64> = beta[l..].to_vec();
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for i in 0..l {
        let coef = alpha[i] - alpha_star[i];
        if coef != 0.0 {
            support_vectors.push(xs[i].clone());
            dual_coefs.push(coef);
        }
    }
    let dual_objective = objective(&beta, &grad);
    let model = SvrModel {
        n_support: dual_coefs.len(),
        support_vectors,
        dual_coefs,
        bias: -rho,
        kernel: cfg.kernel,
        config: cfg,
        epsilon,
        n_features: p,
        iterations,
        converged,
        dual_objective,
        scaler,
        target,
    };
    Ok((
        model,
        DualSolution {
            alpha,
            alpha_star,
            objective_trace,
            kkt_gap,
        },
    ))
}

impl SvrModel {
    pub fn predict_one(&self, x: &[f64]) -> Result<f64, SvrError> {
        if x.len() != self.n_features {
            return Err(SvrError::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let scaled;
        let x = match &self.scaler {
            Some(s) => {
                scaled = s.apply(x);
                &scaled[..]
            }
            None => x,
        };
        let f = self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias;
        Ok(match &self.target {
            Some(t) => t.mean + t.scale * f,
            None => f,
        })
    }

    /// Explicit weight vector `w = Σ (α − α*) x_i` for linear-kernel models,
    /// in the model's input space.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != KernelSpec::Linear {
            return None;
        }
        let mut w = vec![0.0; self.n_features];
        for (sv, c) in self.support_vectors.iter().zip(&self.dual_coefs) {
            for (wj, xj) in w.iter_mut().zip(sv) {
                *wj += c * xj;
            }
        }
        Some(w)
    }
}

pub fn svr_predict(model: &SvrModel, x_new: &[Vec<f64>]) -> Result<Vec<f64>, SvrError> {
    x_new.iter().map(|r| model.predict_one(r)).collect()
}
