//! Independent reference implementations used only by tests.
//!
//! They share no numerical code with the library: each solves the same
//! problem the slow, obvious way.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use rentyield::text::normalize_name;
use rentyield::{KernelSpec, Listing, Operation, SizeBucket};

// ---------------------------------------------------------------- OLS

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Coefficients from the normal equations `XᵀX β = Xᵀy`.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            xty[i] += row[i] * yi;
            for j in 0..p {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    solve(xtx, xty)
}

// ---------------------------------------------------------------- finance

/// Balance left after paying `payment` for `months` months on `loan`.
pub fn amortize(loan: f64, monthly_rate: f64, months: u32, payment: f64) -> f64 {
    let mut balance = loan;
    for _ in 0..months {
        balance = balance * (1.0 + monthly_rate) - payment;
    }
    balance
}

/// Mortgage by bisection on the payment that clears the loan.
pub fn mortgage_by_bisection(loan: f64, monthly_rate: f64, months: u32) -> f64 {
    let (mut lo, mut hi) = (0.0, loan * (1.0 + monthly_rate).powi(months as i32));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if amortize(loan, monthly_rate, months, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn bucket_of(size: f64) -> Option<&'static str> {
    if size < 30.0 {
        None
    } else if size < 60.0 {
        Some("30_60")
    } else if size < 90.0 {
        Some("60_90")
    } else if size < 120.0 {
        Some("90_120")
    } else if size < 150.0 {
        Some("120_150")
    } else {
        Some("150_plus")
    }
}

/// `(normalized neighborhood, bucket label) -> (mean rent, mean mortgage)`
/// by scanning the listings once per group.
pub fn brute_index(
    listings: &[Listing],
    payment_per_euro: f64,
) -> Vec<(String, String, Option<f64>, usize, usize)> {
    let mut keys: Vec<(String, &'static str)> = Vec::new();
    for l in listings {
        if let Some(b) = bucket_of(l.size) {
            let k = (normalize_name(&l.neighborhood), b);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
    }
    let mut out = Vec::new();
    for (hood, bucket) in keys {
        let member = |l: &&Listing| normalize_name(&l.neighborhood) == hood && bucket_of(l.size) == Some(bucket);
        let rents: Vec<f64> = listings
            .iter()
            .filter(member)
            .filter(|l| l.operation == Operation::Rent)
            .map(|l| l.price)
            .collect();
        let mortgages: Vec<f64> = listings
            .iter()
            .filter(member)
            .filter(|l| l.operation == Operation::Sale)
            .map(|l| l.price * payment_per_euro)
            .collect();
        let index = if rents.is_empty() || mortgages.is_empty() {
            None
        } else {
            let r = rents.iter().sum::<f64>() / rents.len() as f64;
            let m = mortgages.iter().sum::<f64>() / mortgages.len() as f64;
            Some(r / m)
        };
        out.push((hood, bucket.to_string(), index, rents.len(), mortgages.len()));
    }
    out
}

pub fn bucket_label(b: SizeBucket) -> &'static str {
    b.label()
}

// ---------------------------------------------------------------- trees

#[derive(Debug, Clone, PartialEq)]
pub enum OracleNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<OracleNode>,
        right: Box<OracleNode>,
    },
    Leaf(f64),
}

fn sse(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum()
}

/// Grows a regression tree by trying every midpoint threshold of every
/// candidate feature and recomputing both children's SSE from scratch.
/// Candidate features are drawn from `rng` with the library's documented
/// contract: one `index::sample(rng, p, mtry)` per splittable node, in
/// depth-first, left-first order.
pub fn oracle_tree(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    mtry: usize,
    min_leaf: usize,
    rng: &mut ChaCha8Rng,
) -> OracleNode {
    let ys: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
    if ys.iter().all(|&v| v == ys[0]) {
        return OracleNode::Leaf(ys[0]);
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    if rows.len() <= min_leaf {
        return OracleNode::Leaf(mean);
    }
    let p = x[0].len();
    let mut feats = index::sample(rng, p, mtry).into_vec();
    feats.sort_unstable();
    let parent = sse(&ys);
    // (feature, threshold, reduction)
    let mut cands: Vec<(usize, f64, f64)> = Vec::new();
    for &f in &feats {
        let mut vals: Vec<f64> = rows.iter().map(|&r| x[r][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let t = if t < w[1] { t } else { w[0] };
            let left: Vec<f64> = rows.iter().filter(|&&r| x[r][f] <= t).map(|&r| y[r]).collect();
            let right: Vec<f64> = rows.iter().filter(|&&r| x[r][f] > t).map(|&r| y[r]).collect();
            cands.push((f, t, parent - sse(&left) - sse(&right)));
        }
    }
    let best = cands.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    if cands.is_empty() || best <= 1e-12 * parent {
        return OracleNode::Leaf(mean);
    }
    let (f, t, _) = *cands
        .iter()
        .filter(|c| c.2 >= best - 1e-9 * parent)
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .unwrap();
    let left: Vec<usize> = rows.iter().copied().filter(|&r| x[r][f] <= t).collect();
    let right: Vec<usize> = rows.iter().copied().filter(|&r| x[r][f] > t).collect();
    let l = oracle_tree(x, y, &left, mtry, min_leaf, rng);
    let r = oracle_tree(x, y, &right, mtry, min_leaf, rng);
    OracleNode::Split {
        feature: f,
        threshold: t,
        left: Box::new(l),
        right: Box::new(r),
    }
}

// ---------------------------------------------------------------- SVR

pub fn kernel(k: &KernelSpec, u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    match *k {
        KernelSpec::Linear => dot,
        KernelSpec::Polynomial { degree, gamma, coef0 } => (gamma * dot + coef0).powi(degree as i32),
        KernelSpec::Radial { gamma } => {
            let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            (-gamma * d2).exp()
        }
        KernelSpec::Sigmoid { gamma, coef0 } => (gamma * dot + coef0).tanh(),
    }
}

pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    /// Maximized dual objective.
    pub objective: f64,
    pub bias: f64,
}

/// Euclidean projection onto `{0 <= b <= c, zᵀb = 0}` with `z = ±1`, by
/// bisection on the multiplier of the equality constraint.
fn project(v: &[f64], z: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> {
        v.iter()
            .zip(z)
            .map(|(vi, zi)| (vi - lam * zi).clamp(0.0, c))
            .collect()
    };
    let g = |lam: f64| -> f64 { at(lam).iter().zip(z).map(|(b, zi)| b * zi).sum() };
    let span = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    // g is non-increasing in lam.
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// ε-SVR dual solved densely with accelerated projected gradient (FISTA
/// with restarts).
pub fn qp_svr(x: &[Vec<f64>], y: &[f64], k: &KernelSpec, c: f64, eps: f64) -> QpSolution {
    let l = x.len();
    let m = 2 * l;
    let z: Vec<f64> = (0..m).map(|t| if t < l { 1.0 } else { -1.0 }).collect();
    let src = |t: usize| if t < l { t } else { t - l };
    let q: Vec<Vec<f64>> = (0..m)
        .map(|s| (0..m).map(|t| z[s] * z[t] * kernel(k, &x[src(s)], &x[src(t)])).collect())
        .collect();
    let lin: Vec<f64> = (0..m).map(|t| if t < l { eps - y[t] } else { eps + y[t - l] }).collect();
    let f = |b: &[f64]| -> f64 {
        let mut v = 0.0;
        for s in 0..m {
            let qb: f64 = (0..m).map(|t| q[s][t] * b[t]).sum();
            v += 0.5 * b[s] * qb + lin[s] * b[s];
        }
        v
    };
    let grad = |b: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|s| (0..m).map(|t| q[s][t] * b[t]).sum::<f64>() + lin[s])
            .collect()
    };
    let lip = (0..m)
        .map(|s| q[s].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let mut b = vec![0.0; m];
    let mut yk = b.clone();
    let mut tk = 1.0f64;
    let mut fb = f(&b);
    for _ in 0..200_000 {
        let g = grad(&yk);
        let step: Vec<f64> = (0..m).map(|s| yk[s] - g[s] / lip).collect();
        let nb = project(&step, &z, c);
        let nf = f(&nb);
        if nf > fb {
            // restart momentum
            yk = b.clone();
            tk = 1.0;
            continue;
        }
        let nt = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        let moved: f64 = nb.iter().zip(&b).map(|(a, o)| (a - o).abs()).fold(0.0, f64::max);
        yk = (0..m).map(|s| nb[s] + (tk - 1.0) / nt * (nb[s] - b[s])).collect();
        b = nb;
        fb = nf;
        tk = nt;
        if moved < 1e-13 * c.max(1.0) {
            break;
        }
    }
    // Bias from the KKT conditions.
    let g = grad(&b);
    let tol = 1e-9 * c.max(1.0);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    for t in 0..m {
        let yg = z[t] * g[t];
        if b[t] >= c - tol {
            if z[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if b[t] <= tol {
            if z[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_n += 1;
        }
    }
    let rho = if free_n > 0 { free_sum / free_n as f64 } else { (ub + lb) / 2.0 };
    QpSolution {
        alpha: b[..l].to_vec(),
        alpha_star: b[l..].to_vec(),
        objective: -fb,
        bias: -rho,
    }
}

pub fn qp_predict(sol: &QpSolution, x: &[Vec<f64>], k: &KernelSpec, row: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, xi)| (sol.alpha[i] - sol.alpha_star[i]) * kernel(k, xi, row))
        .sum::<f64>()
        + sol.bias
}
