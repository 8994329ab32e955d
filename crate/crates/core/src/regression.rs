//! Multivariate least squares with classical inference statistics.
//!
//! Coefficients come from a Householder QR factorization of the design
//! matrix; standard errors use `σ² (XᵀX)⁻¹ = σ² R⁻¹R⁻ᵀ`. Significance stars
//! follow two-sided normal p-values at the 10/5/1% levels.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::domain::ModelSpec;
use crate::features::EncodedRows;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressionError {
    #[error("design matrix is rank deficient; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("need more rows ({rows}) than coefficients ({cols})")]
    TooFewRows { rows: usize, cols: usize },
    #[error("expected {expected} columns, got {got}")]
    SpecMismatch { expected: usize, got: usize },
    #[error("target has {got} entries for {expected} rows")]
    LengthMismatch { expected: usize, got: usize },
}

/// Relative size below which a column is treated as lying in the span of
/// the columns before it.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub spec: Option<ModelSpec>,
    /// Column names, intercept first when present.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub n_observations: usize,
    pub residual_variance: f64,
}

impl OlsFit {
    pub fn stars(&self, j: usize) -> &'static str {
        stars(self.p_values[j])
    }

    /// Prediction for one feature row without the intercept entry; the fit
    /// must have been built by [`fit_rows`].
    pub fn predict_features(&self, features: &[f64]) -> Result<f64, RegressionError> {
        if features.len() + 1 != self.coefficients.len() {
            return Err(RegressionError::SpecMismatch {
                expected: self.coefficients.len() - 1,
                got: features.len(),
            });
        }
        Ok(self.coefficients[0]
            + features
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(x, b)| x * b)
                .sum::<f64>())
    }
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Design matrix `[1 | features]` and target vector.
pub fn design_matrix(rows: &EncodedRows) -> (DMatrix<f64>, DVector<f64>) {
    let (n, p) = (rows.len(), rows.n_features());
    let x = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { rows.features[i][j - 1] });
    (x, DVector::from_column_slice(&rows.target))
}

/// Fits the rows of one spec with an intercept column.
pub fn fit_rows(rows: &EncodedRows) -> Result<OlsFit, RegressionError> {
    let (x, y) = design_matrix(rows);
    let mut names = vec!["intercept".to_string()];
    names.extend(rows.spec.feature_names().iter().map(|s| s.to_string()));
    let mut fit = ols_fit_named(&x, &y, names)?;
    fit.spec = Some(rows.spec);
    Ok(fit)
}

pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit, RegressionError> {
    let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    ols_fit_named(x, y, names)
}

pub fn ols_fit_named(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    names: Vec<String>,
) -> Result<OlsFit, RegressionError> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(RegressionError::LengthMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n <= k {
        return Err(RegressionError::TooFewRows { rows: n, cols: k });
    }

    let qr = x.clone().qr();
    let r = qr.r();
    let collinear: Vec<String> = (0..k)
        .filter(|&j| {
            let col_norm = x.column(j).norm();
            col_norm == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * col_norm
        })
        .map(|j| names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(RegressionError::RankDeficient(collinear));
    }

    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .expect("R has a non-zero diagonal after the rank check");

    let residuals = y - x * &beta;
    let ssr = residuals.norm_squared();
    let mean_y = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let dof = (n - k) as f64;
    let sigma2 = ssr / dof;

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .expect("R is invertible after the rank check");
    let normal_inv = &r_inv * r_inv.transpose();

    let std_normal = Normal::standard();
    let mut standard_errors = Vec::with_capacity(k);
    let mut t_stats = Vec::with_capacity(k);
    let mut p_values = Vec::with_capacity(k);
    for j in 0..k {
        let se = (sigma2 * normal_inv[(j, j)]).max(0.0).sqrt();
        let t = if se > 0.0 { beta[j] / se } else { f64::INFINITY.copysign(beta[j]) };
        let p = if t.is_finite() {
            2.0 * (1.0 - std_normal.cdf(t.abs()))
        } else {
            0.0
        };
        standard_errors.push(se);
        t_stats.push(t);
        p_values.push(p);
    }

    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / dof;

    Ok(OlsFit {
        spec: None,
        names,
        coefficients: beta.iter().copied().collect(),
        standard_errors,
        t_stats,
        p_values,
        r_squared,
        adj_r_squared,
        n_observations: n,
        residual_variance: sigma2,
    })
}

pub fn ols_predict(fit: &OlsFit, x_new: &DMatrix<f64>) -> Result<DVector<f64>, RegressionError> {
    if x_new.ncols() != fit.coefficients.len() {
        return Err(RegressionError::SpecMismatch {
            expected: fit.coefficients.len(),
            got: x_new.ncols(),
        });
    }
    Ok(x_new * DVector::from_column_slice(&fit.coefficients))
}

/// Side-by-side text table: coefficient with stars, standard error in
/// parentheses below, then N, R² and adjusted R².
pub fn report_text(fits: &[OlsFit]) -> String {
    let mut terms: Vec<&str> = Vec::new();
    for fit in fits {
        for name in &fit.names {
            if !terms.contains(&name.as_str()) {
                terms.push(name);
            }
        }
    }
    // Intercept goes last, as in conventional regression tables.
    if let Some(pos) = terms.iter().position(|t| *t == "intercept") {
        let t = terms.remove(pos);
        terms.push(t);
    }

    let label_w = terms.iter().map(|t| t.len()).max().unwrap_or(8).max(18);
    let col_w = 16;
    let mut out = String::new();
    out.push_str(&format!("{:label_w$}", ""));
    for (i, fit) in fits.iter().enumerate() {
        let head = match fit.spec {
            Some(s) => format!("({})", s.number()),
            None => format!("({})", i + 1),
        };
        out.push_str(&format!("{head:>col_w$}"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(label_w + col_w * fits.len()));
    out.push('\n');
    for term in &terms {
        let mut coef_line = format!("{term:label_w$}");
        let mut se_line = format!("{:label_w$}", "");
        for fit in fits {
            match fit.names.iter().position(|n| n == term) {
                Some(j) => {
                    let c = format!("{:.3}{}", fit.coefficients[j], fit.stars(j));
                    let se = format!("({:.3})", fit.standard_errors[j]);
                    coef_line.push_str(&format!("{c:>col_w$}"));
                    se_line.push_str(&format!("{se:>col_w$}"));
                }
                None => {
                    coef_line.push_str(&format!("{:>col_w$}", ""));
                    se_line.push_str(&format!("{:>col_w$}", ""));
                }
            }
        }
        out.push_str(coef_line.trim_end());
        out.push('\n');
        out.push_str(se_line.trim_end());
        out.push('\n');
    }
    out.push_str(&"-".repeat(label_w + col_w * fits.len()));
    out.push('\n');
    let footer = |label: &str, f: &dyn Fn(&OlsFit) -> String| {
        let mut line = format!("{label:label_w$}");
        for fit in fits {
            line.push_str(&format!("{:>col_w$}", f(fit)));
        }
        line.push('\n');
        line
    };
    out.push_str(&footer("Observations", &|f| f.n_observations.to_string()));
    out.push_str(&footer("R2", &|f| format!("{:.3}", f.r_squared)));
    out.push_str(&footer("Adjusted R2", &|f| format!("{:.3}", f.adj_r_squared)));
    out.push_str(&footer("Residual Std. Error", &|f| {
        format!("{:.3}", f.residual_variance.sqrt())
    }));
    out.push_str("Note: *p<0.1; **p<0.05; ***p<0.01\n");
    out
}

/// Long-format CSV: `spec,term,coefficient,std_error,t_stat,p_value,stars`.
pub fn report_csv(fits: &[OlsFit]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["spec", "term", "coefficient", "std_error", "t_stat", "p_value", "stars"])?;
    for fit in fits {
        let spec = fit.spec.map(|s| s.number().to_string()).unwrap_or_default();
        for j in 0..fit.names.len() {
            w.write_record([
                spec.clone(),
                fit.names[j].clone(),
                fit.coefficients[j].to_string(),
                fit.standard_errors[j].to_string(),
                fit.t_stats[j].to_string(),
                fit.p_values[j].to_string(),
                fit.stars(j).to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_intercept(xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { 1.0 } else { xs[i] })
    }

    #[test]
    fn exact_line_is_recovered() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.5];
        let y = DVector::from_iterator(6, xs.iter().map(|x| 3.0 + 2.0 * x));
        let fit = ols_fit(&with_intercept(&xs), &y).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let x = DMatrix::from_row_slice(5, 3, &[
            1.0, 2.0, 4.0, //
            1.0, 3.0, 6.0, //
            1.0, 5.0, 10.0, //
            1.0, 7.0, 14.0, //
            1.0, 1.0, 2.0,
        ]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let names = vec!["intercept".into(), "bathrooms".into(), "bathrooms_x2".into()];
        match ols_fit_named(&x, &y, names) {
            Err(RegressionError::RankDeficient(cols)) => assert_eq!(cols, vec!["bathrooms_x2"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let x = with_intercept(&[1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(
            ols_fit(&x, &y).unwrap_err(),
            RegressionError::TooFewRows { rows: 2, cols: 2 }
        );
    }

    #[test]
    fn predictions() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let y = DVector::from_iterator(4, xs.iter().map(|x| 2.0 * x));
        let fit = ols_fit(&with_intercept(&xs), &y).unwrap();
        let p = ols_predict(&fit, &with_intercept(&[10.0])).unwrap();
        assert!((p[0] - 20.0).abs() < 1e-9);
        let zero = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert_eq!(ols_predict(&fit, &zero).unwrap()[0], fit.coefficients[0]);
        assert!(matches!(
            ols_predict(&fit, &DMatrix::zeros(1, 3)),
            Err(RegressionError::SpecMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn in_sample_residuals_average_zero() {
        let xs = [1.0, 2.0, 4.0, 7.0, 8.0, 11.0];
        let ys = [3.1, 4.9, 9.2, 13.8, 17.5, 21.0];
        let x = with_intercept(&xs);
        let y = DVector::from_column_slice(&ys);
        let fit = ols_fit(&x, &y).unwrap();
        let resid = &y - ols_predict(&fit, &x).unwrap();
        assert!(resid.mean().abs() < 1e-10);
        assert!(fit.adj_r_squared <= fit.r_squared);
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.005), "***");
        assert_eq!(stars(0.03), "**");
        assert_eq!(stars(0.07), "*");
        assert_eq!(stars(0.5), "");
    }

    #[test]
    fn text_report_layout() {
        let xs = [1.0, 2.0, 4.0, 7.0, 8.0, 11.0];
        let ys = [3.1, 4.9, 9.2, 13.8, 17.5, 21.0];
        let fit = ols_fit_named(
            &with_intercept(&xs),
            &DVector::from_column_slice(&ys),
            vec!["intercept".into(), "size".into()],
        )
        .unwrap();
        let text = report_text(&[fit]);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[2].starts_with("size"));
        assert!(lines[3].trim().starts_with('('));
        assert!(lines[4].starts_with("intercept"));
        assert!(text.contains("Observations"));
    }
}
