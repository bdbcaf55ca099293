//! Degree-2 multivariate polynomial regression.
//!
//! Features are expanded in a fixed order:
//! `[x0..x(n-1), x0^2..x(n-1)^2, x0*x1, x0*x2, .., x(n-2)*x(n-1), 1]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot size below which a column counts as dependent.
const RANK_TOL: f64 = 1e-10;

pub fn coefficient_count(n_vars: usize) -> usize {
    2 * n_vars + n_vars * n_vars.saturating_sub(1) / 2 + 1
}

/// Expands `x` into the feature vector of the model family.
pub fn expand(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut f = Vec::with_capacity(coefficient_count(n));
    f.extend_from_slice(x);
    f.extend(x.iter().map(|v| v * v));
    for i in 0..n {
        for k in i + 1..n {
            f.push(x[i] * x[k]);
        }
    }
    f.push(1.0);
    f
}

/// Column labels matching [`expand`], used in diagnostics.
pub fn feature_names(n_vars: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..n_vars).map(|i| format!("x{i}")).collect();
    names.extend((0..n_vars).map(|i| format!("x{i}^2")));
    for i in 0..n_vars {
        for k in i + 1..n_vars {
            names.push(format!("x{i}*x{k}"));
        }
    }
    names.push("1".into());
    names
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MprModel {
    pub n_vars: usize,
    /// In [`expand`] order.
    pub coefficients: Vec<f64>,
}

impl MprModel {
    pub fn new(n_vars: usize, coefficients: Vec<f64>) -> Result<Self> {
        let expected = coefficient_count(n_vars);
        if coefficients.len() != expected {
            return Err(Error::Arity { expected, got: coefficients.len() });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Self { n_vars, coefficients })
    }

    pub fn zero(n_vars: usize) -> Self {
        Self { n_vars, coefficients: vec![0.0; coefficient_count(n_vars)] }
    }

    pub fn linear(&self, i: usize) -> f64 {
        self.coefficients[i]
    }

    pub fn quadratic(&self, i: usize) -> f64 {
        self.coefficients[self.n_vars + i]
    }

    /// Coefficient of `x_i * x_k` for `i < k`.
    pub fn interaction(&self, i: usize, k: usize) -> f64 {
        assert!(i < k && k < self.n_vars);
        let n = self.n_vars;
        let before: usize = (0..i).map(|r| n - 1 - r).sum();
        self.coefficients[2 * n + before + (k - i - 1)]
    }

    pub fn intercept(&self) -> f64 {
        *self.coefficients.last().expect("at least the intercept")
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_vars {
            return Err(Error::Arity { expected: self.n_vars, got: x.len() });
        }
        Ok(self.eval(x))
    }

    /// Unchecked evaluation for hot loops; `x.len()` must equal `n_vars`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n_vars);
        let n = self.n_vars;
        let c = &self.coefficients;
        let mut y = c[c.len() - 1];
        let mut j = 2 * n;
        for i in 0..n {
            y += c[i] * x[i] + c[n + i] * x[i] * x[i];
            for k in i + 1..n {
                y += c[j] * x[i] * x[k];
                j += 1;
            }
        }
        y
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileDataset {
    /// Where the rows were gathered, e.g. `denver/2`.
    pub tag: String,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl ProfileDataset {
    pub fn new(tag: impl Into<String>) -> Self {
        Self { tag: tag.into(), ..Self::default() }
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) {
        self.xs.push(x);
        self.ys.push(y);
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }
}

/// Least-squares fit over the expanded features.
pub fn fit(data: &ProfileDataset) -> Result<MprModel> {
    let n_vars = data
        .xs
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InsufficientData(format!("dataset `{}` is empty", data.tag)))?;
    if let Some(bad) = data.xs.iter().find(|x| x.len() != n_vars) {
        return Err(Error::Arity { expected: n_vars, got: bad.len() });
    }
    if data.xs.len() != data.ys.len() {
        return Err(Error::InvalidInput("rows and targets differ in length".into()));
    }
    let m = data.len();
    let p = coefficient_count(n_vars);
    let design = DMatrix::from_fn(m, p, |r, c| expand(&data.xs[r])[c]);
    let names = feature_names(n_vars);

    let qr = design.col_piv_qr();
    let r = qr.r();
    let mut order: Vec<usize> = (0..p).collect();
    let mut idx = DVector::from_iterator(p, (0..p).map(|i| i as f64));
    qr.p().permute_rows(&mut idx);
    for (o, v) in order.iter_mut().zip(idx.iter()) {
        *o = *v as usize;
    }

    let k = m.min(p);
    let scale = if k > 0 { r[(0, 0)].abs() } else { 0.0 };
    let rank = (0..k).take_while(|&i| r[(i, i)].abs() > RANK_TOL * scale.max(f64::MIN_POSITIVE)).count();
    if rank < p {
        let mut cols: Vec<String> = order[rank..].iter().map(|&c| names[c].clone()).collect();
        cols.sort_by_key(|n| names.iter().position(|x| x == n));
        return Err(Error::RankDeficient { columns: cols });
    }

    let mut rhs = DVector::from_column_slice(&data.ys);
    qr.q_tr_mul(&mut rhs);
    let r_sq = r.view((0, 0), (p, p)).into_owned();
    let mut z = r_sq
        .solve_upper_triangular(&rhs.rows(0, p).into_owned())
        .ok_or_else(|| Error::RankDeficient { columns: names.clone() })?;
    qr.p().inv_permute_rows(&mut z);
    MprModel::new(n_vars, z.iter().copied().collect())
}
