//! Smooth functions on the sphere described by closed-form derivative data.
//!
//! Everything is expressed through the 1-homogeneous extension
//! `f̃(y) = |y| f(y/|y|)`: at a unit vector `x` a [`SphereFunction`] reports the
//! value, the Euclidean gradient `∇̄f(x) = ∇f(x) + f(x)x` and the Euclidean
//! Hessian `D²f̃(x)`, whose restriction to `T_x S^{n-1}` is `∇²f(x) + f(x) Id`
//! and which annihilates `x`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, tangent_projector};

/// Behaviour of a function under `x ↦ -x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

impl Parity {
    pub fn combine(self, other: Parity) -> Parity {
        if self == other {
            self
        } else {
            Parity::Mixed
        }
    }

    /// Parity of a product.
    pub fn product(self, other: Parity) -> Parity {
        match (self, other) {
            (Parity::Mixed, _) | (_, Parity::Mixed) => Parity::Mixed,
            (a, b) if a == b => Parity::Even,
            _ => Parity::Odd,
        }
    }
}

/// A smooth function on `S^{n-1}` given through its 1-homogeneous extension.
pub trait SphereFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// `∇f̃(x)`, the Euclidean gradient of the 1-homogeneous extension.
    fn bar_grad(&self, x: &[f64]) -> DVector<f64>;
    /// `D²f̃(x)`, annihilating `x`.
    fn ext_hess(&self, x: &[f64]) -> DMatrix<f64>;
    fn parity(&self) -> Parity {
        Parity::Mixed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub exps: Vec<u32>,
}

/// Real polynomial on `R^n`, used through its restriction to the sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Self {
        assert!(
            terms.iter().all(|t| t.exps.len() == dim),
            "monomial arity must equal the ambient dimension"
        );
        Polynomial { dim, terms }
    }

    pub fn from_terms(dim: usize, terms: &[(f64, &[u32])]) -> Self {
        Self::new(
            dim,
            terms
                .iter()
                .map(|(coef, exps)| Monomial {
                    coef: *coef,
                    exps: exps.to_vec(),
                })
                .collect(),
        )
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(
            dim,
            vec![Monomial {
                coef: c,
                exps: vec![0; dim],
            }],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn add(mut self, other: &Polynomial) -> Self {
        assert_eq!(self.dim, other.dim);
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    pub fn scaled(mut self, t: f64) -> Self {
        for m in &mut self.terms {
            m.coef *= t;
        }
        self
    }

    /// `y[j]^e` at `table[j * stride + e]` for `e ≤ max degree`.
    fn power_table(&self, y: &[f64]) -> (Vec<f64>, usize) {
        let stride = self.terms.iter().flat_map(|m| m.exps.iter()).copied().max().unwrap_or(0) as usize + 1;
        let mut table = vec![1.0; self.dim * stride];
        for (j, &c) in y.iter().enumerate().take(self.dim) {
            for e in 1..stride {
                table[j * stride + e] = table[j * stride + e - 1] * c;
            }
        }
        (table, stride)
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let (pw, stride) = self.power_table(y);
        self.terms
            .iter()
            .map(|m| {
                m.exps
                    .iter()
                    .enumerate()
                    .fold(m.coef, |acc, (j, &e)| acc * pw[j * stride + e as usize])
            })
            .sum()
    }

    pub fn gradient(&self, y: &[f64]) -> DVector<f64> {
        let n = self.dim;
        let (pw, stride) = self.power_table(y);
        let mut g = DVector::zeros(n);
        for m in &self.terms {
            for i in 0..n {
                if m.exps[i] == 0 {
                    continue;
                }
                let mut p = m.coef * m.exps[i] as f64;
                for (j, &e) in m.exps.iter().enumerate() {
                    p *= pw[j * stride + (e - u32::from(j == i)) as usize];
                }
                g[i] += p;
            }
        }
        g
    }

    pub fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let (pw, stride) = self.power_table(y);
        let mut h = DMatrix::zeros(n, n);
        for m in &self.terms {
            for i in 0..n {
                for k in i..n {
                    let (ei, ek) = (m.exps[i], m.exps[k]);
                    let factor = if i == k {
                        if ei < 2 {
                            continue;
                        }
                        (ei * (ei - 1)) as f64
                    } else {
                        if ei == 0 || ek == 0 {
                            continue;
                        }
                        (ei * ek) as f64
                    };
                    let mut p = m.coef * factor;
                    for (j, &e) in m.exps.iter().enumerate() {
                        let drop = u32::from(j == i) + u32::from(j == k);
                        p *= pw[j * stride + (e - drop) as usize];
                    }
                    h[(i, k)] += p;
                    if i != k {
                        h[(k, i)] += p;
                    }
                }
            }
        }
        h
    }

    fn degree_parity(&self) -> Parity {
        self.terms
            .iter()
            .filter(|m| m.coef != 0.0)
            .map(|m| {
                if m.exps.iter().sum::<u32>() % 2 == 0 {
                    Parity::Even
                } else {
                    Parity::Odd
                }
            })
            .reduce(Parity::combine)
            .unwrap_or(Parity::Even)
    }
}

impl SphereFunction for Polynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    fn bar_grad(&self, x: &[f64]) -> DVector<f64> {
        let g = self.eval(x);
        let grad = self.gradient(x);
        let radial = dot(grad.as_slice(), x);
        let xv = DVector::from_column_slice(x);
        // P∇g + g x
        &grad - &xv * radial + xv * g
    }

    fn ext_hess(&self, x: &[f64]) -> DMatrix<f64> {
        let g = self.eval(x);
        let radial = dot(self.gradient(x).as_slice(), x);
        let p = tangent_projector(x);
        // P D²g P - ⟨∇g,x⟩P + gP
        &p * self.hessian(x) * &p + p * (g - radial)
    }

    fn parity(&self) -> Parity {
        self.degree_parity()
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> DVector<f64> + Send + Sync;
type HessFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// Closure-backed [`SphereFunction`].
#[derive(Clone)]
pub struct ClosureFunction {
    dim: usize,
    value: Arc<ValueFn>,
    bar_grad: Arc<GradFn>,
    ext_hess: Arc<HessFn>,
    parity: Parity,
}

impl ClosureFunction {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        bar_grad: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        ext_hess: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        parity: Parity,
    ) -> Self {
        ClosureFunction {
            dim,
            value: Arc::new(value),
            bar_grad: Arc::new(bar_grad),
            ext_hess: Arc::new(ext_hess),
            parity,
        }
    }
}

impl SphereFunction for ClosureFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn bar_grad(&self, x: &[f64]) -> DVector<f64> {
        (self.bar_grad)(x)
    }
    fn ext_hess(&self, x: &[f64]) -> DMatrix<f64> {
        (self.ext_hess)(x)
    }
    fn parity(&self) -> Parity {
        self.parity
    }
}

/// Shared handle to a smooth function, plus a flag recording whether the
/// supplied Hessian may be trusted.
#[derive(Clone)]
pub struct SmoothFn {
    inner: Arc<dyn SphereFunction>,
    smooth: bool,
    label: String,
}

impl SmoothFn {
    pub fn new(inner: impl SphereFunction + 'static, smooth: bool, label: impl Into<String>) -> Self {
        SmoothFn {
            inner: Arc::new(inner),
            smooth,
            label: label.into(),
        }
    }

    pub fn polynomial(p: Polynomial) -> Self {
        Self::new(p, true, "polynomial")
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }
    pub fn is_smooth(&self) -> bool {
        self.smooth
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x)
    }
    pub fn bar_grad(&self, x: &[f64]) -> DVector<f64> {
        self.inner.bar_grad(x)
    }
    pub fn ext_hess(&self, x: &[f64]) -> DMatrix<f64> {
        self.inner.ext_hess(x)
    }
    /// Spherical gradient `∇̄f(x) - f(x)x`.
    pub fn sph_grad(&self, x: &[f64]) -> DVector<f64> {
        self.bar_grad(x) - DVector::from_column_slice(x) * self.value(x)
    }
    /// Laplace-Beltrami operator: `tr(∇²f + f Id) - (n-1) f`.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        self.ext_hess(x).trace() - (self.dim() as f64 - 1.0) * self.value(x)
    }
    pub fn parity(&self) -> Parity {
        self.inner.parity()
    }
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFn")
            .field("label", &self.label)
            .field("dim", &self.dim())
            .field("smooth", &self.smooth)
            .finish()
    }
}
