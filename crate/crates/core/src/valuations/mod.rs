//! Valuations of degree 0, 1 and 2 on Lipschitz functions on the sphere.
//!
//! * `Θ₁(φ)[f] = ∫ φ f`
//! * `Θ₂(Φ)[f] = ∫ ⟨Φ(x)∇̄f(x), ∇̄f(x)⟩`
//! * `c₀ + c₁∫f + c₂∫[(n-1)f² - |∇f|²]`, the rotation invariant family
//! * `∫ p dS_{n-1}(K, ·)` on convex bodies
//! * `2∫ ψ S₂(∇²f + f Id)` on smooth fields
//!
//! Integrals are over `H^{n-1}` and are approximated on a [`QuadratureGrid`].
//! Gradients at lattice ties are taken from the first active child and the
//! number of such nodes is returned alongside the value.

mod checks;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bodies::{ConvexBody, SHEET_RESOLUTION};
use crate::error::{Error, Result};
use crate::fields::{Parity, Polynomial, ScalarField, SmoothFn};
use crate::linalg::{outer, sym2, tangent_projector};
use crate::quadrature::{build_grid, pairwise_sum, GridSpec, QuadratureGrid};
pub use checks::{
    check_dual_invariance, check_valuation_property, fit_degree, pde_residual, theta2_condition_residual,
    CheckReport, FitReport,
};

/// A smooth complex-valued function on the sphere.
#[derive(Clone, Debug)]
pub struct ScalarDensity {
    re: SmoothFn,
    im: Option<SmoothFn>,
}

impl ScalarDensity {
    pub fn real(re: SmoothFn) -> Self {
        ScalarDensity { re, im: None }
    }

    pub fn polynomial(p: Polynomial) -> Self {
        Self::real(SmoothFn::polynomial(p))
    }

    pub fn complex(re: SmoothFn, im: SmoothFn) -> Result<Self> {
        if re.dim() != im.dim() {
            return Err(Error::DimensionMismatch {
                expected: re.dim(),
                found: im.dim(),
            });
        }
        Ok(ScalarDensity { re, im: Some(im) })
    }

    pub fn dim(&self) -> usize {
        self.re.dim()
    }

    pub fn real_part(&self) -> &SmoothFn {
        &self.re
    }

    pub fn imag_part(&self) -> Option<&SmoothFn> {
        self.im.as_ref()
    }

    pub fn value(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.value(x), self.im.as_ref().map_or(0.0, |im| im.value(x)))
    }

    pub fn parity(&self) -> Parity {
        match &self.im {
            Some(im) => self.re.parity().combine(im.parity()),
            None => self.re.parity(),
        }
    }

    fn parts(&self) -> Vec<(Complex64, &SmoothFn)> {
        let mut parts = vec![(Complex64::new(1.0, 0.0), &self.re)];
        if let Some(im) = &self.im {
            parts.push((Complex64::new(0.0, 1.0), im));
        }
        parts
    }
}

type MatFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// A smooth map from the sphere to complex symmetric `n × n` matrices.
#[derive(Clone)]
pub struct MatrixDensity {
    dim: usize,
    re: Arc<MatFn>,
    im: Option<Arc<MatFn>>,
    parity: Parity,
    label: String,
}

impl MatrixDensity {
    pub fn new(
        dim: usize,
        re: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        parity: Parity,
        label: impl Into<String>,
    ) -> Self {
        MatrixDensity {
            dim,
            re: Arc::new(re),
            im: None,
            parity,
            label: label.into(),
        }
    }

    pub fn with_imag(mut self, im: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.im = Some(Arc::new(im));
        self
    }

    /// `Φ(x) = Id`, which violates the invariance condition.
    pub fn identity(dim: usize) -> Self {
        Self::new(dim, move |_| DMatrix::identity(dim, dim), Parity::Even, "identity")
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| DMatrix::zeros(dim, dim), Parity::Even, "zero")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn real_at(&self, x: &[f64]) -> DMatrix<f64> {
        (self.re)(x)
    }

    pub fn imag_at(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.im.as_ref().map(|im| im(x))
    }

    /// `Φ(x)v`.
    pub fn apply(&self, x: &[f64], v: &[f64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(v);
        let re = self.real_at(x) * &v;
        let im = self.imag_at(x).map(|m| m * &v);
        (0..self.dim)
            .map(|i| Complex64::new(re[i], im.as_ref().map_or(0.0, |m| m[i])))
            .collect()
    }

    /// `⟨Φ(x)v, v⟩`.
    pub fn quadratic(&self, x: &[f64], v: &[f64]) -> Complex64 {
        self.apply(x, v).iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

impl fmt::Debug for MatrixDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixDensity")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("parity", &self.parity)
            .finish()
    }
}

/// `Φ(x) = (n-1)xxᵀ - (Id - xxᵀ)`, for which
/// `⟨Φ∇̄f, ∇̄f⟩ = (n-1)f² - |∇f|²`.
pub fn even_density(n: usize) -> MatrixDensity {
    MatrixDensity::new(
        n,
        move |x| outer(x, x) * (n as f64 - 1.0) - tangent_projector(x),
        Parity::Even,
        "even",
    )
}

/// `(Id - xxᵀ) + (n-1)xxᵀ`, the same matrix with the tangential sign flipped.
/// Its integrand is `(n-1)f² + |∇f|²`; it is not dually translation
/// invariant and only serves as a control.
pub fn even_density_flipped(n: usize) -> MatrixDensity {
    MatrixDensity::new(
        n,
        move |x| outer(x, x) * (n as f64 - 1.0) + tangent_projector(x),
        Parity::Even,
        "even-flipped",
    )
}

/// `s₁[(tr A)P - A] + s₂(n-2)(tr A)xxᵀ` with `A = ∇²ψ + ψ Id`.
fn odd_candidate(psi: &SmoothFn, signs: (f64, f64), x: &[f64]) -> DMatrix<f64> {
    let n = x.len() as f64;
    let p = tangent_projector(x);
    let a = &p * psi.ext_hess(x) * &p;
    let a = (&a + a.transpose()) * 0.5;
    let tr = a.trace();
    (p * tr - a) * signs.0 + outer(x, x) * (signs.1 * (n - 2.0) * tr)
}

const ODD_SIGNS: [(f64, f64); 4] = [(-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];

/// Matrix density `Φ_ψ` with `Θ₂(Φ_ψ)[f] = 2∫ψ S₂(∇²f + f Id)` for smooth `f`
/// (`n = 3`). It combines the Newton tensor `dS₂(A) = (tr A)P - A` of
/// `A = ∇²ψ + ψ Id` on the tangent space with `(n-2)(Δψ + (n-1)ψ)xxᵀ`. The
/// signs of the two blocks are selected by comparing both sides on a fixed
/// set of probe fields.
pub fn odd_density(psi: &ScalarDensity) -> Result<MatrixDensity> {
    let n = psi.dim();
    if n != 3 {
        return Err(Error::InvalidInput(format!("odd density is implemented for n = 3, got {n}")));
    }
    for (_, part) in psi.parts() {
        if !part.is_smooth() {
            return Err(Error::NotSmooth(format!("density `{}`", part.label())));
        }
    }
    let signs = resolve_odd_signs(psi)?;
    let re = psi.re.clone();
    let mut density = MatrixDensity::new(n, move |x| odd_candidate(&re, signs, x), psi.parity(), "odd");
    if let Some(im) = psi.im.clone() {
        density = density.with_imag(move |x| odd_candidate(&im, signs, x));
    }
    Ok(density)
}

fn probe_fields() -> Vec<ScalarField> {
    let p = |terms: &[(f64, &[u32])]| ScalarField::polynomial(Polynomial::from_terms(3, terms));
    vec![
        ScalarField::constant(3, 1.0),
        ScalarField::linear(&[0.3, -0.7, 0.2]),
        p(&[(1.0, &[0, 0, 0]), (0.4, &[1, 0, 0]), (-0.3, &[0, 1, 1]), (0.25, &[1, 1, 1]), (0.2, &[0, 0, 2])]),
        p(&[(0.7, &[0, 1, 0]), (0.5, &[2, 0, 0]), (-0.35, &[1, 0, 1]), (0.3, &[0, 3, 0]), (0.15, &[1, 1, 1])]),
    ]
}

fn resolve_odd_signs(psi: &ScalarDensity) -> Result<(f64, f64)> {
    let grid = build_grid(3, GridSpec::ProductGauss { nodes: 24 })?;
    let fields = probe_fields();
    let mut targets = Vec::with_capacity(fields.len());
    for f in &fields {
        targets.push(hess_s2_eval(psi, f, &grid)?);
    }
    let mut best = (f64::INFINITY, ODD_SIGNS[0]);
    for signs in ODD_SIGNS {
        let mut residual = 0.0;
        for (f, target) in fields.iter().zip(&targets) {
            let mut value = Complex64::new(0.0, 0.0);
            for (unit, part) in psi.parts() {
                let phi = MatrixDensity::new(3, { let part = part.clone(); move |x| odd_candidate(&part, signs, x) }, Parity::Mixed, "probe");
                value += unit * theta2_eval(&phi, f, &grid)?.value;
            }
            residual += (value - target).norm();
        }
        if residual < best.0 {
            best = (residual, signs);
        }
    }
    Ok(best.1)
}

/// Value of a functional together with the number of tie nodes met.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    pub ties: usize,
}

fn check_dims(expected: usize, found: &[usize]) -> Result<()> {
    match found.iter().find(|&&d| d != expected) {
        Some(&d) => Err(Error::DimensionMismatch { expected, found: d }),
        None => Ok(()),
    }
}

fn integrate_counting<F>(grid: &QuadratureGrid, g: F) -> Result<Evaluation>
where
    F: Fn(&[f64]) -> (Complex64, usize) + Sync + Send,
{
    let per_node = grid.map_nodes(g);
    let mut terms = Vec::with_capacity(per_node.len());
    let mut ties = 0;
    for (index, (&(v, t), &w)) in per_node.iter().zip(grid.weights()).enumerate() {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        ties += usize::from(t > 0);
        terms.push(v * w);
    }
    Ok(Evaluation {
        value: pairwise_sum(&terms),
        ties,
    })
}

/// `Θ₁(φ)[f] = ∫ φ f`.
pub fn theta1_eval(phi: &ScalarDensity, f: &ScalarField, grid: &QuadratureGrid) -> Result<Complex64> {
    check_dims(grid.dim(), &[phi.dim(), f.dim()])?;
    grid.integrate(|x| phi.value(x) * f.eval(x))
}

/// `Θ₂(Φ)[f] = ∫ ⟨Φ(x)∇̄f(x), ∇̄f(x)⟩`.
pub fn theta2_eval(phi: &MatrixDensity, f: &ScalarField, grid: &QuadratureGrid) -> Result<Evaluation> {
    check_dims(grid.dim(), &[phi.dim(), f.dim()])?;
    integrate_counting(grid, |x| {
        let (g, ties) = f.bar_grad_first_active(x);
        (phi.quadratic(x, g.as_slice()), ties)
    })
}

/// `c₀ + c₁∫f + c₂∫[(n-1)f² - |∇f|²]`.
pub fn rotinv_eval(c: [Complex64; 3], f: &ScalarField, grid: &QuadratureGrid) -> Result<Evaluation> {
    check_dims(grid.dim(), &[f.dim()])?;
    let n = f.dim() as f64;
    let integral = integrate_counting(grid, |x| {
        let mut ties = 0;
        let (v, g) = f.value_and_bar_grad(x, &mut ties);
        // |∇f|² = |∇̄f|² - f²
        let quadratic = (n - 1.0) * v * v - (g.norm_squared() - v * v);
        (c[1] * v + c[2] * quadratic, ties)
    })?;
    Ok(Evaluation {
        value: c[0] + integral.value,
        ties: integral.ties,
    })
}

/// `∫ p dS_{n-1}(K, ·)`. The grid is needed for bodies with smooth parts.
pub fn area_valuation_eval(p: &ScalarDensity, body: &ConvexBody, grid: Option<&QuadratureGrid>) -> Result<Complex64> {
    check_dims(body.dim(), &[p.dim()])?;
    body.area_measure()?.pair(|x| p.value(x), SHEET_RESOLUTION, grid)
}

/// `2∫ ψ S₂(∇²f + f Id)` for smooth `f`.
pub fn hess_s2_eval(psi: &ScalarDensity, f: &ScalarField, grid: &QuadratureGrid) -> Result<Complex64> {
    check_dims(grid.dim(), &[psi.dim(), f.dim()])?;
    let total: Complex64 = grid.try_integrate(|x| Ok(psi.value(x) * sym2(&f.sph_hess(x)?)))?;
    Ok(total * 2.0)
}

/// `B(ψ, f, h) = ∫ ψ dS₂(∇²f + f Id)[∇²h + h Id]` for smooth arguments.
pub fn hess_trilinear(psi: &ScalarField, f: &ScalarField, h: &ScalarField, grid: &QuadratureGrid) -> Result<f64> {
    check_dims(grid.dim(), &[psi.dim(), f.dim(), h.dim()])?;
    grid.try_integrate(|x| {
        let a = f.sph_hess(x)?;
        let b = h.sph_hess(x)?;
        Ok(psi.eval(x) * (a.trace() * b.trace() - (&a * &b).trace()))
    })
}

/// Integrand of a first-order functional at a fixed node, as a function of
/// `f(x)` and `∇̄f(x)`. `RotInv` leaves out `c₀`.
pub(crate) enum LocalIntegrand {
    Scalar(Complex64),
    Matrix(DMatrix<f64>, Option<DMatrix<f64>>),
    RotInv(f64, Complex64, Complex64),
}

impl LocalIntegrand {
    pub(crate) fn at(&self, v: f64, g: &[f64]) -> Complex64 {
        let quad = |m: &DMatrix<f64>| -> f64 {
            (0..g.len()).map(|i| g[i] * (0..g.len()).map(|j| m[(i, j)] * g[j]).sum::<f64>()).sum()
        };
        match self {
            LocalIntegrand::Scalar(phi) => phi * v,
            LocalIntegrand::Matrix(re, im) => Complex64::new(quad(re), im.as_ref().map_or(0.0, quad)),
            LocalIntegrand::RotInv(n, c1, c2) => {
                let g2: f64 = g.iter().map(|c| c * c).sum();
                c1 * v + c2 * ((n - 1.0) * v * v - (g2 - v * v))
            }
        }
    }
}

/// The functionals, tagged by construction.
#[derive(Clone, Debug)]
pub enum Valuation {
    Theta1(ScalarDensity),
    Theta2(MatrixDensity),
    RotInv([Complex64; 3]),
    /// Defined on convex bodies through their area measures.
    AreaIntegral(ScalarDensity),
    HessS2(ScalarDensity),
}

impl Valuation {
    pub fn name(&self) -> &'static str {
        match self {
            Valuation::Theta1(_) => "theta1",
            Valuation::Theta2(_) => "theta2",
            Valuation::RotInv(_) => "rotinv",
            Valuation::AreaIntegral(_) => "area_integral",
            Valuation::HessS2(_) => "hess_s2",
        }
    }

    /// Highest homogeneity degree present.
    pub fn degree(&self) -> usize {
        match self {
            Valuation::Theta1(_) => 1,
            Valuation::Theta2(_) | Valuation::HessS2(_) => 2,
            Valuation::RotInv(c) => c.iter().rposition(|c| c.norm() != 0.0).unwrap_or(0),
            Valuation::AreaIntegral(p) => p.dim() - 1,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        match self {
            Valuation::RotInv(c) => c.iter().filter(|c| c.norm() != 0.0).count() <= 1,
            _ => true,
        }
    }

    /// Behaviour under `f ↦ f(-·)`.
    pub fn parity(&self) -> Parity {
        match self {
            Valuation::Theta1(p) | Valuation::AreaIntegral(p) | Valuation::HessS2(p) => p.parity(),
            Valuation::Theta2(phi) => phi.parity(),
            Valuation::RotInv(_) => Parity::Even,
        }
    }

    pub fn eval(&self, f: &ScalarField, grid: &QuadratureGrid) -> Result<Evaluation> {
        let plain = |value| Evaluation { value, ties: 0 };
        match self {
            Valuation::Theta1(phi) => theta1_eval(phi, f, grid).map(plain),
            Valuation::Theta2(phi) => theta2_eval(phi, f, grid),
            Valuation::RotInv(c) => rotinv_eval(*c, f, grid),
            Valuation::HessS2(psi) => hess_s2_eval(psi, f, grid).map(plain),
            Valuation::AreaIntegral(_) => Err(Error::InvalidInput(
                "area integral valuations act on convex bodies".into(),
            )),
        }
    }

    pub fn eval_body(&self, body: &ConvexBody, grid: Option<&QuadratureGrid>) -> Result<Complex64> {
        match self {
            Valuation::AreaIntegral(p) => area_valuation_eval(p, body, grid),
            _ => {
                let grid = grid.ok_or_else(|| Error::InvalidInput("a grid is required".into()))?;
                Ok(self.eval(&body.support_field()?, grid)?.value)
            }
        }
    }

    /// The density of a first-order functional frozen at `x`; `None` for
    /// the functionals that need second derivatives or bodies.
    pub(crate) fn local_integrand(&self, x: &[f64]) -> Option<LocalIntegrand> {
        match self {
            Valuation::Theta1(phi) => Some(LocalIntegrand::Scalar(phi.value(x))),
            Valuation::Theta2(phi) => Some(LocalIntegrand::Matrix(phi.real_at(x), phi.imag_at(x))),
            Valuation::RotInv(c) => Some(LocalIntegrand::RotInv(x.len() as f64, c[1], c[2])),
            Valuation::AreaIntegral(_) | Valuation::HessS2(_) => None,
        }
    }

    /// The form used on non-smooth fields: `HessS2(ψ)` is extended by
    /// `Θ₂(odd_density(ψ))`, which agrees with it on smooth fields.
    pub fn lattice_extension(&self) -> Result<Valuation> {
        match self {
            Valuation::HessS2(psi) => Ok(Valuation::Theta2(odd_density(psi)?)),
            other => Ok(other.clone()),
        }
    }
}
