//! Numerical checks: valuation property, dual translation invariance, the
//! invariance condition on matrix densities, its PDE form, and polynomial
//! fits in the scaling parameter.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{MatrixDensity, Valuation};
use crate::error::{Error, Result};
use crate::fields::{ScalarField, TIE_TOL};
use crate::linalg::complement_basis;
use crate::quadrature::{pairwise_sum, QuadratureGrid};

/// Outcome of one check. It passes when `residual ≤ tol · max(1, scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub case: String,
    pub residual: f64,
    pub scale: f64,
    pub tol: f64,
    pub ties: usize,
    pub pass: bool,
}

impl CheckReport {
    fn new(case: impl Into<String>, residual: f64, scale: f64, tol: f64, ties: usize) -> Self {
        CheckReport {
            case: case.into(),
            residual,
            scale,
            tol,
            ties,
            pass: residual <= tol * scale.max(1.0),
        }
    }
}

/// `|μ(f∨h) + μ(f∧h) - μ(f) - μ(h)|`, with `scale` the sum of the four
/// magnitudes. When one of the four fields is not smooth, `HessS2` is
/// evaluated through its lattice extension for all of them.
pub fn check_valuation_property(
    mu: &Valuation,
    f: &ScalarField,
    h: &ScalarField,
    grid: &QuadratureGrid,
    tol: f64,
) -> Result<CheckReport> {
    let join = ScalarField::join(&[f.clone(), h.clone()])?;
    let meet = ScalarField::meet(&[f.clone(), h.clone()])?;
    let fields = [&join, &meet, f, h];
    let extended;
    let mu = if fields.iter().all(|g| g.is_smooth()) {
        mu
    } else {
        extended = mu.lattice_extension()?;
        &extended
    };
    let (values, ties) = match fused_lattice_values(mu, f, h, grid)? {
        Some(fused) => fused,
        None => {
            let mut values = Vec::with_capacity(4);
            let mut ties = 0;
            for g in fields {
                let e = mu.eval(g, grid)?;
                ties += e.ties;
                values.push(e.value);
            }
            (values, ties)
        }
    };
    let residual = (values[0] + values[1] - values[2] - values[3]).norm();
    let scale = values.iter().map(|v| v.norm()).sum();
    Ok(CheckReport::new(format!("{}-valuation", mu.name()), residual, scale, tol, ties))
}

/// `μ` at `f ∨ h`, `f ∧ h`, `f`, `h` from one evaluation of `f` and `h` per
/// node, the lattice jets chosen as in a two-child `Max`/`Min` node.
fn fused_lattice_values(
    mu: &Valuation,
    f: &ScalarField,
    h: &ScalarField,
    grid: &QuadratureGrid,
) -> Result<Option<(Vec<Complex64>, usize)>> {
    let mut probe = vec![0.0; grid.dim()];
    probe[0] = 1.0;
    if mu.local_integrand(&probe).is_none() {
        return Ok(None);
    }
    if f.dim() != grid.dim() || h.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: if f.dim() != grid.dim() { f.dim() } else { h.dim() },
        });
    }
    let per_node = grid.map_nodes(|x| {
        let (mut tf, mut th) = (0, 0);
        let (vf, gf) = f.value_and_bar_grad(x, &mut tf);
        let (vh, gh) = h.value_and_bar_grad(x, &mut th);
        let tie = (vf - vh).abs() <= TIE_TOL;
        let pick = |f_first: bool| {
            if f_first {
                (vf, &gf, tf)
            } else {
                (vh, &gh, th)
            }
        };
        // the first child is active whenever it is within the tie tolerance
        let join = pick(tie || vf > vh);
        let meet = pick(tie || vf < vh);
        let local = mu.local_integrand(x).expect("first-order functional");
        let mut out = [Complex64::new(0.0, 0.0); 4];
        let mut ties = [0usize; 4];
        for (k, (v, g, t)) in [join, meet, (vf, &gf, tf), (vh, &gh, th)].into_iter().enumerate() {
            out[k] = local.at(v, g.as_slice());
            ties[k] = t + usize::from(tie && k < 2);
        }
        (out, ties)
    });
    let mut values = Vec::with_capacity(4);
    let mut ties = 0;
    for k in 0..4 {
        let mut terms = Vec::with_capacity(per_node.len());
        for (index, ((v, t), &w)) in per_node.iter().zip(grid.weights()).enumerate() {
            if !(v[k].re.is_finite() && v[k].im.is_finite()) {
                return Err(Error::NonFiniteValue { index });
            }
            ties += usize::from(t[k] > 0);
            terms.push(v[k] * w);
        }
        let constant = match mu {
            Valuation::RotInv(c) => c[0],
            _ => Complex64::new(0.0, 0.0),
        };
        values.push(constant + pairwise_sum(&terms));
    }
    Ok(Some((values, ties)))
}

/// `|μ(f + ⟨v,·⟩) - μ(f)|`.
pub fn check_dual_invariance(
    mu: &Valuation,
    f: &ScalarField,
    v: &[f64],
    grid: &QuadratureGrid,
    tol: f64,
) -> Result<CheckReport> {
    let shifted = f.add(&ScalarField::linear(v))?;
    let a = mu.eval(&shifted, grid)?;
    let b = mu.eval(f, grid)?;
    Ok(CheckReport::new(
        format!("{}-invariance", mu.name()),
        (a.value - b.value).norm(),
        a.value.norm() + b.value.norm(),
        tol,
        a.ties + b.ties,
    ))
}

/// `max_f |∫ Φ(x)∇̄f(x) dH^{n-1}|` over the test fields.
pub fn theta2_condition_residual(phi: &MatrixDensity, grid: &QuadratureGrid, fields: &[ScalarField]) -> Result<f64> {
    if fields.is_empty() {
        return Err(Error::InvalidInput("no test fields".into()));
    }
    let mut worst: f64 = 0.0;
    for f in fields {
        if f.dim() != grid.dim() || phi.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                found: f.dim(),
            });
        }
        let v = grid.integrate_vec(|x| {
            let (g, _) = f.bar_grad_first_active(x);
            phi.apply(x, g.as_slice())
        })?;
        worst = worst.max(v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
    }
    Ok(worst)
}

/// `-Div(Φ_j - ⟨Φ_j, x⟩x) + ⟨Φ_j, x⟩` for each column `Φ_j = Φ e_j`, the
/// divergence taken by central differences along great circles in a
/// tangent orthonormal frame at `x`.
pub fn pde_residual(phi: &MatrixDensity, x: &[f64], fd_step: f64) -> Result<Vec<Complex64>> {
    let n = phi.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.len(),
        });
    }
    if !(fd_step > 0.0) {
        return Err(Error::InvalidInput("fd_step must be positive".into()));
    }
    let part = |m: &DMatrix<f64>, y: &[f64]| -> (DMatrix<f64>, DVector<f64>) {
        // tangential parts of the columns, and their normal components
        let yv = DVector::from_column_slice(y);
        let normal = m.transpose() * &yv;
        (m - &yv * normal.transpose(), normal)
    };
    let frame = complement_basis(x);
    let mut parts: Vec<Box<dyn Fn(&[f64]) -> DMatrix<f64> + '_>> = vec![Box::new(|y| phi.real_at(y))];
    if phi.imag_at(x).is_some() {
        parts.push(Box::new(|y| phi.imag_at(y).expect("imaginary part")));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (k, eval) in parts.iter().enumerate() {
        let (_, normal) = part(&eval(x), x);
        let mut div = DVector::zeros(n);
        for a in 0..n - 1 {
            let e = frame.column(a);
            let at = |t: f64| -> Vec<f64> { (0..n).map(|i| t.cos() * x[i] + t.sin() * e[i]).collect() };
            let (plus, _) = part(&eval(&at(fd_step)), &at(fd_step));
            let (minus, _) = part(&eval(&at(-fd_step)), &at(-fd_step));
            let derivative = (plus - minus) / (2.0 * fd_step);
            div += derivative.transpose() * e;
        }
        let unit = if k == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
        for j in 0..n {
            out[j] += unit * (normal[j] - div[j]);
        }
    }
    Ok(out)
}

/// Least-squares polynomial fit of `t ↦ μ(t f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub t_samples: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Coefficients of `1, t, t², …` for the fit of degree `len - 1`.
    pub coefficients: Vec<Complex64>,
    /// Residual norm of the best fit of degree at most 2.
    pub truncation_residual: f64,
    /// `max |μ(t f)|` over the samples.
    pub scale: f64,
}

impl FitReport {
    /// The single degree whose coefficient exceeds `tol · scale`, if unique.
    pub fn pure_degree(&self, tol: f64) -> Option<usize> {
        let mut active = self
            .coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > tol * self.scale)
            .map(|(k, _)| k);
        match (active.next(), active.next()) {
            (Some(k), None) => Some(k),
            _ => None,
        }
    }
}

fn least_squares(t: &[f64], y: &[f64], degree: usize) -> Result<(Vec<f64>, f64)> {
    let v = DMatrix::from_fn(t.len(), degree + 1, |i, k| t[i].powi(k as i32));
    let rhs = DVector::from_column_slice(y);
    let svd = v.clone().svd(true, true);
    let c = svd.solve(&rhs, 1e-14).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let residual = (&v * &c - rhs).norm();
    Ok((c.as_slice().to_vec(), residual))
}

pub fn fit_degree(mu: &Valuation, f: &ScalarField, t_samples: &[f64], grid: &QuadratureGrid) -> Result<FitReport> {
    if t_samples.len() < 4 || t_samples.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidInput("need at least 4 positive samples".into()));
    }
    let mut values = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        values.push(mu.eval(&f.scaled(t), grid)?.value);
    }
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    let full = t_samples.len() - 1;
    let (cr, _) = least_squares(t_samples, &re, full)?;
    let (ci, _) = least_squares(t_samples, &im, full)?;
    let (_, rr) = least_squares(t_samples, &re, 2)?;
    let (_, ri) = least_squares(t_samples, &im, 2)?;
    Ok(FitReport {
        t_samples: t_samples.to_vec(),
        coefficients: cr.iter().zip(&ci).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        truncation_residual: rr.hypot(ri),
        scale: values.iter().map(|v| v.norm()).fold(0.0, f64::max),
        values,
    })
}
