//! Random fields, points and matrices for property batteries.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::fields::{Polynomial, ScalarField};
use crate::linalg::norm;

pub fn random_unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&v);
        if r > 1e-3 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

pub fn random_vector(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// A matrix `I + E` with `‖E‖₂ < 1/2`, so `‖g‖, ‖g⁻¹‖ ≤ 3`.
pub fn random_invertible(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let e = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let e = &e * (0.45 / e.norm());
    DMatrix::identity(n, n) + e
}

/// All exponent vectors in `n` variables with total degree at most `degree`.
fn exponents(n: usize, degree: u32) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for head in 0..=degree {
        for mut tail in exponents(n - 1, degree - head) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Polynomial with uniform coefficients in `[-scale, scale]` on every monomial
/// of degree at most `degree`.
pub fn random_polynomial(rng: &mut impl Rng, n: usize, degree: u32, scale: f64) -> Polynomial {
    let terms: Vec<(f64, Vec<u32>)> = exponents(n, degree)
        .into_iter()
        .map(|e| (rng.random_range(-scale..scale), e))
        .collect();
    let refs: Vec<(f64, &[u32])> = terms.iter().map(|(c, e)| (*c, e.as_slice())).collect();
    Polynomial::from_terms(n, &refs)
}

/// Restriction of a random cubic polynomial.
pub fn random_smooth_field(rng: &mut impl Rng, n: usize) -> ScalarField {
    ScalarField::polynomial(random_polynomial(rng, n, 3, 1.0))
}

fn random_leaf(rng: &mut impl Rng, n: usize) -> Result<ScalarField> {
    Ok(match rng.random_range(0..4) {
        0 => ScalarField::disk_support(&random_unit(rng, n), rng.random_range(1.0..3.0))?,
        1 => ScalarField::linear(&random_vector(rng, n, 1.0)),
        2 => ScalarField::constant(n, rng.random_range(-1.0..1.0)),
        _ => random_smooth_field(rng, n),
    })
}

/// A random `Min`/`Max` tree of the given depth over disk supports, linear,
/// constant and polynomial leaves.
pub fn random_lattice_field(rng: &mut impl Rng, n: usize, depth: usize) -> Result<ScalarField> {
    if depth == 0 {
        return random_leaf(rng, n);
    }
    let arity = rng.random_range(2..4);
    let children = (0..arity)
        .map(|_| random_lattice_field(rng, n, depth - 1))
        .collect::<Result<Vec<_>>>()?;
    if rng.random_bool(0.5) {
        ScalarField::meet(&children)
    } else {
        ScalarField::join(&children)
    }
}

/// A random field from disk supports, optionally plus a smooth part.
pub fn random_disk_field(rng: &mut impl Rng, n: usize) -> Result<ScalarField> {
    let disk = ScalarField::disk_support(&random_unit(rng, n), rng.random_range(1.0..3.0))?;
    if rng.random_bool(0.5) {
        disk.add(&random_smooth_field(rng, n).scaled(0.3))
    } else {
        Ok(disk)
    }
}
