//! Grid estimates of `‖f‖∞`, `Lip(f)`, the metric `d_τ` and τ-convergence.
//!
//! `Lip(f)` is estimated by the essential supremum of `|∇f|` over grid nodes,
//! i.e. with respect to the geodesic metric. Nodes where a lattice tie makes the
//! gradient ambiguous are excluded from the gradient maximum and counted.

use rayon::prelude::*;

use super::ScalarField;
use crate::error::{Error, Result};
use crate::quadrature::{pairwise_sum, QuadratureGrid};

/// One pass over a grid: sup of `|f|`, sup and integral of `|∇f|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStats {
    pub sup_norm: f64,
    pub lip_est: f64,
    pub grad_l1: f64,
    pub ties: usize,
}

pub fn field_stats(f: &ScalarField, grid: &QuadratureGrid) -> Result<FieldStats> {
    check_dim(f, grid)?;
    let per_node: Vec<(f64, f64, usize)> = grid.map_nodes(|x| {
        let (g, ties) = f.sph_grad_first_active(x);
        (f.eval(x).abs(), g.norm(), ties)
    });
    let mut sup_norm: f64 = 0.0;
    let mut lip_est: f64 = 0.0;
    let mut ties = 0;
    let mut weighted = Vec::with_capacity(per_node.len());
    for (index, (&(v, g, t), &w)) in per_node.iter().zip(grid.weights()).enumerate() {
        if !v.is_finite() || !g.is_finite() {
            return Err(Error::NonFiniteValue { index });
        }
        sup_norm = sup_norm.max(v);
        if t > 0 {
            ties += 1;
        } else {
            lip_est = lip_est.max(g);
        }
        weighted.push(g * w);
    }
    Ok(FieldStats {
        sup_norm,
        lip_est,
        grad_l1: pairwise_sum(&weighted),
        ties,
    })
}

fn check_dim(f: &ScalarField, grid: &QuadratureGrid) -> Result<()> {
    if f.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: f.dim(),
        });
    }
    Ok(())
}

/// `max |f|` over the grid nodes.
pub fn sup_norm(f: &ScalarField, grid: &QuadratureGrid) -> Result<f64> {
    check_dim(f, grid)?;
    Ok(grid
        .map_nodes(|x| f.eval(x).abs())
        .into_iter()
        .fold(0.0, f64::max))
}

/// `max |∇f|` over non-tie nodes, with the number of tie nodes skipped.
pub fn lip_est(f: &ScalarField, grid: &QuadratureGrid) -> Result<(f64, usize)> {
    let s = field_stats(f, grid)?;
    Ok((s.lip_est, s.ties))
}

/// `d_τ(f,h) = ‖f-h‖∞ + ∫|∇f - ∇h|`, with the tie count.
pub fn d_tau(f: &ScalarField, h: &ScalarField, grid: &QuadratureGrid) -> Result<(f64, usize)> {
    let s = field_stats(&f.sub(h)?, grid)?;
    Ok((s.sup_norm + s.grad_l1, s.ties))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauTolerances {
    /// Bound on `‖f_J - f‖∞` for the last element of the sequence.
    pub sup: f64,
    /// Bound on `∫|∇f_J - ∇f|` for the last element.
    pub grad_l1: f64,
    /// Bound on `sup_j ‖∇f_j‖∞`.
    pub grad_bound: f64,
}

impl Default for TauTolerances {
    fn default() -> Self {
        TauTolerances {
            sup: 1e-2,
            grad_l1: 1e-2,
            grad_bound: 1e3,
        }
    }
}

/// Result of a τ-convergence check of a finite sequence towards a limit.
#[derive(Debug, Clone, PartialEq)]
pub struct TauReport {
    /// `‖f_J - f‖∞` at the last element.
    pub uniform_sup_deviation: f64,
    /// `∫|∇f_J - ∇f|` at the last element.
    pub gradient_l1_deviation: f64,
    /// `max_j ‖∇f_j‖∞` over the sequence.
    pub gradient_linf_bound: f64,
    pub sup_deviations: Vec<f64>,
    pub l1_deviations: Vec<f64>,
    pub ties: usize,
    pub verdict: bool,
}

/// Checks the three τ-conditions on the grid: uniform convergence, `L¹`
/// convergence of gradients (the grid proxy for a.e. convergence under a
/// uniform bound), and a uniform gradient bound.
pub fn tau_check(
    sequence: &[ScalarField],
    limit: &ScalarField,
    grid: &QuadratureGrid,
    tols: &TauTolerances,
) -> Result<TauReport> {
    if sequence.is_empty() {
        return Err(Error::InvalidInput("empty sequence".into()));
    }
    let mut sup_deviations = Vec::with_capacity(sequence.len());
    let mut l1_deviations = Vec::with_capacity(sequence.len());
    let mut bound: f64 = 0.0;
    let mut ties = 0;
    let seq_stats: Vec<Result<(FieldStats, FieldStats)>> = sequence
        .par_iter()
        .map(|fj| Ok((field_stats(&fj.sub(limit)?, grid)?, field_stats(fj, grid)?)))
        .collect();
    for s in seq_stats {
        let (diff, own) = s?;
        sup_deviations.push(diff.sup_norm);
        l1_deviations.push(diff.grad_l1);
        bound = bound.max(own.lip_est);
        ties += diff.ties + own.ties;
    }
    let uniform_sup_deviation = *sup_deviations.last().expect("nonempty");
    let gradient_l1_deviation = *l1_deviations.last().expect("nonempty");
    let verdict = uniform_sup_deviation <= tols.sup
        && gradient_l1_deviation <= tols.grad_l1
        && bound <= tols.grad_bound;
    Ok(TauReport {
        uniform_sup_deviation,
        gradient_l1_deviation,
        gradient_linf_bound: bound,
        sup_deviations,
        l1_deviations,
        ties,
        verdict,
    })
}
