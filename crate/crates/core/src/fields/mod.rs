//! Lipschitz functions on `S^{n-1}` as expression trees.
//!
//! A [`ScalarField`] evaluates pointwise and reports, at points where it is
//! differentiable, the Euclidean gradient of its 1-homogeneous extension
//! ([`ScalarField::bar_grad`]). Lattice nodes (`Min`/`Max`) differentiate
//! through their unique active branch; coincidences are reported as
//! [`Error::TieAtNode`] or, in the `_first_active` variants, resolved by the
//! first active child and flagged.

mod index;
pub mod norms;
pub mod smooth;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, tangent_projector};
use index::CapIndex;
pub use norms::{
    d_tau, field_stats, lip_est, sup_norm, tau_check, FieldStats, TauReport, TauTolerances,
};
pub use smooth::{ClosureFunction, Monomial, Parity, Polynomial, SmoothFn, SphereFunction};

/// Lattice branches within this distance of the extremal value count as active.
pub const TIE_TOL: f64 = 1e-12;

/// Expression tree node.
#[derive(Clone)]
pub enum Node {
    Const(f64),
    Linear(DVector<f64>),
    /// `λ|x - ⟨x,ξ⟩ξ| - ⟨x,ξ⟩`, the support function of `λD_ξ - ξ`.
    DiskSupport {
        xi: DVector<f64>,
        lambda: f64,
    },
    Scale(f64, ScalarField),
    Sum(Vec<ScalarField>),
    Min(Lattice),
    Max(Lattice),
    /// `(g·f)(x) = |gᵀx| f(gᵀx/|gᵀx|)`.
    GlAct {
        g: DMatrix<f64>,
        g_t: DMatrix<f64>,
        child: ScalarField,
    },
    Smooth(SmoothFn),
}

/// Children of a `Min`/`Max` node.
#[derive(Clone)]
pub struct Lattice {
    children: Vec<ScalarField>,
    index: Option<Arc<CapIndex>>,
}

impl Lattice {
    pub fn children(&self) -> &[ScalarField] {
        &self.children
    }

    /// Indices of the children that can realize the lattice value at `x`, in
    /// child order.
    fn candidates(&self, x: &[f64]) -> Vec<usize> {
        match &self.index {
            Some(index) => index.candidates(x),
            None => (0..self.children.len()).collect(),
        }
    }
}

/// A Lipschitz function on `S^{n-1}`; cheap to clone.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    node: Arc<Node>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Extremum {
    Min,
    Max,
}

impl ScalarField {
    fn from_node(dim: usize, node: Node) -> Self {
        ScalarField {
            dim,
            node: Arc::new(node),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::from_node(dim, Node::Const(c))
    }

    /// The function identically zero.
    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    /// Restriction of `y ↦ ⟨v, y⟩`.
    pub fn linear(v: &[f64]) -> Self {
        Self::from_node(v.len(), Node::Linear(DVector::from_column_slice(v)))
    }

    pub fn disk_support(xi: &[f64], lambda: f64) -> Result<Self> {
        if (norm(xi) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("ξ must be a unit vector".into()));
        }
        if !(lambda >= 1.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("λ must be ≥ 1, got {lambda}")));
        }
        Ok(Self::from_node(
            xi.len(),
            Node::DiskSupport {
                xi: DVector::from_column_slice(xi),
                lambda,
            },
        ))
    }

    pub fn smooth(f: SmoothFn) -> Self {
        Self::from_node(f.dim(), Node::Smooth(f))
    }

    pub fn polynomial(p: Polynomial) -> Self {
        Self::smooth(SmoothFn::polynomial(p))
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self::from_node(self.dim, Node::Scale(t, self.clone()))
    }

    pub fn sum(fs: &[ScalarField]) -> Result<Self> {
        let dim = common_dim(fs)?;
        Ok(Self::from_node(dim, Node::Sum(fs.to_vec())))
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        Self::sum(&[self.clone(), other.clone()])
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        Self::sum(&[self.clone(), other.scaled(-1.0)])
    }

    /// Pointwise minimum `f₁ ∧ … ∧ f_m`.
    pub fn meet(fs: &[ScalarField]) -> Result<Self> {
        let dim = common_dim(fs)?;
        let lattice = Lattice {
            children: fs.to_vec(),
            index: CapIndex::for_meet(dim, fs).map(Arc::new),
        };
        Ok(Self::from_node(dim, Node::Min(lattice)))
    }

    /// Pointwise maximum `f₁ ∨ … ∨ f_m`.
    pub fn join(fs: &[ScalarField]) -> Result<Self> {
        let dim = common_dim(fs)?;
        let lattice = Lattice {
            children: fs.to_vec(),
            index: None,
        };
        Ok(Self::from_node(dim, Node::Max(lattice)))
    }

    /// The linear action `(g·f)(x) = |gᵀx| f(gᵀx/|gᵀx|)`.
    pub fn gl_act(g: &DMatrix<f64>, f: &ScalarField) -> Result<Self> {
        if g.nrows() != f.dim || g.ncols() != f.dim {
            return Err(Error::DimensionMismatch {
                expected: f.dim,
                found: g.nrows(),
            });
        }
        let det = g.determinant();
        if !det.is_finite() || det.abs() < 1e-14 * g.norm().powi(f.dim as i32).max(1e-300) {
            return Err(Error::SingularMatrix);
        }
        Ok(Self::from_node(
            f.dim,
            Node::GlAct {
                g: g.clone(),
                g_t: g.transpose(),
                child: f.clone(),
            },
        ))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    /// True when every node admits a second derivative (no lattice or disk
    /// nodes, and all smooth bundles flagged smooth).
    pub fn is_smooth(&self) -> bool {
        match &*self.node {
            Node::Const(_) | Node::Linear(_) => true,
            Node::DiskSupport { .. } | Node::Min(_) | Node::Max(_) => false,
            Node::Scale(_, c) => c.is_smooth(),
            Node::Sum(cs) => cs.iter().all(ScalarField::is_smooth),
            Node::GlAct { child, .. } => child.is_smooth(),
            Node::Smooth(s) => s.is_smooth(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &*self.node {
            Node::Const(c) => *c,
            Node::Linear(v) => dot(v.as_slice(), x),
            Node::DiskSupport { xi, lambda } => disk_value(xi.as_slice(), *lambda, x).0,
            Node::Scale(t, c) => t * c.eval(x),
            Node::Sum(cs) => cs.iter().map(|c| c.eval(x)).sum(),
            Node::Min(l) => l
                .candidates(x)
                .into_iter()
                .map(|i| l.children[i].eval(x))
                .fold(f64::INFINITY, f64::min),
            Node::Max(l) => l
                .candidates(x)
                .into_iter()
                .map(|i| l.children[i].eval(x))
                .fold(f64::NEG_INFINITY, f64::max),
            Node::GlAct { g_t, child, .. } => {
                let (s, u) = pull_back(g_t, x);
                s * child.eval(u.as_slice())
            }
            Node::Smooth(s) => s.value(x),
        }
    }

    /// Value and `∇̄f(x)`, resolving lattice ties by the first active child.
    /// The tie counter is incremented once per ambiguous node visited.
    pub fn value_and_bar_grad(&self, x: &[f64], ties: &mut usize) -> (f64, DVector<f64>) {
        match &*self.node {
            Node::Const(c) => (*c, DVector::from_column_slice(x) * *c),
            Node::Linear(v) => (dot(v.as_slice(), x), v.clone()),
            Node::DiskSupport { xi, lambda } => {
                let (value, w, r) = disk_value(xi.as_slice(), *lambda, x);
                let grad = if r < TIE_TOL {
                    *ties += 1;
                    -xi
                } else {
                    w * (*lambda / r) - xi
                };
                (value, grad)
            }
            Node::Scale(t, c) => {
                let (v, g) = c.value_and_bar_grad(x, ties);
                (t * v, g * *t)
            }
            Node::Sum(cs) => {
                let mut v = 0.0;
                let mut g = DVector::zeros(self.dim);
                for c in cs {
                    let (cv, cg) = c.value_and_bar_grad(x, ties);
                    v += cv;
                    g += cg;
                }
                (v, g)
            }
            Node::Min(l) => lattice_grad(l, x, Extremum::Min, ties),
            Node::Max(l) => lattice_grad(l, x, Extremum::Max, ties),
            Node::GlAct { g, g_t, child } => {
                let (s, u) = pull_back(g_t, x);
                let (v, cg) = child.value_and_bar_grad(u.as_slice(), ties);
                (s * v, g * cg)
            }
            Node::Smooth(s) => (s.value(x), s.bar_grad(x)),
        }
    }

    /// `∇̄f(x) = ∇f(x) + f(x)x`; errors at lattice ties and disk poles.
    pub fn bar_grad(&self, x: &[f64]) -> Result<DVector<f64>> {
        let (grad, ties) = self.bar_grad_first_active(x);
        if ties > 0 {
            return Err(Error::TieAtNode { ties });
        }
        Ok(grad)
    }

    /// `∇̄f(x)` with ties resolved by the first active child; the second
    /// component counts the ambiguous nodes encountered.
    pub fn bar_grad_first_active(&self, x: &[f64]) -> (DVector<f64>, usize) {
        let mut ties = 0;
        let (_, g) = self.value_and_bar_grad(x, &mut ties);
        (g, ties)
    }

    /// Spherical gradient `∇f(x) = ∇̄f(x) - f(x)x`.
    pub fn sph_grad(&self, x: &[f64]) -> Result<DVector<f64>> {
        let (g, ties) = self.sph_grad_first_active(x);
        if ties > 0 {
            return Err(Error::TieAtNode { ties });
        }
        Ok(g)
    }

    pub fn sph_grad_first_active(&self, x: &[f64]) -> (DVector<f64>, usize) {
        let mut ties = 0;
        let (v, g) = self.value_and_bar_grad(x, &mut ties);
        (g - DVector::from_column_slice(x) * v, ties)
    }

    /// `∇²f(x) + f(x) Id` on `T_x S^{n-1}`, as the `n × n` matrix
    /// `P D²f̃(x) P` with `P = Id - xxᵀ`.
    pub fn sph_hess(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let h = self.ext_hess(x)?;
        let p = tangent_projector(x);
        let h = &p * h * &p;
        Ok((&h + h.transpose()) * 0.5)
    }

    fn ext_hess(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        match &*self.node {
            Node::Const(c) => Ok(tangent_projector(x) * *c),
            Node::Linear(_) => Ok(DMatrix::zeros(self.dim, self.dim)),
            Node::Scale(t, c) => Ok(c.ext_hess(x)? * *t),
            Node::Sum(cs) => cs.iter().try_fold(DMatrix::zeros(self.dim, self.dim), |acc, c| {
                Ok(acc + c.ext_hess(x)?)
            }),
            Node::GlAct { g, g_t, child } => {
                let (s, u) = pull_back(g_t, x);
                Ok(g * child.ext_hess(u.as_slice())? * g_t / s)
            }
            Node::Smooth(s) if s.is_smooth() => Ok(s.ext_hess(x)),
            Node::Smooth(s) => Err(Error::NotSmooth(format!("smooth node `{}` is flagged non-smooth", s.label()))),
            Node::DiskSupport { .. } => Err(Error::NotSmooth("disk support".into())),
            Node::Min(_) | Node::Max(_) => Err(Error::NotSmooth("lattice node".into())),
        }
    }
}

fn common_dim(fs: &[ScalarField]) -> Result<usize> {
    let first = fs
        .first()
        .ok_or_else(|| Error::InvalidInput("empty field list".into()))?;
    for f in fs {
        if f.dim != first.dim {
            return Err(Error::DimensionMismatch {
                expected: first.dim,
                found: f.dim,
            });
        }
    }
    Ok(first.dim)
}

/// Value of the disk support at `x`, together with `w = x - ⟨x,ξ⟩ξ` and `|w|`.
fn disk_value(xi: &[f64], lambda: f64, x: &[f64]) -> (f64, DVector<f64>, f64) {
    let t = dot(xi, x);
    let w = DVector::from_iterator(x.len(), x.iter().zip(xi).map(|(a, b)| a - t * b));
    let r = w.norm();
    (lambda * r - t, w, r)
}

fn pull_back(g_t: &DMatrix<f64>, x: &[f64]) -> (f64, DVector<f64>) {
    let z = g_t * DVector::from_column_slice(x);
    let s = z.norm();
    (s, z / s)
}

fn lattice_grad(l: &Lattice, x: &[f64], ext: Extremum, ties: &mut usize) -> (f64, DVector<f64>) {
    let candidates = l.candidates(x);
    let values: Vec<f64> = candidates.iter().map(|&i| l.children[i].eval(x)).collect();
    let best = match ext {
        Extremum::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
        Extremum::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let mut active = candidates
        .iter()
        .zip(&values)
        .filter(|(_, &v)| (v - best).abs() <= TIE_TOL)
        .map(|(&i, _)| i);
    let first = active.next().expect("lattice node has at least one child");
    if active.next().is_some() {
        *ties += 1;
    }
    let (_, g) = l.children[first].value_and_bar_grad(x, ties);
    (best, g)
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.node {
            Node::Const(c) => write!(f, "Const({c})"),
            Node::Linear(v) => write!(f, "Linear({:?})", v.as_slice()),
            Node::DiskSupport { xi, lambda } => write!(f, "DiskSupport({:?}, {lambda})", xi.as_slice()),
            Node::Scale(t, c) => write!(f, "Scale({t}, {c:?})"),
            Node::Sum(cs) => f.debug_tuple("Sum").field(cs).finish(),
            Node::Min(l) => f.debug_tuple("Min").field(&l.children).finish(),
            Node::Max(l) => f.debug_tuple("Max").field(&l.children).finish(),
            Node::GlAct { g, child, .. } => write!(f, "GlAct({:?}, {child:?})", g.as_slice()),
            Node::Smooth(s) => write!(f, "Smooth({})", s.label()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = norm(&v);
            if r > 0.1 && r <= 1.0 {
                return v.iter().map(|c| c / r).collect();
            }
        }
    }

    fn ext(f: &ScalarField, y: &[f64]) -> f64 {
        let r = norm(y);
        let u: Vec<f64> = y.iter().map(|c| c / r).collect();
        r * f.eval(&u)
    }

    fn fd_grad(f: &ScalarField, x: &[f64], h: f64) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (ext(f, &a) - ext(f, &b)) / (2.0 * h)
        })
    }

    const E1: [f64; 3] = [1.0, 0.0, 0.0];

    #[test]
    fn eval_examples() {
        assert_eq!(ScalarField::linear(&E1).eval(&E1), 1.0);
        let phi = ScalarField::disk_support(&E1, 1.0).unwrap();
        assert!((phi.eval(&E1) + 1.0).abs() < 1e-15);
        let psi = ScalarField::meet(&[ScalarField::zero(3), phi]).unwrap();
        assert_eq!(psi.eval(&[-1.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn bar_grad_examples() {
        let v = [0.3, -1.2, 2.0];
        let x = [0.0, 0.6, 0.8];
        assert_eq!(ScalarField::linear(&v).bar_grad(&x).unwrap().as_slice(), &v);
        let c = ScalarField::constant(3, 2.5).bar_grad(&x).unwrap();
        assert!((c - DVector::from_column_slice(&x) * 2.5).norm() < 1e-15);
    }

    #[test]
    fn gl_act_of_linear_has_gradient_g_v() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = [0.4, -0.1, 0.9];
        let g = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.5 } else { 0.0 } + rng.random_range(-0.5..0.5));
        let f = ScalarField::gl_act(&g, &ScalarField::linear(&v)).unwrap();
        let gv = &g * DVector::from_column_slice(&v);
        for _ in 0..10 {
            let x = random_unit(&mut rng, 3);
            let bg = f.bar_grad(&x).unwrap();
            assert!((&bg - &gv).norm() < 1e-12);
            assert!((fd_grad(&f, &x, 1e-6) - &gv).norm() < 1e-8);
        }
    }

    #[test]
    fn sph_grad_examples() {
        assert!(ScalarField::constant(3, 4.0).sph_grad(&[0.0, 0.6, 0.8]).unwrap().norm() < 1e-15);
        let v = [1.0, 2.0, -1.0];
        let x = [0.0, 0.6, 0.8];
        let expected = DVector::from_column_slice(&v) - DVector::from_column_slice(&x) * dot(&v, &x);
        assert!((ScalarField::linear(&v).sph_grad(&x).unwrap() - expected).norm() < 1e-15);
        let phi = ScalarField::disk_support(&E1, 1.0).unwrap();
        let g = phi.sph_grad(&[0.0, 1.0, 0.0]).unwrap();
        assert!((g - DVector::from_vec(vec![-1.0, 0.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn disk_pole_is_a_tie() {
        let phi = ScalarField::disk_support(&E1, 2.0).unwrap();
        assert!(matches!(phi.bar_grad(&E1), Err(Error::TieAtNode { .. })));
        let (g, ties) = phi.bar_grad_first_active(&E1);
        assert_eq!(ties, 1);
        assert_eq!(g.as_slice(), &[-1.0, 0.0, 0.0]);
    }

    #[test]
    fn lattice_tie_detection() {
        let f = ScalarField::join(&[ScalarField::constant(3, 1.0), ScalarField::constant(3, 1.0)]).unwrap();
        assert!(matches!(f.bar_grad(&E1), Err(Error::TieAtNode { .. })));
        let h = ScalarField::meet(&[ScalarField::zero(3), ScalarField::constant(3, 1.0)]).unwrap();
        assert_eq!(h.eval(&E1), 0.0);
        assert!(h.bar_grad(&E1).is_ok());
    }

    #[test]
    fn sph_hess_examples() {
        let x = [0.0, 0.6, 0.8];
        let h = ScalarField::constant(3, 2.0).sph_hess(&x).unwrap();
        assert!((h - tangent_projector(&x) * 2.0).norm() < 1e-15);
        assert!(ScalarField::linear(&[1.0, 2.0, 3.0]).sph_hess(&x).unwrap().norm() < 1e-15);
        // f̃(y) = y1²/|y| at e2: tangent block diag(2, 0) in the basis {e1, e3}.
        let f = ScalarField::polynomial(Polynomial::from_terms(3, &[(1.0, &[2, 0, 0])]));
        let e2 = [0.0, 1.0, 0.0];
        let h = f.sph_hess(&e2).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((&h - expected).norm() < 1e-14);
        // finite-difference oracle of y1²/|y|
        let ext = |y: &[f64]| y[0] * y[0] / norm(y);
        let step = 1e-5;
        for i in 0..3 {
            for k in 0..3 {
                let f = |di: f64, dk: f64| {
                    let mut y = e2;
                    y[i] += di;
                    y[k] += dk;
                    ext(&y)
                };
                let fd = (f(step, step) - f(step, -step) - f(-step, step) + f(-step, -step)) / (4.0 * step * step);
                assert!((fd - h[(i, k)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sph_hess_rejects_lattice_nodes() {
        let f = ScalarField::meet(&[ScalarField::zero(3), ScalarField::linear(&E1)]).unwrap();
        assert!(matches!(f.sph_hess(&E1), Err(Error::NotSmooth(_))));
        let d = ScalarField::disk_support(&E1, 1.0).unwrap();
        assert!(matches!(d.sph_hess(&[0.0, 1.0, 0.0]), Err(Error::NotSmooth(_))));
    }

    #[test]
    fn gl_act_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = ScalarField::constant(3, 1.0);
        let doubled = ScalarField::gl_act(&(DMatrix::identity(3, 3) * 2.0), &f).unwrap();
        let same = ScalarField::gl_act(&DMatrix::identity(3, 3), &ScalarField::disk_support(&E1, 2.0).unwrap()).unwrap();
        let disk = ScalarField::disk_support(&E1, 2.0).unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let v = DVector::from_vec(vec![0.2, 0.7, -0.4]);
        let rotated = ScalarField::gl_act(&rot, &ScalarField::linear(v.as_slice())).unwrap();
        let rv = ScalarField::linear((&rot * &v).as_slice());
        for _ in 0..100 {
            let x = random_unit(&mut rng, 3);
            assert!((doubled.eval(&x) - 2.0).abs() < 1e-15);
            assert!((same.eval(&x) - disk.eval(&x)).abs() < 1e-15);
            assert!((rotated.eval(&x) - rv.eval(&x)).abs() < 1e-12);
        }
        assert_eq!(
            ScalarField::gl_act(&DMatrix::zeros(3, 3), &f).err(),
            Some(Error::SingularMatrix)
        );
    }

    #[test]
    fn meet_join_examples() {
        let f = ScalarField::disk_support(&[0.0, 0.6, 0.8], 1.5).unwrap();
        let m = ScalarField::meet(&[f.clone(), f.clone()]).unwrap();
        let z = ScalarField::meet(&[ScalarField::zero(3), ScalarField::constant(3, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = random_unit(&mut rng, 3);
            assert_eq!(m.eval(&x), f.eval(&x));
            assert_eq!(z.eval(&x), 0.0);
        }
        let err = ScalarField::join(&[ScalarField::zero(3), ScalarField::zero(4)]);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }
}
