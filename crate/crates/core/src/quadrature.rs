//! Discrete approximations of the Hausdorff measure on the unit sphere.
//!
//! Three rules are available:
//!
//! * [`Scheme::Icosphere`]: centroids of a subdivided icosahedron (n = 3),
//!   weighted by the exact spherical triangle areas.
//! * [`Scheme::ProductGauss`]: Gauss-Legendre in the polar coordinate times a
//!   uniform azimuthal rule (n = 3). Exact for spherical polynomials of degree
//!   below twice the number of Legendre nodes.
//! * [`Scheme::MonteCarlo`]: i.i.d. uniform samples with equal weights (n = 3, 4).
//!
//! All sums are reduced pairwise in node order, so results do not depend on the
//! number of worker threads.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Surface area `σ_m` of the unit sphere `S^m ⊂ R^{m+1}`.
pub fn sphere_area(m: usize) -> f64 {
    assert!(m >= 1, "sphere dimension must be at least 1");
    (m as f64 + 1.0) * unit_ball_volume(m + 1)
}

/// Lebesgue measure `ω_m` of the unit ball in `R^m`.
pub fn unit_ball_volume(m: usize) -> f64 {
    // ω_0 = 1, ω_1 = 2, ω_m = 2π/m · ω_{m-2}
    match m {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / m as f64 * unit_ball_volume(m - 2),
    }
}

/// Values that can be accumulated by the quadrature rules.
pub trait Summand: Copy + Send + Sync + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn is_finite(&self) -> bool;
}

impl Summand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl Summand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Pairwise (cascade) summation in slice order.
pub fn pairwise_sum<T: Summand>(xs: &[T]) -> T {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        xs.iter().fold(T::zero(), |acc, &x| acc + x)
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Icosphere,
    ProductGauss,
    MonteCarlo,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Icosphere => "icosphere",
            Scheme::ProductGauss => "gauss",
            Scheme::MonteCarlo => "mc",
        })
    }
}

/// Parsed form of a grid description such as `icosphere:5`, `gauss:32` or
/// `mc:1000000:seed42`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSpec {
    Icosphere { level: u32 },
    ProductGauss { nodes: usize },
    MonteCarlo { count: usize, seed: u64 },
}

impl GridSpec {
    pub fn scheme(&self) -> Scheme {
        match self {
            GridSpec::Icosphere { .. } => Scheme::Icosphere,
            GridSpec::ProductGauss { .. } => Scheme::ProductGauss,
            GridSpec::MonteCarlo { .. } => Scheme::MonteCarlo,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            GridSpec::MonteCarlo { seed, .. } => *seed,
            _ => 0,
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Icosphere { level } => write!(f, "icosphere:{level}"),
            GridSpec::ProductGauss { nodes } => write!(f, "gauss:{nodes}"),
            GridSpec::MonteCarlo { count, seed } => write!(f, "mc:{count}:seed{seed}"),
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unparseable grid spec `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["icosphere", level] => Ok(GridSpec::Icosphere {
                level: level.parse().map_err(|_| bad())?,
            }),
            ["gauss", nodes] => {
                let nodes: usize = nodes.parse().map_err(|_| bad())?;
                if nodes == 0 {
                    return Err(bad());
                }
                Ok(GridSpec::ProductGauss { nodes })
            }
            ["mc", count, seed] => {
                let count: usize = count.parse().map_err(|_| bad())?;
                let seed = seed.strip_prefix("seed").unwrap_or(seed);
                if count == 0 {
                    return Err(bad());
                }
                Ok(GridSpec::MonteCarlo {
                    count,
                    seed: seed.parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }
}

/// Nodes and positive weights approximating `H^{n-1}` on `S^{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spec: GridSpec,
}

/// Builds a grid on `S^{n-1}`. Icosphere and product-Gauss rules exist for
/// `n = 3` only; Monte Carlo grids for `n ∈ {3, 4}`.
pub fn build_grid(n: usize, spec: GridSpec) -> Result<QuadratureGrid> {
    let unsupported = || Error::UnsupportedScheme {
        scheme: spec.scheme().to_string(),
        dim: n,
    };
    let (nodes, weights) = match spec {
        GridSpec::Icosphere { level } if n == 3 => icosphere(level),
        GridSpec::ProductGauss { nodes } if n == 3 => product_gauss(nodes),
        GridSpec::MonteCarlo { count, seed } if n == 3 || n == 4 => monte_carlo(n, count, seed),
        _ => return Err(unsupported()),
    };
    Ok(QuadratureGrid {
        dim: n,
        nodes,
        weights,
        spec,
    })
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn scheme(&self) -> Scheme {
        self.spec.scheme()
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// Evaluates `g` at every node in parallel, preserving node order.
    pub fn map_nodes<T, F>(&self, g: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync + Send,
    {
        self.nodes.par_chunks_exact(self.dim).map(g).collect()
    }

    /// `Σ w_i g(x_i)`.
    pub fn integrate<T, F>(&self, g: F) -> Result<T>
    where
        T: Summand,
        F: Fn(&[f64]) -> T + Sync,
    {
        self.try_integrate(|x| Ok(g(x)))
    }

    /// Like [`integrate`](Self::integrate) for fallible integrands; the first
    /// error in node order is returned.
    pub fn try_integrate<T, F>(&self, g: F) -> Result<T>
    where
        T: Summand,
        F: Fn(&[f64]) -> Result<T> + Sync,
    {
        let terms: Vec<Result<T>> = self
            .nodes
            .par_chunks_exact(self.dim)
            .zip(self.weights.par_iter())
            .enumerate()
            .map(|(index, (x, &w))| {
                let v = g(x)?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteValue { index });
                }
                Ok(v * w)
            })
            .collect();
        let terms = terms.into_iter().collect::<Result<Vec<T>>>()?;
        Ok(pairwise_sum(&terms))
    }

    /// Componentwise integral of a vector-valued integrand of length `dim`.
    pub fn integrate_vec<T, F>(&self, g: F) -> Result<Vec<T>>
    where
        T: Summand,
        F: Fn(&[f64]) -> Vec<T> + Sync,
    {
        let n = self.dim;
        let rows: Vec<Vec<T>> = self.map_nodes(|x| g(x));
        let mut out = Vec::with_capacity(n);
        for c in 0..n {
            let mut column = Vec::with_capacity(rows.len());
            for (index, (row, &w)) in rows.iter().zip(&self.weights).enumerate() {
                if row.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: row.len(),
                    });
                }
                if !row[c].is_finite() {
                    return Err(Error::NonFiniteValue { index });
                }
                column.push(row[c] * w);
            }
            out.push(pairwise_sum(&column));
        }
        Ok(out)
    }

    /// CSV dump: a header line `n,count,scheme,seed`, then one row
    /// `x1,...,xn,w` per node with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{},{},{},{}\n",
            self.dim,
            self.len(),
            self.scheme(),
            self.spec.seed()
        );
        for (x, w) in self.nodes().zip(&self.weights) {
            for c in x {
                out.push_str(&format!("{c:.16e},"));
            }
            out.push_str(&format!("{w:.16e}\n"));
        }
        out
    }
}

fn icosahedron() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts = Vec::with_capacity(12);
    for &a in &[-1.0, 1.0] {
        for &b in &[-phi, phi] {
            verts.push([0.0, a, b]);
            verts.push([a, b, 0.0]);
            verts.push([b, 0.0, a]);
        }
    }
    let len = norm(&verts[0]);
    for v in &mut verts {
        for c in v.iter_mut() {
            *c /= len;
        }
    }
    let d2 = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
    let edge2 = (0..12)
        .flat_map(|i| (0..12).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| d2(&verts[i], &verts[j]))
        .fold(f64::INFINITY, f64::min);
    let is_edge = |i: usize, j: usize| (d2(&verts[i], &verts[j]) - edge2).abs() < 1e-9;
    let mut faces = Vec::with_capacity(20);
    for i in 0..12 {
        for j in i + 1..12 {
            for k in j + 1..12 {
                if is_edge(i, j) && is_edge(j, k) && is_edge(i, k) {
                    let (a, b, c) = (verts[i], verts[j], verts[k]);
                    let orient = dot(&cross(&sub(&b, &a), &sub(&c, &a)), &a);
                    faces.push(if orient > 0.0 { [i, j, k] } else { [i, k, j] });
                }
            }
        }
    }
    debug_assert_eq!(faces.len(), 20);
    (verts, faces)
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let l = norm(&v);
    [v[0] / l, v[1] / l, v[2] / l]
}

fn midpoint(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    unit([a[0] + b[0], a[1] + b[1], a[2] + b[2]])
}

/// Area of the spherical triangle with unit vertices `a, b, c`.
fn spherical_triangle_area(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let triple = dot(a, &cross(b, c)).abs();
    let denom = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    2.0 * triple.atan2(denom)
}

fn icosphere(level: u32) -> (Vec<f64>, Vec<f64>) {
    let (verts, faces) = icosahedron();
    let mut tris: Vec<[[f64; 3]; 3]> = faces
        .iter()
        .map(|f| [verts[f[0]], verts[f[1]], verts[f[2]]])
        .collect();
    for _ in 0..level {
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = midpoint(&a, &b);
            let bc = midpoint(&b, &c);
            let ca = midpoint(&c, &a);
            next.push([a, ab, ca]);
            next.push([ab, b, bc]);
            next.push([ca, bc, c]);
            next.push([ab, bc, ca]);
        }
        tris = next;
    }
    let mut nodes = Vec::with_capacity(tris.len() * 3);
    let mut weights = Vec::with_capacity(tris.len());
    for [a, b, c] in &tris {
        let centroid = unit([a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]]);
        nodes.extend_from_slice(&centroid);
        weights.push(spherical_triangle_area(a, b, c));
    }
    let scale = 4.0 * PI / pairwise_sum(&weights);
    for w in &mut weights {
        *w *= scale;
    }
    (nodes, weights)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // Legendre recurrence for P_m(t) and P_{m-1}(t).
            let (mut p0, mut p1) = (1.0, t);
            if m == 1 {
                p1 = t;
                p0 = 1.0;
            } else {
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_m, p0 = P_{m-1}
            dp = m as f64 * (t * p1 - p0) / (t * t - 1.0);
            let step = p1 / dp;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[i] = -t;
        nodes[m - 1 - i] = t;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn product_gauss(m: usize) -> (Vec<f64>, Vec<f64>) {
    let (ts, ws) = gauss_legendre(m);
    let n_phi = 2 * m;
    let mut nodes = Vec::with_capacity(3 * m * n_phi);
    let mut weights = Vec::with_capacity(m * n_phi);
    for (t, w) in ts.iter().zip(&ws) {
        let s = (1.0 - t * t).sqrt();
        for j in 0..n_phi {
            let phi = 2.0 * PI * (j as f64 + 0.5) / n_phi as f64;
            nodes.extend_from_slice(&[s * phi.cos(), s * phi.sin(), *t]);
            weights.push(w * 2.0 * PI / n_phi as f64);
        }
    }
    (nodes, weights)
}

fn monte_carlo(n: usize, count: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(n * count);
    let mut buf = vec![0.0; n];
    while nodes.len() < n * count {
        for c in buf.iter_mut() {
            *c = StandardNormal.sample(&mut rng);
        }
        let len = norm(&buf);
        if len < 1e-6 {
            continue;
        }
        nodes.extend(buf.iter().map(|c| c / len));
    }
    let w = sphere_area(n - 1) / count as f64;
    (nodes, vec![w; count])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn dimensional_constants() {
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn icosphere_counts_and_mass() {
        let g0 = build_grid(3, GridSpec::Icosphere { level: 0 }).unwrap();
        assert_eq!(g0.len(), 20);
        assert!(rel(g0.total_weight(), 4.0 * PI) < 1e-12);
        let g5 = build_grid(3, GridSpec::Icosphere { level: 5 }).unwrap();
        assert_eq!(g5.len(), 20 * 4usize.pow(5));
        assert!(rel(g5.total_weight(), 4.0 * PI) < 1e-12);
        assert!(g5.weights().iter().all(|&w| w > 0.0));
        assert!(g5.nodes().all(|x| (norm(x) - 1.0).abs() < 1e-12));
    }

    #[test]
    fn icosphere_level5_moments() {
        let g = build_grid(3, GridSpec::Icosphere { level: 5 }).unwrap();
        let cases: [(fn(&[f64]) -> f64, f64); 3] = [
            (|_| 1.0, 4.0 * PI),
            (|x| x[0] * x[0], 4.0 * PI / 3.0),
            (|x| x[0].powi(4), 4.0 * PI / 5.0),
        ];
        for (g_fn, exact) in cases {
            let v: f64 = g.integrate(g_fn).unwrap();
            assert!(rel(v, exact) <= 1e-3, "{v} vs {exact}");
        }
        let odd: f64 = g.integrate(|x| x[0]).unwrap();
        assert!(odd.abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_matches_known_rule() {
        let (t, w) = gauss_legendre(3);
        assert!((t[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!(t[1].abs() < 1e-15);
        assert!((w[0] - 5.0 / 9.0).abs() < 1e-14);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-14);
        let (_, w) = gauss_legendre(20);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn product_gauss_is_exact_on_polynomials() {
        let g = build_grid(3, GridSpec::ProductGauss { nodes: 8 }).unwrap();
        let v: f64 = g.integrate(|x| x[0].powi(4)).unwrap();
        assert!(rel(v, 4.0 * PI / 5.0) < 1e-14);
        let v: f64 = g.integrate(|x| x[0] * x[0] * x[1] * x[1] * x[2] * x[2]).unwrap();
        assert!(rel(v, 4.0 * PI / 105.0) < 1e-13);
    }

    #[test]
    fn monte_carlo_is_reproducible_and_equal_weight() {
        let spec = GridSpec::MonteCarlo {
            count: 1000,
            seed: 42,
        };
        let a = build_grid(4, spec).unwrap();
        let b = build_grid(4, spec).unwrap();
        assert_eq!(a, b);
        let w = 2.0 * PI * PI / 1000.0;
        assert!(a.weights().iter().all(|&x| (x - w).abs() < 1e-15));
        assert!(rel(a.total_weight(), 2.0 * PI * PI) < 1e-12);
        let c = build_grid(4, GridSpec::MonteCarlo { count: 1000, seed: 43 }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unsupported_pairs_are_rejected() {
        assert!(matches!(
            build_grid(4, GridSpec::Icosphere { level: 1 }),
            Err(Error::UnsupportedScheme { .. })
        ));
        assert!(matches!(
            build_grid(5, GridSpec::MonteCarlo { count: 10, seed: 1 }),
            Err(Error::UnsupportedScheme { .. })
        ));
    }

    #[test]
    fn integrate_vec_first_moment() {
        let g = build_grid(3, GridSpec::ProductGauss { nodes: 6 }).unwrap();
        let v: Vec<f64> = g.integrate_vec(|x| x.iter().map(|c| x[0] * c).collect()).unwrap();
        assert!(rel(v[0], 4.0 * PI / 3.0) < 1e-14);
        assert!(v[1].abs() < 1e-14 && v[2].abs() < 1e-14);
        let c: Vec<f64> = g.integrate_vec(|_| vec![1.0, -2.0, 0.5]).unwrap();
        assert!(rel(c[1], -8.0 * PI) < 1e-14);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let g = build_grid(3, GridSpec::Icosphere { level: 0 }).unwrap();
        let err = g.integrate(|x| if x[2] > 0.9 { f64::NAN } else { 0.0 });
        assert!(matches!(err, Err(Error::NonFiniteValue { .. })));
    }

    #[test]
    fn grid_spec_round_trips_through_text() {
        for s in ["icosphere:5", "gauss:32", "mc:1000000:seed42"] {
            let spec: GridSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("mc:10".parse::<GridSpec>().is_err());
        assert!("cube:3".parse::<GridSpec>().is_err());
    }

    #[test]
    fn csv_dump_layout() {
        let g = build_grid(3, GridSpec::Icosphere { level: 0 }).unwrap();
        let csv = g.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("3,20,icosphere,0"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 4);
        assert_eq!(csv.lines().count(), 21);
    }
}
