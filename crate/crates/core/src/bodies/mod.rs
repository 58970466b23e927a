//! Convex bodies, their support functions and surface area measures.
//!
//! The bodies of the odd construction are the flat disks `λD_ξ - ξ` and the
//! cones `C_{ξ,λ} = conv((λD_ξ - ξ) ∪ {0})`. The cone's area measure is an
//! atom of mass `ω_{n-1}λ^{n-1}` at `-ξ` plus a uniform density on the
//! `(n-2)`-sphere
//!
//! ```text
//! Σ_{ξ,λ} = { (λξ + η)/√(1+λ²) : η ⊥ ξ, |η| = 1 }
//! ```
//!
//! of lateral normals. The density `c = λ^{n-2}(1+λ²)^{(n-1)/2}/(n-1)` per unit
//! `H^{n-2}` is fixed by requiring that the sheet carries the lateral area
//! `ω_{n-1}λ^{n-2}√(1+λ²)`; it is checked against polytope discretizations in
//! the tests.

mod hull;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::linalg::{complement_basis, norm, outer};
use crate::quadrature::{build_grid, pairwise_sum, unit_ball_volume, GridSpec, QuadratureGrid, Summand};
pub use hull::{hull_facets, Facet};

/// Default number of nodes per direction on the sheets `Σ_{ξ,λ}`.
pub const SHEET_RESOLUTION: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexBody {
    Polytope { vertices: Vec<Vec<f64>> },
    Ball { dim: usize, radius: f64 },
    /// `λD_ξ - ξ`.
    Disk { xi: Vec<f64>, lambda: f64 },
    /// `C_{ξ,λ}`.
    Cone { xi: Vec<f64>, lambda: f64 },
}

fn check_xi_lambda(xi: &[f64], lambda: f64) -> Result<()> {
    if xi.len() < 2 || (norm(xi) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("ξ must be a unit vector".into()));
    }
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("λ must be ≥ 1, got {lambda}")));
    }
    Ok(())
}

impl ConvexBody {
    pub fn polytope(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let body = ConvexBody::Polytope { vertices };
        body.validate()?;
        Ok(body)
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        let body = ConvexBody::Ball { dim, radius };
        body.validate()?;
        Ok(body)
    }

    pub fn disk(xi: &[f64], lambda: f64) -> Result<Self> {
        check_xi_lambda(xi, lambda)?;
        Ok(ConvexBody::Disk {
            xi: xi.to_vec(),
            lambda,
        })
    }

    pub fn cone(xi: &[f64], lambda: f64) -> Result<Self> {
        check_xi_lambda(xi, lambda)?;
        Ok(ConvexBody::Cone {
            xi: xi.to_vec(),
            lambda,
        })
    }

    /// The cone `C_{ξ,λ}` in `R³` with its rim replaced by a regular `m`-gon.
    pub fn cone_polytope(xi: &[f64], lambda: f64, m: usize) -> Result<Self> {
        check_xi_lambda(xi, lambda)?;
        if xi.len() != 3 || m < 3 {
            return Err(Error::InvalidInput("cone discretization needs n = 3 and m ≥ 3".into()));
        }
        let b = complement_basis(xi);
        let mut vertices = vec![vec![0.0; 3]];
        for j in 0..m {
            let t = 2.0 * PI * j as f64 / m as f64;
            vertices.push(
                (0..3)
                    .map(|i| -xi[i] + lambda * (t.cos() * b[(i, 0)] + t.sin() * b[(i, 1)]))
                    .collect(),
            );
        }
        Ok(ConvexBody::Polytope { vertices })
    }

    /// Checks the invariants of a deserialized body.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexBody::Polytope { vertices } => {
                let first = vertices
                    .first()
                    .ok_or_else(|| Error::InvalidInput("polytope needs a vertex".into()))?;
                if first.is_empty() {
                    return Err(Error::InvalidInput("empty vertex".into()));
                }
                for v in vertices {
                    if v.len() != first.len() {
                        return Err(Error::DimensionMismatch {
                            expected: first.len(),
                            found: v.len(),
                        });
                    }
                    if v.iter().any(|c| !c.is_finite()) {
                        return Err(Error::InvalidInput("non-finite vertex".into()));
                    }
                }
                Ok(())
            }
            ConvexBody::Ball { dim, radius } => {
                if *dim < 2 || !(*radius >= 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidInput("ball needs n ≥ 2 and R ≥ 0".into()));
                }
                Ok(())
            }
            ConvexBody::Disk { xi, lambda } | ConvexBody::Cone { xi, lambda } => check_xi_lambda(xi, *lambda),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Polytope { vertices } => vertices[0].len(),
            ConvexBody::Ball { dim, .. } => *dim,
            ConvexBody::Disk { xi, .. } | ConvexBody::Cone { xi, .. } => xi.len(),
        }
    }

    /// `h_K` restricted to the sphere.
    pub fn support_field(&self) -> Result<ScalarField> {
        self.validate()?;
        match self {
            ConvexBody::Polytope { vertices } => {
                let linear: Vec<ScalarField> = vertices.iter().map(|v| ScalarField::linear(v)).collect();
                ScalarField::join(&linear)
            }
            ConvexBody::Ball { dim, radius } => Ok(ScalarField::constant(*dim, *radius)),
            ConvexBody::Disk { xi, lambda } => ScalarField::disk_support(xi, *lambda),
            ConvexBody::Cone { xi, lambda } => {
                ScalarField::join(&[ScalarField::zero(xi.len()), ScalarField::disk_support(xi, *lambda)?])
            }
        }
    }

    /// The image `gK`; only polytopes are closed under linear maps here.
    pub fn transformed(&self, g: &DMatrix<f64>) -> Result<Self> {
        match self {
            ConvexBody::Polytope { vertices } => {
                let n = self.dim();
                if g.nrows() != n || g.ncols() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: g.nrows(),
                    });
                }
                let vertices = vertices
                    .iter()
                    .map(|v| (g * DVector::from_column_slice(v)).as_slice().to_vec())
                    .collect();
                Ok(ConvexBody::Polytope { vertices })
            }
            _ => Err(Error::InvalidInput("only polytopes can be transformed".into())),
        }
    }

    pub fn area_measure(&self) -> Result<AreaMeasure> {
        self.validate()?;
        match self {
            ConvexBody::Polytope { vertices } => polytope_area_measure(vertices),
            ConvexBody::Ball { dim, radius } => Ok(AreaMeasure::smooth(ScalarField::constant(*dim, *radius))),
            ConvexBody::Disk { xi, lambda } => disk_area_measure(xi, *lambda),
            ConvexBody::Cone { xi, lambda } => cone_area_measure(xi, *lambda),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub direction: Vec<f64>,
    pub mass: f64,
}

/// Uniform density `coefficient` per unit `H^{n-2}` on `Σ_{ξ,λ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeLateral {
    pub xi: Vec<f64>,
    pub lambda: f64,
    pub coefficient: f64,
}

impl ConeLateral {
    /// `H^{n-2}(Σ_{ξ,λ})` times the coefficient.
    pub fn mass(&self) -> f64 {
        let n = self.xi.len();
        let radius = (1.0 + self.lambda * self.lambda).sqrt().recip();
        self.coefficient * (n - 1) as f64 * unit_ball_volume(n - 1) * radius.powi(n as i32 - 2)
    }
}

/// Surface area measure: atoms, cone sheets and smooth parts with density
/// `S_{n-1}(∇²h + h Id)` for a smooth support function `h`.
#[derive(Debug, Clone)]
pub struct AreaMeasure {
    pub dim: usize,
    pub atoms: Vec<Atom>,
    pub sheets: Vec<ConeLateral>,
    pub smooth_parts: Vec<ScalarField>,
}

pub fn polytope_area_measure(vertices: &[Vec<f64>]) -> Result<AreaMeasure> {
    let n = vertices.first().map_or(0, Vec::len);
    if n != 3 {
        return Err(Error::UnsupportedScheme {
            scheme: "convex hull".into(),
            dim: n,
        });
    }
    let points: Vec<[f64; 3]> = vertices.iter().map(|v| [v[0], v[1], v[2]]).collect();
    let atoms = hull_facets(&points)?
        .into_iter()
        .map(|f| Atom {
            direction: f.normal.to_vec(),
            mass: f.area,
        })
        .collect();
    Ok(AreaMeasure {
        dim: 3,
        atoms,
        sheets: Vec::new(),
        smooth_parts: Vec::new(),
    })
}

pub fn disk_area_measure(xi: &[f64], lambda: f64) -> Result<AreaMeasure> {
    check_xi_lambda(xi, lambda)?;
    let n = xi.len();
    let mass = unit_ball_volume(n - 1) * lambda.powi(n as i32 - 1);
    Ok(AreaMeasure {
        dim: n,
        atoms: vec![
            Atom {
                direction: xi.to_vec(),
                mass,
            },
            Atom {
                direction: xi.iter().map(|c| -c).collect(),
                mass,
            },
        ],
        sheets: Vec::new(),
        smooth_parts: Vec::new(),
    })
}

pub fn cone_area_measure(xi: &[f64], lambda: f64) -> Result<AreaMeasure> {
    check_xi_lambda(xi, lambda)?;
    let n = xi.len();
    let nf = n as f64;
    Ok(AreaMeasure {
        dim: n,
        atoms: vec![Atom {
            direction: xi.iter().map(|c| -c).collect(),
            mass: unit_ball_volume(n - 1) * lambda.powi(n as i32 - 1),
        }],
        sheets: vec![ConeLateral {
            xi: xi.to_vec(),
            lambda,
            coefficient: lambda.powi(n as i32 - 2) * (lambda * lambda + 1.0).powf((nf - 1.0) / 2.0) / (nf - 1.0),
        }],
        smooth_parts: Vec::new(),
    })
}

/// `S_{n-1}(∇²h + h Id)(x)`, the determinant of the tangent block.
pub fn smooth_area_density(h: &ScalarField, x: &[f64]) -> Result<f64> {
    let hess = h.sph_hess(x)?;
    Ok((hess + outer(x, x)).determinant())
}

/// Nodes and weights of a rule on the unit sphere of `ξ^⊥`, as vectors in `R^n`.
fn orthogonal_sphere_rule(xi: &[f64], resolution: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = xi.len();
    let b = complement_basis(xi);
    let lift = |z: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n - 1).map(|k| b[(i, k)] * z[k]).sum()).collect() };
    match n {
        3 => {
            let m = resolution.max(1);
            let w = 2.0 * PI / m as f64;
            let nodes = (0..m)
                .map(|j| {
                    let t = 2.0 * PI * j as f64 / m as f64;
                    lift(&[t.cos(), t.sin()])
                })
                .collect();
            Ok((nodes, vec![w; m]))
        }
        4 => {
            let grid = build_grid(3, GridSpec::ProductGauss { nodes: resolution.max(1) })?;
            Ok((grid.nodes().map(lift).collect(), grid.weights().to_vec()))
        }
        _ => Err(Error::UnsupportedScheme {
            scheme: "sheet".into(),
            dim: n,
        }),
    }
}

impl AreaMeasure {
    pub fn smooth(h: ScalarField) -> Self {
        AreaMeasure {
            dim: h.dim(),
            atoms: Vec::new(),
            sheets: Vec::new(),
            smooth_parts: vec![h],
        }
    }

    /// `∫ g dS`. Sheets use `sheet_resolution` nodes per direction on
    /// `S^{n-2}` (a uniform rule for `n = 3`, product Gauss for `n = 4`);
    /// smooth parts need `grid`.
    pub fn pair<T, F>(&self, g: F, sheet_resolution: usize, grid: Option<&QuadratureGrid>) -> Result<T>
    where
        T: Summand,
        F: Fn(&[f64]) -> T + Sync,
    {
        let mut terms: Vec<T> = self.atoms.iter().map(|a| g(&a.direction) * a.mass).collect();
        for sheet in &self.sheets {
            let n = sheet.xi.len();
            let s = (1.0 + sheet.lambda * sheet.lambda).sqrt();
            let jacobian = s.powi(-(n as i32 - 2));
            let (nodes, weights) = orthogonal_sphere_rule(&sheet.xi, sheet_resolution)?;
            let values: Vec<T> = nodes
                .iter()
                .zip(&weights)
                .map(|(zeta, &w)| {
                    let x: Vec<f64> = zeta.iter().zip(&sheet.xi).map(|(z, e)| (sheet.lambda * e + z) / s).collect();
                    g(&x) * w
                })
                .collect();
            terms.push(pairwise_sum(&values) * (sheet.coefficient * jacobian));
        }
        if !self.smooth_parts.is_empty() {
            let grid = grid.ok_or_else(|| Error::InvalidInput("smooth area measure needs a grid".into()))?;
            for h in &self.smooth_parts {
                terms.push(grid.try_integrate(|x| Ok(g(x) * smooth_area_density(h, x)?))?);
            }
        }
        let total = pairwise_sum(&terms);
        if !total.is_finite() {
            return Err(Error::NonFiniteValue { index: 0 });
        }
        Ok(total)
    }

    pub fn total_mass(&self, sheet_resolution: usize, grid: Option<&QuadratureGrid>) -> Result<f64> {
        self.pair(|_| 1.0, sheet_resolution, grid)
    }

    /// `∫ x dS(x)`, which vanishes for closed bodies.
    pub fn resultant(&self, sheet_resolution: usize, grid: Option<&QuadratureGrid>) -> Result<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.pair(|x| x[i], sheet_resolution, grid))
            .collect()
    }

    /// Rows `type,dir_or_param...,mass_or_coeff` preceded by a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("type,dir_or_param...,mass_or_coeff\n");
        for a in &self.atoms {
            out.push_str("atom,");
            for c in &a.direction {
                out.push_str(&format!("{c:.16e},"));
            }
            out.push_str(&format!("{:.16e}\n", a.mass));
        }
        for s in &self.sheets {
            out.push_str("sheet,");
            for c in &s.xi {
                out.push_str(&format!("{c:.16e},"));
            }
            out.push_str(&format!("{:.16e},{:.16e}\n", s.lambda, s.coefficient));
        }
        for h in &self.smooth_parts {
            out.push_str(&format!("smooth,\"{h:?}\"\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::unit_ball_volume;

    const E1: [f64; 3] = [1.0, 0.0, 0.0];

    fn cube() -> ConvexBody {
        let v = (0..8)
            .map(|i| vec![(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])
            .collect();
        ConvexBody::polytope(v).unwrap()
    }

    fn cube_x3(x: &[f64]) -> f64 {
        x[0].powi(3)
    }

    #[test]
    fn support_field_examples() {
        let cone = ConvexBody::cone(&E1, 1.0).unwrap().support_field().unwrap();
        assert_eq!(cone.eval(&E1), 0.0);
        assert!((cone.eval(&[-1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert_eq!(ConvexBody::ball(3, 2.0).unwrap().support_field().unwrap().eval(&E1), 2.0);
        let mut oct = Vec::new();
        for i in 0..3 {
            for s in [1.0, -1.0] {
                let mut v = vec![0.0; 3];
                v[i] = s;
                oct.push(v);
            }
        }
        let h = ConvexBody::polytope(oct).unwrap().support_field().unwrap();
        let u = 1.0 / 3f64.sqrt();
        assert!((h.eval(&[u, u, u]) - u).abs() < 1e-15);
    }

    #[test]
    fn polytope_measures() {
        let m = cube().area_measure().unwrap();
        assert_eq!(m.atoms.len(), 6);
        assert!(m.atoms.iter().all(|a| (a.mass - 1.0).abs() < 1e-12));

        let square = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ];
        let m = polytope_area_measure(&square).unwrap();
        assert_eq!(m.atoms.len(), 2);
        for a in &m.atoms {
            assert!((a.mass - 1.0).abs() < 1e-12);
            assert!((a.direction[2].abs() - 1.0).abs() < 1e-12);
        }

        let a = 1.7;
        let s = a / 8f64.sqrt();
        let tet = vec![
            vec![s, s, s],
            vec![s, -s, -s],
            vec![-s, s, -s],
            vec![-s, -s, s],
        ];
        let m = polytope_area_measure(&tet).unwrap();
        assert_eq!(m.atoms.len(), 4);
        for atom in &m.atoms {
            assert!((atom.mass - 3f64.sqrt() * a * a / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_measures() {
        let m = disk_area_measure(&E1, 1.0).unwrap();
        assert_eq!(m.atoms.len(), 2);
        assert!(m.atoms.iter().all(|a| (a.mass - PI).abs() < 1e-15));
        let m = disk_area_measure(&[1.0, 0.0, 0.0, 0.0], 2.0).unwrap();
        assert!((m.atoms[0].mass - 4.0 * PI / 3.0 * 8.0).abs() < 1e-12);
        let xi = [0.6, 0.0, 0.8];
        let m = disk_area_measure(&xi, 3.0).unwrap();
        assert_eq!(m.pair(cube_x3, SHEET_RESOLUTION, None).unwrap(), 0.0);
    }

    #[test]
    fn cone_measure_examples() {
        let m = cone_area_measure(&E1, 1.0).unwrap();
        assert!((m.sheets[0].mass() - 2f64.sqrt() * PI).abs() < 1e-12);
        assert_eq!(m.atoms[0].direction, vec![-1.0, 0.0, 0.0]);
        assert!((m.atoms[0].mass - PI).abs() < 1e-15);
        let total = m.total_mass(SHEET_RESOLUTION, None).unwrap();
        assert!((total - PI * (1.0 + 2f64.sqrt())).abs() < 1e-12);
        let r = m.resultant(SHEET_RESOLUTION, None).unwrap();
        assert!(norm(&r) < 1e-10, "{r:?}");
        let v = m.pair(cube_x3, SHEET_RESOLUTION, None).unwrap();
        assert!((v + PI / 2.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn lateral_mass_is_lateral_area() {
        for n in [3usize, 4] {
            for lambda in [1.0, 2.0, 5.5] {
                let mut xi = vec![0.0; n];
                xi[n - 1] = 1.0;
                let m = cone_area_measure(&xi, lambda).unwrap();
                let area = unit_ball_volume(n - 1) * lambda.powi(n as i32 - 2) * (1.0 + lambda * lambda).sqrt();
                assert!((m.sheets[0].mass() - area).abs() < 1e-12 * area);
                let quad = m.pair(|_| 1.0, 24, None).unwrap() - m.atoms[0].mass;
                assert!((quad - area).abs() < 1e-11 * area, "{quad} {area}");
            }
        }
    }

    #[test]
    fn closedness_of_measures() {
        let grid = build_grid(3, GridSpec::ProductGauss { nodes: 24 }).unwrap();
        let bodies = [
            cube(),
            ConvexBody::polytope(vec![
                vec![0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![0.2, 1.3, 0.0],
                vec![0.1, 0.4, 0.9],
            ])
            .unwrap(),
            ConvexBody::disk(&[0.6, 0.8, 0.0], 2.0).unwrap(),
            ConvexBody::cone(&[0.0, 0.6, 0.8], 3.0).unwrap(),
            ConvexBody::ball(3, 1.5).unwrap(),
        ];
        for body in &bodies {
            let r = body.area_measure().unwrap().resultant(SHEET_RESOLUTION, Some(&grid)).unwrap();
            assert!(norm(&r) < 1e-8, "{body:?}: {r:?}");
        }
    }

    #[test]
    fn cone_polytope_converges_quadratically() {
        let exact = -PI / 2.0;
        let err = |m: usize| {
            let body = ConvexBody::cone_polytope(&E1, 1.0, m).unwrap();
            body.area_measure().unwrap().pair(cube_x3, 0, None).unwrap() - exact
        };
        for m in [64, 128, 256] {
            let ratio = err(m) / err(2 * m);
            assert!((ratio - 4.0).abs() < 0.1, "M = {m}: ratio {ratio}");
        }
        assert!(err(4096).abs() < 5e-3);
    }

    #[test]
    fn cone_atom_matches_disk_atom() {
        for lambda in [1.0, 2.5] {
            let c = cone_area_measure(&E1, lambda).unwrap();
            let d = disk_area_measure(&E1, lambda).unwrap();
            assert_eq!(c.atoms[0].mass, d.atoms[0].mass);
        }
    }

    #[test]
    fn cone_support_is_join_with_disk() {
        let xi = [0.0, 0.6, 0.8];
        let cone = ConvexBody::cone(&xi, 2.0).unwrap().support_field().unwrap();
        let disk = ConvexBody::disk(&xi, 2.0).unwrap().support_field().unwrap();
        let joined = ScalarField::join(&[ScalarField::zero(3), disk]).unwrap();
        let grid = build_grid(3, GridSpec::Icosphere { level: 2 }).unwrap();
        for x in grid.nodes() {
            assert_eq!(cone.eval(x), joined.eval(x));
        }
    }

    #[test]
    fn smooth_density_examples() {
        let x = [0.0, 0.6, 0.8];
        assert!((smooth_area_density(&ScalarField::constant(3, 1.0), &x).unwrap() - 1.0).abs() < 1e-14);
        assert!((smooth_area_density(&ScalarField::constant(3, 2.5), &x).unwrap() - 6.25).abs() < 1e-13);
        let eps = 1e-3;
        let h = ScalarField::constant(3, 1.0)
            .add(&ScalarField::linear(&[0.3, -0.2, 0.5]).scaled(eps))
            .unwrap();
        assert!((smooth_area_density(&h, &x).unwrap() - 1.0).abs() < 1e-14);
        let ball = ConvexBody::ball(3, 2.0).unwrap().area_measure().unwrap();
        let grid = build_grid(3, GridSpec::Icosphere { level: 3 }).unwrap();
        assert!((ball.total_mass(8, Some(&grid)).unwrap() - 16.0 * PI).abs() < 1e-11);
        assert!(ball.total_mass(8, None).is_err());
        assert!(matches!(
            smooth_area_density(&ConvexBody::cone(&E1, 1.0).unwrap().support_field().unwrap(), &x),
            Err(Error::NotSmooth(_))
        ));
    }

    #[test]
    fn transformed_polytope_support() {
        let g = DMatrix::from_row_slice(3, 3, &[1.2, 0.3, 0.0, -0.4, 0.9, 0.2, 0.1, 0.0, 1.5]);
        let k = cube();
        let lhs = k.transformed(&g).unwrap().support_field().unwrap();
        let rhs = ScalarField::gl_act(&g, &k.support_field().unwrap()).unwrap();
        let grid = build_grid(3, GridSpec::Icosphere { level: 2 }).unwrap();
        for x in grid.nodes() {
            assert!((lhs.eval(x) - rhs.eval(x)).abs() < 1e-12);
        }
    }
}
