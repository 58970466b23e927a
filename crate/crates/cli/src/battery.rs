//! Randomized check batteries shared by `valuation check` and `suite all`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sphereval::bodies::cone_area_measure;
use sphereval::counterexample::{find_delta, random_cap_points, verify_estimate};
use sphereval::sampling::{random_disk_field, random_lattice_field, random_smooth_field, random_unit, random_vector};
use sphereval::valuations::{check_dual_invariance, check_valuation_property, fit_degree, pde_residual, Valuation};
use sphereval::fields::Parity;
use sphereval::quadrature::Scheme;
use sphereval::{Error, QuadratureGrid, Result, ScalarField};

pub const HEADER: &str = "case,residual,tol,pass";

const FIT_SAMPLES: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];
const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    ValuationProperty,
    Invariance,
    Degree,
    Pde,
}

impl Suite {
    /// Invariance compares two integrals whose difference is a quadrature
    /// error, so it is looser off the product Gauss grids.
    pub fn default_tol(self, scheme: Scheme) -> f64 {
        match self {
            Suite::ValuationProperty => 1e-6,
            Suite::Invariance if scheme == Scheme::ProductGauss => 1e-5,
            Suite::Invariance => 1e-4,
            Suite::Degree => 1e-8,
            Suite::Pde => 1e-4,
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "valuation-property" => Ok(Suite::ValuationProperty),
            "invariance" => Ok(Suite::Invariance),
            "degree" => Ok(Suite::Degree),
            "pde" => Ok(Suite::Pde),
            other => Err(format!("unknown suite `{other}` (valuation-property|invariance|degree|pde)")),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::ValuationProperty => "valuation-property",
            Suite::Invariance => "invariance",
            Suite::Degree => "degree",
            Suite::Pde => "pde",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub case: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{:.6e},{:.1e},{}", self.case, self.residual, self.tol, self.pass)
    }
}

fn row(case: String, residual: f64, scale: f64, tol: f64) -> Row {
    Row {
        case,
        residual,
        tol,
        pass: residual <= tol * scale.max(1.0),
    }
}

/// `μ` itself on smooth fields, its lattice form otherwise.
fn for_field(mu: &Valuation, f: &ScalarField) -> Result<Valuation> {
    if f.is_smooth() {
        Ok(mu.clone())
    } else {
        mu.lattice_extension()
    }
}

pub fn run(
    suite: Suite,
    label: &str,
    mu: &Valuation,
    grid: &QuadratureGrid,
    cases: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<Row>> {
    if matches!(mu, Valuation::AreaIntegral(_)) {
        return Err(Error::InvalidInput("check suites act on functionals of fields".into()));
    }
    let n = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(cases);
    for i in 0..cases {
        let case = format!("{label}/{suite}/{i}");
        match suite {
            Suite::ValuationProperty => {
                let f = random_lattice_field(&mut rng, n, 2)?;
                let h = random_lattice_field(&mut rng, n, 2)?;
                let r = check_valuation_property(mu, &f, &h, grid, tol)?;
                rows.push(row(case, r.residual, r.scale, tol));
            }
            Suite::Invariance => {
                // The kinks of a disk field leave an odd integrand error, which
                // centrally symmetric grids cancel only for even functionals.
                let f = if i % 2 == 0 && mu.parity() == Parity::Even {
                    random_disk_field(&mut rng, n)?
                } else {
                    random_smooth_field(&mut rng, n)
                };
                let v = random_vector(&mut rng, n, 2.0);
                let r = check_dual_invariance(&for_field(mu, &f)?, &f, &v, grid, tol)?;
                rows.push(row(case, r.residual, r.scale, tol));
            }
            Suite::Degree => {
                let f = random_lattice_field(&mut rng, n, 2)?;
                let fit = fit_degree(&for_field(mu, &f)?, &f, &FIT_SAMPLES, grid)?;
                let scale = fit.scale.max(1.0);
                let residual = if mu.is_homogeneous() {
                    let d = mu.degree();
                    fit.coefficients
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != d)
                        .map(|(_, c)| c.norm())
                        .fold(0.0, f64::max)
                        / scale
                } else {
                    fit.truncation_residual / scale
                };
                rows.push(Row {
                    case,
                    residual,
                    tol,
                    pass: residual <= tol,
                });
            }
            Suite::Pde => {
                let Valuation::Theta2(phi) = mu else {
                    return Err(Error::InvalidInput("the pde suite applies to theta2 specs".into()));
                };
                let x = random_unit(&mut rng, n);
                let r = pde_residual(phi, &x, FD_STEP)?;
                let residual = r.iter().map(|c| c.norm()).fold(0.0, f64::max);
                rows.push(row(case, residual, 1.0, tol));
            }
        }
    }
    Ok(rows)
}

/// Closedness of the cone measures and the estimate on cones, with its
/// negative control.
pub fn geometry_rows(seed: u64) -> Result<Vec<Row>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for (i, n) in [3usize, 4].into_iter().enumerate() {
        let xi = random_unit(&mut rng, n);
        let m = cone_area_measure(&xi, 2.0 + i as f64)?;
        let r = m.resultant(64, None)?;
        let residual = r.iter().map(|c| c * c).sum::<f64>().sqrt();
        rows.push(row(format!("cone/closed/n{n}"), residual, m.total_mass(64, None)?, 1e-10));
    }
    let delta = find_delta(4)?;
    let lambdas = [2.0, 4.0, 8.0, 16.0];
    let report = verify_estimate(&lambdas, &random_cap_points(&mut rng, 4, delta, 500), 4)?;
    rows.push(Row {
        case: "cone/estimate".into(),
        residual: report.violations as f64,
        tol: 0.0,
        pass: report.pass,
    });
    let control = verify_estimate(&lambdas, &random_cap_points(&mut rng, 4, 0.8, 500), 4)?;
    rows.push(Row {
        case: "cone/estimate-control".into(),
        residual: control.violations as f64,
        tol: 0.0,
        pass: !control.pass,
    });
    Ok(rows)
}
