//! The divergence witness for odd extensions of degree `n - 1`.
//!
//! With `p(x) = x₁³` and `μ(K) = ∫ p dS_{n-1}(K, ·)`, any valuation `ν` on
//! Lipschitz functions extending `μ` would be forced to take the values
//!
//! ```text
//! ν(ψ_{ξ,λ}) = -μ(C_{ξ,λ}),   ψ_{ξ,λ} = 0 ∧ φ_{ξ,λ},
//! ν(⋀ᵢ ψ_{ξᵢ,λ}) = Σᵢ ν(ψ_{ξᵢ,λ})   (pairwise disjoint supports),
//! ν(t f) = t^{n-1} ν(f).
//! ```
//!
//! Nothing here treats `ν` as an actual valuation: [`nu_fk`] evaluates these
//! forced values on `f_k = k^{-p} ⋀ᵢ ψ_{ξᵢ,k}`, with the `ξᵢ` packed in the cap
//! `{ξ₁ ≥ δ}`, and [`sweep`] records their growth in `k` next to the decay of
//! `f_k` in the τ-topology.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{field_stats, ScalarField};
use crate::quadrature::{build_grid, pairwise_sum, unit_ball_volume, GridSpec};

/// `3t(1-t²)/(n-1) - t³`, the bracket in [`mu_cone`] at `ξ₁ = t`.
pub fn cap_polynomial(t: f64, n: usize) -> f64 {
    3.0 * t * (1.0 - t * t) / (n as f64 - 1.0) - t * t * t
}

/// `∫ x₁³ dS_{n-1}(C_{ξ,λ}, x) = ω_{n-1}λ^{n-1}/(1+λ²) · [3ξ₁(1-ξ₁²)/(n-1) - ξ₁³]`.
pub fn mu_cone(xi: &[f64], lambda: f64, n: usize) -> f64 {
    unit_ball_volume(n - 1) * lambda.powi(n as i32 - 1) / (1.0 + lambda * lambda) * cap_polynomial(xi[0], n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub samples: usize,
    pub violations: usize,
    /// `min μ(C)/bound` over the samples; at least 1 when all pass.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Checks `μ(C_{ξ,λ}) ≤ -(ω_{n-1}/2) λ^{n-3}` for every `λ` and every `ξ`.
pub fn verify_estimate(lambdas: &[f64], xis: &[Vec<f64>], n: usize) -> Result<EstimateReport> {
    if lambdas.iter().any(|&l| !(l >= 2.0)) {
        return Err(Error::InvalidInput("the estimate is stated for λ ≥ 2".into()));
    }
    if xis.iter().any(|xi| xi.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: xis.iter().map(Vec::len).find(|&l| l != n).unwrap_or(n),
        });
    }
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for &lambda in lambdas {
        let bound = -0.5 * unit_ball_volume(n - 1) * lambda.powi(n as i32 - 3);
        for xi in xis {
            let ratio = mu_cone(xi, lambda, n) / bound;
            if ratio < 1.0 {
                violations += 1;
            }
            worst = worst.min(ratio);
        }
    }
    Ok(EstimateReport {
        samples: lambdas.len() * xis.len(),
        violations,
        worst_ratio: worst,
        pass: violations == 0,
    })
}

/// Random unit vectors with `ξ₁` uniform in `[δ, 1]`.
pub fn random_cap_points(rng: &mut impl Rng, n: usize, delta: f64, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let t = rng.random_range(delta..=1.0);
            let u = crate::sampling::random_unit(rng, n - 1);
            let s = (1.0 - t * t).max(0.0).sqrt();
            std::iter::once(t).chain(u.into_iter().map(|c| s * c)).collect()
        })
        .collect()
}

/// Root of `cap_polynomial(t, n) = -5/8` on `(1/2, 1)` by bisection, rounded
/// up to a multiple of `10⁻³`.
pub fn find_delta(n: usize) -> Result<f64> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("find_delta needs n ≥ 4, got {n}")));
    }
    let q = |t: f64| cap_polynomial(t, n) + 0.625;
    let (mut lo, mut hi) = (0.5, 1.0);
    if !(q(lo) > 0.0 && q(hi) < 0.0) {
        return Err(Error::NoRoot);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((hi * 1000.0).ceil() / 1000.0)
}

/// `M^{n-1}` points of the cap `{ξ₁ ≥ δ}` with pairwise distance at least `ε`:
/// a grid of spacing `ε` in the cube of side `r/√n`, `r = √(1-δ²)`, centred in
/// the hyperplane `x₁ = 0` and lifted to the sphere.
pub fn cap_packing(delta: f64, eps: f64, n: usize) -> Result<Vec<Vec<f64>>> {
    if !(delta > 0.0 && delta <= 1.0) || !(eps > 0.0) || n < 2 {
        return Err(Error::InvalidInput("need 0 < δ ≤ 1, ε > 0 and n ≥ 2".into()));
    }
    let r = (1.0 - delta * delta).sqrt();
    let side = r / (n as f64).sqrt();
    let m = (side / eps).floor() as usize;
    if m == 0 {
        return Err(Error::EmptyPacking);
    }
    let count = m.pow(n as u32 - 1);
    let offset = (m as f64 - 1.0) / 2.0;
    let mut points = Vec::with_capacity(count);
    for index in 0..count {
        let mut rest = index;
        let mut xi = vec![0.0; n];
        for c in xi.iter_mut().skip(1) {
            *c = ((rest % m) as f64 - offset) * eps;
            rest /= m;
        }
        let tail: f64 = xi[1..].iter().map(|c| c * c).sum();
        xi[0] = (1.0 - tail).sqrt();
        points.push(xi);
    }
    Ok(points)
}

/// Packing distance `4/√(1+k²)` used for `f_k`.
pub fn packing_eps(k: f64) -> f64 {
    4.0 / (1.0 + k * k).sqrt()
}

/// Radius `√2/√(1+k²)` of a ball containing the support of `ψ_{ξ,k}`.
pub fn support_radius(k: f64) -> f64 {
    2f64.sqrt() / (1.0 + k * k).sqrt()
}

/// `f_k = k^{-p} (0 ∧ φ_{ξ₁,k} ∧ … ∧ φ_{ξ_N,k})`.
pub fn f_k_field(k: f64, points: &[Vec<f64>], p: f64) -> Result<ScalarField> {
    let n = points.first().ok_or(Error::EmptyPacking)?.len();
    let mut children = Vec::with_capacity(points.len() + 1);
    children.push(ScalarField::zero(n));
    for xi in points {
        children.push(ScalarField::disk_support(xi, k)?);
    }
    Ok(ScalarField::meet(&children)?.scaled(k.powf(-p)))
}

/// The value forced on `f_k`: `k^{-p(n-1)} Σᵢ (-μ(C_{ξᵢ,k}))`.
pub fn nu_fk(k: f64, points: &[Vec<f64>], p: f64, n: usize) -> f64 {
    let terms: Vec<f64> = points.par_iter().map(|xi| -mu_cone(xi, k, n)).collect();
    k.powf(-p * (n as f64 - 1.0)) * pairwise_sum(&terms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n: usize,
    pub delta: f64,
    pub p: f64,
    pub k_values: Vec<u64>,
    pub grid: GridSpec,
}

impl SweepConfig {
    /// `n = 4`, `δ` from [`find_delta`], `p = 7/6`, `k = 32, 64, …, 1024` and
    /// `10⁶` Monte Carlo nodes on `S³`.
    pub fn standard() -> Result<Self> {
        Ok(SweepConfig {
            n: 4,
            delta: find_delta(4)?,
            p: 7.0 / 6.0,
            k_values: (5..=10).map(|e| 1u64 << e).collect(),
            grid: GridSpec::MonteCarlo {
                count: 1_000_000,
                seed: 42,
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n as f64;
        if self.n < 4 {
            return Err(Error::InvalidInput("the sweep needs n ≥ 4".into()));
        }
        if !(self.p > 1.0 && self.p < (2.0 * n - 4.0) / (n - 1.0)) {
            return Err(Error::InvalidInput(format!(
                "p must lie in (1, {}), got {}",
                (2.0 * n - 4.0) / (n - 1.0),
                self.p
            )));
        }
        if !(self.delta > 0.5 && self.delta <= 1.0) {
            return Err(Error::InvalidInput("δ must lie in (1/2, 1]".into()));
        }
        if self.k_values.is_empty() || self.k_values.iter().any(|&k| k < 2) {
            return Err(Error::InvalidInput("k values must be ≥ 2".into()));
        }
        Ok(())
    }
}

/// `f_k` together with its packing.
#[derive(Debug, Clone)]
pub struct Witness {
    pub k: u64,
    pub points: Vec<Vec<f64>>,
    pub field: ScalarField,
}

/// The witness for one `k`; `None` when the packing is empty.
pub fn witness(cfg: &SweepConfig, k: u64) -> Result<Option<Witness>> {
    let kf = k as f64;
    let eps = packing_eps(kf);
    if eps <= 2.0 * support_radius(kf) {
        return Err(Error::InvalidInput(format!("supports overlap at k = {k}")));
    }
    let points = match cap_packing(cfg.delta, eps, cfg.n) {
        Ok(points) => points,
        Err(Error::EmptyPacking) => return Ok(None),
        Err(e) => return Err(e),
    };
    let field = f_k_field(kf, &points, cfg.p)?;
    Ok(Some(Witness { k, points, field }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub k: u64,
    pub n_points: usize,
    pub nu_fk: f64,
    pub sup_norm: f64,
    pub lip_est: f64,
    pub d_tau: f64,
    pub ties: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepColumn {
    Nu,
    SupNorm,
    LipEst,
    DTau,
}

impl SweepRecord {
    pub fn column(&self, c: SweepColumn) -> f64 {
        match c {
            SweepColumn::Nu => self.nu_fk,
            SweepColumn::SupNorm => self.sup_norm,
            SweepColumn::LipEst => self.lip_est,
            SweepColumn::DTau => self.d_tau,
        }
    }
}

impl fmt::Display for SweepRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.k, self.n_points, self.nu_fk, self.sup_norm, self.lip_est, self.d_tau, self.ties
        )
    }
}

pub const SWEEP_HEADER: &str = "k,N,nu_fk,sup_norm,lip_est,d_tau,ties";

/// One record per `k` with a nonempty packing. `sup_norm` is the maximum of
/// `|f_k|` over the grid nodes and the packing points, where it is attained.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let grid = build_grid(cfg.n, cfg.grid)?;
    let mut records = Vec::new();
    for &k in &cfg.k_values {
        let Some(w) = witness(cfg, k)? else {
            continue;
        };
        let stats = field_stats(&w.field, &grid)?;
        let at_points = w.points.par_iter().map(|xi| w.field.eval(xi).abs()).reduce(|| 0.0, f64::max);
        let sup_norm = stats.sup_norm.max(at_points);
        records.push(SweepRecord {
            k,
            n_points: w.points.len(),
            nu_fk: nu_fk(k as f64, &w.points, cfg.p, cfg.n),
            sup_norm,
            lip_est: stats.lip_est,
            d_tau: sup_norm + stats.grad_l1,
            ties: stats.ties,
        });
    }
    Ok(records)
}

/// Least-squares slope of `log|column|` against `log k` over the records with
/// the largest half of the `k` values.
pub fn fit_exponent(records: &[SweepRecord], column: SweepColumn) -> Result<f64> {
    let mut rows: Vec<&SweepRecord> = records.iter().collect();
    rows.sort_by_key(|r| r.k);
    let tail = &rows[rows.len() / 2..];
    if tail.len() < 2 {
        return Err(Error::InvalidInput("need at least two records in the fitted half".into()));
    }
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .map(|r| ((r.k as f64).ln(), r.column(column).abs().ln()))
        .collect();
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::NonFiniteValue { index: 0 });
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{cone_area_measure, ConvexBody};
    use crate::linalg::norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn mu_cone_examples() {
        assert!((mu_cone(&e(3, 0), 1.0, 3) + PI / 2.0).abs() < 1e-15);
        assert!((mu_cone(&e(4, 0), 2.0, 4) + 32.0 * PI / 15.0).abs() < 1e-13);
        for n in [3, 4, 5] {
            assert_eq!(mu_cone(&e(n, 1), 3.7, n), 0.0);
        }
    }

    #[test]
    fn mu_cone_matches_sheet_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [3usize, 4] {
            for xi in random_cap_points(&mut rng, n, 0.6, 10) {
                let lambda = rng.random_range(1.0..8.0);
                let m = cone_area_measure(&xi, lambda).unwrap();
                let q = m.pair(|x| x[0].powi(3), 16, None).unwrap();
                let c = mu_cone(&xi, lambda, n);
                assert!((q - c).abs() <= 1e-10 * c.abs(), "n={n} {q} {c}");
            }
        }
    }

    #[test]
    fn estimate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let lambdas = [2.0, 4.0, 8.0, 16.0];
        let xis = random_cap_points(&mut rng, 4, 0.92, 500);
        assert!(verify_estimate(&lambdas, &xis, 4).unwrap().pass);
        let low = random_cap_points(&mut rng, 4, 0.80, 500);
        assert!(!verify_estimate(&lambdas, &low, 4).unwrap().pass);
        let r = verify_estimate(&lambdas, &[e(4, 0)], 4).unwrap();
        assert!((r.worst_ratio - 1.6).abs() < 1e-12);
        assert!(verify_estimate(&[1.5], &xis, 4).is_err());
    }

    #[test]
    fn delta_examples() {
        let d4 = find_delta(4).unwrap();
        assert!(cap_polynomial(0.91, 4) > -0.625 && cap_polynomial(0.92, 4) < -0.625);
        assert!((0.91..=0.92).contains(&d4));
        assert!(cap_polynomial(d4, 4) <= -0.625);
        let d5 = find_delta(5).unwrap();
        assert_eq!(d5, 0.907);
        assert_eq!(d4, 0.917);
        for n in 4..12 {
            assert!(find_delta(n).unwrap() > 0.5);
        }
        assert!(find_delta(3).is_err());
    }

    #[test]
    fn packing_examples() {
        let eps = packing_eps(256.0);
        let pts = cap_packing(0.916, eps, 4).unwrap();
        assert_eq!(pts.len(), 1728);
        assert!(pts.iter().all(|p| p[0] >= 0.916 && (norm(p) - 1.0).abs() < 1e-12));
        let mut min_dist = f64::INFINITY;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                min_dist = min_dist.min(norm(&d));
            }
        }
        assert!(min_dist >= eps * (1.0 - 1e-12));
        assert!(matches!(cap_packing(0.916, 1.0, 4), Err(Error::EmptyPacking)));
    }

    #[test]
    fn f_k_examples() {
        let k = 64.0;
        let p = 7.0 / 6.0;
        let pts = cap_packing(0.916, packing_eps(k), 4).unwrap();
        let f = f_k_field(k, &pts, p).unwrap();
        assert!((f.eval(&pts[0]) + k.powf(-p)).abs() < 1e-15);
        assert_eq!(f.eval(&[-1.0, 0.0, 0.0, 0.0]), 0.0);
        assert_eq!(f.eval(&[0.0, 0.0, 0.0, 1.0]), 0.0);
    }

    #[test]
    fn nu_fk_single_point() {
        let p = 7.0 / 6.0;
        let v = nu_fk(2.0, &[e(4, 0)], p, 4);
        assert!((v - 2f64.powf(-3.5) * 32.0 * PI / 15.0).abs() < 1e-12);
        assert!(v > 0.0);
    }

    #[test]
    fn scaling_identity_on_cone_polytopes() {
        let xi = [0.8, 0.6, 0.0];
        let body = ConvexBody::cone_polytope(&xi, 1.5, 256).unwrap();
        let p = |x: &[f64]| x[0].powi(3);
        let base = body.area_measure().unwrap().pair(p, 0, None).unwrap();
        for t in [0.5, 2.0, 3.0] {
            let g = nalgebra::DMatrix::identity(3, 3) * t;
            let scaled = body.transformed(&g).unwrap().area_measure().unwrap().pair(p, 0, None).unwrap();
            assert!((scaled - t * t * base).abs() <= 1e-10 * base.abs());
        }
    }

    #[test]
    fn fit_exponent_recovers_power_laws() {
        let records: Vec<SweepRecord> = (1..=6)
            .map(|i| {
                let k = 1u64 << (i + 4);
                let kf = k as f64;
                SweepRecord {
                    k,
                    n_points: 1,
                    nu_fk: -3.0 * kf.powf(0.5),
                    sup_norm: kf.powf(-7.0 / 6.0),
                    lip_est: 2.0 * kf.powf(-1.0 / 6.0),
                    d_tau: 0.0,
                    ties: 0,
                }
            })
            .collect();
        assert!((fit_exponent(&records, SweepColumn::Nu).unwrap() - 0.5).abs() < 1e-12);
        assert!((fit_exponent(&records, SweepColumn::SupNorm).unwrap() + 7.0 / 6.0).abs() < 1e-12);
        assert!(fit_exponent(&records[..1], SweepColumn::Nu).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SweepConfig::standard().unwrap();
        assert!(cfg.validate().is_ok());
        cfg.p = 4.0 / 3.0;
        assert!(cfg.validate().is_err());
        cfg.p = 7.0 / 6.0;
        cfg.n = 3;
        assert!(cfg.validate().is_err());
    }
}
