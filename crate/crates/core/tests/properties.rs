use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sphereval::fields::ScalarField;
use sphereval::linalg::dot;
use sphereval::quadrature::{pairwise_sum, sphere_area};
use sphereval::sampling::{
    random_invertible, random_lattice_field, random_polynomial, random_smooth_field, random_unit,
};
use sphereval::valuations::{even_density, theta2_eval};
use sphereval::{build_grid, GridSpec};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derivative of the 1-homogeneous extension along `e`, by central differences.
fn fd_bar_grad(f: &ScalarField, x: &[f64]) -> Vec<f64> {
    let h = 1e-6;
    (0..x.len())
        .map(|i| {
            let ext = |t: f64| {
                let mut y = x.to_vec();
                y[i] += t;
                let r = y.iter().map(|c| c * c).sum::<f64>().sqrt();
                let u: Vec<f64> = y.iter().map(|c| c / r).collect();
                r * f.eval(&u)
            };
            (ext(h) - ext(-h)) / (2.0 * h)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_relation_and_orthogonality(seed in any::<u64>(), n in 3usize..6) {
        let mut r = rng(seed);
        let f = random_lattice_field(&mut r, n, 2).unwrap();
        let x = random_unit(&mut r, n);
        let (bar, _) = f.bar_grad_first_active(&x);
        let (sph, _) = f.sph_grad_first_active(&x);
        let v = f.eval(&x);
        prop_assert!(dot(sph.as_slice(), &x).abs() < 1e-12 * (1.0 + bar.norm()));
        for i in 0..n {
            prop_assert!((bar[i] - sph[i] - v * x[i]).abs() < 1e-12 * (1.0 + bar.norm()));
        }
        prop_assert!((dot(bar.as_slice(), &x) - v).abs() < 1e-10 * (1.0 + v.abs()));
    }

    #[test]
    fn smooth_gradient_matches_finite_differences(seed in any::<u64>(), n in 3usize..5) {
        let mut r = rng(seed);
        let f = random_smooth_field(&mut r, n);
        let x = random_unit(&mut r, n);
        let g = f.bar_grad(&x).unwrap();
        let fd = fd_bar_grad(&f, &x);
        for i in 0..n {
            prop_assert!((g[i] - fd[i]).abs() < 1e-6 * (1.0 + g.norm()), "{} vs {}", g[i], fd[i]);
        }
    }

    #[test]
    fn lattice_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_lattice_field(&mut r, 3, 2).unwrap();
        let h = random_lattice_field(&mut r, 3, 2).unwrap();
        let lhs = ScalarField::meet(&[f.clone(), h.clone()]).unwrap().add(&ScalarField::join(&[f.clone(), h.clone()]).unwrap()).unwrap();
        let rhs = f.add(&h).unwrap();
        for _ in 0..10 {
            let x = random_unit(&mut r, 3);
            prop_assert!((lhs.eval(&x) - rhs.eval(&x)).abs() < 1e-12 * (1.0 + rhs.eval(&x).abs()));
        }
    }

    #[test]
    fn action_composes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_lattice_field(&mut r, 3, 2).unwrap();
        let g = random_invertible(&mut r, 3);
        let h = random_invertible(&mut r, 3);
        let nested = ScalarField::gl_act(&g, &ScalarField::gl_act(&h, &f).unwrap()).unwrap();
        let direct = ScalarField::gl_act(&(&g * &h), &f).unwrap();
        for _ in 0..10 {
            let x = random_unit(&mut r, 3);
            prop_assert!((nested.eval(&x) - direct.eval(&x)).abs() < 1e-12 * (1.0 + direct.eval(&x).abs()));
        }
    }

    #[test]
    fn action_homogeneity(seed in any::<u64>(), t in 0.1f64..5.0) {
        let mut r = rng(seed);
        let f = random_lattice_field(&mut r, 4, 2).unwrap();
        let acted = ScalarField::gl_act(&(DMatrix::identity(4, 4) * t), &f).unwrap();
        let x = random_unit(&mut r, 4);
        prop_assert!((acted.eval(&x) - t * f.eval(&x)).abs() < 1e-12 * (1.0 + t * f.eval(&x).abs()));
    }

    #[test]
    fn gradient_equivariance(seed in any::<u64>(), n in 3usize..5) {
        let mut r = rng(seed);
        let f = random_lattice_field(&mut r, n, 2).unwrap();
        let g = random_invertible(&mut r, n);
        let x = random_unit(&mut r, n);
        let (lhs, _) = ScalarField::gl_act(&g, &f).unwrap().bar_grad_first_active(&x);
        let y = g.transpose() * DVector::from_column_slice(&x);
        let (inner, _) = f.bar_grad_first_active((&y / y.norm()).as_slice());
        let rhs = &g * inner;
        prop_assert!((lhs - &rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn pairwise_sum_is_accurate(xs in prop::collection::vec(-1e3f64..1e3, 0..500)) {
        let exact: f64 = xs.iter().sum();
        prop_assert!((pairwise_sum(&xs) - exact).abs() < 1e-9 * (1.0 + xs.iter().map(|x| x.abs()).sum::<f64>()));
    }

    #[test]
    fn gauss_grid_integrates_polynomials(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = ScalarField::polynomial(random_polynomial(&mut r, 3, 4, 1.0));
        let coarse = build_grid(3, GridSpec::ProductGauss { nodes: 4 }).unwrap();
        let fine = build_grid(3, GridSpec::ProductGauss { nodes: 12 }).unwrap();
        let a: f64 = coarse.integrate(|x| p.eval(x)).unwrap();
        let b: f64 = fine.integrate(|x| p.eval(x)).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn even_functional_is_two_homogeneous(seed in any::<u64>(), t in 0.1f64..4.0) {
        let mut r = rng(seed);
        let grid = build_grid(3, GridSpec::Icosphere { level: 2 }).unwrap();
        let f = random_lattice_field(&mut r, 3, 1).unwrap();
        let phi = even_density(3);
        let a = theta2_eval(&phi, &f.scaled(t), &grid).unwrap().value;
        let b = theta2_eval(&phi, &f, &grid).unwrap().value * (t * t);
        prop_assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()));
    }
}

#[test]
fn grid_weights_sum_to_sphere_area() {
    for (n, spec) in [
        (3, GridSpec::Icosphere { level: 3 }),
        (3, GridSpec::ProductGauss { nodes: 8 }),
        (4, GridSpec::MonteCarlo { count: 1000, seed: 3 }),
    ] {
        let g = build_grid(n, spec).unwrap();
        assert!((g.total_weight() - sphere_area(n - 1)).abs() < 1e-10, "{spec}");
        assert!(g.nodes().all(|x| (dot(x, x) - 1.0).abs() < 1e-12));
    }
}
