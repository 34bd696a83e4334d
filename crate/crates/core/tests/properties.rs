use curvelab::cone::{cone_roots_unchecked, worst_cone, DEFAULT_TAU_MAX};
use curvelab::curve::{moment_curve, Curve, Perturbation, Shape};
use curvelab::cutoff::{eta, SmoothCutoff};
use curvelab::frenet::frenet_frame;
use curvelab::grid::{averaging_operator, Backend, GridSpec, PeriodicField, Side};
use curvelab::oscillatory::eval_mu_hat;
use curvelab::plates::{cone_tuple_from_curve, lorentz_identity_check, TupleOptions};
use curvelab::quad::gauss;
use num_complex::Complex64;
use proptest::prelude::*;

fn perturbed(n: usize) -> impl Strategy<Value = Curve> {
    prop::collection::vec((0..n, -0.01f64..0.01, 0.5f64..2.0, 0.0f64..6.3), 0..3).prop_map(move |terms| {
        let terms = terms.into_iter().map(|(c, a, w, ph)| Perturbation::new(c, a, Shape::Sine { omega: w, phase: ph })).collect();
        Curve::perturbed_moment(n, terms).unwrap()
    })
}

fn any_curve() -> impl Strategy<Value = Curve> {
    prop_oneof![perturbed(2), perturbed(3), perturbed(4)]
}

fn unit_vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n).prop_filter_map("zero vector", |v| {
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        (r > 1e-3).then(|| v.iter().map(|x| x / r).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frenet_frames_are_orthonormal(g in any_curve(), s in -1.0f64..1.0) {
        let f = frenet_frame(&g, s).unwrap();
        prop_assert!(f.orthonormality_error() <= 1e-12);
        prop_assert!(f.diagonal().iter().all(|d| *d > 0.0));
    }

    #[test]
    fn rescaling_matrix_factorises(g in any_curve(), sigma in -0.5f64..0.5, lambda in 0.01f64..0.5) {
        let m = g.rescaling_matrices(sigma, lambda);
        let prod = &m.gamma_sigma * &m.d_lambda;
        prop_assert_eq!(prod, m.gamma_sigma_lambda);
    }

    #[test]
    fn standard_bump_is_a_plateau(x in -3.0f64..3.0) {
        let v = eta(x, 0);
        prop_assert!((0.0..=1.0).contains(&v));
        if x.abs() <= 1.0 {
            prop_assert_eq!(v, 1.0);
        }
        if x.abs() >= 2.0 {
            prop_assert_eq!(v, 0.0);
            for order in 1..4 {
                prop_assert_eq!(eta(x, order), 0.0);
            }
        }
    }

    #[test]
    fn annulus_vanishes_off_support(x in -5.0f64..5.0, inner in 0.2f64..1.0) {
        let c = SmoothCutoff::annulus(inner, 2.0 * inner);
        let (lo, hi) = c.support();
        if x <= lo || x >= hi {
            prop_assert_eq!(c.value(x), 0.0);
        }
        prop_assert!((0.0..=1.0).contains(&c.value(x)));
    }

    #[test]
    fn worst_cone_annihilates_lower_derivatives(n in 3usize..5, tau in -DEFAULT_TAU_MAX..DEFAULT_TAU_MAX) {
        let g = moment_curve(n).unwrap();
        let w = worst_cone(&g, tau, DEFAULT_TAU_MAX).unwrap();
        for j in 1..n {
            prop_assert!(g.pairing(w.s, j, &w.gamma).abs() <= 1e-10);
        }
        prop_assert!((w.s - tau).abs() <= 1e-10);
    }

    #[test]
    fn cone_roots_are_homogeneous(x in prop::collection::vec(-0.05f64..0.05, 3), t in prop::sample::select(vec![2.0, 10.0])) {
        let g = moment_curve(4).unwrap();
        let xi = [x[0], x[1], x[2], 1.0];
        let scaled: Vec<f64> = xi.iter().map(|v| v * t).collect();
        let a = cone_roots_unchecked(&g, &xi).unwrap();
        let b = cone_roots_unchecked(&g, &scaled).unwrap();
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(g.pairing(a.theta2, 3, &xi).abs() <= 1e-12 * norm);
        prop_assert!((a.theta2 - b.theta2).abs() <= 1e-10 * a.theta2.abs().max(1e-3));
        prop_assert!((b.u2 - t * a.u2).abs() <= 1e-10 * (t * a.u2).abs().max(1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn measure_transform_is_hermitian_and_bounded(g in perturbed(3), dir in unit_vector(3), r in 1.0f64..2000.0) {
        let chi = SmoothCutoff::bump(0.5);
        let xi: Vec<f64> = dir.iter().map(|v| v * r).collect();
        let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
        let a = eval_mu_hat(&g, &chi, &xi, 1e-13).unwrap().value;
        let b = eval_mu_hat(&g, &chi, &neg, 1e-13).unwrap().value;
        prop_assert!((a - b.conj()).norm() <= 1e-12, "{} vs {}", a, b);
        let mass = gauss(40).integrate(-1.0, 1.0, |s| chi.value(s));
        prop_assert!(a.norm() <= mass + 1e-12);
    }

    #[test]
    fn lorentz_identity_on_random_parameters(b in -0.5f64..0.5, rho in 0.01f64..1.0, frac in 0.01f64..1.0, s in -0.5f64..0.5) {
        let g = moment_curve(4).unwrap();
        for d in [2usize, 3] {
            let tuple = cone_tuple_from_curve(&g, d, &TupleOptions::default()).unwrap();
            let a: Vec<f64> = (0..4 - d).map(|i| 1.0 / (i + 1) as f64).collect();
            let res = lorentz_identity_check(&tuple, &a, b, rho, s, rho * frac).unwrap();
            prop_assert!(res.worst() <= 1e-9, "{:?}", res);
        }
    }

    #[test]
    fn plate_matrix_blocks_are_exact(s in -0.5f64..0.5, r in 0.01f64..1.0, a0 in 0.5f64..2.0) {
        let g = moment_curve(4).unwrap();
        let tuple = cone_tuple_from_curve(&g, 2, &TupleOptions::default()).unwrap();
        let m = tuple.plate_matrix(&[a0, 0.3], s, r).unwrap();
        for i in 2..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                if j < 2 {
                    prop_assert_eq!(m[(i, j)], 0.0);
                } else {
                    prop_assert_eq!(m[(i, j)], expect);
                }
            }
        }
    }

    #[test]
    fn fft_round_trip(seed in 0u64..1000, d in 2usize..5) {
        let side = [64, 16, 8][d - 2];
        let grid = GridSpec::torus(d, side).unwrap();
        let f = PeriodicField::from_fn(grid, |x| {
            let t: f64 = x.iter().enumerate().map(|(i, v)| v * (i as f64 + 1.0 + (seed % 7) as f64)).sum();
            Complex64::new(t.sin(), (2.0 * t).cos())
        });
        let mut g = f.clone();
        g.forward().unwrap();
        prop_assert!(g.side == Side::Frequency);
        g.inverse().unwrap();
        let scale = f.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err = f.data.iter().zip(&g.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn averaging_is_linear_and_shift_covariant(shift in (0usize..64, 0usize..64), c in -2.0f64..2.0, seed in 0u64..100) {
        let g = moment_curve(2).unwrap();
        let chi = SmoothCutoff::bump(0.25);
        let grid = GridSpec::torus(2, 64).unwrap();
        let w = 1.0 + (seed % 5) as f64;
        let f1 = PeriodicField::from_fn(grid, |x| Complex64::new((w * x[0]).sin() * x[1].cos(), 0.0));
        let f2 = PeriodicField::from_fn(grid, |x| Complex64::new(0.0, (x[0] + w * x[1]).cos()));
        let backend = Backend::Multiplier { tol: 1e-12 };
        let a1 = averaging_operator(&g, &chi, &f1, backend).unwrap();
        let a2 = averaging_operator(&g, &chi, &f2, backend).unwrap();
        let mut sum = f1.clone();
        for (s, v) in sum.data.iter_mut().zip(&f2.data) {
            *s = *s * c + v;
        }
        let asum = averaging_operator(&g, &chi, &sum, backend).unwrap();
        let scale = asum.data.iter().map(|z| z.norm()).fold(1e-300, f64::max);
        let lin = asum.data.iter().zip(a1.data.iter().zip(&a2.data)).map(|(s, (x, y))| (s - (x * c + y)).norm()).fold(0.0, f64::max);
        prop_assert!(lin <= 1e-10 * scale);

        let n = 64;
        let shifted = |f: &PeriodicField| {
            let mut out = f.clone();
            for i in 0..n {
                for j in 0..n {
                    out.data[((i + shift.0) % n) * n + (j + shift.1) % n] = f.data[i * n + j];
                }
            }
            out
        };
        let a_shift = averaging_operator(&g, &chi, &shifted(&f1), backend).unwrap();
        let shift_a = shifted(&a1);
        let scale = a1.data.iter().map(|z| z.norm()).fold(1e-300, f64::max);
        let err = a_shift.data.iter().zip(&shift_a.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-10 * scale);
    }
}
