use proptest::prelude::*;
use spdectl::optimize::random_direction;
use spdectl::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn vec_strategy(len: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, len)
}

fn spectral(n: usize) -> Space {
    spectral_basis(20.0, n).unwrap().into()
}

fn fem(n: usize) -> Space {
    fem_assemble(20.0, n).unwrap().into()
}

proptest! {
    #[test]
    fn cutoff_is_a_bounded_idempotent_projection(x in vec_strategy(7, 5.0), r in 0.1f64..4.0) {
        let y = cutoff(&x, r);
        let norm = dot(&y, &y).sqrt();
        prop_assert!(norm <= r * (1.0 + 1e-12));
        let z = cutoff(&y, r);
        for (a, b) in y.iter().zip(&z) {
            prop_assert!((a - b).abs() <= 1e-12 * r);
        }
        if dot(&x, &x).sqrt() <= r {
            prop_assert_eq!(&y, &x);
        }
    }

    #[test]
    fn tanh_network_vjp_is_the_transpose_of_jvp(seed in 0u64..1000, t in 0.0f64..2.0, cut in prop::bool::ANY) {
        let fam = Family::TwoLayer { hidden1: 5, hidden2: 4, activation: Activation::Tanh, cutoff: cut.then_some(3.0), time_scale: 0.5 };
        vjp_identity(fam, BasisKind::Spectral, 6, seed, t)?;
    }

    #[test]
    fn relu_network_vjp_is_the_transpose_of_jvp(seed in 0u64..1000, t in 0.0f64..2.0) {
        let fam = Family::OneLayer { hidden: 9, activation: Activation::Relu, cutoff: None, time_scale: 0.5 };
        vjp_identity(fam, BasisKind::Spectral, 5, seed, t)?;
    }

    #[test]
    fn rbf_vjp_is_the_transpose_of_jvp(seed in 0u64..1000, t in 0.0f64..2.0, centers in prop::bool::ANY) {
        let fam = Family::RbfNemytskii { neurons: 4, intervals: 3, kappa: 6.0, train_centers: centers };
        vjp_identity(fam, BasisKind::Fem, 9, seed, t)?;
    }

    #[test]
    fn collocation_round_trip_is_exact(c in vec_strategy(9, 3.0), is_fem in prop::bool::ANY) {
        let space = if is_fem { fem(8) } else { spectral(8) };
        let mut pts = vec![0.0; space.points().len()];
        space.to_points(&c, &mut pts);
        let mut back = vec![0.0; 9];
        space.project_points(&pts, &mut back);
        for (a, b) in c.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn metric_is_symmetric_positive(a in vec_strategy(9, 3.0), b in vec_strategy(9, 3.0), is_fem in prop::bool::ANY) {
        let space = if is_fem { fem(8) } else { spectral(8) };
        prop_assert!((space.inner(&a, &b) - space.inner(&b, &a)).abs() < 1e-10);
        if a.iter().any(|v| v.abs() > 1e-6) {
            prop_assert!(space.norm_sq(&a) > 0.0);
        }
    }

    #[test]
    fn noise_is_a_function_of_the_seed(seed in any::<u64>()) {
        let space = fem(6);
        let a = sample_noise(seed, 5, 0.1, &space);
        let b = sample_noise(seed, 5, 0.1, &space);
        let c = sample_noise(seed.wrapping_add(1), 5, 0.1, &space);
        prop_assert_eq!(a.increment(4), b.increment(4));
        prop_assert_ne!(a.increment(0), c.increment(0));
    }

    #[test]
    fn riccati_gains_stay_in_unit_interval(n in 1usize..12, horizon in 0.2f64..3.0) {
        let sol = riccati_solve(20.0, n, horizon, horizon / 40.0).unwrap();
        for k in 0..=n {
            prop_assert_eq!(sol.gain(k, sol.steps()), -1.0);
            for j in 0..=sol.steps() {
                let p = sol.gain(k, j);
                prop_assert!((-1.0..0.0).contains(&p));
            }
            if k > 0 {
                prop_assert!(sol.gain(k, 0) >= sol.gain(k - 1, 0));
            }
        }
    }
}

fn vjp_identity(fam: Family, kind: BasisKind, dim: usize, seed: u64, t: f64) -> std::result::Result<(), TestCaseError> {
    let mut params = FeedbackParams::initialize(fam, kind, dim, 2.0, seed).unwrap();
    // a nonzero output layer so that every parameter block is exercised
    let noise = random_direction(params.param_count(), seed ^ 77);
    params.alpha.iter_mut().zip(&noise).for_each(|(a, n)| *a += 0.3 * n);
    let u = Field::new(random_direction(dim, seed + 1), kind);
    let du = Field::new(random_direction(dim, seed + 2), kind);
    let w = Field::new(random_direction(dim, seed + 3), kind);
    let da = random_direction(params.param_count(), seed + 4);
    let jvp = feedback_jvp(&params, t, &u, &du, &da).unwrap();
    let gu = feedback_vjp_state(&params, t, &u, &w).unwrap();
    let ga = feedback_vjp_params(&params, t, &u, &w).unwrap();
    let lhs = dot(&w.coeffs, &jvp.coeffs);
    let rhs = dot(&gu.coeffs, &du.coeffs) + dot(&ga, &da);
    prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    Ok(())
}
