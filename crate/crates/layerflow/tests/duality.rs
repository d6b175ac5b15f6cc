use layerflow::transport::{nu_direct, nu_dual, nu_dual_opt, nu_dual_rescaled, nu_primal, nu_primal_opt, solve_symmetrized};
use layerflow::{build_domain, random_streamfunction, streamfunction_to_velocity, SpectralField, VelocityField};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn flow(seed: u64, m: usize, pe: f64) -> VelocityField {
    let d = build_domain(2.0 * PI, m, 25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    streamfunction_to_velocity(&random_streamfunction(&d, &mut rng, 5).scaled(pe))
}

fn test_field(u: &VelocityField, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    random_streamfunction(u.domain(), &mut rng, 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn primal_and_dual_bracket_nu(seed in 0u64..10_000, m in 1usize..4, lpe in 0.0f64..2.0) {
        let u = flow(seed, m, 10f64.powf(lpe));
        let nu = nu_direct(&u).unwrap();
        let xi = test_field(&u, seed);
        let eta = SpectralField::from_fn(u.domain(), |_, z| 1.0 - z).add(&xi.scaled(0.3));
        prop_assert!(nu_dual(&u, &xi).unwrap() <= nu * (1.0 + 1e-10));
        prop_assert!(nu_dual_rescaled(&u, &xi).unwrap() <= nu * (1.0 + 1e-10));
        prop_assert!(nu_primal(&u, &eta).unwrap() >= nu * (1.0 - 1e-10));
        prop_assert!(nu >= 1.0 - 1e-12);
    }

    #[test]
    fn optima_agree(seed in 0u64..10_000, lpe in 0.0f64..2.0) {
        let u = flow(seed, 3, 10f64.powf(lpe));
        let nu = nu_direct(&u).unwrap();
        let p = nu_primal_opt(&u).unwrap();
        let d = nu_dual_opt(&u).unwrap();
        prop_assert!((p - d).abs() <= 1e-6 * nu);
        prop_assert!((p - nu).abs() <= 1e-5 * nu);
    }

    #[test]
    fn nu_is_even_in_the_flow(seed in 0u64..10_000, lpe in 0.0f64..1.5) {
        let u = flow(seed, 2, 10f64.powf(lpe));
        let a = nu_direct(&u).unwrap();
        let b = nu_direct(&u.scaled(-1.0)).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a);
    }
}

#[test]
fn symmetrized_split() {
    let u = flow(3, 3, 30.0);
    let (eta, xi) = solve_symmetrized(&u, 1e-12).unwrap();
    let nu = nu_direct(&u).unwrap();
    let split = eta.grad_square() + xi.grad_square();
    assert!((nu - 1.0 - split).abs() <= 1e-8 * nu);
    assert!(eta.grad_inner(&xi).abs() <= 1e-8 * split);
}

#[test]
fn still_fluid_conducts() {
    let d = build_domain(2.0 * PI, 2, 17).unwrap();
    let u = streamfunction_to_velocity(&SpectralField::zeros(&d));
    assert!((nu_direct(&u).unwrap() - 1.0).abs() < 1e-12);
}
