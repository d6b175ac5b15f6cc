use layerflow::advection::mode_decomposition;
use layerflow::bounds::{energy_bound, howard_lower_bound, howard_value, symmetrization_bound_min, BoundOptions};
use layerflow::optimizer::{efficiency_energy, efficiency_enstrophy, fit_scaling};
use layerflow::transport::nu_direct;
use layerflow::{build_domain, random_streamfunction, streamfunction_to_velocity, SpectralField, VelocityField};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Random flow and a test field normalised to unit net flux.
fn pair(seed: u64, m: usize) -> (VelocityField, SpectralField) {
    let d = build_domain(2.0 * PI, m, 25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = streamfunction_to_velocity(&random_streamfunction(&d, &mut rng, 5));
    let noise = random_streamfunction(&d, &mut rng, 4);
    let t = u.w().add(&noise.scaled(0.2 * u.w().mean_square().sqrt()));
    let xi = t.scaled(1.0 / u.w().inner(&t));
    (u, xi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn efficiency_decomposes(seed in 0u64..100_000, m in 1usize..5, leps in -6.0f64..-1.0) {
        let eps = 10f64.powf(leps);
        let (u, xi) = pair(seed, m);
        let r = efficiency_enstrophy(&u, &xi, eps).unwrap();
        let dec = mode_decomposition(&u, &xi);
        let product = eps * r.enstrophy_u * r.grad_xi;
        prop_assert!((r.total_e - r.advection - product).abs() <= 1e-12 * r.total_e);
        prop_assert!((r.advection - dec.k0_term - dec.q_sum()).abs() <= 1e-10 * r.advection);
        prop_assert!(dec.q_terms.iter().all(|q| q.value >= -1e-14 * dec.total));
    }

    #[test]
    fn efficiency_is_scale_invariant(seed in 0u64..100_000, ls in -2.0f64..2.0) {
        let lambda = 10f64.powf(ls);
        let (u, xi) = pair(seed, 3);
        let a = efficiency_enstrophy(&u, &xi, 1e-3).unwrap().total_e;
        let b = efficiency_enstrophy(&u.scaled(lambda), &xi.scaled(1.0 / lambda), 1e-3).unwrap().total_e;
        prop_assert!((a - b).abs() <= 1e-10 * a);
        let c = efficiency_energy(&u, &xi, 1e-3).unwrap().total_e;
        let d = efficiency_energy(&u.scaled(lambda), &xi.scaled(1.0 / lambda), 1e-3).unwrap().total_e;
        prop_assert!((c - d).abs() <= 1e-10 * c);
    }

    #[test]
    fn howard_sits_below_efficiency(seed in 0u64..100_000, m in 1usize..5, leps in -6.0f64..-1.0) {
        let eps = 10f64.powf(leps);
        let (u, xi) = pair(seed, m);
        let e = efficiency_enstrophy(&u, &xi, eps).unwrap().total_e;
        let h = howard_value(&u, &xi, eps).unwrap();
        let q = mode_decomposition(&u, &xi).q_sum();
        prop_assert!(h <= e);
        prop_assert!((e - h - q).abs() <= 1e-10 * e);
        prop_assert!(h >= howard_lower_bound(eps));
    }

    #[test]
    fn bounds_dominate_nu(seed in 0u64..100_000, lpe in 0.0f64..2.0) {
        let (u, _) = pair(seed, 2);
        let u = u.scaled(10f64.powf(lpe));
        let nu = nu_direct(&u).unwrap();
        prop_assert!(nu <= energy_bound(&u) * (1.0 + 1e-9));
        let s = symmetrization_bound_min(&u, &BoundOptions::default()).unwrap();
        prop_assert!(nu <= s.value * (1.0 + 1e-9));
    }

    #[test]
    fn power_laws_are_recovered(p in -2.0f64..2.0, c in 0.01f64..100.0) {
        let samples: Vec<(f64, f64)> = [1.0f64, 3.0, 10.0, 30.0].iter().map(|&x| (x, c * x.powf(p))).collect();
        let f = fit_scaling(&samples).unwrap();
        prop_assert!((f.exponent - p).abs() < 1e-10);
        prop_assert!((f.prefactor / c - 1.0).abs() < 1e-9);
        prop_assert!(f.r_squared > 1.0 - 1e-12 || p.abs() < 1e-6);
    }
}

#[test]
fn unit_flux_is_required() {
    let (u, xi) = pair(1, 2);
    assert!(efficiency_enstrophy(&u, &xi.scaled(2.0), 1e-3).is_err());
    assert!(howard_value(&u, &xi.scaled(2.0), 1e-3).is_err());
}
