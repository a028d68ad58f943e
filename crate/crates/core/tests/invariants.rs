use std::collections::BTreeSet;

use proptest::prelude::*;

use cradle::dynamics::{
    evolve, evolve_fraction, revival_orders, revival_orders_scan, Fraction, InitialState, IntegerSpectrum,
};
use cradle::jacobi::{build_jacobi, eigensystem_design, eigensystem_numeric};
use cradle::pipeline::{realize, DesignRequest};
use cradle::qkernel::weight_table;
use cradle::spectrum::{eigenintegers, SpectralDesign};
use cradle::synthesis::chain_to_jacobi;
use cradle::transforms::deform_chain;
use cradle::Boundary;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Admissible fixed-fixed seeds: `0 < k0 < k1`, odd sum, coprime.
fn fixed_seeds() -> impl Strategy<Value = (i64, i64)> {
    (1i64..12, 1i64..12)
        .prop_map(|(a, d)| (a, a + 2 * d - 1))
        .prop_filter("coprime", |(a, b)| gcd(*a, *b) == 1)
}

fn design() -> impl Strategy<Value = DesignRequest> {
    prop_oneof![
        (2i64..=5, 1usize..=10).prop_map(|(r, n)| DesignRequest::new(Boundary::FreeFree, r, 0, 1, n)),
        (fixed_seeds(), 2i64..=3, 1usize..=8)
            .prop_map(|((k0, k1), r, n)| DesignRequest::new(Boundary::FixedFixed, r, k0, k1, n)),
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 { a.abs() } else { (a - b).abs() / b.abs() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn revival_divisor_sets_match_scan((k0, k1) in fixed_seeds(), r in 2i64..=6) {
        let from_bounds: BTreeSet<u64> =
            revival_orders(k0, k1, r, Boundary::FixedFixed).into_iter().map(|o| o.z).collect();
        let kseq = eigenintegers(k0, k1, r, 9, Boundary::FixedFixed).unwrap();
        let scan: BTreeSet<u64> = revival_orders_scan(&kseq).into_iter().collect();
        prop_assert_eq!(from_bounds, scan);
    }

    #[test]
    fn r_is_always_a_revival_order((k0, k1) in fixed_seeds(), r in 2i64..=6) {
        let zs: Vec<u64> = revival_orders(k0, k1, r, Boundary::FixedFixed).into_iter().map(|o| o.z).collect();
        prop_assert!(zs.contains(&(r as u64)));
    }

    #[test]
    fn weights_positive_and_normalized(req in design()) {
        let d = SpectralDesign::new(req.boundary, req.r, req.k0, req.k1, req.n, 1.0).unwrap();
        let w = weight_table(&d.qparams().unwrap(), req.boundary).unwrap();
        prop_assert!(w.weights.iter().all(|v| *v > 0.0));
        prop_assert!((w.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn synthesized_chain_is_isospectral_and_mirrored(req in design(), omega in 0.2f64..5.0) {
        let mut req = req;
        req.omega = omega;
        let real = realize(&req).unwrap();
        prop_assert!(real.chain.mirror_error() < 1e-9);
        let eig = eigensystem_numeric(&chain_to_jacobi(&real.chain).unwrap()).unwrap();
        let top = (omega * *real.kseq.last().unwrap() as f64).powi(2);
        for (x, k) in eig.values.iter().zip(&real.kseq) {
            let t = (omega * *k as f64).powi(2);
            let e = if *k == 0 { x.abs() / top } else { rel(*x, t) };
            prop_assert!(e < 1e-8, "k = {}: {} vs {}", k, x, t);
        }
    }

    #[test]
    fn deformation_is_isospectral(req in design(), alpha in 0.02f64..0.98) {
        let real = realize(&req).unwrap();
        let deformed = deform_chain(&real.chain, alpha).unwrap();
        let eig = eigensystem_numeric(&chain_to_jacobi(&deformed).unwrap()).unwrap();
        let top = *real.eigen.values.last().unwrap();
        for (x, t) in eig.values.iter().zip(&real.eigen.values) {
            let e = if *t == 0.0 { x.abs() / top } else { rel(*x, *t) };
            prop_assert!(e < 1e-9);
        }
    }

    #[test]
    fn evolution_conserves_energy(req in design(), t in 0.0f64..50.0) {
        let d = SpectralDesign::new(req.boundary, req.r, req.k0, req.k1, req.n, 1.0).unwrap();
        let jac = build_jacobi(&d).unwrap();
        let eig = eigensystem_design(&jac, &d).unwrap();
        let init = InitialState::kick(eig.size(), 1.0);
        let e0 = evolve(&eig, &init, 0.0).energy(&jac);
        let e1 = evolve(&eig, &init, t).energy(&jac);
        prop_assert!(rel(e1, e0) < 1e-10);
    }

    #[test]
    fn exact_phases_agree_with_float_phases(req in design(), num in 0u64..40, den in 1u64..12) {
        // Small designs only, where float phases k·t stay accurate.
        let mut req = req;
        req.n = req.n.min(3);
        let real = realize(&req).unwrap();
        let spec = IntegerSpectrum { omega: 1.0, kseq: real.kseq.clone() };
        let init = InitialState::kick(real.eigen.size(), 1.0);
        let exact = evolve_fraction(&real.eigen, &spec, &init, Fraction { num, den });
        let float = evolve(&real.eigen, &init, real.tstar() * num as f64 / den as f64);
        for (a, b) in exact.p.iter().zip(&float.p) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
