use proptest::prelude::*;
use shear_core::heights::*;
use shear_core::hyperbolic::RealMat2;
use shear_core::padic::{AdelicElement, PadicMat2};
use shear_core::Rational;
use num_bigint::BigInt;
use num_integer::Integer;
use std::collections::BTreeMap;

const RADIUS: i64 = 100;

fn combine(b: &RealMat2, x: i64, y: i64) -> [f64; 2] {
    let (x, y) = (x as f64, y as f64);
    [x * b.a + y * b.c, x * b.b + y * b.d]
}

/// Largest coefficient any vector of sup-norm at most `bound` can have.
fn coefficient_reach(b: &RealMat2, bound: f64) -> f64 {
    let inv = b.inverse().unwrap();
    let col0 = inv.a.abs() + inv.c.abs();
    let col1 = inv.b.abs() + inv.d.abs();
    bound * col0.max(col1)
}

fn enumerate_min(b: &RealMat2, radius: i64, primitive_only: bool) -> f64 {
    let mut best = f64::INFINITY;
    for x in -radius..=radius {
        for y in -radius..=radius {
            if (x, y) == (0, 0) || (primitive_only && x.gcd(&y) != 1) {
                continue;
            }
            best = best.min(sup_norm(combine(b, x, y)));
        }
    }
    best
}

fn well_conditioned() -> impl Strategy<Value = RealMat2> {
    (-3.0f64..3.0, -2.0f64..2.0, 0.0f64..6.3)
        .prop_map(|(t, x, th)| RealMat2::diag_flow(t).mul(&RealMat2::unipotent(x)).mul(&RealMat2::rotation(th)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn shortest_vector_is_optimal(b in well_conditioned(), s in 0.5f64..2.0) {
        let b = RealMat2::new(s * b.a, s * b.b, s * b.c, s * b.d);
        let sv = shortest_vector(&b).unwrap();
        let first_row = sup_norm([b.a, b.b]).min(sup_norm([b.c, b.d]));
        prop_assume!(coefficient_reach(&b, first_row) <= RADIUS as f64);
        let oracle = enumerate_min(&b, RADIUS, false);
        prop_assert!((sv.norm - oracle).abs() <= 1e-12 * oracle.max(1.0), "{} vs {}", sv.norm, oracle);
        prop_assert!((sup_norm(combine(&b, sv.coeffs[0], sv.coeffs[1])) - sv.norm).abs() <= 1e-12);
    }

    #[test]
    fn witness_never_exceeds_height(l in 1u64..1_000, m in 2u64..1_000, t in -8.0f64..2.0, n in 0u64..1_000) {
        let w = cusp_height_witness(l % m, m, t, n);
        let ht = ht_inf(&translated_orbit_matrix(l % m, m, t, n)).unwrap();
        prop_assert!(w.bound <= ht * (1.0 + 1e-9), "{} > {}", w.bound, ht);
        prop_assert!((w.bound - (t / 2.0).exp().recip()).abs() <= 1e-12 * w.bound);
    }
}

#[test]
fn diagonal_heights() {
    for k in 0..=200 {
        let t = k as f64 * 0.1;
        let ht = ht_inf(&RealMat2::diag_flow(t)).unwrap();
        assert!((ht - (t / 2.0).exp()).abs() <= 1e-10, "t={t}: {ht}");
    }
}

fn integral_unimodular(p: u64, seed: i64) -> PadicMat2 {
    // u_b times the lower unipotent with entry c, determinant 1.
    let q = |n: i64| Rational::from_integer(BigInt::from(n));
    let (b, c) = (seed % 11 - 5, seed % 13 - 6);
    PadicMat2::from_rationals([&q(1 + b * c), &q(b), &q(c), &q(1)], p, 12).unwrap()
}

#[test]
fn s_height_agrees_with_primitive_product_norm() {
    for seed in 0..12i64 {
        let real = RealMat2::diag_flow(seed as f64 * 0.25 - 1.5).mul(&RealMat2::unipotent(seed as f64 * 0.17));
        let places = BTreeMap::from([(2u64, integral_unimodular(2, seed + 3)), (3u64, integral_unimodular(3, seed + 8))]);
        let h = AdelicElement { real, places };
        let hs = ht_s(&h).unwrap();
        assert_eq!(hs, ht_inf(&h.real).unwrap());
        assert!(coefficient_reach(&h.real, 1.0 / hs) <= 50.0);
        let mut best = f64::INFINITY;
        for x in -50i64..=50 {
            for y in -50i64..=50 {
                if x.gcd(&y) == 1 {
                    best = best.min(product_norm([x, y], &h).unwrap());
                }
            }
        }
        assert!((1.0 / best - hs).abs() <= 1e-12 * hs, "seed {seed}: {} vs {hs}", 1.0 / best);
    }
}
