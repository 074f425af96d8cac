use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;
use shear_core::cfe::orbit;
use shear_core::measures::*;
use shear_core::Rational;
use std::collections::BTreeMap;

fn r(p: u64, q: u64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Family average rebuilt from the exact orbits, atom by atom.
fn brute_family(m: u64, mode: FamilyMode) -> BTreeMap<Rational, Rational> {
    let units: Vec<u64> = (1..m).filter(|n| n.gcd(&m) == 1).collect();
    let orbits: Vec<Vec<Rational>> = units.iter().map(|&n| orbit(&r(n, m)).unwrap()).collect();
    let points: usize = orbits.iter().map(Vec::len).sum();
    let mut out = BTreeMap::new();
    for orb in &orbits {
        let w = match mode {
            FamilyMode::OrbitUniform => r(1, (orb.len() * units.len()) as u64),
            FamilyMode::PointUniform => r(1, points as u64),
        };
        for x in orb {
            *out.entry(x.clone()).or_insert_with(Rational::zero) += &w;
        }
    }
    out
}

#[test]
fn family_average_matches_brute_force_merge() {
    for m in (2..=60u64).chain([97, 128, 210]) {
        for mode in [FamilyMode::OrbitUniform, FamilyMode::PointUniform] {
            let mu = family_average(m, mode).unwrap();
            let brute: Vec<(Rational, Rational)> = brute_family(m, mode).into_iter().collect();
            assert_eq!(mu.atoms(), &brute[..], "m={m} {}", mode.name());
        }
    }
}

/// `sup |F - G|` evaluated on a fine grid plus both sides of every atom.
fn grid_kolmogorov(mu: &EmpiricalMeasure) -> f64 {
    let mut best = 0.0f64;
    for k in 0..=20_000 {
        let x = k as f64 / 20_000.0;
        let f: f64 = mu.atoms().iter().filter(|(a, _)| a.to_f64().unwrap() <= x).map(|(_, w)| w.to_f64().unwrap()).sum();
        best = best.max((f - gauss_cdf(x)).abs());
    }
    best
}

#[test]
fn kolmogorov_distance_dominates_grid_search() {
    for m in [2u64, 5, 12, 31] {
        let mu = family_average(m, FamilyMode::OrbitUniform).unwrap();
        let d = kolmogorov_distance(&mu);
        let g = grid_kolmogorov(&mu);
        assert!(d >= g - 1e-12 && d <= g + 1e-3, "m={m}: {d} vs grid {g}");
    }
    let half = family_average(2, FamilyMode::OrbitUniform).unwrap();
    assert!((kolmogorov_distance(&half) - 1.5f64.log2()).abs() < 1e-15);
}

#[test]
fn kuzmin_frequencies_sum_to_one() {
    let body: f64 = (1..=KUZMIN_MAX_DIGIT).map(kuzmin_frequency).sum();
    assert!((body + kuzmin_tail_frequency(KUZMIN_MAX_DIGIT) - 1.0).abs() < 1e-12);
}

#[test]
fn kuzmin_histogram_counts_every_quotient() {
    let h = kuzmin_histogram(2..=200).unwrap();
    let body: u64 = h.counts.iter().sum();
    assert_eq!(body + h.tail, h.total);
    assert!(h.max_frequency_gap() < 0.05);
}

proptest! {
    #[test]
    fn orbit_measures_are_probability((q, p) in (2u64..100_000).prop_flat_map(|q| (Just(q), 1..q))) {
        let x = r(p, q);
        let mu = orbit_measure(&x).unwrap();
        let total: Rational = mu.atoms().iter().map(|(_, w)| w.clone()).sum();
        prop_assert!(total.is_one());
        prop_assert!(mu.cdf(&Rational::one()).is_one());
        prop_assert!(mu.weight_at(&x) > Rational::zero());
    }

    #[test]
    fn family_weights_sum_to_one(m in 2u64..400) {
        for mode in [FamilyMode::OrbitUniform, FamilyMode::PointUniform] {
            let mu = family_average(m, mode).unwrap();
            let total: Rational = mu.atoms().iter().map(|(_, w)| w.clone()).sum();
            prop_assert!(total.is_one());
            let tv = binned_total_variation(&mu, 64).unwrap();
            prop_assert!((0.0..=1.0).contains(&tv));
        }
    }
}

#[test]
fn rejects_bad_input() {
    assert_eq!(family_average(1, FamilyMode::OrbitUniform), Err(MeasureError::ModulusTooSmall));
    let mu = family_average(5, FamilyMode::OrbitUniform).unwrap();
    assert_eq!(binned_total_variation(&mu, 0), Err(MeasureError::NoBins));
    assert!(EmpiricalMeasure::from_weighted([(r(1, 2), r(1, 2))]).is_err());
}
