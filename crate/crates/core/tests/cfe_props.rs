use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use shear_core::cfe::*;
use shear_core::Rational;

fn r(p: u64, q: u64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Value of `[0; a1, ..., ak]` folded from the right, independent of the
/// convergent recursion.
fn fold_value(quotients: &[u64]) -> Rational {
    let mut acc = Rational::zero();
    for &a in quotients.iter().rev() {
        acc = Rational::one() / (Rational::from_integer(a.into()) + acc);
    }
    acc
}

#[test]
fn round_trip_small_denominators() {
    for q in 2..=300u64 {
        for p in (1..q).filter(|p| p.gcd(&q) == 1) {
            let x = r(p, q);
            let w = cfe_of_rational(&x).unwrap();
            assert_eq!(convergents(&w).last(), Some(&x), "{p}/{q}");
            assert_eq!(w.value(), x);
            let small = quotients_small(p, q);
            assert_eq!(fold_value(&small), x);
            assert_eq!(w.quotients, small.iter().map(|&a| BigInt::from(a)).collect::<Vec<_>>());
        }
    }
}

#[test]
fn extreme_numerators_have_short_words() {
    for m in 3..=2000u64 {
        assert_eq!(cfe_len(&r(1, m)).unwrap(), 1, "1/{m}");
        assert_eq!(cfe_len(&r(m - 1, m)).unwrap(), 2, "{}/{m}", m - 1);
    }
}

#[test]
fn orbit_small_matches_exact_orbit() {
    for (p, q) in [(3, 7), (5, 13), (89, 144), (1, 2), (999, 1000)] {
        let exact = orbit(&r(p, q)).unwrap();
        let small: Vec<Rational> = orbit_small(p, q).into_iter().map(|(a, b)| r(a, b)).collect();
        assert_eq!(exact, small);
    }
}

fn reduced() -> impl Strategy<Value = (u64, u64)> {
    (2u64..1_000_000).prop_flat_map(|q| (1..q, Just(q))).prop_filter("coprime", |(p, q)| p.gcd(q) == 1)
}

proptest! {
    #[test]
    fn shift_law((p, q) in reduced()) {
        let x = r(p, q);
        let w = cfe_of_rational(&x).unwrap();
        let tx = gauss_map(&x).unwrap();
        if !tx.is_zero() {
            let tw = cfe_of_rational(&tx).unwrap();
            prop_assert_eq!(&tw.quotients[..], &w.quotients[1..]);
        } else {
            prop_assert_eq!(w.len(), 1);
        }
    }

    #[test]
    fn dirichlet_quality((p, q) in reduced()) {
        let x = r(p, q);
        let cs = convergents(&cfe_of_rational(&x).unwrap());
        for c in &cs[..cs.len() - 1] {
            let err = (&x - c).abs();
            let qj = Rational::from_integer(c.denom().clone());
            prop_assert!(err < Rational::one() / (&qj * &qj), "{} vs {}", x, c);
        }
    }

    #[test]
    fn length_is_orbit_length((p, q) in reduced()) {
        let x = r(p, q);
        prop_assert_eq!(cfe_len(&x).unwrap(), orbit(&x).unwrap().len());
        prop_assert_eq!(cfe_len(&x).unwrap(), quotients_small(p, q).len());
    }

    #[test]
    fn last_quotient_is_at_least_two((p, q) in reduced()) {
        let w = quotients_small(p, q);
        prop_assert!(*w.last().unwrap() >= 2 || (p == 1 && q == 1));
    }
}

#[test]
fn rejects_outside_open_unit_interval() {
    for x in [Rational::zero(), Rational::one(), r(3, 2), -r(1, 2)] {
        assert!(cfe_of_rational(&x).is_err(), "{x}");
    }
    assert_eq!(gauss_map(&Rational::one()).unwrap(), Rational::zero());
    assert!(gauss_map(&Rational::zero()).is_err());
}

#[test]
fn display_and_word_constructors() {
    let w = CfeWord::from_small(0, &[2, 3]).unwrap();
    assert_eq!(w.to_string(), "[0;2,3]");
    assert_eq!(w.value(), r(3, 7));
    assert!(CfeWord::from_small(0, &[2, 0]).is_err());
}
