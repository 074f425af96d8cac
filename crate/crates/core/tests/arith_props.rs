use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use proptest::prelude::*;
use shear_core::arith::*;

fn gcd_count(m: u64) -> u64 {
    (1..=m).filter(|n| n.gcd(&m) == 1).count() as u64
}

/// Integers in `[0, k)` coprime to `m`, for `0 <= k <= m`.
fn prefix_table(m: u64) -> Vec<i64> {
    let mut t = vec![0i64; m as usize + 1];
    for k in 0..m {
        t[k as usize + 1] = t[k as usize] + i64::from(k.gcd(&m) == 1);
    }
    t
}

fn ceil_of(q: &BigRational) -> i64 {
    let c = q.ceil().to_integer();
    i64::try_from(c).unwrap()
}

/// Coprime integers in `[0, k)`, any sign of `k`, via periodicity.
fn below(k: i64, m: i64, table: &[i64]) -> i64 {
    let (q, r) = k.div_mod_floor(&m);
    q * table[m as usize] + table[r as usize]
}

#[test]
fn phi_matches_gcd_scan() {
    let table = phi_table(10_000);
    for m in 1..=10_000u64 {
        assert_eq!(table[m as usize], gcd_count(m), "phi({m})");
        if m % 97 == 0 {
            assert_eq!(euler_phi(m).unwrap(), table[m as usize]);
        }
    }
}

#[test]
fn moebius_sums_over_divisors() {
    let mu: Vec<i8> = (0..=10_000u64).map(|n| if n == 0 { 0 } else { moebius(n).unwrap() }).collect();
    let mut sums = vec![0i32; 10_001];
    for d in 1..=10_000usize {
        for n in (d..=10_000).step_by(d) {
            sums[n] += i32::from(mu[d]);
        }
    }
    assert_eq!(sums[1], 1);
    assert!(sums[2..].iter().all(|&s| s == 0));
}

#[test]
fn counts_and_bounds_on_sampled_intervals() {
    for m in (1..=2_000u64).chain([4_096, 9_699, 9_999, 10_000]) {
        let f = factorize(m).unwrap();
        let table = prefix_table(m);
        for iv in sample_intervals(m, 50, 11) {
            let oracle = below(ceil_of(iv.hi()), m as i64, &table) - below(ceil_of(iv.lo()), m as i64, &table);
            let b = coprime_bound_with(&f, &iv);
            assert_eq!(b.count, BigInt::from(oracle), "m={m} [{}, {})", iv.lo(), iv.hi());
            assert!(b.holds, "m={m} deviation {}", b.deviation);
        }
    }
}

#[test]
fn sampled_intervals_are_seed_stable() {
    assert_eq!(sample_intervals(77, 20, 3), sample_intervals(77, 20, 3));
    assert_ne!(sample_intervals(77, 20, 3), sample_intervals(78, 20, 3));
    for iv in sample_intervals(50, 200, 9) {
        assert!(iv.lo() <= iv.hi());
        assert!(iv.lo().denom() <= &BigInt::from(1000) && iv.hi().denom() <= &BigInt::from(1000));
        assert!(iv.lo() >= &BigRational::from_integer((-150).into()));
        assert!(iv.hi() <= &BigRational::from_integer(150.into()));
    }
}

proptest! {
    #[test]
    fn factorization_multiplies_back(m in 1u64..1_000_000) {
        let f = factorize(m).unwrap();
        let prod: u64 = f.prime_powers.iter().map(|&(p, k)| p.pow(k)).product();
        prop_assert_eq!(prod, m);
        prop_assert!(f.prime_powers.windows(2).all(|w| w[0].0 < w[1].0));
        prop_assert!(f.prime_powers.iter().all(|&(_, k)| k >= 1));
    }

    #[test]
    fn crt_solves_every_congruence(r in proptest::collection::vec(0u64..1_000, 1..4), seed in 0usize..6) {
        let pool: [u64; 6] = [7, 9, 11, 16, 25, 13];
        let moduli: Vec<u64> = (0..r.len()).map(|i| pool[(seed + i) % pool.len()]).collect();
        let residues: Vec<BigInt> = r.iter().zip(&moduli).map(|(&x, &n)| BigInt::from(x % n)).collect();
        let big_moduli: Vec<BigInt> = moduli.iter().map(|&n| BigInt::from(n)).collect();
        let (x, n) = crt_combine(&residues, &big_moduli).unwrap();
        prop_assert_eq!(n, big_moduli.iter().product::<BigInt>());
        for (ri, ni) in residues.iter().zip(&big_moduli) {
            prop_assert_eq!(x.mod_floor(ni), ri.clone());
        }
    }

    #[test]
    fn count_is_additive(m in 1u64..500, a in -2_000i64..2_000, b in 0i64..2_000, c in 0i64..2_000) {
        let f = factorize(m).unwrap();
        let whole = IntInterval::from_ints(a, a + b + c).unwrap();
        let left = IntInterval::from_ints(a, a + b).unwrap();
        let right = IntInterval::from_ints(a + b, a + b + c).unwrap();
        prop_assert_eq!(coprime_count_with(&f, &whole), coprime_count_with(&f, &left) + coprime_count_with(&f, &right));
    }
}

