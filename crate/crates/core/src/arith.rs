//! Integer arithmetic: factorization, Euler's totient, Möbius, coprime
//! counting in rational intervals and the Chinese remainder theorem.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArithError {
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("interval is reversed: lo > hi")]
    ReversedInterval,
    #[error("moduli {0} and {1} are not coprime")]
    NotCoprime(BigInt, BigInt),
    #[error("residue and modulus lists differ in length")]
    LengthMismatch,
}

/// Prime-power decomposition of a positive integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub modulus: u64,
    /// Ascending primes with their exponents.
    pub prime_powers: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.prime_powers.iter().map(|&(p, _)| p)
    }

    /// Number of distinct prime factors.
    pub fn omega(&self) -> u32 {
        self.prime_powers.len() as u32
    }

    pub fn phi(&self) -> u64 {
        self.prime_powers
            .iter()
            .fold(1u64, |acc, &(p, e)| acc * (p - 1) * p.pow(e - 1))
    }

    /// Squarefree divisors paired with their Möbius sign.
    pub fn squarefree_divisors(&self) -> Vec<(u64, i8)> {
        let mut out = vec![(1u64, 1i8)];
        for p in self.primes() {
            let len = out.len();
            for i in 0..len {
                let (d, s) = out[i];
                out.push((d * p, -s));
            }
        }
        out
    }
}

pub fn factorize(m: u64) -> Result<Factorization, ArithError> {
    if m == 0 {
        return Err(ArithError::ZeroModulus);
    }
    let mut rest = m;
    let mut prime_powers = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= rest {
        if rest % p == 0 {
            let mut e = 0;
            while rest % p == 0 {
                rest /= p;
                e += 1;
            }
            prime_powers.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if rest > 1 {
        prime_powers.push((rest, 1));
    }
    Ok(Factorization { modulus: m, prime_powers })
}

pub fn euler_phi(m: u64) -> Result<u64, ArithError> {
    Ok(factorize(m)?.phi())
}

pub fn omega(m: u64) -> Result<u32, ArithError> {
    Ok(factorize(m)?.omega())
}

pub fn moebius(n: u64) -> Result<i8, ArithError> {
    let f = factorize(n)?;
    if f.prime_powers.iter().any(|&(_, e)| e > 1) {
        Ok(0)
    } else if f.omega() % 2 == 0 {
        Ok(1)
    } else {
        Ok(-1)
    }
}

/// The units of `Z/m` as ascending representatives in `[0, m)`.
pub fn units_mod(m: u64) -> Result<Vec<u64>, ArithError> {
    if m == 0 {
        return Err(ArithError::ZeroModulus);
    }
    if m == 1 {
        return Ok(vec![0]);
    }
    Ok((1..m).filter(|&n| n.gcd(&m) == 1).collect())
}

/// Half-open interval `[lo, hi)` with rational endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntInterval {
    lo: BigRational,
    hi: BigRational,
}

impl IntInterval {
    pub fn new(lo: BigRational, hi: BigRational) -> Result<Self, ArithError> {
        if lo > hi {
            return Err(ArithError::ReversedInterval);
        }
        Ok(Self { lo, hi })
    }

    pub fn from_ints(lo: i64, hi: i64) -> Result<Self, ArithError> {
        Self::new(BigRational::from_integer(lo.into()), BigRational::from_integer(hi.into()))
    }

    pub fn lo(&self) -> &BigRational {
        &self.lo
    }

    pub fn hi(&self) -> &BigRational {
        &self.hi
    }

    pub fn length(&self) -> BigRational {
        &self.hi - &self.lo
    }

    /// Number of multiples of `d` inside the interval.
    pub fn multiples_of(&self, d: u64) -> BigInt {
        let d = BigInt::from(d);
        ceil_div(self.hi.numer(), &(self.hi.denom() * &d))
            - ceil_div(self.lo.numer(), &(self.lo.denom() * &d))
    }
}

fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_mod_floor(b);
    if r.is_zero() {
        q
    } else {
        q + 1
    }
}

/// Integers in `interval` coprime to `m`, by inclusion–exclusion over the
/// squarefree divisors of `m`.
pub fn coprime_count(m: u64, interval: &IntInterval) -> Result<BigInt, ArithError> {
    let f = factorize(m)?;
    Ok(coprime_count_with(&f, interval))
}

pub fn coprime_count_with(f: &Factorization, interval: &IntInterval) -> BigInt {
    let mut total = BigInt::zero();
    for (d, sign) in f.squarefree_divisors() {
        let c = interval.multiples_of(d);
        if sign > 0 {
            total += c;
        } else {
            total -= c;
        }
    }
    total
}

/// Outcome of comparing a coprime count with its density prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoprimeBound {
    pub count: BigInt,
    /// `phi(m)/m * |I|`.
    pub expected: BigRational,
    /// `|count - expected|`.
    pub deviation: BigRational,
    /// `2^omega(m)`.
    pub bound: u64,
    pub holds: bool,
}

impl CoprimeBound {
    pub fn slack(&self) -> BigRational {
        BigRational::from_integer(self.bound.into()) - &self.deviation
    }
}

pub fn coprime_bound_holds(m: u64, interval: &IntInterval) -> Result<CoprimeBound, ArithError> {
    let f = factorize(m)?;
    Ok(coprime_bound_with(&f, interval))
}

pub fn coprime_bound_with(f: &Factorization, interval: &IntInterval) -> CoprimeBound {
    let count = coprime_count_with(f, interval);
    let density = BigRational::new(f.phi().into(), f.modulus.into());
    let expected = density * interval.length();
    let deviation = (BigRational::from_integer(count.clone()) - &expected).abs();
    let bound = 1u64 << f.omega();
    let holds = deviation <= BigRational::from_integer(bound.into());
    CoprimeBound { count, expected, deviation, bound, holds }
}

/// Largest denominator of a sampled interval endpoint.
pub const SAMPLE_DENOMINATOR: i64 = 1000;

/// `count` random intervals with endpoints `a/b`, `1 <= b <= 1000`, drawn from
/// `[-3m, 3m]`. The stream is keyed by `m`, so each modulus is reproducible
/// on its own.
pub fn sample_intervals(m: u64, count: usize, seed: u64) -> Vec<IntInterval> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(m);
    let span = 3 * m as i64 * SAMPLE_DENOMINATOR;
    let endpoint = |rng: &mut ChaCha8Rng| {
        let b = rng.gen_range(1..=SAMPLE_DENOMINATOR);
        let a = rng.gen_range(-span..=span) * b / SAMPLE_DENOMINATOR;
        BigRational::new(a.into(), b.into())
    };
    (0..count)
        .map(|_| {
            let (x, y) = (endpoint(&mut rng), endpoint(&mut rng));
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            IntInterval { lo, hi }
        })
        .collect()
}

/// Combine `x = r_i mod n_i` into the unique residue mod `prod n_i`.
pub fn crt_combine(residues: &[BigInt], moduli: &[BigInt]) -> Result<(BigInt, BigInt), ArithError> {
    if residues.len() != moduli.len() {
        return Err(ArithError::LengthMismatch);
    }
    let mut x = BigInt::zero();
    let mut modulus = BigInt::one();
    for (r, n) in residues.iter().zip(moduli) {
        if !n.is_positive() {
            return Err(ArithError::ZeroModulus);
        }
        let e = modulus.extended_gcd(n);
        if !e.gcd.is_one() {
            return Err(ArithError::NotCoprime(modulus, n.clone()));
        }
        // x + modulus * k = r (mod n), with k = (r - x) * modulus^{-1}
        let k = ((r - &x) * &e.x).mod_floor(n);
        x += &modulus * k;
        modulus *= n;
        x = x.mod_floor(&modulus);
    }
    Ok((x, modulus))
}

/// Largest `m <= max_m` with `phi(m) < m^(1 - eps)`. Every larger `m` up to
/// `max_m` satisfies the growth bound, so the empirical threshold is one past it.
pub fn phi_growth_last_failure(eps: f64, max_m: u64) -> Option<u64> {
    let phis = phi_table(max_m);
    (1..=max_m)
        .rev()
        .find(|&m| (phis[m as usize] as f64) < (m as f64).powf(1.0 - eps))
}

/// `phi(m)` for every `m <= max_m` by sieve; index 0 holds 0.
pub fn phi_table(max_m: u64) -> Vec<u64> {
    let n = max_m as usize;
    let mut phi: Vec<u64> = (0..=max_m).collect();
    for p in 2..=n {
        if phi[p] == p as u64 {
            for k in (p..=n).step_by(p) {
                phi[k] -= phi[k] / p as u64;
            }
        }
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn totients_and_small_factorizations() {
        assert_eq!(euler_phi(1).unwrap(), 1);
        assert_eq!(euler_phi(12).unwrap(), 4);
        assert_eq!(euler_phi(97).unwrap(), 96);
        assert_eq!(omega(30).unwrap(), 3);
        assert_eq!(moebius(30).unwrap(), -1);
        assert_eq!(moebius(12).unwrap(), 0);
        let table = phi_table(200);
        for m in 1..=200u64 {
            assert_eq!(table[m as usize], euler_phi(m).unwrap());
        }
    }

    #[test]
    fn full_period_counts_totient() {
        let i = IntInterval::from_ints(0, 15).unwrap();
        assert_eq!(coprime_count(15, &i).unwrap(), BigInt::from(8));
        let b = coprime_bound_holds(15, &i).unwrap();
        assert!(b.deviation.is_zero());
        assert_eq!(b.bound, 4);
    }

    #[test]
    fn prime_modulus_count_and_bound() {
        // [1/2, 9/2) holds 1..=4, all coprime to 7; expected 6/7 * 4 = 24/7
        let i = IntInterval::new(q(1, 2), q(9, 2)).unwrap();
        let b = coprime_bound_holds(7, &i).unwrap();
        assert_eq!(b.count, BigInt::from(4));
        assert_eq!(b.expected, q(24, 7));
        assert_eq!(b.deviation, q(4, 7));
        assert!(b.holds);
    }

    #[test]
    fn modulus_one_counts_all_integers() {
        let i = IntInterval::new(q(-7, 3), q(5, 2)).unwrap();
        // integers -2..=2
        assert_eq!(coprime_count(1, &i).unwrap(), BigInt::from(5));
    }

    #[test]
    fn empty_interval() {
        let i = IntInterval::new(q(3, 2), q(3, 2)).unwrap();
        assert!(coprime_count(6, &i).unwrap().is_zero());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(IntInterval::from_ints(5, 2), Err(ArithError::ReversedInterval));
        assert_eq!(euler_phi(0), Err(ArithError::ZeroModulus));
        let r = crt_combine(&[1.into(), 1.into()], &[4.into(), 6.into()]);
        assert!(matches!(r, Err(ArithError::NotCoprime(_, _))));
    }

    #[test]
    fn crt_small_system() {
        let (x, n) = crt_combine(&[2.into(), 3.into(), 2.into()], &[3.into(), 5.into(), 7.into()]).unwrap();
        assert_eq!(x, BigInt::from(23));
        assert_eq!(n, BigInt::from(105));
    }

    #[test]
    fn phi_growth_last_failures() {
        // Frozen from an independent sieve up to 10^5. For eps = 0.2 the last
        // failure is the primorial 2310; for eps = 0.1 failures persist to the
        // end of the range, so no threshold is visible there.
        assert_eq!(phi_growth_last_failure(0.2, 100_000), Some(2310));
        assert_eq!(phi_growth_last_failure(0.1, 100_000), Some(99_996));
    }
}
