//! Continued fractions of rationals and the Gauss map.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CfeError {
    #[error("{0} is outside the open unit interval")]
    OutsideUnitInterval(Rational),
    #[error("the Gauss map is undefined at {0}")]
    GaussMapDomain(Rational),
    #[error("partial quotients after the first must be positive")]
    NonPositiveQuotient,
}

/// `[a0; a1, ..., ak]` with `a_i >= 1` for `i >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CfeWord {
    pub a0: BigInt,
    pub quotients: Vec<BigInt>,
}

impl CfeWord {
    pub fn new(a0: BigInt, quotients: Vec<BigInt>) -> Result<Self, CfeError> {
        if quotients.iter().any(|a| !a.is_positive()) {
            return Err(CfeError::NonPositiveQuotient);
        }
        Ok(Self { a0, quotients })
    }

    pub fn from_small(a0: i64, quotients: &[u64]) -> Result<Self, CfeError> {
        Self::new(a0.into(), quotients.iter().map(|&a| BigInt::from(a)).collect())
    }

    pub fn len(&self) -> usize {
        self.quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotients.is_empty()
    }

    /// Evaluate the word back to a rational.
    pub fn value(&self) -> Rational {
        let mut acc: Option<Rational> = None;
        for a in self.quotients.iter().rev() {
            let term = Rational::from_integer(a.clone());
            acc = Some(match acc {
                None => term,
                Some(tail) => term + tail.recip(),
            });
        }
        let a0 = Rational::from_integer(self.a0.clone());
        match acc {
            None => a0,
            Some(tail) => a0 + tail.recip(),
        }
    }
}

impl fmt::Display for CfeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}", self.a0)?;
        for (i, a) in self.quotients.iter().enumerate() {
            write!(f, "{}{}", if i == 0 { ";" } else { "," }, a)?;
        }
        write!(f, "]")
    }
}

fn require_unit_open(x: &Rational) -> Result<(), CfeError> {
    if x.is_positive() && x < &Rational::one() {
        Ok(())
    } else {
        Err(CfeError::OutsideUnitInterval(x.clone()))
    }
}

/// `T(x) = 1/x - floor(1/x)` on `(0, 1]`.
pub fn gauss_map(x: &Rational) -> Result<Rational, CfeError> {
    if !x.is_positive() || x > &Rational::one() {
        return Err(CfeError::GaussMapDomain(x.clone()));
    }
    let (n, m) = (x.numer(), x.denom());
    Ok(Rational::new(m.mod_floor(n), n.clone()))
}

/// Continued fraction of `x` in `(0, 1)` by the Euclidean algorithm.
pub fn cfe_of_rational(x: &Rational) -> Result<CfeWord, CfeError> {
    require_unit_open(x)?;
    let (mut a, mut b) = (x.denom().clone(), x.numer().clone());
    let mut quotients = Vec::new();
    while !b.is_zero() {
        let (q, r) = a.div_rem(&b);
        quotients.push(q);
        a = b;
        b = r;
    }
    Ok(CfeWord { a0: BigInt::zero(), quotients })
}

/// Number of division steps of the Euclidean algorithm on `(m, n)`.
pub fn euclid_steps(x: &Rational) -> Result<usize, CfeError> {
    require_unit_open(x)?;
    let (mut a, mut b) = (x.denom().clone(), x.numer().clone());
    let mut steps = 0;
    while !b.is_zero() {
        let r = a.mod_floor(&b);
        a = b;
        b = r;
        steps += 1;
    }
    Ok(steps)
}

/// Forward Gauss orbit `x, T(x), ...` stopping before the terminal 0.
pub fn orbit(x: &Rational) -> Result<Vec<Rational>, CfeError> {
    require_unit_open(x)?;
    let mut out = Vec::new();
    let mut cur = x.clone();
    while !cur.is_zero() {
        let next = gauss_map(&cur)?;
        out.push(cur);
        cur = next;
    }
    Ok(out)
}

/// Length of the continued fraction, equal to the Gauss orbit length.
pub fn cfe_len(x: &Rational) -> Result<usize, CfeError> {
    let steps = euclid_steps(x)?;
    debug_assert_eq!(steps, orbit(x)?.len());
    Ok(steps)
}

/// Convergents `p_j/q_j` for `j = 1..=k`; a word with no quotients yields `a0`.
pub fn convergents(w: &CfeWord) -> Vec<Rational> {
    if w.quotients.is_empty() {
        return vec![Rational::from_integer(w.a0.clone())];
    }
    let (mut p_prev, mut p) = (BigInt::one(), w.a0.clone());
    let (mut q_prev, mut q) = (BigInt::zero(), BigInt::one());
    let mut out = Vec::with_capacity(w.quotients.len());
    for a in &w.quotients {
        let p_next = a * &p + &p_prev;
        let q_next = a * &q + &q_prev;
        p_prev = std::mem::replace(&mut p, p_next);
        q_prev = std::mem::replace(&mut q, q_next);
        out.push(Rational::new(p.clone(), q.clone()));
    }
    out
}

/// Gauss orbit of `n/m` as reduced `(numerator, denominator)` pairs.
pub fn orbit_small(n: u64, m: u64) -> Vec<(u64, u64)> {
    let g = n.gcd(&m);
    let (mut a, mut b) = (n / g, m / g);
    let mut out = Vec::new();
    while a != 0 {
        out.push((a, b));
        let r = b % a;
        b = a;
        a = r;
    }
    out
}

/// Partial quotients of `n/m` for `0 < n < m`.
pub fn quotients_small(n: u64, m: u64) -> Vec<u64> {
    let (mut a, mut b) = (m, n);
    let mut out = Vec::new();
    while b != 0 {
        out.push(a / b);
        let r = a % b;
        a = b;
        b = r;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn three_sevenths() {
        let w = cfe_of_rational(&q(3, 7)).unwrap();
        assert_eq!(w, CfeWord::from_small(0, &[2, 3]).unwrap());
        assert_eq!(w.to_string(), "[0;2,3]");
        assert_eq!(convergents(&w), vec![q(1, 2), q(3, 7)]);
        assert_eq!(orbit(&q(3, 7)).unwrap(), vec![q(3, 7), q(1, 3)]);
        assert_eq!(cfe_len(&q(3, 7)).unwrap(), 2);
    }

    #[test]
    fn three_fifths_and_one_over_m() {
        let w = cfe_of_rational(&q(3, 5)).unwrap();
        assert_eq!(w, CfeWord::from_small(0, &[1, 1, 2]).unwrap());
        assert_eq!(orbit(&q(3, 5)).unwrap(), vec![q(3, 5), q(2, 3), q(1, 2)]);
        assert_eq!(convergents(&w), vec![q(1, 1), q(1, 2), q(3, 5)]);
        for m in 2..50 {
            assert_eq!(cfe_of_rational(&q(1, m)).unwrap().quotients, vec![BigInt::from(m)]);
            assert_eq!(orbit(&q(1, m)).unwrap(), vec![q(1, m)]);
        }
    }

    #[test]
    fn bare_integer_word() {
        let w = CfeWord::from_small(5, &[]).unwrap();
        assert_eq!(convergents(&w), vec![q(5, 1)]);
        assert_eq!(w.value(), q(5, 1));
    }

    #[test]
    fn gauss_map_values() {
        assert_eq!(gauss_map(&q(3, 7)).unwrap(), q(1, 3));
        assert_eq!(gauss_map(&q(1, 1)).unwrap(), q(0, 1));
        assert!(gauss_map(&q(0, 1)).is_err());
        assert!(gauss_map(&q(3, 2)).is_err());
    }

    #[test]
    fn rejects_outside_unit_interval() {
        assert!(matches!(cfe_of_rational(&q(0, 1)), Err(CfeError::OutsideUnitInterval(_))));
        assert!(matches!(cfe_of_rational(&q(7, 3)), Err(CfeError::OutsideUnitInterval(_))));
        assert!(matches!(cfe_of_rational(&q(-1, 3)), Err(CfeError::OutsideUnitInterval(_))));
        assert!(matches!(CfeWord::from_small(0, &[2, 0]), Err(CfeError::NonPositiveQuotient)));
    }

    #[test]
    fn small_helpers_match_big_versions() {
        for m in 2..60u64 {
            for n in 1..m {
                let x = q(n as i64, m as i64);
                let big: Vec<u64> = cfe_of_rational(&x)
                    .unwrap()
                    .quotients
                    .iter()
                    .map(|a| a.try_into().unwrap())
                    .collect();
                assert_eq!(big, quotients_small(n, m));
                let orb: Vec<Rational> = orbit_small(n, m)
                    .into_iter()
                    .map(|(a, b)| q(a as i64, b as i64))
                    .collect();
                assert_eq!(orb, orbit(&x).unwrap());
            }
        }
    }
}
