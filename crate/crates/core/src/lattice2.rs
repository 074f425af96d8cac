//! Exact rank-two lattices `sqrt(s) * Z^2 B` in the row convention, where a
//! lattice is the set of integer row vectors times its basis matrix.

use crate::arith::{self, ArithError};
use crate::cfe::Rational;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("basis is singular")]
    Singular,
    #[error("scale must be positive")]
    NonPositiveScale,
    #[error("scales differ by an irrational factor")]
    ScaleMismatch,
    #[error("{0} is not a unit modulo {1}")]
    NotUnit(u64, u64),
    #[error("no mirror index found for {0} mod {1}")]
    NoMirror(u64, u64),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

pub type IntBasis = [[BigInt; 2]; 2];

/// `sqrt(scale_sq)` times the row span of an integer basis, stored in Hermite
/// normal form with the content of the basis moved into the scale.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScaledLattice2 {
    scale_sq: Rational,
    basis: IntBasis,
}

fn big(v: i64) -> BigInt {
    BigInt::from(v)
}

fn int_basis(rows: [[i64; 2]; 2]) -> IntBasis {
    rows.map(|r| r.map(big))
}

fn det(b: &IntBasis) -> BigInt {
    &b[0][0] * &b[1][1] - &b[0][1] * &b[1][0]
}

/// Row-style Hermite normal form `[[a, b], [0, d]]` with `a, d > 0` and `0 <= b < d`.
pub fn hermite_normal_form(b: &IntBasis) -> Result<IntBasis, LatticeError> {
    if det(b).is_zero() {
        return Err(LatticeError::Singular);
    }
    let [r1, r2] = b;
    let e = r1[0].extended_gcd(&r2[0]);
    let g = e.gcd.clone();
    let mut top = [&e.x * &r1[0] + &e.y * &r2[0], &e.x * &r1[1] + &e.y * &r2[1]];
    let (p, q) = (&r2[0] / &g, &r1[0] / &g);
    let mut bottom = [BigInt::zero(), &p * &r1[1] - &q * &r2[1]];
    if top[0].is_negative() {
        top = [-&top[0], -&top[1]];
    }
    if bottom[1].is_negative() {
        bottom[1] = -&bottom[1];
    }
    top[1] = top[1].mod_floor(&bottom[1]);
    Ok([top, bottom])
}

/// Invariant factors `(d1, d2)` with `d1 | d2` of a nonsingular integer matrix.
pub fn smith_invariants(b: &IntBasis) -> Result<(BigInt, BigInt), LatticeError> {
    let d = det(b).abs();
    if d.is_zero() {
        return Err(LatticeError::Singular);
    }
    let d1 = b.iter().flatten().fold(BigInt::zero(), |g, v| g.gcd(v));
    let d2 = &d / &d1;
    Ok((d1, d2))
}

fn rational_sqrt(q: &Rational) -> Option<Rational> {
    let (n, d) = (q.numer().sqrt(), q.denom().sqrt());
    (&n * &n == *q.numer() && &d * &d == *q.denom()).then(|| Rational::new(n, d))
}

/// Index and quotient structure of a sublattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inclusion {
    pub index: BigInt,
    /// Invariant factors of the inclusion matrix.
    pub invariants: (BigInt, BigInt),
}

impl Inclusion {
    pub fn is_cyclic(&self) -> bool {
        self.invariants.0.is_one()
    }
}

impl ScaledLattice2 {
    pub fn new(scale_sq: Rational, basis: IntBasis) -> Result<Self, LatticeError> {
        if !scale_sq.is_positive() {
            return Err(LatticeError::NonPositiveScale);
        }
        let hnf = hermite_normal_form(&basis)?;
        let content = hnf.iter().flatten().fold(BigInt::zero(), |g, v| g.gcd(v));
        let basis = hnf.map(|r| r.map(|v| v / &content));
        let scale_sq = scale_sq * Rational::from_integer(&content * &content);
        Ok(Self { scale_sq, basis })
    }

    pub fn integer(rows: [[i64; 2]; 2]) -> Result<Self, LatticeError> {
        Self::new(Rational::one(), int_basis(rows))
    }

    pub fn scale_sq(&self) -> &Rational {
        &self.scale_sq
    }

    pub fn basis(&self) -> &IntBasis {
        &self.basis
    }

    /// Area of a fundamental parallelogram.
    pub fn covolume(&self) -> Rational {
        &self.scale_sq * Rational::from_integer(det(&self.basis).abs())
    }

    /// Right multiplication by `a(ln m)`, up to the common factor `1/sqrt(m)`
    /// kept in the scale: rows `(x, y)` become `(x, m y) / sqrt(m)`.
    pub fn apply_a_ln_m(&self, m: u64) -> Result<Self, LatticeError> {
        if m == 0 {
            return Err(ArithError::ZeroModulus.into());
        }
        let m = BigInt::from(m);
        let basis = self.basis.clone().map(|[x, y]| [x, y * &m]);
        Self::new(&self.scale_sq / Rational::from_integer(m), basis)
    }

    /// Swap the two coordinates of every vector.
    pub fn tau_mirror(&self) -> Self {
        let basis = self.basis.clone().map(|[x, y]| [y, x]);
        Self::new(self.scale_sq.clone(), basis).expect("swap keeps the basis nonsingular")
    }

    /// Whether `v` lies in the lattice.
    pub fn contains(&self, v: [&Rational; 2]) -> bool {
        if v.iter().all(|c| c.is_zero()) {
            return true;
        }
        let Some(r) = rational_sqrt(&self.scale_sq) else {
            return false;
        };
        // Solve c B = v / r for rational coefficients c.
        let w = [v[0] / &r, v[1] / &r];
        let b = &self.basis;
        let d = Rational::from_integer(det(b));
        let c0 = (&w[0] * Rational::from_integer(b[1][1].clone()) - &w[1] * Rational::from_integer(b[1][0].clone())) / &d;
        let c1 = (&w[1] * Rational::from_integer(b[0][0].clone()) - &w[0] * Rational::from_integer(b[0][1].clone())) / &d;
        c0.is_integer() && c1.is_integer()
    }

    /// `Ok(Some(_))` when `self` is a sublattice of `sup`.
    pub fn inclusion_in(&self, sup: &Self) -> Result<Option<Inclusion>, LatticeError> {
        let r = rational_sqrt(&(&self.scale_sq / &sup.scale_sq)).ok_or(LatticeError::ScaleMismatch)?;
        let d = det(&sup.basis);
        let s = &sup.basis;
        let adj = [[s[1][1].clone(), -&s[0][1]], [-&s[1][0], s[0][0].clone()]];
        let mut m: [[BigInt; 2]; 2] = Default::default();
        for i in 0..2 {
            for j in 0..2 {
                let e = &self.basis[i][0] * &adj[0][j] + &self.basis[i][1] * &adj[1][j];
                let v = Rational::from_integer(e) * &r / Rational::from_integer(d.clone());
                if !v.is_integer() {
                    return Ok(None);
                }
                m[i][j] = v.to_integer();
            }
        }
        let invariants = smith_invariants(&m)?;
        Ok(Some(Inclusion { index: det(&m).abs(), invariants }))
    }
}

/// `L_{n/m} = span{(0, 1), (1, n/m)}`.
pub fn make_l_n_over_m(n: u64, m: u64) -> Result<ScaledLattice2, LatticeError> {
    if m == 0 {
        return Err(ArithError::ZeroModulus.into());
    }
    if n.gcd(&m) != 1 {
        return Err(LatticeError::NotUnit(n, m));
    }
    let (n, m) = (n as i64, m as i64);
    ScaledLattice2::new(Rational::new(big(1), big(m * m)), int_basis([[0, m], [m, n]]))
}

/// `L_m = span{(0, 1), (m, 0)}`.
pub fn make_l_m(m: u64) -> Result<ScaledLattice2, LatticeError> {
    if m == 0 {
        return Err(ArithError::ZeroModulus.into());
    }
    ScaledLattice2::integer([[0, 1], [m as i64, 0]])
}

/// `{(k1, k2) : k1 + k2 = 0 mod m}`, spanned by the rows of the transpose of
/// `[[m, -1], [0, 1]]`.
pub fn congruence_lattice(m: u64) -> Result<ScaledLattice2, LatticeError> {
    if m == 0 {
        return Err(ArithError::ZeroModulus.into());
    }
    ScaledLattice2::integer([[m as i64, 0], [-1, 1]])
}

/// The unit `n'` with `L_{n'/m} a(ln m) = tau(L_{n/m} a(ln m))`.
pub fn find_mirror_index(n: u64, m: u64) -> Result<u64, LatticeError> {
    let target = make_l_n_over_m(n, m)?.apply_a_ln_m(m)?.tau_mirror();
    for k in arith::units_mod(m)? {
        if make_l_n_over_m(k, m)?.apply_a_ln_m(m)? == target {
            return Ok(k);
        }
    }
    Err(LatticeError::NoMirror(n, m))
}

/// Mirror index of every unit mod `m`, by exact lattice equality.
pub fn mirror_table(m: u64) -> Result<Vec<(u64, u64)>, LatticeError> {
    let units = arith::units_mod(m)?;
    let mut by_lattice = HashMap::with_capacity(units.len());
    for &k in &units {
        by_lattice.insert(make_l_n_over_m(k, m)?.apply_a_ln_m(m)?, k);
    }
    units
        .iter()
        .map(|&n| {
            let target = make_l_n_over_m(n, m)?.apply_a_ln_m(m)?.tau_mirror();
            by_lattice.get(&target).map(|&k| (n, k)).ok_or(LatticeError::NoMirror(n, m))
        })
        .collect()
}
