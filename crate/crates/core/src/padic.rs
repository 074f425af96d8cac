//! Fixed-precision `m`-adic numbers, two-by-two `p`-adic matrices, the
//! Iwasawa decomposition over `Q_p`, and the residue map from diagonal units
//! to `(Z/m)^x`.

use crate::arith::{self, ArithError};
use crate::cfe::Rational;
use crate::hyperbolic::RealMat2;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PadicError {
    #[error("base must be at least 2, got {0}")]
    BadBase(u64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("operands have bases {0} and {1}")]
    BaseMismatch(u64, u64),
    #[error("denominator of {0} shares a factor with the composite base {1}")]
    CompositeDenominator(Rational, u64),
    #[error("leading digit {0} is not a unit mod {1}")]
    NonUnit(u64, u64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("precision exhausted: value is zero to the known digits")]
    PrecisionExhausted,
    #[error("value has negative valuation where an integer was required")]
    NotIntegral,
    #[error("total |det| over all places is {0}, not 1")]
    DeterminantNorm(f64),
    #[error("matrix is singular to the working precision")]
    Singular,
    #[error("reduction certificate failed to verify at place {0}")]
    Certificate(String),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

pub const DEFAULT_PRECISION: usize = 64;

/// `base^val_offset * sum_j digits[j] base^j`, known modulo
/// `base^(val_offset + precision)` where `precision = digits.len()`.
/// The leading digit is nonzero unless every known digit is zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadicNum {
    base: u64,
    val_offset: i64,
    digits: Vec<u64>,
    exact_zero: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valuation {
    Infinite,
    Finite(i64),
    /// All known digits vanish; the valuation is at least this.
    AtLeast(i64),
}

impl Valuation {
    /// Lower bound usable in comparisons, `i64::MAX` for zero.
    pub fn lower_bound(self) -> i64 {
        match self {
            Valuation::Infinite => i64::MAX,
            Valuation::Finite(v) | Valuation::AtLeast(v) => v,
        }
    }

    pub fn is_known(self) -> bool {
        matches!(self, Valuation::Finite(_))
    }
}

fn pow(base: u64, e: usize) -> BigInt {
    Pow::pow(BigInt::from(base), e)
}

fn check_base(base: u64) -> Result<(), PadicError> {
    if base < 2 {
        Err(PadicError::BadBase(base))
    } else {
        Ok(())
    }
}

pub fn is_prime(n: u64) -> bool {
    n >= 2 && arith::factorize(n).map(|f| f.prime_powers == [(n, 1)]).unwrap_or(false)
}

/// Inverse of a unit residue mod `base^precision`, digit by digit.
fn unit_inverse_digits(base: u64, unit: &BigInt, precision: usize) -> Result<BigInt, PadicError> {
    let b = BigInt::from(base);
    let d0 = unit.mod_floor(&b);
    let e = d0.extended_gcd(&b);
    if !e.gcd.is_one() {
        return Err(PadicError::NonUnit(d0.to_u64().unwrap_or(0), base));
    }
    let d0_inv = e.x.mod_floor(&b);
    let modulus = pow(base, precision);
    let mut inv = BigInt::zero();
    let mut place = BigInt::one();
    // Invariant: 1 - unit * inv = 0 mod base^j.
    for _ in 0..precision {
        let rest = (BigInt::one() - unit * &inv).mod_floor(&modulus);
        let digit = ((rest / &place) * &d0_inv).mod_floor(&b);
        inv += &digit * &place;
        place *= &b;
    }
    Ok(inv)
}

impl PadicNum {
    pub fn exact_zero(base: u64, precision: usize) -> Self {
        Self { base, val_offset: 0, digits: vec![0; precision], exact_zero: true }
    }

    /// Normalize `base^offset * residue` known modulo `base^(offset + precision)`.
    fn from_parts(base: u64, mut offset: i64, residue: BigInt, precision: i64) -> Self {
        if precision <= 0 {
            return Self { base, val_offset: offset + precision, digits: Vec::new(), exact_zero: false };
        }
        let mut precision = precision as usize;
        let b = BigInt::from(base);
        let mut r = residue.mod_floor(&pow(base, precision));
        if r.is_zero() {
            return Self { base, val_offset: offset, digits: vec![0; precision], exact_zero: false };
        }
        while r.mod_floor(&b).is_zero() {
            r /= &b;
            offset += 1;
            precision -= 1;
        }
        let mut digits = Vec::with_capacity(precision);
        for _ in 0..precision {
            let (q, d) = r.div_mod_floor(&b);
            digits.push(d.to_u64().expect("digit below base"));
            r = q;
        }
        Self { base, val_offset: offset, digits, exact_zero: false }
    }

    pub fn from_integer(n: i64, base: u64, precision: usize) -> Result<Self, PadicError> {
        Self::from_rational(&Rational::from_integer(n.into()), base, precision)
    }

    /// Expansion of `q` to `precision` digits. A composite base accepts only
    /// denominators coprime to it.
    pub fn from_rational(q: &Rational, base: u64, precision: usize) -> Result<Self, PadicError> {
        check_base(base)?;
        if q.is_zero() {
            return Ok(Self::exact_zero(base, precision));
        }
        let b = BigInt::from(base);
        let (mut num, mut den) = (q.numer().clone(), q.denom().clone());
        let mut offset = 0i64;
        if is_prime(base) {
            while den.mod_floor(&b).is_zero() {
                den /= &b;
                offset -= 1;
            }
        } else if !den.gcd(&b).is_one() {
            return Err(PadicError::CompositeDenominator(q.clone(), base));
        }
        while num.mod_floor(&b).is_zero() {
            num /= &b;
            offset += 1;
        }
        let inv = unit_inverse_digits(base, &den, precision)?;
        Ok(Self::from_parts(base, offset, num * inv, precision as i64))
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn val_offset(&self) -> i64 {
        self.val_offset
    }

    pub fn digits(&self) -> &[u64] {
        &self.digits
    }

    /// Number of known digits after the leading position.
    pub fn precision(&self) -> usize {
        self.digits.len()
    }

    /// Exponent `k` such that the value is known modulo `base^k`.
    pub fn absolute_precision(&self) -> i64 {
        self.val_offset + self.digits.len() as i64
    }

    pub fn is_exact_zero(&self) -> bool {
        self.exact_zero
    }

    pub fn is_zero(&self) -> bool {
        self.exact_zero || self.digits.iter().all(|&d| d == 0)
    }

    pub fn val(&self) -> Valuation {
        if self.exact_zero {
            Valuation::Infinite
        } else if self.is_zero() {
            Valuation::AtLeast(self.absolute_precision())
        } else {
            Valuation::Finite(self.val_offset)
        }
    }

    /// `base^(-val)`, or zero for an exact zero.
    pub fn norm(&self) -> Result<Rational, PadicError> {
        match self.val() {
            Valuation::Infinite => Ok(Rational::zero()),
            Valuation::AtLeast(_) => Err(PadicError::PrecisionExhausted),
            Valuation::Finite(v) => {
                let p = pow(self.base, v.unsigned_abs() as usize);
                Ok(if v >= 0 { Rational::new(BigInt::one(), p) } else { Rational::from_integer(p) })
            }
        }
    }

    fn unit_residue(&self) -> BigInt {
        let b = BigInt::from(self.base);
        self.digits.iter().rev().fold(BigInt::zero(), |acc, &d| acc * &b + d)
    }

    /// The value modulo `base^k`, for values of non-negative valuation.
    pub fn residue_mod(&self, k: usize) -> Result<BigInt, PadicError> {
        if self.exact_zero {
            return Ok(BigInt::zero());
        }
        if self.val_offset < 0 && !self.is_zero() {
            return Err(PadicError::NotIntegral);
        }
        if self.absolute_precision() < k as i64 {
            return Err(PadicError::PrecisionExhausted);
        }
        let shift = self.val_offset.max(0) as usize;
        Ok((self.unit_residue() * pow(self.base, shift)).mod_floor(&pow(self.base, k)))
    }

    fn same_base(&self, o: &Self) -> Result<(), PadicError> {
        if self.base == o.base {
            Ok(())
        } else {
            Err(PadicError::BaseMismatch(self.base, o.base))
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self, PadicError> {
        self.same_base(o)?;
        if self.exact_zero {
            return Ok(o.clone());
        }
        if o.exact_zero {
            return Ok(self.clone());
        }
        let abs = self.absolute_precision().min(o.absolute_precision());
        let v = self.val_offset.min(o.val_offset);
        let lift = |x: &Self| x.unit_residue() * pow(x.base, (x.val_offset - v) as usize);
        Ok(Self::from_parts(self.base, v, lift(self) + lift(o), abs - v))
    }

    pub fn neg(&self) -> Self {
        if self.exact_zero {
            return self.clone();
        }
        Self::from_parts(self.base, self.val_offset, -self.unit_residue(), self.digits.len() as i64)
    }

    pub fn sub(&self, o: &Self) -> Result<Self, PadicError> {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Result<Self, PadicError> {
        self.same_base(o)?;
        if self.exact_zero || o.exact_zero {
            return Ok(Self::exact_zero(self.base, self.precision().max(o.precision())));
        }
        if self.is_zero() || o.is_zero() {
            // The product is known only up to the other factor's valuation.
            let abs = match (self.is_zero(), o.is_zero()) {
                (true, true) => self.absolute_precision() + o.absolute_precision(),
                (true, false) => self.absolute_precision() + o.val_offset,
                _ => o.absolute_precision() + self.val_offset,
            };
            return Ok(Self::from_parts(self.base, abs, BigInt::zero(), 0));
        }
        let precision = self.precision().min(o.precision()) as i64;
        Ok(Self::from_parts(
            self.base,
            self.val_offset + o.val_offset,
            self.unit_residue() * o.unit_residue(),
            precision,
        ))
    }

    /// Inverse; requires a leading digit coprime to the base.
    pub fn inv(&self) -> Result<Self, PadicError> {
        if self.is_zero() {
            return Err(PadicError::DivisionByZero);
        }
        let inv = unit_inverse_digits(self.base, &self.unit_residue(), self.precision())?;
        Ok(Self::from_parts(self.base, -self.val_offset, inv, self.precision() as i64))
    }

    pub fn div(&self, o: &Self) -> Result<Self, PadicError> {
        self.mul(&o.inv()?)
    }

    /// Whether `self = o` modulo `base^k`.
    pub fn congruent(&self, o: &Self, k: i64) -> Result<bool, PadicError> {
        let d = self.sub(o)?;
        if k > d.absolute_precision() && !d.exact_zero {
            return Err(PadicError::PrecisionExhausted);
        }
        Ok(d.val().lower_bound() >= k)
    }

    /// Equality to the common known precision.
    pub fn agrees_with(&self, o: &Self) -> bool {
        match self.sub(o) {
            Ok(d) => d.is_zero(),
            Err(_) => false,
        }
    }

    /// Lowest digits first, e.g. `1 2 3 ... x 5^-1`.
    pub fn digit_string(&self) -> String {
        let ds: Vec<String> = self.digits.iter().map(u64::to_string).collect();
        format!("{} x {}^{}", ds.join(" "), self.base, self.val_offset)
    }
}

impl fmt::Display for PadicNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exact_zero {
            return write!(f, "0");
        }
        write!(f, "{}", self.digit_string())
    }
}

/// Components of `a` in `Q_p` for each prime `p | m`.
pub fn crt_split(a: &PadicNum) -> Result<Vec<PadicNum>, PadicError> {
    let f = arith::factorize(a.base)?;
    f.prime_powers
        .iter()
        .map(|&(p, k)| {
            let prec = k as usize * a.precision();
            if a.exact_zero {
                return Ok(PadicNum::exact_zero(p, prec));
            }
            let scale = Rational::new(BigInt::from(a.base), BigInt::one()).pow(a.val_offset as i32);
            let scale = PadicNum::from_rational(&scale, p, prec)?;
            let unit = PadicNum::from_parts(p, 0, a.unit_residue(), prec as i64);
            scale.mul(&unit)
        })
        .collect()
}

/// Reassemble an element of `Q_m` from its components at the primes of `m`.
pub fn crt_merge(components: &[PadicNum], m: u64) -> Result<PadicNum, PadicError> {
    let f = arith::factorize(m)?;
    check_base(m)?;
    if components.len() != f.prime_powers.len() {
        return Err(ArithError::LengthMismatch.into());
    }
    for (c, &(p, _)) in components.iter().zip(&f.prime_powers) {
        if c.base != p {
            return Err(PadicError::BaseMismatch(c.base, p));
        }
    }
    if components.iter().all(|c| c.exact_zero) {
        let prec = components.iter().zip(&f.prime_powers).map(|(c, &(_, k))| c.precision() / k as usize).min().unwrap_or(0);
        return Ok(PadicNum::exact_zero(m, prec));
    }
    let offset_of = |c: &PadicNum| if c.exact_zero { i64::MAX } else { c.val_offset };
    // Pull out a common power m^v so every component becomes integral.
    let v = components
        .iter()
        .zip(&f.prime_powers)
        .map(|(c, &(_, k))| Integer::div_floor(&offset_of(c), &(k as i64)))
        .min()
        .unwrap_or(0);
    let unscale = Rational::new(BigInt::from(m), BigInt::one()).pow(-v as i32);
    let mut n_common = i64::MAX;
    let mut scaled = Vec::new();
    for (c, &(p, k)) in components.iter().zip(&f.prime_powers) {
        let shifted = c.mul(&PadicNum::from_rational(&unscale, p, c.precision().max(1))?)?;
        let abs = if shifted.exact_zero { i64::MAX } else { shifted.absolute_precision() };
        n_common = n_common.min(Integer::div_floor(&abs, &(k as i64)));
        scaled.push((shifted, p, k));
    }
    if n_common <= 0 {
        return Ok(PadicNum::from_parts(m, v, BigInt::zero(), 0));
    }
    let mut residues = Vec::new();
    let mut moduli = Vec::new();
    for (s, p, k) in &scaled {
        let e = *k as usize * n_common as usize;
        residues.push(s.residue_mod(e)?);
        moduli.push(pow(*p, e));
    }
    let (r, _) = arith::crt_combine(&residues, &moduli)?;
    Ok(PadicNum::from_parts(m, v, r, n_common))
}

/// `|q|_inf * prod_p |q|_p` over the primes dividing numerator or denominator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductFormula {
    pub archimedean: Rational,
    pub places: Vec<(u64, Rational)>,
    pub product: Rational,
}

impl ProductFormula {
    pub fn holds(&self) -> bool {
        self.product.is_one()
    }
}

pub fn product_formula_check(q: &Rational) -> Result<ProductFormula, PadicError> {
    if q.is_zero() {
        return Err(PadicError::DivisionByZero);
    }
    let to_u64 = |v: &BigInt| v.abs().to_u64().ok_or(PadicError::NotIntegral);
    let mut primes: Vec<u64> = arith::factorize(to_u64(q.numer())?)?.primes().collect();
    primes.extend(arith::factorize(to_u64(q.denom())?)?.primes());
    primes.sort_unstable();
    primes.dedup();
    let archimedean = q.abs();
    let mut product = archimedean.clone();
    let mut places = Vec::new();
    for p in primes {
        let n = PadicNum::from_rational(q, p, 4)?.norm()?;
        product *= &n;
        places.push((p, n));
    }
    Ok(ProductFormula { archimedean, places, product })
}

/// `[[a, b], [c, d]]` over `Q_p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadicMat2 {
    pub a: PadicNum,
    pub b: PadicNum,
    pub c: PadicNum,
    pub d: PadicNum,
}

impl PadicMat2 {
    pub fn new(a: PadicNum, b: PadicNum, c: PadicNum, d: PadicNum) -> Result<Self, PadicError> {
        for x in [&b, &c, &d] {
            a.same_base(x)?;
        }
        Ok(Self { a, b, c, d })
    }

    pub fn from_rationals(e: [&Rational; 4], p: u64, precision: usize) -> Result<Self, PadicError> {
        let f = |q: &Rational| PadicNum::from_rational(q, p, precision);
        Self::new(f(e[0])?, f(e[1])?, f(e[2])?, f(e[3])?)
    }

    pub fn identity(p: u64, precision: usize) -> Result<Self, PadicError> {
        let one = PadicNum::from_integer(1, p, precision)?;
        let zero = PadicNum::exact_zero(p, precision);
        Self::new(one.clone(), zero.clone(), zero, one)
    }

    pub fn diag(x: PadicNum, y: PadicNum) -> Result<Self, PadicError> {
        let zero = PadicNum::exact_zero(x.base, x.precision());
        Self::new(x, zero.clone(), zero, y)
    }

    pub fn unipotent(x: PadicNum) -> Result<Self, PadicError> {
        let one = PadicNum::from_integer(1, x.base, x.precision().max(1))?;
        let zero = PadicNum::exact_zero(x.base, x.precision());
        Self::new(one.clone(), x, zero, one)
    }

    pub fn base(&self) -> u64 {
        self.a.base
    }

    pub fn mul(&self, o: &Self) -> Result<Self, PadicError> {
        let dot = |x: &PadicNum, y: &PadicNum, z: &PadicNum, w: &PadicNum| x.mul(y)?.add(&z.mul(w)?);
        Self::new(
            dot(&self.a, &o.a, &self.b, &o.c)?,
            dot(&self.a, &o.b, &self.b, &o.d)?,
            dot(&self.c, &o.a, &self.d, &o.c)?,
            dot(&self.c, &o.b, &self.d, &o.d)?,
        )
    }

    pub fn det(&self) -> Result<PadicNum, PadicError> {
        self.a.mul(&self.d)?.sub(&self.b.mul(&self.c)?)
    }

    pub fn inverse(&self) -> Result<Self, PadicError> {
        let det = self.det()?;
        if det.is_zero() {
            return Err(PadicError::Singular);
        }
        let r = det.inv()?;
        Self::new(self.d.mul(&r)?, self.b.neg().mul(&r)?, self.c.neg().mul(&r)?, self.a.mul(&r)?)
    }

    pub fn entries(&self) -> [&PadicNum; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn agrees_with(&self, o: &Self) -> bool {
        self.entries().iter().zip(o.entries()).all(|(x, y)| x.agrees_with(y))
    }
}

/// Membership in `GL2(Z_p)`: integral entries and a unit determinant.
pub fn is_gl2_zp(g: &PadicMat2) -> Result<bool, PadicError> {
    if !is_prime(g.base()) {
        return Err(PadicError::NotPrime(g.base()));
    }
    for e in g.entries() {
        match e.val() {
            Valuation::Finite(v) if v < 0 => return Ok(false),
            Valuation::AtLeast(k) if k < 0 => return Err(PadicError::PrecisionExhausted),
            _ => {}
        }
    }
    match g.det()?.val() {
        Valuation::Finite(v) => Ok(v == 0),
        Valuation::AtLeast(k) if k > 0 => Ok(false),
        Valuation::Infinite => Ok(false),
        Valuation::AtLeast(_) => Err(PadicError::PrecisionExhausted),
    }
}

/// `g = diag * unip * k` with `unip` upper unipotent and `k` in `GL2(Z_p)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadicIwasawa {
    pub diag: PadicMat2,
    pub unip: PadicMat2,
    pub k: PadicMat2,
}

impl PadicIwasawa {
    pub fn product(&self) -> Result<PadicMat2, PadicError> {
        self.diag.mul(&self.unip)?.mul(&self.k)
    }
}

pub fn iwasawa_p(g: &PadicMat2) -> Result<PadicIwasawa, PadicError> {
    let p = g.base();
    let prec = g.entries().iter().map(|e| e.precision()).max().unwrap_or(DEFAULT_PRECISION);
    let identity = PadicMat2::identity(p, prec)?;
    if is_gl2_zp(g)? {
        return Ok(PadicIwasawa { diag: identity.clone(), unip: identity, k: g.clone() });
    }
    let (vc, vd) = (g.c.val().lower_bound(), g.d.val().lower_bound());
    let (c_known, d_known) = (g.c.val().is_known(), g.d.val().is_known());
    if !c_known && !d_known {
        return Err(PadicError::Singular);
    }
    let one = PadicNum::from_integer(1, p, prec)?;
    let zero = PadicNum::exact_zero(p, prec);
    // Column operation m in GL2(Z_p) clearing the lower-left entry of g m.
    let (m, k) = if d_known && vd <= vc {
        let r = g.c.div(&g.d)?;
        (
            PadicMat2::new(one.clone(), zero.clone(), r.neg(), one.clone())?,
            PadicMat2::new(one.clone(), zero.clone(), r, one.clone())?,
        )
    } else {
        let r = g.d.div(&g.c)?;
        (
            PadicMat2::new(r.neg(), one.clone(), one.clone(), zero.clone())?,
            PadicMat2::new(zero.clone(), one.clone(), one.clone(), r)?,
        )
    };
    let upper = g.mul(&m)?;
    let x = upper.b.div(&upper.a)?;
    let diag = PadicMat2::diag(upper.a.clone(), upper.d.clone())?;
    let unip = PadicMat2::unipotent(x)?;
    Ok(PadicIwasawa { diag, unip, k })
}

/// Element of the adelic group with a real component and finitely many
/// explicit `p`-adic components; all other places are the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct AdelicElement {
    pub real: RealMat2,
    pub places: BTreeMap<u64, PadicMat2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealCertificate {
    /// Diagonal `a` with `u_n = a g o u_t`.
    pub a: RealMat2,
    pub o: RealMat2,
    pub t: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaceCertificate {
    /// Diagonal `a` and `k` in `GL2(Z_p)` with `u_{1/m} = a g k`.
    pub a: PadicMat2,
    pub k: PadicMat2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationReduction {
    pub n: u64,
    pub m: u64,
    pub real: RealCertificate,
    pub places: BTreeMap<u64, PlaceCertificate>,
}

const REAL_CERT_TOL: f64 = 1e-9;

/// Find `n, m` with `(u_n, u_{1/m})` in `A g K` and certify it place by place.
pub fn reduce_translation(g: &AdelicElement) -> Result<TranslationReduction, PadicError> {
    let mut total = g.real.det().abs();
    for (&p, gp) in &g.places {
        if !is_prime(p) || gp.base() != p {
            return Err(PadicError::NotPrime(p));
        }
        let d = gp.det()?;
        total *= d.norm()?.to_f64().unwrap_or(f64::NAN);
    }
    if !((total - 1.0).abs() <= 1e-9) {
        return Err(PadicError::DeterminantNorm(total));
    }
    let real = reduce_real(&g.real)?;
    let mut decomps = BTreeMap::new();
    let mut m = 1u64;
    for (&p, gp) in &g.places {
        let dec = iwasawa_p(gp)?;
        if let Valuation::Finite(v) = dec.unip.b.val() {
            if v < 0 {
                m = p
                    .checked_pow((-v) as u32)
                    .and_then(|q| m.checked_mul(q))
                    .ok_or(PadicError::Certificate(format!("{p}: m overflows")))?;
            }
        }
        decomps.insert(p, dec);
    }
    let inv_m = Rational::new(BigInt::one(), BigInt::from(m));
    let mut places = BTreeMap::new();
    for (&p, dec) in &decomps {
        let gp = &g.places[&p];
        let prec = dec.unip.b.precision().max(8);
        let target = PadicMat2::unipotent(PadicNum::from_rational(&inv_m, p, prec)?)?;
        let alpha = &dec.unip.b;
        let cert = if alpha.val().lower_bound() < 0 {
            let lambda = PadicNum::from_integer(m as i64, p, prec)?.mul(alpha)?;
            let one = PadicNum::from_integer(1, p, prec)?;
            let conj = PadicMat2::diag(one, lambda)?;
            PlaceCertificate {
                a: conj.mul(&dec.diag.inverse()?)?,
                k: dec.k.inverse()?.mul(&conj.inverse()?)?,
            }
        } else {
            PlaceCertificate {
                a: dec.diag.inverse()?,
                k: dec.unip.mul(&dec.k)?.inverse()?.mul(&target)?,
            }
        };
        let check = cert.a.mul(gp)?.mul(&cert.k)?;
        let diag_ok = cert.a.b.is_zero() && cert.a.c.is_zero();
        if !(diag_ok && check.agrees_with(&target) && is_gl2_zp(&cert.k)?) {
            return Err(PadicError::Certificate(p.to_string()));
        }
        places.insert(p, cert);
    }
    Ok(TranslationReduction { n: real.0, m, real: real.1, places })
}

fn reduce_real(g: &RealMat2) -> Result<(u64, RealCertificate), PadicError> {
    let r = g.c.hypot(g.d);
    if r == 0.0 || !r.is_finite() {
        return Err(PadicError::Singular);
    }
    // g = diag(alpha, r) u_x k with k a rotation fixing the bottom row to (0, r).
    let k = RealMat2::new(g.d / r, -g.c / r, g.c / r, g.d / r);
    let upper = g.mul(&k.transpose());
    let alpha = upper.a;
    let x = upper.b / alpha;
    let d_inv = RealMat2::new(1.0 / alpha, 0.0, 0.0, 1.0 / r);
    let flip = RealMat2::new(1.0, 0.0, 0.0, -1.0);
    let (a, o, ax) = if x >= 0.0 {
        (d_inv, k.transpose(), x)
    } else {
        (flip.mul(&d_inv), k.transpose().mul(&flip), -x)
    };
    let n = ax.floor();
    if n > u64::MAX as f64 / 2.0 {
        return Err(PadicError::Certificate("real: translation too large".into()));
    }
    let t = n - ax;
    let check = a.mul(g).mul(&o).mul(&RealMat2::unipotent(t));
    let residual = check.scaled_residual(&RealMat2::unipotent(n));
    if residual > REAL_CERT_TOL {
        return Err(PadicError::Certificate(format!("real: residual {residual:e}")));
    }
    Ok((n as u64, RealCertificate { a, o, t, residual }))
}

/// Diagonal units `diag(alpha_p, beta_p)` at finitely many primes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DiagonalAdele {
    pub places: BTreeMap<u64, (PadicNum, PadicNum)>,
}

/// `psi_m(a) = l` with `l = alpha_p / beta_p mod p^k` for every `p^k || m`.
pub fn psi_m(a: &DiagonalAdele, m: u64) -> Result<u64, PadicError> {
    let f = arith::factorize(m)?;
    let mut residues = Vec::new();
    let mut moduli = Vec::new();
    for &(p, k) in &f.prime_powers {
        let xi = match a.places.get(&p) {
            None => BigInt::one(),
            Some((alpha, beta)) => {
                for x in [alpha, beta] {
                    if x.base != p {
                        return Err(PadicError::BaseMismatch(x.base, p));
                    }
                    if x.val() != Valuation::Finite(0) {
                        return Err(PadicError::NonUnit(x.digits.first().copied().unwrap_or(0), p));
                    }
                }
                alpha.div(beta)?.residue_mod(k as usize)?
            }
        };
        residues.push(xi);
        moduli.push(pow(p, k as usize));
    }
    let (l, _) = arith::crt_combine(&residues, &moduli)?;
    Ok(l.to_u64().expect("residue below m"))
}

/// Whether `u_{-l/m} diag(alpha_p, beta_p) u_{1/m}` is in `GL2(Z_p)` for every
/// `p | m`, with `l = psi_m(a)`.
pub fn gamma_fix_check(a: &DiagonalAdele, m: u64) -> Result<bool, PadicError> {
    let l = psi_m(a, m)?;
    gamma_fix_check_with(a, m, l)
}

/// As [`gamma_fix_check`] but with a caller-chosen residue `l`.
pub fn gamma_fix_check_with(a: &DiagonalAdele, m: u64, l: u64) -> Result<bool, PadicError> {
    let f = arith::factorize(m)?;
    for &(p, k) in &f.prime_powers {
        let Some((alpha, beta)) = a.places.get(&p) else {
            let q = p.pow(k);
            if l % q != 1 % q {
                return Ok(false);
            }
            continue;
        };
        let prec = alpha.precision().min(beta.precision());
        let shift = |q: Rational| PadicNum::from_rational(&q, p, prec).and_then(PadicMat2::unipotent);
        let left = shift(Rational::new(-BigInt::from(l), BigInt::from(m)))?;
        let right = shift(Rational::new(BigInt::one(), BigInt::from(m)))?;
        let middle = PadicMat2::diag(alpha.clone(), beta.clone())?;
        let g = left.mul(&middle)?.mul(&right)?;
        if !g.det()?.agrees_with(&middle.det()?) || !is_gl2_zp(&g)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// How often each residue is hit by `psi_m` as `(alpha_p, beta_p)` run over
/// all unit residues modulo `p^k`.
pub fn psi_fiber_counts(m: u64) -> Result<BTreeMap<u64, u64>, PadicError> {
    let f = arith::factorize(m)?;
    let mut per_prime: Vec<Vec<(u64, PadicNum, PadicNum)>> = Vec::new();
    for &(p, k) in &f.prime_powers {
        let q = p.pow(k);
        let units = arith::units_mod(q)?;
        let mut pairs = Vec::new();
        for &x in &units {
            for &y in &units {
                let px = PadicNum::from_integer(x as i64, p, k as usize + 2)?;
                let py = PadicNum::from_integer(y as i64, p, k as usize + 2)?;
                pairs.push((p, px, py));
            }
        }
        per_prime.push(pairs);
    }
    let mut counts = BTreeMap::new();
    let mut stack: Vec<usize> = vec![0; per_prime.len()];
    loop {
        let mut adele = DiagonalAdele::default();
        for (i, &j) in stack.iter().enumerate() {
            let (p, x, y) = &per_prime[i][j];
            adele.places.insert(*p, (x.clone(), y.clone()));
        }
        *counts.entry(psi_m(&adele, m)?).or_insert(0) += 1;
        let mut i = 0;
        loop {
            if i == stack.len() {
                return Ok(counts);
            }
            stack[i] += 1;
            if stack[i] < per_prime[i].len() {
                break;
            }
            stack[i] = 0;
            i += 1;
        }
    }
}
