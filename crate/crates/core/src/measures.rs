//! Orbit measures on `[0, 1]`, their family averages, and comparison with the
//! Gauss measure.

use crate::arith::{self, ArithError};
use crate::cfe::{self, CfeError, Rational};
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeasureError {
    #[error(transparent)]
    Cfe(#[from] CfeError),
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error("weights must be non-negative and sum to 1")]
    NotProbability,
    #[error("modulus must be at least 2")]
    ModulusTooSmall,
    #[error("need at least one bin")]
    NoBins,
}

/// Finitely supported probability measure with exact atoms and weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalMeasure {
    atoms: Vec<(Rational, Rational)>,
}

impl EmpiricalMeasure {
    /// Merges repeated positions and checks that the weights sum to one.
    pub fn from_weighted<I>(points: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (Rational, Rational)>,
    {
        let mut merged: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (x, w) in points {
            if w < Rational::zero() {
                return Err(MeasureError::NotProbability);
            }
            *merged.entry(x).or_insert_with(Rational::zero) += w;
        }
        let total: Rational = merged.values().cloned().sum();
        if !total.is_one() {
            return Err(MeasureError::NotProbability);
        }
        Ok(Self { atoms: merged.into_iter().collect() })
    }

    /// Sorted `(position, weight)` pairs.
    pub fn atoms(&self) -> &[(Rational, Rational)] {
        &self.atoms
    }

    pub fn weight_at(&self, x: &Rational) -> Rational {
        self.atoms
            .binary_search_by(|(a, _)| a.cmp(x))
            .map(|i| self.atoms[i].1.clone())
            .unwrap_or_else(|_| Rational::zero())
    }

    /// Exact `mu([0, x])`.
    pub fn cdf(&self, x: &Rational) -> Rational {
        self.atoms.iter().take_while(|(a, _)| a <= x).map(|(_, w)| w.clone()).sum()
    }
}

/// Uniform measure on the Gauss orbit of `x`.
pub fn orbit_measure(x: &Rational) -> Result<EmpiricalMeasure, MeasureError> {
    let pts = cfe::orbit(x)?;
    let w = Rational::new(BigInt::one(), BigInt::from(pts.len()));
    EmpiricalMeasure::from_weighted(pts.into_iter().map(|p| (p, w.clone())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyMode {
    /// Average of the orbit measures of `n/m` over `n` coprime to `m`.
    OrbitUniform,
    /// Uniform over all orbit points of the family, counted with multiplicity.
    PointUniform,
}

impl FamilyMode {
    pub fn name(self) -> &'static str {
        match self {
            FamilyMode::OrbitUniform => "orbit_uniform",
            FamilyMode::PointUniform => "point_uniform",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct Frac(u64, u64);

impl Ord for Frac {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.0 as u128 * other.1 as u128).cmp(&(other.0 as u128 * self.1 as u128))
    }
}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Family average of the orbit measures of `n/m`, `n` ranging over units mod `m`.
pub fn family_average(m: u64, mode: FamilyMode) -> Result<EmpiricalMeasure, MeasureError> {
    if m < 2 {
        return Err(MeasureError::ModulusTooSmall);
    }
    let units = arith::units_mod(m)?;
    let orbits: Vec<Vec<(u64, u64)>> = units.iter().map(|&n| cfe::orbit_small(n, m)).collect();
    let total_points: usize = orbits.iter().map(Vec::len).sum();
    // Accumulate integer numerators over a per-length common denominator.
    let mut per_len: BTreeMap<Frac, BTreeMap<usize, u64>> = BTreeMap::new();
    for orb in &orbits {
        for &(a, b) in orb {
            *per_len.entry(Frac(a, b)).or_default().entry(orb.len()).or_insert(0) += 1;
        }
    }
    let phi = Rational::from_integer(BigInt::from(units.len()));
    let points = Rational::from_integer(BigInt::from(total_points));
    let atoms = per_len.into_iter().map(|(Frac(a, b), counts)| {
        let pos = Rational::new(a.into(), b.into());
        let w = match mode {
            FamilyMode::OrbitUniform => {
                let s: Rational = counts
                    .iter()
                    .map(|(&len, &c)| Rational::new(c.into(), len.into()))
                    .sum();
                s / &phi
            }
            FamilyMode::PointUniform => {
                Rational::from_integer(counts.values().sum::<u64>().into()) / &points
            }
        };
        (pos, w)
    });
    EmpiricalMeasure::from_weighted(atoms)
}

/// CDF of the Gauss measure, `log2(1 + x)` on `[0, 1]`.
pub fn gauss_cdf(x: f64) -> f64 {
    x.clamp(0.0, 1.0).ln_1p() / std::f64::consts::LN_2
}

/// `sup_x |F_mu(x) - F_gauss(x)|`, attained at an atom from one side.
pub fn kolmogorov_distance(mu: &EmpiricalMeasure) -> f64 {
    let mut below = Rational::zero();
    let mut best = 0.0f64;
    for (x, w) in mu.atoms() {
        let g = gauss_cdf(x.to_f64().unwrap_or(f64::NAN));
        let above = &below + w;
        let lo = below.to_f64().unwrap_or(f64::NAN);
        let hi = above.to_f64().unwrap_or(f64::NAN);
        best = best.max((lo - g).abs()).max((hi - g).abs());
        below = above;
    }
    best
}

/// Total variation between `mu` and the Gauss measure after binning `[0, 1]`
/// into `bins` equal cells.
pub fn binned_total_variation(mu: &EmpiricalMeasure, bins: usize) -> Result<f64, MeasureError> {
    if bins == 0 {
        return Err(MeasureError::NoBins);
    }
    let mut mass = vec![0.0f64; bins];
    for (x, w) in mu.atoms() {
        let xf = x.to_f64().unwrap_or(0.0);
        let k = ((xf * bins as f64) as usize).min(bins - 1);
        mass[k] += w.to_f64().unwrap_or(0.0);
    }
    let tv = mass
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let r = gauss_cdf((k + 1) as f64 / bins as f64) - gauss_cdf(k as f64 / bins as f64);
            (m - r).abs()
        })
        .sum::<f64>();
    Ok(0.5 * tv)
}

/// Largest digit with its own bucket; larger digits share the tail bucket.
pub const KUZMIN_MAX_DIGIT: u64 = 30;

/// Limiting frequency of the digit `k`, `log2(1 + 1/(k(k+2)))`.
pub fn kuzmin_frequency(k: u64) -> f64 {
    let k = k as f64;
    (1.0 / (k * (k + 2.0))).ln_1p() / std::f64::consts::LN_2
}

/// Limiting frequency of digits above `max_digit`, `log2((K+2)/(K+1))`.
pub fn kuzmin_tail_frequency(max_digit: u64) -> f64 {
    (1.0 / (max_digit as f64 + 1.0)).ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitHistogram {
    /// Counts for digits `1..=KUZMIN_MAX_DIGIT`, index `k - 1`.
    pub counts: Vec<u64>,
    pub tail: u64,
    pub total: u64,
}

impl DigitHistogram {
    pub fn count(&self, k: u64) -> u64 {
        if k == 0 {
            0
        } else if k > KUZMIN_MAX_DIGIT {
            self.tail
        } else {
            self.counts[(k - 1) as usize]
        }
    }

    /// Largest gap between observed and limiting frequencies, tail included.
    pub fn max_frequency_gap(&self) -> f64 {
        let total = self.total.max(1) as f64;
        let body = (1..=KUZMIN_MAX_DIGIT)
            .map(|k| (self.count(k) as f64 / total - kuzmin_frequency(k)).abs())
            .fold(0.0, f64::max);
        body.max((self.tail as f64 / total - kuzmin_tail_frequency(KUZMIN_MAX_DIGIT)).abs())
    }
}

/// Partial quotients of `n/m` for all units `n` and all `m` in the range.
pub fn kuzmin_histogram(ms: impl IntoIterator<Item = u64>) -> Result<DigitHistogram, MeasureError> {
    let mut counts = vec![0u64; KUZMIN_MAX_DIGIT as usize];
    let (mut tail, mut total) = (0u64, 0u64);
    for m in ms {
        if m < 2 {
            return Err(MeasureError::ModulusTooSmall);
        }
        for n in arith::units_mod(m)? {
            for a in cfe::quotients_small(n, m) {
                total += 1;
                if a > KUZMIN_MAX_DIGIT {
                    tail += 1;
                } else {
                    counts[(a - 1) as usize] += 1;
                }
            }
        }
    }
    Ok(DigitHistogram { counts, tail, total })
}
