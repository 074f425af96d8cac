//! The upper half-plane, reduction to the standard fundamental domain of
//! `SL2(Z)`, geodesic coding, matrix identities for the diagonal and
//! unipotent flows, and sampling experiments on the modular surface.

use crate::arith::{self, ArithError};
use crate::cfe::Rational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypError {
    #[error("point {0} + {1}i is not in the upper half-plane")]
    NotInUpperHalfPlane(f64, f64),
    #[error("reduction exceeded {0} moves")]
    IterationCap(usize),
    #[error("integer matrix overflow during reduction")]
    Overflow,
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("geodesic sampling step too coarse near y = {0}")]
    StepTooCoarse(f64),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

/// Cap on translation batches plus inversions in one reduction.
pub const MAX_REDUCTION_MOVES: usize = 10_000;
const CIRCLE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealMat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RealMat2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0)
    }

    /// `a(t) = diag(e^{-t/2}, e^{t/2})`.
    pub fn diag_flow(t: f64) -> Self {
        Self::new((-t / 2.0).exp(), 0.0, 0.0, (t / 2.0).exp())
    }

    /// `u_x = [[1, x], [0, 1]]`.
    pub fn unipotent(x: f64) -> Self {
        Self::new(1.0, x, 0.0, 1.0)
    }

    /// The coordinate swap `[[0, 1], [1, 0]]`.
    pub const fn tau() -> Self {
        Self::new(0.0, 1.0, 1.0, 0.0)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Self::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Entrywise `max |self - other|` divided by `max(1, max |other|)`.
    pub fn scaled_residual(&self, other: &Self) -> f64 {
        let diff = self
            .entries()
            .iter()
            .zip(other.entries())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        diff / other.max_abs_entry().max(1.0)
    }

    /// Möbius action `(az + b) / (cz + d)`.
    pub fn act(&self, z: HPoint) -> HPoint {
        let (nr, ni) = (self.a * z.x + self.b, self.a * z.y);
        let (dr, di) = (self.c * z.x + self.d, self.c * z.y);
        let den = dr * dr + di * di;
        HPoint::new((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPoint {
    pub x: f64,
    pub y: f64,
}

impl HPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn abs_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn distance(&self, o: &HPoint) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        (1.0 + (dx * dx + dy * dy) / (2.0 * self.y * o.y)).acosh()
    }

    fn check(self) -> Result<Self, HypError> {
        if self.y > 0.0 && self.x.is_finite() && self.y.is_finite() {
            Ok(self)
        } else {
            Err(HypError::NotInUpperHalfPlane(self.x, self.y))
        }
    }
}

/// Closure of the fundamental domain, up to `tol`.
pub fn in_closed_domain(z: HPoint, tol: f64) -> bool {
    z.x.abs() <= 0.5 + tol && z.abs_sq() >= 1.0 - tol
}

/// Integer matrix in `SL2(Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntMat2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl IntMat2 {
    pub const IDENTITY: Self = Self { a: 1, b: 0, c: 0, d: 1 };
    pub const S: Self = Self { a: 0, b: -1, c: 1, d: 0 };

    pub const fn shift(k: i64) -> Self {
        Self { a: 1, b: k, c: 0, d: 1 }
    }

    pub fn checked_mul(&self, o: &Self) -> Option<Self> {
        let f = |x: i64, y: i64, z: i64, w: i64| x.checked_mul(y)?.checked_add(z.checked_mul(w)?);
        Some(Self {
            a: f(self.a, o.a, self.b, o.c)?,
            b: f(self.a, o.b, self.b, o.d)?,
            c: f(self.c, o.a, self.d, o.c)?,
            d: f(self.c, o.b, self.d, o.d)?,
        })
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Equality in `PSL2(Z)`.
    pub fn eq_projective(&self, o: &Self) -> bool {
        self == o || (self.a == -o.a && self.b == -o.b && self.c == -o.c && self.d == -o.d)
    }

    pub fn to_real(&self) -> RealMat2 {
        RealMat2::new(self.a as f64, self.b as f64, self.c as f64, self.d as f64)
    }

    pub fn act(&self, z: HPoint) -> HPoint {
        self.to_real().act(z)
    }
}

/// A move of the reduction algorithm: `T^k` (`z -> z + k`) or `S` (`z -> -1/z`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    Shift(i64),
    Invert,
}

impl Step {
    fn matrix(self) -> IntMat2 {
        match self {
            Step::Shift(k) => IntMat2::shift(k),
            Step::Invert => IntMat2::S,
        }
    }
}

/// Moves applied in order to bring a point into the fundamental domain.
/// Consecutive shifts are merged and `S` never follows `S`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReductionWord {
    steps: Vec<Step>,
}

impl ReductionWord {
    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    fn push(&mut self, s: Step) {
        match (self.steps.last_mut(), s) {
            (Some(Step::Shift(k)), Step::Shift(j)) => {
                *k += j;
                if *k == 0 {
                    self.steps.pop();
                }
            }
            _ => self.steps.push(s),
        }
    }

    /// Number of single moves `T`, `T^-1` or `S`.
    pub fn move_count(&self) -> usize {
        self.steps
            .iter()
            .map(|s| match s {
                Step::Shift(k) => k.unsigned_abs() as usize,
                Step::Invert => 1,
            })
            .sum()
    }

    /// Word in the letters `T`, `T^-1`, `S`, e.g. `T^-5 S T`.
    pub fn letters(&self) -> String {
        self.steps
            .iter()
            .map(|s| match *s {
                Step::Invert => "S".to_string(),
                Step::Shift(1) => "T".to_string(),
                Step::Shift(k) => format!("T^{k}"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// The element `g` of `SL2(Z)` with `g z = z_F`.
    pub fn matrix(&self) -> Result<IntMat2, HypError> {
        self.steps.iter().try_fold(IntMat2::IDENTITY, |g, s| {
            s.matrix().checked_mul(&g).ok_or(HypError::Overflow)
        })
    }

    pub fn inverse(&self) -> ReductionWord {
        let steps = self
            .steps
            .iter()
            .rev()
            .map(|s| match *s {
                Step::Shift(k) => Step::Shift(-k),
                Step::Invert => Step::Invert,
            })
            .collect();
        ReductionWord { steps }
    }

    pub fn apply(&self, z: HPoint) -> Result<HPoint, HypError> {
        Ok(self.matrix()?.act(z))
    }
}

fn reduce_loop(z: HPoint, mut word: Option<&mut ReductionWord>) -> Result<HPoint, HypError> {
    let mut w = z.check()?;
    for _ in 0..MAX_REDUCTION_MOVES {
        let k = (w.x + 0.5).floor();
        if k != 0.0 {
            if k.abs() > i64::MAX as f64 / 4.0 {
                return Err(HypError::Overflow);
            }
            w.x -= k;
            if let Some(word) = word.as_deref_mut() {
                word.push(Step::Shift(-(k as i64)));
            }
        }
        let r2 = w.abs_sq();
        let invert = r2 < 1.0 - CIRCLE_TOL || (r2 <= 1.0 + CIRCLE_TOL && w.x > 0.0);
        if !invert {
            return Ok(w);
        }
        w = HPoint::new(-w.x / r2, w.y / r2);
        if let Some(word) = word.as_deref_mut() {
            word.push(Step::Invert);
        }
    }
    Err(HypError::IterationCap(MAX_REDUCTION_MOVES))
}

/// Reduce `z` into the fundamental domain `|Re z| <= 1/2, |z| >= 1`, with the
/// left half of the boundary kept. The image is recomputed from the original
/// point with the exact integer matrix of the word.
pub fn reduce_to_f(z: HPoint) -> Result<(HPoint, ReductionWord), HypError> {
    let mut word = ReductionWord::default();
    reduce_loop(z, Some(&mut word))?;
    let zf = word.apply(z)?;
    Ok((zf, word))
}

/// Reduced point only, by iterating the moves on the point itself.
pub fn reduce_point(z: HPoint) -> Result<HPoint, HypError> {
    reduce_loop(z, None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    Finite(f64),
    Infinity,
}

fn ratio(num: f64, den: f64) -> Endpoint {
    if den == 0.0 {
        Endpoint::Infinity
    } else {
        Endpoint::Finite(num / den)
    }
}

/// Backward and forward endpoints `(a/c, b/d)` of the geodesic through `g`.
pub fn geodesic_endpoints(g: &RealMat2) -> (Endpoint, Endpoint) {
    (ratio(g.a, g.c), ratio(g.b, g.d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Crossing {
    Left,
    Right,
    Bottom,
}

impl Crossing {
    pub fn is_side(self) -> bool {
        self != Crossing::Bottom
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeodesicCode {
    pub crossings: Vec<Crossing>,
}

impl GeodesicCode {
    /// Maximal runs of identical crossings.
    pub fn runs(&self) -> Vec<(Crossing, usize)> {
        let mut out: Vec<(Crossing, usize)> = Vec::new();
        for &c in &self.crossings {
            match out.last_mut() {
                Some((last, n)) if *last == c => *n += 1,
                _ => out.push((c, 1)),
            }
        }
        out
    }

    pub fn side_run_lengths(&self) -> Vec<usize> {
        self.runs().into_iter().filter(|(c, _)| c.is_side()).map(|(_, n)| n).collect()
    }
}

const GEODESIC_MAX_DEPTH: u32 = 40;

/// Walk down the vertical geodesic `x + iy` from `y_start` to `y_end` in
/// steps of hyperbolic length `step`, recording the sides of the fundamental
/// domain crossed by its image in the quotient.
pub fn geodesic_code(x: &Rational, y_start: f64, y_end: f64, step: f64) -> Result<GeodesicCode, HypError> {
    if !(y_end > 0.0 && y_start > y_end && step > 0.0 && y_start.is_finite()) {
        return Err(HypError::OutOfRange(format!(
            "need y_start > y_end > 0 and step > 0, got {y_start}, {y_end}, {step}"
        )));
    }
    let xf = x.to_f64().ok_or_else(|| HypError::OutOfRange("x".into()))?;
    let point = |s: f64| HPoint::new(xf, s.exp());
    let (_, w0) = reduce_to_f(point(y_start.ln()))?;
    let mut walk = Walk { g: w0.matrix()?, crossings: Vec::new() };
    let (mut s, s_end) = (y_start.ln(), y_end.ln());
    while s > s_end {
        let next = (s - step).max(s_end);
        walk.segment(&point, s, next, 0)?;
        s = next;
    }
    Ok(GeodesicCode { crossings: walk.crossings })
}

/// Shortest word of at most three moves equal to `word` up to sign, or
/// `word` itself when none is.
fn shortest_equivalent(word: &ReductionWord) -> Result<ReductionWord, HypError> {
    let target = word.matrix()?;
    let letters = [Step::Shift(1), Step::Shift(-1), Step::Invert];
    let mut frontier = vec![ReductionWord::default()];
    for _ in 0..3 {
        let mut next = Vec::new();
        for w in &frontier {
            for &s in &letters {
                let mut c = w.clone();
                c.push(s);
                if c.move_count() != w.move_count() + 1 {
                    continue;
                }
                if c.matrix()?.eq_projective(&target) {
                    return Ok(c);
                }
                next.push(c);
            }
        }
        frontier = next;
    }
    Ok(word.clone())
}

struct Walk {
    g: IntMat2,
    crossings: Vec<Crossing>,
}

impl Walk {
    fn segment(&mut self, point: &impl Fn(f64) -> HPoint, from: f64, to: f64, depth: u32) -> Result<(), HypError> {
        let (_, word) = reduce_to_f(self.g.act(point(to)))?;
        let moves = word.move_count();
        if moves > 1 && depth < GEODESIC_MAX_DEPTH {
            let mid = 0.5 * (from + to);
            self.segment(point, from, mid, depth + 1)?;
            return self.segment(point, mid, to, depth + 1);
        }
        // Near a corner the reduction may go the long way round the vertex;
        // take the shortest word with the same matrix. Passing through the
        // corner jumps to the opposite copy, three moves at one point.
        let word = if moves > 1 { shortest_equivalent(&word)? } else { word };
        if word.move_count() > 3 {
            return Err(HypError::StepTooCoarse(to.exp()));
        }
        for s in word.steps() {
            match *s {
                Step::Invert => self.crossings.push(Crossing::Bottom),
                Step::Shift(k) => {
                    let c = if k > 0 { Crossing::Left } else { Crossing::Right };
                    self.crossings.extend(std::iter::repeat(c).take(k.unsigned_abs() as usize));
                }
            }
        }
        self.g = word.matrix()?.checked_mul(&self.g).ok_or(HypError::Overflow)?;
        Ok(())
    }
}

/// Residual of `u_{-x} a(t) u_x = a(t) u_{x(1 - e^t)}`.
pub fn shear_conjugation_residual(x: f64, t: f64) -> Result<f64, HypError> {
    check_time(t)?;
    let lhs = RealMat2::unipotent(-x).mul(&RealMat2::diag_flow(t)).mul(&RealMat2::unipotent(x));
    let rhs = RealMat2::diag_flow(t).mul(&RealMat2::unipotent(x * (-t.exp_m1())));
    Ok(lhs.scaled_residual(&rhs))
}

/// Residual of `u_{(n+1)/m} a(t) = u_{n/m} a(t) u_{e^t/m}`.
pub fn horocycle_spacing_residual(n: i64, m: u64, t: f64) -> Result<f64, HypError> {
    check_time(t)?;
    if m == 0 {
        return Err(HypError::OutOfRange("m must be positive".into()));
    }
    let m = m as f64;
    let lhs = RealMat2::unipotent((n as f64 + 1.0) / m).mul(&RealMat2::diag_flow(t));
    let rhs = RealMat2::unipotent(n as f64 / m)
        .mul(&RealMat2::diag_flow(t))
        .mul(&RealMat2::unipotent(t.exp() / m));
    Ok(lhs.scaled_residual(&rhs))
}

fn check_time(t: f64) -> Result<(), HypError> {
    if t.is_finite() && t.abs() <= 700.0 {
        Ok(())
    } else {
        Err(HypError::OutOfRange(format!("time {t} outside [-700, 700]")))
    }
}

/// `h(y) = [[cosh(y/2), sinh(y/2)], [sinh(y/2), cosh(y/2)]]`.
pub fn h_matrix(y: f64) -> RealMat2 {
    let (c, s) = ((y / 2.0).cosh(), (y / 2.0).sinh());
    RealMat2::new(c, s, s, c)
}

/// `h(y) = a(t) u_s k` with `t = ln cosh y`, `s = sinh y` and `k` a rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HDecomposition {
    pub y: f64,
    pub t: f64,
    pub s: f64,
    pub k: RealMat2,
}

impl HDecomposition {
    pub fn product(&self) -> RealMat2 {
        RealMat2::diag_flow(self.t).mul(&RealMat2::unipotent(self.s)).mul(&self.k)
    }

    pub fn residual(&self) -> f64 {
        self.product().scaled_residual(&h_matrix(self.y))
    }

    /// `max |k k^T - I|` together with `|det k - 1|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let kkt = self.k.mul(&self.k.transpose());
        kkt.scaled_residual(&RealMat2::identity()).max((self.k.det() - 1.0).abs())
    }
}

pub fn h_decomposition(y: f64) -> Result<HDecomposition, HypError> {
    if !(0.0..=700.0).contains(&y) {
        return Err(HypError::OutOfRange(format!("y = {y} outside [0, 700]")));
    }
    let ch = y.cosh();
    let r = ch.sqrt().recip();
    let (c, s) = ((y / 2.0).cosh(), (y / 2.0).sinh());
    Ok(HDecomposition { y, t: ch.ln(), s: y.sinh(), k: RealMat2::new(r * c, -r * s, r * s, r * c) })
}

/// Cells covering `[-1/2, 1/2] x [im_lo, im_hi]` plus one cusp cell above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FCellGrid {
    pub re_bins: usize,
    pub im_bins: usize,
    pub im_lo: f64,
    pub im_hi: f64,
}

impl Default for FCellGrid {
    fn default() -> Self {
        Self { re_bins: 24, im_bins: 40, im_lo: 0.8, im_hi: 3.0 }
    }
}

impl FCellGrid {
    pub fn cells(&self) -> usize {
        self.re_bins * self.im_bins + 1
    }

    pub fn cusp_cell(&self) -> usize {
        self.re_bins * self.im_bins
    }

    /// Cell of a reduced point; points below `im_lo` go to the nearest row.
    pub fn cell_of(&self, z: HPoint) -> usize {
        if z.y > self.im_hi {
            return self.cusp_cell();
        }
        let i = (((z.x + 0.5) * self.re_bins as f64).floor().max(0.0) as usize).min(self.re_bins - 1);
        let fy = (z.y - self.im_lo) / (self.im_hi - self.im_lo) * self.im_bins as f64;
        let j = (fy.floor().max(0.0) as usize).min(self.im_bins - 1);
        j * self.re_bins + i
    }

    /// `(re_lo, re_hi, im_lo, im_hi)` of a non-cusp cell.
    pub fn cell_bounds(&self, cell: usize) -> (f64, f64, f64, f64) {
        let (i, j) = (cell % self.re_bins, cell / self.re_bins);
        let dx = 1.0 / self.re_bins as f64;
        let dy = (self.im_hi - self.im_lo) / self.im_bins as f64;
        let x0 = -0.5 + i as f64 * dx;
        let y0 = self.im_lo + j as f64 * dy;
        (x0, x0 + dx, y0, y0 + dy)
    }

    /// Normalized hyperbolic area of each cell intersected with the domain.
    pub fn reference_masses(&self) -> Vec<f64> {
        let total = PI / 3.0;
        let mut out: Vec<f64> = (0..self.cusp_cell())
            .map(|cell| {
                let (x0, x1, y0, y1) = self.cell_bounds(cell);
                domain_cell_area(x0, x1, y0, y1) / total
            })
            .collect();
        out.push(1.0 / self.im_hi / total);
        out
    }
}

/// `∫∫ dx dy / y^2` over the cell intersected with `|z| >= 1`.
fn domain_cell_area(x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let inner = |x: f64| {
        let floor = (1.0 - x * x).max(0.0).sqrt().max(y0);
        if floor >= y1 {
            0.0
        } else {
            1.0 / floor - 1.0 / y1
        }
    };
    // Split where the unit circle meets the cell's horizontal edges.
    let mut cuts = vec![x0, x1];
    for y in [y0, y1] {
        if y < 1.0 {
            let r = (1.0 - y * y).sqrt();
            for c in [-r, r] {
                if c > x0 && c < x1 {
                    cuts.push(c);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).map(|w| gauss_legendre(&inner, w[0], w[1], 4)).sum()
}

const GL_NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL_WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];

/// Composite 4-point Gauss–Legendre rule on `panels` equal panels.
pub fn gauss_legendre(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FCellHistogram {
    pub grid: FCellGrid,
    pub counts: Vec<u64>,
}

impl FCellHistogram {
    pub fn new(grid: FCellGrid) -> Self {
        Self { grid, counts: vec![0; grid.cells()] }
    }

    pub fn add(&mut self, z: HPoint) {
        self.counts[self.grid.cell_of(z)] += 1;
    }

    pub fn merge(mut self, o: &Self) -> Self {
        for (c, d) in self.counts.iter_mut().zip(&o.counts) {
            *c += d;
        }
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn fractions(&self) -> Vec<f64> {
        let n = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Total variation distance to the normalized hyperbolic area.
    pub fn tv_to_reference(&self) -> f64 {
        let reference = self.grid.reference_masses();
        0.5 * self.fractions().iter().zip(&reference).map(|(o, r)| (o - r).abs()).sum::<f64>()
    }
}

/// Points `u_x a(t) i = x + i e^{-t}`, `x` uniform in `[0, 1)`, reduced to the domain.
pub fn expanding_horocycle_sample(t: f64, samples: usize, seed: u64) -> Result<Vec<HPoint>, HypError> {
    check_time(t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = (-t).exp();
    (0..samples).map(|_| reduce_point(HPoint::new(rng.gen::<f64>(), y))).collect()
}

pub fn histogram_of(points: &[HPoint], grid: FCellGrid) -> FCellHistogram {
    let mut h = FCellHistogram::new(grid);
    for &z in points {
        h.add(z);
    }
    h
}

/// Sampled translated coprime orbit `u_{l/m} a(t) u_n i` for `l` coprime to `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatedOrbitRun {
    pub n: u64,
    pub m: u64,
    /// `ln(max(1, n) m)`.
    pub horizon: f64,
    pub per_residue: usize,
    pub histogram: FCellHistogram,
}

pub fn orbit_horizon(n: u64, m: u64) -> f64 {
    (n.max(1) as f64).ln() + (m as f64).ln()
}

/// Point `u_{l/m} a(t) u_n i = l/m + e^{-t}(n + i)`.
pub fn translated_orbit_point(l: u64, n: u64, m: u64, t: f64) -> HPoint {
    let e = (-t).exp();
    HPoint::new(l as f64 / m as f64 + e * n as f64, e)
}

/// Times are jittered-stratified on `[0, T]` per residue, drawn from a
/// ChaCha stream keyed by the residue so the result is thread-count independent.
pub fn translated_orbit_histogram(
    n: u64,
    m: u64,
    samples_per_unit_time: f64,
    seed: u64,
    grid: FCellGrid,
) -> Result<TranslatedOrbitRun, HypError> {
    if m < 2 {
        return Err(HypError::OutOfRange("m must be at least 2".into()));
    }
    if !(samples_per_unit_time > 0.0 && samples_per_unit_time.is_finite()) {
        return Err(HypError::OutOfRange("samples per unit time must be positive".into()));
    }
    let units = arith::units_mod(m)?;
    let horizon = orbit_horizon(n, m);
    let budget = (samples_per_unit_time * horizon).ceil() as usize;
    let per_residue = budget.div_ceil(units.len()).max(1);
    let histogram = units
        .par_iter()
        .map(|&l| -> Result<FCellHistogram, HypError> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(l);
            let mut h = FCellHistogram::new(grid);
            for j in 0..per_residue {
                let t = horizon * (j as f64 + rng.gen::<f64>()) / per_residue as f64;
                h.add(reduce_point(translated_orbit_point(l, n, m, t))?);
            }
            Ok(h)
        })
        .try_reduce(|| FCellHistogram::new(grid), |a, b| Ok(a.merge(&b)))?;
    Ok(TranslatedOrbitRun { n, m, horizon, per_residue, histogram })
}

/// Largest support radius of [`TestFunction::Bump`].
pub const MAX_BUMP_RADIUS: f64 = 0.5;

/// Test function on the modular surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    Constant(f64),
    /// `(1 - (d/r)^2)^2` where `d` is the distance on the surface to
    /// `center`, for `d < r <= MAX_BUMP_RADIUS`; 0 otherwise.
    Bump { center: HPoint, radius: f64 },
}

/// Elements of `SL2(Z)` up to sign given by words of at most four letters.
fn short_words() -> &'static [IntMat2] {
    static WORDS: OnceLock<Vec<IntMat2>> = OnceLock::new();
    WORDS.get_or_init(|| {
        let letters = [IntMat2::shift(1), IntMat2::shift(-1), IntMat2::S];
        let mut all = vec![IntMat2::IDENTITY];
        let mut frontier = all.clone();
        for _ in 0..4 {
            let mut next = Vec::new();
            for g in &frontier {
                for l in &letters {
                    let h = l.checked_mul(g).expect("short words are small");
                    if !all.iter().any(|x| x.eq_projective(&h)) {
                        all.push(h);
                        next.push(h);
                    }
                }
            }
            frontier = next;
        }
        all
    })
}

/// Distance on the modular surface between the images of `z` and `w`,
/// exact whenever it is at most `MAX_BUMP_RADIUS`.
pub fn surface_distance(z: HPoint, w: HPoint) -> Result<f64, HypError> {
    let (z, w) = (reduce_point(z)?, reduce_point(w)?);
    Ok(short_words()
        .iter()
        .map(|g| {
            let v = g.act(w);
            let shifted = HPoint::new(v.x - (v.x - z.x).round(), v.y);
            z.distance(&shifted)
        })
        .fold(f64::INFINITY, f64::min))
}

impl TestFunction {
    pub fn sup_norm(&self) -> f64 {
        match *self {
            TestFunction::Constant(c) => c.abs(),
            TestFunction::Bump { .. } => 1.0,
        }
    }

    pub fn eval(&self, z: HPoint) -> Result<f64, HypError> {
        match *self {
            TestFunction::Constant(c) => Ok(c),
            TestFunction::Bump { center, radius } => {
                if !(radius > 0.0 && radius <= MAX_BUMP_RADIUS) {
                    return Err(HypError::OutOfRange(format!("bump radius {radius} outside (0, {MAX_BUMP_RADIUS}]")));
                }
                let d = surface_distance(z, center)? / radius;
                Ok(if d < 1.0 { (1.0 - d * d).powi(2) } else { 0.0 })
            }
        }
    }
}

/// Quadrature panels per unit time used by the shear averages.
pub const PANELS_PER_UNIT_TIME: f64 = 400.0;

/// `(1/Δ) ∫_x^{x+Δ} (1/φ(m)) Σ_l f(u_{l/m} a(t) u_n i) dt` on `panels` panels.
pub fn shear_window_average(n: u64, m: u64, from: f64, delta: f64, panels: usize, f: &TestFunction) -> Result<f64, HypError> {
    let units = arith::units_mod(m)?;
    let mut err = None;
    let total: f64 = units
        .iter()
        .map(|&l| {
            let g = |t: f64| match f.eval(translated_orbit_point(l, n, m, t)) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            };
            gauss_legendre(g, from, from + delta, panels)
        })
        .sum();
    match err {
        Some(e) => Err(e),
        None => Ok(total / (units.len() as f64 * delta)),
    }
}

/// `∫_0^1 f(s + i e^{-x}) ds`, the horocycle average pushed by `a(x)`.
pub fn horocycle_average(x: f64, f: &TestFunction) -> Result<f64, HypError> {
    check_time(x)?;
    let y = (-x).exp();
    let panels = (200.0 * x.exp()).ceil().min(2.0e6) as usize;
    let mut err = None;
    let g = |s: f64| match f.eval(HPoint::new(s, y)) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let v = gauss_legendre(g, 0.0, 1.0, panels);
    err.map_or(Ok(v), Err)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearWindow {
    pub value: f64,
    pub horocycle_average: f64,
    /// `ε + 4‖f‖ε + ‖f‖ / (n^ε m^ε Δ)` with `n` replaced by `max(1, n)`.
    pub budget: f64,
}

impl ShearWindow {
    pub fn deviation(&self) -> f64 {
        (self.value - self.horocycle_average).abs()
    }

    pub fn within_budget(&self) -> bool {
        self.deviation() <= self.budget
    }
}

/// Windowed shear average compared against the horocycle average at time `x`.
pub fn windowed_shear_average(n: u64, m: u64, x: f64, delta: f64, eps: f64, f: &TestFunction) -> Result<ShearWindow, HypError> {
    if m < 2 {
        return Err(HypError::OutOfRange("m must be at least 2".into()));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(HypError::OutOfRange(format!("eps = {eps} outside (0, 1/2)")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(HypError::OutOfRange(format!("window length {delta} must be positive")));
    }
    let limit = (1.0 - 2.0 * eps) * orbit_horizon(n, m);
    if !(0.0..=limit).contains(&x) {
        return Err(HypError::OutOfRange(format!("x = {x} outside [0, {limit}]")));
    }
    let panels = (PANELS_PER_UNIT_TIME * delta).ceil().max(1.0) as usize;
    let value = shear_window_average(n, m, x, delta, panels, f)?;
    let horocycle_average = horocycle_average(x, f)?;
    let norm = f.sup_norm();
    let scale = (n.max(1) as f64).powf(eps) * (m as f64).powf(eps);
    let budget = eps + 4.0 * norm * eps + norm / (scale * delta);
    Ok(ShearWindow { value, horocycle_average, budget })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_five_plus_i() {
        let (z, w) = reduce_to_f(HPoint::new(5.0, 1.0)).unwrap();
        assert!((z.x).abs() < 1e-15 && (z.y - 1.0).abs() < 1e-15);
        assert_eq!(w.steps(), &[Step::Shift(-5)]);
        assert_eq!(w.letters(), "T^-5");
    }

    #[test]
    fn reduce_small_point_round_trips() {
        let z = HPoint::new(0.1, 0.1);
        let (zf, w) = reduce_to_f(z).unwrap();
        assert!(in_closed_domain(zf, 1e-12));
        let back = w.inverse().apply(zf).unwrap();
        assert!((back.x - z.x).abs() < 1e-12 && (back.y - z.y).abs() < 1e-12);
        // -1/(0.1 + 0.1i) = -5 + 5i, then shift by 5.
        assert_eq!(w.letters(), "S T^5");
        assert!((zf.x).abs() < 1e-12 && (zf.y - 5.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_tie_breaks() {
        let (z, _) = reduce_to_f(HPoint::new(0.5, 2.0)).unwrap();
        assert_eq!(z.x, -0.5);
        let (z, _) = reduce_to_f(HPoint::new(-0.5, 2.0)).unwrap();
        assert_eq!(z.x, -0.5);
        let c = (0.3f64).sin_cos();
        let (z, w) = reduce_to_f(HPoint::new(c.0, c.1)).unwrap();
        assert!(z.x < 0.0 && (z.abs_sq() - 1.0).abs() < 1e-12);
        assert_eq!(w.letters(), "S");
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(matches!(reduce_to_f(HPoint::new(0.0, -1.0)), Err(HypError::NotInUpperHalfPlane(_, _))));
        assert!(matches!(reduce_to_f(HPoint::new(0.0, 0.0)), Err(HypError::NotInUpperHalfPlane(_, _))));
    }

    #[test]
    fn endpoints_of_standard_elements() {
        assert_eq!(geodesic_endpoints(&RealMat2::identity()), (Endpoint::Infinity, Endpoint::Finite(0.0)));
        let u = RealMat2::unipotent(0.75);
        assert_eq!(geodesic_endpoints(&u), (Endpoint::Infinity, Endpoint::Finite(0.75)));
        // Columns swapped: u_a tau has endpoints (a, infinity).
        let ut = u.mul(&RealMat2::tau());
        assert_eq!(geodesic_endpoints(&ut), (Endpoint::Finite(0.75), Endpoint::Infinity));
        // Rows swapped: tau u_a has endpoints (0, 1/a).
        let tu = RealMat2::tau().mul(&u);
        assert_eq!(geodesic_endpoints(&tu), (Endpoint::Finite(0.0), Endpoint::Finite(1.0 / 0.75)));
    }

    fn code_of(n: i64, d: i64) -> GeodesicCode {
        geodesic_code(&Rational::new(n.into(), d.into()), 10.0, 1e-6, 0.05).unwrap()
    }

    #[test]
    fn geodesic_code_three_sevenths() {
        use Crossing::*;
        let runs = code_of(3, 7).runs();
        assert_eq!(runs, vec![(Bottom, 1), (Left, 2), (Bottom, 1), (Right, 3), (Bottom, 1)]);
    }

    #[test]
    fn geodesic_code_two_fifths_and_one_half() {
        assert_eq!(code_of(2, 5).side_run_lengths(), vec![2, 2]);
        // The geodesic over 1/2 runs along the domain's side; with the left side
        // kept, it is coded by the other expansion 1/2 = [0;1,1].
        use Crossing::*;
        let half = code_of(1, 2).runs();
        assert_eq!(half, vec![(Bottom, 1), (Right, 1), (Bottom, 1), (Left, 1), (Bottom, 1)]);
    }

    #[test]
    fn geodesic_code_rejects_bad_range() {
        let x = Rational::new(1.into(), 3.into());
        assert!(geodesic_code(&x, 1e-3, 1.0, 0.1).is_err());
        assert!(geodesic_code(&x, 1.0, 1e-3, 0.0).is_err());
    }

    #[test]
    fn identities_at_sample_points() {
        assert!(shear_conjugation_residual(0.0, 0.0).unwrap() == 0.0);
        assert!(shear_conjugation_residual(1.0, 0.0).unwrap() < 1e-15);
        assert!(shear_conjugation_residual(-3.5, 2.25).unwrap() < 1e-14);
        assert!(horocycle_spacing_residual(3, 7, 1.5).unwrap() < 1e-14);
        let h = h_decomposition(0.0).unwrap();
        assert_eq!(h.k, RealMat2::identity());
        let h = h_decomposition(1.3).unwrap();
        assert!(h.residual() < 1e-14 && h.orthogonality_residual() < 1e-14);
        assert!(h_decomposition(-1.0).is_err());
    }

    #[test]
    fn reference_masses_sum_to_one() {
        let grid = FCellGrid::default();
        let r = grid.reference_masses();
        assert_eq!(r.len(), 961);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((r[grid.cusp_cell()] - 1.0 / PI).abs() < 1e-15);
        // Bottom row cells near the middle lie below the unit circle.
        assert_eq!(r[12], 0.0);
    }

    #[test]
    fn horocycle_at_time_zero_is_one_row() {
        let pts = expanding_horocycle_sample(0.0, 1000, 7).unwrap();
        assert!(pts.iter().all(|z| (z.y - 1.0).abs() < 1e-12));
        assert!(histogram_of(&pts, FCellGrid::default()).tv_to_reference() > 0.5);
    }

    #[test]
    fn window_rejects_bad_ranges() {
        let f = TestFunction::Constant(1.0);
        assert!(windowed_shear_average(101, 101, 100.0, 0.05, 0.1, &f).is_err());
        assert!(windowed_shear_average(101, 101, 1.0, 0.0, 0.1, &f).is_err());
        assert!(windowed_shear_average(101, 101, 1.0, 0.05, 0.6, &f).is_err());
    }

    #[test]
    fn constant_function_window_is_exact() {
        let w = windowed_shear_average(7, 11, 0.5, 0.2, 0.1, &TestFunction::Constant(2.0)).unwrap();
        assert!((w.value - 2.0).abs() < 1e-12 && (w.horocycle_average - 2.0).abs() < 1e-12);
    }
}
