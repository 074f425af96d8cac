//! Heights of unimodular lattices: inverse length of the shortest nonzero
//! vector in the sup-norm, at the real place and for `S`-arithmetic lattices.

use crate::hyperbolic::RealMat2;
use crate::padic::{self, AdelicElement, PadicError, PadicNum, Valuation};
use num_traits::ToPrimitive;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeightError {
    #[error("basis is singular or nearly so (|det| = {0:e})")]
    NearSingular(f64),
    #[error("non-finite basis entry")]
    NotFinite,
    #[error("finite component at {0} is not in GL2(Z_p)")]
    NotIntegralAt(u64),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

const SINGULAR_DET: f64 = 1e-12;

pub fn sup_norm(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

fn combine(b: &RealMat2, x: i64, y: i64) -> [f64; 2] {
    let (x, y) = (x as f64, y as f64);
    [x * b.a + y * b.c, x * b.b + y * b.d]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortestVector {
    /// Integer coefficients on the rows of the input basis.
    pub coeffs: [i64; 2],
    pub vector: [f64; 2],
    pub norm: f64,
}

/// Shortest nonzero vector of the row lattice `Z^2 basis` in the sup-norm.
pub fn shortest_vector(basis: &RealMat2) -> Result<ShortestVector, HeightError> {
    if !basis.entries().iter().all(|v| v.is_finite()) {
        return Err(HeightError::NotFinite);
    }
    let det = basis.det();
    if det.abs() < SINGULAR_DET {
        return Err(HeightError::NearSingular(det.abs()));
    }
    // Lagrange–Gauss reduction, tracking the unimodular change of basis.
    let mut r = [[basis.a, basis.b], [basis.c, basis.d]];
    let mut u = [[1i64, 0], [0, 1]];
    let dot = |p: [f64; 2], q: [f64; 2]| p[0] * q[0] + p[1] * q[1];
    loop {
        if dot(r[0], r[0]) > dot(r[1], r[1]) {
            r.swap(0, 1);
            u.swap(0, 1);
        }
        let mu = (dot(r[0], r[1]) / dot(r[0], r[0])).round();
        if mu == 0.0 {
            break;
        }
        let k = mu as i64;
        r[1] = [r[1][0] - mu * r[0][0], r[1][1] - mu * r[0][1]];
        u[1] = [u[1][0] - k * u[0][0], u[1][1] - k * u[0][1]];
    }
    let reduced = RealMat2::new(r[0][0], r[0][1], r[1][0], r[1][1]);
    let len0 = dot(r[0], r[0]).sqrt();
    let gs1 = det.abs() / len0;
    let mu = dot(r[0], r[1]) / dot(r[0], r[0]);
    let mut best = (f64::INFINITY, 0i64, 0i64);
    for (x, y) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
        let n = sup_norm(combine(&reduced, x, y));
        if n < best.0 {
            best = (n, x, y);
        }
    }
    // Any vector with sup-norm below `best` has Euclidean length below sqrt(2) best.
    let radius = std::f64::consts::SQRT_2 * best.0;
    let y_max = (radius / gs1).floor() as i64;
    for y in -y_max..=y_max {
        let centre = -(y as f64) * mu;
        let span = radius / len0;
        for x in (centre - span).floor() as i64..=(centre + span).ceil() as i64 {
            if x == 0 && y == 0 {
                continue;
            }
            let n = sup_norm(combine(&reduced, x, y));
            if n < best.0 {
                best = (n, x, y);
            }
        }
    }
    let (_, x, y) = best;
    let coeffs = [x * u[0][0] + y * u[1][0], x * u[0][1] + y * u[1][1]];
    let vector = combine(basis, coeffs[0], coeffs[1]);
    Ok(ShortestVector { coeffs, vector, norm: sup_norm(vector) })
}

/// `1 / min |v|_inf` over nonzero `v` in `Z^2 g`.
pub fn ht_inf(g: &RealMat2) -> Result<f64, HeightError> {
    Ok(1.0 / shortest_vector(g)?.norm)
}

/// Height of `Z[1/S]^2 h` for `h` whose finite components lie in `GL2(Z_p)`,
/// which reduces to the height of the real component.
pub fn ht_s(h: &AdelicElement) -> Result<f64, HeightError> {
    for (&p, hp) in &h.places {
        if !padic::is_gl2_zp(hp)? {
            return Err(HeightError::NotIntegralAt(p));
        }
    }
    ht_inf(&h.real)
}

/// `|v h_inf|_inf * prod_p |v h_p|_p` for an integer vector `v`.
pub fn product_norm(v: [i64; 2], h: &AdelicElement) -> Result<f64, HeightError> {
    let mut total = sup_norm(combine(&h.real, v[0], v[1]));
    for (&p, hp) in &h.places {
        let prec = hp.a.precision().max(8);
        let x = PadicNum::from_integer(v[0], p, prec)?;
        let y = PadicNum::from_integer(v[1], p, prec)?;
        let w0 = x.mul(&hp.a)?.add(&y.mul(&hp.c)?)?;
        let w1 = x.mul(&hp.b)?.add(&y.mul(&hp.d)?)?;
        // A coordinate that is zero to the known digits only bounds the max.
        let known = |w: &PadicNum| match w.val() {
            Valuation::AtLeast(k) => (false, (p as f64).powi(-k as i32)),
            _ => (true, w.norm().ok().and_then(|n| n.to_f64()).unwrap_or(f64::NAN)),
        };
        let (k0, n0) = known(&w0);
        let (k1, n1) = known(&w1);
        let (exact, n) = if n0 >= n1 { (k0, n0) } else { (k1, n1) };
        if !exact {
            return Err(PadicError::PrecisionExhausted.into());
        }
        total *= n;
    }
    Ok(total)
}

/// Lower bound on the height of `Z^2 u_{-l/m} a(t) u_n` from the vector
/// `e2 u_{-l/m} a(t) u_n = (0, e^{t/2})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuspWitness {
    pub vector: [f64; 2],
    pub bound: f64,
}

impl CuspWitness {
    pub fn certifies(&self, c: f64) -> bool {
        self.bound >= c
    }
}

pub fn translated_orbit_matrix(l: u64, m: u64, t: f64, n: u64) -> RealMat2 {
    RealMat2::unipotent(-(l as f64) / m as f64)
        .mul(&RealMat2::diag_flow(t))
        .mul(&RealMat2::unipotent(n as f64))
}

pub fn cusp_height_witness(l: u64, m: u64, t: f64, n: u64) -> CuspWitness {
    let g = translated_orbit_matrix(l, m, t, n);
    let vector = [g.c, g.d];
    CuspWitness { vector, bound: 1.0 / sup_norm(vector) }
}
