//! One table-producing function per subcommand.

use crate::checkpoint::{Checkpoints, Unit};
use crate::table::{Cell, Table};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use shear_core::hyperbolic::{self as hyp, FCellGrid, FCellHistogram, HPoint};
use shear_core::measures::{self, FamilyMode};
use shear_core::padic::{self, DiagonalAdele, PadicMat2, PadicNum};
use shear_core::{arith, cfe, lattice2, Rational};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or input values; exit code 1.
    Config(String),
    /// A checked invariant failed; exit code 2.
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "error: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

fn config(e: impl Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Table plus the invariant violations found while filling it.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    pub violations: Vec<String>,
}

impl Report {
    fn new(command: &str, columns: Vec<&'static str>) -> Self {
        let mut table = Table::new(columns);
        table.meta("version", env!("CARGO_PKG_VERSION"));
        table.meta("command", command);
        Self { table, violations: Vec::new() }
    }

    fn absorb(&mut self, units: Vec<Unit>) {
        for u in units {
            self.table.rows.extend(u.rows);
            self.violations.extend(u.violations);
        }
    }

    fn finish(mut self) -> Self {
        self.table.meta("rows", self.table.rows.len());
        self.table.meta("violations", self.violations.len());
        self
    }
}

/// Comma-separated values or an inclusive range `a..=b` (or half-open `a..b`).
#[derive(Debug, Clone, PartialEq)]
pub struct NumList(pub Vec<u64>);

impl FromStr for NumList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("`{t}`: {e}"));
        let mut out = Vec::new();
        for part in s.split(',') {
            if let Some((a, b)) = part.split_once("..=") {
                out.extend(num(a)?..=num(b)?);
            } else if let Some((a, b)) = part.split_once("..") {
                out.extend(num(a)?..num(b)?);
            } else {
                out.push(num(part)?);
            }
        }
        if out.is_empty() {
            return Err(format!("`{s}` is empty"));
        }
        Ok(NumList(out))
    }
}

impl Display for NumList {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<Result<_, _>>()?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(format!("`{s}` has a non-finite value"));
        }
        Ok(FloatList(v))
    }
}

impl Display for FloatList {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(f64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

fn rational(s: &str) -> Result<Rational, CliError> {
    Rational::from_str(s.trim()).map_err(|_| CliError::Config(format!("`{s}` is not a rational p/q")))
}

fn joined<T: Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Compute units in parallel, each through the checkpoint store, keeping
/// the order of `keys`.
fn sweep<K: Sync>(
    keys: &[K],
    store: &Checkpoints,
    name: impl Fn(&K) -> String + Sync,
    compute: impl Fn(&K) -> Result<Unit, CliError> + Sync,
) -> Result<Vec<Unit>, CliError> {
    keys.par_iter().map(|k| store.run(&name(k), || compute(k))).collect()
}

pub fn cfe(values: &[String]) -> Result<Report, CliError> {
    let mut r = Report::new("cfe", vec!["x", "word", "len", "orbit", "convergents"]);
    for v in values {
        let x = rational(v)?;
        let word = cfe::cfe_of_rational(&x).map_err(config)?;
        let orbit = cfe::orbit(&x).map_err(config)?;
        let conv = cfe::convergents(&word);
        r.table.rows.push(vec![
            x.to_string().into(),
            word.to_string().into(),
            word.len().into(),
            joined(&orbit).into(),
            joined(&conv).into(),
        ]);
    }
    Ok(r.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    OrbitUniform,
    PointUniform,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<FamilyMode> {
        match self {
            ModeArg::OrbitUniform => vec![FamilyMode::OrbitUniform],
            ModeArg::PointUniform => vec![FamilyMode::PointUniform],
            ModeArg::Both => vec![FamilyMode::OrbitUniform, FamilyMode::PointUniform],
        }
    }
}

pub struct OrbitMeasureConfig<'a> {
    pub ms: &'a [u64],
    pub mode: ModeArg,
    pub summary: bool,
    pub bins: usize,
    pub checkpoint: Option<&'a Path>,
}

pub fn orbit_measure(c: &OrbitMeasureConfig) -> Result<Report, CliError> {
    if let Some(&m) = c.ms.iter().find(|&&m| m < 2) {
        return Err(CliError::Config(format!("m = {m}: need m >= 2")));
    }
    if c.bins == 0 {
        return Err(CliError::Config("--bins must be positive".into()));
    }
    let columns = if c.summary {
        vec!["m", "mode", "atoms", "kolmogorov", "binned_tv"]
    } else {
        vec!["m", "mode", "atom", "weight", "cdf", "gauss_cdf"]
    };
    let mut r = Report::new("orbit-measure", columns);
    r.table.meta("m", NumList(c.ms.to_vec()));
    r.table.meta("summary", c.summary);
    r.table.meta("bins", c.bins);
    let keys: Vec<(u64, FamilyMode)> = c.ms.iter().flat_map(|&m| c.mode.modes().into_iter().map(move |md| (m, md))).collect();
    let store = Checkpoints::new(c.checkpoint, format!("summary={};bins={}", c.summary, c.bins))?;
    let units = sweep(
        &keys,
        &store,
        |(m, md)| format!("orbit-measure-{m}-{}", md.name()),
        |&(m, md)| {
            let mu = measures::family_average(m, md).map_err(config)?;
            let rows = if c.summary {
                let tv = measures::binned_total_variation(&mu, c.bins).map_err(config)?;
                vec![vec![m.into(), md.name().into(), mu.atoms().len().into(), measures::kolmogorov_distance(&mu).into(), tv.into()]]
            } else {
                let mut below = Rational::zero();
                mu.atoms()
                    .iter()
                    .map(|(x, w)| {
                        below += w;
                        let g = measures::gauss_cdf(to_f64(x));
                        vec![m.into(), md.name().into(), x.to_string().into(), w.to_string().into(), to_f64(&below).into(), g.into()]
                    })
                    .collect()
            };
            Ok(Unit { rows, violations: Vec::new() })
        },
    )?;
    r.absorb(units);
    Ok(r.finish())
}

pub struct CoprimeConfig<'a> {
    pub ms: &'a [u64],
    pub intervals: usize,
    pub seed: u64,
    pub summary: bool,
    pub checkpoint: Option<&'a Path>,
}

pub fn coprime(c: &CoprimeConfig) -> Result<Report, CliError> {
    if c.ms.contains(&0) {
        return Err(CliError::Config("m must be positive".into()));
    }
    let columns = if c.summary {
        vec!["m", "intervals", "max_deviation", "bound", "min_slack", "all_hold"]
    } else {
        vec!["m", "lo", "hi", "count", "expected", "deviation", "bound", "slack", "holds"]
    };
    let mut r = Report::new("coprime", columns);
    r.table.meta("m", NumList(c.ms.to_vec()));
    r.table.meta("intervals", c.intervals);
    r.table.meta("seed", c.seed);
    r.table.meta("summary", c.summary);
    let store = Checkpoints::new(c.checkpoint, format!("intervals={};seed={};summary={}", c.intervals, c.seed, c.summary))?;
    let units = sweep(
        c.ms,
        &store,
        |m| format!("coprime-{m}"),
        |&m| {
            let f = arith::factorize(m).map_err(config)?;
            let whole = arith::IntInterval::from_ints(0, m as i64).map_err(config)?;
            let intervals: Vec<arith::IntInterval> =
                std::iter::once(whole).chain(arith::sample_intervals(m, c.intervals, c.seed)).collect();
            let mut unit = Unit::default();
            let mut worst: Option<(Rational, Rational)> = None;
            for iv in &intervals {
                let b = arith::coprime_bound_with(&f, iv);
                if !b.holds {
                    unit.violations.push(format!("m={m} [{}, {}): deviation {} > {}", iv.lo(), iv.hi(), b.deviation, b.bound));
                }
                if c.summary {
                    let slack = b.slack();
                    worst = Some(match worst {
                        None => (b.deviation.clone(), slack),
                        Some((d, s)) => (d.max(b.deviation.clone()), s.min(slack)),
                    });
                } else {
                    unit.rows.push(vec![
                        m.into(),
                        iv.lo().to_string().into(),
                        iv.hi().to_string().into(),
                        b.count.to_string().into(),
                        b.expected.to_string().into(),
                        b.deviation.to_string().into(),
                        b.bound.into(),
                        b.slack().to_string().into(),
                        b.holds.into(),
                    ]);
                }
            }
            if let Some((d, s)) = worst {
                let bound = 1u64 << f.omega();
                unit.rows.push(vec![
                    m.into(),
                    intervals.len().into(),
                    d.to_string().into(),
                    bound.into(),
                    s.to_string().into(),
                    unit.violations.is_empty().into(),
                ]);
            }
            Ok(unit)
        },
    )?;
    r.absorb(units);
    Ok(r.finish())
}

const HISTOGRAM_COLUMNS: [&str; 7] = ["cell", "cell_re_lo", "cell_re_hi", "cell_im_lo", "cell_im_hi", "observed", "expected"];

fn histogram_rows(prefix: Vec<Cell>, h: &FCellHistogram) -> Vec<Vec<Cell>> {
    let grid = FCellGrid::default();
    let reference = grid.reference_masses();
    h.fractions()
        .iter()
        .zip(&reference)
        .enumerate()
        .map(|(cell, (&o, &e))| {
            let (x0, x1, y0, y1) = if cell == grid.cusp_cell() {
                (-0.5, 0.5, grid.im_hi, f64::INFINITY)
            } else {
                grid.cell_bounds(cell)
            };
            let mut row = prefix.clone();
            row.extend([cell.into(), x0.into(), x1.into(), y0.into(), y1.into(), o.into(), e.into()]);
            row
        })
        .collect()
}

pub struct HorocycleConfig<'a> {
    pub times: &'a [f64],
    pub samples: usize,
    pub seed: u64,
    pub summary: bool,
    pub checkpoint: Option<&'a Path>,
}

pub fn horocycle(c: &HorocycleConfig) -> Result<Report, CliError> {
    if c.samples == 0 {
        return Err(CliError::Config("--samples must be positive".into()));
    }
    let columns = if c.summary {
        vec!["t", "samples", "tv"]
    } else {
        std::iter::once("t").chain(HISTOGRAM_COLUMNS).collect()
    };
    let mut r = Report::new("horocycle", columns);
    r.table.meta("t", FloatList(c.times.to_vec()));
    r.table.meta("samples", c.samples);
    r.table.meta("seed", c.seed);
    r.table.meta("summary", c.summary);
    let store = Checkpoints::new(c.checkpoint, format!("samples={};seed={};summary={}", c.samples, c.seed, c.summary))?;
    let units = sweep(
        c.times,
        &store,
        |t| format!("horocycle-{t}"),
        |&t| {
            let pts = hyp::expanding_horocycle_sample(t, c.samples, c.seed).map_err(config)?;
            let h = hyp::histogram_of(&pts, FCellGrid::default());
            let rows = if c.summary {
                vec![vec![t.into(), c.samples.into(), h.tv_to_reference().into()]]
            } else {
                histogram_rows(vec![t.into()], &h)
            };
            Ok(Unit { rows, violations: Vec::new() })
        },
    )?;
    r.absorb(units);
    Ok(r.finish())
}

pub struct ShearConfig<'a> {
    pub pairs: &'a [(u64, u64)],
    pub samples_per_unit_time: f64,
    pub seed: u64,
    pub summary: bool,
    pub checkpoint: Option<&'a Path>,
}

pub fn shear(c: &ShearConfig) -> Result<Report, CliError> {
    if let Some(&(_, m)) = c.pairs.iter().find(|&&(_, m)| m < 2) {
        return Err(CliError::Config(format!("m = {m}: need m >= 2")));
    }
    if !(c.samples_per_unit_time > 0.0) {
        return Err(CliError::Config("--spu must be positive".into()));
    }
    let columns = if c.summary {
        vec!["n", "m", "horizon", "per_residue", "samples", "tv"]
    } else {
        ["n", "m"].into_iter().chain(HISTOGRAM_COLUMNS).collect()
    };
    let mut r = Report::new("shear", columns);
    r.table.meta("pairs", joined(c.pairs.iter().map(|(n, m)| format!("{n}:{m}"))));
    r.table.meta("spu", c.samples_per_unit_time);
    r.table.meta("seed", c.seed);
    r.table.meta("summary", c.summary);
    let store = Checkpoints::new(c.checkpoint, format!("spu={};seed={};summary={}", c.samples_per_unit_time, c.seed, c.summary))?;
    // Pairs run one after another; each run is parallel over residues.
    let mut units = Vec::new();
    for &(n, m) in c.pairs {
        units.push(store.run(&format!("shear-{n}-{m}"), || {
            let run = hyp::translated_orbit_histogram(n, m, c.samples_per_unit_time, c.seed, FCellGrid::default()).map_err(config)?;
            let rows = if c.summary {
                vec![vec![
                    n.into(),
                    m.into(),
                    run.horizon.into(),
                    run.per_residue.into(),
                    run.histogram.total().into(),
                    run.histogram.tv_to_reference().into(),
                ]]
            } else {
                histogram_rows(vec![n.into(), m.into()], &run.histogram)
            };
            Ok::<_, CliError>(Unit { rows, violations: Vec::new() })
        })?);
    }
    r.absorb(units);
    Ok(r.finish())
}

/// Outcome of a randomized batch of checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn residual_check(name: &'static str, cases: usize, tolerance: f64, rng: &mut ChaCha8Rng, mut one: impl FnMut(&mut ChaCha8Rng) -> Result<f64, String>) -> Result<Check, CliError> {
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let r = one(rng).map_err(CliError::Invariant)?;
        // NaN must count as a failure.
        worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
    }
    Ok(Check { name, cases, worst, tolerance })
}

/// The randomized residual checks for the 2x2 identities and the reduction.
pub fn identity_checks(cases: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let rng = &mut ChaCha8Rng::seed_from_u64(seed);
    let err = |e: hyp::HypError| e.to_string();
    Ok(vec![
        residual_check("shear_conjugation", cases, 1e-12, rng, |g| {
            hyp::shear_conjugation_residual(g.gen_range(-20.0..=20.0), g.gen_range(-20.0..=20.0)).map_err(err)
        })?,
        residual_check("horocycle_spacing", cases, 1e-12, rng, |g| {
            hyp::horocycle_spacing_residual(g.gen_range(-10_000..=10_000), g.gen_range(1..=10_000), g.gen_range(-20.0..=20.0)).map_err(err)
        })?,
        residual_check("h_decomposition", cases, 1e-12, rng, |g| {
            hyp::h_decomposition(g.gen_range(0.0..=20.0)).map(|h| h.residual()).map_err(err)
        })?,
        residual_check("k_orthogonal", cases, 1e-12, rng, |g| {
            hyp::h_decomposition(g.gen_range(0.0..=20.0)).map(|h| h.orthogonality_residual()).map_err(err)
        })?,
        residual_check("reduction_round_trip", cases, 1e-9, rng, |g| {
            let z = HPoint::new(g.gen_range(-50.0..=50.0), 10f64.powf(g.gen_range(-3.0..=3.0)));
            let (zf, word) = hyp::reduce_to_f(z).map_err(err)?;
            if !hyp::in_closed_domain(zf, 1e-12) {
                return Ok(f64::INFINITY);
            }
            let back = word.inverse().apply(zf).map_err(err)?;
            Ok((back.x - z.x).abs().max((back.y - z.y).abs()) / z.x.abs().max(z.y).max(1.0))
        })?,
    ])
}

fn checks_report(command: &str, checks: &[Check], extra: &[(&str, String)]) -> Report {
    let mut r = Report::new(command, vec!["check", "cases", "worst", "tolerance", "pass"]);
    for (k, v) in extra {
        r.table.meta(k, v);
    }
    for c in checks {
        r.table.rows.push(vec![c.name.into(), c.cases.into(), c.worst.into(), c.tolerance.into(), c.passed().into()]);
        if !c.passed() {
            r.violations.push(format!("{}: worst {:e} above {:e}", c.name, c.worst, c.tolerance));
        }
    }
    r.finish()
}

pub fn identities(cases: usize, seed: u64) -> Result<Report, CliError> {
    let checks = identity_checks(cases, seed)?;
    Ok(checks_report("identities", &checks, &[("cases", cases.to_string()), ("seed", seed.to_string())]))
}

/// Counts of failed cases per p-adic check.
#[derive(Debug, Clone, PartialEq)]
pub struct PadicCheck {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
}

pub struct PadicConfig<'a> {
    pub primes: &'a [u64],
    pub precision: usize,
    /// Cases for the pairwise arithmetic checks.
    pub pairs: usize,
    /// Cases for the matrix, product-formula and gamma-fix checks.
    pub instances: usize,
    pub seed: u64,
}

fn random_rational(g: &mut ChaCha8Rng, avoid: Option<u64>) -> Rational {
    let mut n = 0;
    while n == 0 {
        n = g.gen_range(-100_000i64..=100_000);
    }
    let mut d = g.gen_range(1i64..=10_000);
    if let Some(b) = avoid {
        let b = b as i64;
        loop {
            let gcd = num_integer::gcd(d, b);
            if gcd == 1 {
                break;
            }
            d /= gcd;
        }
    }
    Rational::new(n.into(), d.into())
}

fn count_failures(name: String, cases: usize, mut ok: impl FnMut() -> Result<bool, padic::PadicError>) -> PadicCheck {
    let failures = (0..cases).filter(|_| !matches!(ok(), Ok(true))).count();
    PadicCheck { name, cases, failures }
}

fn prime_checks(p: u64, c: &PadicConfig) -> Result<Vec<PadicCheck>, CliError> {
    let prec = c.precision;
    let mut g = ChaCha8Rng::seed_from_u64(c.seed);
    g.set_stream(p);
    let pn = |x: &Rational| PadicNum::from_rational(x, p, prec);
    let mut out = Vec::new();
    out.push(count_failures(format!("ring_axioms_p{p}"), c.pairs, || {
        let (x, y, z) = (random_rational(&mut g, None), random_rational(&mut g, None), random_rational(&mut g, None));
        let (a, b, cc) = (pn(&x)?, pn(&y)?, pn(&z)?);
        let assoc_add = a.add(&b)?.add(&cc)?.agrees_with(&a.add(&b.add(&cc)?)?);
        let assoc_mul = a.mul(&b)?.mul(&cc)?.agrees_with(&a.mul(&b.mul(&cc)?)?);
        let comm = a.add(&b)?.agrees_with(&b.add(&a)?) && a.mul(&b)?.agrees_with(&b.mul(&a)?);
        let dist = a.mul(&b.add(&cc)?)?.agrees_with(&a.mul(&b)?.add(&a.mul(&cc)?)?);
        let hom = a.mul(&b)?.agrees_with(&pn(&(&x * &y))?);
        Ok(assoc_add && assoc_mul && comm && dist && hom)
    }));
    out.push(count_failures(format!("unit_inverse_p{p}"), c.pairs, || {
        let mut n = g.gen_range(1i64..=1_000_000_000);
        if n % p as i64 == 0 {
            n += 1;
        }
        let a = PadicNum::from_integer(n, p, prec)?;
        let one = PadicNum::from_integer(1, p, prec)?;
        a.mul(&a.inv()?)?.congruent(&one, prec as i64)
    }));
    out.push(count_failures(format!("strong_triangle_p{p}"), c.pairs, || {
        let (x, y) = (random_rational(&mut g, None), random_rational(&mut g, None));
        if (&x + &y).is_zero() {
            return Ok(true);
        }
        let (nx, ny) = (pn(&x)?.norm()?, pn(&y)?.norm()?);
        let ns = pn(&x)?.add(&pn(&y)?)?.norm()?;
        let max = nx.clone().max(ny.clone());
        Ok(ns <= max && (nx == ny || ns == max) && ns == pn(&(&x + &y))?.norm()?)
    }));
    out.push(count_failures(format!("multiplicative_norm_p{p}"), c.pairs, || {
        let (a, b) = (pn(&random_rational(&mut g, None))?, pn(&random_rational(&mut g, None))?);
        Ok(a.mul(&b)?.norm()? == a.norm()? * b.norm()?)
    }));
    out.push(count_failures(format!("iwasawa_p{p}"), c.instances, || {
        let entries: Vec<Rational> = (0..4)
            .map(|_| Rational::new(g.gen_range(-500i64..=500).into(), BigInt::from(p).pow(g.gen_range(0..4))))
            .collect();
        if (&entries[0] * &entries[3] - &entries[1] * &entries[2]).is_zero() {
            return Ok(true);
        }
        let m = PadicMat2::from_rationals([&entries[0], &entries[1], &entries[2], &entries[3]], p, prec)?;
        let dec = padic::iwasawa_p(&m)?;
        Ok(dec.product()?.agrees_with(&m) && padic::is_gl2_zp(&dec.k)?)
    }));
    Ok(out)
}

/// The randomized p-adic checks, in a fixed order.
pub fn padic_checks(c: &PadicConfig) -> Result<Vec<PadicCheck>, CliError> {
    if let Some(&p) = c.primes.iter().find(|&&p| !padic::is_prime(p)) {
        return Err(CliError::Config(format!("{p} is not prime")));
    }
    if c.precision == 0 {
        return Err(CliError::Config("--precision must be positive".into()));
    }
    let per_prime: Vec<Vec<PadicCheck>> = c.primes.par_iter().map(|&p| prime_checks(p, c)).collect::<Result<_, _>>()?;
    let mut out: Vec<PadicCheck> = per_prime.into_iter().flatten().collect();
    let mut g = ChaCha8Rng::seed_from_u64(c.seed);
    g.set_stream(0);
    out.push(count_failures("product_formula".into(), c.instances, || {
        padic::product_formula_check(&random_rational(&mut g, None)).map(|f| f.holds())
    }));
    for m in [6u64, 10, 12, 30] {
        out.push(count_failures(format!("crt_round_trip_m{m}"), c.instances, || {
            let a = PadicNum::from_rational(&random_rational(&mut g, Some(m)), m, 16)?;
            let b = PadicNum::from_rational(&random_rational(&mut g, Some(m)), m, 16)?;
            let back = padic::crt_merge(&padic::crt_split(&a)?, m)?;
            let (sa, sb) = (padic::crt_split(&a)?, padic::crt_split(&b)?);
            let prod = padic::crt_split(&a.mul(&b)?)?;
            let hom = (0..sa.len()).all(|i| sa[i].mul(&sb[i]).is_ok_and(|x| x.agrees_with(&prod[i])));
            Ok(back.agrees_with(&a) && hom)
        }));
    }
    let mut wrong_rejected = 0usize;
    let gamma = count_failures("gamma_fix".into(), c.instances, || {
        let m = g.gen_range(2u64..=10_000);
        let f = arith::factorize(m)?;
        let mut a = DiagonalAdele::default();
        for &(p, k) in &f.prime_powers {
            let mut unit = || {
                let mut v = g.gen_range(1i64..=1_000_000);
                if v % p as i64 == 0 {
                    v += 1;
                }
                PadicNum::from_integer(v, p, 2 * k as usize + 8)
            };
            a.places.insert(p, (unit()?, unit()?));
        }
        let l = padic::psi_m(&a, m)?;
        let wrong = (l + g.gen_range(1..m)) % m;
        if !padic::gamma_fix_check_with(&a, m, wrong)? {
            wrong_rejected += 1;
        }
        padic::gamma_fix_check(&a, m)
    });
    out.push(gamma);
    out.push(PadicCheck { name: "gamma_fix_wrong_residue".into(), cases: c.instances, failures: c.instances - wrong_rejected });
    Ok(out)
}

pub fn padic(c: &PadicConfig) -> Result<Report, CliError> {
    let checks = padic_checks(c)?;
    let mut r = Report::new("padic", vec!["check", "cases", "failures", "pass"]);
    r.table.meta("primes", NumList(c.primes.to_vec()));
    r.table.meta("precision", c.precision);
    r.table.meta("pairs", c.pairs);
    r.table.meta("instances", c.instances);
    r.table.meta("seed", c.seed);
    let third = PadicNum::from_rational(&Rational::new(1.into(), 3.into()), 10, 8).map_err(config)?;
    r.table.meta("example_one_third_base10", third);
    for ch in &checks {
        r.table.rows.push(vec![ch.name.clone().into(), ch.cases.into(), ch.failures.into(), (ch.failures == 0).into()]);
        if ch.failures > 0 {
            r.violations.push(format!("{}: {} of {} cases failed", ch.name, ch.failures, ch.cases));
        }
    }
    Ok(r.finish())
}

/// `n * n'` modulo `m` for a mirror pair, as `+1` or `-1` when it is one of those.
fn mirror_sign(product: u64, m: u64) -> Option<i8> {
    if product == 1 % m {
        Some(1)
    } else if product == m - 1 {
        Some(-1)
    } else {
        None
    }
}

pub fn mirror(ms: &[u64], checkpoint: Option<&Path>) -> Result<Report, CliError> {
    if let Some(&m) = ms.iter().find(|&&m| m < 2) {
        return Err(CliError::Config(format!("m = {m}: need m >= 2")));
    }
    let mut r = Report::new("mirror", vec!["m", "n", "mirror", "product"]);
    r.table.meta("m", NumList(ms.to_vec()));
    let store = Checkpoints::new(checkpoint, String::new())?;
    let units = sweep(
        ms,
        &store,
        |m| format!("mirror-{m}"),
        |&m| {
            let table = lattice2::mirror_table(m).map_err(config)?;
            let lookup: std::collections::HashMap<u64, u64> = table.iter().copied().collect();
            let mut unit = Unit::default();
            for &(n, k) in &table {
                if lookup.get(&k) != Some(&n) {
                    unit.violations.push(format!("m={m}: mirror of {n} is {k}, whose mirror is not {n}"));
                }
                let product = (n as u128 * k as u128 % m as u128) as u64;
                if mirror_sign(product, m).is_none() {
                    unit.violations.push(format!("m={m}: {n} * {k} = {product}, not +-1"));
                }
                unit.rows.push(vec![m.into(), n.into(), k.into(), product.into()]);
            }
            Ok(unit)
        },
    )?;
    // For m = 2 the two signs coincide.
    let signs: std::collections::BTreeSet<i8> = units
        .iter()
        .flat_map(|u| &u.rows)
        .filter_map(|row| match (&row[0], &row[3]) {
            (Cell::Int(m), Cell::Int(p)) if *m > 2 => mirror_sign(*p as u64, *m as u64),
            _ => None,
        })
        .collect();
    let sign = match signs.iter().collect::<Vec<_>>()[..] {
        [] => "n/a".to_string(),
        [s] => format!("{s:+}"),
        _ => {
            r.violations.push("mirror products mix +1 and -1".into());
            "mixed".to_string()
        }
    };
    r.absorb(units);
    r.table.meta("sign", sign);
    Ok(r.finish())
}
