//! Brute-force routes that do not share code with the generating-functional
//! machinery: Gaussian moments by explicit perfect matchings, and direct
//! numerical integration of the discrete path integral.
//!
//! The path integral `int dphi exp(-(i/2) phi K phi + i J phi) (...)` is
//! oscillatory along the real axis. Each eigendirection of `Re K` is rotated
//! onto its steepest-descent ray, where the Gaussian weight is real and
//! decaying; the integrand is entire, so the value is unchanged.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::genfun::{
    green, invert_series, serialize_complex, serialize_complex_vec, z_series, GenfunError, DEFAULT_ORDER_CAP,
};
use crate::lattice::{build_kernel, propagator, Kernel, LatticeError, ModelSpec, Propagator};
use crate::wick::{enumerate_pairings, WickError};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub const DEFAULT_MOMENT_CAP: usize = 12;
pub const MIN_NODES: usize = 64;
pub const MAX_QUADRATURE_SITES: usize = 3;
/// Envelope ratio targeted by the automatic cutoff.
pub const AUTO_TAIL_RATIO: f64 = 1e-13;
/// Largest envelope ratio accepted at a user-supplied cutoff.
pub const TAIL_LIMIT: f64 = 1e-12;
/// Relative deviations are measured against `max(|a|, |b|, DEVIATION_FLOOR)`.
pub const DEVIATION_FLOOR: f64 = 1e-8;
/// Tolerance for the resummed single-site comparison.
pub const FULL_MODE_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{size} fields exceed the moment cap of {cap}")]
    TooManyFields { size: usize, cap: usize },
    #[error("site {site} is out of range for {size} sites")]
    InvalidSite { site: usize, size: usize },
    #[error("quadrature needs at least {MIN_NODES} nodes per dimension, got {0}")]
    TooFewNodes(usize),
    #[error("quadrature is limited to {MAX_QUADRATURE_SITES} sites, model has {0}")]
    TooManySites(usize),
    #[error("integrand tail at cutoff {cutoff} is {ratio:e} of peak along direction {direction}; increase the cutoff")]
    TailBound { direction: usize, cutoff: f64, ratio: f64 },
    #[error("expected {expected} source entries, got {got}")]
    SourceLength { expected: usize, got: usize },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Wick(#[from] WickError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Genfun(#[from] GenfunError),
}

/// `sum over perfect matchings of prod (i Delta_xy)`; zero for odd sizes.
pub fn moment_oracle(delta: &Propagator, sites: &[usize]) -> Result<Complex64, OracleError> {
    moment_oracle_with_cap(delta, sites, DEFAULT_MOMENT_CAP)
}

pub fn moment_oracle_with_cap(delta: &Propagator, sites: &[usize], cap: usize) -> Result<Complex64, OracleError> {
    if sites.len() > cap {
        return Err(OracleError::TooManyFields { size: sites.len(), cap });
    }
    if let Some(&bad) = sites.iter().find(|&&x| x >= delta.size()) {
        return Err(OracleError::InvalidSite { site: bad, size: delta.size() });
    }
    if sites.len() % 2 == 1 {
        return Ok(ZERO);
    }
    let m = sites.len();
    let mut total = ZERO;
    for term in enumerate_pairings(m, m / 2)? {
        total += term.pairs().iter().map(|&(a, b)| I * delta.get(sites[a - 1], sites[b - 1])).product::<Complex64>();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuadratureMode {
    /// Expand `exp(-i lambda/4! sum phi^4)` and integrate each order.
    PerOrder { p_max: usize },
    /// Integrate the full interaction at a fixed coupling.
    Full { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Half-width of the integration box along each rotated direction;
    /// chosen per direction from the tail envelope when absent.
    pub cutoff: Option<f64>,
    pub nodes: usize,
    pub mode: QuadratureMode,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { cutoff: None, nodes: MIN_NODES, mode: QuadratureMode::PerOrder { p_max: 2 } }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ComplexSum {
    re: Neumaier,
    im: Neumaier,
}

impl ComplexSum {
    fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Rotated integration variables: `phi = M v`, Gaussian weight
/// `exp(-sum_k width_k v_k^2)`.
struct Contour {
    map: DMatrix<Complex64>,
    widths: Vec<f64>,
    axes: Vec<Vec<f64>>,
    steps: Vec<f64>,
}

fn log_envelope(v: f64, degree: usize, width: f64, growth: f64) -> f64 {
    degree as f64 * (1.0 + v).ln() - width * v * v + growth * v
}

fn envelope_peak(degree: usize, width: f64, growth: f64) -> f64 {
    // d/dv log_envelope is strictly decreasing in v
    let slope = |v: f64| degree as f64 / (1.0 + v) - 2.0 * width * v + growth;
    if slope(0.0) <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while slope(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn tail_ratio(cutoff: f64, degree: usize, width: f64, growth: f64) -> f64 {
    let peak = envelope_peak(degree, width, growth);
    if cutoff <= peak {
        return 1.0;
    }
    (log_envelope(cutoff, degree, width, growth) - log_envelope(peak, degree, width, growth)).exp()
}

fn auto_cutoff(degree: usize, width: f64, growth: f64) -> f64 {
    let peak = envelope_peak(degree, width, growth);
    let target = log_envelope(peak, degree, width, growth) + AUTO_TAIL_RATIO.ln();
    let mut hi = peak + 1.0;
    while log_envelope(hi, degree, width, growth) > target {
        hi *= 2.0;
    }
    let mut lo = peak;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_envelope(mid, degree, width, growth) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn real_part(kernel: &Kernel) -> DMatrix<f64> {
    kernel.matrix().map(|z| z.re)
}

fn build_contour(
    kernel: &Kernel,
    quad: &QuadratureSpec,
    degree: usize,
    source: &[f64],
) -> Result<Contour, OracleError> {
    let n = kernel.size();
    if n > MAX_QUADRATURE_SITES {
        return Err(OracleError::TooManySites(n));
    }
    if quad.nodes < MIN_NODES {
        return Err(OracleError::TooFewNodes(quad.nodes));
    }
    let eps = kernel.epsilon();
    let eigen = SymmetricEigen::new(real_part(kernel));
    let mut map = DMatrix::zeros(n, n);
    let mut widths = Vec::with_capacity(n);
    let mut axes = Vec::with_capacity(n);
    let mut steps = Vec::with_capacity(n);
    for k in 0..n {
        // exp(-(i/2) mu u^2 - (eps/2) u^2) = exp(-c u^2), u = e^{i alpha} v
        let c = Complex64::new(eps, eigen.eigenvalues[k]) / 2.0;
        let alpha = -0.5 * c.arg();
        let phase = Complex64::from_polar(1.0, alpha);
        for x in 0..n {
            map[(x, k)] = eigen.eigenvectors[(x, k)] * phase;
        }
        let width = c.norm();
        let growth: f64 = (0..n).map(|x| source[x] * map[(x, k)].im).sum::<f64>().abs();
        let cutoff = match quad.cutoff {
            Some(l) => {
                let ratio = tail_ratio(l, degree, width, growth);
                if ratio > TAIL_LIMIT {
                    return Err(OracleError::TailBound { direction: k, cutoff: l, ratio });
                }
                l
            }
            None => auto_cutoff(degree, width, growth),
        };
        let h = 2.0 * cutoff / (quad.nodes - 1) as f64;
        axes.push((0..quad.nodes).map(|j| -cutoff + j as f64 * h).collect());
        steps.push(h);
        widths.push(width);
    }
    Ok(Contour { map, widths, axes, steps })
}

impl Contour {
    /// Calls `f(phi, weight)` at every node of the tensor grid, in a fixed
    /// lexicographic order. The constant Jacobian of the rotation is omitted;
    /// it cancels in every normalized quantity.
    fn for_each<F: FnMut(&[Complex64], f64)>(&self, mut f: F) {
        let n = self.widths.len();
        let nodes = self.axes[0].len();
        let mut index = vec![0usize; n];
        let mut phi = vec![ZERO; n];
        loop {
            let mut exponent = 0.0;
            let mut weight = 1.0;
            for (k, &i) in index.iter().enumerate() {
                let v = self.axes[k][i];
                exponent += self.widths[k] * v * v;
                let edge = i == 0 || i == nodes - 1;
                weight *= if edge { 0.5 * self.steps[k] } else { self.steps[k] };
            }
            for (x, p) in phi.iter_mut().enumerate() {
                *p = (0..n).map(|k| self.map[(x, k)] * self.axes[k][index[k]]).sum();
            }
            f(&phi, weight * (-exponent).exp());
            let mut k = 0;
            loop {
                if k == n {
                    return;
                }
                index[k] += 1;
                if index[k] < nodes {
                    break;
                }
                index[k] = 0;
                k += 1;
            }
        }
    }
}

fn check_source(n: usize, source: &[f64]) -> Result<(), OracleError> {
    if source.len() != n {
        return Err(OracleError::SourceLength { expected: n, got: source.len() });
    }
    Ok(())
}

fn source_phase(source: &[f64], phi: &[Complex64]) -> Complex64 {
    (I * source.iter().zip(phi).map(|(j, p)| *j * *p).sum::<Complex64>()).exp()
}

fn quartic_sum(phi: &[Complex64]) -> Complex64 {
    phi.iter().map(|p| (p * p) * (p * p)).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentValues {
    pub points: Vec<usize>,
    #[serde(serialize_with = "serialize_complex_vec")]
    pub per_order: Vec<Complex64>,
}

/// Per-order integrals, each divided by the free `J = 0` integral.
#[derive(Debug, Clone, Serialize)]
pub struct PerOrderValues {
    pub p_max: usize,
    pub source: Vec<f64>,
    /// `Z_p(J)`.
    #[serde(serialize_with = "serialize_complex_vec")]
    pub z: Vec<Complex64>,
    /// `Z_p(0)`.
    #[serde(serialize_with = "serialize_complex_vec")]
    pub vacuum: Vec<Complex64>,
    /// `<phi_x1 ... phi_xn>` at `J = 0`, unnormalized by the interacting vacuum.
    pub moments: Vec<MomentValues>,
}

impl PerOrderValues {
    /// `Z(J) / Z(0)` as a series in `lambda`.
    pub fn normalized_z(&self) -> Result<Vec<Complex64>, OracleError> {
        Ok(series_product(&self.z, &invert_series(&self.vacuum)?))
    }

    /// Moments divided by `Z(0)` as a series in `lambda`.
    pub fn normalized_moments(&self) -> Result<Vec<MomentValues>, OracleError> {
        let inverse = invert_series(&self.vacuum)?;
        Ok(self
            .moments
            .iter()
            .map(|m| MomentValues { points: m.points.clone(), per_order: series_product(&m.per_order, &inverse) })
            .collect())
    }
}

fn series_product(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    (0..a.len()).map(|p| (0..=p).map(|k| a[k] * b[p - k]).sum()).collect()
}

fn factorial(p: usize) -> f64 {
    (1..=p).map(|k| k as f64).product()
}

fn kernel_for(spec: &ModelSpec) -> Result<Kernel, OracleError> {
    let kernel = build_kernel(spec)?;
    if kernel.size() > MAX_QUADRATURE_SITES {
        return Err(OracleError::TooManySites(kernel.size()));
    }
    Ok(kernel)
}

/// Per-order integrals `(1/p!) (-i/4!)^p int (sum phi^4)^p (...) exp(-(i/2) phi K phi)`
/// for the source term and for each requested moment.
pub fn quadrature_per_order(
    spec: &ModelSpec,
    quad: &QuadratureSpec,
    source: &[f64],
    moment_sets: &[Vec<usize>],
) -> Result<PerOrderValues, OracleError> {
    let QuadratureMode::PerOrder { p_max } = quad.mode else {
        return Err(OracleError::Unsupported("per-order integrals need per-order mode".into()));
    };
    let kernel = kernel_for(spec)?;
    let n = kernel.size();
    check_source(n, source)?;
    for set in moment_sets {
        if let Some(&bad) = set.iter().find(|&&x| x >= n) {
            return Err(OracleError::InvalidSite { site: bad, size: n });
        }
    }
    let max_points = moment_sets.iter().map(Vec::len).max().unwrap_or(0);
    let contour = build_contour(&kernel, quad, 4 * p_max + max_points, source)?;
    let factors: Vec<Complex64> =
        (0..=p_max).map(|p| Complex64::new(0.0, -1.0 / 24.0).powu(p as u32) / factorial(p)).collect();
    let mut z = vec![ComplexSum::default(); p_max + 1];
    let mut vacuum = vec![ComplexSum::default(); p_max + 1];
    let mut moments = vec![vec![ComplexSum::default(); p_max + 1]; moment_sets.len()];
    let mut terms = vec![ZERO; p_max + 1];
    contour.for_each(|phi, weight| {
        let s4 = quartic_sum(phi);
        let mut power = Complex64::new(weight, 0.0);
        for p in 0..=p_max {
            terms[p] = power * factors[p];
            power *= s4;
        }
        let phase = source_phase(source, phi);
        for p in 0..=p_max {
            z[p].add(terms[p] * phase);
            vacuum[p].add(terms[p]);
        }
        for (set, acc) in moment_sets.iter().zip(moments.iter_mut()) {
            let insertion: Complex64 = set.iter().map(|&x| phi[x]).product();
            for p in 0..=p_max {
                acc[p].add(terms[p] * insertion);
            }
        }
    });
    let norm = vacuum[0].value();
    let scale = |acc: &[ComplexSum]| acc.iter().map(|a| a.value() / norm).collect::<Vec<_>>();
    Ok(PerOrderValues {
        p_max,
        source: source.to_vec(),
        z: scale(&z),
        vacuum: scale(&vacuum),
        moments: moment_sets
            .iter()
            .zip(&moments)
            .map(|(set, acc)| MomentValues { points: set.clone(), per_order: scale(acc) })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum QuadratureValue {
    #[serde(serialize_with = "serialize_complex_vec")]
    PerOrder(Vec<Complex64>),
    #[serde(serialize_with = "serialize_complex")]
    Full(Complex64),
}

/// `Z[J]` divided by the free `J = 0` integral, per order or resummed
/// according to the mode.
///
/// The resummed mode is available only for a single site with a positive
/// real kernel, where the rotated ray also damps the quartic term.
pub fn quadrature_z(spec: &ModelSpec, quad: &QuadratureSpec, source: &[f64]) -> Result<QuadratureValue, OracleError> {
    match quad.mode {
        QuadratureMode::PerOrder { .. } => {
            Ok(QuadratureValue::PerOrder(quadrature_per_order(spec, quad, source, &[])?.z))
        }
        QuadratureMode::Full { lambda } => {
            let kernel = kernel_for(spec)?;
            check_source(kernel.size(), source)?;
            if kernel.size() != 1 || kernel.matrix()[(0, 0)].re <= 0.0 {
                return Err(OracleError::Unsupported(
                    "resummed quadrature needs a single site with positive real kernel".into(),
                ));
            }
            let contour = build_contour(&kernel, quad, 0, source)?;
            let coupling = Complex64::new(0.0, -lambda / 24.0);
            let mut interacting = ComplexSum::default();
            let mut free = ComplexSum::default();
            contour.for_each(|phi, weight| {
                interacting.add(weight * (coupling * quartic_sum(phi)).exp() * source_phase(source, phi));
                free.add(Complex64::new(weight, 0.0));
            });
            Ok(QuadratureValue::Full(interacting.value() / free.value()))
        }
    }
}

/// `J_x = scale (1 + x) (-1)^x`.
pub fn default_source(sites: usize, scale: f64) -> Vec<f64> {
    (0..sites).map(|x| scale * (1.0 + x as f64) * if x % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

/// All `x <= y` pairs and nondecreasing 4-tuples over `sites`.
pub fn comparison_points(sites: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for a in 0..sites {
        for b in a..sites {
            out.push(vec![a, b]);
        }
    }
    for a in 0..sites {
        for b in a..sites {
            for c in b..sites {
                for d in c..sites {
                    out.push(vec![a, b, c, d]);
                }
            }
        }
    }
    out
}

fn relative_deviation(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(DEVIATION_FLOOR)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareEntry {
    pub quantity: String,
    pub order: usize,
    #[serde(serialize_with = "serialize_complex")]
    pub series: Complex64,
    #[serde(serialize_with = "serialize_complex")]
    pub quadrature: Complex64,
    pub absolute_deviation: f64,
    pub relative_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub sites: usize,
    pub p_max: usize,
    pub nodes: usize,
    pub tolerance: f64,
    pub source: Vec<f64>,
    pub entries: Vec<CompareEntry>,
    pub max_relative_deviation: f64,
    pub pass: bool,
}

impl CompareReport {
    pub fn first_failure(&self) -> Option<&CompareEntry> {
        self.entries.iter().find(|e| !e.pass)
    }
}

/// Normalized `Z(J)` and the 2- and 4-point functions, order by order, from
/// the perturbative series and from the quadrature.
pub fn compare_routes(
    spec: &ModelSpec,
    quad: &QuadratureSpec,
    source: &[f64],
    tolerance: f64,
) -> Result<CompareReport, OracleError> {
    let QuadratureMode::PerOrder { p_max } = quad.mode else {
        return Err(OracleError::Unsupported("route comparison runs per order".into()));
    };
    if p_max > DEFAULT_ORDER_CAP {
        return Err(GenfunError::OrderCapExceeded { requested: p_max, cap: DEFAULT_ORDER_CAP }.into());
    }
    let kernel = kernel_for(spec)?;
    let n = kernel.size();
    check_source(n, source)?;
    let delta: Arc<Propagator> = Arc::new(propagator(&kernel)?);
    let series = z_series(&delta, p_max)?.normalize()?;
    let points = comparison_points(n);
    let quadrature = quadrature_per_order(spec, quad, source, &points)?;

    let mut entries = Vec::new();
    let mut push = |quantity: String, series_values: &[Complex64], quad_values: &[Complex64]| {
        for p in 0..=p_max {
            let (a, b) = (series_values[p], quad_values[p]);
            let rel = relative_deviation(a, b);
            entries.push(CompareEntry {
                quantity: quantity.clone(),
                order: p,
                series: a,
                quadrature: b,
                absolute_deviation: (a - b).norm(),
                relative_deviation: rel,
                pass: rel <= tolerance && rel.is_finite(),
            });
        }
    };
    push("Z(J)".into(), &series.evaluate(source)?, &quadrature.normalized_z()?);
    for moment in quadrature.normalized_moments()? {
        let label = format!("G({})", moment.points.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
        push(label, &green(&series, &moment.points)?.per_order, &moment.per_order);
    }
    let max_relative_deviation = entries.iter().map(|e| e.relative_deviation).fold(0.0, f64::max);
    let pass = entries.iter().all(|e| e.pass);
    Ok(CompareReport {
        sites: n,
        p_max,
        nodes: quad.nodes,
        tolerance,
        source: source.to_vec(),
        entries,
        max_relative_deviation,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FullComparison {
    pub lambda: f64,
    pub series_order: usize,
    #[serde(serialize_with = "serialize_complex")]
    pub series: Complex64,
    #[serde(serialize_with = "serialize_complex")]
    pub quadrature: Complex64,
    pub relative_deviation: f64,
    pub pass: bool,
}

/// Resummed single-site integral against the unnormalized series summed
/// through `series_order`.
pub fn compare_full(
    spec: &ModelSpec,
    quad: &QuadratureSpec,
    source: &[f64],
    series_order: usize,
) -> Result<FullComparison, OracleError> {
    let QuadratureMode::Full { lambda } = quad.mode else {
        return Err(OracleError::Unsupported("resummed comparison needs full mode".into()));
    };
    let QuadratureValue::Full(quadrature) = quadrature_z(spec, quad, source)? else {
        unreachable!("full mode yields a single value")
    };
    let delta = Arc::new(propagator(&build_kernel(spec)?)?);
    let series = z_series(&delta, series_order)?.sum_at(lambda, source)?;
    let relative_deviation = relative_deviation(series, quadrature);
    Ok(FullComparison {
        lambda,
        series_order,
        series,
        quadrature,
        relative_deviation,
        pass: relative_deviation < FULL_MODE_TOLERANCE,
    })
}
