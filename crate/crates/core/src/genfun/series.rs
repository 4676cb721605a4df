use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::poly::{serialize_complex_vec, GaussianPolynomial, Monomial};
use super::GenfunError;
use crate::lattice::Propagator;

/// Highest perturbative order accepted unless overridden.
pub const DEFAULT_ORDER_CAP: usize = 6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesOptions {
    pub order_cap: usize,
    /// Per-site measure for the vertex sum `sum_x w_x (D_x)^4`; all ones
    /// when absent. A time grid with spacing `dt` uses `w_x = dt`.
    pub vertex_weights: Option<Vec<f64>>,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self { order_cap: DEFAULT_ORDER_CAP, vertex_weights: None }
    }
}

impl SeriesOptions {
    fn weights(&self, n: usize) -> Result<Vec<f64>, GenfunError> {
        match &self.vertex_weights {
            None => Ok(vec![1.0; n]),
            Some(w) if w.len() == n => Ok(w.clone()),
            Some(w) => Err(GenfunError::SourceLength { expected: n, got: w.len() }),
        }
    }

    fn check_order(&self, p_max: usize) -> Result<(), GenfunError> {
        if p_max > self.order_cap {
            Err(GenfunError::OrderCapExceeded { requested: p_max, cap: self.order_cap })
        } else {
            Ok(())
        }
    }
}

/// Coefficients of `lambda^p`, `p = 0..=p_max`, each a polynomial carried
/// against the Gaussian. The power of `lambda` itself is not stored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbativeSeries {
    orders: Vec<GaussianPolynomial>,
    normalized: bool,
}

impl PerturbativeSeries {
    pub fn orders(&self) -> &[GaussianPolynomial] {
        &self.orders
    }

    pub fn order(&self, p: usize) -> Option<&GaussianPolynomial> {
        self.orders.get(p)
    }

    pub fn max_order(&self) -> usize {
        self.orders.len() - 1
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn propagator(&self) -> &Arc<Propagator> {
        self.orders[0].propagator()
    }

    /// `<0|U_M|0>` at `J = 0`, order by order.
    pub fn vacuum_coefficients(&self) -> Vec<Complex64> {
        self.orders.iter().map(GaussianPolynomial::constant_term).collect()
    }

    /// Per-order values at a real source.
    pub fn evaluate(&self, source: &[f64]) -> Result<Vec<Complex64>, GenfunError> {
        self.orders.iter().map(|p| p.evaluate(source)).collect()
    }

    /// Sum over orders at coupling `lambda`.
    pub fn sum_at(&self, lambda: f64, source: &[f64]) -> Result<Complex64, GenfunError> {
        let values = self.evaluate(source)?;
        Ok(values.iter().rev().fold(ZERO, |acc, v| acc * lambda + v))
    }

    /// Divides by the `J = 0` value, itself a series in `lambda`.
    ///
    /// Afterwards the `J = 0` value is exactly 1 at order 0 and exactly 0 at
    /// every higher order, so normalizing twice is a no-op.
    pub fn normalize(&self) -> Result<Self, GenfunError> {
        let vacuum = self.vacuum_coefficients();
        let inverse = invert_series(&vacuum)?;
        let mut orders = Vec::with_capacity(self.orders.len());
        for p in 0..self.orders.len() {
            let mut term = self.orders[p].scale(inverse[0]);
            for (k, &inv) in inverse.iter().enumerate().take(p + 1).skip(1) {
                term.add_scaled_in_place(&self.orders[p - k], inv);
            }
            if p > 0 {
                term.remove_constant_term();
            }
            orders.push(term);
        }
        Ok(Self { orders, normalized: true })
    }
}

/// Reciprocal of a power series with nonzero constant term.
pub fn invert_series(coefficients: &[Complex64]) -> Result<Vec<Complex64>, GenfunError> {
    let c0 = coefficients.first().copied().unwrap_or(ZERO);
    if c0 == ZERO {
        return Err(GenfunError::VanishingVacuum);
    }
    let mut inv = vec![c0.inv()];
    for p in 1..coefficients.len() {
        let acc: Complex64 = (1..=p).map(|k| coefficients[k] * inv[p - k]).sum();
        let next = -acc * inv[0];
        inv.push(if next.norm() == 0.0 { ZERO } else { next });
    }
    Ok(inv)
}

/// `sum_x w_x (D_x)^4 P`.
fn apply_vertex(poly: &GaussianPolynomial, weights: &[f64]) -> Result<GaussianPolynomial, GenfunError> {
    let mut total = GaussianPolynomial::constant(Arc::clone(poly.propagator()), ZERO);
    if poly.has_source_exponential() {
        total = GaussianPolynomial::source_exponential_gaussian(Arc::clone(poly.propagator())).scale(ZERO);
    }
    for (x, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let quartic = poly.source_derivatives(&[x, x, x, x])?;
        total.add_scaled_in_place(&quartic, Complex64::new(w, 0.0));
    }
    Ok(total)
}

fn build_series(
    base: GaussianPolynomial,
    p_max: usize,
    options: &SeriesOptions,
    truncate_for_zero: bool,
) -> Result<PerturbativeSeries, GenfunError> {
    options.check_order(p_max)?;
    let weights = options.weights(base.propagator().size())?;
    // (1/p!) (-i/4!)^p V^p G, built as T_p = V T_(p-1) * (-i/24) / p
    let step = Complex64::new(0.0, -1.0 / 24.0);
    let mut orders = vec![base];
    for p in 1..=p_max {
        let mut next = apply_vertex(&orders[p - 1], &weights)?.scale(step / p as f64);
        if truncate_for_zero {
            next.truncate_source_degree(4 * (p_max - p));
        }
        orders.push(next);
    }
    if truncate_for_zero {
        orders[0].truncate_source_degree(4 * p_max);
    }
    Ok(PerturbativeSeries { orders, normalized: false })
}

/// The unnormalized perturbative `<0|U_M|0>` as a function of the source,
/// through order `lambda^p_max`.
pub fn z_series(delta: &Arc<Propagator>, p_max: usize) -> Result<PerturbativeSeries, GenfunError> {
    z_series_with(delta, p_max, &SeriesOptions::default())
}

pub fn z_series_with(
    delta: &Arc<Propagator>,
    p_max: usize,
    options: &SeriesOptions,
) -> Result<PerturbativeSeries, GenfunError> {
    build_series(GaussianPolynomial::gaussian(Arc::clone(delta)), p_max, options, false)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenResult {
    pub points: Vec<usize>,
    #[serde(serialize_with = "serialize_complex_vec")]
    pub per_order: Vec<Complex64>,
    pub normalized: bool,
}

impl GreenResult {
    pub fn sum_at(&self, lambda: f64) -> Complex64 {
        self.per_order.iter().rev().fold(ZERO, |acc, v| acc * lambda + v)
    }
}

/// `G(x_1..x_n) = (1/i^n) d^n Z / dJ_(x_1)..dJ_(x_n)` at `J = 0`, per order.
/// Odd point counts come out as exact zeros.
pub fn green(series: &PerturbativeSeries, points: &[usize]) -> Result<GreenResult, GenfunError> {
    let n = series.propagator().size();
    if let Some(&bad) = points.iter().find(|&&x| x >= n) {
        return Err(GenfunError::InvalidSite { site: bad, size: n });
    }
    let mut per_order = Vec::with_capacity(series.orders.len());
    for poly in &series.orders {
        let mut current = poly.clone();
        current.truncate_source_degree(points.len());
        for (k, &x) in points.iter().enumerate() {
            current = current.source_derivative(x)?;
            current.truncate_source_degree(points.len() - k - 1);
        }
        per_order.push(current.evaluate_at_zero()?);
    }
    Ok(GreenResult { points: points.to_vec(), per_order, normalized: series.normalized })
}

/// A polynomial in normal-ordered formal fields `:phi_x1 ... phi_xk:`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldPolynomial {
    pub terms: BTreeMap<Vec<usize>, Complex64>,
}

impl Serialize for FieldPolynomial {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = serializer.serialize_seq(Some(self.terms.len()))?;
        for (fields, c) in &self.terms {
            seq.serialize_element(&(fields, [c.re, c.im]))?;
        }
        seq.end()
    }
}

/// The S-matrix, per order in `lambda`, at the source-functional level:
/// `N_r exp(-i (lambda/4!) sum_x w_x D_x^4) :exp(i B): exp(-(i/2) D)` at `J = 0`,
/// with `B = sum_x J_x phi_x`.
pub fn smatrix_series(
    delta: &Arc<Propagator>,
    p_max: usize,
    options: &SeriesOptions,
) -> Result<Vec<FieldPolynomial>, GenfunError> {
    let base = GaussianPolynomial::source_exponential_gaussian(Arc::clone(delta));
    let series = build_series(base, p_max, options, true)?.normalize()?;
    Ok(series
        .orders
        .iter()
        .map(|poly| FieldPolynomial {
            terms: poly
                .terms()
                .iter()
                .filter(|(m, _)| m.sources.is_empty())
                .map(|(m, c): (&Monomial, &Complex64)| (m.fields.clone(), *c))
                .collect(),
        })
        .collect())
}
