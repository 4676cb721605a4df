use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use super::GenfunError;
use crate::lattice::Propagator;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A product of source factors and formal field symbols, each stored as a
/// sorted list of site indices (a multiset).
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Monomial {
    pub sources: Vec<usize>,
    pub fields: Vec<usize>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn new(mut sources: Vec<usize>, mut fields: Vec<usize>) -> Self {
        sources.sort_unstable();
        fields.sort_unstable();
        Self { sources, fields }
    }

    pub fn is_one(&self) -> bool {
        self.sources.is_empty() && self.fields.is_empty()
    }

    pub fn source_degree(&self) -> usize {
        self.sources.len()
    }

    fn with_source(&self, x: usize) -> Self {
        let mut sources = self.sources.clone();
        let at = sources.partition_point(|&s| s <= x);
        sources.insert(at, x);
        Self { sources, fields: self.fields.clone() }
    }

    fn with_field(&self, x: usize) -> Self {
        let mut fields = self.fields.clone();
        let at = fields.partition_point(|&s| s <= x);
        fields.insert(at, x);
        Self { sources: self.sources.clone(), fields }
    }

    /// Removes one copy of source factor `x`; returns its multiplicity
    /// before removal.
    fn without_source(&self, x: usize) -> Option<(Self, usize)> {
        let count = self.sources.iter().filter(|&&s| s == x).count();
        if count == 0 {
            return None;
        }
        let at = self.sources.iter().position(|&s| s == x)?;
        let mut sources = self.sources.clone();
        sources.remove(at);
        Some((Self { sources, fields: self.fields.clone() }, count))
    }

    fn distinct_sources(&self) -> impl Iterator<Item = usize> + '_ {
        self.sources.iter().enumerate().filter(|&(k, s)| k == 0 || self.sources[k - 1] != *s).map(|(_, &s)| s)
    }

    fn mul(&self, other: &Self) -> Self {
        let mut sources = [self.sources.as_slice(), other.sources.as_slice()].concat();
        let mut fields = [self.fields.as_slice(), other.fields.as_slice()].concat();
        sources.sort_unstable();
        fields.sort_unstable();
        Self { sources, fields }
    }
}

fn accumulate(map: &mut BTreeMap<Monomial, Complex64>, key: Monomial, value: Complex64) {
    *map.entry(key).or_insert(Complex64::new(0.0, 0.0)) += value;
}

fn prune(map: &mut BTreeMap<Monomial, Complex64>) {
    map.retain(|_, c| *c != Complex64::new(0.0, 0.0));
}

/// A polynomial `P` standing for `P * exp(-(i/2) J^T Delta J)`, optionally
/// also times the normal-ordered source exponential `:exp(i sum_x J_x phi_x):`.
///
/// Source factors are kept in the shifted basis `s_x = -(Delta J)_x`: this is
/// what `(1/i) d/dJ_x` produces when it hits the Gaussian, and in this basis
/// the derivative reads `D_x = s_x + i sum_y Delta_xy d/ds_y`. Use
/// [`GaussianPolynomial::to_source_basis`] for the bare-`J` expansion.
#[derive(Debug, Clone)]
pub struct GaussianPolynomial {
    terms: BTreeMap<Monomial, Complex64>,
    propagator: Arc<Propagator>,
    source_exponential: bool,
}

impl PartialEq for GaussianPolynomial {
    fn eq(&self, other: &Self) -> bool {
        self.source_exponential == other.source_exponential && self.same_propagator(other) && self.terms == other.terms
    }
}

impl GaussianPolynomial {
    /// The bare Gaussian, i.e. the free `Z_0[J]`.
    pub fn gaussian(propagator: Arc<Propagator>) -> Self {
        Self::constant(propagator, Complex64::new(1.0, 0.0))
    }

    /// `:exp(i sum_x J_x phi_x): exp(-(i/2) J Delta J)`.
    pub fn source_exponential_gaussian(propagator: Arc<Propagator>) -> Self {
        let mut p = Self::gaussian(propagator);
        p.source_exponential = true;
        p
    }

    pub fn constant(propagator: Arc<Propagator>, value: Complex64) -> Self {
        let mut terms = BTreeMap::new();
        if value != Complex64::new(0.0, 0.0) {
            terms.insert(Monomial::one(), value);
        }
        Self { terms, propagator, source_exponential: false }
    }

    /// Builds a polynomial from shifted-basis monomials.
    pub fn from_terms(
        propagator: Arc<Propagator>,
        terms: impl IntoIterator<Item = (Monomial, Complex64)>,
    ) -> Result<Self, GenfunError> {
        let n = propagator.size();
        let mut map = BTreeMap::new();
        for (m, c) in terms {
            if let Some(&bad) = m.sources.iter().chain(&m.fields).find(|&&s| s >= n) {
                return Err(GenfunError::InvalidSite { site: bad, size: n });
            }
            let m = Monomial::new(m.sources, m.fields);
            accumulate(&mut map, m, c);
        }
        prune(&mut map);
        Ok(Self { terms: map, propagator, source_exponential: false })
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Complex64> {
        &self.terms
    }

    pub fn propagator(&self) -> &Arc<Propagator> {
        &self.propagator
    }

    pub fn has_source_exponential(&self) -> bool {
        self.source_exponential
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn source_degree(&self) -> usize {
        self.terms.keys().map(Monomial::source_degree).max().unwrap_or(0)
    }

    pub fn has_fields(&self) -> bool {
        self.terms.keys().any(|m| !m.fields.is_empty())
    }

    /// Coefficient of the monomial `1`.
    pub fn constant_term(&self) -> Complex64 {
        self.terms.get(&Monomial::one()).copied().unwrap_or_default()
    }

    pub(crate) fn same_propagator(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.propagator, &other.propagator) || self.propagator == other.propagator
    }

    fn check_site(&self, x: usize) -> Result<(), GenfunError> {
        let n = self.propagator.size();
        if x >= n {
            Err(GenfunError::InvalidSite { site: x, size: n })
        } else {
            Ok(())
        }
    }

    fn with_terms(&self, terms: BTreeMap<Monomial, Complex64>) -> Self {
        Self { terms, propagator: Arc::clone(&self.propagator), source_exponential: self.source_exponential }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut terms: BTreeMap<_, _> = self.terms.iter().map(|(m, c)| (m.clone(), c * factor)).collect();
        prune(&mut terms);
        self.with_terms(terms)
    }

    pub fn add(&self, other: &Self) -> Result<Self, GenfunError> {
        if !self.same_propagator(other) || self.source_exponential != other.source_exponential {
            return Err(GenfunError::PropagatorMismatch);
        }
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            accumulate(&mut terms, m.clone(), *c);
        }
        prune(&mut terms);
        Ok(self.with_terms(terms))
    }

    /// Adds `factor * other` into `self` in place.
    pub(crate) fn add_scaled_in_place(&mut self, other: &Self, factor: Complex64) {
        if factor == Complex64::new(0.0, 0.0) {
            return;
        }
        for (m, c) in &other.terms {
            accumulate(&mut self.terms, m.clone(), c * factor);
        }
        prune(&mut self.terms);
    }

    pub(crate) fn remove_constant_term(&mut self) {
        self.terms.remove(&Monomial::one());
    }

    /// Drops monomials whose source degree exceeds `degree`; they cannot
    /// reach `J = 0` within `degree` further derivatives.
    pub(crate) fn truncate_source_degree(&mut self, degree: usize) {
        self.terms.retain(|m, _| m.source_degree() <= degree);
    }

    /// `(1/i) d/dJ_x` applied to `P * Gaussian` (and the source exponential
    /// when present), re-expressed as a new polynomial times the same factors.
    pub fn source_derivative(&self, x: usize) -> Result<Self, GenfunError> {
        self.check_site(x)?;
        let delta = &self.propagator;
        let mut out = BTreeMap::new();
        for (m, &c) in &self.terms {
            // Gaussian factor: (1/i) d/dJ_x exp(-(i/2) J Delta J) = s_x exp(...)
            accumulate(&mut out, m.with_source(x), c);
            // Polynomial factor: (1/i) ds_y/dJ_x = i Delta_xy
            for y in m.distinct_sources() {
                if let Some((reduced, count)) = m.without_source(y) {
                    accumulate(&mut out, reduced, c * I * delta.get(x, y) * count as f64);
                }
            }
            if self.source_exponential {
                accumulate(&mut out, m.with_field(x), c);
            }
        }
        prune(&mut out);
        Ok(self.with_terms(out))
    }

    /// Applies `source_derivative` once per site in `sites`.
    pub fn source_derivatives(&self, sites: &[usize]) -> Result<Self, GenfunError> {
        sites.iter().try_fold(self.clone(), |p, &x| p.source_derivative(x))
    }

    /// Value at `J = 0`: every source-carrying monomial vanishes and the
    /// Gaussian is 1.
    pub fn evaluate_at_zero(&self) -> Result<Complex64, GenfunError> {
        if self.has_fields() {
            return Err(GenfunError::FieldsPresent);
        }
        Ok(self.constant_term())
    }

    /// Full value at a real source vector, Gaussian factor included.
    pub fn evaluate(&self, source: &[f64]) -> Result<Complex64, GenfunError> {
        if self.has_fields() {
            return Err(GenfunError::FieldsPresent);
        }
        let n = self.propagator.size();
        if source.len() != n {
            return Err(GenfunError::SourceLength { expected: n, got: source.len() });
        }
        let delta = self.propagator.matrix();
        let shifted: Vec<Complex64> =
            (0..n).map(|x| -(0..n).map(|y| delta[(x, y)] * source[y]).sum::<Complex64>()).collect();
        // J^T Delta J = -J . s
        let quadratic: Complex64 = -(0..n).map(|x| shifted[x] * source[x]).sum::<Complex64>();
        let gaussian = (-0.5 * I * quadratic).exp();
        let poly: Complex64 =
            self.terms.iter().map(|(m, c)| m.sources.iter().fold(*c, |acc, &x| acc * shifted[x])).sum();
        Ok(poly * gaussian)
    }

    /// Expands every `s_x = -sum_y Delta_xy J_y` into bare source monomials.
    pub fn to_source_basis(&self) -> SourcePolynomial {
        let n = self.propagator.size();
        let delta = self.propagator.matrix();
        let linear: Vec<SourcePolynomial> = (0..n)
            .map(|x| {
                SourcePolynomial::from_map((0..n).map(|y| (Monomial::new(vec![y], vec![]), -delta[(x, y)])).collect())
            })
            .collect();
        let mut total = SourcePolynomial::zero();
        for (m, &c) in &self.terms {
            let start = SourcePolynomial::from_map(
                [(Monomial { sources: vec![], fields: m.fields.clone() }, c)].into_iter().collect(),
            );
            let expanded = m.sources.iter().fold(start, |acc, &x| acc.mul(&linear[x]));
            total = total.add(&expanded);
        }
        total
    }

    /// Largest coefficient difference over the union of monomials.
    pub fn max_coefficient_gap(&self, other: &Self) -> f64 {
        coefficient_gap(&self.terms, &other.terms)
    }
}

pub(crate) fn coefficient_gap(a: &BTreeMap<Monomial, Complex64>, b: &BTreeMap<Monomial, Complex64>) -> f64 {
    let zero = Complex64::new(0.0, 0.0);
    a.keys()
        .chain(b.keys())
        .map(|m| (a.get(m).copied().unwrap_or(zero) - b.get(m).copied().unwrap_or(zero)).norm())
        .fold(0.0, f64::max)
}

/// A polynomial in bare sources `J_x` and formal fields, with no implicit
/// factors attached.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourcePolynomial {
    terms: BTreeMap<Monomial, Complex64>,
}

impl SourcePolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_map([(Monomial::one(), Complex64::new(1.0, 0.0))].into_iter().collect())
    }

    pub fn from_map(mut terms: BTreeMap<Monomial, Complex64>) -> Self {
        prune(&mut terms);
        Self { terms }
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Complex64> {
        &self.terms
    }

    pub fn coefficient(&self, m: &Monomial) -> Complex64 {
        self.terms.get(m).copied().unwrap_or_default()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            accumulate(&mut terms, m.clone(), *c);
        }
        Self::from_map(terms)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::from_map(self.terms.iter().map(|(m, c)| (m.clone(), c * factor)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                accumulate(&mut terms, ma.mul(mb), ca * cb);
            }
        }
        Self::from_map(terms)
    }

    pub fn pow(&self, n: usize) -> Self {
        (0..n).fold(Self::one(), |acc, _| acc.mul(self))
    }

    pub fn max_coefficient_gap(&self, other: &Self) -> f64 {
        coefficient_gap(&self.terms, &other.terms)
    }
}

/// Serializes a complex number as `[re, im]`.
pub fn serialize_complex<S: Serializer>(z: &Complex64, serializer: S) -> Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(serializer)
}

pub fn serialize_complex_vec<S: Serializer>(zs: &[Complex64], serializer: S) -> Result<S::Ok, S::Error> {
    let mut seq = serializer.serialize_seq(Some(zs.len()))?;
    for z in zs {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

#[derive(Serialize)]
struct TermRecord<'a> {
    sources: &'a [usize],
    fields: &'a [usize],
    #[serde(serialize_with = "serialize_complex")]
    coefficient: &'a Complex64,
}

fn serialize_terms<S: Serializer>(terms: &BTreeMap<Monomial, Complex64>, serializer: S) -> Result<S::Ok, S::Error> {
    let mut seq = serializer.serialize_seq(Some(terms.len()))?;
    for (m, c) in terms {
        seq.serialize_element(&TermRecord { sources: &m.sources, fields: &m.fields, coefficient: c })?;
    }
    seq.end()
}

impl Serialize for GaussianPolynomial {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("GaussianPolynomial", 3)?;
        st.serialize_field("basis", "shifted")?;
        st.serialize_field("source_exponential", &self.source_exponential)?;
        st.serialize_field("terms", &TermsView(&self.terms))?;
        st.end()
    }
}

impl Serialize for SourcePolynomial {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serialize_terms(&self.terms, serializer)
    }
}

struct TermsView<'a>(&'a BTreeMap<Monomial, Complex64>);

impl Serialize for TermsView<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serialize_terms(self.0, serializer)
    }
}
