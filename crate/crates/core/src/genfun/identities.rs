//! Source-functional checks of the S-matrix derivation: the kernel identity
//! `K_x (1/i) d/dJ_x exp(-(i/2) D) = J_x exp(-(i/2) D)` and `C^n G = B^n G`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::{GaussianPolynomial, Monomial, SourcePolynomial};
use super::GenfunError;
use crate::lattice::{Kernel, Propagator};

/// Per-coefficient tolerance for the identity checks.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// What happens to `K_x` acting on the field left behind when `(1/i) d/dJ_x`
/// hits an explicit source factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnShellRule {
    /// `K_x phi(x) = -i eps phi(x) -> 0`: the term is dropped.
    #[default]
    Drop,
    /// Keep the on-shell value `-i eps phi(x)`.
    RetainEpsilon,
}

#[derive(Debug, Clone, Serialize)]
pub struct KdReport {
    pub residual: f64,
    pub pass: bool,
}

fn check_sizes(kernel: &Kernel, delta: &Propagator) -> Result<(), GenfunError> {
    if kernel.size() != delta.size() {
        return Err(GenfunError::SourceLength { expected: kernel.size(), got: delta.size() });
    }
    Ok(())
}

/// Applies `sum_y K_xy (1/i) d/dJ_y` to the Gaussian for every `x` and
/// compares the result with `J_x`, coefficient by coefficient.
pub fn verify_kd_identity(kernel: &Kernel, delta: &Arc<Propagator>) -> Result<KdReport, GenfunError> {
    check_sizes(kernel, delta)?;
    let n = kernel.size();
    let gaussian = GaussianPolynomial::gaussian(Arc::clone(delta));
    let derivatives: Vec<SourcePolynomial> =
        (0..n).map(|y| gaussian.source_derivative(y).map(|p| p.to_source_basis())).collect::<Result<_, _>>()?;
    let mut residual = 0.0f64;
    for x in 0..n {
        let lhs =
            (0..n).fold(SourcePolynomial::zero(), |acc, y| acc.add(&derivatives[y].scale(kernel.matrix()[(x, y)])));
        let rhs = SourcePolynomial::from_map(
            [(Monomial::new(vec![x], vec![]), Complex64::new(1.0, 0.0))].into_iter().collect(),
        );
        residual = residual.max(lhs.max_coefficient_gap(&rhs));
    }
    Ok(KdReport { residual, pass: residual < IDENTITY_TOLERANCE })
}

/// `C = sum_x phi_x sum_y K_xy (1/i) d/dJ_y` applied to `P * Gaussian`.
///
/// The Gaussian part, `sum_x phi_x (K s)_x P`, is always kept. The part where
/// the derivative hits `P` is governed by `rule`.
pub fn apply_c(
    poly: &GaussianPolynomial,
    kernel: &Kernel,
    rule: OnShellRule,
) -> Result<GaussianPolynomial, GenfunError> {
    let delta = Arc::clone(poly.propagator());
    check_sizes(kernel, &delta)?;
    if poly.has_source_exponential() {
        return Err(GenfunError::Unsupported("C acts on plain Gaussian polynomials only".into()));
    }
    let n = kernel.size();
    let k = kernel.matrix();
    let mut terms: Vec<(Monomial, Complex64)> = Vec::new();
    for (m, &c) in poly.terms() {
        for x in 0..n {
            for y in 0..n {
                let kxy = k[(x, y)];
                if kxy != Complex64::new(0.0, 0.0) {
                    let mut sources = m.sources.clone();
                    sources.push(y);
                    let mut fields = m.fields.clone();
                    fields.push(x);
                    terms.push((Monomial::new(sources, fields), c * kxy));
                }
            }
        }
        if rule == OnShellRule::RetainEpsilon {
            // -i eps phi_x (1/i) dP/dJ_x = eps phi_x sum_z Delta_xz dP/ds_z
            let eps = kernel.epsilon();
            for (at, &z) in m.sources.iter().enumerate() {
                let mut reduced = m.sources.clone();
                reduced.remove(at);
                for x in 0..n {
                    let mut fields = m.fields.clone();
                    fields.push(x);
                    terms.push((Monomial::new(reduced.clone(), fields), c * eps * delta.get(x, z)));
                }
            }
        }
    }
    GaussianPolynomial::from_terms(delta, terms)
}

/// `B^n` with `B = sum_x J_x phi_x`, in bare sources.
pub fn b_power(sites: usize, n: usize) -> SourcePolynomial {
    let b = SourcePolynomial::from_map(
        (0..sites).map(|x| (Monomial::new(vec![x], vec![x]), Complex64::new(1.0, 0.0))).collect(),
    );
    b.pow(n)
}

#[derive(Debug, Clone, Serialize)]
pub struct CbCase {
    pub n: usize,
    pub max_coefficient_gap: f64,
    pub terms: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CbReport {
    pub rule: OnShellRule,
    pub cases: Vec<CbCase>,
    pub pass: bool,
}

/// Compares `C^n G` with `B^n G` for `n = 0..=n_max`, per coefficient in the
/// bare-source basis.
pub fn verify_c_equals_b(
    kernel: &Kernel,
    delta: &Arc<Propagator>,
    n_max: usize,
    rule: OnShellRule,
) -> Result<CbReport, GenfunError> {
    check_sizes(kernel, delta)?;
    let mut current = GaussianPolynomial::gaussian(Arc::clone(delta));
    let mut cases = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            current = apply_c(&current, kernel, rule)?;
        }
        let lhs = current.to_source_basis();
        let rhs = b_power(kernel.size(), n);
        let gap = lhs.max_coefficient_gap(&rhs);
        cases.push(CbCase { n, max_coefficient_gap: gap, terms: rhs.terms().len(), pass: gap < IDENTITY_TOLERANCE });
    }
    let pass = cases.iter().all(|c| c.pass);
    Ok(CbReport { rule, cases, pass })
}
