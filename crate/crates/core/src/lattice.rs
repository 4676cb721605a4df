//! Discrete kinetic kernel `K = d_t^2 - grad^2 + m^2 - i eps` and the Feynman
//! propagator `Delta = -K^-1`.
//!
//! All quantities are dimensionless; lattice spacings enter only through the
//! difference stencils.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Residual bound for `K Delta + I` on every propagator built by [`propagator`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("linear solve failed: residual {residual:e} exceeds {tolerance:e}")]
    SolveFailed { residual: f64, tolerance: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |M[{row},{col}] - M[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Geometry {
    /// A single space-time point.
    Point,
    /// A temporal chain of `sites` points.
    Chain { sites: usize, spacing: f64 },
    /// 1+1 dimensions, site index `t * space_sites + x`.
    Grid { time_sites: usize, space_sites: usize, time_spacing: f64, space_spacing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub geometry: Geometry,
    pub mass: f64,
    pub epsilon: f64,
    pub boundary: Boundary,
    pub coupling: f64,
}

impl ModelSpec {
    pub fn point(mass: f64, epsilon: f64, coupling: f64) -> Self {
        Self { geometry: Geometry::Point, mass, epsilon, boundary: Boundary::Periodic, coupling }
    }

    pub fn chain(sites: usize, spacing: f64, mass: f64, epsilon: f64, boundary: Boundary, coupling: f64) -> Self {
        Self { geometry: Geometry::Chain { sites, spacing }, mass, epsilon, boundary, coupling }
    }

    pub fn site_count(&self) -> usize {
        match self.geometry {
            Geometry::Point => 1,
            Geometry::Chain { sites, .. } => sites,
            Geometry::Grid { time_sites, space_sites, .. } => time_sites * space_sites,
        }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        let bad = |msg: String| Err(LatticeError::InvalidSpec(msg));
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad(format!("mass must be positive, got {}", self.mass));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be strictly positive, got {}", self.epsilon));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return bad(format!("coupling must be non-negative, got {}", self.coupling));
        }
        match self.geometry {
            Geometry::Point => {}
            Geometry::Chain { sites, spacing } => {
                if sites == 0 {
                    return bad("chain needs at least one site".into());
                }
                if !(spacing > 0.0 && spacing.is_finite()) {
                    return bad(format!("spacing must be positive, got {spacing}"));
                }
            }
            Geometry::Grid { time_sites, space_sites, time_spacing, space_spacing } => {
                if time_sites == 0 || space_sites == 0 {
                    return Err(LatticeError::UnsupportedGeometry(format!(
                        "{time_sites}x{space_sites} grid has no sites"
                    )));
                }
                if !(time_spacing > 0.0 && space_spacing > 0.0) {
                    return bad("grid spacings must be positive".into());
                }
            }
        }
        Ok(())
    }
}

/// Symmetric `N x N` complex kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    matrix: DMatrix<Complex64>,
    epsilon: f64,
}

impl Kernel {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Adds `weight * (phi_(j+1) - 2 phi_j + phi_(j-1))` along one axis of
/// length `len`, where `index(j)` maps the axis coordinate to a site.
fn add_second_difference(
    k: &mut DMatrix<Complex64>,
    len: usize,
    weight: f64,
    boundary: Boundary,
    index: impl Fn(usize) -> usize,
) {
    for j in 0..len {
        let row = index(j);
        k[(row, row)] -= Complex64::from(2.0 * weight);
        let neighbours = [(j + 1 < len).then(|| j + 1), j.checked_sub(1)];
        for (step, n) in neighbours.into_iter().enumerate() {
            let target = match (n, boundary) {
                (Some(n), _) => Some(n),
                (None, Boundary::Periodic) => Some(if step == 0 { 0 } else { len - 1 }),
                (None, Boundary::Dirichlet) => None,
            };
            if let Some(t) = target {
                k[(row, index(t))] += Complex64::from(weight);
            }
        }
    }
}

pub fn build_kernel(spec: &ModelSpec) -> Result<Kernel, LatticeError> {
    spec.validate()?;
    let n = spec.site_count();
    let diag = Complex64::new(spec.mass * spec.mass, -spec.epsilon);
    let mut k = DMatrix::from_diagonal_element(n, n, diag);
    match spec.geometry {
        Geometry::Point => {}
        Geometry::Chain { sites, spacing } => {
            add_second_difference(&mut k, sites, 1.0 / (spacing * spacing), spec.boundary, |j| j);
        }
        Geometry::Grid { time_sites, space_sites, time_spacing, space_spacing } => {
            let wt = 1.0 / (time_spacing * time_spacing);
            let wx = -1.0 / (space_spacing * space_spacing);
            for x in 0..space_sites {
                add_second_difference(&mut k, time_sites, wt, spec.boundary, |t| t * space_sites + x);
            }
            for t in 0..time_sites {
                add_second_difference(&mut k, space_sites, wx, spec.boundary, |x| t * space_sites + x);
            }
        }
    }
    Ok(Kernel { matrix: k, epsilon: spec.epsilon })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagatorOrigin {
    /// `Delta = -K^-1` from a kernel; satisfies the residual invariant.
    Lattice,
    /// Supplied directly; no kernel relation is implied.
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    matrix: DMatrix<Complex64>,
    origin: PropagatorOrigin,
}

impl Propagator {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn origin(&self) -> PropagatorOrigin {
        self.origin
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.matrix[(x, y)]
    }
}

/// `max |K Delta + I|`.
pub fn kernel_residual(kernel: &Kernel, delta: &Propagator) -> f64 {
    let n = kernel.size();
    let product = kernel.matrix() * delta.matrix() + DMatrix::<Complex64>::identity(n, n);
    product.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn propagator(kernel: &Kernel) -> Result<Propagator, LatticeError> {
    let n = kernel.size();
    let minus_identity = -DMatrix::<Complex64>::identity(n, n);
    let solved = kernel.matrix.clone().lu().solve(&minus_identity);
    let Some(solved) = solved else {
        return Err(LatticeError::SolveFailed { residual: f64::INFINITY, tolerance: RESIDUAL_TOLERANCE });
    };
    // Exact symmetry: the solve only gets it to rounding.
    let symmetric = (&solved + solved.transpose()).scale(0.5);
    let delta = Propagator { matrix: symmetric, origin: PropagatorOrigin::Lattice };
    let residual = kernel_residual(kernel, &delta);
    if residual.is_nan() || residual >= RESIDUAL_TOLERANCE {
        return Err(LatticeError::SolveFailed { residual, tolerance: RESIDUAL_TOLERANCE });
    }
    Ok(delta)
}

/// Wraps a caller-supplied symmetric matrix. The matrix is stored as given.
pub fn external_propagator(matrix: DMatrix<Complex64>) -> Result<Propagator, LatticeError> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(LatticeError::NotSquare { rows, cols });
    }
    let scale = matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for i in 0..rows {
        for j in i + 1..cols {
            let gap = (matrix[(i, j)] - matrix[(j, i)]).norm();
            if gap > 1e-12 * scale {
                return Err(LatticeError::NotSymmetric { row: i, col: j, gap });
            }
        }
    }
    Ok(Propagator { matrix, origin: PropagatorOrigin::External })
}

/// Periodic-chain propagator by discrete Fourier diagonalization,
/// `Delta_jl = -(1/N) sum_k exp(2 pi i k (j-l)/N) / (4 sin^2(pi k/N)(-1/a^2) + m^2 - i eps)`.
///
/// Independent of the dense solve; used to cross-check it.
pub fn fourier_chain_propagator(spec: &ModelSpec) -> Result<Propagator, LatticeError> {
    spec.validate()?;
    let (n, spacing) = match (spec.geometry, spec.boundary) {
        (Geometry::Chain { sites, spacing }, Boundary::Periodic) => (sites, spacing),
        _ => return Err(LatticeError::UnsupportedGeometry("Fourier diagonalization needs a periodic chain".into())),
    };
    let eigen: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / n as f64;
            let stencil = (2.0 * theta.cos() - 2.0) / (spacing * spacing);
            Complex64::new(stencil + spec.mass * spec.mass, -spec.epsilon)
        })
        .collect();
    let matrix = DMatrix::from_fn(n, n, |j, l| {
        let sep = j as f64 - l as f64;
        let sum: Complex64 = eigen
            .iter()
            .enumerate()
            .map(|(k, mu)| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * sep / n as f64) / mu)
            .sum();
        -sum / n as f64
    });
    Ok(Propagator { matrix, origin: PropagatorOrigin::Lattice })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_gap(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn point_kernel_and_propagator() {
        let spec = ModelSpec::point(1.0, 0.1, 0.0);
        let k = build_kernel(&spec).unwrap();
        assert_eq!(k.matrix()[(0, 0)], c(1.0, -0.1));
        let d = propagator(&k).unwrap();
        let expected = -Complex64::from(1.0) / c(1.0, -0.1);
        assert!((d.get(0, 0) - expected).norm() < 1e-15);
    }

    #[test]
    fn two_site_periodic_chain_doubles_the_off_diagonal() {
        let spec = ModelSpec::chain(2, 1.0, 1.0, 0.1, Boundary::Periodic, 0.0);
        let k = build_kernel(&spec).unwrap();
        // Hand-assembled: -2/a^2 + m^2 - i eps on the diagonal, both
        // neighbours of each site are the other site.
        let expected = DMatrix::from_row_slice(2, 2, &[c(-1.0, -0.1), c(2.0, 0.0), c(2.0, 0.0), c(-1.0, -0.1)]);
        assert_eq!(k.matrix(), &expected);
    }

    #[test]
    fn dirichlet_chain_has_no_wrap() {
        let spec = ModelSpec::chain(3, 0.5, 1.0, 0.2, Boundary::Dirichlet, 0.0);
        let k = build_kernel(&spec).unwrap();
        assert_eq!(k.matrix()[(0, 2)], Complex64::from(0.0));
        assert_eq!(k.matrix()[(0, 1)], Complex64::from(4.0));
        assert_eq!(k.matrix()[(1, 1)], c(-7.0, -0.2));
    }

    #[test]
    fn kernels_are_exactly_symmetric_with_damped_diagonal() {
        let specs = [
            ModelSpec::chain(7, 0.7, 1.3, 0.05, Boundary::Periodic, 0.0),
            ModelSpec::chain(5, 1.0, 0.5, 0.2, Boundary::Dirichlet, 0.0),
            ModelSpec {
                geometry: Geometry::Grid { time_sites: 3, space_sites: 4, time_spacing: 1.0, space_spacing: 0.8 },
                mass: 1.0,
                epsilon: 0.1,
                boundary: Boundary::Periodic,
                coupling: 0.0,
            },
        ];
        for spec in specs {
            let k = build_kernel(&spec).unwrap();
            assert_eq!(k.matrix(), &k.matrix().transpose());
            for i in 0..k.size() {
                assert_eq!(k.matrix()[(i, i)].im, -spec.epsilon);
            }
        }
    }

    #[test]
    fn residual_holds_up_to_64_sites() {
        for n in [1, 2, 4, 8, 16, 64] {
            for boundary in [Boundary::Periodic, Boundary::Dirichlet] {
                let spec = ModelSpec::chain(n, 1.0, 1.0, 0.1, boundary, 0.0);
                let k = build_kernel(&spec).unwrap();
                let d = propagator(&k).unwrap();
                assert!(kernel_residual(&k, &d) < RESIDUAL_TOLERANCE);
                assert_eq!(d.matrix(), &d.matrix().transpose());
            }
        }
    }

    #[test]
    fn dense_solve_matches_fourier_diagonalization() {
        for n in [1, 2, 3, 4, 9, 32] {
            let spec = ModelSpec::chain(n, 0.8, 1.1, 0.1, Boundary::Periodic, 0.0);
            let dense = propagator(&build_kernel(&spec).unwrap()).unwrap();
            let fourier = fourier_chain_propagator(&spec).unwrap();
            assert!(max_gap(dense.matrix(), fourier.matrix()) < 1e-10, "n={n}");
        }
    }

    #[test]
    fn external_propagator_round_trip_and_rejection() {
        let m = DMatrix::from_diagonal_element(3, 3, c(0.0, -0.5));
        let p = external_propagator(m.clone()).unwrap();
        assert_eq!(p.matrix(), &m);
        assert_eq!(p.origin(), PropagatorOrigin::External);

        let mut skew = m.clone();
        skew[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(external_propagator(skew), Err(LatticeError::NotSymmetric { .. })));
        let rect = DMatrix::<Complex64>::zeros(2, 3);
        assert!(matches!(external_propagator(rect), Err(LatticeError::NotSquare { .. })));
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(build_kernel(&ModelSpec::point(1.0, 0.0, 0.0)).is_err());
        assert!(build_kernel(&ModelSpec::point(-1.0, 0.1, 0.0)).is_err());
        assert!(build_kernel(&ModelSpec::chain(0, 1.0, 1.0, 0.1, Boundary::Periodic, 0.0)).is_err());
        let dirichlet = ModelSpec::chain(4, 1.0, 1.0, 0.1, Boundary::Dirichlet, 0.0);
        assert!(matches!(fourier_chain_propagator(&dirichlet), Err(LatticeError::UnsupportedGeometry(_))));
    }
}
