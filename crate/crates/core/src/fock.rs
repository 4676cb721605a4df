//! Single-mode truncated Fock space: the interaction-picture field, sliced
//! time evolution with a source and a quartic interaction, and the operator
//! level checks of the Wick identity, the T-exponential factorization and the
//! S-matrix normalization.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::genfun::{serialize_complex, z_series_with, GenfunError, SeriesOptions};
use crate::lattice::{external_propagator, LatticeError, Propagator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `|<d-1|U|0>|^2` above this marks the run as truncation-limited.
pub const TRUNCATION_WARNING: f64 = 1e-8;
/// Accepted window for the error ratio between successive grid halvings.
pub const RATIO_RANGE: (f64, f64) = (3.5, 4.5);
/// Steps used for the reference integral of the continuum Gaussian exponent.
pub const CONTINUUM_STEPS: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("truncation dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("mode frequency must be positive and finite, got {0}")]
    InvalidFrequency(f64),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} source samples, got {got}")]
    SourceLength { expected: usize, got: usize },
    #[error("operator dimension {got} does not match the space dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vacuum amplitude vanishes; cannot normalize")]
    VanishingVacuum,
    #[error(transparent)]
    Genfun(#[from] GenfunError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FockSpace {
    dim: usize,
    omega: f64,
}

impl FockSpace {
    pub fn new(dim: usize, omega: f64) -> Result<Self, FockError> {
        if dim < 2 {
            return Err(FockError::DimensionTooSmall(dim));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(FockError::InvalidFrequency(omega));
        }
        Ok(Self { dim, omega })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn annihilation(&self) -> FockOperator {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for n in 1..self.dim {
            m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        FockOperator::new(m)
    }

    pub fn creation(&self) -> FockOperator {
        self.annihilation().adjoint()
    }

    pub fn number(&self) -> FockOperator {
        FockOperator::new(DMatrix::from_fn(self.dim, self.dim, |r, c| {
            if r == c {
                Complex64::new(r as f64, 0.0)
            } else {
                ZERO
            }
        }))
    }

    /// `omega a^dagger a`, zero-point energy dropped.
    pub fn free_hamiltonian(&self) -> FockOperator {
        self.number().scale(Complex64::new(self.omega, 0.0))
    }
}

/// A dense operator on the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    matrix: DMatrix<Complex64>,
}

impl Serialize for FockOperator {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.matrix.nrows())
            .map(|r| (0..self.matrix.ncols()).map(|c| [self.matrix[(r, c)].re, self.matrix[(r, c)].im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl FockOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Self {
        assert!(matrix.is_square(), "operators are square");
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.matrix.adjoint())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::new(&self.matrix * factor)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::new(&self.matrix * &other.matrix)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.matrix + &other.matrix)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self::new(&self.matrix * &other.matrix - &other.matrix * &self.matrix)
    }

    /// `exp(self)`; an exactly zero exponent gives the identity exactly.
    pub fn exp(&self) -> Self {
        if self.matrix.iter().all(|z| *z == ZERO) {
            return Self::identity(self.dim());
        }
        Self::new(self.matrix.exp())
    }

    /// `max |(U^dagger U - I)_ij|`.
    pub fn unitarity_defect(&self) -> f64 {
        let product = self.matrix.adjoint() * &self.matrix;
        max_abs(&(product - DMatrix::<Complex64>::identity(self.dim(), self.dim())))
    }

    /// `max |(A - A^dagger)_ij|`.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    /// Euclidean norm of the first column, i.e. of `A|0>`.
    pub fn vacuum_column_norm(&self) -> f64 {
        self.matrix.column(0).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `<0|op|0>`.
pub fn vacuum_amplitude(op: &FockOperator) -> Complex64 {
    op.element(0, 0)
}

/// `phi(t) = (a e^{-i omega t} + a^dagger e^{i omega t}) / sqrt(2 omega)`.
pub fn phi_at(space: &FockSpace, t: f64) -> FockOperator {
    let a = space.annihilation();
    let phase = Complex64::from_polar(1.0, -space.omega * t);
    let norm = 1.0 / (2.0 * space.omega).sqrt();
    a.scale(phase * norm).add(&a.adjoint().scale(phase.conj() * norm))
}

/// Uniform slicing of `[t0, t1]`; slice `k` is represented by its midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, steps: usize) -> Result<Self, FockError> {
        if steps == 0 {
            return Err(FockError::InvalidGrid("at least one step is required".into()));
        }
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(FockError::InvalidGrid(format!("need t0 < t1, got [{t0}, {t1}]")));
        }
        Ok(Self { t0, t1, steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }

    /// Left edge of slice `k`.
    pub fn start(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + (k as f64 + 0.5) * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.steps).map(|k| self.time(k)).collect()
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self { steps: self.steps * factor, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceProfile {
    Zero,
    Constant { value: f64 },
    Gaussian { amplitude: f64, centre: f64, width: f64 },
}

impl SourceProfile {
    /// A Gaussian pulse centred on the grid with width a quarter of the
    /// half-interval.
    pub fn pulse(grid: &TimeGrid, amplitude: f64) -> Self {
        let centre = 0.5 * (grid.t0 + grid.t1);
        Self::Gaussian { amplitude, centre, width: (grid.t1 - grid.t0) / 8.0 }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Constant { value } => value,
            Self::Gaussian { amplitude, centre, width } => {
                let u = (t - centre) / width;
                amplitude * (-0.5 * u * u).exp()
            }
        }
    }

    pub fn samples(&self, grid: &TimeGrid) -> Vec<f64> {
        grid.times().into_iter().map(|t| self.value(t)).collect()
    }
}

/// How each slice is exponentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Slicing {
    /// `exp(-i dt (lambda/4! phi^4 - J phi))` at the slice midpoint.
    Sum,
    /// The interaction and source factors exponentiated separately, the
    /// interaction split symmetrically around the source at
    /// `t_k + dt/4` and `t_k + 3dt/4`.
    Product,
}

fn check_samples(grid: &TimeGrid, source: &[f64]) -> Result<(), FockError> {
    if source.len() != grid.steps {
        return Err(FockError::SourceLength { expected: grid.steps, got: source.len() });
    }
    Ok(())
}

fn quartic(phi: &FockOperator) -> FockOperator {
    let sq = phi.mul(phi);
    sq.mul(&sq)
}

/// Time-ordered product of per-slice exponentials, latest slice leftmost.
pub fn sliced_evolution(
    space: &FockSpace,
    grid: &TimeGrid,
    lambda: f64,
    source: &[f64],
) -> Result<FockOperator, FockError> {
    sliced_evolution_with(space, grid, lambda, source, Slicing::Sum)
}

pub fn sliced_evolution_with(
    space: &FockSpace,
    grid: &TimeGrid,
    lambda: f64,
    source: &[f64],
    slicing: Slicing,
) -> Result<FockOperator, FockError> {
    check_samples(grid, source)?;
    let dt = grid.dt();
    let coupling = lambda / 24.0;
    let mut u = FockOperator::identity(space.dim);
    for (k, &j) in source.iter().enumerate() {
        let phi = phi_at(space, grid.time(k));
        let slice = match slicing {
            Slicing::Sum => {
                let h = quartic(&phi).scale(Complex64::new(coupling, 0.0)).add(&phi.scale(Complex64::new(-j, 0.0)));
                h.scale(-I * dt).exp()
            }
            Slicing::Product => {
                let half = -I * (0.5 * dt * coupling);
                let early = quartic(&phi_at(space, grid.start(k) + 0.25 * dt)).scale(half).exp();
                let late = quartic(&phi_at(space, grid.start(k) + 0.75 * dt)).scale(half).exp();
                let kick = phi.scale(I * (dt * j)).exp();
                late.mul(&kick).mul(&early)
            }
        };
        u = slice.mul(&u);
    }
    Ok(u)
}

/// Continuum single-mode Feynman propagator `-i e^{-i omega |t - t'|} / (2 omega)`.
pub fn feynman_propagator(omega: f64, t: f64, t_prime: f64) -> Complex64 {
    -I * Complex64::from_polar(1.0, -omega * (t - t_prime).abs()) / (2.0 * omega)
}

/// The propagator sampled at the slice midpoints, as an external propagator.
pub fn grid_propagator(space: &FockSpace, grid: &TimeGrid) -> Result<Propagator, FockError> {
    let times = grid.times();
    let m = DMatrix::from_fn(times.len(), times.len(), |j, k| feynman_propagator(space.omega, times[j], times[k]));
    Ok(external_propagator(m)?)
}

/// `exp(-(i/2) sum_jk J_j Delta(t_j, t_k) J_k dt^2)`.
pub fn discrete_gaussian(space: &FockSpace, grid: &TimeGrid, source: &[f64]) -> Result<Complex64, FockError> {
    check_samples(grid, source)?;
    let times = grid.times();
    let dt = grid.dt();
    let mut exponent = ZERO;
    for (j, &tj) in times.iter().enumerate() {
        for (k, &tk) in times.iter().enumerate() {
            exponent += source[j] * source[k] * feynman_propagator(space.omega, tj, tk);
        }
    }
    Ok((-0.5 * I * dt * dt * exponent).exp())
}

/// `-(i/2) int int J Delta J` over `[t0, t1]`, by RK4 on
/// `F' = J e^{i omega t}`, `A' = -(1/(2 omega)) J e^{-i omega t} F`.
pub fn continuum_gaussian_exponent(space: &FockSpace, t0: f64, t1: f64, source: &SourceProfile) -> Complex64 {
    let w = space.omega;
    let rhs = |t: f64, f: Complex64| {
        let j = source.value(t);
        let phase = Complex64::from_polar(1.0, w * t);
        (j * phase, -j * phase.conj() * f / (2.0 * w))
    };
    let h = (t1 - t0) / CONTINUUM_STEPS as f64;
    let (mut f, mut a) = (ZERO, ZERO);
    for n in 0..CONTINUUM_STEPS {
        let t = t0 + n as f64 * h;
        let (f1, a1) = rhs(t, f);
        let (f2, a2) = rhs(t + 0.5 * h, f + 0.5 * h * f1);
        let (f3, a3) = rhs(t + 0.5 * h, f + 0.5 * h * f2);
        let (f4, a4) = rhs(t + h, f + h * f3);
        f += h / 6.0 * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
        a += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    }
    a
}

#[derive(Debug, Clone, Serialize)]
pub struct WickCheck {
    pub steps: usize,
    pub dim: usize,
    #[serde(serialize_with = "serialize_complex")]
    pub lhs: Complex64,
    #[serde(serialize_with = "serialize_complex")]
    pub rhs_discrete: Complex64,
    #[serde(serialize_with = "serialize_complex")]
    pub rhs_continuum: Complex64,
    /// Against the Gaussian on the same grid; only truncation contributes.
    pub discrete_residual: f64,
    /// Against the continuum Gaussian; carries the slicing error.
    pub continuum_residual: f64,
    pub unitarity_defect: f64,
    pub top_population: f64,
    pub truncation_warning: bool,
}

/// Vacuum amplitude of the free sliced evolution against the Gaussian factor.
pub fn check_wick_identity(space: &FockSpace, grid: &TimeGrid, source: &SourceProfile) -> Result<WickCheck, FockError> {
    let samples = source.samples(grid);
    let u = sliced_evolution(space, grid, 0.0, &samples)?;
    let lhs = vacuum_amplitude(&u);
    let rhs_discrete = discrete_gaussian(space, grid, &samples)?;
    let rhs_continuum = continuum_gaussian_exponent(space, grid.t0, grid.t1, source).exp();
    let top_population = u.element(space.dim - 1, 0).norm_sqr();
    Ok(WickCheck {
        steps: grid.steps,
        dim: space.dim,
        lhs,
        rhs_discrete,
        rhs_continuum,
        discrete_residual: (lhs - rhs_discrete).norm(),
        continuum_residual: (lhs - rhs_continuum).norm(),
        unitarity_defect: u.unitarity_defect(),
        top_population,
        truncation_warning: top_population > TRUNCATION_WARNING,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub steps: Vec<usize>,
    pub deviations: Vec<f64>,
    /// `deviations[i] / deviations[i + 1]`.
    pub ratios: Vec<f64>,
    pub converged: bool,
}

impl ConvergenceReport {
    fn from_deviations(steps: Vec<usize>, deviations: Vec<f64>) -> Self {
        // identical schemes have nothing to converge
        if deviations.iter().all(|&d| d == 0.0) {
            return Self { steps, deviations, ratios: Vec::new(), converged: true };
        }
        let ratios: Vec<f64> = deviations.windows(2).map(|w| w[0] / w[1]).collect();
        let converged = !ratios.is_empty() && ratios.iter().all(|r| (RATIO_RANGE.0..=RATIO_RANGE.1).contains(r));
        Self { steps, deviations, ratios, converged }
    }
}

/// Continuum Wick residual on `grid`, then with the step count doubled and
/// quadrupled.
pub fn wick_convergence(
    space: &FockSpace,
    grid: &TimeGrid,
    source: &SourceProfile,
) -> Result<ConvergenceReport, FockError> {
    let mut steps = Vec::new();
    let mut deviations = Vec::new();
    for factor in [1, 2, 4] {
        let g = grid.refined(factor);
        steps.push(g.steps);
        deviations.push(check_wick_identity(space, &g, source)?.continuum_residual);
    }
    Ok(ConvergenceReport::from_deviations(steps, deviations))
}

/// `|(U_sum - U_product)|0>|` on `grid` and two halvings of `dt`.
pub fn factorization_convergence(
    space: &FockSpace,
    grid: &TimeGrid,
    lambda: f64,
    source: &SourceProfile,
) -> Result<ConvergenceReport, FockError> {
    let mut steps = Vec::new();
    let mut deviations = Vec::new();
    for factor in [1, 2, 4] {
        let g = grid.refined(factor);
        let samples = source.samples(&g);
        let sum = sliced_evolution_with(space, &g, lambda, &samples, Slicing::Sum)?;
        let product = sliced_evolution_with(space, &g, lambda, &samples, Slicing::Product)?;
        steps.push(g.steps);
        deviations.push(FockOperator::new(sum.matrix - product.matrix).vacuum_column_norm());
    }
    Ok(ConvergenceReport::from_deviations(steps, deviations))
}

/// `U(lambda, J = 0) / <0|U(lambda, J = 0)|0>`.
pub fn smatrix_truncated(space: &FockSpace, grid: &TimeGrid, lambda: f64) -> Result<FockOperator, FockError> {
    let u = sliced_evolution(space, grid, lambda, &vec![0.0; grid.steps])?;
    let vacuum = vacuum_amplitude(&u);
    if vacuum == ZERO {
        return Err(FockError::VanishingVacuum);
    }
    Ok(FockOperator::new(u.matrix.map(|z| z / vacuum)))
}

/// The order-`lambda` part of `<row|S|col>` evaluated at `lambda`.
///
/// Odd parts `(S(h) - S(-h))/2` at `h = lambda` and `lambda/2` are combined
/// so that both the `lambda^2` and `lambda^3` terms cancel.
pub fn smatrix_first_order(
    space: &FockSpace,
    grid: &TimeGrid,
    lambda: f64,
    row: usize,
    col: usize,
) -> Result<Complex64, FockError> {
    let odd = |h: f64| -> Result<Complex64, FockError> {
        let plus = smatrix_truncated(space, grid, h)?.element(row, col);
        let minus = smatrix_truncated(space, grid, -h)?.element(row, col);
        Ok(0.5 * (plus - minus))
    };
    let full = odd(lambda)?;
    let half = odd(0.5 * lambda)?;
    Ok((8.0 * half - full) / 3.0)
}

/// First-order Dyson term `-i (lambda/4!) sum_k dt <4|phi(t_k)^4|0>` with
/// `<4|phi(t)^4|0> = sqrt(4!) e^{4 i omega t} / (2 omega)^2`.
pub fn dyson_four_quanta(space: &FockSpace, grid: &TimeGrid, lambda: f64) -> Complex64 {
    let w = space.omega;
    let amplitude = 24f64.sqrt() / (4.0 * w * w);
    let sum: Complex64 = grid.times().iter().map(|&t| Complex64::from_polar(amplitude, 4.0 * w * t)).sum();
    -I * (lambda / 24.0) * grid.dt() * sum
}

/// `:phi(t_1) ... phi(t_k):`, creation parts to the left.
pub fn normal_ordered(space: &FockSpace, times: &[f64]) -> FockOperator {
    let a = space.annihilation();
    let ad = space.creation();
    let norm = 1.0 / (2.0 * space.omega).sqrt();
    let mut total = FockOperator::new(DMatrix::zeros(space.dim, space.dim));
    let k = times.len();
    assert!(k < 31, "too many fields for subset expansion");
    for mask in 0u32..(1u32 << k) {
        let mut coefficient = Complex64::new(norm.powi(k as i32), 0.0);
        let mut creators = 0;
        for (bit, &t) in times.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                creators += 1;
                coefficient *= Complex64::from_polar(1.0, space.omega * t);
            } else {
                coefficient *= Complex64::from_polar(1.0, -space.omega * t);
            }
        }
        let mut op = FockOperator::identity(space.dim);
        for _ in 0..creators {
            op = op.mul(&ad);
        }
        for _ in creators..k {
            op = op.mul(&a);
        }
        total = total.add(&op.scale(coefficient));
    }
    total
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossModuleReport {
    pub steps: usize,
    pub dim: usize,
    pub lambda: f64,
    #[serde(serialize_with = "serialize_complex")]
    pub fock: Complex64,
    #[serde(serialize_with = "serialize_complex")]
    pub series: Complex64,
    #[serde(serialize_with = "crate::genfun::serialize_complex_vec")]
    pub series_orders: Vec<Complex64>,
    pub relative_deviation: f64,
    pub pass: bool,
}

/// `<0|U_M|0>` from the sliced evolution against the perturbative series
/// through order `lambda`, built on the sampled continuum propagator with
/// vertex weights `dt` and smeared source `J dt`.
pub fn cross_module_vacuum(
    space: &FockSpace,
    grid: &TimeGrid,
    lambda: f64,
    source: &SourceProfile,
    tolerance: f64,
) -> Result<CrossModuleReport, FockError> {
    let samples = source.samples(grid);
    let fock = vacuum_amplitude(&sliced_evolution(space, grid, lambda, &samples)?);
    let delta = Arc::new(grid_propagator(space, grid)?);
    let dt = grid.dt();
    let options = SeriesOptions { vertex_weights: Some(vec![dt; grid.steps]), ..SeriesOptions::default() };
    let series = z_series_with(&delta, 1, &options)?;
    let smeared: Vec<f64> = samples.iter().map(|j| j * dt).collect();
    let series_orders = series.evaluate(&smeared)?;
    let value = series.sum_at(lambda, &smeared)?;
    let relative_deviation = (fock - value).norm() / fock.norm().max(value.norm());
    Ok(CrossModuleReport {
        steps: grid.steps,
        dim: space.dim,
        lambda,
        fock,
        series: value,
        series_orders,
        relative_deviation,
        pass: relative_deviation < tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    fn space(d: usize) -> FockSpace {
        FockSpace::new(d, 1.0).unwrap()
    }

    #[test]
    fn space_validation() {
        assert_eq!(FockSpace::new(1, 1.0), Err(FockError::DimensionTooSmall(1)));
        assert!(matches!(FockSpace::new(4, 0.0), Err(FockError::InvalidFrequency(_))));
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn truncated_commutator_is_identity_below_the_corner() {
        for d in [2, 5, 16] {
            let s = space(d);
            let c = s.annihilation().commutator(&s.creation());
            for r in 0..d {
                for col in 0..d {
                    if r == d - 1 && col == d - 1 {
                        continue;
                    }
                    let expected = if r == col { ONE } else { ZERO };
                    assert!((c.element(r, col) - expected).norm() < 1e-12);
                }
            }
            assert!((c.element(d - 1, d - 1) - Complex64::new(1.0 - d as f64, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn phi_at_zero_for_two_levels() {
        let phi = phi_at(&space(2), 0.0);
        let r = 1.0 / 2f64.sqrt();
        assert!((phi.element(0, 1) - Complex64::new(r, 0.0)).norm() < 1e-15);
        assert!((phi.element(1, 0) - Complex64::new(r, 0.0)).norm() < 1e-15);
        assert_eq!(phi.element(0, 0), ZERO);
        assert_eq!(phi.element(1, 1), ZERO);
    }

    #[test]
    fn phi_matches_heisenberg_evolution_of_phi_zero() {
        let s = FockSpace::new(6, 1.3).unwrap();
        let h = s.free_hamiltonian();
        for t in [0.0, 0.4, -1.7, 3.2] {
            let forward = h.scale(I * t).exp();
            let backward = h.scale(-I * t).exp();
            let evolved = forward.mul(&phi_at(&s, 0.0)).mul(&backward);
            assert!(max_abs(&(evolved.matrix - phi_at(&s, t).matrix)) < 1e-12);
            assert!(phi_at(&s, t).hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn vacuum_two_point_function() {
        let s = FockSpace::new(4, 0.8).unwrap();
        for (t, tp) in [(1.0, 0.2), (0.3, 2.5), (1.1, 1.1)] {
            let value = phi_at(&s, t).mul(&phi_at(&s, tp)).element(0, 0);
            let expected = Complex64::from_polar(1.0, -s.omega * (t - tp)) / (2.0 * s.omega);
            assert!((value - expected).norm() < 1e-10);
            let (late, early) = if t >= tp { (t, tp) } else { (tp, t) };
            let ordered = phi_at(&s, late).mul(&phi_at(&s, early)).element(0, 0);
            assert!((ordered - I * feynman_propagator(s.omega, t, tp)).norm() < 1e-10);
        }
    }

    #[test]
    fn klein_gordon_second_difference() {
        let s = space(5);
        let t = 0.7;
        let mut last = f64::INFINITY;
        for h in [1e-2, 5e-3] {
            let second = phi_at(&s, t + h)
                .add(&phi_at(&s, t - h))
                .add(&phi_at(&s, t).scale(Complex64::new(-2.0, 0.0)))
                .scale(Complex64::new(1.0 / (h * h), 0.0));
            let residual = max_abs(&second.add(&phi_at(&s, t).scale(Complex64::new(s.omega * s.omega, 0.0))).matrix);
            assert!(residual < 10.0 * h * h);
            assert!(residual < last);
            last = residual;
        }
    }

    #[test]
    fn free_evolution_without_source_is_identity() {
        let s = space(8);
        let grid = TimeGrid::new(0.0, 2.0, 10).unwrap();
        let u = sliced_evolution(&s, &grid, 0.0, &[0.0; 10]).unwrap();
        assert_eq!(u, FockOperator::identity(8));
        assert_eq!(sliced_evolution(&s, &grid, 0.0, &[0.0; 3]), Err(FockError::SourceLength { expected: 10, got: 3 }));
    }

    #[test]
    fn wick_check_with_zero_source_is_exact() {
        let s = space(16);
        let grid = TimeGrid::new(0.0, 4.0, 20).unwrap();
        let check = check_wick_identity(&s, &grid, &SourceProfile::Zero).unwrap();
        assert_eq!(check.lhs, ONE);
        assert_eq!(check.rhs_discrete, ONE);
        assert_eq!(check.rhs_continuum, ONE);
    }

    #[test]
    fn constant_source_matches_the_gaussian() {
        let s = space(16);
        let grid = TimeGrid::new(0.0, 4.0, 200).unwrap();
        let source = SourceProfile::Constant { value: 0.05 };
        let check = check_wick_identity(&s, &grid, &source).unwrap();
        assert!(check.discrete_residual < 1e-3);
        assert!(check.continuum_residual < 1e-3);
        assert!(check.unitarity_defect < 1e-8);
    }

    #[test]
    fn continuum_exponent_for_constant_source() {
        // A = -(J^2 / (2 w)) (-i T / w + (1 - e^{-i w T}) / w^2)
        let s = FockSpace::new(4, 1.5).unwrap();
        let (j, t) = (0.3, 2.0);
        let w = s.omega;
        let closed = -(j * j) / (2.0 * w) * (-I * t / w + (ONE - Complex64::from_polar(1.0, -w * t)) / (w * w));
        let numeric = continuum_gaussian_exponent(&s, 0.0, t, &SourceProfile::Constant { value: j });
        assert!((numeric - closed).norm() < 1e-12);
    }

    #[test]
    fn larger_truncation_reduces_the_residual_for_a_strong_pulse() {
        let grid = TimeGrid::new(0.0, 4.0, 200).unwrap();
        let source = SourceProfile::pulse(&grid, 1.0);
        let small = check_wick_identity(&space(8), &grid, &source).unwrap();
        let large = check_wick_identity(&space(16), &grid, &source).unwrap();
        assert!(large.discrete_residual < small.discrete_residual);
        assert!(small.truncation_warning);
    }

    #[test]
    fn product_and_sum_slicing_agree_without_interaction() {
        let s = space(10);
        let grid = TimeGrid::new(0.0, 4.0, 50).unwrap();
        let samples = SourceProfile::pulse(&grid, 0.2).samples(&grid);
        let a = sliced_evolution_with(&s, &grid, 0.0, &samples, Slicing::Sum).unwrap();
        let b = sliced_evolution_with(&s, &grid, 0.0, &samples, Slicing::Product).unwrap();
        assert!(max_abs(&(a.matrix - b.matrix)) < 1e-14);
    }

    #[test]
    fn smatrix_normalization() {
        let s = space(10);
        let grid = TimeGrid::new(0.0, 2.0, 40).unwrap();
        assert_eq!(smatrix_truncated(&s, &grid, 0.0).unwrap(), FockOperator::identity(10));
        for lambda in [0.1, 0.7, -0.3] {
            assert_eq!(smatrix_truncated(&s, &grid, lambda).unwrap().element(0, 0), ONE);
        }
    }

    #[test]
    fn normal_ordering_removes_the_vacuum_contraction() {
        let s = space(6);
        let (t, tp) = (0.9, 0.2);
        let product = phi_at(&s, t).mul(&phi_at(&s, tp));
        let ordered = normal_ordered(&s, &[t, tp]);
        let contraction = product.element(0, 0);
        let diff = product.add(&ordered.scale(-ONE));
        for r in 0..5 {
            assert!((diff.element(r, r) - contraction).norm() < 1e-12);
        }
        assert!(normal_ordered(&s, &[t, tp, 0.4]).element(0, 0).norm() < 1e-15);
    }

    #[test]
    fn grid_propagator_is_symmetric_with_the_equal_time_value() {
        let s = space(4);
        let grid = TimeGrid::new(0.0, 1.0, 5).unwrap();
        let d = grid_propagator(&s, &grid).unwrap();
        assert_eq!(d.size(), 5);
        assert!((d.get(2, 2) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert_eq!(d.get(1, 3), d.get(3, 1));
    }
}
