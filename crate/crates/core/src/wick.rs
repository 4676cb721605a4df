//! Exact combinatorics of the time-ordered to normal-ordered expansion.
//!
//! A time-ordered product of `m` free fields decomposes into strata indexed by
//! the number `r` of contracted pairs. Each stratum holds
//! `f(m, r) = m! / (r! (m-2r)! 2^r)` distinct contraction patterns. Everything
//! here is exact: counts are big integers and coefficients are big rationals
//! times a tracked power of `i`.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

/// Largest field count accepted by enumeration unless overridden.
pub const DEFAULT_MAX_FIELDS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WickError {
    #[error("cannot form {pairs} pairs from {fields} fields")]
    TooManyPairs { fields: usize, pairs: usize },
    #[error("field count {fields} exceeds the configured cap of {cap}")]
    FieldCapExceeded { fields: usize, cap: usize },
    #[error("m_max must be at least 1, got {0}")]
    InvalidOrder(usize),
}

/// A rational number times `i^k`, kept in canonical form
/// (non-negative rational, `k = 0` for zero).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExactScalar {
    rational: BigRational,
    i_power: u8,
}

impl ExactScalar {
    pub fn new(rational: BigRational, i_power: u32) -> Self {
        let mut s = Self { rational, i_power: (i_power % 4) as u8 };
        s.canonicalize();
        s
    }

    pub fn from_integer(value: BigInt) -> Self {
        Self::new(BigRational::from_integer(value), 0)
    }

    pub fn zero() -> Self {
        Self::new(BigRational::zero(), 0)
    }

    pub fn one() -> Self {
        Self::new(BigRational::one(), 0)
    }

    /// `i^k`.
    pub fn i_pow(k: u32) -> Self {
        Self::new(BigRational::one(), k)
    }

    pub fn rational(&self) -> &BigRational {
        &self.rational
    }

    pub fn i_power(&self) -> u8 {
        self.i_power
    }

    pub fn is_zero(&self) -> bool {
        self.rational.is_zero()
    }

    fn canonicalize(&mut self) {
        if self.rational.is_zero() {
            self.i_power = 0;
        } else if self.rational.is_negative() {
            self.rational = -self.rational.clone();
            self.i_power = (self.i_power + 2) % 4;
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::new(&self.rational * &other.rational, u32::from(self.i_power) + u32::from(other.i_power))
    }

    pub fn div_rational(&self, divisor: &BigRational) -> Self {
        Self::new(&self.rational / divisor, u32::from(self.i_power))
    }

    /// Real and imaginary parts as exact rationals.
    pub fn to_gaussian(&self) -> GaussianRational {
        let q = self.rational.clone();
        let zero = BigRational::zero();
        match self.i_power {
            0 => GaussianRational { re: q, im: zero },
            1 => GaussianRational { re: zero, im: q },
            2 => GaussianRational { re: -q, im: zero },
            _ => GaussianRational { re: zero, im: -q },
        }
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        self.to_gaussian().to_f64_pair()
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.i_power {
            0 => write!(f, "{}", self.rational),
            1 => write!(f, "i*{}", self.rational),
            2 => write!(f, "-{}", self.rational),
            _ => write!(f, "-i*{}", self.rational),
        }
    }
}

impl Serialize for ExactScalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

/// `re + i im` over exact rationals; the closure of [`ExactScalar`] under addition.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GaussianRational {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussianRational {
    pub fn zero() -> Self {
        Self { re: BigRational::zero(), im: BigRational::zero() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { re: &self.re + &other.re, im: &self.im + &other.im }
    }

    pub fn add_scalar(&self, s: &ExactScalar) -> Self {
        self.add(&s.to_gaussian())
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        use num_traits::ToPrimitive;
        (self.re.to_f64().unwrap_or(f64::NAN), self.im.to_f64().unwrap_or(f64::NAN))
    }
}

fn factorial(n: usize) -> BigUint {
    (1..=n as u64).fold(BigUint::one(), |acc, k| acc * k)
}

/// Number of ways to contract `r` disjoint pairs out of `m` fields,
/// `m! / (r! (m-2r)! 2^r)`; zero when `2r > m`.
pub fn pairing_count(m: usize, r: usize) -> BigUint {
    if 2 * r > m {
        return BigUint::zero();
    }
    let denom = factorial(r) * factorial(m - 2 * r) * (BigUint::one() << r);
    factorial(m) / denom
}

/// `C(k, r) = i^(2r+k) / (k! r! 2^r)`, the coefficient of a term with `k`
/// normal-ordered fields and `r` propagators in the product of the two
/// exponentials on the right-hand side of the Wick identity.
pub fn product_coefficient(k: usize, r: usize) -> ExactScalar {
    let denom = factorial(k) * factorial(r) * (BigUint::one() << r);
    let q = BigRational::new(BigInt::one(), BigInt::from(denom));
    ExactScalar::new(q, (2 * r + k) as u32)
}

/// One contraction pattern: disjoint index pairs, the leftover (normal-ordered)
/// fields, and an exact coefficient. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct WickTerm {
    pairs: Vec<(usize, usize)>,
    unpaired: Vec<usize>,
    coefficient: ExactScalar,
}

impl WickTerm {
    /// Builds a term, canonicalizing pair orientation and order.
    ///
    /// Panics if an index appears twice.
    pub fn new(pairs: Vec<(usize, usize)>, unpaired: Vec<usize>, coefficient: ExactScalar) -> Self {
        let mut pairs: Vec<(usize, usize)> =
            pairs.into_iter().map(|(p, q)| if p < q { (p, q) } else { (q, p) }).collect();
        pairs.sort_unstable();
        let mut seen: Vec<usize> = pairs.iter().flat_map(|&(p, q)| [p, q]).chain(unpaired.iter().copied()).collect();
        seen.sort_unstable();
        let before = seen.len();
        seen.dedup();
        assert_eq!(before, seen.len(), "wick term indices must be distinct");
        Self { pairs, unpaired, coefficient }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn unpaired(&self) -> &[usize] {
        &self.unpaired
    }

    pub fn coefficient(&self) -> &ExactScalar {
        &self.coefficient
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }
}

impl PartialOrd for WickTerm {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for WickTerm {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (&self.pairs, &self.unpaired)
            .cmp(&(&other.pairs, &other.unpaired))
            .then_with(|| self.coefficient.to_string().cmp(&other.coefficient.to_string()))
    }
}

/// All `r`-pair strata of `T(phi_1 ... phi_m)` in the symmetrized convention:
/// one representative per stratum carrying multiplicity `f(m, r)`.
#[derive(Debug, Clone, Serialize)]
pub struct WickExpansion {
    m: usize,
    strata: Vec<WickStratum>,
    #[serde(skip)]
    cap: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct WickStratum {
    pub pairs: usize,
    /// Representative `:phi_1 ... phi_(m-2r): S_(m-2r+1, m-2r+2) ... S_(m-1, m)`,
    /// coefficient `f(m, r)`.
    pub representative: WickTerm,
}

impl WickExpansion {
    pub fn field_count(&self) -> usize {
        self.m
    }

    pub fn strata(&self) -> &[WickStratum] {
        &self.strata
    }

    /// Expands every stratum into its distinct contraction patterns
    /// (the unsymmetrized form with distinct `S_(ni nj)`).
    pub fn unsymmetrized(&self) -> Result<Vec<Vec<WickTerm>>, WickError> {
        let limits = WickLimits { max_fields: self.cap };
        self.strata.iter().map(|s| limits.enumerate_pairings(self.m, s.pairs)).collect()
    }
}

/// Enumeration limits; `(m-1)!!` growth makes an explicit cap necessary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WickLimits {
    pub max_fields: usize,
}

impl Default for WickLimits {
    fn default() -> Self {
        Self { max_fields: DEFAULT_MAX_FIELDS }
    }
}

impl WickLimits {
    fn check(&self, m: usize) -> Result<(), WickError> {
        if m > self.max_fields {
            Err(WickError::FieldCapExceeded { fields: m, cap: self.max_fields })
        } else {
            Ok(())
        }
    }

    pub fn enumerate_pairings(&self, m: usize, r: usize) -> Result<Vec<WickTerm>, WickError> {
        if 2 * r > m {
            return Err(WickError::TooManyPairs { fields: m, pairs: r });
        }
        self.check(m)?;
        let mut out = Vec::new();
        let mut used = vec![false; m + 1];
        let mut pairs = Vec::with_capacity(r);
        let mut unpaired = Vec::with_capacity(m - 2 * r);
        collect_pairings(1, m, r, &mut used, &mut pairs, &mut unpaired, &mut out);
        out.sort_unstable();
        Ok(out)
    }

    pub fn timeordered_expansion(&self, m: usize) -> Result<WickExpansion, WickError> {
        self.check(m)?;
        let strata = (0..=m / 2)
            .map(|r| {
                let free = m - 2 * r;
                let pairs = (0..r).map(|j| (free + 2 * j + 1, free + 2 * j + 2)).collect();
                let coefficient = ExactScalar::from_integer(BigInt::from(pairing_count(m, r)));
                WickStratum { pairs: r, representative: WickTerm::new(pairs, (1..=free).collect(), coefficient) }
            })
            .collect();
        Ok(WickExpansion { m, strata, cap: self.max_fields })
    }
}

fn collect_pairings(
    start: usize,
    m: usize,
    pairs_left: usize,
    used: &mut [bool],
    pairs: &mut Vec<(usize, usize)>,
    unpaired: &mut Vec<usize>,
    out: &mut Vec<WickTerm>,
) {
    let Some(first) = (start..=m).find(|&i| !used[i]) else {
        if pairs_left == 0 {
            out.push(WickTerm { pairs: pairs.clone(), unpaired: unpaired.clone(), coefficient: ExactScalar::one() });
        }
        return;
    };
    let free = (first..=m).filter(|&i| !used[i]).count();
    if free < 2 * pairs_left {
        return;
    }
    used[first] = true;
    if free > 2 * pairs_left {
        unpaired.push(first);
        collect_pairings(first + 1, m, pairs_left, used, pairs, unpaired, out);
        unpaired.pop();
    }
    if pairs_left > 0 {
        for partner in first + 1..=m {
            if used[partner] {
                continue;
            }
            used[partner] = true;
            pairs.push((first, partner));
            collect_pairings(first + 1, m, pairs_left - 1, used, pairs, unpaired, out);
            pairs.pop();
            used[partner] = false;
        }
    }
    used[first] = false;
}

/// All ways to choose `r` disjoint unordered pairs from `1..=m`, in canonical
/// order, each with unit coefficient. Uses the default field cap.
pub fn enumerate_pairings(m: usize, r: usize) -> Result<Vec<WickTerm>, WickError> {
    WickLimits::default().enumerate_pairings(m, r)
}

pub fn timeordered_expansion(m: usize) -> Result<WickExpansion, WickError> {
    WickLimits::default().timeordered_expansion(m)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientCase {
    pub m: usize,
    pub r: usize,
    /// `i^m / m! * f(m, r)`
    pub lhs: ExactScalar,
    /// `C(m-2r, r)`
    pub rhs: ExactScalar,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientReport {
    pub m_max: usize,
    pub cases: Vec<CoefficientCase>,
    pub pass: bool,
}

impl CoefficientReport {
    pub fn first_failure(&self) -> Option<&CoefficientCase> {
        self.cases.iter().find(|c| !c.pass)
    }
}

/// Checks `i^m / m! * f(m, r) = C(m-2r, r)` exactly for every `0 <= m <= m_max`
/// and `0 <= r <= m/2`.
pub fn verify_coefficient_identity(m_max: usize) -> Result<CoefficientReport, WickError> {
    if m_max < 1 {
        return Err(WickError::InvalidOrder(m_max));
    }
    let mut cases = Vec::new();
    for m in 0..=m_max {
        let prefactor =
            ExactScalar::i_pow(m as u32).div_rational(&BigRational::from_integer(BigInt::from(factorial(m))));
        for r in 0..=m / 2 {
            let lhs = prefactor.mul(&ExactScalar::from_integer(BigInt::from(pairing_count(m, r))));
            let rhs = product_coefficient(m - 2 * r, r);
            let pass = lhs == rhs;
            cases.push(CoefficientCase { m, r, lhs, rhs, pass });
        }
    }
    let pass = cases.iter().all(|c| c.pass);
    Ok(CoefficientReport { m_max, cases, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn pairing_counts_from_low_order_expansions() {
        assert_eq!(pairing_count(3, 1), big(3));
        assert_eq!(pairing_count(4, 1), big(6));
        assert_eq!(pairing_count(4, 2), big(3));
        assert_eq!(pairing_count(2, 1), big(1));
        assert_eq!(pairing_count(3, 2), big(0));
        assert_eq!(pairing_count(0, 0), big(1));
    }

    #[test]
    fn enumerates_the_three_four_field_matchings() {
        let terms = enumerate_pairings(4, 2).unwrap();
        let pairs: Vec<_> = terms.iter().map(|t| t.pairs().to_vec()).collect();
        assert_eq!(pairs, vec![vec![(1, 2), (3, 4)], vec![(1, 3), (2, 4)], vec![(1, 4), (2, 3)]]);
        assert!(terms.iter().all(|t| t.unpaired().is_empty()));
        assert_eq!(enumerate_pairings(2, 1).unwrap()[0].pairs(), &[(1, 2)]);
    }

    // Independent brute force: all permutations, keep those whose first 2r
    // slots form sorted pairs in sorted order, with the rest ascending.
    type Matching = (Vec<(usize, usize)>, Vec<usize>);

    fn brute_force(m: usize, r: usize) -> HashSet<Matching> {
        fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.clone();
                let head = rest.remove(i);
                for mut p in perms(rest) {
                    p.insert(0, head);
                    out.push(p);
                }
            }
            out
        }
        let mut set = HashSet::new();
        for p in perms((1..=m).collect()) {
            let mut pairs: Vec<(usize, usize)> =
                p[..2 * r].chunks(2).map(|c| (c[0].min(c[1]), c[0].max(c[1]))).collect();
            pairs.sort_unstable();
            let mut rest = p[2 * r..].to_vec();
            rest.sort_unstable();
            set.insert((pairs, rest));
        }
        set
    }

    #[test]
    fn enumeration_matches_brute_force_oracle() {
        let six_three = brute_force(6, 3);
        assert_eq!(six_three.len(), 15);
        for (m, r) in [(6, 3), (6, 2), (5, 1), (5, 2), (4, 0), (7, 3)] {
            let ours: HashSet<_> = enumerate_pairings(m, r)
                .unwrap()
                .into_iter()
                .map(|t| (t.pairs().to_vec(), t.unpaired().to_vec()))
                .collect();
            assert_eq!(ours, brute_force(m, r), "m={m} r={r}");
        }
    }

    #[test]
    fn rejects_impossible_pairings_and_cap() {
        assert_eq!(enumerate_pairings(3, 2), Err(WickError::TooManyPairs { fields: 3, pairs: 2 }));
        let tight = WickLimits { max_fields: 6 };
        assert_eq!(tight.enumerate_pairings(8, 2), Err(WickError::FieldCapExceeded { fields: 8, cap: 6 }));
        assert!(tight.timeordered_expansion(7).is_err());
    }

    #[test]
    fn low_order_timeordered_expansions() {
        let two = timeordered_expansion(2).unwrap();
        assert_eq!(two.strata().len(), 2);
        assert_eq!(two.strata()[1].representative.pairs(), &[(1, 2)]);
        assert_eq!(two.strata()[1].representative.coefficient(), &ExactScalar::one());

        let three = timeordered_expansion(3).unwrap();
        let s = &three.strata()[1].representative;
        assert_eq!(s.unpaired(), &[1]);
        assert_eq!(s.pairs(), &[(2, 3)]);
        assert_eq!(s.coefficient(), &ExactScalar::from_integer(BigInt::from(3)));

        let zero = timeordered_expansion(0).unwrap();
        assert_eq!(zero.strata().len(), 1);
        assert!(zero.strata()[0].representative.pairs().is_empty());
        assert!(zero.strata()[0].representative.unpaired().is_empty());
        assert_eq!(zero.strata()[0].representative.coefficient(), &ExactScalar::one());
    }

    #[test]
    fn strata_sizes_match_pairing_counts() {
        for m in 0..=9 {
            let expansion = timeordered_expansion(m).unwrap();
            let rs: Vec<usize> = expansion.strata().iter().map(|s| s.pairs).collect();
            assert_eq!(rs, (0..=m / 2).collect::<Vec<_>>());
            for (stratum, terms) in expansion.strata().iter().zip(expansion.unsymmetrized().unwrap()) {
                assert_eq!(BigUint::from(terms.len()), pairing_count(m, stratum.pairs));
                assert!(terms.iter().all(|t| t.pair_count() == stratum.pairs));
            }
        }
    }

    #[test]
    fn full_matching_count_is_double_factorial() {
        let mut double_fact = 1u64;
        for m in (2..=12).step_by(2) {
            double_fact *= (m - 1) as u64;
            assert_eq!(enumerate_pairings(m, m / 2).unwrap().len() as u64, double_fact);
        }
    }

    #[test]
    fn smallest_nondegenerate_coefficient_case() {
        let report = verify_coefficient_identity(2).unwrap();
        let case = report.cases.iter().find(|c| c.m == 2 && c.r == 1).unwrap();
        let minus_half = ExactScalar::new(BigRational::new(BigInt::from(-1), BigInt::from(2)), 0);
        assert_eq!(case.lhs, minus_half);
        assert_eq!(case.rhs, minus_half);
        assert!(case.pass);
    }

    #[test]
    fn coefficient_identity_counts_and_passes() {
        let four = verify_coefficient_identity(4).unwrap();
        assert!(four.pass);
        assert_eq!(four.cases.len(), 9);
        let twelve = verify_coefficient_identity(12).unwrap();
        assert!(twelve.pass);
        assert_eq!(twelve.cases.len(), 49);
        assert!(verify_coefficient_identity(0).is_err());
    }

    #[test]
    fn exact_scalar_canonical_form() {
        let minus_one = ExactScalar::from_integer(BigInt::from(-1));
        assert_eq!(minus_one, ExactScalar::i_pow(2));
        assert_eq!(ExactScalar::i_pow(1).mul(&ExactScalar::i_pow(3)), ExactScalar::one());
        assert_eq!(ExactScalar::new(BigRational::zero(), 3), ExactScalar::zero());
        let sum = GaussianRational::zero()
            .add_scalar(&ExactScalar::i_pow(0))
            .add_scalar(&ExactScalar::i_pow(1))
            .add_scalar(&ExactScalar::i_pow(2));
        assert_eq!(sum.to_f64_pair(), (0.0, 1.0));
    }

    proptest! {
        #[test]
        fn pairing_count_recurrence(m in 2usize..=16, r in 1usize..=8) {
            // Field m is either left unpaired or paired with one of the other m-1.
            prop_assert_eq!(
                pairing_count(m, r),
                pairing_count(m - 1, r) + BigUint::from(m - 1) * pairing_count(m - 2, r - 1)
            );
        }

        #[test]
        fn enumeration_has_no_duplicates(m in 0usize..=9, r in 0usize..=4) {
            prop_assume!(2 * r <= m);
            let terms = enumerate_pairings(m, r).unwrap();
            let distinct: HashSet<_> = terms.iter().map(|t| t.pairs().to_vec()).collect();
            prop_assert_eq!(distinct.len(), terms.len());
            prop_assert_eq!(BigUint::from(terms.len()), pairing_count(m, r));
        }
    }
}
