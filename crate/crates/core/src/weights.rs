//! Exact ∂̄-weights of a Lebesgue exponent and a power weight.
//!
//! For `1 ≤ p ≤ ∞` and a rational exponent `s`, the ∂̄-weight `k(p, s)` is the
//! largest integer `m` with `|z|^s L^p_loc ⊂ |z|^m L^1_loc`, and the modified
//! ∂̄-weight `k̃(p, s)` is the smallest integer `m` such that `z^m`-multiples of
//! holomorphic functions lie in `|z|^s L^p_loc`. Both are computed here in
//! exact rational arithmetic so that branch boundaries such as `(s − [s])p = 2`
//! are decided without rounding.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Parses `"3/2"`, `"-1"`, `"0.25"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational64> {
    let t = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if let Some((num, den)) = t.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| bad())?;
        let d: i64 = den.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(n, d));
    }
    if let Some((int, frac)) = t.split_once('.') {
        let negative = int.trim_start().starts_with('-');
        let int_part: i64 = if int.is_empty() || int == "-" || int == "+" {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 15 {
            return Err(bad());
        }
        let den = 10i64.pow(frac.len() as u32);
        let f: i64 = frac.parse().map_err(|_| bad())?;
        let magnitude = Rational64::from_integer(int_part.abs()) + Rational64::new(f, den);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    let n: i64 = t.parse().map_err(|_| bad())?;
    Ok(Rational64::from_integer(n))
}

pub(crate) fn rational_to_string(r: &Rational64) -> String {
    if r.is_integer() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A Lebesgue exponent `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LebesgueExponent {
    Finite(Rational64),
    Infinite,
}

impl LebesgueExponent {
    pub fn finite(p: Rational64) -> Result<Self> {
        if p < Rational64::one() {
            return Err(Error::InvalidParameter(format!(
                "Lebesgue exponent must be >= 1, got {}",
                rational_to_string(&p)
            )));
        }
        Ok(LebesgueExponent::Finite(p))
    }

    pub fn integer(p: i64) -> Result<Self> {
        Self::finite(Rational64::from_integer(p))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, LebesgueExponent::Infinite)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, LebesgueExponent::Finite(p) if p.is_one())
    }

    /// `2/p`, with `2/∞ = 0`.
    pub fn two_over_p(&self) -> Rational64 {
        match self {
            LebesgueExponent::Finite(p) => Rational64::from_integer(2) / p,
            LebesgueExponent::Infinite => Rational64::zero(),
        }
    }

    /// Floating value, `f64::INFINITY` for `p = ∞`.
    pub fn to_f64(&self) -> f64 {
        match self {
            LebesgueExponent::Finite(p) => p.to_f64().unwrap_or(f64::NAN),
            LebesgueExponent::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for LebesgueExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LebesgueExponent::Finite(p) => f.write_str(&rational_to_string(p)),
            LebesgueExponent::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for LebesgueExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(LebesgueExponent::Infinite),
            other => LebesgueExponent::finite(parse_rational(other)?),
        }
    }
}

/// Real multi-index `s ∈ ℚⁿ` of a power weight `|z|^s = |z₁|^{s₁}⋯|zₙ|^{sₙ}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightVector(Vec<Rational64>);

impl WeightVector {
    pub fn new(s: Vec<Rational64>) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidParameter(
                "weight vector must have at least one component".into(),
            ));
        }
        Ok(WeightVector(s))
    }

    pub fn uniform(n: usize, s: Rational64) -> Result<Self> {
        Self::new(vec![s; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[Rational64] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|r| r.to_f64().unwrap_or(f64::NAN)).collect()
    }

    /// Replaces the last component `sₙ` by `sₙ + shift`.
    pub fn shift_last(&self, shift: Rational64) -> Self {
        let mut s = self.0.clone();
        if let Some(last) = s.last_mut() {
            *last += shift;
        }
        WeightVector(s)
    }
}

impl FromStr for WeightVector {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let parts = text
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(parse_rational)
            .collect::<Result<Vec<_>>>()?;
        WeightVector::new(parts)
    }
}

/// Integer multi-index `k ∈ ℤⁿ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntegerWeight(pub Vec<i64>);

impl IntegerWeight {
    pub fn zeros(n: usize) -> Self {
        IntegerWeight(vec![0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &IntegerWeight) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl fmt::Display for IntegerWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|k| k.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

fn floor(r: &Rational64) -> i64 {
    r.floor().to_integer()
}

fn ceil(r: &Rational64) -> i64 {
    r.ceil().to_integer()
}

/// The ∂̄-weight `k(p, s) = max{m ∈ ℤ : m < 2 + s − 2/p}` (with `≤` when `p = 1`).
pub fn dbar_weight(p: LebesgueExponent, s: Rational64) -> i64 {
    let bound = Rational64::from_integer(2) + s - p.two_over_p();
    if p.is_one() {
        floor(&bound)
    } else {
        ceil(&bound) - 1
    }
}

/// Splits `k(p, s) = k₀(s) + k₁(p, s)` with `k₀ = [s]` and `k₁ ∈ {0, 1, 2}`.
///
/// `k₁` is read off the fractional part of `s`, independently of
/// [`dbar_weight`], so the two can be cross-checked.
pub fn dbar_weight_decomposition(p: LebesgueExponent, s: Rational64) -> (i64, i64) {
    let k0 = floor(&s);
    let frac = s - Rational64::from_integer(k0);
    let k1 = match p {
        LebesgueExponent::Infinite => {
            if frac.is_zero() {
                1
            } else {
                2
            }
        }
        LebesgueExponent::Finite(p) => {
            let two = Rational64::from_integer(2);
            let scaled = frac * p;
            if scaled > two {
                2
            } else if scaled > two - p {
                1
            } else {
                0
            }
        }
    };
    (k0, k1)
}

/// The modified ∂̄-weight `k̃(p, s) = min{k ∈ ℤ : (s − k)p < 2}`, or
/// `min{k : s − k ≤ 0}` for `p = ∞`.
pub fn modified_dbar_weight(p: LebesgueExponent, s: Rational64) -> i64 {
    match p {
        LebesgueExponent::Infinite => ceil(&s),
        LebesgueExponent::Finite(_) => floor(&(s - p.two_over_p())) + 1,
    }
}

/// `k(p, s) − k̃(p, s)`, always 0 or 1.
pub fn weight_gap(p: LebesgueExponent, s: Rational64) -> i64 {
    dbar_weight(p, s) - modified_dbar_weight(p, s)
}

/// Whether the fractional-part condition `(s − [s])p ∈ {2, 2 − p}` holds, i.e.
/// whether the two weights are predicted to coincide. Never true for
/// `p = ∞` or `p = 1`.
pub fn gap_closes(p: LebesgueExponent, s: Rational64) -> bool {
    match p {
        LebesgueExponent::Infinite => false,
        LebesgueExponent::Finite(p) => {
            let frac = s - s.floor();
            let scaled = frac * p;
            let two = Rational64::from_integer(2);
            scaled == two || scaled == two - p
        }
    }
}

/// Componentwise ∂̄-weight of a weight vector.
pub fn dbar_weight_multi(p: LebesgueExponent, s: &WeightVector) -> IntegerWeight {
    IntegerWeight(s.components().iter().map(|&sj| dbar_weight(p, sj)).collect())
}

/// Componentwise modified ∂̄-weight of a weight vector.
pub fn modified_dbar_weight_multi(p: LebesgueExponent, s: &WeightVector) -> IntegerWeight {
    IntegerWeight(
        s.components()
            .iter()
            .map(|&sj| modified_dbar_weight(p, sj))
            .collect(),
    )
}

/// One row of the weight table: `k`, `k̃`, `(k₀, k₁)` and the gap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightSummary {
    pub p: LebesgueExponent,
    pub s: Rational64,
    pub k: i64,
    pub k_modified: i64,
    pub k0: i64,
    pub k1: i64,
    pub gap: i64,
}

pub fn summarize(p: LebesgueExponent, s: Rational64) -> WeightSummary {
    let (k0, k1) = dbar_weight_decomposition(p, s);
    WeightSummary {
        p,
        s,
        k: dbar_weight(p, s),
        k_modified: modified_dbar_weight(p, s),
        k0,
        k1,
        gap: weight_gap(p, s),
    }
}

impl WeightSummary {
    pub fn s_string(&self) -> String {
        rational_to_string(&self.s)
    }
}

/// Exponent lattice used by the weight consistency sweep.
pub fn oracle_exponents() -> Vec<LebesgueExponent> {
    let r = |n: i64, d: i64| LebesgueExponent::Finite(Rational64::new(n, d));
    vec![
        r(1, 1),
        r(9, 8),
        r(3, 2),
        r(2, 1),
        r(3, 1),
        r(4, 1),
        r(10, 1),
        LebesgueExponent::Infinite,
    ]
}

/// `s ∈ {i/12 : −36 ≤ i ≤ 36}`.
pub fn oracle_weights() -> Vec<Rational64> {
    (-36..=36).map(|i| Rational64::new(i, 12)).collect()
}

/// Search window of the brute-force oracles.
const BRUTE_RANGE: std::ops::RangeInclusive<i64> = -64..=64;

/// `k(p, s)` as the largest integer `m` with `m < 2 + s − 2/p`
/// (`m ≤ s` for `p = 1`), by enumeration.
pub fn brute_force_weight(p: LebesgueExponent, s: Rational64) -> i64 {
    let bound = Rational64::from_integer(2) + s - p.two_over_p();
    BRUTE_RANGE
        .filter(|&m| {
            let m = Rational64::from_integer(m);
            if p.is_one() {
                m <= bound
            } else {
                m < bound
            }
        })
        .max()
        .expect("s inside the search window")
}

/// `k̃(p, s)` as the least integer `k` with `(s − k)p < 2` (`s ≤ k` for
/// `p = ∞`), by enumeration.
pub fn brute_force_modified_weight(p: LebesgueExponent, s: Rational64) -> i64 {
    BRUTE_RANGE
        .filter(|&k| {
            let diff = s - Rational64::from_integer(k);
            match p {
                LebesgueExponent::Finite(p) => diff * p < Rational64::from_integer(2),
                LebesgueExponent::Infinite => diff <= Rational64::zero(),
            }
        })
        .min()
        .expect("s inside the search window")
}

/// Closed forms against enumeration at one `(p, s)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRow {
    pub summary: WeightSummary,
    pub k_brute: i64,
    pub k_modified_brute: i64,
    /// `k₀ + k₁ = k` with `k₁ ∈ {0, 1, 2}`.
    pub decomposition_ok: bool,
    /// The gap is 0 or 1, and 0 exactly when [`gap_closes`] says so.
    pub gap_law_ok: bool,
}

impl OracleRow {
    pub fn passed(&self) -> bool {
        self.summary.k == self.k_brute
            && self.summary.k_modified == self.k_modified_brute
            && self.decomposition_ok
            && self.gap_law_ok
    }
}

pub fn oracle_row(p: LebesgueExponent, s: Rational64) -> OracleRow {
    let summary = summarize(p, s);
    let decomposition_ok = (0..=2).contains(&summary.k1) && summary.k0 + summary.k1 == summary.k;
    let gap_law_ok = (summary.gap == 0 || summary.gap == 1) && (summary.gap == 0) == gap_closes(p, s);
    OracleRow {
        k_brute: brute_force_weight(p, s),
        k_modified_brute: brute_force_modified_weight(p, s),
        summary,
        decomposition_ok,
        gap_law_ok,
    }
}

/// [`oracle_row`] over [`oracle_exponents`] × [`oracle_weights`].
pub fn oracle_table() -> Vec<OracleRow> {
    oracle_exponents()
        .into_iter()
        .flat_map(|p| oracle_weights().into_iter().map(move |s| oracle_row(p, s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn fin(n: i64, d: i64) -> LebesgueExponent {
        LebesgueExponent::Finite(q(n, d))
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(dbar_weight(fin(1, 1), q(0, 1)), 0);
        assert_eq!(dbar_weight(fin(2, 1), q(0, 1)), 0);
        assert_eq!(dbar_weight(LebesgueExponent::Infinite, q(0, 1)), 1);
        assert_eq!(dbar_weight(fin(2, 1), q(1, 2)), 1);
        assert_eq!(brute_force_weight(fin(1, 1), q(0, 1)), 0);
        assert_eq!(brute_force_weight(fin(2, 1), q(1, 2)), 1);
    }

    #[test]
    fn decomposition_examples() {
        assert_eq!(dbar_weight_decomposition(fin(1, 1), q(7, 2)), (3, 0));
        assert_eq!(dbar_weight_decomposition(fin(4, 1), q(0, 1)), (0, 1));
        assert_eq!(
            dbar_weight_decomposition(LebesgueExponent::Infinite, q(1, 3)),
            (0, 2)
        );
    }

    #[test]
    fn modified_examples() {
        assert_eq!(modified_dbar_weight(fin(2, 1), q(0, 1)), 0);
        assert_eq!(modified_dbar_weight(LebesgueExponent::Infinite, q(0, 1)), 0);
        assert_eq!(modified_dbar_weight(fin(2, 1), q(3, 2)), 1);
    }

    #[test]
    fn gap_examples() {
        assert_eq!(weight_gap(fin(2, 1), q(0, 1)), 0);
        assert_eq!(weight_gap(fin(2, 1), q(1, 2)), 1);
        // k(1, 2) = 2 while min{k : (2 − k) < 2} = 1.
        assert_eq!(modified_dbar_weight(fin(1, 1), q(2, 1)), 1);
        assert_eq!(brute_force_modified_weight(fin(1, 1), q(2, 1)), 1);
        assert_eq!(weight_gap(fin(1, 1), q(2, 1)), 1);
    }

    #[test]
    fn multi_examples() {
        let s = WeightVector::new(vec![q(0, 1), q(1, 2)]).unwrap();
        assert_eq!(dbar_weight_multi(fin(2, 1), &s).0, vec![0, 1]);
        let s = WeightVector::new(vec![q(0, 1); 3]).unwrap();
        assert_eq!(
            dbar_weight_multi(LebesgueExponent::Infinite, &s).0,
            vec![1, 1, 1]
        );
        assert!(WeightVector::new(vec![]).is_err());
    }

    #[test]
    fn oracle_table_passes() {
        let rows = oracle_table();
        assert_eq!(rows.len(), 8 * 73);
        assert!(rows.iter().all(OracleRow::passed));
    }

    #[test]
    fn oracle_grid_has_no_mismatch() {
        for p in oracle_exponents() {
            for s in oracle_weights() {
                assert_eq!(dbar_weight(p, s), brute_force_weight(p, s), "k at p={p} s={s}");
                assert_eq!(
                    modified_dbar_weight(p, s),
                    brute_force_modified_weight(p, s),
                    "k~ at p={p} s={s}"
                );
                let (k0, k1) = dbar_weight_decomposition(p, s);
                assert!((0..=2).contains(&k1));
                assert_eq!(k0 + k1, dbar_weight(p, s));
                let gap = weight_gap(p, s);
                assert!(gap == 0 || gap == 1);
                assert_eq!(gap == 0, gap_closes(p, s), "gap law at p={p} s={s}");
            }
        }
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_rational("3/2").unwrap(), q(3, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), q(-1, 4));
        assert_eq!(parse_rational(" 7 ").unwrap(), q(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert_eq!("inf".parse::<LebesgueExponent>().unwrap(), LebesgueExponent::Infinite);
        assert!("1/2".parse::<LebesgueExponent>().is_err());
        let s: WeightVector = "0,1/2".parse().unwrap();
        assert_eq!(s.components(), &[q(0, 1), q(1, 2)]);
    }

    #[test]
    fn lower_bound_on_exponent() {
        assert!(LebesgueExponent::finite(q(1, 2)).is_err());
        assert!(LebesgueExponent::finite(q(1, 1)).is_ok());
    }
}
