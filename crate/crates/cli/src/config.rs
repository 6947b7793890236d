//! TOML experiment configurations.
//!
//! Every subcommand reads its own table layout. Two top-level keys are shared:
//! `kind` (optional, must name the subcommand) and `seed`.

use std::fmt;

use dolbeault_core::domain::{PlanarDomain, ProductDomain};
use dolbeault_core::solver::WeightMode;
use dolbeault_core::weights::{parse_rational, LebesgueExponent, WeightVector};
use num_complex::Complex64;
use num_rational::Rational64;
use serde::de::DeserializeOwned;
use serde::Deserialize;

/// A configuration problem, reported with the offending field path.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError {
    pub path: String,
    pub message: String,
}

impl UsageError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        UsageError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

pub type Usage<T> = std::result::Result<T, UsageError>;

/// A parsed config file: the shared keys and the remaining body.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub body: T,
    pub seed: Option<u64>,
}

/// Parses `text` for subcommand `kind`.
pub fn load<T: DeserializeOwned>(text: &str, kind: &str) -> Usage<Loaded<T>> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| UsageError::new("", e.message().to_string()))?;
    if let Some(k) = table.remove("kind") {
        match k.as_str() {
            Some(name) if name == kind => {}
            _ => return Err(UsageError::new("kind", format!("expected \"{kind}\", got {k}"))),
        }
    }
    let seed = match table.remove("seed") {
        None => None,
        Some(v) => match v.as_integer() {
            Some(i) if i >= 0 => Some(i as u64),
            _ => return Err(UsageError::new("seed", "must be a non-negative integer")),
        },
    };
    let body = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        UsageError::new(if path == "." { String::new() } else { path }, e.into_inner().message().to_string())
    })?;
    Ok(Loaded { body, seed })
}

/// A number written either as a TOML number or as a string such as `"3/2"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Number {
    fn text(&self) -> String {
        match self {
            Number::Int(i) => i.to_string(),
            Number::Float(x) => x.to_string(),
            Number::Text(t) => t.clone(),
        }
    }

    pub fn rational(&self, path: &str) -> Usage<Rational64> {
        parse_rational(&self.text()).map_err(|e| UsageError::new(path, e.to_string()))
    }

    pub fn exponent(&self, path: &str) -> Usage<LebesgueExponent> {
        self.text()
            .parse()
            .map_err(|e: dolbeault_core::error::Error| UsageError::new(path, e.to_string()))
    }
}

/// One number or a list of numbers.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(Number),
    Many(Vec<Number>),
}

impl OneOrMany {
    /// Weight vector in dimension `n`; a single value is repeated.
    pub fn weight_vector(&self, path: &str, n: usize) -> Usage<WeightVector> {
        let parts = match self {
            OneOrMany::One(x) => vec![x.rational(path)?; n],
            OneOrMany::Many(xs) => xs
                .iter()
                .enumerate()
                .map(|(i, x)| x.rational(&format!("{path}[{i}]")))
                .collect::<Usage<Vec<_>>>()?,
        };
        if parts.len() != n {
            return Err(UsageError::new(path, format!("expected {n} components, got {}", parts.len())));
        }
        WeightVector::new(parts).map_err(|e| UsageError::new(path, e.to_string()))
    }
}

pub fn rationals(path: &str, xs: &[Number]) -> Usage<Vec<Rational64>> {
    xs.iter()
        .enumerate()
        .map(|(i, x)| x.rational(&format!("{path}[{i}]")))
        .collect()
}

pub fn exponents(path: &str, xs: &[Number]) -> Usage<Vec<LebesgueExponent>> {
    xs.iter()
        .enumerate()
        .map(|(i, x)| x.exponent(&format!("{path}[{i}]")))
        .collect()
}

/// Nonempty and strictly increasing.
pub fn sweep<T: PartialOrd + Copy>(path: &str, xs: &[T]) -> Usage<Vec<T>> {
    if xs.is_empty() {
        return Err(UsageError::new(path, "sweep list is empty"));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(UsageError::new(path, "resolutions must be strictly increasing"));
    }
    Ok(xs.to_vec())
}

pub fn nonempty<T: Clone>(path: &str, xs: &[T]) -> Usage<Vec<T>> {
    if xs.is_empty() {
        return Err(UsageError::new(path, "list is empty"));
    }
    Ok(xs.to_vec())
}

pub fn positive(path: &str, x: f64) -> Usage<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(UsageError::new(path, format!("must be positive, got {x}")))
    }
}

/// One planar factor.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum FactorSpec {
    Disc {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    Rect {
        lo: [f64; 2],
        hi: [f64; 2],
    },
}

impl FactorSpec {
    pub fn build(&self, path: &str) -> Usage<PlanarDomain> {
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        match *self {
            FactorSpec::Disc { center, radius } => PlanarDomain::disc(c(center), radius),
            FactorSpec::Rect { lo, hi } => PlanarDomain::rect(c(lo), c(hi)),
        }
        .map_err(|e| UsageError::new(path, e.to_string()))
    }
}

/// A product domain from factor specs; one spec is repeated `n` times, and
/// none gives the default disc of radius `radius` about the origin.
pub fn product(path: &str, specs: &Option<Vec<FactorSpec>>, n: usize, radius: f64) -> Usage<ProductDomain> {
    let factors = match specs {
        None => vec![PlanarDomain::disc(Complex64::new(0.0, 0.0), radius).map_err(|e| UsageError::new(path, e.to_string()))?; n],
        Some(list) if list.len() == 1 => vec![list[0].build(&format!("{path}[0]"))?; n],
        Some(list) if list.len() == n => list
            .iter()
            .enumerate()
            .map(|(i, f)| f.build(&format!("{path}[{i}]")))
            .collect::<Usage<Vec<_>>>()?,
        Some(list) => {
            return Err(UsageError::new(path, format!("expected 1 or {n} factors, got {}", list.len())));
        }
    };
    ProductDomain::new(factors).map_err(|e| UsageError::new(path, e.to_string()))
}

pub fn weight_mode(path: &str, text: &str) -> Usage<WeightMode> {
    match text {
        "full" => Ok(WeightMode::Full),
        "modified" => Ok(WeightMode::Modified),
        other => Err(UsageError::new(path, format!("expected \"full\" or \"modified\", got {other:?}"))),
    }
}

fn default_two() -> Number {
    Number::Int(2)
}

fn default_zero() -> OneOrMany {
    OneOrMany::One(Number::Int(0))
}

fn default_epsilon() -> Number {
    Number::Text("1/10".into())
}

fn default_full() -> String {
    "full".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    /// Defaults to the oracle exponents.
    pub p: Option<Vec<Number>>,
    /// Defaults to the oracle weights.
    pub s: Option<Vec<Number>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CauchyConfig {
    #[serde(default = "CauchyConfig::default_k")]
    pub k: Vec<i64>,
    #[serde(default = "CauchyConfig::default_forms")]
    pub forms: Vec<String>,
    /// Polar `(nr, nt)` levels of the unit disc.
    pub resolutions: Vec<[usize; 2]>,
    #[serde(default = "CauchyConfig::default_targets")]
    pub targets: usize,
    #[serde(default = "CauchyConfig::default_reach")]
    pub reach: f64,
    #[serde(default = "CauchyConfig::default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "CauchyConfig::default_order")]
    pub min_order: f64,
    /// One row per target instead of one per level.
    #[serde(default)]
    pub pointwise: bool,
}

impl CauchyConfig {
    fn default_k() -> Vec<i64> {
        vec![0, 1]
    }
    fn default_forms() -> Vec<String> {
        vec!["one".into(), "conjugate".into()]
    }
    fn default_targets() -> usize {
        50
    }
    fn default_reach() -> f64 {
        0.9
    }
    fn default_tolerance() -> f64 {
        1e-3
    }
    fn default_order() -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// `(α, β)` pairs.
    #[serde(default = "KernelConfig::default_pairs")]
    pub pairs: Vec<[f64; 2]>,
    #[serde(default = "KernelConfig::default_radius")]
    pub radius: f64,
    /// Dyadic targets `2^{−1}, …, 2^{−targets}`.
    #[serde(default = "KernelConfig::default_targets")]
    pub targets: usize,
    /// One-based dyadic exponent of the fit point; defaults to `z = R/2`.
    pub fit: Option<usize>,
    #[serde(default = "KernelConfig::default_slack")]
    pub slack: f64,
}

impl KernelConfig {
    fn default_pairs() -> Vec<[f64; 2]> {
        vec![[1.0, 1.0], [1.5, 1.0], [0.5, 0.5]]
    }
    fn default_radius() -> f64 {
        1.0
    }
    fn default_targets() -> usize {
        8
    }
    fn default_slack() -> f64 {
        1.05
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomotopyConfig {
    #[serde(default = "HomotopyConfig::default_n")]
    pub n: usize,
    /// Defaults to the named forms of the homotopy sweep.
    pub forms: Option<Vec<String>>,
    pub resolutions: Vec<usize>,
    pub domain: Option<Vec<FactorSpec>>,
    #[serde(default = "HomotopyConfig::default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "HomotopyConfig::default_chain")]
    pub chain_tolerance: f64,
}

impl HomotopyConfig {
    fn default_n() -> usize {
        2
    }
    fn default_tolerance() -> f64 {
        1e-2
    }
    fn default_chain() -> f64 {
        1e-3
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveFile {
    pub n: usize,
    #[serde(default = "default_two")]
    pub p: Number,
    #[serde(default = "default_zero")]
    pub s: OneOrMany,
    #[serde(default = "default_full")]
    pub mode: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: Number,
    /// Named test form.
    pub omega: String,
    pub resolutions: Vec<usize>,
    pub outer: Option<Vec<FactorSpec>>,
    pub inner: Option<Vec<FactorSpec>>,
    /// Relative drift of the η norm between the last two levels.
    #[serde(default = "SolveFile::default_drift")]
    pub drift_tolerance: f64,
    /// Checked at the finest level when present.
    pub mode_gap_tolerance: Option<f64>,
    /// ε values for `sweep`.
    pub epsilons: Option<Vec<Number>>,
}

impl SolveFile {
    fn default_drift() -> f64 {
        0.05
    }
}

/// A scalar test function.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Monomial {
        a: u32,
        b: u32,
        expect: Option<Expect>,
    },
    Power {
        l: f64,
        expect: Option<Expect>,
    },
    LogModified {
        e: f64,
        expect: Option<Expect>,
    },
    Holomorphic {
        m: i64,
        expect: Option<Expect>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expect {
    Converges,
    Diverges,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsConfig {
    #[serde(default = "default_two")]
    pub p: Number,
    #[serde(default = "default_zero_number")]
    pub s: Number,
    #[serde(default = "NormsConfig::default_radius")]
    pub radius: f64,
    pub functions: Vec<FunctionSpec>,
    pub resolutions: Option<Vec<usize>>,
}

fn default_zero_number() -> Number {
    Number::Int(0)
}

impl NormsConfig {
    fn default_radius() -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpnormConfig {
    #[serde(default = "default_two")]
    pub p: Number,
    #[serde(default = "default_zero_number")]
    pub s: Number,
    #[serde(default = "default_full")]
    pub mode: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: Number,
    #[serde(default = "OpnormConfig::default_bumps")]
    pub bumps: usize,
    #[serde(default = "OpnormConfig::default_radius")]
    pub radius: f64,
    pub resolutions: Vec<usize>,
    #[serde(default = "OpnormConfig::default_drift")]
    pub drift_tolerance: f64,
}

impl OpnormConfig {
    fn default_bumps() -> usize {
        20
    }
    fn default_radius() -> f64 {
        1.0
    }
    fn default_drift() -> f64 {
        0.10
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessConfig {
    /// `(p, s)` pairs; defaults to the named pairs.
    pub pairs: Option<Vec<[Number; 2]>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_must_match() {
        let e = load::<WitnessConfig>("kind = \"solve\"", "witness").unwrap_err();
        assert_eq!(e.path, "kind");
        assert!(load::<WitnessConfig>("kind = \"witness\"\nseed = 3", "witness").unwrap().seed == Some(3));
    }

    #[test]
    fn unknown_field_reports_its_path() {
        let e = load::<HomotopyConfig>("resolutions = [16]\nresolution = 3", "homotopy").unwrap_err();
        assert!(e.message.contains("resolution"), "{e}");
        let e = load::<SolveFile>("n = 1\nomega = \"dz1\"\nresolutions = [8]\nouter = [{ shape = \"disc\", radius = \"x\" }]", "solve")
            .unwrap_err();
        assert!(e.path.starts_with("outer"), "{e}");
    }

    #[test]
    fn numbers_parse_exactly() {
        let x: Vec<Number> = vec![Number::Int(2), Number::Float(0.25), Number::Text("3/2".into())];
        assert_eq!(
            rationals("s", &x).unwrap(),
            vec![Rational64::from_integer(2), Rational64::new(1, 4), Rational64::new(3, 2)]
        );
        assert!(Number::Text("inf".into()).exponent("p").unwrap().is_infinite());
        assert_eq!(Number::Text("x".into()).rational("s[0]").unwrap_err().path, "s[0]");
    }

    #[test]
    fn sweeps_must_increase() {
        assert!(sweep::<usize>("resolutions", &[]).is_err());
        assert!(sweep("resolutions", &[32, 16]).is_err());
        assert_eq!(sweep("resolutions", &[16, 32]).unwrap(), vec![16, 32]);
    }
}
