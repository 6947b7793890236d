//! The local weighted `∂̄`-solution operator on a product domain.
//!
//! Given `Q = G₁×⋯×Gₙ ⊂⊂ P = D₁×⋯×Dₙ`, cutoffs `χ_j` equal to one near `G_j`
//! and supported in `D_j`, a weight `c` and a `∂̄_c`-closed `(0,q)`-form `ω`,
//! set `ω^n = ω` and for `j = n, …, q`
//!
//! ```text
//! η^j     = I_{c_j}^{P_j}(χ_j ω^j)
//! ω^{j−1} = I_{c_j}^{P_j}(∂̄χ_j ∧ ω^j)
//! ϑ^j     = I_{c_j}^{P_j}(χ_j ∂̄_c ω^j)
//! ```
//!
//! Then `η = Σ_j η^j` solves `∂̄_c η = ω` on `Q`. The weight is either
//! `c = k(p,s)` (target weight `s⁺ = (s₁, …, sₙ + 1 − ε)`) or
//! `c = k̃(p,s)` (target weight `s⁺ = s`).

use std::sync::Arc;

use ndarray::{ArrayD, Dimension, Zip};
use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::Zero;

use crate::analysis::{form_weighted_norm, NormValue};
use crate::domain::{build_grid, FactorResolution, PlanarDomain, ProductDomain, ProductGrid};
use crate::error::{Error, Result};
use crate::forms::{area_mask, dbar_weighted, interior_mask, sample_field, Form0q, MultiIndex};
use crate::homotopy::{axis_area_op, gamma_class, AxisOperatorSpec, AxisOperators, RESIDUAL_MARGIN};
use crate::weights::{dbar_weight_multi, modified_dbar_weight_multi, IntegerWeight, LebesgueExponent, WeightVector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default `(inner, outer)` cutoff margins: the plateau reaches `inner`
/// beyond `G_j`, the support stops `outer` short of `bD_j`.
pub const DEFAULT_MARGINS: (f64, f64) = (0.05, 0.05);
/// Residual bound of the compact-support identity.
pub const LEMMA41_TOLERANCE: f64 = 1e-2;
/// Residual bound of `∂̄_c η = ω` on `Q`.
pub const SOLVE_TOLERANCE: f64 = 2e-2;
/// Largest relative `L¹` mass of `∂̄_c ω^j` outside the cutoff bands.
pub const SUPPORT_LEAK_TOLERANCE: f64 = 1e-3;
/// Largest size of `ϑ^j` on `Q`, relative to `ω`.
pub const THETA_TOLERANCE: f64 = 2e-2;
/// Relative residual of the stage law `∂̄_cω^{j−1} + I(∂̄χ_j ∧ ∂̄_cω^j) = ∂̄χ_j ∧ ω^j`.
pub const STAGE_TOLERANCE: f64 = 2e-2;

/// `t ↦ e^{−1/t}` glued smoothly from 0 to 1 on `[0, 1]`, with derivative.
pub fn smoothstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let f = |x: f64| (-1.0 / x).exp();
    let (a, b) = (f(t), f(1.0 - t));
    let (da, db) = (a / (t * t), b / ((1.0 - t) * (1.0 - t)));
    let sum = a + b;
    (a / sum, (da * b + a * db) / (sum * sum))
}

/// Rises on `[a0, a1]`, equals one on `[a1, b0]`, falls on `[b0, b1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Transition {
    a0: f64,
    a1: f64,
    b0: f64,
    b1: f64,
}

impl Transition {
    fn eval(&self, x: f64) -> (f64, f64) {
        if x < self.a1 {
            let w = self.a1 - self.a0;
            let (v, d) = smoothstep((x - self.a0) / w);
            (v, d / w)
        } else if x > self.b0 {
            let w = self.b1 - self.b0;
            let (v, d) = smoothstep((self.b1 - x) / w);
            (v, -d / w)
        } else {
            (1.0, 0.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CutoffShape {
    /// `χ = step((support − |z − c|)/(support − plateau))`.
    Radial { center: Complex64, plateau: f64, support: f64 },
    Box { x: Transition, y: Transition },
}

/// One smooth cutoff `χ_j` on a factor `D_j` around `G_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cutoff {
    pub outer: PlanarDomain,
    pub inner: PlanarDomain,
    shape: CutoffShape,
}

impl Cutoff {
    pub fn new(outer: &PlanarDomain, inner: &PlanarDomain, margins: (f64, f64)) -> Result<Self> {
        let (m_in, m_out) = margins;
        if !(m_in > 0.0 && m_out > 0.0) {
            return Err(Error::InvalidParameter(format!("margins must be positive, got {margins:?}")));
        }
        if !inner.compactly_inside(outer) {
            return Err(Error::InvalidParameter(format!("{inner:?} is not compactly inside {outer:?}")));
        }
        let shape = match (*inner, *outer) {
            (PlanarDomain::Rect { lo: g0, hi: g1 }, PlanarDomain::Rect { lo: d0, hi: d1 }) => CutoffShape::Box {
                x: Transition {
                    a0: d0.re + m_out,
                    a1: g0.re - m_in,
                    b0: g1.re + m_in,
                    b1: d1.re - m_out,
                },
                y: Transition {
                    a0: d0.im + m_out,
                    a1: g0.im - m_in,
                    b0: g1.im + m_in,
                    b1: d1.im - m_out,
                },
            },
            (PlanarDomain::Disc { center, radius }, _) => CutoffShape::Radial {
                center,
                plateau: radius + m_in,
                support: outer.boundary_distance(center) - m_out,
            },
            (PlanarDomain::Rect { lo, hi }, PlanarDomain::Disc { .. }) => {
                let center = (lo + hi) * 0.5;
                CutoffShape::Radial {
                    center,
                    plateau: (hi - lo).norm() * 0.5 + m_in,
                    support: outer.boundary_distance(center) - m_out,
                }
            }
        };
        let feasible = match shape {
            CutoffShape::Radial { plateau, support, .. } => plateau < support,
            CutoffShape::Box { x, y } => x.a0 < x.a1 && x.b0 < x.b1 && y.a0 < y.a1 && y.b0 < y.b1,
        };
        if !feasible {
            return Err(Error::InvalidParameter(format!(
                "margins {margins:?} leave no transition band between {inner:?} and {outer:?}"
            )));
        }
        Ok(Cutoff {
            outer: *outer,
            inner: *inner,
            shape,
        })
    }

    /// `(χ(z), ∂χ/∂z̄(z))`.
    pub fn eval(&self, z: Complex64) -> (f64, Complex64) {
        match self.shape {
            CutoffShape::Radial { center, plateau, support } => {
                let w = z - center;
                let rho = w.norm();
                let width = support - plateau;
                let (v, d) = smoothstep((support - rho) / width);
                if d == 0.0 {
                    return (v, ZERO);
                }
                (v, w * (-d / (width * 2.0 * rho)))
            }
            CutoffShape::Box { x, y } => {
                let (u, du) = x.eval(z.re);
                let (v, dv) = y.eval(z.im);
                (u * v, Complex64::new(du * v, u * dv) * 0.5)
            }
        }
    }

    pub fn value(&self, z: Complex64) -> f64 {
        self.eval(z).0
    }

    pub fn dbar(&self, z: Complex64) -> Complex64 {
        self.eval(z).1
    }

    /// True where `χ` is identically one.
    pub fn on_plateau(&self, z: Complex64) -> bool {
        match self.shape {
            CutoffShape::Radial { center, plateau, .. } => (z - center).norm() <= plateau,
            CutoffShape::Box { x, y } => {
                (x.a1..=x.b0).contains(&z.re) && (y.a1..=y.b0).contains(&z.im)
            }
        }
    }

    /// True where `χ` may be non-zero.
    pub fn in_support(&self, z: Complex64) -> bool {
        match self.shape {
            CutoffShape::Radial { center, support, .. } => (z - center).norm() < support,
            CutoffShape::Box { x, y } => {
                z.re > x.a0 && z.re < x.b1 && z.im > y.a0 && z.im < y.b1
            }
        }
    }

    /// The closed band carrying `∂̄χ`.
    pub fn in_band(&self, z: Complex64) -> bool {
        self.in_support(z) && !self.on_plateau(z)
    }
}

/// One cutoff per factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffFamily {
    pub cutoffs: Vec<Cutoff>,
    pub margins: (f64, f64),
}

impl CutoffFamily {
    pub fn dim(&self) -> usize {
        self.cutoffs.len()
    }

    /// `χ_axis` as a field on the grid.
    pub fn chi_field(&self, grid: &ProductGrid, axis: usize) -> ArrayD<Complex64> {
        let c = &self.cutoffs[axis];
        sample_field(grid, |z| Complex64::new(c.value(z[axis]), 0.0))
    }

    /// `∂χ_axis/∂z̄_axis` as a field on the grid.
    pub fn dbar_field(&self, grid: &ProductGrid, axis: usize) -> ArrayD<Complex64> {
        let c = &self.cutoffs[axis];
        sample_field(grid, |z| c.dbar(z[axis]))
    }
}

pub fn make_cutoffs(p: &ProductDomain, q: &ProductDomain, margins: (f64, f64)) -> Result<CutoffFamily> {
    if p.dim() != q.dim() {
        return Err(Error::InvalidParameter(format!(
            "Q has {} factors, P has {}",
            q.dim(),
            p.dim()
        )));
    }
    let cutoffs = p
        .factors()
        .iter()
        .zip(q.factors())
        .map(|(d, g)| Cutoff::new(d, g, margins))
        .collect::<Result<Vec<_>>>()?;
    Ok(CutoffFamily { cutoffs, margins })
}

/// `∂̄χ ∧ ω` for `∂̄χ = g dz̄_axis`.
pub fn wedge_axis(omega: &Form0q, axis: usize, g: &ArrayD<Complex64>) -> Result<Form0q> {
    let mut parts = Vec::new();
    for (j, a) in omega.components() {
        let Some((k, sign)) = j.wedge_front(axis) else {
            continue;
        };
        let mut v = a * g;
        if sign < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        parts.push((k, v));
    }
    let mut out = Form0q::zeros(omega.grid(), omega.q() + 1)?;
    for (k, v) in parts {
        *out.component_mut(k).expect("canonical component") = v;
    }
    Ok(out)
}

/// Nodes of the grid that lie in `Q`.
pub fn inner_mask(grid: &ProductGrid, q: &ProductDomain) -> ArrayD<bool> {
    area_mask(grid, |z| q.contains(z))
}

/// Residual of `ω = ∂̄_m I_{m_e}^{P_e} ω + I_{m_e}^{P_e} ∂̄_m ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma41Report {
    pub axis: usize,
    pub residual: f64,
    pub scale: f64,
}

/// Identity residual on interior nodes, without checking that `ω` has
/// compact support along `axis` (the negative control).
pub fn lemma41_residual_unchecked(ops: &AxisOperators, omega: &Form0q, m: &IntegerWeight, axis: usize) -> Result<Lemma41Report> {
    let grid = ops.grid();
    if m.dim() != grid.dim() {
        return Err(Error::InvalidParameter(format!("weight {m} for {} factors", grid.dim())));
    }
    if omega.q() == 0 || omega.q() > axis + 1 {
        return Err(Error::InvalidParameter(format!(
            "identity needs 1 ≤ q ≤ e, got q = {}, e = {}",
            omega.q(),
            axis + 1
        )));
    }
    let spec = AxisOperatorSpec::new(grid, axis, m.components()[axis])?;
    let mut rest = omega.sub(&dbar_weighted(&axis_area_op(ops, omega, &spec)?, m)?)?;
    if omega.q() < omega.n() {
        let d = dbar_weighted(omega, m)?;
        rest = rest.sub(&axis_area_op(ops, &d, &spec)?)?;
    }
    let mask = interior_mask(grid, RESIDUAL_MARGIN);
    Ok(Lemma41Report {
        axis,
        residual: rest.sup_norm(&mask),
        scale: omega.sup_norm(&mask),
    })
}

/// Like [`lemma41_residual_unchecked`], after checking `m ≤ k(p, s)` and
/// that `ω` vanishes on the boundary nodes of factor `axis` and on its
/// outermost layer of cells.
pub fn lemma41_residual(
    ops: &AxisOperators,
    omega: &Form0q,
    m: &IntegerWeight,
    axis: usize,
    p: LebesgueExponent,
    s: &WeightVector,
) -> Result<Lemma41Report> {
    let k = dbar_weight_multi(p, s);
    if !m.le(&k) {
        return Err(Error::Precondition(format!("weight {m} exceeds k(p, s) = {k}")));
    }
    let grid = ops.grid();
    let a = grid.axis(axis);
    let dist: Vec<f64> = (0..a.n_area()).map(|i| a.domain().boundary_distance(a.point(i))).collect();
    let layer = 2.0 * dist.iter().copied().fold(f64::INFINITY, f64::min);
    let near: Vec<bool> = (0..a.extended_len())
        .map(|i| i >= a.n_area() || dist[i] < layer)
        .collect();
    for (j, c) in omega.components() {
        for (idx, v) in c.indexed_iter() {
            if near[idx[axis]] && *v != ZERO {
                return Err(Error::Precondition(format!(
                    "component {j} does not vanish near the boundary of factor {}",
                    axis + 1
                )));
            }
        }
    }
    lemma41_residual_unchecked(ops, omega, m, axis)
}

/// Which weight the solver integrates with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// `c = k(p, s)`, `s⁺ = (s₁, …, sₙ + 1 − ε)`.
    Full,
    /// `c = k̃(p, s)`, `s⁺ = s`.
    Modified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub outer: ProductDomain,
    pub inner: ProductDomain,
    pub p: LebesgueExponent,
    pub s: WeightVector,
    pub mode: WeightMode,
    pub epsilon: Rational64,
    pub margins: (f64, f64),
    /// Scalar per-factor resolution.
    pub resolution: usize,
}

impl SolveConfig {
    pub fn new(outer: ProductDomain, inner: ProductDomain, p: LebesgueExponent, s: WeightVector, mode: WeightMode, resolution: usize) -> Result<Self> {
        let cfg = SolveConfig {
            outer,
            inner,
            p,
            s,
            mode,
            epsilon: Rational64::new(1, 10),
            margins: DEFAULT_MARGINS,
            resolution,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.outer.dim();
        if self.inner.dim() != n || self.s.dim() != n {
            return Err(Error::InvalidParameter("P, Q and s must have the same dimension".into()));
        }
        if self.epsilon <= Rational64::zero() || self.epsilon >= Rational64::from_integer(1) {
            return Err(Error::InvalidParameter(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        make_cutoffs(&self.outer, &self.inner, self.margins).map(|_| ())
    }

    /// The integration weight `c`.
    pub fn weight(&self) -> IntegerWeight {
        match self.mode {
            WeightMode::Full => dbar_weight_multi(self.p, &self.s),
            WeightMode::Modified => modified_dbar_weight_multi(self.p, &self.s),
        }
    }

    pub fn modified_weight(&self) -> IntegerWeight {
        modified_dbar_weight_multi(self.p, &self.s)
    }

    /// `s⁺`.
    pub fn target_weight(&self) -> WeightVector {
        match self.mode {
            WeightMode::Full => self.s.shift_last(Rational64::from_integer(1) - self.epsilon),
            WeightMode::Modified => self.s.clone(),
        }
    }

    pub fn with_resolution(&self, resolution: usize) -> Self {
        SolveConfig {
            resolution,
            ..self.clone()
        }
    }

    pub fn grid(&self) -> Result<Arc<ProductGrid>> {
        let r: Vec<_> = self
            .outer
            .factors()
            .iter()
            .map(|d| FactorResolution::from_scalar(d, self.resolution))
            .collect();
        Ok(Arc::new(build_grid(&self.outer, &r)?))
    }
}

/// One step `j` of the induction.
#[derive(Debug, Clone)]
pub struct SolveStage {
    /// One-based axis index `j`.
    pub j: usize,
    /// `ω^j`.
    pub omega: Form0q,
    /// `∂̄_c ω^j`; `None` for top-degree forms.
    pub dbar_omega: Option<Form0q>,
    pub eta: Form0q,
    pub theta: Form0q,
    /// `ω^{j−1}`, absent for `j = q`.
    pub next: Option<Form0q>,
    /// `ω^j` avoids `dz̄_{j+1}, …, dz̄_n`.
    pub gamma_ok: bool,
}

#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub weight: IntegerWeight,
    pub cutoffs: CutoffFamily,
    /// Stages in the order `j = n, …, q`.
    pub stages: Vec<SolveStage>,
    /// Relative `∂̄_c ω` of the input and the tolerance it was held to.
    pub closed_residual: f64,
    pub closed_tolerance: f64,
}

fn off_divisor_mask(grid: &ProductGrid, c: &IntegerWeight) -> ArrayD<bool> {
    let base = interior_mask(grid, RESIDUAL_MARGIN);
    let radii: Vec<f64> = grid.axes().iter().map(|a| 0.1 * a.domain().diameter()).collect();
    let keep = area_mask(grid, |z| {
        z.iter()
            .zip(&radii)
            .zip(c.components())
            .all(|((z, r), &k)| k == 0 || z.norm() >= *r)
    });
    let mut out = base;
    Zip::from(&mut out).and(&keep).for_each(|a, &b| *a = *a && b);
    out
}

/// Relative `∂̄∂̄` residual of a generic smooth `(0, q−1)` form on `grid`,
/// the differentiation error the closedness test is measured against.
pub fn closedness_calibration(grid: &Arc<ProductGrid>, q: usize) -> Result<f64> {
    let n = grid.dim();
    if q == 0 || q >= n {
        return Ok(0.0);
    }
    let phi = Form0q::from_fn(grid, q - 1, |j, z| {
        let mut arg = ZERO;
        for (i, zi) in z.iter().enumerate() {
            let a = 0.3 + 0.17 * (i as f64 + 1.0) + 0.11 * j.len() as f64 + 0.05 * (j.axes().iter().sum::<usize>() as f64);
            arg += zi.conj() * a + zi * (0.2 * (i as f64 + 1.0));
        }
        arg.exp()
    })?;
    let w = crate::forms::dbar_numeric(&phi)?;
    let dd = crate::forms::dbar_numeric(&w)?;
    let mask = interior_mask(grid, RESIDUAL_MARGIN);
    let scale = w.sup_norm(&mask);
    Ok(if scale > 0.0 { dd.sup_norm(&mask) / scale } else { 0.0 })
}

/// Relative floor of the closedness tolerance.
pub const CLOSED_FLOOR: f64 = 1e-10;

/// Runs the induction and returns `η = Σ_j η^j` with its trace.
pub fn solve(ops: &AxisOperators, omega: &Form0q, cfg: &SolveConfig) -> Result<(Form0q, SolveTrace)> {
    let grid = ops.grid().clone();
    if !Arc::ptr_eq(omega.grid(), &grid) {
        return Err(Error::InvalidParameter("form lives on a different grid".into()));
    }
    cfg.validate()?;
    if grid.domain() != cfg.outer {
        return Err(Error::InvalidParameter("grid does not discretize P".into()));
    }
    let n = grid.dim();
    let q = omega.q();
    if q == 0 {
        return Err(Error::InvalidParameter("the solver needs q ≥ 1".into()));
    }
    let c = cfg.weight();
    let cutoffs = make_cutoffs(&cfg.outer, &cfg.inner, cfg.margins)?;

    let (closed_residual, closed_tolerance) = if q < n {
        let mask = off_divisor_mask(&grid, &c);
        let scale = omega.sup_norm(&mask);
        let d = dbar_weighted(omega, &c)?;
        let rel = if scale > 0.0 { d.sup_norm(&mask) / scale } else { 0.0 };
        let tol = (10.0 * closedness_calibration(&grid, q)?).max(CLOSED_FLOOR);
        if !(rel <= tol) {
            return Err(Error::Precondition(format!(
                "input is not ∂̄_c-closed: relative residual {rel:.3e} > {tol:.3e}"
            )));
        }
        (rel, tol)
    } else {
        (0.0, 0.0)
    };

    let mut eta = Form0q::zeros(&grid, q - 1)?;
    let mut stages = Vec::with_capacity(n + 1 - q);
    let mut current = omega.clone();
    for axis in (q - 1..n).rev() {
        let j = axis + 1;
        let spec = AxisOperatorSpec::new(&grid, axis, c.components()[axis])?;
        let chi = cutoffs.chi_field(&grid, axis);
        let gamma_ok = gamma_class(&current, None, j);
        if !gamma_ok {
            return Err(Error::Consistency(format!(
                "ω^{j} has components {:?} outside dz̄_1 … dz̄_{j}",
                current.support_indices()
            )));
        }
        let eta_j = axis_area_op(ops, &current.multiply(&chi), &spec)?;
        eta = eta.add(&eta_j)?;
        let dbar_omega = if q < n { Some(dbar_weighted(&current, &c)?) } else { None };
        let theta = match &dbar_omega {
            Some(d) => axis_area_op(ops, &d.multiply(&chi), &spec)?,
            None => Form0q::zeros(&grid, q)?,
        };
        let next = if axis > q - 1 {
            let g = cutoffs.dbar_field(&grid, axis);
            Some(axis_area_op(ops, &wedge_axis(&current, axis, &g)?, &spec)?)
        } else {
            None
        };
        stages.push(SolveStage {
            j,
            omega: current.clone(),
            dbar_omega,
            eta: eta_j,
            theta,
            next: next.clone(),
            gamma_ok,
        });
        if let Some(nx) = next {
            current = nx;
        }
    }
    Ok((
        eta,
        SolveTrace {
            weight: c,
            cutoffs,
            stages,
            closed_residual,
            closed_tolerance,
        },
    ))
}

/// Everything [`verify_solution`] measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    /// `sup_Q |∂̄_c η − ω|`.
    pub residual_on_q: f64,
    /// `sup_Q |ω|`.
    pub scale_on_q: f64,
    pub eta_norm: NormValue,
    pub omega_norm: NormValue,
    /// `‖η‖_{|z|^{s⁺}L^p} / ‖ω‖_{|z|^s L^p}`; `None` when `ω = 0`.
    pub ratio: Option<f64>,
    /// Every `ω^j` avoids `dz̄_{j+1}, …, dz̄_n`.
    pub gamma_ok: bool,
    /// Worst relative residual of the stage law, over `j = n, …, q+1`.
    pub stage_residual: f64,
    /// Worst relative `L¹` mass of `∂̄_c ω^j` outside `∪_{l>j} S_l`.
    pub support_leak: f64,
    /// Worst `sup_Q |ϑ^j|` relative to `sup |ω|`.
    pub theta_on_q: f64,
    /// Relative gap between `∂̄_c η` and `∂̄_k̃ η` off the divisor.
    pub mode_gap: f64,
}

impl Verification {
    pub fn residual_passed(&self) -> bool {
        self.residual_on_q <= SOLVE_TOLERANCE * self.scale_on_q.max(1.0)
    }

    pub fn trace_passed(&self) -> bool {
        self.gamma_ok
            && self.stage_residual <= STAGE_TOLERANCE
            && self.support_leak <= SUPPORT_LEAK_TOLERANCE
            && self.theta_on_q <= THETA_TOLERANCE
    }
}

fn cell_areas(grid: &ProductGrid) -> ArrayD<f64> {
    let areas: Vec<&[f64]> = grid.axes().iter().map(|a| a.area.areas()).collect();
    let n_area: Vec<usize> = grid.axes().iter().map(|a| a.n_area()).collect();
    ArrayD::from_shape_fn(ndarray::IxDyn(&grid.extended_shape()), |idx| {
        let mut w = 1.0;
        for (k, &i) in idx.slice().iter().enumerate() {
            if i >= n_area[k] {
                return 0.0;
            }
            w *= areas[k][i];
        }
        w
    })
}

fn l1_mass(form: &Form0q, weights: &ArrayD<f64>, keep: &ArrayD<bool>) -> f64 {
    let mut total = 0.0;
    for (_, a) in form.components() {
        Zip::from(a).and(weights).and(keep).for_each(|v, &w, &k| {
            if k && w > 0.0 && v.is_finite() {
                total += w * v.norm();
            }
        });
    }
    total
}

pub fn verify_solution(eta: &Form0q, omega: &Form0q, trace: &SolveTrace, cfg: &SolveConfig) -> Result<Verification> {
    let grid = omega.grid().clone();
    let n = grid.dim();
    let c = &trace.weight;
    let q_mask = inner_mask(&grid, &cfg.inner);
    let all = interior_mask(&grid, RESIDUAL_MARGIN);
    let scale = omega.sup_norm(&all);

    let d_eta = dbar_weighted(eta, c)?;
    let residual_on_q = d_eta.sub(omega)?.sup_norm(&q_mask);
    let scale_on_q = omega.sup_norm(&q_mask);

    let s = cfg.s.to_f64();
    let s_plus = cfg.target_weight().to_f64();
    let eta_norm = if eta.q() + 1 == omega.q() { form_weighted_norm(eta, cfg.p, &s_plus) } else { NormValue::Infinite };
    let omega_norm = form_weighted_norm(omega, cfg.p, &s);
    let ratio = match omega_norm {
        NormValue::Finite(0.0) => None,
        NormValue::Finite(v) => Some(eta_norm.value() / v),
        NormValue::Infinite => None,
    };

    let k_mod = cfg.modified_weight();
    let mode_mask = off_divisor_mask(&grid, &c.clone());
    let alt = dbar_weighted(eta, &k_mod)?;
    let denom = d_eta.sup_norm(&mode_mask);
    let mode_gap = if denom > 0.0 { d_eta.sub(&alt)?.sup_norm(&mode_mask) / denom } else { 0.0 };

    let gamma_ok = trace.stages.iter().all(|st| gamma_class(&st.omega, None, st.j));

    let ops = AxisOperators::new(&grid);
    let mut stage_residual: f64 = 0.0;
    let mut support_leak: f64 = 0.0;
    let mut theta_on_q: f64 = 0.0;
    let weights = cell_areas(&grid);
    for (i, st) in trace.stages.iter().enumerate() {
        let axis = st.j - 1;
        if scale > 0.0 {
            theta_on_q = theta_on_q.max(st.theta.sup_norm(&q_mask) / scale);
        }
        let (Some(next), Some(d_cur)) = (&st.next, &st.dbar_omega) else {
            continue;
        };
        // stage law for ω^{j−1}
        let spec = AxisOperatorSpec::new(&grid, axis, c.components()[axis])?;
        let g = trace.cutoffs.dbar_field(&grid, axis);
        let rhs = wedge_axis(&st.omega, axis, &g)?;
        let d_next = trace.stages.get(i + 1).and_then(|s| s.dbar_omega.clone());
        let d_next = match d_next {
            Some(d) => d,
            None => dbar_weighted(next, c)?,
        };
        let lhs = if d_cur.q() < n {
            d_next.add(&axis_area_op(&ops, &wedge_axis(d_cur, axis, &g)?, &spec)?)?
        } else {
            d_next.clone()
        };
        let rhs_scale = rhs.sup_norm(&all);
        if rhs_scale > 0.0 {
            stage_residual = stage_residual.max(lhs.sub(&rhs)?.sup_norm(&all) / rhs_scale);
        }
        // support of ∂̄_c ω^{j−1} inside ∪_{l ≥ j} S_l
        let inner = &cfg.inner;
        let from = axis;
        let outside = area_mask(&grid, |z| (from..n).all(|l| inner.factor(l).contains(z[l])));
        let total = l1_mass(&d_next, &weights, &all);
        if total > 0.0 {
            let mut keep = outside;
            Zip::from(&mut keep).and(&all).for_each(|a, &b| *a = *a && b);
            support_leak = support_leak.max(l1_mass(&d_next, &weights, &keep) / total);
        }
    }
    Ok(Verification {
        residual_on_q,
        scale_on_q,
        eta_norm,
        omega_norm,
        ratio,
        gamma_ok,
        stage_residual,
        support_leak,
        theta_on_q,
        mode_gap,
    })
}

/// `χ(z_axis) dz̄_J` with the cutoff of `family` along `axis`.
pub fn cutoff_form(grid: &Arc<ProductGrid>, family: &CutoffFamily, axis: usize, j: MultiIndex) -> Result<Form0q> {
    let chi = family.chi_field(grid, axis);
    let mut out = Form0q::zeros(grid, j.len())?;
    *out.component_mut(j).ok_or_else(|| Error::InvalidParameter(format!("{j} is not a multi-index of this grid")))? = chi;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::LebesgueExponent;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn smoothstep_is_flat_at_the_ends() {
        assert_eq!(smoothstep(0.0), (0.0, 0.0));
        assert_eq!(smoothstep(1.0), (1.0, 0.0));
        let (v, _) = smoothstep(0.5);
        assert!((v - 0.5).abs() < 1e-15);
        for t in [0.1, 0.3, 0.7, 0.9] {
            let h = 1e-6;
            let fd = (smoothstep(t + h).0 - smoothstep(t - h).0) / (2.0 * h);
            assert!((fd - smoothstep(t).1).abs() < 1e-6);
        }
    }

    #[test]
    fn disc_cutoff_has_declared_plateau_and_support() {
        let d = PlanarDomain::unit_disc();
        let g = PlanarDomain::disc(c(0.0, 0.0), 0.5).unwrap();
        let chi = Cutoff::new(&d, &g, (0.05, 0.05)).unwrap();
        for r in [0.0, 0.3, 0.55] {
            assert_eq!(chi.eval(c(r, 0.0)), (1.0, ZERO));
        }
        for r in [0.95, 0.99] {
            assert_eq!(chi.eval(c(0.0, r)), (0.0, ZERO));
        }
        let v = chi.value(c(0.75, 0.0));
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn cutoff_dbar_matches_differences() {
        let d = PlanarDomain::rect(c(-1.0, -1.0), c(1.0, 1.0)).unwrap();
        let g = PlanarDomain::rect(c(-0.4, -0.3), c(0.2, 0.5)).unwrap();
        let disc = PlanarDomain::disc(c(0.1, -0.1), 0.3).unwrap();
        for (outer, inner) in [(d, g), (d, disc), (PlanarDomain::unit_disc(), disc)] {
            let chi = Cutoff::new(&outer, &inner, (0.1, 0.1)).unwrap();
            for z in [c(0.55, 0.1), c(-0.6, -0.7), c(0.3, 0.62), c(0.0, -0.6)] {
                let h = 1e-6;
                let fx = (chi.value(z + h) - chi.value(z - h)) / (2.0 * h);
                let fy = (chi.value(z + c(0.0, h)) - chi.value(z - c(0.0, h))) / (2.0 * h);
                let fd = c(fx, fy) * 0.5;
                assert!((fd - chi.dbar(z)).norm() < 1e-5, "{z}: {fd} vs {}", chi.dbar(z));
            }
        }
    }

    #[test]
    fn infeasible_margins_are_rejected() {
        let d = PlanarDomain::unit_disc();
        let g = PlanarDomain::disc(c(0.0, 0.0), 0.5).unwrap();
        assert!(Cutoff::new(&d, &g, (0.3, 0.3)).is_err());
        assert!(Cutoff::new(&d, &g, (0.0, 0.1)).is_err());
        assert!(Cutoff::new(&g, &d, (0.05, 0.05)).is_err());
    }

    #[test]
    fn full_mode_shifts_last_weight() {
        let p = ProductDomain::unit_polydisc(2).unwrap();
        let q = ProductDomain::new(vec![PlanarDomain::disc(c(0.0, 0.0), 0.5).unwrap(); 2]).unwrap();
        let s = WeightVector::new(vec![Rational64::new(1, 2), Rational64::new(1, 2)]).unwrap();
        let two = LebesgueExponent::integer(2).unwrap();
        let cfg = SolveConfig::new(p.clone(), q.clone(), two, s.clone(), WeightMode::Full, 16).unwrap();
        assert_eq!(cfg.weight(), IntegerWeight(vec![1, 1]));
        assert_eq!(cfg.modified_weight(), IntegerWeight(vec![0, 0]));
        assert_eq!(cfg.target_weight().components(), &[Rational64::new(1, 2), Rational64::new(7, 5)]);
        let m = SolveConfig::new(p, q, two, s.clone(), WeightMode::Modified, 16).unwrap();
        assert_eq!(m.target_weight(), s);
    }

    #[test]
    fn band_mass_of_dbar_cutoff_is_grid_stable() {
        let d = PlanarDomain::unit_disc();
        let g = PlanarDomain::disc(c(0.0, 0.0), 0.5).unwrap();
        let chi = Cutoff::new(&d, &g, DEFAULT_MARGINS).unwrap();
        let mass = |res: usize| {
            let p = ProductDomain::new(vec![d]).unwrap();
            let grid = build_grid(&p, &[FactorResolution::from_scalar(&d, res)]).unwrap();
            let a = grid.axis(0);
            (0..a.n_area()).map(|i| chi.dbar(a.point(i)).norm() * a.area.areas()[i]).sum::<f64>()
        };
        let (m1, m2) = (mass(64), mass(128));
        assert!(m2 > 0.0 && (m1 - m2).abs() <= 0.01 * m2, "{m1} {m2}");
    }
}
