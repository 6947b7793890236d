//! Fiberwise Cauchy operators on product domains and the homotopy formula
//! built from them.
//!
//! For an axis `e`, `I_k^{P_e}` applies the area transform of factor `e` to
//! every coefficient containing `dz̄_e` and removes that differential;
//! `R_k^{P_e}` applies the boundary transform to every coefficient without
//! `dz̄_e` and drops the others. With `θ = ∂̄ω`,
//!
//! ```text
//! S_q ω     = Σ_{k=q}^{n} I^{P_k} R^{P_{k+1}} ⋯ R^{P_n} ω
//! T_{q+1} θ = I^{P_n} θ + Σ_{k=q}^{n−1} I^{P_k} R^{P_{k+1}} ⋯ R^{P_n} θ
//! ω         = ∂̄ S_q ω + T_{q+1} ∂̄ω
//! ```
//!
//! `T` is evaluated on `θ` directly, using that `∂̄` commutes with each
//! `R^{P_e}`; [`homotopy_residual`] also evaluates the chain form
//! `I^{P_k} ∂̄(R^{P_{k+1}} ⋯ R^{P_n} ω)` by finite differences and reports
//! how well the two agree.
//!
//! Outputs are defined on area nodes of the integration axis; their values
//! at that axis' boundary nodes are NaN. Residuals are measured on area
//! nodes at least [`RESIDUAL_MARGIN`] boundary spacings away from every
//! factor boundary.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::{s, Array2, ArrayD, Axis, IxDyn};
use num_complex::Complex64;

use crate::cauchy::{check_integrable, AreaOperator, BoundaryOperator};
use crate::domain::{build_grid, FactorResolution, ProductDomain, ProductGrid};
use crate::error::{Error, Result};
use crate::forms::{dbar_axis, dbar_numeric, interior_mask, is_zero_field, masked_sup, Form0q, MultiIndex, TestForm};

/// Residual norms skip nodes closer than this many boundary spacings to a
/// factor boundary.
pub const RESIDUAL_MARGIN: f64 = 2.0;
/// Relative `∂̄_e` size below which a boundary-operator output counts as
/// holomorphic along its axis.
pub const HOLOMORPHY_TOLERANCE: f64 = 1e-3;

const NAN: Complex64 = Complex64::new(f64::NAN, f64::NAN);

/// Parameters of one fiberwise operator.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisOperatorSpec {
    pub axis: usize,
    pub k: i64,
    pub boundary_nodes: usize,
}

impl AxisOperatorSpec {
    pub fn new(grid: &ProductGrid, axis: usize, k: i64) -> Result<Self> {
        if axis >= grid.dim() {
            return Err(Error::InvalidParameter(format!(
                "axis {axis} out of range for dimension {}",
                grid.dim()
            )));
        }
        let boundary_nodes = grid.axis(axis).n_boundary();
        if boundary_nodes < crate::domain::MIN_BOUNDARY_NODES {
            return Err(Error::InvalidParameter(format!(
                "axis {axis} has only {boundary_nodes} boundary nodes"
            )));
        }
        Ok(AxisOperatorSpec { axis, k, boundary_nodes })
    }
}

/// Assembled fiber operators of one product grid, built on first use.
pub struct AxisOperators {
    grid: Arc<ProductGrid>,
    area: Mutex<HashMap<(usize, i64), Arc<AreaOperator>>>,
    boundary: Mutex<HashMap<(usize, i64), Arc<BoundaryOperator>>>,
}

impl AxisOperators {
    pub fn new(grid: &Arc<ProductGrid>) -> Self {
        AxisOperators {
            grid: grid.clone(),
            area: Mutex::new(HashMap::new()),
            boundary: Mutex::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &Arc<ProductGrid> {
        &self.grid
    }

    fn area_operator(&self, axis: usize, k: i64) -> Result<Arc<AreaOperator>> {
        let mut cache = self.area.lock().expect("operator cache poisoned");
        if let Some(op) = cache.get(&(axis, k)) {
            return Ok(op.clone());
        }
        let op = Arc::new(AreaOperator::new(&self.grid.axis(axis).area, k)?);
        cache.insert((axis, k), op.clone());
        Ok(op)
    }

    fn boundary_operator(&self, axis: usize, k: i64) -> Arc<BoundaryOperator> {
        let mut cache = self.boundary.lock().expect("operator cache poisoned");
        cache
            .entry((axis, k))
            .or_insert_with(|| {
                let a = self.grid.axis(axis);
                Arc::new(BoundaryOperator::new(&a.area, &a.boundary, k))
            })
            .clone()
    }

    fn check(&self, omega: &Form0q, spec: &AxisOperatorSpec) -> Result<()> {
        if !Arc::ptr_eq(omega.grid(), &self.grid) {
            return Err(Error::InvalidParameter("form lives on a different grid".into()));
        }
        if spec.axis >= self.grid.dim() || spec.boundary_nodes != self.grid.axis(spec.axis).n_boundary() {
            return Err(Error::InvalidParameter(format!(
                "operator spec {spec:?} does not match the grid"
            )));
        }
        Ok(())
    }
}

/// Rows are the fibers along `axis` in row-major order of the other axes.
fn fibers(field: &ArrayD<Complex64>, axis: usize) -> (Array2<Complex64>, Vec<usize>) {
    let nd = field.ndim();
    let mut perm: Vec<usize> = (0..nd).filter(|&a| a != axis).collect();
    perm.push(axis);
    let moved = field.view().permuted_axes(IxDyn(&perm));
    let moved_shape = moved.shape().to_vec();
    let len = field.shape()[axis];
    let rows = field.len() / len.max(1);
    let flat: Vec<Complex64> = moved.iter().copied().collect();
    (
        Array2::from_shape_vec((rows, len), flat).expect("fiber matrix shape"),
        moved_shape,
    )
}

fn from_fibers(m: Array2<Complex64>, moved_shape: &[usize], axis: usize) -> ArrayD<Complex64> {
    let nd = moved_shape.len();
    let moved = ArrayD::from_shape_vec(IxDyn(moved_shape), m.into_raw_vec_and_offset().0)
        .expect("fiber matrix shape");
    let mut inverse = vec![0; nd];
    let mut perm: Vec<usize> = (0..nd).filter(|&a| a != axis).collect();
    perm.push(axis);
    for (i, &p) in perm.iter().enumerate() {
        inverse[p] = i;
    }
    moved.permuted_axes(IxDyn(&inverse)).as_standard_layout().into_owned()
}

/// `I_k` along `axis` applied to one coefficient field.
fn area_fibers(ops: &AxisOperators, field: &ArrayD<Complex64>, axis: usize, k: i64) -> Result<ArrayD<Complex64>> {
    if is_zero_field(field) {
        return Ok(ArrayD::zeros(field.raw_dim()));
    }
    let ag = ops.grid.axis(axis);
    let na = ag.n_area();
    let op = ops.area_operator(axis, k)?;
    let (m, moved_shape) = fibers(field, axis);
    if k > 0 {
        for row in m.axis_iter(Axis(0)) {
            let area = row.slice(s![..na]);
            if area.iter().all(|v| v.is_finite()) {
                check_integrable(&ag.area, area.as_slice().expect("contiguous row"), k)?;
            }
        }
    }
    let mut out = Array2::from_elem(m.raw_dim(), NAN);
    op.apply_rows(m.slice(s![.., ..na]), out.slice_mut(s![.., ..na]));
    Ok(from_fibers(out, &moved_shape, axis))
}

/// `R_k` along `axis` applied to one coefficient field.
fn boundary_fibers(ops: &AxisOperators, field: &ArrayD<Complex64>, axis: usize, k: i64) -> ArrayD<Complex64> {
    if is_zero_field(field) {
        return ArrayD::zeros(field.raw_dim());
    }
    let na = ops.grid.axis(axis).n_area();
    let op = ops.boundary_operator(axis, k);
    let (m, moved_shape) = fibers(field, axis);
    let mut out = Array2::from_elem(m.raw_dim(), NAN);
    op.apply_rows(m.slice(s![.., na..]), out.slice_mut(s![.., ..na]));
    op.trace_rows(m.slice(s![.., na..]), out.slice_mut(s![.., na..]));
    from_fibers(out, &moved_shape, axis)
}

/// Largest gap on the mask between a field and the boundary Cauchy
/// integral of its own boundary values along `axis`; NaN when the axis has
/// no boundary trace.
fn reproduction_gap(ops: &AxisOperators, field: &ArrayD<Complex64>, axis: usize, mask: &ArrayD<bool>) -> f64 {
    if is_zero_field(field) {
        return 0.0;
    }
    let reproduced = boundary_fibers(ops, field, axis, 0);
    masked_sup(&(&reproduced - field), mask)
}

/// `I_k^{P_e} ω`, a `(0, q−1)`-form.
pub fn axis_area_op(ops: &AxisOperators, omega: &Form0q, spec: &AxisOperatorSpec) -> Result<Form0q> {
    ops.check(omega, spec)?;
    if omega.q() == 0 {
        return Err(Error::InvalidParameter("I^{P_e} needs a form of degree ≥ 1".into()));
    }
    let e = spec.axis;
    let mut parts = Vec::new();
    for j in MultiIndex::all(omega.n(), omega.q() - 1) {
        let Some((k_idx, sign)) = j.wedge_front(e) else {
            continue;
        };
        let a = omega.component(k_idx).expect("canonical component");
        let mut v = area_fibers(ops, a, e, spec.k)?;
        if sign < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        parts.push((j, v));
    }
    Form0q::from_components(omega.grid(), omega.q() - 1, parts)
}

/// `R_k^{P_e} ω`, a `(0, q)`-form without `dz̄_e`.
pub fn axis_boundary_op(ops: &AxisOperators, omega: &Form0q, spec: &AxisOperatorSpec) -> Result<Form0q> {
    ops.check(omega, spec)?;
    let e = spec.axis;
    let parts = omega
        .components()
        .filter(|(l, _)| !l.contains(e))
        .map(|(l, a)| (l, boundary_fibers(ops, a, e, spec.k)))
        .collect();
    Form0q::from_components(omega.grid(), omega.q(), parts)
}

/// True iff no non-zero coefficient of `omega` (or of `dbar`, when given)
/// contains a differential `dz̄_j` with `j ≥ e` (zero-based), i.e. the form
/// lies in the class built from the first `e` differentials.
pub fn gamma_class(omega: &Form0q, dbar: Option<&Form0q>, e: usize) -> bool {
    let ok = |f: &Form0q| {
        f.support_indices()
            .iter()
            .all(|j| j.last().is_none_or(|m| m < e))
    };
    ok(omega) && dbar.is_none_or(ok)
}

/// Largest `|∂a_J/∂z̄_axis|` on the mask relative to the larger of
/// `reference` and the largest `|a_J|`.
pub fn axis_holomorphy_error(form: &Form0q, axis: usize, mask: &ArrayD<bool>, reference: f64) -> Result<f64> {
    let scale = form.sup_norm(mask).max(reference);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for (_, a) in form.components() {
        if is_zero_field(a) {
            continue;
        }
        let d = dbar_axis(form.grid(), a, axis)?;
        worst = worst.max(masked_sup(&d, mask));
    }
    Ok(worst / scale)
}

/// One application of `R^{P_e}` inside a composite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaDescent {
    pub axis: usize,
    /// The output has no component containing `dz̄_j`, `j ≥ axis`.
    pub structural: bool,
    /// Gap between the output and the Cauchy integral of its boundary
    /// values along `axis`, relative to the size of the input; NaN on
    /// factors without a boundary trace.
    pub reproduction_error: f64,
    /// `∂̄` of the output along `axis` on interior nodes, relative to the
    /// size of the input.
    pub holomorphy_error: f64,
}

impl GammaDescent {
    pub fn passed(&self) -> bool {
        let reproduced = self.reproduction_error.is_nan() || self.reproduction_error <= HOLOMORPHY_TOLERANCE;
        self.structural && reproduced && self.holomorphy_error <= HOLOMORPHY_TOLERANCE
    }
}

fn descend(ops: &AxisOperators, chain: &Form0q, axis: usize, mask: &ArrayD<bool>) -> Result<(Form0q, GammaDescent)> {
    let spec = AxisOperatorSpec::new(&ops.grid, axis, 0)?;
    let next = axis_boundary_op(ops, chain, &spec)?;
    let structural = gamma_class(&next, None, axis);
    if !structural {
        return Err(Error::Consistency(format!(
            "R along axis {} left components {:?}",
            axis + 1,
            next.support_indices()
        )));
    }
    let reference = chain.sup_norm(mask).max(next.sup_norm(mask));
    let holomorphy_error = axis_holomorphy_error(&next, axis, mask, reference)?;
    let mut gap: f64 = 0.0;
    for (_, a) in next.components() {
        gap = gap.max(reproduction_gap(ops, a, axis, mask));
    }
    let reproduction_error = if reference > 0.0 { gap / reference } else { gap };
    Ok((
        next,
        GammaDescent {
            axis,
            structural,
            reproduction_error,
            holomorphy_error,
        },
    ))
}

/// `S_q ω`, with the boundary chains `R^{P_{k+1}} ⋯ R^{P_n} ω` for
/// `k = n−1, …, q` (one-based) in application order.
pub struct SOperatorOutput {
    pub value: Form0q,
    pub chains: Vec<Form0q>,
    pub descents: Vec<GammaDescent>,
}

pub fn s_operator(ops: &AxisOperators, omega: &Form0q) -> Result<SOperatorOutput> {
    let n = omega.n();
    let q = omega.q();
    if q == 0 {
        return Err(Error::InvalidParameter("S_q needs q ≥ 1".into()));
    }
    let mask = interior_mask(&ops.grid, RESIDUAL_MARGIN);
    let mut value = Form0q::zeros(omega.grid(), q - 1)?;
    let mut chain = omega.clone();
    let mut chains = Vec::new();
    let mut descents = Vec::new();
    for axis in (q - 1..n).rev() {
        let spec = AxisOperatorSpec::new(&ops.grid, axis, 0)?;
        value = value.add(&axis_area_op(ops, &chain, &spec)?)?;
        if axis > q - 1 {
            let (next, d) = descend(ops, &chain, axis, &mask)?;
            descents.push(d);
            chains.push(next.clone());
            chain = next;
        }
    }
    Ok(SOperatorOutput {
        value,
        chains,
        descents,
    })
}

/// `T_{q+1} θ` for a `(0, q+1)`-form `θ`, `1 ≤ q < n`.
pub fn t_operator(ops: &AxisOperators, theta: &Form0q) -> Result<Form0q> {
    let n = theta.n();
    let q1 = theta.q();
    if q1 < 2 || q1 > n {
        return Err(Error::InvalidParameter(format!(
            "T needs a form of degree 2..={n}, got {q1}"
        )));
    }
    let q = q1 - 1;
    let mut value = axis_area_op(ops, theta, &AxisOperatorSpec::new(&ops.grid, n - 1, 0)?)?;
    let mut chain = theta.clone();
    for axis in (q..n).rev() {
        chain = axis_boundary_op(ops, &chain, &AxisOperatorSpec::new(&ops.grid, axis, 0)?)?;
        let spec = AxisOperatorSpec::new(&ops.grid, axis - 1, 0)?;
        value = value.add(&axis_area_op(ops, &chain, &spec)?)?;
    }
    Ok(value)
}

/// The pieces of `ω − ∂̄I^{P_e}ω − I^{P_e}∂̄ω − R^{P_e}ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma35Report {
    pub axis: usize,
    pub residual: f64,
    /// `sup |ω|` over the same nodes.
    pub scale: f64,
    /// `sup |R^{P_e} ω|`.
    pub boundary_term: f64,
}

/// Interior sup-norm residual of the single-axis identity for a smooth
/// test form, `q ≤ e` (one-based), on `grid`.
pub fn lemma35_residual(ops: &AxisOperators, form: &TestForm, axis: usize) -> Result<Lemma35Report> {
    let grid = ops.grid();
    let q = form.q;
    if q == 0 || q > axis + 1 {
        return Err(Error::InvalidParameter(format!(
            "single-axis identity needs 1 ≤ q ≤ e, got q = {q}, e = {}",
            axis + 1
        )));
    }
    let mask = interior_mask(grid, RESIDUAL_MARGIN);
    let omega = form.sample(grid)?;
    let spec = AxisOperatorSpec::new(grid, axis, 0)?;
    let mut rest = omega.sub(&dbar_numeric(&axis_area_op(ops, &omega, &spec)?)?)?;
    if let Some(theta) = form.sample_dbar(grid)? {
        rest = rest.sub(&axis_area_op(ops, &theta, &spec)?)?;
    }
    let r = axis_boundary_op(ops, &omega, &spec)?;
    rest = rest.sub(&r)?;
    Ok(Lemma35Report {
        axis,
        residual: rest.sup_norm(&mask),
        scale: omega.sup_norm(&mask),
        boundary_term: r.sup_norm(&mask),
    })
}

/// Everything measured by [`homotopy_residual`].
#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyReport {
    pub n: usize,
    pub q: usize,
    /// `sup |ω − ∂̄S_qω − T_{q+1}∂̄ω|` on interior nodes.
    pub residual: f64,
    /// The same with `T` evaluated through finite-difference `∂̄` of the
    /// boundary chains of `ω`.
    pub residual_chain_form: f64,
    /// `sup |∂̄R^{P_n}ω − (∂̄ω − ∂̄I^{P_n}∂̄ω)|`; zero when `q = n`.
    pub substitution_residual: f64,
    pub scale: f64,
    /// `sup |T_{q+1}∂̄ω|`.
    pub t_norm: f64,
    pub descents: Vec<GammaDescent>,
    /// Whether `S_q ω` has degree `q − 1`.
    pub degrees_ok: bool,
}

impl HomotopyReport {
    pub fn descents_passed(&self) -> bool {
        self.descents.iter().all(GammaDescent::passed)
    }
}

/// Residual of `ω = ∂̄S_qω + T_{q+1}∂̄ω` for a smooth test form.
pub fn homotopy_residual(ops: &AxisOperators, form: &TestForm) -> Result<HomotopyReport> {
    let grid = ops.grid();
    let n = form.n;
    let q = form.q;
    let mask = interior_mask(grid, RESIDUAL_MARGIN);
    let omega = form.sample(grid)?;
    let s = s_operator(ops, &omega)?;
    let degrees_ok = s.value.q() + 1 == q;
    let ds = if q - 1 < n {
        dbar_numeric(&s.value)?
    } else {
        Form0q::zeros(grid, q)?
    };
    let mut rest = omega.sub(&ds)?;
    let mut rest_chain = rest.clone();
    let mut t_norm = 0.0;
    let mut substitution_residual = 0.0;
    if q < n {
        let theta = form.sample_dbar(grid)?.expect("q < n");
        let t = t_operator(ops, &theta)?;
        t_norm = t.sup_norm(&mask);
        rest = rest.sub(&t)?;

        let last = AxisOperatorSpec::new(grid, n - 1, 0)?;
        let i_theta = axis_area_op(ops, &theta, &last)?;
        let mut t_chain = i_theta.clone();
        // chains[i] = R^{P_{n−i}} ⋯ R^{P_n} ω (one-based), feeding I^{P_{n−i−1}}
        for (i, chain) in s.chains.iter().enumerate() {
            let axis = n - 2 - i;
            let spec = AxisOperatorSpec::new(grid, axis, 0)?;
            t_chain = t_chain.add(&axis_area_op(ops, &dbar_numeric(chain)?, &spec)?)?;
        }
        rest_chain = rest_chain.sub(&t_chain)?;

        let r_last = axis_boundary_op(ops, &omega, &last)?;
        let lhs = dbar_numeric(&r_last)?;
        let rhs = theta.sub(&dbar_numeric(&i_theta)?)?;
        substitution_residual = lhs.sub(&rhs)?.sup_norm(&mask);
    }
    Ok(HomotopyReport {
        n,
        q,
        residual: rest.sup_norm(&mask),
        residual_chain_form: rest_chain.sup_norm(&mask),
        substitution_residual,
        scale: omega.sup_norm(&mask),
        t_norm,
        descents: s.descents,
        degrees_ok,
    })
}

/// `sup |R^{P_e} ω|` for `ω` built from `dz̄_1 … dz̄_q` only and `e = q`;
/// the boundary operator drops every component, so this is zero whenever
/// `ω` lies in that class.
pub fn vanishing_clause(ops: &AxisOperators, omega: &Form0q) -> Result<f64> {
    let q = omega.q();
    if q == 0 || !gamma_class(omega, None, q) {
        return Err(Error::Precondition(
            "vanishing clause needs a form in dz̄_1 … dz̄_q only".into(),
        ));
    }
    let spec = AxisOperatorSpec::new(&ops.grid, q - 1, 0)?;
    let r = axis_boundary_op(ops, omega, &spec)?;
    Ok(r.sup_norm(&interior_mask(&ops.grid, RESIDUAL_MARGIN)))
}

/// Residuals at or below this multiple of the form's size are rounding
/// noise; a sweep that reaches it counts as converged.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// True iff every residual is strictly below its predecessor, except that
/// residuals within [`ROUNDOFF_FLOOR`]`·scale` may follow each other freely.
pub fn strictly_decreasing(residuals: &[f64], scale: f64) -> bool {
    let floor = ROUNDOFF_FLOOR * scale.max(f64::MIN_POSITIVE);
    residuals
        .windows(2)
        .all(|w| w[1] < w[0] || (w[1] <= floor && w[0] <= floor))
}

/// The n = 2 forms the identities are checked on.
pub const NAMED_FORMS: &[&str] = &[
    "conjz1_dz1",
    "dz1",
    "dz1_dz2",
    "conjz2_dz1",
    "conjz2_dz1_plus_conjz1_dz2",
];

/// One level of [`homotopy_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepLevel {
    pub resolution: usize,
    /// Single-axis identity along `e = q`.
    pub lemma35: Lemma35Report,
    pub homotopy: HomotopyReport,
}

/// Both identities for `form` at each scalar per-factor resolution.
pub fn homotopy_sweep(domain: &ProductDomain, form: &TestForm, resolutions: &[usize]) -> Result<Vec<SweepLevel>> {
    if domain.dim() != form.n {
        return Err(Error::InvalidParameter(format!(
            "form of dimension {} on a {}-factor domain",
            form.n,
            domain.dim()
        )));
    }
    resolutions
        .iter()
        .map(|&res| {
            let r: Vec<_> = domain
                .factors()
                .iter()
                .map(|d| FactorResolution::from_scalar(d, res))
                .collect();
            let grid = Arc::new(build_grid(domain, &r)?);
            let ops = AxisOperators::new(&grid);
            Ok(SweepLevel {
                resolution: res,
                lemma35: lemma35_residual(&ops, form, form.q.max(1) - 1)?,
                homotopy: homotopy_residual(&ops, form)?,
            })
        })
        .collect()
}
