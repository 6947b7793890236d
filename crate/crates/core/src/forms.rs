//! `(0,q)`-forms sampled on product grids, and their `∂̄`.
//!
//! A form stores one complex tensor field per increasing multi-index `J`
//! with `|J| = q`; the field's shape is the grid's extended shape (area
//! nodes, then boundary nodes, along every axis). Axes are numbered from 0
//! in the API and from 1 when printed, so `dz̄₁` is the differential of
//! axis 0. The differentials are anti-holomorphic throughout.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use ndarray::{ArrayD, ArrayView1, ArrayViewMut1, Axis, IxDyn, Zip};
use rayon::prelude::*;
use num_complex::Complex64;

use crate::analysis::{weighted_lp_norm_product, NormValue};
use crate::cauchy::{weight_power, BoundaryOperator};
use crate::domain::{AxisGrid, GridLayout, ProductGrid};
use crate::error::{Error, Result};
use crate::weights::{dbar_weight_multi, IntegerWeight, LebesgueExponent, WeightVector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);
const NAN: Complex64 = Complex64::new(f64::NAN, f64::NAN);

/// A strictly increasing set of axes, stored as a bit mask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(u8);

impl MultiIndex {
    pub const EMPTY: MultiIndex = MultiIndex(0);

    pub fn new(axes: &[usize]) -> Result<Self> {
        let mut bits = 0u8;
        for &a in axes {
            if a >= 8 {
                return Err(Error::InvalidParameter(format!("axis {a} out of range")));
            }
            if bits & (1 << a) != 0 {
                return Err(Error::InvalidParameter(format!("axis {a} repeated")));
            }
            bits |= 1 << a;
        }
        Ok(MultiIndex(bits))
    }

    pub fn single(axis: usize) -> Self {
        MultiIndex(1 << axis)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn contains(&self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    /// Largest axis in the set.
    pub fn last(&self) -> Option<usize> {
        (self.0 != 0).then(|| 7 - self.0.leading_zeros() as usize)
    }

    pub fn axes(&self) -> Vec<usize> {
        (0..8).filter(|&a| self.contains(a)).collect()
    }

    pub fn without(&self, axis: usize) -> Self {
        MultiIndex(self.0 & !(1 << axis))
    }

    /// `dz̄_axis ∧ dz̄_J = sign · dz̄_{J ∪ {axis}}`; `None` when `axis ∈ J`.
    pub fn wedge_front(&self, axis: usize) -> Option<(MultiIndex, f64)> {
        if self.contains(axis) {
            return None;
        }
        let before = (self.0 & ((1u8 << axis) - 1)).count_ones();
        let sign = if before.is_multiple_of(2) { 1.0 } else { -1.0 };
        Some((MultiIndex(self.0 | (1 << axis)), sign))
    }

    /// All increasing multi-indices of length `q` in `{0..n}`, in canonical order.
    pub fn all(n: usize, q: usize) -> Vec<MultiIndex> {
        (0u16..(1 << n))
            .map(|b| MultiIndex(b as u8))
            .filter(|m| m.len() == q)
            .collect()
    }

    /// One-based label such as `1,3`.
    pub fn label(&self) -> String {
        self.axes()
            .iter()
            .map(|a| (a + 1).to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.label())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.label())
    }
}

#[cfg(test)]
fn binomial(n: usize, q: usize) -> usize {
    if q > n {
        return 0;
    }
    (0..q).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// A `(0,q)`-form on a product grid.
#[derive(Clone)]
pub struct Form0q {
    grid: Arc<ProductGrid>,
    q: usize,
    coeffs: BTreeMap<MultiIndex, ArrayD<Complex64>>,
}

impl fmt::Debug for Form0q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Form0q")
            .field("n", &self.n())
            .field("q", &self.q)
            .field("components", &self.coeffs.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Form0q {
    pub fn zeros(grid: &Arc<ProductGrid>, q: usize) -> Result<Self> {
        let n = grid.dim();
        if q > n {
            return Err(Error::InvalidParameter(format!("degree {q} exceeds dimension {n}")));
        }
        let shape = grid.extended_shape();
        let coeffs = MultiIndex::all(n, q)
            .into_iter()
            .map(|j| (j, ArrayD::zeros(IxDyn(&shape))))
            .collect();
        Ok(Form0q {
            grid: grid.clone(),
            q,
            coeffs,
        })
    }

    /// Builds a form from explicit coefficient fields; missing indices are zero.
    pub fn from_components(
        grid: &Arc<ProductGrid>,
        q: usize,
        components: Vec<(MultiIndex, ArrayD<Complex64>)>,
    ) -> Result<Self> {
        let mut form = Form0q::zeros(grid, q)?;
        let shape = grid.extended_shape();
        for (j, field) in components {
            if j.len() != q || j.last().is_some_and(|m| m >= grid.dim()) {
                return Err(Error::InvalidParameter(format!(
                    "component {j} does not belong to a (0,{q})-form in dimension {}",
                    grid.dim()
                )));
            }
            if field.shape() != shape.as_slice() {
                return Err(Error::InvalidParameter(format!(
                    "component {j} has shape {:?}, grid has {:?}",
                    field.shape(),
                    shape
                )));
            }
            form.coeffs.insert(j, field);
        }
        Ok(form)
    }

    /// Samples `f(J, z)` at every extended node for every `J`.
    pub fn from_fn<F>(grid: &Arc<ProductGrid>, q: usize, f: F) -> Result<Self>
    where
        F: Fn(MultiIndex, &[Complex64]) -> Complex64 + Sync,
    {
        let mut form = Form0q::zeros(grid, q)?;
        for (&j, field) in form.coeffs.iter_mut() {
            *field = sample_field(grid, |z| f(j, z));
        }
        Ok(form)
    }

    pub fn grid(&self) -> &Arc<ProductGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.dim()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn component(&self, j: MultiIndex) -> Option<&ArrayD<Complex64>> {
        self.coeffs.get(&j)
    }

    pub fn component_mut(&mut self, j: MultiIndex) -> Option<&mut ArrayD<Complex64>> {
        self.coeffs.get_mut(&j)
    }

    pub fn components(&self) -> impl Iterator<Item = (MultiIndex, &ArrayD<Complex64>)> {
        self.coeffs.iter().map(|(j, a)| (*j, a))
    }

    pub fn into_components(self) -> BTreeMap<MultiIndex, ArrayD<Complex64>> {
        self.coeffs
    }

    fn check_compatible(&self, other: &Form0q) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &other.grid) || self.q != other.q {
            return Err(Error::InvalidParameter(
                "forms live on different grids or have different degrees".into(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Form0q) -> Result<Form0q> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (j, a) in out.coeffs.iter_mut() {
            Zip::from(a).and(&other.coeffs[j]).par_for_each(|x, y| *x += y);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Form0q) -> Result<Form0q> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (j, a) in out.coeffs.iter_mut() {
            Zip::from(a).and(&other.coeffs[j]).par_for_each(|x, y| *x -= y);
        }
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> Form0q {
        let mut out = self.clone();
        for a in out.coeffs.values_mut() {
            a.mapv_inplace(|v| v * c);
        }
        out
    }

    /// Multiplies every coefficient by the same scalar field.
    pub fn multiply(&self, field: &ArrayD<Complex64>) -> Form0q {
        let mut out = self.clone();
        for a in out.coeffs.values_mut() {
            *a *= field;
        }
        out
    }

    /// True when every coefficient is exactly zero at every node.
    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(is_zero_field)
    }

    /// Components that are not identically zero.
    pub fn support_indices(&self) -> Vec<MultiIndex> {
        self.coeffs
            .iter()
            .filter(|(_, a)| !is_zero_field(a))
            .map(|(j, _)| *j)
            .collect()
    }

    /// `ω = ω_e + ω′`, where `ω_e` collects the components containing `dz̄_e`.
    pub fn split_e(&self, axis: usize) -> Result<(Form0q, Form0q)> {
        check_axis(self.n(), axis)?;
        let mut with = self.clone();
        let mut without = self.clone();
        for (j, a) in with.coeffs.iter_mut() {
            if !j.contains(axis) {
                a.fill(ZERO);
            }
        }
        for (j, a) in without.coeffs.iter_mut() {
            if j.contains(axis) {
                a.fill(ZERO);
            }
        }
        Ok((with, without))
    }

    /// Largest `|a_J|` over the marked nodes; non-finite values count as `+∞`.
    pub fn sup_norm(&self, mask: &ArrayD<bool>) -> f64 {
        self.coeffs
            .values()
            .map(|a| masked_sup(a, mask))
            .fold(0.0, f64::max)
    }

    /// Flat CSV dump with columns `node,J,re,im`; `node` is the row-major
    /// index into the extended tensor shape.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "node,J,re,im")?;
        for (j, a) in &self.coeffs {
            let label = j.label();
            for (node, v) in a.iter().enumerate() {
                writeln!(w, "{node},\"{label}\",{},{}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

fn check_axis(n: usize, axis: usize) -> Result<()> {
    if axis >= n {
        return Err(Error::InvalidParameter(format!(
            "axis {axis} out of range for dimension {n}"
        )));
    }
    Ok(())
}

pub(crate) fn is_zero_field(a: &ArrayD<Complex64>) -> bool {
    a.iter().all(|v| *v == ZERO)
}

pub fn masked_sup(a: &ArrayD<Complex64>, mask: &ArrayD<bool>) -> f64 {
    a.iter()
        .zip(mask.iter())
        .filter(|(_, &m)| m)
        .map(|(v, _)| if v.is_finite() { v.norm() } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

/// Row-major multi-index of the flat position `lin` in `shape`.
pub(crate) fn unravel(mut lin: usize, shape: &[usize], out: &mut [usize]) {
    for (o, &n) in out.iter_mut().zip(shape).rev() {
        *o = lin % n;
        lin /= n;
    }
}

fn par_from_index<T, F>(shape: &[usize], f: F) -> ArrayD<T>
where
    T: Send,
    F: Fn(&[usize]) -> T + Sync,
{
    let total: usize = shape.iter().product();
    let data: Vec<T> = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0usize; shape.len()],
            |idx, lin| {
                unravel(lin, shape, idx);
                f(idx)
            },
        )
        .collect();
    ArrayD::from_shape_vec(IxDyn(shape), data).expect("shape matches length")
}

/// Like [`par_from_index`], handing `f` the node coordinates.
fn par_from_points<T, F>(grid: &ProductGrid, f: F) -> ArrayD<T>
where
    T: Send,
    F: Fn(&[usize], &[Complex64]) -> T + Sync,
{
    let points: Vec<Vec<Complex64>> = grid.axes().iter().map(|a| a.points()).collect();
    let shape = grid.extended_shape();
    let total: usize = shape.iter().product();
    let data: Vec<T> = (0..total)
        .into_par_iter()
        .map_init(
            || (vec![0usize; shape.len()], vec![ZERO; shape.len()]),
            |(idx, z), lin| {
                unravel(lin, &shape, idx);
                for ((zi, &i), p) in z.iter_mut().zip(idx.iter()).zip(&points) {
                    *zi = p[i];
                }
                f(idx, z)
            },
        )
        .collect();
    ArrayD::from_shape_vec(IxDyn(&shape), data).expect("shape matches length")
}

/// Evaluates `f` at every extended node of the grid.
pub fn sample_field<F>(grid: &ProductGrid, f: F) -> ArrayD<Complex64>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    par_from_points(grid, |_, z| f(z))
}

/// Marks the tensor nodes built from area nodes only whose coordinates
/// satisfy `keep`.
pub fn area_mask<F>(grid: &ProductGrid, keep: F) -> ArrayD<bool>
where
    F: Fn(&[Complex64]) -> bool + Sync,
{
    let n_area: Vec<usize> = grid.axes().iter().map(|a| a.n_area()).collect();
    par_from_points(grid, |idx, z| idx.iter().zip(&n_area).all(|(&i, &n)| i < n) && keep(z))
}

/// Area nodes at least `spacings` boundary-node spacings away from every
/// factor boundary.
pub fn interior_mask(grid: &ProductGrid, spacings: f64) -> ArrayD<bool> {
    let keep: Vec<Vec<bool>> = grid
        .axes()
        .iter()
        .map(|a| {
            let margin = spacings * a.boundary.spacing();
            (0..a.extended_len())
                .map(|i| i < a.n_area() && a.domain().boundary_distance(a.point(i)) >= margin)
                .collect()
        })
        .collect();
    par_from_index(&grid.extended_shape(), |idx| {
        idx.iter().zip(&keep).all(|(&i, k)| k[i])
    })
}

/// First derivative at position `i` of a uniformly spaced line of `len`
/// samples: sixth order where the seven-point central stencil fits, fourth
/// order otherwise; `left_open` lets central stencils reach negative
/// positions (the caller's `f` must resolve them).
fn derivative<F: Fn(isize) -> Complex64>(f: F, i: isize, len: isize, left_open: bool, h: f64) -> Complex64 {
    if i + 3 < len && (left_open || i >= 3) {
        let d = 45.0 * (f(i + 1) - f(i - 1)) - 9.0 * (f(i + 2) - f(i - 2)) + (f(i + 3) - f(i - 3));
        return d / (60.0 * h);
    }
    let d = if i + 2 < len && (left_open || i >= 2) {
        f(i - 2) - 8.0 * f(i - 1) + 8.0 * f(i + 1) - f(i + 2)
    } else if i + 2 >= len {
        if i == len - 1 {
            25.0 * f(i) - 48.0 * f(i - 1) + 36.0 * f(i - 2) - 16.0 * f(i - 3) + 3.0 * f(i - 4)
        } else {
            3.0 * f(i + 1) + 10.0 * f(i) - 18.0 * f(i - 1) + 6.0 * f(i - 2) - f(i - 3)
        }
    } else if i == 0 {
        -25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)
    } else {
        -3.0 * f(i - 1) - 10.0 * f(i) + 18.0 * f(i + 1) - 6.0 * f(i + 2) + f(i + 3)
    };
    d / (12.0 * h)
}

/// Rejects factor grids too coarse for the five-point stencils.
pub fn check_stencil(axis: &AxisGrid) -> Result<()> {
    match *axis.area.layout() {
        GridLayout::Polar { nr, nt, .. } => {
            if nr < 3 || nt < 6 || nt % 2 != 0 {
                return Err(Error::GridTooCoarse(format!(
                    "polar grid ({nr}, {nt}) needs n_r ≥ 3 and even n_θ ≥ 6"
                )));
            }
        }
        GridLayout::Cartesian { nx, ny, .. } => {
            if nx < 5 || ny < 5 {
                return Err(Error::GridTooCoarse(format!(
                    "cartesian grid ({nx}, {ny}) needs at least 5 cells per direction"
                )));
            }
        }
    }
    Ok(())
}

/// `∂f/∂z̄` along one factor, for one fiber of extended-node values.
/// Boundary-node outputs are NaN.
fn factor_dbar(axis: &AxisGrid, f: ArrayView1<'_, Complex64>, mut out: ArrayViewMut1<'_, Complex64>) {
    let na = axis.n_area();
    for b in na..out.len() {
        out[b] = NAN;
    }
    match *axis.area.layout() {
        GridLayout::Polar { radius, nr, nt, .. } => {
            let dr = radius / nr as f64;
            let dt = TAU / nt as f64;
            let half = nt / 2;
            for ir in 0..nr {
                let r = (ir as f64 + 0.5) * dr;
                for it in 0..nt {
                    let ring = |m: isize| {
                        if m >= 0 {
                            f[m as usize * nt + it]
                        } else {
                            f[(-m - 1) as usize * nt + (it + half) % nt]
                        }
                    };
                    let fr = derivative(ring, ir as isize, nr as isize, true, dr);
                    let around = |m: isize| {
                        let t = (it as isize + m).rem_euclid(nt as isize) as usize;
                        f[ir * nt + t]
                    };
                    let ft = derivative(around, 0, isize::MAX, true, dt);
                    let theta = (it as f64 + 0.5) * dt;
                    out[ir * nt + it] = 0.5 * Complex64::from_polar(1.0, theta) * (fr + I * ft / r);
                }
            }
        }
        GridLayout::Cartesian { lo, hi, nx, ny } => {
            let hx = (hi.re - lo.re) / nx as f64;
            let hy = (hi.im - lo.im) / ny as f64;
            for iy in 0..ny {
                for ix in 0..nx {
                    let fx = derivative(|m| f[iy * nx + m as usize], ix as isize, nx as isize, false, hx);
                    let fy = derivative(|m| f[m as usize * nx + ix], iy as isize, ny as isize, false, hy);
                    out[iy * nx + ix] = 0.5 * (fx + I * fy);
                }
            }
        }
    }
}

/// `∂a/∂z̄_axis` of one tensor field by finite differences.
pub fn dbar_axis(grid: &ProductGrid, field: &ArrayD<Complex64>, axis: usize) -> Result<ArrayD<Complex64>> {
    check_axis(grid.dim(), axis)?;
    let ag = grid.axis(axis);
    check_stencil(ag)?;
    let mut out = ArrayD::zeros(field.raw_dim());
    if is_zero_field(field) {
        return Ok(out);
    }
    Zip::from(out.lanes_mut(Axis(axis)))
        .and(field.lanes(Axis(axis)))
        .par_for_each(|o, i| factor_dbar(ag, i, o));
    Ok(out)
}

/// `∂̄ω` by fourth-order finite differences, assembled with
/// `(∂̄ω)_{J∪{j}} += sign · ∂a_J/∂z̄_j`.
pub fn dbar_numeric(omega: &Form0q) -> Result<Form0q> {
    let n = omega.n();
    if omega.q >= n {
        return Err(Error::InvalidParameter(format!(
            "∂̄ of a (0,{}) form in dimension {n} is identically zero and not represented",
            omega.q
        )));
    }
    for a in omega.grid.axes() {
        check_stencil(a)?;
    }
    let mut out = Form0q::zeros(&omega.grid, omega.q + 1)?;
    for (j, a) in omega.components() {
        if is_zero_field(a) {
            continue;
        }
        for axis in 0..n {
            if let Some((k, sign)) = j.wedge_front(axis) {
                let d = dbar_axis(&omega.grid, a, axis)?;
                let target = out.coeffs.get_mut(&k).expect("canonical index");
                target.scaled_add(Complex64::new(sign, 0.0), &d);
            }
        }
    }
    Ok(out)
}

/// Cached `z^{−k}` and `z^k` at every extended node.
#[derive(Debug, Clone)]
pub struct MultiIndexWeightField {
    k: IntegerWeight,
    inverse: ArrayD<Complex64>,
    forward: ArrayD<Complex64>,
}

impl MultiIndexWeightField {
    pub fn new(grid: &ProductGrid, k: &IntegerWeight) -> Result<Self> {
        if k.dim() != grid.dim() {
            return Err(Error::InvalidParameter(format!(
                "weight {k} does not match dimension {}",
                grid.dim()
            )));
        }
        let kk = k.components().to_vec();
        let forward = sample_field(grid, |z| {
            z.iter().zip(&kk).map(|(&z, &k)| weight_power(z, k)).product()
        });
        if forward.iter().any(|v| !v.is_finite() || *v == ZERO) {
            return Err(Error::OutsideDomain(format!(
                "grid meets the divisor where z^{k} is singular"
            )));
        }
        let inverse = forward.mapv(|v| ONE / v);
        Ok(MultiIndexWeightField {
            k: k.clone(),
            inverse,
            forward,
        })
    }

    pub fn weight(&self) -> &IntegerWeight {
        &self.k
    }

    /// `z^{−k}` at every node.
    pub fn inverse(&self) -> &ArrayD<Complex64> {
        &self.inverse
    }

    /// `z^k` at every node.
    pub fn forward(&self) -> &ArrayD<Complex64> {
        &self.forward
    }
}

/// `∂̄_k ω = z^k ∂̄(z^{−k} ω)`.
pub fn dbar_weighted(omega: &Form0q, k: &IntegerWeight) -> Result<Form0q> {
    if k.dim() != omega.n() {
        return Err(Error::InvalidParameter(format!(
            "weight {k} does not match dimension {}",
            omega.n()
        )));
    }
    if k.is_zero() {
        return dbar_numeric(omega);
    }
    let w = MultiIndexWeightField::new(&omega.grid, k)?;
    let inner = dbar_numeric(&omega.multiply(w.inverse()))?;
    Ok(inner.multiply(w.forward()))
}

/// Discrete holomorphy test along `axis`: the largest deviation between the
/// boundary Cauchy integral of each fiber and its values on the marked
/// nodes, relative to the largest marked value.
pub fn fiber_holomorphy_error(
    grid: &ProductGrid,
    field: &ArrayD<Complex64>,
    axis: usize,
    mask: &ArrayD<bool>,
) -> Result<f64> {
    check_axis(grid.dim(), axis)?;
    let ag = grid.axis(axis);
    let na = ag.n_area();
    let op = BoundaryOperator::new(&ag.area, &ag.boundary, 0);
    let mut reproduced = ArrayD::from_elem(field.raw_dim(), NAN);
    Zip::from(reproduced.lanes_mut(Axis(axis)))
        .and(field.lanes(Axis(axis)))
        .par_for_each(|mut o, i| {
            let g: Vec<Complex64> = i.iter().skip(na).copied().collect();
            let v = op.apply(&g);
            for (t, x) in v.into_iter().enumerate() {
                o[t] = x;
            }
        });
    let scale = masked_sup(field, mask);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let diff = &reproduced - field;
    Ok(masked_sup(&diff, mask) / scale)
}

/// Outcome of [`kernel_membership_q0`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMembership {
    pub weight: IntegerWeight,
    /// Relative `∂̄_k` residual of the input away from divisor and boundary.
    pub closed_residual: f64,
    /// Worst relative fiber-holomorphy error of `z^{−k} f`.
    pub holomorphy_error: f64,
    pub norm: NormValue,
    pub refined_norm: NormValue,
    pub member: bool,
}

/// Relative tolerance of the discrete holomorphy test.
pub const HOLOMORPHY_TOLERANCE: f64 = 1e-3;
/// Relative tolerance for the `∂̄_k`-closedness precondition.
pub const CLOSED_TOLERANCE: f64 = 1e-3;
/// Relative norm drift under one refinement accepted as stable.
pub const NORM_STABILITY: f64 = 0.05;

/// Decides whether the function `f` lies in the kernel of `∂̄_k` on
/// `|z|^s L^p`, with `k = k(p, s)`, by sampling it on `grid` and on one
/// refinement.
///
/// Closedness and holomorphy are measured on area nodes at least a quarter
/// of each factor's size away from the coordinate divisor and two boundary
/// spacings away from the boundary; there finite differences of functions
/// with poles at the origin remain accurate.
pub fn kernel_membership_q0<F>(
    f: F,
    grid: &Arc<ProductGrid>,
    p: LebesgueExponent,
    s: &WeightVector,
) -> Result<KernelMembership>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    let n = grid.dim();
    if s.dim() != n {
        return Err(Error::InvalidParameter(format!(
            "weight vector of length {} for dimension {n}",
            s.dim()
        )));
    }
    let k = dbar_weight_multi(p, s);
    let values = sample_field(grid, &f);
    let form = Form0q::from_components(grid, 0, vec![(MultiIndex::EMPTY, values.clone())])?;
    let radii: Vec<f64> = grid.axes().iter().map(|a| 0.25 * a.domain().diameter()).collect();
    let margins: Vec<f64> = grid.axes().iter().map(|a| 2.0 * a.boundary.spacing()).collect();
    let mask = area_mask(grid, |z| {
        z.iter().zip(grid.axes()).enumerate().all(|(j, (z, a))| {
            z.norm() >= radii[j] && a.domain().boundary_distance(*z) >= margins[j]
        })
    });
    let scale = form.sup_norm(&mask);
    let closed_residual = if scale == 0.0 {
        0.0
    } else {
        dbar_weighted(&form, &k)?.sup_norm(&mask) / scale
    };
    if closed_residual > CLOSED_TOLERANCE {
        return Err(Error::Precondition(format!(
            "input is not ∂̄_{k}-closed: relative residual {closed_residual:.3e}"
        )));
    }
    let w = MultiIndexWeightField::new(grid, &k)?;
    let reduced = &values * w.inverse();
    let mut holomorphy_error: f64 = 0.0;
    for axis in 0..n {
        holomorphy_error = holomorphy_error.max(fiber_holomorphy_error(grid, &reduced, axis, &mask)?);
    }
    let s_f = s.to_f64();
    let norm = weighted_lp_norm_product(grid, &values, p, &s_f);
    let fine = Arc::new(refine_product(grid)?);
    let fine_values = sample_field(&fine, &f);
    let refined_norm = weighted_lp_norm_product(&fine, &fine_values, p, &s_f);
    let stable = match (norm, refined_norm) {
        (NormValue::Finite(a), NormValue::Finite(b)) => {
            a == b || (b - a).abs() <= NORM_STABILITY * a.max(b)
        }
        _ => false,
    };
    let member = holomorphy_error <= HOLOMORPHY_TOLERANCE && stable;
    Ok(KernelMembership {
        weight: k,
        closed_residual,
        holomorphy_error,
        norm,
        refined_norm,
        member,
    })
}

/// The same product grid with every factor resolution and boundary count
/// doubled.
pub fn refine_product(grid: &ProductGrid) -> Result<ProductGrid> {
    let mut axes = Vec::with_capacity(grid.dim());
    for a in grid.axes() {
        let area = a.area.refined()?;
        let curve = crate::domain::boundary_nodes(a.domain(), 2 * a.n_boundary())?;
        axes.push(AxisGrid::new(area, curve));
    }
    ProductGrid::from_axes(axes)
}

/// A coefficient of a named test form as a function of the point.
pub type Coefficient = Arc<dyn Fn(&[Complex64]) -> Complex64 + Send + Sync>;

/// A smooth form given in closed form together with its `∂̄`.
#[derive(Clone)]
pub struct TestForm {
    pub name: &'static str,
    pub n: usize,
    pub q: usize,
    pub components: Vec<(MultiIndex, Coefficient)>,
    pub dbar: Vec<(MultiIndex, Coefficient)>,
}

impl fmt::Debug for TestForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestForm")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("q", &self.q)
            .finish()
    }
}

fn coefficient<F: Fn(&[Complex64]) -> Complex64 + Send + Sync + 'static>(f: F) -> Coefficient {
    Arc::new(f)
}

fn sample_terms(grid: &Arc<ProductGrid>, q: usize, terms: &[(MultiIndex, Coefficient)]) -> Result<Form0q> {
    let mut form = Form0q::zeros(grid, q)?;
    for (j, c) in terms {
        let field = sample_field(grid, |z| c(z));
        match form.coeffs.get_mut(j) {
            Some(a) => *a += &field,
            None => {
                return Err(Error::InvalidParameter(format!(
                    "component {j} does not fit the grid"
                )))
            }
        }
    }
    Ok(form)
}

impl TestForm {
    pub fn sample(&self, grid: &Arc<ProductGrid>) -> Result<Form0q> {
        self.check_grid(grid)?;
        sample_terms(grid, self.q, &self.components)
    }

    /// The exact `∂̄` sampled on the grid; `None` for top-degree forms.
    pub fn sample_dbar(&self, grid: &Arc<ProductGrid>) -> Result<Option<Form0q>> {
        self.check_grid(grid)?;
        if self.q >= self.n {
            return Ok(None);
        }
        sample_terms(grid, self.q + 1, &self.dbar).map(Some)
    }

    pub fn is_closed(&self) -> bool {
        self.dbar.is_empty()
    }

    fn check_grid(&self, grid: &ProductGrid) -> Result<()> {
        if grid.dim() != self.n {
            return Err(Error::InvalidParameter(format!(
                "test form {} lives in dimension {}, grid has {}",
                self.name,
                self.n,
                grid.dim()
            )));
        }
        Ok(())
    }
}

/// Names accepted by [`test_form`].
pub const TEST_FORM_NAMES: &[&str] = &[
    "zero0",
    "zero1",
    "one",
    "conjz1",
    "z1z2",
    "exp_sum",
    "dz1",
    "conjz1_dz1",
    "conjz2_dz1",
    "conjz2_dz1_plus_conjz1_dz2",
    "conjz1z2_dz2",
    "dz1_dz2",
    "conjz1_dz1_dz2",
    "poly3",
];

/// Looks up a named smooth test form in dimension `n`.
///
/// Indices in names are one-based: `conjz2_dz1` is `z̄₂ dz̄₁`.
pub fn test_form(name: &str, n: usize) -> Result<TestForm> {
    let e1 = MultiIndex::single(0);
    let e2 = MultiIndex::single(1);
    let e12 = MultiIndex(0b011);
    let need = |m: usize| -> Result<()> {
        if n < m || n > 3 {
            Err(Error::InvalidParameter(format!(
                "test form {name} needs dimension {m}..=3, got {n}"
            )))
        } else {
            Ok(())
        }
    };
    let (q, components, dbar): (usize, Vec<(MultiIndex, Coefficient)>, Vec<(MultiIndex, Coefficient)>) =
        match name {
            "zero0" => {
                need(1)?;
                (0, vec![], vec![])
            }
            "zero1" => {
                need(1)?;
                (1, vec![], vec![])
            }
            "one" => {
                need(1)?;
                (0, vec![(MultiIndex::EMPTY, coefficient(|_| ONE))], vec![])
            }
            "conjz1" => {
                need(1)?;
                (
                    0,
                    vec![(MultiIndex::EMPTY, coefficient(|z| z[0].conj()))],
                    vec![(e1, coefficient(|_| ONE))],
                )
            }
            "z1z2" => {
                need(2)?;
                (0, vec![(MultiIndex::EMPTY, coefficient(|z| z[0] * z[1]))], vec![])
            }
            "exp_sum" => {
                need(1)?;
                (
                    0,
                    vec![(MultiIndex::EMPTY, coefficient(|z| z.iter().sum::<Complex64>().exp()))],
                    vec![],
                )
            }
            "dz1" => {
                need(1)?;
                (1, vec![(e1, coefficient(|_| ONE))], vec![])
            }
            "conjz1_dz1" => {
                need(1)?;
                (1, vec![(e1, coefficient(|z| z[0].conj()))], vec![])
            }
            "conjz2_dz1" => {
                need(2)?;
                // dz̄₂ ∧ dz̄₁ = −dz̄₁ ∧ dz̄₂
                (
                    1,
                    vec![(e1, coefficient(|z| z[1].conj()))],
                    vec![(e12, coefficient(|_| -ONE))],
                )
            }
            "conjz2_dz1_plus_conjz1_dz2" => {
                need(2)?;
                (
                    1,
                    vec![
                        (e1, coefficient(|z| z[1].conj())),
                        (e2, coefficient(|z| z[0].conj())),
                    ],
                    vec![],
                )
            }
            "conjz1z2_dz2" => {
                need(2)?;
                (
                    1,
                    vec![(e2, coefficient(|z| (z[0] * z[1]).conj()))],
                    vec![(e12, coefficient(|z| z[1].conj()))],
                )
            }
            "dz1_dz2" => {
                need(2)?;
                (2, vec![(e12, coefficient(|_| ONE))], vec![])
            }
            "conjz1_dz1_dz2" => {
                need(2)?;
                (2, vec![(e12, coefficient(|z| z[0].conj()))], vec![])
            }
            "poly3" => {
                need(3)?;
                let e3 = MultiIndex::single(2);
                let e13 = MultiIndex(0b101);
                let e23 = MultiIndex(0b110);
                // z̄₂z̄₃ dz̄₁ + z̄₁² z₂ dz̄₃
                (
                    1,
                    vec![
                        (e1, coefficient(|z| (z[1] * z[2]).conj())),
                        (e3, coefficient(|z| z[0].conj() * z[0].conj() * z[1])),
                    ],
                    vec![
                        (e12, coefficient(|z| -z[2].conj())),
                        (e13, coefficient(|z| 2.0 * z[0].conj() * z[1] - z[1].conj())),
                        (e23, coefficient(|_| ZERO)),
                    ],
                )
            }
            _ => {
                return Err(Error::UnknownName(format!(
                    "unknown test form {name}; known: {}",
                    TEST_FORM_NAMES.join(", ")
                )))
            }
        };
    if q > n {
        return Err(Error::InvalidParameter(format!(
            "test form {name} has degree {q} > {n}"
        )));
    }
    Ok(TestForm {
        name: TEST_FORM_NAMES.iter().find(|&&s| s == name).copied().unwrap_or("custom"),
        n,
        q,
        components,
        dbar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, FactorResolution, ProductDomain};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn polydisc(n: usize, res: usize) -> Arc<ProductGrid> {
        let p = ProductDomain::unit_polydisc(n).unwrap();
        let r: Vec<_> = p
            .factors()
            .iter()
            .map(|d| FactorResolution::from_scalar(d, res))
            .collect();
        Arc::new(build_grid(&p, &r).unwrap())
    }

    #[test]
    fn multi_index_signs() {
        let j = MultiIndex::new(&[0, 2]).unwrap();
        assert_eq!(j.wedge_front(1), Some((MultiIndex::new(&[0, 1, 2]).unwrap(), -1.0)));
        assert_eq!(j.wedge_front(3), Some((MultiIndex::new(&[0, 2, 3]).unwrap(), 1.0)));
        assert_eq!(MultiIndex::single(0).wedge_front(0), None);
        assert_eq!(j.last(), Some(2));
        assert_eq!(MultiIndex::EMPTY.last(), None);
        assert_eq!(MultiIndex::all(3, 2).len(), 3);
        assert_eq!(j.label(), "1,3");
        assert!(MultiIndex::new(&[1, 1]).is_err());
        for n in 0..=3 {
            for q in 0..=n {
                assert_eq!(MultiIndex::all(n, q).len(), binomial(n, q));
            }
        }
    }

    #[test]
    fn zero_form_has_all_components() {
        let g = polydisc(3, 8);
        let f = Form0q::zeros(&g, 2).unwrap();
        assert_eq!(f.components().count(), 3);
        assert!(f.is_zero());
        assert!(Form0q::zeros(&g, 4).is_err());
    }

    #[test]
    fn split_reconstructs() {
        let g = polydisc(2, 8);
        let w = test_form("conjz2_dz1_plus_conjz1_dz2", 2).unwrap().sample(&g).unwrap();
        for e in 0..2 {
            let (a, b) = w.split_e(e).unwrap();
            let sum = a.add(&b).unwrap();
            for (j, v) in w.components() {
                assert_eq!(sum.component(j).unwrap(), v);
                let in_a = !is_zero_field(a.component(j).unwrap());
                assert_eq!(in_a, j.contains(e));
            }
        }
        assert!(w.split_e(2).is_err());
    }

    #[test]
    fn dbar_of_conjugate_is_one() {
        let g = polydisc(2, 64);
        let f = test_form("conjz1", 2).unwrap().sample(&g).unwrap();
        let d = dbar_numeric(&f).unwrap();
        let mask = interior_mask(&g, 0.0);
        let one = d.component(MultiIndex::single(0)).unwrap();
        let err = masked_sup(&one.mapv(|v| v - ONE), &mask);
        assert!(err < 1e-5, "{err}");
        assert!(masked_sup(d.component(MultiIndex::single(1)).unwrap(), &mask) < 1e-12);
    }

    #[test]
    fn dbar_matches_closed_forms() {
        let g = polydisc(2, 64);
        let mask = interior_mask(&g, 0.0);
        for name in ["conjz2_dz1", "conjz2_dz1_plus_conjz1_dz2", "conjz1z2_dz2", "z1z2"] {
            let t = test_form(name, 2).unwrap();
            let d = dbar_numeric(&t.sample(&g).unwrap()).unwrap();
            let exact = t.sample_dbar(&g).unwrap().unwrap();
            let err = d.sub(&exact).unwrap().sup_norm(&mask);
            assert!(err < 1e-5, "{name}: {err}");
        }
    }

    #[test]
    fn dbar_error_is_fourth_order() {
        let err = |res| {
            let g = polydisc(1, res);
            let f = Form0q::from_fn(&g, 0, |_, z| z[0].conj() * (z[0] + 0.5).exp()).unwrap();
            let exact = Form0q::from_fn(&g, 1, |_, z| (z[0] + 0.5).exp()).unwrap();
            dbar_numeric(&f).unwrap().sub(&exact).unwrap().sup_norm(&interior_mask(&g, 0.0))
        };
        let (coarse, fine) = (err(64), err(128));
        let order = (coarse / fine).log2();
        assert!(order > 3.5, "{coarse} → {fine}: order {order}");
    }

    fn offset_rectangles(n: usize, res: usize) -> Arc<ProductGrid> {
        let d = crate::domain::PlanarDomain::rect(c(2.0, -0.5), c(3.0, 0.5)).unwrap();
        let p = ProductDomain::new(vec![d; n]).unwrap();
        Arc::new(build_grid(&p, &vec![FactorResolution(res, res); n]).unwrap())
    }

    #[test]
    fn two_paths_agree_away_from_divisor() {
        let g = offset_rectangles(2, 40);
        let mask = interior_mask(&g, 0.0);
        let k = IntegerWeight(vec![1, 1]);
        for name in ["conjz2_dz1", "conjz2_dz1_plus_conjz1_dz2", "conjz1"] {
            let w = test_form(name, 2).unwrap().sample(&g).unwrap();
            let a = dbar_weighted(&w, &k).unwrap();
            let b = dbar_numeric(&w).unwrap();
            let err = a.sub(&b).unwrap().sup_norm(&mask);
            assert!(err < 1e-6, "{name}: {err}");
        }
    }

    #[test]
    fn rectangles_use_one_sided_stencils() {
        let p = ProductDomain::new(vec![crate::domain::PlanarDomain::rect(c(0.1, -0.5), c(1.1, 0.5)).unwrap()]).unwrap();
        let g = Arc::new(build_grid(&p, &[FactorResolution(20, 20)]).unwrap());
        let f = Form0q::from_fn(&g, 0, |_, z| z[0].conj() * z[0].conj() * z[0]).unwrap();
        let d = dbar_numeric(&f).unwrap();
        let exact = Form0q::from_fn(&g, 1, |_, z| 2.0 * z[0].conj() * z[0]).unwrap();
        let err = d.sub(&exact).unwrap().sup_norm(&interior_mask(&g, 0.0));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn coarse_grids_are_rejected() {
        let p = ProductDomain::unit_polydisc(1).unwrap();
        let g = Arc::new(build_grid(&p, &[FactorResolution(4, 5)]).unwrap());
        let f = Form0q::zeros(&g, 0).unwrap();
        assert!(matches!(dbar_numeric(&f), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn weighted_dbar_annihilates_weighted_holomorphic() {
        let g = offset_rectangles(2, 32);
        let mask = interior_mask(&g, 0.0);
        let k = IntegerWeight(vec![1, 0]);
        let f = Form0q::from_fn(&g, 0, |_, z| z[0] * (z[0] + z[1]).exp()).unwrap();
        let d = dbar_weighted(&f, &k).unwrap();
        let rel = d.sup_norm(&mask) / f.sup_norm(&mask);
        assert!(rel < 1e-6, "{rel}");
        let zero_weight = dbar_weighted(&f, &IntegerWeight::zeros(2)).unwrap();
        let plain = dbar_numeric(&f).unwrap();
        for (j, a) in plain.components() {
            let b = zero_weight.component(j).unwrap();
            assert!(a.iter().zip(b).all(|(x, y)| x == y || (x.is_nan() && y.is_nan())));
        }
        let z = Form0q::zeros(&g, 1).unwrap();
        assert!(dbar_weighted(&z, &k).unwrap().is_zero());
    }

    #[test]
    fn weighted_dbar_of_conjugate_on_disc() {
        let g = polydisc(1, 128);
        let f = test_form("conjz1", 1).unwrap().sample(&g).unwrap();
        let d = dbar_weighted(&f, &IntegerWeight(vec![1])).unwrap();
        let mask = area_mask(&g, |z| z[0].norm() > 0.25);
        let err = masked_sup(&d.component(MultiIndex::single(0)).unwrap().mapv(|v| v - ONE), &mask);
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn dbar_twice_vanishes() {
        let g = polydisc(2, 64);
        let mask = interior_mask(&g, 0.0);
        let w = Form0q::from_fn(&g, 0, |_, z| z[0].conj() * z[0].conj() * z[1].conj() + z[1].norm_sqr()).unwrap();
        let dd = dbar_numeric(&dbar_numeric(&w).unwrap()).unwrap();
        assert!(dd.sup_norm(&mask) <= 1e-5);
        let g3 = polydisc(3, 16);
        let w = test_form("poly3", 3).unwrap().sample(&g3).unwrap();
        let dd = dbar_numeric(&dbar_numeric(&w).unwrap()).unwrap();
        assert!(dd.sup_norm(&interior_mask(&g3, 0.0)) <= 1e-5);
    }

    #[test]
    fn csv_has_one_row_per_node_and_component() {
        let g = polydisc(1, 8);
        let f = test_form("dz1", 1).unwrap().sample(&g).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + g.extended_shape()[0]);
        assert!(text.lines().nth(1).unwrap().starts_with("0,\"1\",1,0"));
    }

    #[test]
    fn unknown_names_are_reported() {
        assert!(matches!(test_form("nope", 2), Err(Error::UnknownName(_))));
        assert!(test_form("z1z2", 1).is_err());
    }
}
