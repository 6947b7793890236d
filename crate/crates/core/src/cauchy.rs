//! The weighted Cauchy transforms of one planar factor.
//!
//! For an integer weight `k`,
//!
//! ```text
//! I_k f(z) = z^k/(2πi) ∫_D f(ζ) dζ∧dζ̄ / (ζ^k (ζ − z))
//! R_k g(z) = z^k/(2πi) ∮_{bD} g(ζ) dζ / (ζ^k (ζ − z))
//! ```
//!
//! with `dζ∧dζ̄ = −2i dA`, so that `I_0 1 = z̄` on the unit disc and
//! `∂̄ I_k f = f`. Sampled fields are treated as constant on each grid cell;
//! the kernel is integrated over every cell (exactly, by a contour integral,
//! for cells near the target; by tensor Gauss rules otherwise), so the cell
//! containing the target needs no special case and no principal value.
//! `I_k` is always evaluated as `z^k · I_0(ζ^{−k} f)`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::domain::{Arc as ArcSegment, BoundaryCurve, CellShape, FactorGrid, GridLayout, LineSegment, PlanarDomain};
use crate::error::{Error, Result};
use crate::quadrature::{adaptive_contour, gl10, gl4, tanh_sinh, GaussLegendre};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Cells whose node lies within this many cell diameters of the target are
/// integrated exactly.
pub const NEAR_FIELD: f64 = 2.0;
/// Beyond [`NEAR_FIELD`] and within this many diameters a 10×10 Gauss rule
/// is used, farther out a 4×4 rule.
pub const MID_FIELD: f64 = 6.0;

/// Largest cartesian grid for which the dense area operator is assembled.
pub const MAX_DENSE_NODES: usize = 4096;

/// Radial exponent of `|ζ^{−k} f|` at the origin below which the weighted
/// integrand is reported as not integrable (the true threshold is −2).
pub const INTEGRABILITY_EXPONENT: f64 = -1.95;

/// Rings of a polar grid centred at the origin on which the weight `ζ^{−k}`
/// is integrated exactly instead of being sampled at the node.
pub const WEIGHTED_RINGS: usize = 8;

/// `∫_cell dA/(ζ − z)`.
pub fn cell_moment(cell: &CellShape, node: Complex64, diameter: f64, z: Complex64) -> Complex64 {
    // the small bias settles exact ties the same way for rotated copies
    let d = (node - z).norm() * (1.0 - 1e-9);
    if d < NEAR_FIELD * diameter {
        contour_moment(cell, z)
    } else if d < MID_FIELD * diameter {
        gauss_moment(cell, gl10(), z)
    } else {
        gauss_moment(cell, gl4(), z)
    }
}

/// `∫_cell ζ^{−m} dA` on a sector about the origin.
fn sector_power_moment(r0: f64, r1: f64, t0: f64, t1: f64, m: i64) -> Complex64 {
    let radial = if m == 2 {
        (r1 / r0).ln()
    } else {
        let e = (2 - m) as f64;
        (r1.powf(e) - r0.powf(e)) / e
    };
    let mf = m as f64;
    let angular = (Complex64::from_polar(1.0, -mf * t1) - Complex64::from_polar(1.0, -mf * t0)) / Complex64::new(0.0, -mf);
    angular * radial
}

/// `∫_cell (node/ζ)^k dA/(ζ − z)` on sectors of a polar grid about the
/// origin; `None` for other cells, where the weight is sampled at the node.
fn weighted_sector_moment(cell: &CellShape, node: Complex64, diameter: f64, z: Complex64, k: i64) -> Option<Complex64> {
    let CellShape::Sector { center, r0, r1, t0, t1 } = *cell else {
        return None;
    };
    if k <= 0 || center != ZERO || (r0 == 0.0 && k > 1) {
        return None;
    }
    let d = (node - z).norm() * (1.0 - 1e-9);
    let inner = r1 <= WEIGHTED_RINGS as f64 * (r1 - r0) * (1.0 + 1e-9);
    if inner || d < NEAR_FIELD * diameter {
        // 1/(ζ^k(ζ − z)) = z^{−k}/(ζ − z) − Σ_{i=1}^{k} z^{−i} ζ^{−(k+1−i)}
        let zinv = z.inv();
        let mut acc = contour_moment(cell, z) * zinv.powi(k as i32);
        for i in 1..=k {
            acc -= zinv.powi(i as i32) * sector_power_moment(r0, r1, t0, t1, k + 1 - i);
        }
        return Some(acc * node.powi(k as i32));
    }
    let rule = if d < MID_FIELD * diameter { gl10() } else { gl4() };
    Some(gauss_moment_with(cell, rule, z, |zeta| (node / zeta).powi(k as i32)))
}

/// [`cell_moment`] for the field `f·ζ^{−k}` sampled as `f(node)·node^{−k}`.
fn cell_moment_weighted(cell: &CellShape, node: Complex64, diameter: f64, z: Complex64, k: i64) -> Complex64 {
    weighted_sector_moment(cell, node, diameter, z, k).unwrap_or_else(|| cell_moment(cell, node, diameter, z))
}

fn gauss_moment(cell: &CellShape, rule: &GaussLegendre, z: Complex64) -> Complex64 {
    gauss_moment_with(cell, rule, z, |_| Complex64::new(1.0, 0.0))
}

/// `∫_cell w(ζ) dA/(ζ − z)` by a tensor Gauss rule.
fn gauss_moment_with<W: Fn(Complex64) -> Complex64>(cell: &CellShape, rule: &GaussLegendre, z: Complex64, w: W) -> Complex64 {
    let mut acc = ZERO;
    match *cell {
        CellShape::Sector { center, r0, r1, t0, t1 } => {
            let hr = 0.5 * (r1 - r0);
            let mr = 0.5 * (r1 + r0);
            let ht = 0.5 * (t1 - t0);
            let mt = 0.5 * (t1 + t0);
            for (xr, wr) in rule.nodes.iter().zip(&rule.weights) {
                let r = mr + hr * xr;
                for (xt, wt) in rule.nodes.iter().zip(&rule.weights) {
                    let zeta = center + Complex64::from_polar(r, mt + ht * xt);
                    acc += w(zeta) * (wr * wt * r) / (zeta - z);
                }
            }
            acc * (hr * ht)
        }
        CellShape::Box { x0, x1, y0, y1 } => {
            let hx = 0.5 * (x1 - x0);
            let mx = 0.5 * (x1 + x0);
            let hy = 0.5 * (y1 - y0);
            let my = 0.5 * (y1 + y0);
            for (xa, wa) in rule.nodes.iter().zip(&rule.weights) {
                for (ya, wb) in rule.nodes.iter().zip(&rule.weights) {
                    let zeta = Complex64::new(mx + hx * xa, my + hy * ya);
                    acc += w(zeta) * (wa * wb) / (zeta - z);
                }
            }
            acc * (hx * hy)
        }
    }
}

/// Green's theorem with `∂/∂ζ̄ [(ζ̄ − z̄)/(ζ − z)] = 1/(ζ − z)`; the
/// contour integrand is bounded, so this holds also when `z` is inside.
fn contour_moment(cell: &CellShape, z: Complex64) -> Complex64 {
    let g = |zeta: Complex64| {
        let w = zeta - z;
        if w == ZERO {
            ZERO
        } else {
            w.conj() / w
        }
    };
    let total = match *cell {
        CellShape::Sector { center, r0, r1, t0, t1 } => {
            let e0 = Complex64::from_polar(1.0, t0);
            let e1 = Complex64::from_polar(1.0, t1);
            let mut acc = adaptive_contour(
                &LineSegment {
                    a: center + e0 * r0,
                    b: center + e0 * r1,
                },
                0.0,
                1.0,
                z,
                &g,
            );
            acc += adaptive_contour(&ArcSegment { center, radius: r1 }, t0, t1, z, &g);
            acc += adaptive_contour(
                &LineSegment {
                    a: center + e1 * r1,
                    b: center + e1 * r0,
                },
                0.0,
                1.0,
                z,
                &g,
            );
            if r0 > 0.0 {
                acc += adaptive_contour(&ArcSegment { center, radius: r0 }, t1, t0, z, &g);
            }
            acc
        }
        CellShape::Box { x0, x1, y0, y1 } => {
            let corners = [
                Complex64::new(x0, y0),
                Complex64::new(x1, y0),
                Complex64::new(x1, y1),
                Complex64::new(x0, y1),
            ];
            (0..4)
                .map(|e| {
                    adaptive_contour(
                        &LineSegment {
                            a: corners[e],
                            b: corners[(e + 1) % 4],
                        },
                        0.0,
                        1.0,
                        z,
                        &g,
                    )
                })
                .sum()
        }
    };
    total / (2.0 * I)
}

/// Weights `κ_j(z)` with `I_0 G(z) ≈ Σ_j κ_j(z) G_j`, i.e. `−(1/π)∫_{cell j} dA/(ζ − z)`.
pub fn area_kernel_row(grid: &FactorGrid, z: Complex64) -> Vec<Complex64> {
    let mut row = vec![ZERO; grid.len()];
    fill_kernel_row(grid, z, &mut row);
    row
}

fn fill_kernel_row(grid: &FactorGrid, z: Complex64, row: &mut [Complex64]) {
    fill_weighted_kernel_row(grid, z, 0, row)
}

fn fill_weighted_kernel_row(grid: &FactorGrid, z: Complex64, k: i64, row: &mut [Complex64]) {
    let nodes = grid.nodes();
    let diam = grid.diameters();
    for (j, out) in row.iter_mut().enumerate() {
        *out = -cell_moment_weighted(&grid.cell(j), nodes[j], diam[j], z, k) / PI;
    }
}

/// Complex values sampled at the cell centres of one factor grid.
#[derive(Debug, Clone)]
pub struct ScalarField<'g> {
    grid: &'g FactorGrid,
    values: Vec<Complex64>,
}

impl<'g> ScalarField<'g> {
    pub fn new(grid: &'g FactorGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "field value at node {i} is not finite"
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn sample<F: Fn(Complex64) -> Complex64>(grid: &'g FactorGrid, f: F) -> Self {
        let values = grid.nodes().iter().map(|&z| f(z)).collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &'g FactorGrid {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

fn origin_in_closure(domain: &PlanarDomain) -> bool {
    let o = ZERO;
    domain.contains(o) || domain.boundary_distance(o) < 1e-12
}

/// Least-squares-free estimate of the power `a` in `|g(ζ)| ≈ c|ζ|^a` near
/// the origin, from the mean of `|g|` over the two innermost shells of nodes.
/// `None` when the grid does not surround the origin or `g` vanishes there.
pub fn origin_exponent(grid: &FactorGrid, g: &[Complex64]) -> Option<f64> {
    if !origin_in_closure(grid.domain()) {
        return None;
    }
    let rho = grid
        .nodes()
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min);
    let mut shells = [(0.0, 0.0, 0usize); 2];
    for (z, v) in grid.nodes().iter().zip(g) {
        let r = z.norm();
        let s = if r < 2.0 * rho * (1.0 + 1e-9) {
            0
        } else if r < 4.0 * rho {
            1
        } else {
            continue;
        };
        shells[s].0 += v.norm();
        shells[s].1 += r;
        shells[s].2 += 1;
    }
    if shells[0].2 == 0 || shells[1].2 == 0 {
        return None;
    }
    let m0 = shells[0].0 / shells[0].2 as f64;
    let m1 = shells[1].0 / shells[1].2 as f64;
    if m0 == 0.0 || m1 == 0.0 {
        return None;
    }
    let r0 = shells[0].1 / shells[0].2 as f64;
    let r1 = shells[1].1 / shells[1].2 as f64;
    Some((m1 / m0).ln() / (r1 / r0).ln())
}

/// Rejects fields for which `ζ^{−k} f` is visibly not integrable at the
/// origin (or not finite anywhere).
pub fn check_integrable(grid: &FactorGrid, values: &[Complex64], k: i64) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NotIntegrable(format!("value at node {i} is not finite")));
    }
    if k <= 0 {
        return Ok(());
    }
    let g: Vec<Complex64> = grid
        .nodes()
        .iter()
        .zip(values)
        .map(|(z, v)| v * z.powi(-(k as i32)))
        .collect();
    match origin_exponent(grid, &g) {
        Some(a) if a < INTEGRABILITY_EXPONENT => Err(Error::NotIntegrable(format!(
            "f/ζ^{k} behaves like |ζ|^{a:.3} at the origin"
        ))),
        _ => Ok(()),
    }
}

pub(crate) fn weight_power(z: Complex64, k: i64) -> Complex64 {
    if k == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        z.powi(k as i32)
    }
}

/// `I_k f(z)` at an arbitrary point of the domain.
pub fn weighted_cauchy_area(field: &ScalarField<'_>, k: i64, z: Complex64) -> Result<Complex64> {
    Ok(weighted_cauchy_area_at(field, k, &[z])?[0])
}

/// `I_k f` at a batch of points, evaluated in parallel.
pub fn weighted_cauchy_area_at(
    field: &ScalarField<'_>,
    k: i64,
    targets: &[Complex64],
) -> Result<Vec<Complex64>> {
    let grid = field.grid();
    for &z in targets {
        if !grid.domain().contains(z) {
            return Err(Error::OutsideDomain(format!("{z}")));
        }
        if k < 0 && z == ZERO {
            return Err(Error::InvalidParameter(
                "negative weight evaluated at the origin".into(),
            ));
        }
    }
    check_integrable(grid, field.values(), k)?;
    let weighted: Vec<Complex64> = grid
        .nodes()
        .iter()
        .zip(field.values())
        .map(|(&zeta, &f)| f / weight_power(zeta, k))
        .collect();
    Ok(targets
        .par_iter()
        .map(|&z| {
            let nodes = grid.nodes();
            let diam = grid.diameters();
            let mut acc = ZERO;
            for (j, g) in weighted.iter().enumerate() {
                if *g != ZERO {
                    acc -= g * cell_moment_weighted(&grid.cell(j), nodes[j], diam[j], z, k);
                }
            }
            weight_power(z, k) * acc / PI
        })
        .collect())
}

enum AreaKernel {
    /// Rotation-equivariant kernel of a polar grid: the matrix entry for
    /// target `(ir, it)` and cell `(jr, jt)` is
    /// `e^{−i·it·Δθ} B[ir][jr][(jt − it) mod n_θ]`, applied by FFT along θ.
    Polar {
        nr: usize,
        nt: usize,
        /// `spectra[(ir·n_r + jr)·n_θ + m] = DFT(B[ir][jr])[(−m) mod n_θ]`.
        spectra: Vec<Complex64>,
        phase: Vec<Complex64>,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
    /// Row `i` holds the kernel weights for target node `i`.
    Dense(Array2<Complex64>),
}

/// `I_k` as a linear map from cell values to node values of one factor grid.
pub struct AreaOperator {
    grid: FactorGrid,
    k: i64,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
    kernel: AreaKernel,
}

impl AreaOperator {
    pub fn new(grid: &FactorGrid, k: i64) -> Result<Self> {
        let kernel = match *grid.layout() {
            GridLayout::Polar { nr, nt, .. } => polar_kernel(grid, nr, nt, k),
            GridLayout::Cartesian { .. } => {
                let n = grid.len();
                if n > MAX_DENSE_NODES {
                    return Err(Error::InvalidParameter(format!(
                        "cartesian area operator limited to {MAX_DENSE_NODES} cells, got {n}"
                    )));
                }
                let mut m = Array2::zeros((n, n));
                m.axis_iter_mut(Axis(0))
                    .into_par_iter()
                    .enumerate()
                    .for_each(|(i, mut row)| {
                        fill_weighted_kernel_row(grid, grid.nodes()[i], k, row.as_slice_mut().unwrap());
                    });
                AreaKernel::Dense(m)
            }
        };
        let pre = grid.nodes().iter().map(|&z| 1.0 / weight_power(z, k)).collect();
        let post = grid.nodes().iter().map(|&z| weight_power(z, k)).collect();
        Ok(AreaOperator {
            grid: grid.clone(),
            k,
            pre,
            post,
            kernel,
        })
    }

    pub fn grid(&self) -> &FactorGrid {
        &self.grid
    }

    pub fn weight(&self) -> i64 {
        self.k
    }

    /// Applies the operator to one field of cell values.
    pub fn apply(&self, input: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.len();
        assert_eq!(input.len(), n);
        let x = ArrayView2::from_shape((1, n), input).unwrap();
        let mut out = Array2::zeros((1, n));
        self.apply_rows(x, out.view_mut());
        out.into_raw_vec_and_offset().0
    }

    /// Applies the operator to every row of `input` (one field per row).
    pub fn apply_rows(&self, input: ArrayView2<'_, Complex64>, mut output: ArrayViewMut2<'_, Complex64>) {
        let n = self.grid.len();
        assert_eq!(input.ncols(), n);
        assert_eq!(output.dim(), input.dim());
        match &self.kernel {
            AreaKernel::Dense(m) => {
                let mut x = input.to_owned();
                for mut row in x.axis_iter_mut(Axis(0)) {
                    for (v, w) in row.iter_mut().zip(&self.pre) {
                        *v *= w;
                    }
                }
                let y = x.dot(&m.t());
                output.assign(&y);
                for mut row in output.axis_iter_mut(Axis(0)) {
                    for (v, w) in row.iter_mut().zip(&self.post) {
                        *v *= w;
                    }
                }
            }
            AreaKernel::Polar {
                nr,
                nt,
                spectra,
                phase,
                forward,
                inverse,
            } => {
                let (nr, nt) = (*nr, *nt);
                output
                    .axis_iter_mut(Axis(0))
                    .into_par_iter()
                    .zip(input.axis_iter(Axis(0)).into_par_iter())
                    .for_each(|(mut out, inp)| {
                        let mut y: Vec<Complex64> =
                            inp.iter().zip(&self.pre).map(|(v, w)| v * w).collect();
                        if y.iter().all(|v| *v == ZERO) {
                            out.fill(ZERO);
                            return;
                        }
                        if y.iter().any(|v| !v.is_finite()) {
                            out.fill(Complex64::new(f64::NAN, f64::NAN));
                            return;
                        }
                        forward.process(&mut y);
                        let mut acc = vec![ZERO; nt];
                        let scale = 1.0 / nt as f64;
                        for ir in 0..nr {
                            acc.fill(ZERO);
                            for jr in 0..nr {
                                let s = &spectra[(ir * nr + jr) * nt..(ir * nr + jr + 1) * nt];
                                let yj = &y[jr * nt..(jr + 1) * nt];
                                for ((a, b), c) in acc.iter_mut().zip(s).zip(yj) {
                                    *a += b * c;
                                }
                            }
                            inverse.process(&mut acc);
                            for it in 0..nt {
                                let idx = ir * nt + it;
                                out[idx] = acc[it] * phase[it] * scale * self.post[idx];
                            }
                        }
                    });
            }
        }
    }
}

fn polar_kernel(grid: &FactorGrid, nr: usize, nt: usize, k: i64) -> AreaKernel {
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(nt);
    let inverse = planner.plan_fft_inverse(nt);
    let n = grid.len();
    let blocks: Vec<Vec<Complex64>> = (0..nr)
        .into_par_iter()
        .map(|ir| {
            let mut row = vec![ZERO; n];
            fill_weighted_kernel_row(grid, grid.nodes()[ir * nt], k, &mut row);
            // row is laid out as B[ir][jr][d]; transform each (jr) block
            forward.process(&mut row);
            let mut out = vec![ZERO; n];
            for jr in 0..nr {
                for m in 0..nt {
                    out[jr * nt + m] = row[jr * nt + (nt - m) % nt];
                }
            }
            out
        })
        .collect();
    let spectra = blocks.concat();
    let dt = TAU / nt as f64;
    let phase = (0..nt)
        .map(|it| Complex64::from_polar(1.0, -(it as f64) * dt))
        .collect();
    AreaKernel::Polar {
        nr,
        nt,
        spectra,
        phase,
        forward,
        inverse,
    }
}

/// A boundary Cauchy integral value with its accuracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryValue {
    pub value: Complex64,
    /// The target is closer to the boundary than two node spacings, where
    /// the trapezoid rule loses its accuracy.
    pub near_boundary: bool,
}

/// `R_k g(z)` by the trapezoid rule on the boundary nodes.
pub fn weighted_cauchy_boundary(
    domain: &PlanarDomain,
    curve: &BoundaryCurve,
    g: &[Complex64],
    k: i64,
    z: Complex64,
) -> Result<BoundaryValue> {
    if g.len() != curve.len() {
        return Err(Error::InvalidParameter(format!(
            "{} boundary values for {} nodes",
            g.len(),
            curve.len()
        )));
    }
    if !domain.contains(z) {
        return Err(Error::OutsideDomain(format!("{z}")));
    }
    if k < 0 && z == ZERO {
        return Err(Error::InvalidParameter(
            "negative weight evaluated at the origin".into(),
        ));
    }
    let value = boundary_sum(curve, g, k, z);
    Ok(BoundaryValue {
        value,
        near_boundary: domain.boundary_distance(z) < 2.0 * curve.spacing(),
    })
}

fn boundary_sum(curve: &BoundaryCurve, g: &[Complex64], k: i64, z: Complex64) -> Complex64 {
    if let Some((center, radius)) = curve.circle_params() {
        let coeffs = circle_coefficients(curve, g, k, &circle_fft(curve.len()));
        let w = (z - center) / radius;
        let acc = coeffs.iter().rev().fold(ZERO, |acc, c| acc * w + c);
        return weight_power(z, k) * acc;
    }
    let mut acc = ZERO;
    for (((zeta, t), w), v) in curve
        .nodes()
        .iter()
        .zip(curve.tangents())
        .zip(curve.weights())
        .zip(g)
    {
        acc += v * t * *w / (weight_power(*zeta, k) * (zeta - z));
    }
    weight_power(z, k) * acc / (TAU * I)
}

fn circle_fft(m: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(m)
}

/// Taylor coefficients in `w = (z − c)/R` of the Cauchy integral of the
/// trigonometric interpolant of `g ζ^{−k}` on a circle: the non-negative
/// Fourier modes, with the Nyquist mode split evenly.
fn circle_coefficients(curve: &BoundaryCurve, g: &[Complex64], k: i64, fft: &Arc<dyn Fft<f64>>) -> Vec<Complex64> {
    let m = curve.len();
    let mut h: Vec<Complex64> = g
        .iter()
        .zip(curve.nodes())
        .map(|(v, zeta)| v / weight_power(*zeta, k))
        .collect();
    fft.process(&mut h);
    let scale = 1.0 / m as f64;
    let mut coeffs: Vec<Complex64> = h[..m / 2 + 1].iter().map(|c| c * scale).collect();
    if m.is_multiple_of(2) {
        coeffs[m / 2] *= 0.5;
    }
    coeffs
}

/// `R_k` as a linear map from boundary samples to the cell-centre nodes.
///
/// On circles the transform is the exact Cauchy integral of the
/// trigonometric interpolant of the samples, which stays accurate up to the
/// boundary; other curves use the plain quadrature sum.
pub struct BoundaryOperator {
    grid: FactorGrid,
    curve: BoundaryCurve,
    k: i64,
}

impl BoundaryOperator {
    pub fn new(grid: &FactorGrid, curve: &BoundaryCurve, k: i64) -> Self {
        BoundaryOperator {
            grid: grid.clone(),
            curve: curve.clone(),
            k,
        }
    }

    pub fn apply(&self, g: &[Complex64]) -> Vec<Complex64> {
        let m = self.curve.len();
        assert_eq!(g.len(), m);
        let x = ArrayView2::from_shape((1, m), g).unwrap();
        let mut out = Array2::zeros((1, self.grid.len()));
        self.apply_rows(x, out.view_mut());
        out.into_raw_vec_and_offset().0
    }

    /// Rows of `input` are boundary samples, rows of `output` node values.
    pub fn apply_rows(&self, input: ArrayView2<'_, Complex64>, output: ArrayViewMut2<'_, Complex64>) {
        assert_eq!(input.ncols(), self.curve.len());
        assert_eq!(output.ncols(), self.grid.len());
        match self.curve.circle_params() {
            Some((center, radius)) => self.apply_circle(input, output, center, radius),
            None => self.apply_quadrature(input, output),
        }
    }

    /// Boundary values of `R_k g` on the curve nodes for rows of boundary
    /// samples. Only circles have them; other curves give NaN.
    pub fn trace_rows(&self, input: ArrayView2<'_, Complex64>, mut output: ArrayViewMut2<'_, Complex64>) {
        let m = self.curve.len();
        assert_eq!(input.ncols(), m);
        assert_eq!(output.dim(), input.dim());
        if self.curve.circle_params().is_none() {
            output.fill(Complex64::new(f64::NAN, f64::NAN));
            return;
        }
        let fft = circle_fft(m);
        let inverse = FftPlanner::new().plan_fft_inverse(m);
        let weights: Vec<Complex64> = self.curve.nodes().iter().map(|z| weight_power(*z, self.k)).collect();
        output
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(input.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(mut o, row)| {
                let g: Vec<Complex64> = row.iter().copied().collect();
                let coeffs = circle_coefficients(&self.curve, &g, self.k, &fft);
                let mut v = vec![ZERO; m];
                v[..coeffs.len()].copy_from_slice(&coeffs);
                inverse.process(&mut v);
                for ((t, x), w) in o.iter_mut().zip(v).zip(&weights) {
                    *t = x * w;
                }
            });
    }

    fn apply_circle(
        &self,
        input: ArrayView2<'_, Complex64>,
        mut output: ArrayViewMut2<'_, Complex64>,
        center: Complex64,
        radius: f64,
    ) {
        const CHUNK: usize = 4096;
        let fft = circle_fft(self.curve.len());
        let rows: Vec<Vec<Complex64>> = input
            .axis_iter(Axis(0))
            .into_par_iter()
            .map(|row| {
                let g: Vec<Complex64> = row.iter().copied().collect();
                circle_coefficients(&self.curve, &g, self.k, &fft)
            })
            .collect();
        let np = rows.first().map_or(self.curve.len() / 2 + 1, Vec::len);
        let coeffs = Array2::from_shape_vec((rows.len(), np), rows.concat()).expect("coefficient matrix");
        let n = self.grid.len();
        for start in (0..n).step_by(CHUNK) {
            let end = (start + CHUNK).min(n);
            let mut powers = Array2::zeros((np, end - start));
            powers
                .axis_iter_mut(Axis(1))
                .into_par_iter()
                .enumerate()
                .for_each(|(c, mut col)| {
                    let z = self.grid.nodes()[start + c];
                    let w = (z - center) / radius;
                    let mut acc = weight_power(z, self.k);
                    for v in col.iter_mut() {
                        *v = acc;
                        acc *= w;
                    }
                });
            let block = coeffs.dot(&powers);
            output.slice_mut(ndarray::s![.., start..end]).assign(&block);
        }
    }

    fn apply_quadrature(&self, input: ArrayView2<'_, Complex64>, mut output: ArrayViewMut2<'_, Complex64>) {
        const CHUNK: usize = 1024;
        let m = self.curve.len();
        let n = self.grid.len();
        let coef: Vec<Complex64> = self
            .curve
            .nodes()
            .iter()
            .zip(self.curve.tangents())
            .zip(self.curve.weights())
            .map(|((zeta, t), w)| t * *w / (weight_power(*zeta, self.k) * TAU * I))
            .collect();
        for start in (0..n).step_by(CHUNK) {
            let end = (start + CHUNK).min(n);
            let mut kernel = Array2::zeros((m, end - start));
            kernel
                .axis_iter_mut(Axis(1))
                .into_par_iter()
                .enumerate()
                .for_each(|(c, mut col)| {
                    let z = self.grid.nodes()[start + c];
                    let zk = weight_power(z, self.k);
                    for (b, zeta) in self.curve.nodes().iter().enumerate() {
                        col[b] = zk * coef[b] / (zeta - z);
                    }
                });
            let block = input.dot(&kernel);
            output.slice_mut(ndarray::s![.., start..end]).assign(&block);
        }
    }
}

/// The three terms of the inhomogeneous Cauchy formula at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyPompeiuTerms {
    pub value: Complex64,
    pub area: Complex64,
    pub boundary: Complex64,
    pub residual: f64,
}

/// `|f(z) − I_0(∂f/∂ζ̄)(z) − R_0(f)(z)|` with `∂f/∂ζ̄` supplied in closed form.
pub fn cauchy_pompeiu_residual<F, G>(
    f: F,
    dbar_f: G,
    grid: &FactorGrid,
    curve: &BoundaryCurve,
    z: Complex64,
) -> Result<CauchyPompeiuTerms>
where
    F: Fn(Complex64) -> Complex64,
    G: Fn(Complex64) -> Complex64,
{
    let field = ScalarField::sample(grid, &dbar_f);
    let area = weighted_cauchy_area(&field, 0, z)?;
    let g: Vec<Complex64> = curve.nodes().iter().map(|&zeta| f(zeta)).collect();
    let boundary = weighted_cauchy_boundary(grid.domain(), curve, &g, 0, z)?.value;
    let value = f(z);
    Ok(CauchyPompeiuTerms {
        value,
        area,
        boundary,
        residual: (value - area - boundary).norm(),
    })
}

/// `J_R(z) = ∫_{|t|<R} dA(t) / (|t|^α |t − z|^β)` by iterated double-exponential
/// quadrature in polar coordinates about `t = 0`, split at `|t| = |z|`.
pub fn kernel_integral_jr(radius: f64, alpha: f64, beta: f64, z: Complex64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    if !(0.0..2.0).contains(&alpha) || !(0.0..2.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "exponents must lie in [0, 2), got alpha={alpha}, beta={beta}"
        )));
    }
    let rho = z.norm();
    if rho == 0.0 && alpha + beta >= 2.0 {
        return Err(Error::InvalidParameter(
            "z = 0 with alpha + beta >= 2 gives a divergent integral".into(),
        ));
    }
    if rho == 0.0 {
        return Ok(TAU * radius.powf(2.0 - alpha - beta) / (2.0 - alpha - beta));
    }
    // angular mean of |r e^{iθ} − ρ|^{−β}, with (r − ρ)² kept separately
    let angular = |r: f64, dr: f64| {
        if beta == 0.0 {
            return TAU;
        }
        2.0 * tanh_sinh(0.0, PI, |_, theta, _| {
            let s = (0.5 * theta).sin();
            let d2 = dr * dr + 4.0 * r * rho * s * s;
            if d2 > 0.0 {
                d2.powf(-0.5 * beta)
            } else {
                0.0
            }
        })
    };
    let radial = |lo: f64, hi: f64, origin_at_lo: bool| {
        tanh_sinh(lo, hi, |r, da, db| {
            let dr = if origin_at_lo { db } else { da };
            let r_from_zero = if lo == 0.0 { da } else { r };
            r_from_zero.powf(1.0 - alpha) * angular(r_from_zero, dr)
        })
    };
    let value = if rho < radius {
        radial(0.0, rho, true) + radial(rho, radius, false)
    } else {
        // |t| < R ≤ |z|: the only near-singularity is at the upper end
        tanh_sinh(0.0, radius, |_, da, db| {
            let dr = db + (rho - radius);
            da.powf(1.0 - alpha) * angular(da, dr)
        })
    };
    Ok(value)
}

/// The comparison function of the kernel bound for `(α, β)`.
pub fn kernel_bound_shape(radius: f64, alpha: f64, beta: f64, z: Complex64) -> f64 {
    let total = alpha + beta;
    if (total - 2.0).abs() < 1e-12 {
        1.0 + (radius.ln() - z.norm().ln()).abs()
    } else if total < 2.0 {
        radius.powf(2.0 - total)
    } else {
        z.norm().powf(2.0 - total)
    }
}

/// One row of a kernel bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelBoundSample {
    pub z: Complex64,
    pub value: f64,
    pub shape: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelBoundCheck {
    pub alpha: f64,
    pub beta: f64,
    pub radius: f64,
    pub samples: Vec<KernelBoundSample>,
    /// Index of the sample that fixes the constant.
    pub fit_index: usize,
    pub fitted_constant: f64,
    /// Largest `ratio / fitted_constant` over the other samples.
    pub worst_excess: f64,
    pub passed: bool,
}

/// Fits `C = J_R(z)/shape(z)` at `targets[fit_index]` and checks
/// `J_R(z) ≤ slack · C · shape(z)` at every other target.
pub fn kernel_bound_check(
    radius: f64,
    alpha: f64,
    beta: f64,
    targets: &[Complex64],
    fit_index: usize,
    slack: f64,
) -> Result<KernelBoundCheck> {
    if fit_index >= targets.len() {
        return Err(Error::InvalidParameter("fit index out of range".into()));
    }
    let samples = targets
        .iter()
        .map(|&z| {
            let value = kernel_integral_jr(radius, alpha, beta, z)?;
            let shape = kernel_bound_shape(radius, alpha, beta, z);
            Ok(KernelBoundSample {
                z,
                value,
                shape,
                ratio: value / shape,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fitted_constant = samples[fit_index].ratio;
    let worst_excess = samples
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != fit_index)
        .map(|(_, s)| s.ratio / fitted_constant)
        .fold(0.0, f64::max);
    Ok(KernelBoundCheck {
        alpha,
        beta,
        radius,
        samples,
        fit_index,
        fitted_constant,
        worst_excess,
        passed: worst_excess <= slack,
    })
}

/// `count` seeded targets, uniform in area on the disc `|z| < reach`.
pub fn interior_targets(count: usize, reach: f64, seed: u64) -> Vec<Complex64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = reach * rng.random::<f64>().sqrt();
            Complex64::from_polar(r, TAU * rng.random::<f64>())
        })
        .collect()
}

/// Closed forms of `I_k` on the unit disc used as oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedForm {
    /// `I_k(1) = z̄` for `k ∈ {0, 1}`.
    One,
    /// `I_k(ζ̄) = z̄²/2` for `k ∈ {0, 1}`.
    Conjugate,
}

impl ClosedForm {
    pub fn label(&self) -> &'static str {
        match self {
            ClosedForm::One => "1",
            ClosedForm::Conjugate => "conj(z)",
        }
    }

    pub fn input(&self, z: Complex64) -> Complex64 {
        match self {
            ClosedForm::One => Complex64::new(1.0, 0.0),
            ClosedForm::Conjugate => z.conj(),
        }
    }

    pub fn exact(&self, z: Complex64) -> Complex64 {
        match self {
            ClosedForm::One => z.conj(),
            ClosedForm::Conjugate => z.conj() * z.conj() * 0.5,
        }
    }
}

/// Largest error of `I_k f` against its closed form at `targets`, on a
/// polar grid of the unit disc.
pub fn closed_form_error(form: ClosedForm, k: i64, nr: usize, nt: usize, targets: &[Complex64]) -> Result<f64> {
    if !(0..=1).contains(&k) {
        return Err(Error::InvalidParameter(format!("closed forms hold for k ∈ {{0, 1}}, got {k}")));
    }
    let grid = FactorGrid::polar(Complex64::new(0.0, 0.0), 1.0, nr, nt)?;
    let field = ScalarField::sample(&grid, |z| form.input(z));
    let values = weighted_cauchy_area_at(&field, k, targets)?;
    Ok(values
        .iter()
        .zip(targets)
        .map(|(v, &z)| (v - form.exact(z)).norm())
        .fold(0.0, f64::max))
}

/// The dyadic targets `z = 2^{−j}`, `j = 1..=count`.
pub fn dyadic_targets(count: usize) -> Vec<Complex64> {
    (1..=count)
        .map(|j| Complex64::new(0.5f64.powi(j as i32), 0.0))
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn closed_forms_are_reproduced() {
        let targets = interior_targets(20, 0.9, 7);
        for k in [0, 1] {
            assert!(closed_form_error(ClosedForm::One, k, 16, 32, &targets).unwrap() < 1e-12);
            let coarse = closed_form_error(ClosedForm::Conjugate, k, 16, 32, &targets).unwrap();
            let fine = closed_form_error(ClosedForm::Conjugate, k, 32, 64, &targets).unwrap();
            assert!(fine < 1e-3 && fine < coarse / 2.0, "k={k}: {coarse} {fine}");
        }
        assert!(closed_form_error(ClosedForm::One, 2, 16, 32, &targets).is_err());
    }

    use super::*;
    use crate::domain::boundary_nodes;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_grid(nr: usize, nt: usize) -> FactorGrid {
        FactorGrid::polar(ZERO, 1.0, nr, nt).unwrap()
    }

    #[test]
    fn cell_moments_sum_to_disc_transform() {
        // ∫_D dA/(ζ − z) = −π z̄ on the unit disc
        let g = unit_grid(8, 16);
        for z in [c(0.3, 0.1), g.nodes()[20], c(-0.7, 0.5)] {
            let total: Complex64 = (0..g.len())
                .map(|j| contour_moment(&g.cell(j), z))
                .sum();
            assert!((total + PI * z.conj()).norm() < 1e-10, "z={z}");
        }
    }

    #[test]
    fn gauss_and_contour_moments_agree_far_away() {
        let g = unit_grid(8, 16);
        let z = c(0.9, -0.05);
        let j = 3;
        let exact = contour_moment(&g.cell(j), z);
        let approx = gauss_moment(&g.cell(j), gl4(), z);
        assert!((exact - approx).norm() < 1e-6 * exact.norm());
    }

    #[test]
    fn box_moment_of_unit_square() {
        let cell = CellShape::Box {
            x0: -0.5,
            x1: 0.5,
            y0: -0.5,
            y1: 0.5,
        };
        // symmetric cell about z: the moment vanishes
        assert!(contour_moment(&cell, ZERO).norm() < 1e-12);
        let far = c(3.0, 1.0);
        let approx = gauss_moment(&cell, gl4(), far);
        assert!((contour_moment(&cell, far) - approx).norm() < 1e-8);
    }

    #[test]
    fn polar_operator_matches_direct_sum() {
        let g = unit_grid(6, 12);
        let values: Vec<Complex64> = g.nodes().iter().map(|z| z.conj() * z + z.exp()).collect();
        for k in [0, 1] {
            let op = AreaOperator::new(&g, k).unwrap();
            let fast = op.apply(&values);
            let field = ScalarField::new(&g, values.clone()).unwrap();
            let direct = weighted_cauchy_area_at(&field, k, g.nodes()).unwrap();
            for (a, b) in fast.iter().zip(&direct) {
                assert!((a - b).norm() < 1e-12, "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn dense_operator_matches_direct_sum() {
        let g = FactorGrid::cartesian(c(-1.0, -1.0), c(1.0, 1.0), 6, 6).unwrap();
        let values: Vec<Complex64> = g.nodes().iter().map(|z| z * z + 1.0).collect();
        let op = AreaOperator::new(&g, 1).unwrap();
        let fast = op.apply(&values);
        let field = ScalarField::new(&g, values).unwrap();
        let direct = weighted_cauchy_area_at(&field, 1, g.nodes()).unwrap();
        for (a, b) in fast.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_transform_is_conjugate() {
        let g = unit_grid(64, 128);
        let field = ScalarField::sample(&g, |_| c(1.0, 0.0));
        for k in [0, 1] {
            for z in [c(0.3, 0.0), c(0.3, 0.4), c(-0.5, -0.2)] {
                let v = weighted_cauchy_area(&field, k, z).unwrap();
                assert!((v - z.conj()).norm() < 2e-3, "k={k} z={z}: {v}");
            }
        }
    }

    #[test]
    fn zero_field_gives_zero() {
        let g = unit_grid(8, 16);
        let field = ScalarField::sample(&g, |_| ZERO);
        for k in [0, 1, 2] {
            assert_eq!(weighted_cauchy_area(&field, k, c(0.2, 0.1)).unwrap(), ZERO);
        }
    }

    #[test]
    fn outside_target_is_rejected() {
        let g = unit_grid(8, 16);
        let field = ScalarField::sample(&g, |_| c(1.0, 0.0));
        assert!(matches!(
            weighted_cauchy_area(&field, 0, c(1.5, 0.0)),
            Err(Error::OutsideDomain(_))
        ));
    }

    #[test]
    fn non_integrable_weight_is_rejected() {
        let g = unit_grid(16, 32);
        let field = ScalarField::sample(&g, |_| c(1.0, 0.0));
        assert!(matches!(
            weighted_cauchy_area(&field, 2, c(0.3, 0.0)),
            Err(Error::NotIntegrable(_))
        ));
        let field = ScalarField::sample(&g, |z| z);
        assert!(weighted_cauchy_area(&field, 2, c(0.3, 0.0)).is_ok());
    }

    #[test]
    fn boundary_transform_examples() {
        let d = PlanarDomain::unit_disc();
        let curve = boundary_nodes(&d, 2048).unwrap();
        let ones = vec![c(1.0, 0.0); curve.len()];
        let conj: Vec<Complex64> = curve.nodes().iter().map(|z| z.conj()).collect();
        let z = c(0.5, 0.0);
        let v = weighted_cauchy_boundary(&d, &curve, &ones, 0, z).unwrap();
        assert!((v.value - 1.0).norm() < 1e-12 && !v.near_boundary);
        // ζ̄ = 1/ζ on the circle; 1/(ζ(ζ − z)) has residues cancelling at 0 and z
        let v = weighted_cauchy_boundary(&d, &curve, &conj, 0, z).unwrap();
        assert!(v.value.norm() < 1e-12);
        // z·(1/2πi)∮ dζ/(ζ(ζ − z)) = z·(1/z − 1/z) = 0
        let v = weighted_cauchy_boundary(&d, &curve, &ones, 1, z).unwrap();
        assert!(v.value.norm() < 1e-12);
        let v = weighted_cauchy_boundary(&d, &curve, &ones, 0, c(0.999, 0.0)).unwrap();
        assert!(v.near_boundary);
        assert!(weighted_cauchy_boundary(&d, &curve, &ones, 0, c(1.2, 0.0)).is_err());
    }

    #[test]
    fn boundary_operator_matches_point_evaluation() {
        let g = unit_grid(4, 8);
        let d = *g.domain();
        let curve = boundary_nodes(&d, 32).unwrap();
        let data: Vec<Complex64> = curve.nodes().iter().map(|z| z.conj() * 2.0 + z).collect();
        for k in [0, 1] {
            let op = BoundaryOperator::new(&g, &curve, k);
            let out = op.apply(&data);
            for (i, &z) in g.nodes().iter().enumerate() {
                let v = weighted_cauchy_boundary(&d, &curve, &data, k, z).unwrap().value;
                assert!((out[i] - v).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_integral_area_of_disc() {
        for z in [c(0.1, 0.0), c(0.5, 0.5), c(3.0, 0.0)] {
            let v = kernel_integral_jr(1.0, 0.0, 0.0, z).unwrap();
            assert!((v - PI).abs() < 1e-10);
        }
        assert!(kernel_integral_jr(1.0, 2.0, 0.0, c(0.1, 0.0)).is_err());
        assert!(kernel_integral_jr(1.0, 1.0, 1.0, ZERO).is_err());
    }

    #[test]
    fn kernel_integral_single_singularity() {
        // β = 0: ∫ |t|^{−α} dA = 2π R^{2−α}/(2 − α)
        let v = kernel_integral_jr(1.0, 1.5, 0.0, c(0.25, 0.0)).unwrap();
        assert!((v - TAU / 0.5).abs() < 1e-9);
        // α = 0, β = 1, z = 0 reduces to the same formula
        let v = kernel_integral_jr(2.0, 0.0, 1.0, ZERO).unwrap();
        assert!((v - TAU * 2.0).abs() < 1e-12);
        // α = 0, β = 1: the Newton potential of the unit disc, 4·E(|z|)
        for r in [0.3, 0.75] {
            let v = kernel_integral_jr(1.0, 0.0, 1.0, c(r, 0.0)).unwrap();
            assert!((v - 4.0 * elliptic_e(r)).abs() < 1e-9, "r={r}: {v} vs {}", 4.0 * elliptic_e(r));
        }
    }

    /// Complete elliptic integral of the second kind by the AGM iteration.
    fn elliptic_e(k: f64) -> f64 {
        let (mut a, mut b) = (1.0f64, (1.0 - k * k).sqrt());
        let mut sum = 0.5 * k * k;
        let mut pow = 0.5;
        for _ in 0..30 {
            let c = 0.5 * (a - b);
            let (an, bn) = (0.5 * (a + b), (a * b).sqrt());
            pow *= 2.0;
            sum += pow * c * c;
            a = an;
            b = bn;
        }
        PI / (2.0 * a) * (1.0 - sum)
    }
}
