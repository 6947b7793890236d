//! Planar domains, product domains and their discretizations.
//!
//! Discs are sampled on origin-centred polar grids (cell-centre nodes with a
//! half-cell radial offset, so no node sits on the centre); rectangles on
//! uniform cartesian grids. Every factor also carries a counterclockwise
//! boundary curve for the boundary Cauchy integrals.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::Segment;

/// Largest supported number of factors in a product domain.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanarDomain {
    Disc { center: Complex64, radius: f64 },
    Rect { lo: Complex64, hi: Complex64 },
}

impl PlanarDomain {
    pub fn disc(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "disc radius must be positive, got {radius}"
            )));
        }
        Ok(PlanarDomain::Disc { center, radius })
    }

    pub fn unit_disc() -> Self {
        PlanarDomain::Disc {
            center: Complex64::new(0.0, 0.0),
            radius: 1.0,
        }
    }

    pub fn rect(lo: Complex64, hi: Complex64) -> Result<Self> {
        if !(hi.re > lo.re) || !(hi.im > lo.im) {
            return Err(Error::InvalidParameter(format!(
                "rectangle needs positive width and height, got {lo} .. {hi}"
            )));
        }
        Ok(PlanarDomain::Rect { lo, hi })
    }

    /// Open-set membership.
    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            PlanarDomain::Disc { center, radius } => (z - center).norm() < radius,
            PlanarDomain::Rect { lo, hi } => {
                z.re > lo.re && z.re < hi.re && z.im > lo.im && z.im < hi.im
            }
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            PlanarDomain::Disc { radius, .. } => PI * radius * radius,
            PlanarDomain::Rect { lo, hi } => (hi.re - lo.re) * (hi.im - lo.im),
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        match *self {
            PlanarDomain::Disc { center, radius } => (radius - (z - center).norm()).abs(),
            PlanarDomain::Rect { lo, hi } => {
                let dx = (z.re - lo.re).abs().min((hi.re - z.re).abs());
                let dy = (z.im - lo.im).abs().min((hi.im - z.im).abs());
                if self.contains(z) {
                    dx.min(dy)
                } else {
                    let cx = z.re.clamp(lo.re, hi.re);
                    let cy = z.im.clamp(lo.im, hi.im);
                    let c = Complex64::new(cx, cy);
                    if c == z {
                        dx.min(dy)
                    } else {
                        (z - c).norm()
                    }
                }
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            PlanarDomain::Disc { radius, .. } => 2.0 * radius,
            PlanarDomain::Rect { lo, hi } => (hi - lo).norm(),
        }
    }

    /// Whether `self` is compactly contained in `outer`.
    pub fn compactly_inside(&self, outer: &PlanarDomain) -> bool {
        match *self {
            PlanarDomain::Disc { center, radius } => {
                outer.contains(center) && outer.boundary_distance(center) > radius
            }
            PlanarDomain::Rect { lo, hi } => {
                let corners = [lo, hi, Complex64::new(lo.re, hi.im), Complex64::new(hi.re, lo.im)];
                corners
                    .iter()
                    .all(|&c| outer.contains(c) && outer.boundary_distance(c) > 0.0)
            }
        }
    }
}

/// `P = D₁ × ⋯ × Dₙ` with `1 ≤ n ≤ 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDomain {
    factors: Vec<PlanarDomain>,
}

impl ProductDomain {
    pub fn new(factors: Vec<PlanarDomain>) -> Result<Self> {
        if factors.is_empty() || factors.len() > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "product domain needs 1..={MAX_DIM} factors, got {}",
                factors.len()
            )));
        }
        Ok(ProductDomain { factors })
    }

    pub fn unit_polydisc(n: usize) -> Result<Self> {
        Self::new(vec![PlanarDomain::unit_disc(); n])
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[PlanarDomain] {
        &self.factors
    }

    pub fn factor(&self, j: usize) -> &PlanarDomain {
        &self.factors[j]
    }

    pub fn contains(&self, z: &[Complex64]) -> bool {
        z.len() == self.dim() && self.factors.iter().zip(z).all(|(d, &zj)| d.contains(zj))
    }
}

/// Per-factor resolution: `(n_r, n_θ)` for discs, `(n_x, n_y)` for rectangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FactorResolution(pub usize, pub usize);

impl FactorResolution {
    /// The square-ish polar layout used for a scalar resolution `N`:
    /// `n_r = N/2` rings and `n_θ = N` sectors (`N × N` for rectangles).
    pub fn from_scalar(domain: &PlanarDomain, n: usize) -> Self {
        match domain {
            PlanarDomain::Disc { .. } => FactorResolution((n / 2).max(1), n),
            PlanarDomain::Rect { .. } => FactorResolution(n, n),
        }
    }

    pub fn doubled(&self) -> Self {
        FactorResolution(2 * self.0, 2 * self.1)
    }
}

/// Geometry of one grid cell, used for exact kernel moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellShape {
    /// `{center + r e^{iθ} : r0 ≤ r ≤ r1, t0 ≤ θ ≤ t1}`
    Sector {
        center: Complex64,
        r0: f64,
        r1: f64,
        t0: f64,
        t1: f64,
    },
    Box {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridLayout {
    Polar {
        center: Complex64,
        radius: f64,
        nr: usize,
        nt: usize,
    },
    Cartesian {
        lo: Complex64,
        hi: Complex64,
        nx: usize,
        ny: usize,
    },
}

/// Cell-centre sampling of one planar factor.
#[derive(Debug, Clone)]
pub struct FactorGrid {
    domain: PlanarDomain,
    layout: GridLayout,
    nodes: Vec<Complex64>,
    areas: Vec<f64>,
    diameters: Vec<f64>,
}

impl FactorGrid {
    /// Polar grid on a disc; node `i = ir·n_θ + it` sits at radius
    /// `(ir + ½)Δr` and angle `(it + ½)Δθ`.
    pub fn polar(center: Complex64, radius: f64, nr: usize, nt: usize) -> Result<Self> {
        if nr == 0 || nt == 0 {
            return Err(Error::InvalidParameter("empty polar grid".into()));
        }
        let domain = PlanarDomain::disc(center, radius)?;
        let dr = radius / nr as f64;
        let dt = TAU / nt as f64;
        let mut nodes = Vec::with_capacity(nr * nt);
        let mut areas = Vec::with_capacity(nr * nt);
        for ir in 0..nr {
            let r0 = ir as f64 * dr;
            let r1 = r0 + dr;
            let rc = r0 + 0.5 * dr;
            let area = 0.5 * (r1 * r1 - r0 * r0) * dt;
            for it in 0..nt {
                let theta = (it as f64 + 0.5) * dt;
                nodes.push(center + Complex64::from_polar(rc, theta));
                areas.push(area);
            }
        }
        Ok(FactorGrid {
            domain,
            layout: GridLayout::Polar {
                center,
                radius,
                nr,
                nt,
            },
            nodes,
            areas,
            diameters: Vec::new(),
        }
        .with_diameters())
    }

    /// Uniform cartesian grid; node `i = iy·n_x + ix`.
    pub fn cartesian(lo: Complex64, hi: Complex64, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter("empty cartesian grid".into()));
        }
        let domain = PlanarDomain::rect(lo, hi)?;
        let hx = (hi.re - lo.re) / nx as f64;
        let hy = (hi.im - lo.im) / ny as f64;
        let mut nodes = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                nodes.push(Complex64::new(
                    lo.re + (ix as f64 + 0.5) * hx,
                    lo.im + (iy as f64 + 0.5) * hy,
                ));
            }
        }
        Ok(FactorGrid {
            domain,
            layout: GridLayout::Cartesian { lo, hi, nx, ny },
            nodes,
            areas: vec![hx * hy; nx * ny],
            diameters: Vec::new(),
        }
        .with_diameters())
    }

    pub fn for_domain(domain: &PlanarDomain, res: FactorResolution) -> Result<Self> {
        match *domain {
            PlanarDomain::Disc { center, radius } => Self::polar(center, radius, res.0, res.1),
            PlanarDomain::Rect { lo, hi } => Self::cartesian(lo, hi, res.0, res.1),
        }
    }

    fn with_diameters(mut self) -> Self {
        self.diameters = (0..self.len()).map(|i| self.compute_diameter(i)).collect();
        self
    }

    pub fn domain(&self) -> &PlanarDomain {
        &self.domain
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// `(Δr, Δθ)` for polar grids, `(Δx, Δy)` for cartesian ones.
    pub fn steps(&self) -> (f64, f64) {
        match self.layout {
            GridLayout::Polar { radius, nr, nt, .. } => (radius / nr as f64, TAU / nt as f64),
            GridLayout::Cartesian { lo, hi, nx, ny } => {
                ((hi.re - lo.re) / nx as f64, (hi.im - lo.im) / ny as f64)
            }
        }
    }

    /// Shape dimensions `(rows, cols)`: `(n_r, n_θ)` or `(n_y, n_x)`.
    pub fn shape(&self) -> (usize, usize) {
        match self.layout {
            GridLayout::Polar { nr, nt, .. } => (nr, nt),
            GridLayout::Cartesian { nx, ny, .. } => (ny, nx),
        }
    }

    pub fn cell(&self, i: usize) -> CellShape {
        match self.layout {
            GridLayout::Polar { center, radius, nr, nt } => {
                let (ir, it) = (i / nt, i % nt);
                let dr = radius / nr as f64;
                let dt = TAU / nt as f64;
                CellShape::Sector {
                    center,
                    r0: ir as f64 * dr,
                    r1: (ir + 1) as f64 * dr,
                    t0: it as f64 * dt,
                    t1: (it + 1) as f64 * dt,
                }
            }
            GridLayout::Cartesian { lo, hi, nx, ny } => {
                let (iy, ix) = (i / nx, i % nx);
                let hx = (hi.re - lo.re) / nx as f64;
                let hy = (hi.im - lo.im) / ny as f64;
                CellShape::Box {
                    x0: lo.re + ix as f64 * hx,
                    x1: lo.re + (ix + 1) as f64 * hx,
                    y0: lo.im + iy as f64 * hy,
                    y1: lo.im + (iy + 1) as f64 * hy,
                }
            }
        }
    }

    /// Largest distance between two points of the cell.
    pub fn cell_diameter(&self, i: usize) -> f64 {
        self.diameters[i]
    }

    pub fn diameters(&self) -> &[f64] {
        &self.diameters
    }

    fn compute_diameter(&self, i: usize) -> f64 {
        match self.cell(i) {
            CellShape::Sector { r0, r1, t0, t1, .. } => {
                let dt = t1 - t0;
                let chord = 2.0 * r1 * (0.5 * dt).min(0.5 * PI).sin();
                let diag = (r1 * r1 + r0 * r0 - 2.0 * r1 * r0 * dt.cos()).max(0.0).sqrt();
                chord.max(diag).max(r1 - r0)
            }
            CellShape::Box { x0, x1, y0, y1 } => (x1 - x0).hypot(y1 - y0),
        }
    }

    pub fn max_cell_diameter(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    /// Index of the cell containing `z`, if `z` lies in the closed domain.
    pub fn locate(&self, z: Complex64) -> Option<usize> {
        match self.layout {
            GridLayout::Polar { center, radius, nr, nt } => {
                let w = z - center;
                let r = w.norm();
                if r > radius {
                    return None;
                }
                let ir = ((r / radius * nr as f64) as usize).min(nr - 1);
                let mut theta = w.arg();
                if theta < 0.0 {
                    theta += TAU;
                }
                let it = ((theta / TAU * nt as f64) as usize).min(nt - 1);
                Some(ir * nt + it)
            }
            GridLayout::Cartesian { lo, hi, nx, ny } => {
                if z.re < lo.re || z.re > hi.re || z.im < lo.im || z.im > hi.im {
                    return None;
                }
                let ix = (((z.re - lo.re) / (hi.re - lo.re) * nx as f64) as usize).min(nx - 1);
                let iy = (((z.im - lo.im) / (hi.im - lo.im) * ny as f64) as usize).min(ny - 1);
                Some(iy * nx + ix)
            }
        }
    }

    /// Ring index of a polar node, row index of a cartesian one.
    pub fn row_of(&self, i: usize) -> usize {
        i / self.shape().1
    }

    /// A finer grid on the same domain with doubled resolution.
    pub fn refined(&self) -> Result<Self> {
        let (a, b) = match self.layout {
            GridLayout::Polar { nr, nt, .. } => (nr, nt),
            GridLayout::Cartesian { nx, ny, .. } => (nx, ny),
        };
        Self::for_domain(&self.domain, FactorResolution(2 * a, 2 * b))
    }
}

/// Closed counterclockwise boundary parametrization with quadrature weights,
/// so that `∮ g dζ ≈ Σ_b g(ζ_b) ζ'_b w_b`.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    nodes: Vec<Complex64>,
    tangents: Vec<Complex64>,
    weights: Vec<f64>,
    circle: Option<(Complex64, f64)>,
}

impl BoundaryCurve {
    /// `m` equispaced nodes `ζ = c + R e^{it}` starting at `t = 0`.
    pub fn circle(center: Complex64, radius: f64, m: usize) -> Self {
        let dt = TAU / m as f64;
        let mut nodes = Vec::with_capacity(m);
        let mut tangents = Vec::with_capacity(m);
        for b in 0..m {
            let e = Complex64::from_polar(1.0, b as f64 * dt);
            nodes.push(center + e * radius);
            tangents.push(Complex64::i() * e * radius);
        }
        BoundaryCurve {
            nodes,
            tangents,
            weights: vec![dt; m],
            circle: Some((center, radius)),
        }
    }

    /// Midpoint nodes on the four edges, counterclockwise from `lo`, with
    /// per-edge counts proportional to edge length (at least one per edge).
    pub fn rectangle(lo: Complex64, hi: Complex64, m: usize) -> Self {
        let w = hi.re - lo.re;
        let h = hi.im - lo.im;
        let perimeter = 2.0 * (w + h);
        let corners = [
            lo,
            Complex64::new(hi.re, lo.im),
            hi,
            Complex64::new(lo.re, hi.im),
        ];
        let lengths = [w, h, w, h];
        let mut counts: Vec<usize> = lengths
            .iter()
            .map(|l| ((l / perimeter * m as f64).round() as usize).max(1))
            .collect();
        let total: usize = counts.iter().sum();
        if total < m {
            counts[0] += m - total;
        }
        let mut nodes = Vec::with_capacity(m);
        let mut tangents = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for e in 0..4 {
            let a = corners[e];
            let b = corners[(e + 1) % 4];
            let k = counts[e];
            let du = 1.0 / k as f64;
            for j in 0..k {
                let u = (j as f64 + 0.5) * du;
                nodes.push(a + (b - a) * u);
                tangents.push(b - a);
                weights.push(du);
            }
        }
        BoundaryCurve {
            nodes,
            tangents,
            weights,
            circle: None,
        }
    }

    /// Centre and radius when the nodes are the equispaced circle nodes of
    /// [`BoundaryCurve::circle`].
    pub fn circle_params(&self) -> Option<(Complex64, f64)> {
        self.circle
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Complex64] {
        &self.nodes
    }

    pub fn tangents(&self) -> &[Complex64] {
        &self.tangents
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest arclength between consecutive nodes.
    pub fn spacing(&self) -> f64 {
        self.tangents
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| t.norm() * w)
            .fold(0.0, f64::max)
    }

    /// `∮ g(ζ) dζ` by the node rule.
    pub fn integrate<G: Fn(Complex64) -> Complex64>(&self, g: G) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.tangents)
            .zip(&self.weights)
            .map(|((&z, &t), &w)| g(z) * t * w)
            .sum()
    }
}

/// Minimum number of boundary nodes accepted by [`boundary_nodes`].
pub const MIN_BOUNDARY_NODES: usize = 16;
/// Minimum per-direction resolution accepted by [`build_grid`].
pub const MIN_RESOLUTION: usize = 4;

pub fn boundary_nodes(domain: &PlanarDomain, m: usize) -> Result<BoundaryCurve> {
    if m < MIN_BOUNDARY_NODES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_BOUNDARY_NODES} boundary nodes, got {m}"
        )));
    }
    Ok(match *domain {
        PlanarDomain::Disc { center, radius } => BoundaryCurve::circle(center, radius, m),
        PlanarDomain::Rect { lo, hi } => BoundaryCurve::rectangle(lo, hi, m),
    })
}

/// One axis of a product grid: area nodes followed by boundary nodes.
///
/// Fields on a product grid are indexed per axis by this extended node list,
/// so index `i < area.len()` is a cell centre and `area.len() + b` is
/// boundary node `b`.
#[derive(Debug, Clone)]
pub struct AxisGrid {
    pub area: FactorGrid,
    pub boundary: BoundaryCurve,
}

impl AxisGrid {
    pub fn new(area: FactorGrid, boundary: BoundaryCurve) -> Self {
        AxisGrid { area, boundary }
    }

    pub fn n_area(&self) -> usize {
        self.area.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }

    pub fn extended_len(&self) -> usize {
        self.area.len() + self.boundary.len()
    }

    pub fn point(&self, i: usize) -> Complex64 {
        let na = self.area.len();
        if i < na {
            self.area.nodes()[i]
        } else {
            self.boundary.nodes()[i - na]
        }
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.area
            .nodes()
            .iter()
            .chain(self.boundary.nodes())
            .copied()
            .collect()
    }

    pub fn domain(&self) -> &PlanarDomain {
        self.area.domain()
    }
}

/// Tensor grid over a product domain, nodes ordered factor-major.
#[derive(Debug, Clone)]
pub struct ProductGrid {
    axes: Vec<AxisGrid>,
}

impl ProductGrid {
    pub fn from_axes(axes: Vec<AxisGrid>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "product grid needs 1..={MAX_DIM} axes"
            )));
        }
        Ok(ProductGrid { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[AxisGrid] {
        &self.axes
    }

    pub fn axis(&self, j: usize) -> &AxisGrid {
        &self.axes[j]
    }

    /// Number of tensor nodes built from cell centres only.
    pub fn area_node_count(&self) -> usize {
        self.axes.iter().map(|a| a.n_area()).product()
    }

    /// Per-axis extended lengths (area + boundary nodes).
    pub fn extended_shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.extended_len()).collect()
    }

    pub fn domain(&self) -> ProductDomain {
        ProductDomain {
            factors: self.axes.iter().map(|a| *a.domain()).collect(),
        }
    }

    /// Coordinates of the extended tensor node with the given per-axis indices.
    pub fn point(&self, index: &[usize]) -> Vec<Complex64> {
        index
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.point(i))
            .collect()
    }
}

/// One boundary node per angular sector on discs, one per boundary cell edge
/// on rectangles (at least [`MIN_BOUNDARY_NODES`]).
pub fn default_boundary_count(grid: &FactorGrid) -> usize {
    let m = match *grid.layout() {
        GridLayout::Polar { nt, .. } => nt,
        GridLayout::Cartesian { nx, ny, .. } => 2 * (nx + ny),
    };
    m.max(MIN_BOUNDARY_NODES)
}

/// Builds the tensor grid of `P` with the given per-factor resolutions and
/// [`default_boundary_count`] boundary nodes per factor.
pub fn build_grid(p: &ProductDomain, resolution: &[FactorResolution]) -> Result<ProductGrid> {
    build_grid_with_boundary(p, resolution, None)
}

pub fn build_grid_with_boundary(
    p: &ProductDomain,
    resolution: &[FactorResolution],
    boundary: Option<usize>,
) -> Result<ProductGrid> {
    if resolution.len() != p.dim() {
        return Err(Error::InvalidParameter(format!(
            "{} resolutions for a {}-factor domain",
            resolution.len(),
            p.dim()
        )));
    }
    let mut axes = Vec::with_capacity(p.dim());
    for (d, r) in p.factors().iter().zip(resolution) {
        if r.0 < MIN_RESOLUTION || r.1 < MIN_RESOLUTION {
            return Err(Error::InvalidParameter(format!(
                "resolution ({}, {}) below minimum {MIN_RESOLUTION}",
                r.0, r.1
            )));
        }
        let area = FactorGrid::for_domain(d, *r)?;
        if area.nodes().iter().any(|z| z.norm() < 1e-12) {
            return Err(Error::InvalidParameter(
                "grid places a node on the coordinate divisor z = 0".into(),
            ));
        }
        let m = boundary.unwrap_or_else(|| default_boundary_count(&area));
        let curve = boundary_nodes(d, m)?;
        axes.push(AxisGrid::new(area, curve));
    }
    ProductGrid::from_axes(axes)
}

/// Straight segment `a + u (b − a)`, `u ∈ [0, 1]`.
pub(crate) struct LineSegment {
    pub a: Complex64,
    pub b: Complex64,
}

impl Segment for LineSegment {
    fn point(&self, u: f64) -> Complex64 {
        self.a + (self.b - self.a) * u
    }

    fn derivative(&self, _u: f64) -> Complex64 {
        self.b - self.a
    }
}

/// Circular arc `c + r e^{iθ}`, parameter `θ`.
pub(crate) struct Arc {
    pub center: Complex64,
    pub radius: f64,
}

impl Segment for Arc {
    fn point(&self, t: f64) -> Complex64 {
        self.center + Complex64::from_polar(self.radius, t)
    }

    fn derivative(&self, t: f64) -> Complex64 {
        Complex64::i() * Complex64::from_polar(self.radius, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn small_polar_grid_area() {
        let g = FactorGrid::polar(c(0.0, 0.0), 1.0, 2, 4).unwrap();
        assert_eq!(g.len(), 8);
        assert!((g.total_area() - PI).abs() < 1e-12);
        assert!(g.nodes().iter().all(|z| z.norm() > 0.0));
    }

    #[test]
    fn product_node_count() {
        let p = ProductDomain::unit_polydisc(2).unwrap();
        let g = build_grid(&p, &[FactorResolution(8, 16); 2]).unwrap();
        assert_eq!(g.area_node_count(), 16384);
    }

    #[test]
    fn unit_square_cells() {
        let g = FactorGrid::cartesian(c(0.0, 0.0), c(1.0, 1.0), 10, 10).unwrap();
        assert_eq!(g.len(), 100);
        assert!(g.areas().iter().all(|a| (a - 0.01).abs() < 1e-15));
    }

    #[test]
    fn build_grid_rejects_coarse_resolution() {
        let p = ProductDomain::unit_polydisc(1).unwrap();
        assert!(build_grid(&p, &[FactorResolution(3, 16)]).is_err());
        assert!(build_grid(&p, &[FactorResolution(4, 4)]).is_ok());
    }

    #[test]
    fn build_grid_rejects_node_on_divisor() {
        let p = ProductDomain::new(vec![PlanarDomain::rect(c(-1.0, -1.0), c(1.0, 1.0)).unwrap()])
            .unwrap();
        assert!(build_grid(&p, &[FactorResolution(5, 5)]).is_err());
        assert!(build_grid(&p, &[FactorResolution(4, 4)]).is_ok());
    }

    #[test]
    fn product_dimension_bounds() {
        assert!(ProductDomain::new(vec![]).is_err());
        assert!(ProductDomain::unit_polydisc(4).is_err());
        assert!(ProductDomain::unit_polydisc(3).is_ok());
    }

    #[test]
    fn circle_nodes_and_tangents() {
        let b = BoundaryCurve::circle(c(0.0, 0.0), 1.0, 4);
        let expect_nodes = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        let expect_tangents = [c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0), c(1.0, 0.0)];
        for k in 0..4 {
            assert!((b.nodes()[k] - expect_nodes[k]).norm() < 1e-15);
            assert!((b.tangents()[k] - expect_tangents[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn residue_identities_on_circle() {
        let b = boundary_nodes(&PlanarDomain::unit_disc(), 64).unwrap();
        let two_pi_i = Complex64::new(0.0, TAU);
        let one = b.integrate(|z| 1.0 / z) / two_pi_i;
        assert!((one - 1.0).norm() < 1e-12);
        let zero = b.integrate(|z| 1.0 / (z - 2.0)) / two_pi_i;
        assert!(zero.norm() < 1e-12);
        assert!(boundary_nodes(&PlanarDomain::unit_disc(), 8).is_err());
    }

    #[test]
    fn monomial_contour_integrals() {
        let b = boundary_nodes(&PlanarDomain::unit_disc(), 256).unwrap();
        for m in -5i32..=5 {
            let v = b.integrate(|z| z.powi(m));
            let expect = if m == -1 { Complex64::new(0.0, TAU) } else { Complex64::new(0.0, 0.0) };
            assert!((v - expect).norm() < 1e-10, "m={m}");
        }
    }

    #[test]
    fn refinement_halves_cell_diameter() {
        for g in [
            FactorGrid::polar(c(0.0, 0.0), 1.0, 8, 16).unwrap(),
            FactorGrid::cartesian(c(0.0, 0.0), c(2.0, 1.0), 6, 5).unwrap(),
        ] {
            let fine = g.refined().unwrap();
            // sectors near the rim shrink slightly less than twofold: the
            // chord term r₀r₁Δθ² grows with r₀ → r₁
            let (h, _) = g.steps();
            let slack = if matches!(g.layout(), GridLayout::Polar { .. }) { h } else { 0.0 };
            assert!(fine.max_cell_diameter() <= (0.5 + slack) * g.max_cell_diameter() + 1e-14);
        }
    }

    #[test]
    fn locate_finds_own_cell() {
        let g = FactorGrid::polar(c(0.0, 0.0), 1.0, 6, 12).unwrap();
        for (i, &z) in g.nodes().iter().enumerate() {
            assert_eq!(g.locate(z), Some(i));
        }
        assert_eq!(g.locate(c(2.0, 0.0)), None);
        let g = FactorGrid::cartesian(c(0.0, 0.0), c(1.0, 2.0), 3, 4).unwrap();
        for (i, &z) in g.nodes().iter().enumerate() {
            assert_eq!(g.locate(z), Some(i));
        }
    }

    #[test]
    fn rectangle_boundary_is_closed_and_ccw() {
        let lo = c(0.0, 0.0);
        let hi = c(2.0, 1.0);
        let b = boundary_nodes(&PlanarDomain::rect(lo, hi).unwrap(), 24).unwrap();
        assert_eq!(b.len(), 24);
        // ∮ z̄ dz = 2i·area for a counterclockwise curve
        let v = b.integrate(|z| z.conj());
        assert!((v - Complex64::new(0.0, 4.0)).norm() < 1e-12);
    }
}
