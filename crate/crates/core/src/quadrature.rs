//! Small 1-D quadrature helpers: Gauss–Legendre rules and adaptive segment
//! integration of bounded complex integrands.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on `P_n` from the Chebyshev initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    pub fn integrate_complex<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| f(mid + half * x) * *w)
            .sum::<Complex64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub(crate) fn gl4() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(4))
}

/// Shared 10-point rule used by the cell-moment integrals.
pub(crate) fn gl10() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10))
}

/// A parametrized boundary piece `u ∈ [a, b] ↦ (ζ(u), ζ'(u))`.
pub(crate) trait Segment {
    fn point(&self, u: f64) -> Complex64;
    fn derivative(&self, u: f64) -> Complex64;
}

/// `∫_a^b g(ζ(u)) ζ'(u) du` for an integrand that is bounded but may vary
/// quickly near `target`; pieces are bisected until they are short compared
/// with their distance to `target`.
pub(crate) fn adaptive_contour<S, G>(seg: &S, a: f64, b: f64, target: Complex64, g: &G) -> Complex64
where
    S: Segment,
    G: Fn(Complex64) -> Complex64,
{
    fn rec<S: Segment, G: Fn(Complex64) -> Complex64>(
        seg: &S,
        a: f64,
        b: f64,
        target: Complex64,
        g: &G,
        depth: u32,
    ) -> Complex64 {
        let pa = seg.point(a);
        let pb = seg.point(b);
        let pm = seg.point(0.5 * (a + b));
        let len = (pa - pm).norm() + (pm - pb).norm();
        let dist = (pa - target)
            .norm()
            .min((pb - target).norm())
            .min((pm - target).norm());
        if len <= dist || depth >= 40 || len < 1e-15 {
            gl10().integrate_complex(a, b, |u| g(seg.point(u)) * seg.derivative(u))
        } else {
            let m = 0.5 * (a + b);
            rec(seg, a, m, target, g, depth + 1) + rec(seg, m, b, target, g, depth + 1)
        }
    }
    rec(seg, a, b, target, g, 0)
}

/// Double-exponential (tanh-sinh) rule on `[-1, 1]`, stored as distances
/// to the nearer endpoint so that integrable endpoint singularities can be
/// sampled without cancellation.
struct TanhSinh {
    /// `(1 − |x|, weight)` for `x ≥ 0`; negative nodes mirror them.
    half: Vec<(f64, f64)>,
    center_weight: f64,
}

fn tanh_sinh_rule() -> &'static TanhSinh {
    static RULE: OnceLock<TanhSinh> = OnceLock::new();
    RULE.get_or_init(|| {
        let h = 1.0 / 32.0;
        let mut half = Vec::new();
        let mut j = 1;
        loop {
            let t = j as f64 * h;
            let u = 0.5 * PI * t.sinh();
            let gap = 2.0 / ((2.0 * u).exp() + 1.0);
            let cu = u.cosh();
            let w = 0.5 * PI * h * t.cosh() / (cu * cu);
            if gap < 1e-300 || w < 1e-300 {
                break;
            }
            half.push((gap, w));
            j += 1;
        }
        TanhSinh {
            half,
            center_weight: 0.5 * PI * h,
        }
    })
}

/// `∫_a^b f` for integrands that may be singular (but integrable) at either
/// endpoint. `f` receives the point together with its distances to `a` and
/// `b`, which stay accurate where the point itself rounds to an endpoint.
pub(crate) fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let rule = tanh_sinh_rule();
    let half_len = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut total = rule.center_weight * f(mid, half_len, half_len);
    for &(gap, w) in &rule.half {
        let da = half_len * gap;
        if da == 0.0 {
            break;
        }
        let value_lo = f(a + da, da, 2.0 * half_len - da);
        let value_hi = f(b - da, 2.0 * half_len - da, da);
        total += w * (value_lo + value_hi);
    }
    total * half_len
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_polynomials_are_exact() {
        for n in [1, 2, 5, 10, 32] {
            let q = GaussLegendre::new(n);
            let total: f64 = q.weights.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n}");
            // exact for degree 2n - 1
            let deg = 2 * n - 1;
            let v = q.integrate(0.0, 1.0, |x| x.powi(deg as i32));
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn tanh_sinh_endpoint_singularities() {
        let v = tanh_sinh(0.0, 1.0, |_, da, _| da.powf(-0.5));
        assert!((v - 2.0).abs() < 1e-10);
        let v = tanh_sinh(0.0, 1.0, |_, da, _| da.ln());
        assert!((v + 1.0).abs() < 1e-10);
        let v = tanh_sinh(-1.0, 2.0, |x, _, _| x * x);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_integral() {
        let v = GaussLegendre::new(32).integrate(0.0, PI, f64::sin);
        assert!((v - 2.0).abs() < 1e-14);
    }
}
