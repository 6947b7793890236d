use dolbeault_core::domain::{PlanarDomain, ProductDomain};
use dolbeault_core::forms::{Form0q, MultiIndex};
use dolbeault_core::homotopy::AxisOperators;
use dolbeault_core::solver::{solve, verify_solution, SolveConfig, WeightMode};
use dolbeault_core::weights::{LebesgueExponent, WeightVector};
use num_complex::Complex64;
use num_rational::Rational64;

#[test]
fn closed_form_on_the_bidisc() {
    let half = PlanarDomain::disc(Complex64::new(0.0, 0.0), 0.5).unwrap();
    let cfg = SolveConfig::new(
        ProductDomain::unit_polydisc(2).unwrap(),
        ProductDomain::new(vec![half; 2]).unwrap(),
        LebesgueExponent::integer(2).unwrap(),
        WeightVector::uniform(2, Rational64::from_integer(0)).unwrap(),
        WeightMode::Full,
        72,
    )
    .unwrap();
    let grid = cfg.grid().unwrap();
    let ops = AxisOperators::new(&grid);
    // z̄₂ dz̄₁ + z̄₁ dz̄₂ = ∂̄(z̄₁ z̄₂)
    let omega = Form0q::from_fn(&grid, 1, |j, z| {
        if j == MultiIndex::single(0) {
            z[1].conj()
        } else {
            z[0].conj()
        }
    })
    .unwrap();
    let (eta, trace) = solve(&ops, &omega, &cfg).unwrap();
    assert_eq!(trace.stages.iter().map(|s| s.j).collect::<Vec<_>>(), vec![2, 1]);
    let v = verify_solution(&eta, &omega, &trace, &cfg).unwrap();
    assert!(v.residual_passed(), "{v:?}");
    assert!(v.trace_passed(), "{v:?}");
    assert!(v.ratio.unwrap().is_finite());
}
