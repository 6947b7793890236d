use dolbeault_core::domain::ProductDomain;
use dolbeault_core::forms::test_form;
use dolbeault_core::homotopy::{homotopy_sweep, strictly_decreasing, NAMED_FORMS};

#[test]
fn named_forms_converge() {
    let p = ProductDomain::unit_polydisc(2).unwrap();
    for name in NAMED_FORMS {
        let form = test_form(name, 2).unwrap();
        let levels = homotopy_sweep(&p, &form, &[16, 32, 64]).unwrap();
        let scale = levels[0].homotopy.scale;
        let res: Vec<f64> = levels.iter().map(|l| l.homotopy.residual).collect();
        let single: Vec<f64> = levels.iter().map(|l| l.lemma35.residual).collect();
        assert!(strictly_decreasing(&res, scale), "{name}: {res:?}");
        assert!(strictly_decreasing(&single, scale), "{name}: {single:?}");
        let last = levels.last().unwrap();
        assert!(last.homotopy.residual <= 1e-2, "{name}: {res:?}");
        assert!(last.lemma35.residual <= 1e-2, "{name}: {single:?}");
        for l in &levels {
            assert!(l.homotopy.degrees_ok);
            assert!(l.homotopy.descents_passed(), "{name}: {:?}", l.homotopy.descents);
            let gap = (l.homotopy.residual - l.homotopy.residual_chain_form).abs();
            assert!(gap <= 1e-3, "{name}: chain form differs by {gap}");
        }
    }
}

#[test]
fn calibration_form_meets_single_axis_bound() {
    let p = ProductDomain::unit_polydisc(2).unwrap();
    let form = test_form("conjz1_dz1", 2).unwrap();
    let levels = homotopy_sweep(&p, &form, &[32, 64]).unwrap();
    assert!(levels[1].lemma35.residual <= 5e-3, "{:?}", levels[1].lemma35);
    assert!(levels[1].lemma35.residual < levels[0].lemma35.residual);
}
