use dolbeault_core::analysis::{named_witness_pairs, witness_suite};
use dolbeault_core::weights::dbar_weight_decomposition;

#[test]
fn named_pairs_cover_every_branch() {
    let pairs = named_witness_pairs();
    let mut k1: Vec<(bool, i64)> = pairs
        .iter()
        .map(|&(p, s)| (p.is_infinite(), dbar_weight_decomposition(p, s).1))
        .collect();
    k1.sort();
    k1.dedup();
    assert_eq!(k1, vec![(false, 0), (false, 1), (false, 2), (true, 1), (true, 2)]);
    let reports: Vec<_> = pairs.iter().map(|&(p, s)| witness_suite(p, s).unwrap()).collect();
    assert!(reports.iter().any(|r| r.boundary_case));
    for r in &reports {
        for c in &r.checks {
            assert!(c.passed, "p={} s={}: {c:?}", r.p, r.s);
        }
    }
}
