use tomoforge_bench::instance;

#[test]
fn instances_are_reproducible_and_consistent() {
    let a = instance(3, 16, 11);
    let b = instance(3, 16, 11);
    assert_eq!(a.plan.measured(), b.plan.measured());
    assert_eq!(a.f, b.f);
    assert_eq!(a.measured.len(), 16);
    assert!(a.f.iter().sum::<f64>() < 1.0);
}
