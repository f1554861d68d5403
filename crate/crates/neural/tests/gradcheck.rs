use hrrp_neural::gradcheck::{run_suite, Precision};

fn assert_suite(precision: Precision) {
    let reports = run_suite(precision).unwrap();
    assert_eq!(reports.len(), 15);
    for r in &reports {
        println!("{precision:?} {:<24} max rel err {:.3e} over {} ({})", r.name, r.max_rel_err, r.checked, r.worst);
    }
    for r in &reports {
        assert!(r.passes(precision), "{} failed: {:.3e} at {}", r.name, r.max_rel_err, r.worst);
    }
}

#[test]
fn every_layer_passes_in_f64() {
    assert_suite(Precision::F64);
}

#[test]
fn every_layer_passes_in_f32() {
    assert_suite(Precision::F32);
}
