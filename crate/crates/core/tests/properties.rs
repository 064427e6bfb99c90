mod support;

use support::props;

#[test]
fn rollup_threshold_monotonicity() {
    assert!(props::threshold_monotonicity().unwrap() >= props::CASES);
}

#[test]
fn prescreen_rule_addition_monotonicity() {
    assert!(props::rule_addition_monotonicity().unwrap() >= props::CASES);
}

#[test]
fn metrics_scale_invariance_and_f1_betweenness() {
    assert!(props::metrics_scaling().unwrap() >= props::CASES);
}

#[test]
fn budget_fit_postcondition() {
    assert!(props::budget_fit_postcondition().unwrap() >= props::CASES);
}

#[test]
fn rate_limiter_window_bound() {
    assert!(props::rate_limiter_window().unwrap() >= props::CASES);
}
