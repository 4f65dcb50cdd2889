//! Central finite differences against the analytic gradient of the full
//! objective, for every parameter group.

mod common;

use common::fd;
use infooirt::knowledge::KnowledgeConfig;
use infooirt::trainer::ObjectiveKind;

#[test]
fn info_objective_gradients_match_differences() {
    let errs = fd::check(ObjectiveKind::InfoOirt, fd::info_config(), 0.7);
    assert!(errs.iter().any(|(n, _)| n == "knowledge"));
    assert!(errs.iter().any(|(n, _)| n.starts_with("q.")));
    assert!(errs.iter().any(|(n, _)| n.starts_with("align")));
    for (name, e) in &errs {
        assert!(*e <= 1e-3, "{name}: relative error {e}");
    }
}

#[test]
fn oirt_objective_gradients_match_differences() {
    for (name, e) in fd::check(ObjectiveKind::Oirt, KnowledgeConfig::oirt(3), 0.0) {
        assert!(e <= 1e-3, "{name}: relative error {e}");
    }
}
