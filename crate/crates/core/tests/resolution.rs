mod common;

use axiflow::singularity::{analyze, AnalysisSettings};
use axiflow::Scheme;
use common::NECK;

/// The tail rate of the neck is a property of the flow, not of the grid.
#[test]
fn neck_rate_is_stable_under_refinement() {
    let rates: Vec<f64> = [201, 401, 801]
        .iter()
        .map(|&n| {
            let traj = common::run(&NECK, (0.0, 1.0), n, Scheme::SemiImplicit, None);
            analyze(&traj, &AnalysisSettings::default()).unwrap().rate_tail.expect("tail rate")
        })
        .collect();
    let (lo, hi) = rates.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    assert!(hi - lo <= 0.2 * lo, "tail rates {rates:?}");
}
