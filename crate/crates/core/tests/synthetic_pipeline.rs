//! A small end-to-end run that must learn something; the full-size runs live
//! in the acceptance target.
mod common;

use common::{regression_scenario, single_threaded};

#[test]
fn tiny_regression_learns_and_is_reproducible() {
    let a = regression_scenario(2, 64, 8, 6, 20);
    assert!(a.statistic > 0.5, "spearman {}", a.statistic);
    let b = single_threaded(|| regression_scenario(2, 64, 8, 6, 20));
    assert_eq!(a.predictions, b.predictions);
}
