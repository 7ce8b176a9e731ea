//! Native checks of the demo exports.

use noon_web::{coupling_curve, level_scan, rabi_transfer};

#[test]
fn level_scan_shows_the_anticrossing() {
    let rows = level_scan(0.05, 0.05, std::f64::consts::FRAC_PI_6, 101).unwrap();
    assert_eq!(rows.len() % 3, 0);
    let min_gap = rows
        .chunks(3)
        .map(|r| (r[1] - r[2]).abs())
        .fold(f64::INFINITY, f64::min);
    let g_eff = coupling_curve("two_photon_a", 0.05, 0.05, 2).unwrap()[4];
    assert!(
        (min_gap - 2.0 * g_eff).abs() < 0.1 * 2.0 * g_eff,
        "{min_gap} vs {g_eff}"
    );
}

#[test]
fn rabi_transfer_reaches_the_noon_state() {
    let rows = rabi_transfer(0.05, std::f64::consts::FRAC_PI_6, 101).unwrap();
    assert_eq!(rows.len(), 4 * 101);
    let mid = &rows[4 * 50..4 * 51];
    assert!(mid[3] > 0.95, "{mid:?}");
    assert!((mid[1] - 0.5).abs() < 0.05 && (mid[2] - 0.5).abs() < 0.05);
}

#[test]
fn coupling_curve_scales_quadratically() {
    let rows = coupling_curve("two_photon_a", 0.04, 0.05, 3).unwrap();
    assert_eq!(rows[0], 0.0);
    assert_eq!(rows[1], 0.0);
    let ratio = rows[7] / rows[4];
    assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    let cubic = coupling_curve("three_photon_a", 0.04, 0.05, 3).unwrap();
    assert!((cubic[7] / cubic[4] - 8.0).abs() < 0.1);
}

#[test]
fn bad_input_is_rejected() {
    assert!(coupling_curve("four_photon", 0.1, 0.05, 3).is_err());
    assert!(level_scan(-0.1, 0.05, 0.0, 10).is_err());
    assert!(rabi_transfer(0.5, 0.0, 10).is_err());
    assert!(rabi_transfer(0.0, 0.0, 10).is_err());
}
