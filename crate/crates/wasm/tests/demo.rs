use cloudprice_wasm::{corner, curve, two_lengths};

#[test]
fn curve_brackets_the_flat_optimum() {
    let c = curve(&[1, 2], &[0.5, 0.5], 0.0, 1.0, 101, 1.0).unwrap();
    assert_eq!(c.prices().len(), 101);
    assert!((c.welfare()[0] - 0.5).abs() < 1e-12);
    assert!((c.flat_price() - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-6);
    assert!((c.flat_value() - (9.0 - 6.0 * 2f64.sqrt())).abs() < 1e-9);
    assert!(c.welfare().iter().all(|&w| w <= c.flat_value() + 1e-12));
    assert!((c.multi_value() - (6.0 - 30f64.sqrt())).abs() < 1e-9);
    assert!(c.multi_value() >= c.flat_value());
}

#[test]
fn revenue_curve_peaks_near_flat_optimum() {
    let c = curve(&[1, 2], &[0.5, 0.5], 0.0, 1.0, 1001, 0.0).unwrap();
    let best = c.revenue().iter().cloned().fold(f64::MIN, f64::max);
    assert!(best <= c.flat_value() + 1e-12 && best >= c.flat_value() - 1e-5);
}

#[test]
fn two_length_ratio_matches_six_sevenths() {
    let r = two_lengths(1, 2, 0.5, 0.5).unwrap();
    assert!((r[0] - 6.0 / 7.0).abs() < 1e-12);
    assert!((r[1] - 6.0 / 7.0).abs() < 1e-3);
}

#[test]
fn corner_of_thirds() {
    let c = corner(&[2, 3, 6], &[1.0 / 3.0; 3]).unwrap();
    assert!((c[0] - 44.0 / 49.0).abs() < 1e-12);
    assert_eq!(&c[1..], &[0.0, 1.0, 1.0]);
}

#[test]
fn bad_input_is_an_error_string() {
    assert!(curve(&[2, 1], &[0.5, 0.5], 0.0, 1.0, 10, 1.0).is_err());
    assert!(two_lengths(2, 2, 0.5, 0.5).is_err());
    assert!(curve(&[1], &[0.5], 0.0, 1.0, 1, 1.0).is_err());
}
