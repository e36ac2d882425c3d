use airnet_web::{heat_map_view, mining_view, peak_profile, queue_curve_view};

#[test]
fn peak_profile_has_two_humps() {
    let p = peak_profile(10.0, 1.2, 48);
    assert_eq!(p.len(), 48);
    let max = p.iter().cloned().fold(0.0, f64::max);
    assert!(max > 11.0 && max <= 12.0);
    assert!(p[0] < 3.0 && p[24] < 5.0);
}

#[test]
fn queue_curve_lines_up_with_reference() {
    let v = queue_curve_view(2, 13.0, 1.1, 40).unwrap();
    assert_eq!(v.t.len(), 241);
    assert_eq!(v.engine.len(), v.oracle.len());
    assert!(v.engine.iter().chain(&v.oracle).all(|w| w.is_finite() && *w >= 0.0));
    let dev = v.engine.iter().zip(&v.oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert_eq!(dev, v.max_deviation);
    assert!(queue_curve_view(0, 13.0, 1.1, 40).is_err());
}

#[test]
fn heat_map_marks_top_cells() {
    let v = heat_map_view([1.0, 1.0, 2.0], 20, 20.0).unwrap();
    assert_eq!(v.cells.iter().filter(|c| c.3).count(), 20);
    assert!(v.cells.iter().all(|c| c.0 < v.rows && c.1 < v.cols && (0.0..=1.0).contains(&c.2)));
    assert!(!v.points.is_empty());
    assert!(heat_map_view([1.0, 1.0, 2.0], 0, 20.0).unwrap().points.is_empty());
}

#[test]
fn two_bundle_mining_finds_both_bundles() {
    let v = mining_view(11, 80.0, 5.0, 2).unwrap();
    assert_eq!(v.centroids.len(), 2);
    assert_eq!(v.tracks.len(), 42);
    assert_eq!(v.tracks.iter().filter(|t| t.0.is_none()).count(), 2);
}
