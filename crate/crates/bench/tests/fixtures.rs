use semimdim_bench::{circle, doubling_tripling, rotations, scattered};

#[test]
fn fixtures_build() {
    assert_eq!(circle().dim(), 1);
    assert_eq!(doubling_tripling().p(), 2);
    assert_eq!(rotations().p(), 2);
}

#[test]
fn scattered_points_are_seeded() {
    let a = scattered(50, 7);
    let b = scattered(50, 7);
    assert_eq!(a.len(), 50);
    assert_ne!(a.point(0), scattered(50, 8).point(0));
    assert!((0..50).all(|i| a.point(i) == b.point(i)));
}
