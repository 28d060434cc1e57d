use modgff_bench::{box_lattice, observed};

#[test]
fn fixtures_are_reproducible() {
    let l = box_lattice(4);
    assert_eq!(l.vertex_count(), 81);
    let (phi1, a1) = observed(&l, 0.5, 7);
    let (phi2, a2) = observed(&l, 0.5, 7);
    assert_eq!(phi1, phi2);
    assert_eq!(a1, a2);
    assert!(a1.a.iter().all(|x| (0.0..1.0).contains(x)));
}
