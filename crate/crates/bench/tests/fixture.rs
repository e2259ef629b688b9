use seamiles_bench::Fixture;

#[test]
fn fixture_is_deterministic_and_nonempty() {
    let (a, b) = (Fixture::new(), Fixture::new());
    assert_eq!(a.lines, b.lines);
    assert!(a.lines.len() > 10_000);
    let tracks = a.tracks();
    assert_eq!(tracks.len(), a.registry.included_count());
}
