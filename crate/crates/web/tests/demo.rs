use qbohm_web::{phase_map, portrait, profile, Singularity};

#[test]
fn profile_reports_barrier_side_and_a_tight_fit() {
    let above = profile(1, 3.0, 8.0, 20).unwrap();
    assert!(above.above_barrier && above.residual < 1e-6);
    assert_eq!(above.tau.len(), above.g.len());
    assert_eq!(above.g[0], 1.0);
    let below = profile(1, 1.0, 8.0, 20).unwrap();
    assert!(!below.above_barrier);
    assert!(profile(1, -1.0, 8.0, 20).is_err());
}

#[test]
fn portrait_orbits_close() {
    let p = portrait(1, 3.0, 3.0, 64, &[0.5, 2.0]).unwrap();
    assert_eq!(p.density.len(), 64 * 64);
    assert!((p.density.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-12);
    for orbit in &p.orbits {
        let n = orbit.len();
        let (x0, y0, x1, y1) = (orbit[0], orbit[1], orbit[n - 2], orbit[n - 1]);
        assert!((x0 - x1).hypot(y0 - y1) < 1e-6);
    }
}

#[test]
fn phase_map_finds_the_placed_windings() {
    let sources = [
        Singularity { x: -1.03, y: 0.21, charge: 1 },
        Singularity { x: 1.07, y: -0.13, charge: -1 },
        Singularity { x: 0.05, y: 1.49, charge: 2 },
    ];
    let m = phase_map(&sources, 4.0, 128).unwrap();
    let mut w: Vec<i64> = m.vortices.iter().map(|v| v[2] as i64).collect();
    w.sort();
    assert_eq!(w, vec![-1, 1, 2]);
    for s in &sources {
        assert!(m.vortices.iter().any(|v| (v[0] - s.x).hypot(v[1] - s.y) < 0.1));
    }
}
