use curvflow::experiment::flow::{curve_flow, surface_flow, FlowParams};
use curvflow::mesh::fixtures;
use curvflow::spectral::SpectralMeasure;
use curvflow::stats;

fn params() -> FlowParams {
    FlowParams {
        spectral: SpectralMeasure::point(1.0),
        features: 64,
        dt: 5e-3,
        horizon: 0.5,
        replicas: 100,
        seed: 12,
        observations: 10,
    }
}

#[test]
fn enclosed_volume_drift_stays_small() {
    let m = fixtures::icosphere(3, 1.0);
    let e = surface_flow(&m, &params()).unwrap();
    let j = e.index("volume").unwrap();
    let s = stats::ensemble(&e.t, &e.column(j));
    for (t, v) in s.t.iter().zip(&s.mean) {
        let drift = (v / e.initial[j] - 1.0).abs();
        assert!(drift <= 0.02, "t = {t}: drift {drift}");
    }
    let chi = e.index("chi").unwrap();
    assert!(e.values.iter().flatten().all(|v| (v[chi] - 2.0).abs() < 1e-9));
}

#[test]
fn surface_area_and_curve_length_grow() {
    let m = fixtures::icosphere(2, 1.0);
    let e = surface_flow(&m, &params()).unwrap();
    let s = stats::ensemble(&e.t, &e.column(0));
    assert!(s.mean[s.mean.len() - 1] > e.initial[0]);
    let c = fixtures::regular_polygon(128, 1.0, 2).unwrap();
    let e = curve_flow(&c, &params()).unwrap();
    let s = stats::ensemble(&e.t, &e.column(0));
    assert!(s.mean[s.mean.len() - 1] > e.initial[0]);
}
