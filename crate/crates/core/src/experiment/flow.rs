//! Track B: discrete curves and surfaces advected by random Fourier fields.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::field::{Advector, FourierField};
use crate::mesh::{Polyline, TriMesh};
use crate::rng;
use crate::spectral::SpectralMeasure;

#[derive(Debug, Clone)]
pub struct FlowParams {
    pub spectral: SpectralMeasure,
    pub features: usize,
    pub dt: f64,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Number of observation times after `t = 0`.
    pub observations: usize,
}

/// Per-replica observables on the observation grid.
#[derive(Debug, Clone)]
pub struct FlowEnsemble {
    pub names: Vec<&'static str>,
    /// Observation times, without `t = 0`.
    pub t: Vec<f64>,
    pub initial: Vec<f64>,
    /// `values[replica][time][observable]`.
    pub values: Vec<Vec<Vec<f64>>>,
    pub dt_used: f64,
}

impl FlowEnsemble {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| *n == name)
    }

    /// Replica matrix `[replica][time]` of one observable.
    pub fn column(&self, j: usize) -> Vec<Vec<f64>> {
        self.values.iter().map(|r| r.iter().map(|v| v[j]).collect()).collect()
    }
}

/// Seed of the field realization owned by replica `r`.
pub fn replica_field_seed(seed: u64, r: u64) -> u64 {
    rng::substream(seed, r, 2).random()
}

fn schedule(p: &FlowParams) -> Result<(usize, f64)> {
    if p.replicas < 2 {
        return invalid("at least two replicas are required");
    }
    if !(p.dt > 0.0 && p.horizon > 0.0) {
        return invalid("dt and horizon must be positive");
    }
    if p.observations < 5 {
        return invalid("at least 5 observation times are required");
    }
    p.spectral.validate()?;
    let per_obs = ((p.horizon / (p.observations as f64 * p.dt)).round() as usize).max(1);
    Ok((per_obs, p.horizon / (p.observations * per_obs) as f64))
}

fn simulate<const N: usize, F>(points: &[[f64; N]], p: &FlowParams, observe: F) -> Result<FlowEnsemble>
where
    F: Fn(&[[f64; N]]) -> Vec<f64> + Sync,
{
    let (per_obs, dt) = schedule(p)?;
    // surface the field error before spawning replicas
    FourierField::sample(N, p.features, &p.spectral, 0)?;
    let initial = observe(points);
    let values = rng::map_replicas(p.replicas, |r| {
        let mut field = FourierField::sample(N, p.features, &p.spectral, replica_field_seed(p.seed, r)).unwrap();
        let mut adv = Advector::<N>::new(&field, points);
        let mut out = Vec::with_capacity(p.observations);
        for _ in 0..p.observations {
            for _ in 0..per_obs {
                adv.step(&mut field, dt);
            }
            out.push(observe(&adv.positions()));
        }
        out
    });
    Ok(FlowEnsemble {
        names: Vec::new(),
        t: (1..=p.observations).map(|g| (g * per_obs) as f64 * dt).collect(),
        initial,
        values,
        dt_used: dt,
    })
}

/// Advects the vertices of a closed curve and records `length` and, for
/// planar curves, the signed enclosed `area`.
pub fn curve_flow(c: &Polyline, p: &FlowParams) -> Result<FlowEnsemble> {
    let mut e = if c.dim() == 2 {
        let pts: Vec<[f64; 2]> = c.points().iter().map(|q| [q[0], q[1]]).collect();
        simulate(&pts, p, |x| {
            let m = x.len();
            let (mut len, mut area) = (0.0, 0.0);
            for i in 0..m {
                let (a, b) = (x[i], x[(i + 1) % m]);
                len += (b[0] - a[0]).hypot(b[1] - a[1]);
                area += a[0] * b[1] - a[1] * b[0];
            }
            vec![len, 0.5 * area]
        })?
    } else {
        simulate(c.points(), p, |x| {
            let m = x.len();
            let len = (0..m)
                .map(|i| {
                    let (a, b) = (x[i], x[(i + 1) % m]);
                    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt()
                })
                .sum();
            vec![len]
        })?
    };
    e.names = if c.dim() == 2 { vec!["length", "area"] } else { vec!["length"] };
    Ok(e)
}

/// Advects the vertices of a closed mesh and records `area`, `h_int`,
/// `chi` (angle defect over `2π`) and the enclosed `volume`.
pub fn surface_flow(m: &TriMesh, p: &FlowParams) -> Result<FlowEnsemble> {
    let mut e = simulate(m.vertices(), p, |x| {
        let mut s = m.clone();
        s.set_vertices(x.to_vec());
        vec![s.area(), s.integral_mean_curvature(), s.angle_defect_total() / std::f64::consts::TAU, s.signed_volume()]
    })?;
    e.names = vec!["area", "h_int", "chi", "volume"];
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures;

    fn params(replicas: usize) -> FlowParams {
        FlowParams {
            spectral: SpectralMeasure::point(1.0),
            features: 32,
            dt: 1e-2,
            horizon: 0.2,
            replicas,
            seed: 5,
            observations: 5,
        }
    }

    #[test]
    fn surface_observables_start_at_mesh_values() {
        let m = fixtures::icosphere(1, 1.0);
        let e = surface_flow(&m, &params(3)).unwrap();
        assert_eq!(e.initial[0], m.area());
        assert_eq!(e.initial[1], m.integral_mean_curvature());
        assert_eq!(e.values.len(), 3);
        assert_eq!(e.t.len(), 5);
        assert!((e.t[4] - 0.2).abs() < 1e-12);
        for r in &e.values {
            for v in r {
                assert!((v[2] - 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn planar_flow_nearly_preserves_area() {
        let c = fixtures::regular_polygon(256, 1.0, 2).unwrap();
        let e = curve_flow(&c, &params(4)).unwrap();
        let a0 = e.initial[1];
        for r in &e.values {
            assert!((r[4][1] / a0 - 1.0).abs() < 1e-3);
            assert!(r[4][0] != e.initial[0]);
        }
    }

    #[test]
    fn replicas_are_reproducible_and_distinct() {
        let c = fixtures::regular_polygon(64, 1.0, 3).unwrap();
        let a = curve_flow(&c, &params(3)).unwrap();
        let b = curve_flow(&c, &params(3)).unwrap();
        assert_eq!(a.values, b.values);
        assert!(a.values[0] != a.values[1]);
    }

    #[test]
    fn rejects_bad_schedule() {
        let c = fixtures::regular_polygon(64, 1.0, 2).unwrap();
        let mut p = params(3);
        p.observations = 2;
        assert!(curve_flow(&c, &p).is_err());
        p.observations = 5;
        p.features = 0;
        assert!(curve_flow(&c, &p).is_err());
    }
}
