use curvflow::rng;
use curvflow::stats::fit_bootstrap;
use rand::Rng;
use rand_distr::StandardNormal;

/// Geometric Brownian paths with `E X(t) = exp(rate t)`.
fn lognormal_ensemble(replicas: usize, t: &[f64], rate: f64, sigma: f64, seed: u64) -> Vec<Vec<f64>> {
    (0..replicas)
        .map(|r| {
            let mut s = rng::substream(seed, r as u64, 0);
            let mut b = 0.0;
            let mut prev = 0.0;
            t.iter()
                .map(|&ti| {
                    b += (ti - prev).sqrt() * s.sample::<f64, _>(StandardNormal);
                    prev = ti;
                    (sigma * b - 0.5 * sigma * sigma * ti + rate * ti).exp()
                })
                .collect()
        })
        .collect()
}

#[test]
fn percentile_interval_covers_true_rate() {
    let t: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
    let mut covered = 0;
    for rep in 0..100 {
        let v = lognormal_ensemble(10_000, &t, 0.25, 0.5, 7_000 + rep);
        let f = fit_bootstrap(&t, &v, 1000, 0.95, rep).unwrap();
        covered += f.contains(0.25) as usize;
    }
    assert!(covered >= 93, "coverage {covered}/100");
}
