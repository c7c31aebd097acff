//! Track A: the second-order jet of the flow at one material point.
//!
//! The pushed tangent vectors obey `dV_a = dW V_a` and the pushed second
//! derivatives `dZ_ab = dW Z_ab + dB(V_a, V_b)`, driven by the constant
//! covariance noise of [`crate::spectral`]. The shape form is read off as
//! `h_ab = ⟨Z_ab, ν⟩` with `ν` the unit normal of the frame.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::exterior::{Frame, ShapeForm, MAX_GRAM_CONDITION};
use crate::linalg;
use crate::rng;
use crate::spectral::{b_covariance, w_covariance, BCovariance, SpectralMeasure, WCovariance};
use crate::stats::{self, Series};

/// Initial hypersurface germ at the chosen point.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    UnitSphere(usize),
    /// Semi-axes `a_1..a_n`; the point is the pole on the last axis.
    Ellipsoid(Vec<f64>),
    /// Principal curvatures in `R^{len+1}`.
    CurvatureDiag(Vec<f64>),
}

impl Preset {
    pub fn dimension(&self) -> usize {
        match self {
            Preset::UnitSphere(n) => *n,
            Preset::Ellipsoid(a) => a.len(),
            Preset::CurvatureDiag(k) => k.len() + 1,
        }
    }

    fn curvatures(&self) -> Result<Vec<f64>> {
        match self {
            Preset::UnitSphere(n) => {
                if *n < 2 {
                    return invalid("sphere dimension must be at least 2");
                }
                Ok(vec![1.0; n - 1])
            }
            Preset::Ellipsoid(a) => {
                if a.len() < 2 {
                    return invalid("ellipsoid needs at least 2 semi-axes");
                }
                if a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return invalid("ellipsoid semi-axes must be positive");
                }
                let an = a[a.len() - 1];
                Ok(a[..a.len() - 1].iter().map(|ai| an / (ai * ai)).collect())
            }
            Preset::CurvatureDiag(k) => {
                if k.is_empty() {
                    return invalid("need at least one principal curvature");
                }
                if k.iter().any(|x| !x.is_finite()) {
                    return invalid("principal curvatures must be finite");
                }
                Ok(k.clone())
            }
        }
    }
}

/// Index of the unordered pair `a <= b` among `m` slots.
#[inline]
pub fn pair_index(m: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * (2 * m - a + 1) / 2 + (b - a)
}

/// Jet of the flow at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct JetState {
    pub n: usize,
    /// Column `a` of `V` at `v[a n .. (a+1) n]`.
    pub v: Vec<f64>,
    /// `Z_ab` for `a <= b` at `z[p n .. (p+1) n]`, `p = pair_index(a, b)`.
    pub z: Vec<f64>,
    pub nu: Vec<f64>,
}

impl JetState {
    /// Orthonormal frame at the point, `Z_ab = h_ab ν`, inward normal `ν = -e_n`.
    pub fn init(preset: &Preset) -> Result<Self> {
        let kappa = preset.curvatures()?;
        let m = kappa.len();
        let n = m + 1;
        let mut v = vec![0.0; n * m];
        for a in 0..m {
            v[a * n + a] = 1.0;
        }
        let mut nu = vec![0.0; n];
        nu[n - 1] = -1.0;
        let mut z = vec![0.0; n * m * (m + 1) / 2];
        for (a, &k) in kappa.iter().enumerate() {
            z[pair_index(m, a, a) * n + n - 1] = -k;
        }
        Ok(JetState { n, v, z, nu })
    }

    pub fn m(&self) -> usize {
        self.n - 1
    }

    pub fn frame(&self) -> Frame {
        Frame { n: self.n, vectors: self.v.chunks(self.n).map(|c| c.to_vec()).collect() }
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let (n, m) = (self.n, self.m());
        DMatrix::from_fn(m, m, |a, b| linalg::dot(&self.v[a * n..(a + 1) * n], &self.v[b * n..(b + 1) * n]))
    }

    pub fn shape(&self) -> ShapeForm {
        let (n, m) = (self.n, self.m());
        let h = DMatrix::from_fn(m, m, |a, b| {
            let p = pair_index(m, a, b);
            linalg::dot(&self.z[p * n..(p + 1) * n], &self.nu)
        });
        ShapeForm { h }
    }

    /// Recompute `ν` from `V`, keeping the side closest to the previous normal.
    pub fn refresh_normal(&mut self) {
        let mut nu = linalg::cofactor_normal(&self.v, self.n);
        let s = linalg::norm(&nu);
        let sign = if linalg::dot(&nu, &self.nu) < 0.0 { -1.0 } else { 1.0 };
        for x in nu.iter_mut() {
            *x *= sign / s;
        }
        self.nu = nu;
    }

    /// Errors with [`Error::DegenerateFrame`] when the Gram matrix is too
    /// ill-conditioned. Uses the bound `cond <= tr^m / det` before solving.
    pub fn check_conditioning(&self) -> Result<()> {
        let (n, m) = (self.n, self.m());
        let mut buf = [0.0; 64];
        let mut heap = Vec::new();
        let g: &mut [f64] = if m * m <= buf.len() {
            &mut buf[..m * m]
        } else {
            heap.resize(m * m, 0.0);
            &mut heap
        };
        let mut trace = 0.0;
        for a in 0..m {
            for b in 0..m {
                g[a * m + b] = linalg::dot(&self.v[a * n..(a + 1) * n], &self.v[b * n..(b + 1) * n]);
            }
            trace += g[a * m + a];
        }
        let det = linalg::det(g, m);
        if !det.is_finite() || det <= 0.0 {
            return Err(Error::DegenerateFrame { condition: f64::INFINITY });
        }
        if trace.powi(m as i32) / det <= MAX_GRAM_CONDITION {
            return Ok(());
        }
        let c = linalg::spd_condition(&self.gram());
        if c <= MAX_GRAM_CONDITION {
            Ok(())
        } else {
            Err(Error::DegenerateFrame { condition: c })
        }
    }

    pub fn observables(&self) -> Result<Observables> {
        self.check_conditioning()?;
        let g = self.gram();
        let alpha = g.determinant().max(0.0).sqrt();
        let shape = self.shape();
        let ev = linalg::generalized_sym_eigenvalues(&g, &shape.h)?;
        let traces = linalg::elementary_symmetric(ev.as_slice());
        let products = traces.iter().map(|t| t * alpha).collect();
        Ok(Observables { alpha_norm: alpha, nu: self.nu.clone(), h: shape, traces, products })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub alpha_norm: f64,
    pub nu: Vec<f64>,
    pub h: ShapeForm,
    /// `Tr S⁽ᵏ⁾` for `k = 0..=n-1`.
    pub traces: Vec<f64>,
    /// `Tr S⁽ᵏ⁾ ‖α‖`.
    pub products: Vec<f64>,
}

/// Scalar functionals whose expected growth is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    AlphaNorm,
    AlphaNormSq,
    /// `⟨ξ, ξ⟩` for `ξ = u_1 ∧ ... ∧ u_k`.
    KFrameInner(usize),
    /// `Tr S⁽ᵏ⁾ ‖α‖`.
    TraceProduct(usize),
}

impl Functional {
    pub fn needs_second_order(&self) -> bool {
        matches!(self, Functional::TraceProduct(_))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Functional::KFrameInner(k) if k == 0 || k > n - 1 => invalid(format!("k-frame grade {k} outside 1..={}", n - 1)),
            Functional::TraceProduct(k) if k > n - 1 => invalid(format!("trace grade {k} outside 0..={}", n - 1)),
            _ => Ok(()),
        }
    }

    /// Closed-form expected growth rate.
    pub fn predicted_rate(&self, n: usize, mu2: f64) -> Result<f64> {
        use crate::experiment::predicted::{predicted_rate, RateKind};
        let kind = match *self {
            Functional::AlphaNorm => RateKind::Alpha { n },
            Functional::AlphaNormSq => RateKind::AlphaSq { n },
            Functional::KFrameInner(k) => RateKind::KFrame { n, k },
            Functional::TraceProduct(k) => RateKind::Lk { n, k },
        };
        predicted_rate(kind, mu2)
    }

    pub fn evaluate(&self, s: &JetState) -> Result<f64> {
        let n = s.n;
        let gram_det = |k: usize| {
            let mut g = vec![0.0; k * k];
            for a in 0..k {
                for b in 0..k {
                    g[a * k + b] = linalg::dot(&s.v[a * n..(a + 1) * n], &s.v[b * n..(b + 1) * n]);
                }
            }
            linalg::det(&g, k)
        };
        let x = match *self {
            Functional::AlphaNorm => gram_det(n - 1).max(0.0).sqrt(),
            Functional::AlphaNormSq => gram_det(n - 1),
            Functional::KFrameInner(k) => gram_det(k),
            Functional::TraceProduct(k) => s.observables()?.products[k],
        };
        if !x.is_finite() {
            return Err(Error::DegenerateFrame { condition: f64::INFINITY });
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Stratonovich predictor-corrector (default).
    Heun,
    /// Explicit Itô Euler without correction terms.
    ItoEuler,
}

/// Reusable stepping machinery with preallocated buffers.
#[derive(Debug, Clone)]
pub struct JetStepper {
    pub wcov: WCovariance,
    /// `None` switches the Hessian noise off.
    pub bcov: Option<BCovariance>,
    pub integrator: Integrator,
    /// Whether `Z` is advanced at all; first-order functionals skip it.
    pub track_z: bool,
    dw: Vec<f64>,
    db: Vec<f64>,
    k1v: Vec<f64>,
    k1z: Vec<f64>,
    k2v: Vec<f64>,
    k2z: Vec<f64>,
    pv: Vec<f64>,
    pz: Vec<f64>,
}

impl JetStepper {
    pub fn new(wcov: WCovariance, bcov: Option<BCovariance>, integrator: Integrator) -> Self {
        let n = wcov.n;
        let m = n - 1;
        let zl = n * m * (m + 1) / 2;
        JetStepper {
            dw: vec![0.0; n * n],
            db: vec![0.0; n * n * n],
            k1v: vec![0.0; n * m],
            k1z: vec![0.0; zl],
            k2v: vec![0.0; n * m],
            k2z: vec![0.0; zl],
            pv: vec![0.0; n * m],
            pz: vec![0.0; zl],
            wcov,
            bcov,
            integrator,
            track_z: true,
        }
    }

    pub fn for_spectral(n: usize, f: &SpectralMeasure, second_order: bool, integrator: Integrator) -> Result<Self> {
        let w = w_covariance(n, f.mu2())?;
        let b = if second_order { Some(b_covariance(n, f.mu4())?) } else { None };
        let mut st = Self::new(w, b, integrator);
        st.track_z = second_order;
        Ok(st)
    }

    /// Draw `ΔW` from `w_rng` and `ΔB` from the independent `b_rng`, then step.
    pub fn step<R: Rng + ?Sized>(&mut self, s: &mut JetState, dt: f64, w_rng: &mut R, b_rng: &mut R) -> Result<()> {
        let mut dw = std::mem::take(&mut self.dw);
        let mut db = std::mem::take(&mut self.db);
        self.wcov.sample_into(dt, w_rng, &mut dw);
        match &self.bcov {
            Some(b) => b.sample_into(dt, b_rng, &mut db),
            None => db.fill(0.0),
        }
        let r = self.step_with(s, &dw, &db);
        self.dw = dw;
        self.db = db;
        r
    }

    /// Advance with given increments (`dw` row-major `n x n`, `db` of length `n³`).
    pub fn step_with(&mut self, s: &mut JetState, dw: &[f64], db: &[f64]) -> Result<()> {
        let second = self.track_z;
        let (n, m) = (s.n, s.m());
        rhs(n, m, dw, db, &s.v, &s.z, &mut self.k1v, &mut self.k1z, second);
        match self.integrator {
            Integrator::ItoEuler => {
                axpy(&mut s.v, 1.0, &self.k1v);
                if second {
                    axpy(&mut s.z, 1.0, &self.k1z);
                }
            }
            Integrator::Heun => {
                self.pv.copy_from_slice(&s.v);
                axpy(&mut self.pv, 1.0, &self.k1v);
                if second {
                    self.pz.copy_from_slice(&s.z);
                    axpy(&mut self.pz, 1.0, &self.k1z);
                }
                rhs(n, m, dw, db, &self.pv, &self.pz, &mut self.k2v, &mut self.k2z, second);
                for i in 0..s.v.len() {
                    s.v[i] += 0.5 * (self.k1v[i] + self.k2v[i]);
                }
                if second {
                    for i in 0..s.z.len() {
                        s.z[i] += 0.5 * (self.k1z[i] + self.k2z[i]);
                    }
                }
            }
        }
        if s.v.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateFrame { condition: f64::INFINITY });
        }
        s.refresh_normal();
        s.check_conditioning()
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Right-hand side of the jet equations for one increment.
#[allow(clippy::too_many_arguments)]
fn rhs(n: usize, m: usize, dw: &[f64], db: &[f64], v: &[f64], z: &[f64], ov: &mut [f64], oz: &mut [f64], second: bool) {
    for a in 0..m {
        let col = &v[a * n..(a + 1) * n];
        for i in 0..n {
            ov[a * n + i] = linalg::dot(&dw[i * n..(i + 1) * n], col);
        }
    }
    if !second {
        return;
    }
    let mut p = 0;
    for a in 0..m {
        for b in a..m {
            let zc = &z[p * n..(p + 1) * n];
            let va = &v[a * n..(a + 1) * n];
            let vb = &v[b * n..(b + 1) * n];
            for i in 0..n {
                let mut acc = linalg::dot(&dw[i * n..(i + 1) * n], zc);
                let bi = &db[i * n * n..(i + 1) * n * n];
                for j in 0..n {
                    acc += va[j] * linalg::dot(&bi[j * n..(j + 1) * n], vb);
                }
                oz[p * n + i] = acc;
            }
            p += 1;
        }
    }
}

/// Exact Itô drift `½ Σ_c D²f[A_c, A_c]` of a functional at a state, summed
/// over the columns `A_c` of the noise factors. Second derivatives by central
/// differences of step `eps`.
pub fn generator_drift(s: &JetState, f: Functional, stepper: &JetStepper, eps: f64) -> Result<f64> {
    let n = s.n;
    let f0 = f.evaluate(s)?;
    let mut scratch = stepper.clone();
    scratch.integrator = Integrator::ItoEuler;
    let mut total = 0.0;
    let mut dw = vec![0.0; n * n];
    let zero_b = vec![0.0; n * n * n];
    let mut second = |dw: &[f64], db: &[f64]| -> Result<f64> {
        let mut up = s.clone();
        let mut dn = s.clone();
        let dwp: Vec<f64> = dw.iter().map(|x| eps * x).collect();
        let dbp: Vec<f64> = db.iter().map(|x| eps * x).collect();
        let dwm: Vec<f64> = dwp.iter().map(|x| -x).collect();
        let dbm: Vec<f64> = dbp.iter().map(|x| -x).collect();
        scratch.step_with(&mut up, &dwp, &dbp)?;
        scratch.step_with(&mut dn, &dwm, &dbm)?;
        Ok((f.evaluate(&up)? - 2.0 * f0 + f.evaluate(&dn)?) / (eps * eps))
    };
    let lw = stepper.wcov.chol.as_slice();
    for c in 0..stepper.wcov.chol.ncols() {
        dw.copy_from_slice(&lw[c * n * n..(c + 1) * n * n]);
        total += second(&dw, &zero_b)?;
    }
    if f.needs_second_order() {
        if let Some(b) = &stepper.bcov {
            let d = b.slots.len();
            let lb = b.chol.as_slice();
            let zero_w = vec![0.0; n * n];
            let mut db = vec![0.0; n * n * n];
            for c in 0..b.chol.ncols() {
                db.fill(0.0);
                for (e, &(i, j, k)) in b.slots.iter().enumerate() {
                    db[i * n * n + j * n + k] = lb[c * d + e];
                    db[i * n * n + k * n + j] = lb[c * d + e];
                }
                total += second(&zero_w, &db)?;
            }
        }
    }
    Ok(0.5 * total)
}

/// Antithetic one-step estimate of `E[f(X_dt) - f(X_0)] / (dt f(X_0))`.
/// Returns `(mean, standard error)` over `samples` increment pairs `±(ΔW, ΔB)`.
pub fn drift_probe<R: Rng + ?Sized>(
    s: &JetState,
    f: Functional,
    stepper: &JetStepper,
    dt: f64,
    samples: usize,
    w_rng: &mut R,
    b_rng: &mut R,
) -> Result<(f64, f64)> {
    let n = s.n;
    let f0 = f.evaluate(s)?;
    let mut st = stepper.clone();
    let mut dw = vec![0.0; n * n];
    let mut db = vec![0.0; n * n * n];
    let mut vals = Vec::with_capacity(samples);
    for _ in 0..samples {
        st.wcov.sample_into(dt, w_rng, &mut dw);
        match &st.bcov {
            Some(b) => b.sample_into(dt, b_rng, &mut db),
            None => db.fill(0.0),
        }
        let mut up = s.clone();
        st.step_with(&mut up, &dw, &db)?;
        dw.iter_mut().for_each(|x| *x = -*x);
        db.iter_mut().for_each(|x| *x = -*x);
        let mut dn = s.clone();
        st.step_with(&mut dn, &dw, &db)?;
        vals.push((f.evaluate(&up)? + f.evaluate(&dn)? - 2.0 * f0) / (2.0 * dt * f0));
    }
    Ok(stats::mean_se(&vals))
}

/// Inputs of a Track A growth measurement.
#[derive(Debug, Clone)]
pub struct GrowthParams {
    pub functional: Functional,
    pub preset: Preset,
    pub spectral: SpectralMeasure,
    pub dt: f64,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    pub integrator: Integrator,
    /// Number of observation times after `t = 0`.
    pub observations: usize,
    /// Skip the `horizon · rate <= 3` precondition.
    pub allow_long_horizon: bool,
}

impl GrowthParams {
    pub fn new(functional: Functional, n: usize, spectral: SpectralMeasure, dt: f64, horizon: f64, replicas: usize, seed: u64) -> Self {
        GrowthParams {
            functional,
            preset: Preset::UnitSphere(n),
            spectral,
            dt,
            horizon,
            replicas,
            seed,
            integrator: Integrator::Heun,
            observations: 20,
            allow_long_horizon: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthEstimate {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicas: usize,
    pub horizon: f64,
    pub aborted: usize,
    /// Relative standard error of the ensemble mean at the horizon.
    pub rel_std_error: f64,
    /// False when more than 1% of replicas aborted.
    pub valid: bool,
}

#[derive(Debug, Clone)]
pub struct GrowthRun {
    pub estimate: GrowthEstimate,
    /// Ensemble series including `t = 0`.
    pub series: Series,
    /// Per-replica values of surviving replicas at the observation times (without `t = 0`).
    pub values: Vec<Vec<f64>>,
    pub dt_used: f64,
}

/// Simulate independent replicas and fit the exponential growth rate of the
/// ensemble mean of `functional`.
pub fn mc_growth(p: &GrowthParams) -> Result<GrowthRun> {
    let n = p.preset.dimension();
    p.functional.validate(n)?;
    p.spectral.validate()?;
    if p.replicas < 100 {
        return invalid("at least 100 replicas are required");
    }
    if !(p.dt > 0.0 && p.horizon > 0.0) {
        return invalid("dt and horizon must be positive");
    }
    if p.observations < 5 {
        return invalid("at least 5 observation times are required");
    }
    let mu2 = p.spectral.mu2();
    let predicted = p.functional.predicted_rate(n, mu2)?;
    if !p.allow_long_horizon && predicted * p.horizon > 3.0 {
        return invalid(format!("horizon·rate = {:.3} exceeds 3", predicted * p.horizon));
    }
    let obs = p.observations;
    let per_obs = ((p.horizon / (obs as f64 * p.dt)).round() as usize).max(1);
    let dt = p.horizon / (obs * per_obs) as f64;
    let template = JetStepper::for_spectral(n, &p.spectral, p.functional.needs_second_order(), p.integrator)?;
    let init = JetState::init(&p.preset)?;
    let f0 = p.functional.evaluate(&init)?;

    let results: Vec<Option<Vec<f64>>> = rng::map_replicas(p.replicas, |r| {
        let mut st = template.clone();
        let mut s = init.clone();
        let mut wr = rng::substream(p.seed, r, 0);
        let mut br = rng::substream(p.seed, r, 1);
        let mut out = Vec::with_capacity(obs);
        for _ in 0..obs {
            for _ in 0..per_obs {
                if st.step(&mut s, dt, &mut wr, &mut br).is_err() {
                    return None;
                }
            }
            match p.functional.evaluate(&s) {
                Ok(x) => out.push(x),
                Err(_) => return None,
            }
        }
        Some(out)
    });
    let aborted = results.iter().filter(|r| r.is_none()).count();
    let values: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    let t: Vec<f64> = (1..=obs).map(|g| g as f64 * per_obs as f64 * dt).collect();
    let fit = stats::fit_batch_means(&t, &values, 20, 0.95)?;
    let s = stats::ensemble(&t, &values);
    let mut series = Series { t: vec![0.0], mean: vec![f0], std_error: vec![0.0], alive: vec![p.replicas] };
    series.t.extend(&s.t);
    series.mean.extend(&s.mean);
    series.std_error.extend(&s.std_error);
    series.alive.extend(&s.alive);
    let rel = s.std_error[obs - 1] / s.mean[obs - 1].abs();
    let estimate = GrowthEstimate {
        rate: fit.rate,
        ci_low: fit.ci_low,
        ci_high: fit.ci_high,
        replicas: p.replicas,
        horizon: p.horizon,
        aborted,
        rel_std_error: rel,
        valid: aborted as f64 <= 0.01 * p.replicas as f64,
    };
    Ok(GrowthRun { estimate, series, values, dt_used: dt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::predicted::{predicted_rate, RateKind};

    #[test]
    fn presets_initialize_expected_curvature() {
        let s = JetState::init(&Preset::UnitSphere(3)).unwrap();
        let o = s.observables().unwrap();
        assert_eq!(o.alpha_norm, 1.0);
        assert_eq!(s.shape().h, DMatrix::identity(2, 2));
        for (a, b) in o.traces.iter().zip([1.0, 2.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let d = JetState::init(&Preset::CurvatureDiag(vec![2.0, 3.0])).unwrap();
        let o = d.observables().unwrap();
        for (a, b) in o.products.iter().zip([1.0, 5.0, 6.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let e = JetState::init(&Preset::Ellipsoid(vec![1.0, 1.0, 1.0])).unwrap();
        assert_eq!(e, s);
        assert!(JetState::init(&Preset::Ellipsoid(vec![1.0, -1.0, 1.0])).is_err());
    }

    #[test]
    fn ellipsoid_pole_curvatures() {
        let e = JetState::init(&Preset::Ellipsoid(vec![2.0, 1.0, 3.0])).unwrap();
        let h = e.shape().h;
        assert!((h[(0, 0)] - 3.0 / 4.0).abs() < 1e-15);
        assert!((h[(1, 1)] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn pair_index_is_dense() {
        let m = 4;
        let mut seen = vec![false; m * (m + 1) / 2];
        for a in 0..m {
            for b in a..m {
                seen[pair_index(m, a, b)] = true;
                assert_eq!(pair_index(m, a, b), pair_index(m, b, a));
            }
        }
        assert!(seen.iter().all(|&x| x));
    }

    #[test]
    fn zero_step_is_identity_and_normal_stays_orthogonal() {
        let mut st = JetStepper::for_spectral(4, &SpectralMeasure::point(1.0), true, Integrator::Heun).unwrap();
        let mut s = JetState::init(&Preset::UnitSphere(4)).unwrap();
        let s0 = s.clone();
        let mut wr = rng::stream(1, 0);
        let mut br = rng::stream(1, 1);
        st.step(&mut s, 0.0, &mut wr, &mut br).unwrap();
        assert_eq!(s, s0);
        for _ in 0..500 {
            st.step(&mut s, 1e-2, &mut wr, &mut br).unwrap();
            for a in 0..3 {
                assert!(linalg::dot(&s.nu, &s.v[a * 4..(a + 1) * 4]).abs() < 1e-10);
            }
            assert!((linalg::norm(&s.nu) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn no_hessian_noise_keeps_transport_of_z() {
        // with ΔB ≡ 0, Z is transported by the same linear map as V
        let w = w_covariance(3, 1.0).unwrap();
        let mut st = JetStepper::new(w, None, Integrator::ItoEuler);
        let mut s = JetState::init(&Preset::UnitSphere(3)).unwrap();
        let mut wr = rng::stream(2, 0);
        let mut dw = vec![0.0; 9];
        let db = vec![0.0; 27];
        let mut phi = DMatrix::<f64>::identity(3, 3);
        for _ in 0..50 {
            st.wcov.sample_into(1e-2, &mut wr, &mut dw);
            let w = DMatrix::from_row_slice(3, 3, &dw);
            phi = (DMatrix::identity(3, 3) + w) * phi;
            st.step_with(&mut s, &dw, &db).unwrap();
        }
        let z0 = nalgebra::DVector::from_row_slice(&[0.0, 0.0, -1.0]);
        let want = &phi * z0;
        let p = pair_index(2, 0, 0);
        for i in 0..3 {
            assert!((s.z[p * 3 + i] - want[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_drift_matches_closed_forms() {
        // exact pointwise drift at a stretched, curved state
        let mut r = rng::stream(5, 0);
        let mut b = rng::stream(5, 1);
        for n in 2..=4 {
            let mut st = JetStepper::for_spectral(n, &SpectralMeasure::point(1.0), true, Integrator::Heun).unwrap();
            let mut s = JetState::init(&Preset::CurvatureDiag((0..n - 1).map(|i| 1.0 + 0.5 * i as f64).collect())).unwrap();
            for _ in 0..30 {
                st.step(&mut s, 0.01, &mut r, &mut b).unwrap();
            }
            let check = |f: Functional, kind: RateKind| {
                let d = generator_drift(&s, f, &st, 1e-4).unwrap() / f.evaluate(&s).unwrap();
                let want = predicted_rate(kind, 1.0).unwrap();
                assert!((d - want).abs() < 1e-5, "n={n} {f:?}: {d} vs {want}");
            };
            check(Functional::AlphaNorm, RateKind::Alpha { n });
            check(Functional::AlphaNormSq, RateKind::AlphaSq { n });
            for k in 1..n {
                check(Functional::KFrameInner(k), RateKind::KFrame { n, k });
            }
            for k in 0..n {
                check(Functional::TraceProduct(k), RateKind::Lk { n, k });
            }
        }
    }

    #[test]
    fn growth_run_is_reproducible() {
        let mut p = GrowthParams::new(Functional::AlphaNorm, 3, SpectralMeasure::point(1.0), 0.01, 0.4, 100, 9);
        p.observations = 5;
        let a = mc_growth(&p).unwrap();
        let b = mc_growth(&p).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.series, b.series);
        assert_eq!(a.series.t.len(), 6);
        assert_eq!(a.estimate.aborted, 0);
    }

    #[test]
    fn growth_preconditions() {
        let p = GrowthParams::new(Functional::AlphaNorm, 3, SpectralMeasure::point(1.0), 0.01, 1.0, 50, 9);
        assert!(mc_growth(&p).is_err());
        let p = GrowthParams::new(Functional::AlphaNormSq, 3, SpectralMeasure::point(1.0), 0.01, 5.0, 100, 9);
        assert!(mc_growth(&p).is_err());
        let p = GrowthParams::new(Functional::KFrameInner(3), 3, SpectralMeasure::point(1.0), 0.01, 1.0, 100, 9);
        assert!(mc_growth(&p).is_err());
    }
}
