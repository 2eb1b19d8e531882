//! Time-domain Langevin integration of a [`LinearNoiseSystem`].
//!
//! The source covariance D of the coupled model is indefinite (the
//! three-level pump correlator is negative), so no real noise vector can
//! reproduce it. The factorization here returns `L` with `L L^T = D`
//! (transpose, not conjugate transpose); when D has negative eigenvalues the
//! corresponding columns of L are imaginary and the trajectories become
//! complex. Individual complex paths carry no physical meaning, but every
//! pair correlation — the only observables computed here — matches the
//! analytic model, which is validated against the transfer engine in the
//! test suites.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{psd_classify, CovarianceClass, LinearNoiseSystem};
use crate::tolerances;

/// Whether trajectories are real- or complex-valued.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorMode {
    Real,
    Complex,
}

/// A factor L with L L^T = D.
#[derive(Clone, Debug)]
pub enum NoiseFactorization {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl NoiseFactorization {
    pub fn mode(&self) -> FactorMode {
        match self {
            NoiseFactorization::Real(_) => FactorMode::Real,
            NoiseFactorization::Complex(_) => FactorMode::Complex,
        }
    }

    /// max|L L^T - D|, for the reconstruction invariant.
    pub fn reconstruction_residual(&self, d: &DMatrix<f64>) -> f64 {
        let n = d.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let recon: Complex64 = (0..n)
                    .map(|k| self.entry(i, k) * self.entry(j, k))
                    .sum();
                worst = worst.max((recon - Complex64::new(d[(i, j)], 0.0)).norm());
            }
        }
        worst
    }

    fn entry(&self, i: usize, j: usize) -> Complex64 {
        match self {
            NoiseFactorization::Real(l) => Complex64::new(l[(i, j)], 0.0),
            NoiseFactorization::Complex(l) => l[(i, j)],
        }
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Diagonal-pivoted Cholesky with zero-clamping of the trailing block once
/// every remaining pivot sits inside the tolerance band around zero.
fn pivoted_cholesky(d: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    let n = d.nrows();
    let mut a = d.clone();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut jmax = k;
        let mut pivot = a[(k, k)];
        for j in (k + 1)..n {
            if a[(j, j)] > pivot {
                jmax = j;
                pivot = a[(j, j)];
            }
        }
        if pivot <= threshold {
            break; // remaining block is numerically zero
        }
        if jmax != k {
            a.swap_rows(k, jmax);
            a.swap_columns(k, jmax);
            l.swap_rows(k, jmax);
            perm.swap(k, jmax);
        }
        let lkk = pivot.sqrt();
        l[(k, k)] = lkk;
        for i in (k + 1)..n {
            l[(i, k)] = a[(i, k)] / lkk;
        }
        for i in (k + 1)..n {
            for j in (k + 1)..=i {
                let v = a[(i, j)] - l[(i, k)] * l[(j, k)];
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
    }
    // Undo the row permutation so that out * out^T = d in original order.
    let mut out = DMatrix::<f64>::zeros(n, n);
    for (pivoted_row, &orig_row) in perm.iter().enumerate() {
        out.set_row(orig_row, &l.row(pivoted_row));
    }
    out
}

/// Factors a symmetric covariance. Positive semidefinite matrices get a real
/// pivoted-Cholesky factor (eigenvalues in the [-tol, 0] band clamped to
/// zero); indefinite matrices get the spectral factor `V sqrt(diag(eig))`
/// whose negative-eigenvalue columns are imaginary.
pub fn factor_covariance(d: &DMatrix<f64>) -> Result<NoiseFactorization> {
    if d.nrows() != d.ncols() {
        return Err(Error::InvalidInput("covariance must be square".into()));
    }
    let asym = max_abs(&(d - d.transpose()));
    if asym > tolerances::COV_SYMMETRY_REL * max_abs(d).max(1.0) {
        return Err(Error::InvalidInput(format!("covariance asymmetric by {asym:e}")));
    }
    let scale = max_abs(d).max(1.0);
    let fact = match psd_classify(d)? {
        CovarianceClass::Psd => {
            NoiseFactorization::Real(pivoted_cholesky(d, tolerances::PSD_EIGEN_REL * scale))
        }
        CovarianceClass::Indefinite => {
            let sym = (d + d.transpose()) * 0.5;
            let eigen = nalgebra::linalg::SymmetricEigen::new(sym);
            let n = d.nrows();
            let mut l = DMatrix::<Complex64>::zeros(n, n);
            for j in 0..n {
                let lambda = eigen.eigenvalues[j];
                let root = if lambda >= 0.0 {
                    Complex64::new(lambda.sqrt(), 0.0)
                } else if lambda >= -tolerances::PSD_EIGEN_REL * scale {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, (-lambda).sqrt())
                };
                for i in 0..n {
                    l[(i, j)] = root * eigen.eigenvectors[(i, j)];
                }
            }
            NoiseFactorization::Complex(l)
        }
    };
    let residual = fact.reconstruction_residual(d);
    if residual > tolerances::FACTOR_RESIDUAL_REL * scale {
        return Err(Error::NumericalConsistency(format!(
            "factor reconstruction residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(fact)
}

/// Integration budget and recording policy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimOptions {
    /// Integration step, in units of 1/kappa. Must satisfy
    /// dt <= 0.01 / spectral_radius(A).
    pub dt: f64,
    /// Recorded duration per trajectory (burn-in comes on top).
    pub t_max: f64,
    pub n_traj: usize,
    pub seed: u64,
    /// Boxcar decimation: every `record_stride` integration steps are
    /// averaged into one recorded sample. Averaging (rather than picking)
    /// keeps the white detection noise at its correct spectral level.
    pub record_stride: usize,
    /// Store state paths alongside the photocurrents.
    pub record_states: bool,
    /// Start trajectories away from the origin (mostly for decay tests).
    pub initial_state: Option<Vec<f64>>,
    /// Skip the stationarization burn-in (deterministic tests).
    pub skip_burn_in: bool,
}

impl SimOptions {
    pub fn new(dt: f64, t_max: f64, n_traj: usize, seed: u64) -> Self {
        SimOptions {
            dt,
            t_max,
            n_traj,
            seed,
            record_stride: 1,
            record_states: true,
            initial_state: None,
            skip_burn_in: false,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn currents_only(mut self) -> Self {
        self.record_states = false;
        self
    }
}

/// Sampled path data for one variable; the variant matches the ensemble's
/// factor mode.
#[derive(Clone, Debug, PartialEq)]
pub enum Samples {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Real(v) => v.len(),
            Samples::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Samples::Real(v) => Some(v),
            Samples::Complex(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Per state variable, empty when states were not recorded.
    pub states: Vec<Samples>,
    /// Per photocurrent channel.
    pub currents: Vec<Samples>,
}

/// Everything needed to reproduce the ensemble bit for bit, plus labels and
/// shot levels for downstream estimators.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleMeta {
    pub dt: f64,
    pub record_stride: usize,
    pub dt_record: f64,
    /// Recorded duration actually realized (whole strides).
    pub t_recorded: f64,
    pub burn_in: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub mode: FactorMode,
    pub system_hash: String,
    pub shot_levels: Vec<f64>,
    pub state_labels: Vec<String>,
    pub channel_labels: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct TrajectoryEnsemble {
    pub meta: EnsembleMeta,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryEnsemble {
    pub fn n_recorded(&self) -> usize {
        self.trajectories
            .first()
            .map_or(0, |t| t.currents.first().map_or(0, Samples::len))
    }

    /// Raw dump of one trajectory for debugging: t, states, currents
    /// (complex variables become `_re`/`_im` column pairs).
    pub fn dump_trajectory_csv<W: std::io::Write>(&self, traj: usize, w: &mut W) -> Result<()> {
        let t = self
            .trajectories
            .get(traj)
            .ok_or_else(|| Error::InvalidInput(format!("trajectory {traj} out of range")))?;
        let complex = self.meta.mode == FactorMode::Complex;
        let mut header = vec!["t".to_string()];
        let columns: Vec<(&str, &Samples)> = self
            .meta
            .state_labels
            .iter()
            .map(String::as_str)
            .zip(&t.states)
            .chain(
                self.meta
                    .channel_labels
                    .iter()
                    .map(String::as_str)
                    .zip(&t.currents),
            )
            .collect();
        for (label, _) in &columns {
            if complex {
                header.push(format!("{label}_re"));
                header.push(format!("{label}_im"));
            } else {
                header.push(label.to_string());
            }
        }
        writeln!(w, "{}", header.join(","))?;
        let n = self.n_recorded();
        for row in 0..n {
            let mut fields = vec![format!("{}", row as f64 * self.meta.dt_record)];
            for (_, samples) in &columns {
                match samples {
                    Samples::Real(v) => fields.push(format!("{}", v[row])),
                    Samples::Complex(v) => {
                        fields.push(format!("{}", v[row].re));
                        fields.push(format!("{}", v[row].im));
                    }
                }
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

struct DriftInfo {
    spectral_radius: f64,
    min_decay: f64,
}

fn drift_info(a: &DMatrix<f64>) -> Result<DriftInfo> {
    let eigvals = a.clone().complex_eigenvalues();
    let mut spectral_radius = 0.0_f64;
    let mut min_decay = f64::INFINITY;
    for ev in eigvals.iter() {
        if ev.re >= 0.0 {
            return Err(Error::UnstableDrift(format!(
                "eigenvalue {ev} has nonnegative real part"
            )));
        }
        spectral_radius = spectral_radius.max(ev.norm());
        min_decay = min_decay.min(-ev.re);
    }
    Ok(DriftInfo { spectral_radius, min_decay })
}

struct FlatReal {
    s: usize,
    m: usize,
    c: usize,
    a: Vec<f64>,
    c_mat: Vec<f64>,
    bl: Vec<f64>,
    el: Vec<f64>,
}

struct FlatComplex {
    s: usize,
    m: usize,
    c: usize,
    a: Vec<f64>,
    c_mat: Vec<f64>,
    bl: Vec<Complex64>,
    el: Vec<Complex64>,
}

fn flatten_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn flatten_row_major_c(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Euler-Maruyama integration of the Langevin equations
/// `x' = A x + B f`, photocurrent `delta_i = C x + E f`, with `f = L w /
/// sqrt(dt)` sharing one Gaussian draw `w` per step between the state update
/// and the recorded current.
///
/// Per-trajectory randomness comes from counter-based ChaCha substreams of
/// the master seed, so results are independent of how trajectories are
/// scheduled across workers.
pub fn simulate(sys: &LinearNoiseSystem, opts: &SimOptions) -> Result<TrajectoryEnsemble> {
    if !(opts.dt.is_finite() && opts.dt > 0.0) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    if opts.n_traj == 0 {
        return Err(Error::InvalidInput("n_traj must be >= 1".into()));
    }
    if opts.record_stride == 0 {
        return Err(Error::InvalidInput("record_stride must be >= 1".into()));
    }
    let info = drift_info(&sys.drift)?;
    let dt_max = tolerances::EM_DT_SAFETY / info.spectral_radius;
    if opts.dt > dt_max * (1.0 + 1e-9) {
        return Err(Error::InvalidInput(format!(
            "dt = {} exceeds stability bound {dt_max:.3e} (0.01 / spectral radius)",
            opts.dt
        )));
    }
    if let Some(x0) = &opts.initial_state {
        if x0.len() != sys.state_dim {
            return Err(Error::InvalidInput("initial state has wrong dimension".into()));
        }
    }

    let mut warnings = Vec::new();
    let relax = 1.0 / info.min_decay;
    if opts.t_max < tolerances::MC_RELAX_TIMES_WARN * relax {
        warnings.push(format!(
            "t_max = {} is below {} relaxation times ({:.3}); spectral estimates will be coarse",
            opts.t_max,
            tolerances::MC_RELAX_TIMES_WARN,
            tolerances::MC_RELAX_TIMES_WARN * relax
        ));
    }

    let burn_time = if opts.skip_burn_in {
        0.0
    } else {
        tolerances::MC_BURN_IN_RELAX_TIMES * relax
    };
    let n_burn = (burn_time / opts.dt).ceil() as usize;
    let n_rec = ((opts.t_max / opts.dt).round() as usize) / opts.record_stride;
    if n_rec == 0 {
        return Err(Error::InvalidInput("t_max too short to record a single sample".into()));
    }

    let factor = factor_covariance(&sys.noise_cov)?;
    let mode = factor.mode();
    let x0 = opts
        .initial_state
        .clone()
        .unwrap_or_else(|| vec![0.0; sys.state_dim]);

    let trajectories: Vec<Trajectory> = match &factor {
        NoiseFactorization::Real(l) => {
            let flat = FlatReal {
                s: sys.state_dim,
                m: sys.noise_dim,
                c: sys.n_channels(),
                a: flatten_row_major(&sys.drift),
                c_mat: flatten_row_major(&sys.output_map),
                bl: flatten_row_major(&(&sys.input_map * l)),
                el: flatten_row_major(&(&sys.feedthrough * l)),
            };
            (0..opts.n_traj)
                .into_par_iter()
                .map(|traj| {
                    let rng = substream(opts.seed, traj);
                    run_real(&flat, opts, n_burn, n_rec, &x0, rng)
                })
                .collect()
        }
        NoiseFactorization::Complex(l) => {
            let b_c = sys.input_map.map(|v| Complex64::new(v, 0.0)) * l;
            let e_c = sys.feedthrough.map(|v| Complex64::new(v, 0.0)) * l;
            let flat = FlatComplex {
                s: sys.state_dim,
                m: sys.noise_dim,
                c: sys.n_channels(),
                a: flatten_row_major(&sys.drift),
                c_mat: flatten_row_major(&sys.output_map),
                bl: flatten_row_major_c(&b_c),
                el: flatten_row_major_c(&e_c),
            };
            (0..opts.n_traj)
                .into_par_iter()
                .map(|traj| {
                    let rng = substream(opts.seed, traj);
                    run_complex(&flat, opts, n_burn, n_rec, &x0, rng)
                })
                .collect()
        }
    };

    Ok(TrajectoryEnsemble {
        meta: EnsembleMeta {
            dt: opts.dt,
            record_stride: opts.record_stride,
            dt_record: opts.dt * opts.record_stride as f64,
            t_recorded: opts.dt * (n_rec * opts.record_stride) as f64,
            burn_in: n_burn as f64 * opts.dt,
            n_traj: opts.n_traj,
            seed: opts.seed,
            mode,
            system_hash: sys.content_hash(),
            shot_levels: sys.shot_levels.clone(),
            state_labels: sys.labels.states.clone(),
            channel_labels: sys.labels.channels.clone(),
            warnings,
        },
        trajectories,
    })
}

fn substream(seed: u64, traj: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(traj as u64 + 1);
    rng
}

fn run_real(
    flat: &FlatReal,
    opts: &SimOptions,
    n_burn: usize,
    n_rec: usize,
    x0: &[f64],
    mut rng: ChaCha12Rng,
) -> Trajectory {
    let (s, m, c) = (flat.s, flat.m, flat.c);
    let stride = opts.record_stride;
    let dt = opts.dt;
    let sqrt_dt = dt.sqrt();
    let inv_sqrt_dt = 1.0 / sqrt_dt;
    let inv_stride = 1.0 / stride as f64;

    let mut x = x0.to_vec();
    let mut w = vec![0.0_f64; m];
    let mut dx = vec![0.0_f64; s];
    let mut st_acc = vec![0.0_f64; s];
    let mut cur_acc = vec![0.0_f64; c];
    let mut acc_n = 0usize;
    let mut st_out: Vec<Vec<f64>> = if opts.record_states {
        vec![Vec::with_capacity(n_rec); s]
    } else {
        Vec::new()
    };
    let mut cur_out: Vec<Vec<f64>> = vec![Vec::with_capacity(n_rec); c];

    let total = n_burn + n_rec * stride;
    for step in 0..total {
        for wk in w.iter_mut() {
            *wk = rng.sample::<f64, _>(StandardNormal);
        }
        if step >= n_burn {
            for ch in 0..c {
                let mut v = 0.0;
                for j in 0..s {
                    v += flat.c_mat[ch * s + j] * x[j];
                }
                let mut fe = 0.0;
                for k in 0..m {
                    fe += flat.el[ch * m + k] * w[k];
                }
                cur_acc[ch] += v + fe * inv_sqrt_dt;
            }
            if opts.record_states {
                for j in 0..s {
                    st_acc[j] += x[j];
                }
            }
            acc_n += 1;
            if acc_n == stride {
                for ch in 0..c {
                    cur_out[ch].push(cur_acc[ch] * inv_stride);
                    cur_acc[ch] = 0.0;
                }
                if opts.record_states {
                    for j in 0..s {
                        st_out[j].push(st_acc[j] * inv_stride);
                        st_acc[j] = 0.0;
                    }
                }
                acc_n = 0;
            }
        }
        for i in 0..s {
            let mut drift = 0.0;
            for j in 0..s {
                drift += flat.a[i * s + j] * x[j];
            }
            let mut noise = 0.0;
            for k in 0..m {
                noise += flat.bl[i * m + k] * w[k];
            }
            dx[i] = drift * dt + noise * sqrt_dt;
        }
        for i in 0..s {
            x[i] += dx[i];
        }
    }

    Trajectory {
        states: st_out.into_iter().map(Samples::Real).collect(),
        currents: cur_out.into_iter().map(Samples::Real).collect(),
    }
}

fn run_complex(
    flat: &FlatComplex,
    opts: &SimOptions,
    n_burn: usize,
    n_rec: usize,
    x0: &[f64],
    mut rng: ChaCha12Rng,
) -> Trajectory {
    let (s, m, c) = (flat.s, flat.m, flat.c);
    let stride = opts.record_stride;
    let dt = opts.dt;
    let sqrt_dt = dt.sqrt();
    let inv_sqrt_dt = 1.0 / sqrt_dt;
    let inv_stride = Complex64::new(1.0 / stride as f64, 0.0);
    let zero = Complex64::new(0.0, 0.0);

    let mut x: Vec<Complex64> = x0.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let mut w = vec![0.0_f64; m];
    let mut dx = vec![zero; s];
    let mut st_acc = vec![zero; s];
    let mut cur_acc = vec![zero; c];
    let mut acc_n = 0usize;
    let mut st_out: Vec<Vec<Complex64>> = if opts.record_states {
        vec![Vec::with_capacity(n_rec); s]
    } else {
        Vec::new()
    };
    let mut cur_out: Vec<Vec<Complex64>> = vec![Vec::with_capacity(n_rec); c];

    let total = n_burn + n_rec * stride;
    for step in 0..total {
        for wk in w.iter_mut() {
            *wk = rng.sample::<f64, _>(StandardNormal);
        }
        if step >= n_burn {
            for ch in 0..c {
                let mut v = zero;
                for j in 0..s {
                    v += x[j].scale(flat.c_mat[ch * s + j]);
                }
                let mut fe = zero;
                for k in 0..m {
                    fe += flat.el[ch * m + k].scale(w[k]);
                }
                cur_acc[ch] += v + fe.scale(inv_sqrt_dt);
            }
            if opts.record_states {
                for j in 0..s {
                    st_acc[j] += x[j];
                }
            }
            acc_n += 1;
            if acc_n == stride {
                for ch in 0..c {
                    cur_out[ch].push(cur_acc[ch] * inv_stride);
                    cur_acc[ch] = zero;
                }
                if opts.record_states {
                    for j in 0..s {
                        st_out[j].push(st_acc[j] * inv_stride);
                        st_acc[j] = zero;
                    }
                }
                acc_n = 0;
            }
        }
        for i in 0..s {
            let mut drift = zero;
            for j in 0..s {
                drift += x[j].scale(flat.a[i * s + j]);
            }
            let mut noise = zero;
            for k in 0..m {
                noise += flat.bl[i * m + k].scale(w[k]);
            }
            dx[i] = drift.scale(dt) + noise.scale(sqrt_dt);
        }
        for i in 0..s {
            x[i] += dx[i];
        }
    }

    Trajectory {
        states: st_out.into_iter().map(Samples::Complex).collect(),
        currents: cur_out.into_iter().map(Samples::Complex).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{steady_state, LaserParams};
    use crate::system::{build_coupled, build_isolated_2l, SystemLabels};
    use approx::assert_relative_eq;

    fn ou_system(decay: f64, diffusion: f64) -> LinearNoiseSystem {
        LinearNoiseSystem::new(
            DMatrix::from_row_slice(1, 1, &[-decay]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[0.0]),
            DMatrix::from_row_slice(1, 1, &[diffusion]),
            vec![1.0],
            SystemLabels {
                states: vec!["x".into()],
                sources: vec!["F".into()],
                channels: vec!["x".into()],
            },
        )
        .unwrap()
    }

    #[test]
    fn factor_identity() {
        let d = DMatrix::<f64>::identity(3, 3);
        let f = factor_covariance(&d).unwrap();
        assert_eq!(f.mode(), FactorMode::Real);
        match f {
            NoiseFactorization::Real(l) => assert_eq!(l, d),
            _ => unreachable!(),
        }
    }

    #[test]
    fn factor_negative_block() {
        let d = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -2.0]);
        let f = factor_covariance(&d).unwrap();
        assert_eq!(f.mode(), FactorMode::Complex);
        assert!(f.reconstruction_residual(&d) < 1e-14);
        match &f {
            NoiseFactorization::Complex(l) => {
                // One column must be (0, +-i sqrt(2)).
                let found = (0..2).any(|j| {
                    l[(0, j)].norm() < 1e-14 && (l[(1, j)].im.abs() - 2.0_f64.sqrt()).abs() < 1e-14
                });
                assert!(found, "no imaginary column (0, i sqrt 2) in {l}");
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn coupled_covariance_needs_complex_mode() {
        let p = LaserParams::new(1.0, 1.0, 1.0, 0.0, 200.0);
        let s = steady_state(&p).unwrap();
        assert_relative_eq!(s.n, 100.0);
        let sys = build_coupled(&p, &s).unwrap();
        let f = factor_covariance(&sys.noise_cov).unwrap();
        assert_eq!(f.mode(), FactorMode::Complex);
        assert!(f.reconstruction_residual(&sys.noise_cov) <= 1e-12 * 200.0_f64.max(1.0));
    }

    #[test]
    fn factor_rejects_asymmetric_input() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(factor_covariance(&d).is_err());
    }

    #[test]
    fn deterministic_decay_matches_exponential() {
        let sys = ou_system(1.0, 0.0);
        let mut opts = SimOptions::new(1e-3, 1.2, 1, 42);
        opts.initial_state = Some(vec![1.0]);
        opts.skip_burn_in = true;
        let ens = simulate(&sys, &opts).unwrap();
        let states = ens.trajectories[0].states[0].as_real().unwrap();
        // Sample j holds the pre-update state at t = j dt.
        let x_at_1 = states[1000];
        assert_relative_eq!(x_at_1, (-1.0_f64).exp(), max_relative = 1e-3);
    }

    #[test]
    fn identical_seeds_identical_ensembles() {
        let p = LaserParams::new(1.0, 1.0, 1.0, 0.25, 2000.0);
        let s = steady_state(&p).unwrap();
        let sys = build_coupled(&p, &s).unwrap();
        let opts = SimOptions::new(2e-3, 20.0, 4, 7).with_stride(5);
        let a = simulate(&sys, &opts).unwrap();
        let b = simulate(&sys, &opts).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
        assert_eq!(a.meta.system_hash, b.meta.system_hash);

        let other = simulate(&sys, &SimOptions { seed: 8, ..opts }).unwrap();
        assert_ne!(a.trajectories, other.trajectories);
    }

    #[test]
    fn unstable_drift_refused() {
        let sys = LinearNoiseSystem::new(
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[0.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            vec![1.0],
            SystemLabels {
                states: vec!["x".into()],
                sources: vec!["F".into()],
                channels: vec!["x".into()],
            },
        )
        .unwrap();
        assert!(matches!(
            simulate(&sys, &SimOptions::new(1e-3, 10.0, 1, 1)),
            Err(Error::UnstableDrift(_))
        ));
    }

    #[test]
    fn oversized_step_refused() {
        let p = LaserParams::new(1.0, 0.0, 0.0, 0.0, 1000.0);
        let s = steady_state(&p).unwrap();
        let sys = build_isolated_2l(&p, &s).unwrap();
        // Spectral radius 1 -> bound is 0.01; the boundary itself passes.
        assert!(simulate(&sys, &SimOptions::new(0.02, 10.0, 1, 1)).is_err());
        assert!(simulate(&sys, &SimOptions::new(0.01, 10.0, 1, 1)).is_ok());
    }

    #[test]
    fn currents_and_states_share_noise() {
        // With C = identity, E = 0 the current equals the state exactly;
        // with E != 0 the difference is the feedthrough term alone.
        let sys = ou_system(1.0, 2.0);
        let opts = SimOptions::new(5e-3, 10.0, 2, 3);
        let ens = simulate(&sys, &opts).unwrap();
        let st = ens.trajectories[0].states[0].as_real().unwrap();
        let cu = ens.trajectories[0].currents[0].as_real().unwrap();
        assert_eq!(st, cu);
    }

    #[test]
    fn trajectory_csv_dump_runs() {
        let sys = ou_system(1.0, 2.0);
        let ens = simulate(&sys, &SimOptions::new(5e-3, 5.0, 1, 3)).unwrap();
        let mut buf = Vec::new();
        ens.dump_trajectory_csv(0, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,x\n"));
        assert_eq!(text.lines().count(), 1 + ens.n_recorded());
    }
}
