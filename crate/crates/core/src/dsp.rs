//! Spectral estimation of sampled currents and states.
//!
//! All estimates target the two-sided spectral density defined as the
//! coefficient of `delta(omega + omega')` in the pair correlator of the
//! symmetric-convention Fourier amplitudes: a process with correlator
//! `c delta(t - t')` estimates to the flat value `c`. Frequencies are
//! angular.
//!
//! [`welch_psd`] is the workhorse for real records. [`ensemble_spectrum`]
//! evaluates finite-window transforms at arbitrary `+-omega` pairs and
//! averages the products `y_omega * y_{-omega}` across an ensemble; for real
//! records this reduces to the periodogram, for the complex-mode Monte Carlo
//! trajectories it is the only unbiased estimator (the magnitude square is
//! not, since complex-mode conjugate moments are unphysical).

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::{FactorMode, Samples, TrajectoryEnsemble};

/// Taper applied to each segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Rect,
}

impl Window {
    fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()))
                .collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Window::Hann => "hann",
            Window::Rect => "rect",
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hann" => Ok(Window::Hann),
            "rect" => Ok(Window::Rect),
            other => Err(Error::InvalidInput(format!("unknown window '{other}'"))),
        }
    }
}

/// Welch estimator settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WelchOpts {
    pub segment_len: usize,
    /// Fractional overlap between consecutive segments, in [0, 0.9].
    pub overlap: f64,
    pub window: Window,
}

impl Default for WelchOpts {
    fn default() -> Self {
        WelchOpts { segment_len: 4096, overlap: 0.5, window: Window::Hann }
    }
}

/// Estimator provenance attached to every estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub estimator: String,
    pub segment_len: usize,
    pub overlap: f64,
    pub window: Window,
    pub n_traj: usize,
    pub windows_per_record: usize,
    pub dt: f64,
    pub normalized: bool,
}

/// A spectral estimate with per-channel means and standard errors; complex
/// ensembles additionally carry the imaginary part as a diagnostic (its mean
/// must be statistically consistent with zero).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub omega: Vec<f64>,
    /// mean[channel][bin]
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub channel_labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imag_mean: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imag_stderr: Option<Vec<Vec<f64>>>,
    pub meta: EstimateMeta,
}

impl PsdEstimate {
    pub fn channel(&self, label: &str) -> Option<usize> {
        self.channel_labels.iter().position(|l| l == label)
    }

    /// Bin index closest to the requested frequency.
    pub fn nearest_bin(&self, omega: f64) -> usize {
        self.omega
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - omega).abs().partial_cmp(&(b.1 - omega).abs()).expect("finite grid")
            })
            .map(|(i, _)| i)
            .expect("non-empty grid")
    }
}

fn check_welch_opts(n: usize, opts: &WelchOpts) -> Result<usize> {
    if opts.segment_len < 2 {
        return Err(Error::InvalidInput("segment_len must be >= 2".into()));
    }
    if opts.segment_len > n {
        return Err(Error::InvalidInput(format!(
            "segment of {} samples is longer than the {n}-sample record",
            opts.segment_len
        )));
    }
    if !(0.0..=0.9).contains(&opts.overlap) {
        return Err(Error::InvalidInput("overlap must lie in [0, 0.9]".into()));
    }
    let hop = ((opts.segment_len as f64) * (1.0 - opts.overlap)).round().max(1.0) as usize;
    Ok(hop)
}

/// Two-sided angular-frequency bins of an L-point FFT, together with the
/// permutation mapping FFT index -> ascending-frequency position.
fn fft_bins(len: usize, dt: f64) -> (Vec<f64>, Vec<usize>) {
    let half = (len + 1) / 2; // indices below `half` are nonnegative freqs
    let mut omega = vec![0.0; len];
    let mut order = vec![0usize; len];
    let d_omega = 2.0 * std::f64::consts::PI / (len as f64 * dt);
    let negatives = len - half;
    for m in 0..len {
        let signed = if m < half { m as isize } else { m as isize - len as isize };
        let pos = (signed + negatives as isize) as usize;
        omega[pos] = signed as f64 * d_omega;
        order[m] = pos;
    }
    (omega, order)
}

/// Welch periodogram average over one real record. Raw (un-normalized)
/// two-sided PSD on the FFT bin grid, sorted by ascending frequency.
///
/// Segment means are NOT subtracted: the processes estimated here are
/// zero-mean by construction and de-meaning would bias the zero-frequency
/// bin, which is the main observable of the model.
pub fn welch_psd(samples: &[f64], dt: f64, opts: &WelchOpts) -> Result<PsdEstimate> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput("record too short".into()));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    let hop = check_welch_opts(samples.len(), opts)?;
    let len = opts.segment_len;
    let n_seg = (samples.len() - len) / hop + 1;
    let w = opts.window.coefficients(len);
    let sum_w2: f64 = w.iter().map(|v| v * v).sum();
    let scale = dt / sum_w2;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let (omega, order) = fft_bins(len, dt);

    let mut sum = vec![0.0_f64; len];
    let mut sum_sq = vec![0.0_f64; len];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for seg in 0..n_seg {
        let start = seg * hop;
        for k in 0..len {
            buf[k] = Complex64::new(samples[start + k] * w[k], 0.0);
        }
        fft.process(&mut buf);
        for (m, v) in buf.iter().enumerate() {
            let p = v.norm_sqr() * scale;
            let pos = order[m];
            sum[pos] += p;
            sum_sq[pos] += p * p;
        }
    }
    let n = n_seg as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let stderr: Vec<f64> = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| {
            if n_seg > 1 {
                let var = (sq - n * m * m).max(0.0) / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            }
        })
        .collect();

    Ok(PsdEstimate {
        omega,
        mean: vec![mean],
        stderr: vec![stderr],
        channel_labels: vec!["psd".into()],
        imag_mean: None,
        imag_stderr: None,
        meta: EstimateMeta {
            estimator: "welch".into(),
            segment_len: len,
            overlap: opts.overlap,
            window: opts.window,
            n_traj: 1,
            windows_per_record: n_seg,
            dt,
            normalized: false,
        },
    })
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Welch estimate of every photocurrent channel of a real-mode ensemble.
/// Per-trajectory Welch means are averaged across trajectories; the standard
/// error is taken across trajectories, which honestly accounts for the
/// within-record segment correlation.
pub fn welch_ensemble(
    ens: &TrajectoryEnsemble,
    opts: &WelchOpts,
    normalize: bool,
) -> Result<PsdEstimate> {
    if ens.meta.mode != FactorMode::Real {
        return Err(Error::InvalidInput(
            "welch estimator needs real samples; use ensemble_spectrum for complex-mode data".into(),
        ));
    }
    if ens.trajectories.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    let dt = ens.meta.dt_record;
    let channels = ens.meta.channel_labels.len();

    let per_traj: Vec<Vec<PsdEstimate>> = ens
        .trajectories
        .par_iter()
        .map(|traj| {
            (0..channels)
                .map(|c| {
                    let samples = traj.currents[c]
                        .as_real()
                        .expect("real mode ensures real samples");
                    welch_psd(samples, dt, opts)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let omega = per_traj[0][0].omega.clone();
    let windows_per_record = per_traj[0][0].meta.windows_per_record;
    let n_bins = omega.len();
    let mut mean = vec![vec![0.0; n_bins]; channels];
    let mut stderr = vec![vec![0.0; n_bins]; channels];
    for c in 0..channels {
        let shot = if normalize { ens.meta.shot_levels[c] } else { 1.0 };
        for b in 0..n_bins {
            let vals: Vec<f64> = per_traj.iter().map(|t| t[c].mean[0][b]).collect();
            let (m, se) = mean_stderr(&vals);
            mean[c][b] = m / shot;
            stderr[c][b] = se / shot;
        }
    }

    Ok(PsdEstimate {
        omega,
        mean,
        stderr,
        channel_labels: ens.meta.channel_labels.clone(),
        imag_mean: None,
        imag_stderr: None,
        meta: EstimateMeta {
            estimator: "welch".into(),
            segment_len: opts.segment_len,
            overlap: opts.overlap,
            window: opts.window,
            n_traj: ens.meta.n_traj,
            windows_per_record,
            dt,
            normalized: normalize,
        },
    })
}

/// Settings for the finite-window transform estimator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransformOpts {
    /// Number of base segments each record is split into (1 = whole record).
    pub segments: usize,
    pub overlap: f64,
    pub window: Window,
}

impl Default for TransformOpts {
    fn default() -> Self {
        TransformOpts { segments: 8, overlap: 0.5, window: Window::Hann }
    }
}

/// Ensemble average of `y_omega * y_{-omega}` over finite-window transforms
/// `y_omega = sqrt(dt / sum w^2) * sum_k w_k x_k exp(i omega t_k)`, evaluated
/// at arbitrary grid frequencies. Works on real- and complex-mode ensembles;
/// the real part is the spectral estimate, the imaginary part a consistency
/// diagnostic. Standard errors are taken across trajectories, so at least 8
/// trajectories are required for meaningful bars.
pub fn ensemble_spectrum(
    ens: &TrajectoryEnsemble,
    grid: &[f64],
    opts: &TransformOpts,
    normalize: bool,
) -> Result<PsdEstimate> {
    if ens.meta.n_traj < 8 {
        return Err(Error::InvalidInput(format!(
            "n_traj = {} < 8: standard errors across trajectories would be meaningless",
            ens.meta.n_traj
        )));
    }
    if grid.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidInput("grid contains non-finite frequencies".into()));
    }
    if opts.segments == 0 {
        return Err(Error::InvalidInput("segments must be >= 1".into()));
    }
    let n_rec = ens.n_recorded();
    let seg_len = n_rec / opts.segments;
    if seg_len < 2 {
        return Err(Error::InvalidInput(format!(
            "{} segments of a {n_rec}-sample record leave segments that are too short",
            opts.segments
        )));
    }
    if !(0.0..=0.9).contains(&opts.overlap) {
        return Err(Error::InvalidInput("overlap must lie in [0, 0.9]".into()));
    }

    let dt = ens.meta.dt_record;
    let w = opts.window.coefficients(seg_len);
    let sum_w2: f64 = w.iter().map(|v| v * v).sum();
    let norm2 = dt / sum_w2; // |y|^2 carries norm^2 = dt / sum w^2
    let hop = ((seg_len as f64) * (1.0 - opts.overlap)).round().max(1.0) as usize;
    let n_windows = (n_rec - seg_len) / hop + 1;
    let channels = ens.meta.channel_labels.len();

    // per_traj[traj][channel][bin] = window-averaged y_+ * y_-
    let per_traj: Vec<Vec<Vec<Complex64>>> = ens
        .trajectories
        .par_iter()
        .map(|traj| {
            (0..channels)
                .map(|c| {
                    let samples = &traj.currents[c];
                    grid.iter()
                        .map(|&omega| {
                            let mut acc = Complex64::new(0.0, 0.0);
                            for win in 0..n_windows {
                                let start = win * hop;
                                acc += window_product(samples, start, &w, omega, dt);
                            }
                            acc.scale(norm2 / n_windows as f64)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let n_bins = grid.len();
    let mut mean = vec![vec![0.0; n_bins]; channels];
    let mut stderr = vec![vec![0.0; n_bins]; channels];
    let mut imag_mean = vec![vec![0.0; n_bins]; channels];
    let mut imag_stderr = vec![vec![0.0; n_bins]; channels];
    for c in 0..channels {
        let shot = if normalize { ens.meta.shot_levels[c] } else { 1.0 };
        for b in 0..n_bins {
            let re: Vec<f64> = per_traj.iter().map(|t| t[c][b].re).collect();
            let im: Vec<f64> = per_traj.iter().map(|t| t[c][b].im).collect();
            let (m, se) = mean_stderr(&re);
            mean[c][b] = m / shot;
            stderr[c][b] = se / shot;
            let (mi, sei) = mean_stderr(&im);
            imag_mean[c][b] = mi / shot;
            imag_stderr[c][b] = sei / shot;
        }
    }

    Ok(PsdEstimate {
        omega: grid.to_vec(),
        mean,
        stderr,
        channel_labels: ens.meta.channel_labels.clone(),
        imag_mean: Some(imag_mean),
        imag_stderr: Some(imag_stderr),
        meta: EstimateMeta {
            estimator: "transform".into(),
            segment_len: seg_len,
            overlap: opts.overlap,
            window: opts.window,
            n_traj: ens.meta.n_traj,
            windows_per_record: n_windows,
            dt,
            normalized: normalize,
        },
    })
}

/// `y_omega * y_{-omega}` for one window, without the overall normalization.
/// The phase reference is window-relative; the product is invariant under a
/// common time shift, so this does not matter.
fn window_product(samples: &Samples, start: usize, w: &[f64], omega: f64, dt: f64) -> Complex64 {
    let rot = Complex64::from_polar(1.0, omega * dt);
    let mut phase = Complex64::new(1.0, 0.0);
    match samples {
        Samples::Real(x) => {
            let mut y = Complex64::new(0.0, 0.0);
            for (k, &wk) in w.iter().enumerate() {
                y += phase.scale(x[start + k] * wk);
                phase *= rot;
            }
            // y_- = conj(y_+): the product is |y|^2, exactly real.
            Complex64::new(y.norm_sqr(), 0.0)
        }
        Samples::Complex(x) => {
            let mut y_plus = Complex64::new(0.0, 0.0);
            let mut y_minus = Complex64::new(0.0, 0.0);
            for (k, &wk) in w.iter().enumerate() {
                let v = x[start + k].scale(wk);
                y_plus += v * phase;
                y_minus += v * phase.conj();
                phase *= rot;
            }
            y_plus * y_minus
        }
    }
}
