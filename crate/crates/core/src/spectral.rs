//! Trigonometric (Fourier) calculus on uniform periodic grids.
//!
//! Samples `f_j = f(2πj/n)` are treated as the trigonometric interpolant of
//! degree `n/2`. For even `n` the Nyquist mode is dropped from odd
//! derivatives and kept (with its real coefficient) in even ones.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

struct Plan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plan(n: usize) -> Arc<Plan> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plan>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plan {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Signed wavenumber of FFT bin `j` for a length-`n` transform.
#[inline]
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

#[inline]
fn is_nyquist(j: usize, n: usize) -> bool {
    n % 2 == 0 && j == n / 2
}

/// Uniform angle grid `θ_j = 2πj/n`.
pub fn angle_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}

/// Reusable buffers for repeated spectral operations at a fixed grid size.
///
/// The flow solver evaluates `f + f''` four times per step, so allocation
/// and planner lookups are hoisted out of the inner loop.
pub struct SpectralWorkspace {
    n: usize,
    plan: Arc<Plan>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SpectralWorkspace {
    pub fn new(n: usize) -> Self {
        let plan = plan(n);
        let scratch_len = plan
            .forward
            .get_inplace_scratch_len()
            .max(plan.inverse.get_inplace_scratch_len());
        SpectralWorkspace {
            n,
            plan,
            buf: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn load(&mut self, f: &[f64]) {
        assert_eq!(f.len(), self.n, "sample count does not match workspace");
        for (b, &v) in self.buf.iter_mut().zip(f) {
            *b = Complex64::new(v, 0.0);
        }
        self.plan
            .forward
            .process_with_scratch(&mut self.buf, &mut self.scratch);
    }

    fn unload(&mut self, out: &mut [f64]) {
        self.plan
            .inverse
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re * scale;
        }
    }

    /// Writes `f + f''` into `out`. For a support function this is the radius
    /// of curvature.
    pub fn plus_second_derivative(&mut self, f: &[f64], out: &mut [f64]) {
        self.load(f);
        let n = self.n;
        for (j, b) in self.buf.iter_mut().enumerate() {
            let k = wavenumber(j, n) as f64;
            *b *= 1.0 - k * k;
        }
        self.unload(out);
    }

    pub fn first_derivative(&mut self, f: &[f64], out: &mut [f64]) {
        self.load(f);
        let n = self.n;
        for (j, b) in self.buf.iter_mut().enumerate() {
            if is_nyquist(j, n) {
                *b = Complex64::default();
            } else {
                let k = wavenumber(j, n) as f64;
                *b *= Complex64::new(0.0, k);
            }
        }
        self.unload(out);
    }

    pub fn second_derivative(&mut self, f: &[f64], out: &mut [f64]) {
        self.load(f);
        let n = self.n;
        for (j, b) in self.buf.iter_mut().enumerate() {
            let k = wavenumber(j, n) as f64;
            *b *= -k * k;
        }
        self.unload(out);
    }

    /// Complex Fourier coefficients `c_k` (FFT order) with `f = Σ c_k e^{ikθ}`.
    pub fn coefficients(&mut self, f: &[f64]) -> Vec<Complex64> {
        self.load(f);
        let scale = 1.0 / self.n as f64;
        self.buf.iter().map(|c| c * scale).collect()
    }

    /// Inverse of [`coefficients`](Self::coefficients), keeping the real part.
    pub fn synthesize(&mut self, coeffs: &[Complex64], out: &mut [f64]) {
        assert_eq!(coeffs.len(), self.n);
        let n = self.n as f64;
        for (b, c) in self.buf.iter_mut().zip(coeffs) {
            *b = c * n;
        }
        self.unload(out);
    }
}

pub fn first_derivative(f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    SpectralWorkspace::new(f.len()).first_derivative(f, &mut out);
    out
}

pub fn second_derivative(f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    SpectralWorkspace::new(f.len()).second_derivative(f, &mut out);
    out
}

/// Real trigonometric series `a_0 + Σ_{k≥1} (a_k cos kθ + b_k sin kθ)`,
/// evaluable at arbitrary angles.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigSeries {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TrigSeries {
    /// Interpolant of uniform samples.
    pub fn from_samples(f: &[f64]) -> Self {
        let n = f.len();
        let c = SpectralWorkspace::new(n).coefficients(f);
        let top = n / 2;
        let mut a = vec![0.0; top + 1];
        let mut b = vec![0.0; top + 1];
        a[0] = c[0].re;
        for k in 1..=top {
            if is_nyquist(k, n) {
                a[k] = c[k].re;
            } else {
                a[k] = 2.0 * c[k].re;
                b[k] = -2.0 * c[k].im;
            }
        }
        TrigSeries { a, b }
    }

    pub fn degree(&self) -> usize {
        self.a.len() - 1
    }

    /// Cosine/sine coefficient pair of mode `k` (zero beyond the degree).
    pub fn mode(&self, k: usize) -> (f64, f64) {
        if k < self.a.len() {
            (self.a[k], self.b[k])
        } else {
            (0.0, 0.0)
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_with_derivatives(theta)[0]
    }

    /// `[f, f', f'']` at `theta`.
    pub fn eval_with_derivatives(&self, theta: f64) -> [f64; 3] {
        let step = Complex64::new(theta.cos(), theta.sin());
        let mut rot = Complex64::new(1.0, 0.0);
        let mut out = [self.a[0], 0.0, 0.0];
        for k in 1..self.a.len() {
            rot *= step;
            // re-anchor the recurrence periodically to bound drift
            if k % 64 == 0 {
                let kt = k as f64 * theta;
                rot = Complex64::new(kt.cos(), kt.sin());
            }
            let (c, s) = (rot.re, rot.im);
            let kf = k as f64;
            let (ak, bk) = (self.a[k], self.b[k]);
            out[0] += ak * c + bk * s;
            out[1] += kf * (bk * c - ak * s);
            out[2] -= kf * kf * (ak * c + bk * s);
        }
        out
    }

    /// Samples on a uniform grid of `m` points. Modes above `m/2` are dropped.
    pub fn sample(&self, m: usize) -> Vec<f64> {
        let mut coeffs = vec![Complex64::default(); m];
        coeffs[0] = Complex64::new(self.a[0], 0.0);
        let top = self.degree().min(m / 2);
        for k in 1..=top {
            let (ak, bk) = (self.a[k], self.b[k]);
            if is_nyquist(k, m) {
                coeffs[k] = Complex64::new(ak, 0.0);
            } else {
                coeffs[k] = Complex64::new(ak / 2.0, -bk / 2.0);
                coeffs[m - k] = Complex64::new(ak / 2.0, bk / 2.0);
            }
        }
        let mut out = vec![0.0; m];
        SpectralWorkspace::new(m).synthesize(&coeffs, &mut out);
        out
    }
}

/// Trigonometric resampling of uniform periodic samples onto `m` points.
pub fn resample(f: &[f64], m: usize) -> Vec<f64> {
    if f.len() == m {
        return f.to_vec();
    }
    TrigSeries::from_samples(f).sample(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_k(n: usize, k: f64) -> Vec<f64> {
        angle_grid(n).iter().map(|t| (k * t).cos()).collect()
    }

    #[test]
    fn second_derivative_of_cosines() {
        let n = 64;
        for k in 0..=16 {
            let f = cos_k(n, k as f64);
            let d2 = second_derivative(&f);
            let kk = (k * k) as f64;
            for (d, v) in d2.iter().zip(&f) {
                assert!((d + kk * v).abs() < 1e-8, "k={k}");
            }
        }
    }

    #[test]
    fn first_derivative_of_sine() {
        let n = 32;
        let f: Vec<f64> = angle_grid(n).iter().map(|t| (3.0 * t).sin()).collect();
        let d = first_derivative(&f);
        for (t, v) in angle_grid(n).iter().zip(&d) {
            assert!((v - 3.0 * (3.0 * t).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn series_interpolates_off_grid() {
        let n = 32;
        let f: Vec<f64> = angle_grid(n)
            .iter()
            .map(|t| 1.0 + 0.3 * (2.0 * t).cos() - 0.2 * (5.0 * t).sin())
            .collect();
        let s = TrigSeries::from_samples(&f);
        for &t in &[0.1, 1.234, 4.0, 6.2] {
            let [v, d1, d2] = s.eval_with_derivatives(t);
            assert!((v - (1.0 + 0.3 * (2.0 * t).cos() - 0.2 * (5.0 * t).sin())).abs() < 1e-13);
            assert!((d1 - (-0.6 * (2.0 * t).sin() - (5.0 * t).cos())).abs() < 1e-12);
            assert!((d2 - (-1.2 * (2.0 * t).cos() + 5.0 * (5.0 * t).sin())).abs() < 1e-11);
        }
    }

    #[test]
    fn resample_up_and_down() {
        let f: Vec<f64> = angle_grid(32)
            .iter()
            .map(|t| (t.cos() + 2.0).sqrt())
            .collect();
        let up = resample(&f, 128);
        let back = resample(&up, 32);
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        for (t, v) in angle_grid(128).iter().zip(&up) {
            assert!((v - (t.cos() + 2.0).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn odd_grid_sizes_work() {
        let n = 33;
        let f: Vec<f64> = angle_grid(n).iter().map(|t| (4.0 * t).cos()).collect();
        let d2 = second_derivative(&f);
        for (d, v) in d2.iter().zip(&f) {
            assert!((d + 16.0 * v).abs() < 1e-9);
        }
        let s = TrigSeries::from_samples(&f);
        assert!((s.eval(0.3) - (1.2f64).cos()).abs() < 1e-12);
    }
}
