//! Meyer-type radial and angular windows.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Smooth step with `nu(t) + nu(1 - t) = 1`.
pub fn nu(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t.powi(4) * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t.powi(3))
}

/// Angular window, supported on `(-1, 1)`, with `sum_l V(t - l)^2 = 1`.
pub fn angular(t: f64) -> f64 {
    let a = t.abs();
    if a >= 1.0 {
        0.0
    } else {
        (FRAC_PI_2 * nu(a)).cos()
    }
}

/// Radial window, supported on `(1/2, 2)`, with `sum_j W(2^j u)^2 = 1`.
pub fn radial(u: f64) -> f64 {
    if u <= 0.5 || u >= 2.0 {
        0.0
    } else if u <= 1.0 {
        (FRAC_PI_2 * nu(2.0 * u - 1.0)).sin()
    } else {
        (FRAC_PI_2 * nu(u - 1.0)).cos()
    }
}

/// Squared low-pass window `1 - sum_{j>=0} W(2^-j u)^2`.
pub fn lowpass_sq(u: f64) -> f64 {
    if u <= 0.5 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        (FRAC_PI_2 * nu(2.0 * u - 1.0)).cos().powi(2)
    }
}

pub const SUPPORT_LO: f64 = 0.5;
pub const SUPPORT_HI: f64 = 2.0;

/// Sampled copies of the three windows, for inspection and export.
#[derive(Debug, Clone)]
pub struct WindowPair {
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    pub omega: Vec<f64>,
    pub v: Vec<f64>,
    pub w0: Vec<f64>,
}

impl WindowPair {
    pub fn sample(n: usize) -> Self {
        let r: Vec<f64> = (0..n).map(|i| 2.5 * i as f64 / (n - 1) as f64).collect();
        let omega: Vec<f64> = (0..n).map(|i| -1.25 + 2.5 * i as f64 / (n - 1) as f64).collect();
        WindowPair {
            w: r.iter().map(|&u| radial(u)).collect(),
            w0: r.iter().map(|&u| lowpass_sq(u).sqrt()).collect(),
            v: omega.iter().map(|&t| angular(t)).collect(),
            r,
            omega,
        }
    }
}

const QUAD_POINTS: usize = 8192;
const FFT_LEN: usize = 1 << 21;
const TABLE_TAU_MAX: f64 = 2500.0;
const MID: f64 = 1.25;

/// `int W(u) e^{i tau u} du` by midpoint quadrature on the support of `W`.
/// Tabulated once through a zero-padded FFT, interpolated in between.
pub struct RadialTransform {
    step: f64,
    table: Vec<Complex64>,
}

impl RadialTransform {
    pub fn get() -> &'static RadialTransform {
        static CELL: OnceLock<RadialTransform> = OnceLock::new();
        CELL.get_or_init(RadialTransform::build)
    }

    fn build() -> Self {
        let h = (SUPPORT_HI - SUPPORT_LO) / QUAD_POINTS as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); FFT_LEN];
        for (k, slot) in buf.iter_mut().take(QUAD_POINTS).enumerate() {
            let u = SUPPORT_LO + (k as f64 + 0.5) * h;
            *slot = Complex64::new(radial(u) * h, 0.0);
        }
        // inverse FFT gives sum_k w_k e^{+i tau_m (u_k - u_0)} on tau_m = 2 pi m / (P h)
        FftPlanner::new().plan_fft_inverse(FFT_LEN).process(&mut buf);
        let step = 2.0 * std::f64::consts::PI / (FFT_LEN as f64 * h);
        let u0 = SUPPORT_LO + 0.5 * h;
        let count = (TABLE_TAU_MAX / step) as usize + 4;
        let table = (0..count)
            .map(|m| {
                let tau = m as f64 * step;
                buf[m] * Complex64::from_polar(1.0, tau * (u0 - MID))
            })
            .collect();
        RadialTransform { step, table }
    }

    fn direct(tau: f64) -> Complex64 {
        let h = (SUPPORT_HI - SUPPORT_LO) / QUAD_POINTS as f64;
        (0..QUAD_POINTS)
            .map(|k| {
                let u = SUPPORT_LO + (k as f64 + 0.5) * h;
                Complex64::from_polar(radial(u) * h, tau * u)
            })
            .sum()
    }

    /// `(int W(u) cos(tau u) du, int W(u) sin(tau u) du)`.
    pub fn eval(&self, tau: f64) -> (f64, f64) {
        let a = tau.abs();
        let x = a / self.step;
        let z = if (x as usize) + 3 >= self.table.len() {
            Self::direct(a)
        } else {
            let i = (x.floor() as usize).max(1);
            let t = x - i as f64;
            let p = [self.table[i - 1], self.table[i], self.table[i + 1], self.table[i + 2]];
            // cubic Lagrange on the demodulated samples
            let c = [
                -t * (t - 1.0) * (t - 2.0) / 6.0,
                (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                -(t + 1.0) * t * (t - 2.0) / 2.0,
                (t + 1.0) * t * (t - 1.0) / 6.0,
            ];
            let g = p[0] * c[0] + p[1] * c[1] + p[2] * c[2] + p[3] * c[3];
            g * Complex64::from_polar(1.0, a * MID)
        };
        (z.re, if tau < 0.0 { -z.im } else { z.im })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nu_is_symmetric_step() {
        assert_eq!(nu(0.0), 0.0);
        assert_eq!(nu(1.0), 1.0);
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            assert!((nu(t) + nu(1.0 - t) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn radial_partition() {
        for i in 0..2000 {
            let r = 0.75 + 0.75 * i as f64 / 2000.0;
            let s: f64 = (-6..6).map(|j| radial(2f64.powi(j) * r).powi(2)).sum();
            assert!((s - 1.0).abs() < 1e-10, "r={r} sum={s}");
        }
    }

    #[test]
    fn angular_partition() {
        for i in 0..2000 {
            let w = -0.5 + i as f64 / 2000.0;
            let s: f64 = (-4..=4).map(|l| angular(w - l as f64).powi(2)).sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn supports_are_exact() {
        for i in 0..=400 {
            let u = 4.0 * i as f64 / 400.0;
            if u <= 0.5 || u >= 2.0 {
                assert_eq!(radial(u), 0.0);
            }
            let t = -2.0 + u;
            if t.abs() >= 1.0 {
                assert_eq!(angular(t), 0.0);
            }
        }
    }

    #[test]
    fn lowpass_matches_dyadic_definition() {
        for i in 0..3000 {
            let u = 3.0 * i as f64 / 3000.0;
            let direct = 1.0 - (0..12).map(|j| radial(2f64.powi(-j) * u).powi(2)).sum::<f64>();
            assert!((lowpass_sq(u) - direct.max(0.0)).abs() < 1e-12, "u={u}");
            let total = lowpass_sq(u) + (0..12).map(|j| radial(2f64.powi(-j) * u).powi(2)).sum::<f64>();
            assert!(total <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn sampled_pair_has_exact_zeros() {
        let p = WindowPair::sample(501);
        for (r, w) in p.r.iter().zip(&p.w) {
            if *r <= 0.5 || *r >= 2.0 {
                assert_eq!(*w, 0.0);
            }
        }
        for (o, v) in p.omega.iter().zip(&p.v) {
            if o.abs() >= 1.0 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn transform_table_matches_direct_quadrature() {
        let rt = RadialTransform::get();
        for &tau in &[0.0, 0.3, 1.0, 7.77, 33.1, 150.4, 999.9, -12.5] {
            let (c, s) = rt.eval(tau);
            let z = RadialTransform::direct(tau.abs());
            let sz = if tau < 0.0 { -z.im } else { z.im };
            assert!((c - z.re).abs() < 1e-9, "tau={tau} {c} {}", z.re);
            assert!((s - sz).abs() < 1e-9);
        }
        // zeroth moment is the area under W
        let area: f64 = (0..200000).map(|k| radial(0.5 + (k as f64 + 0.5) * 1.5 / 200000.0) * 1.5 / 200000.0).sum();
        assert!((rt.eval(0.0).0 - area).abs() < 1e-7);
    }
}
