use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) type C64 = Complex64;

/// Unitary 2-D FFT on a row-major `rows x cols` buffer.
pub(crate) struct Fft2 {
    pub rows: usize,
    pub cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl Fft2 {
    pub fn new(planner: &mut FftPlanner<f64>, rows: usize, cols: usize) -> Self {
        Fft2 {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
            scale: 1.0 / ((rows * cols) as f64).sqrt(),
        }
    }

    pub fn forward(&self, buf: &mut [C64], work: &mut Vec<C64>) {
        self.run(buf, work, true);
    }

    pub fn inverse(&self, buf: &mut [C64], work: &mut Vec<C64>) {
        self.run(buf, work, false);
    }

    fn run(&self, buf: &mut [C64], work: &mut Vec<C64>, fwd: bool) {
        let (r, c) = (self.rows, self.cols);
        debug_assert_eq!(buf.len(), r * c);
        let (rp, cp) = if fwd { (&self.row_fwd, &self.col_fwd) } else { (&self.row_inv, &self.col_inv) };
        let scratch_len = rp
            .get_inplace_scratch_len()
            .max(cp.get_inplace_scratch_len());
        work.resize(r * c + scratch_len, C64::new(0.0, 0.0));
        let (tbuf, scratch) = work.split_at_mut(r * c);
        if c > 1 {
            rp.process_with_scratch(buf, &mut scratch[..rp.get_inplace_scratch_len()]);
        }
        if r > 1 {
            transpose(buf, tbuf, r, c);
            cp.process_with_scratch(tbuf, &mut scratch[..cp.get_inplace_scratch_len()]);
            transpose(tbuf, buf, c, r);
        }
        let s = self.scale;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    const B: usize = 16;
    for i0 in (0..rows).step_by(B) {
        for j0 in (0..cols).step_by(B) {
            for i in i0..(i0 + B).min(rows) {
                for j in j0..(j0 + B).min(cols) {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
        }
    }
}

/// Smallest `n >= m` whose only prime factors are 2, 3 and 5.
pub(crate) fn smooth_size(m: usize) -> usize {
    let mut n = m.max(1);
    loop {
        let mut k = n;
        for p in [2, 3, 5] {
            while k % p == 0 {
                k /= p;
            }
        }
        if k == 1 {
            return n;
        }
        n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_roundtrip_and_dc() {
        let mut planner = FftPlanner::new();
        let f = Fft2::new(&mut planner, 6, 10);
        let orig: Vec<C64> = (0..60).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64).cos())).collect();
        let mut buf = orig.clone();
        let mut work = Vec::new();
        f.forward(&mut buf, &mut work);
        let e0: f64 = orig.iter().map(|z| z.norm_sqr()).sum();
        let e1: f64 = buf.iter().map(|z| z.norm_sqr()).sum();
        assert!((e0 - e1).abs() < 1e-12 * e0);
        let dc: C64 = orig.iter().sum::<C64>() / 60f64.sqrt();
        assert!((buf[0] - dc).norm() < 1e-12);
        f.inverse(&mut buf, &mut work);
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_dft() {
        let mut planner = FftPlanner::new();
        let (r, c) = (5, 4);
        let f = Fft2::new(&mut planner, r, c);
        let x: Vec<C64> = (0..r * c).map(|i| C64::new(i as f64, -(i as f64) * 0.5)).collect();
        let mut buf = x.clone();
        f.forward(&mut buf, &mut Vec::new());
        for p in 0..r {
            for q in 0..c {
                let mut s = C64::new(0.0, 0.0);
                for a in 0..r {
                    for b in 0..c {
                        let ph = -2.0 * std::f64::consts::PI * ((p * a) as f64 / r as f64 + (q * b) as f64 / c as f64);
                        s += x[a * c + b] * C64::from_polar(1.0, ph);
                    }
                }
                s /= ((r * c) as f64).sqrt();
                assert!((s - buf[p * c + q]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(11), 12);
        assert_eq!(smooth_size(97), 100);
        assert_eq!(smooth_size(1), 1);
    }
}
