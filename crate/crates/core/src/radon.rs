//! Parallel-beam Radon transform, its exact adjoint, filtered
//! backprojection and the closed-form Radon transform of curvelets.
//!
//! Lines are `L(theta, s) = { x : x1 cos(theta) + x2 sin(theta) = s }`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::curvelet::{CurveletSystem, Part};
use crate::error::{Error, Result};
use crate::fft::smooth_size;
use crate::geometry::{covering_range, orientation_spacing, wrap_angle, AngularRange, CurveletIndex, Image, Sinogram};
use crate::windows::{angular, RadialTransform};

/// Acquisition angles plus a symmetric offset grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadonGeometry {
    pub angles: Vec<f64>,
    pub offset_count: usize,
    pub offset_spacing: f64,
}

impl RadonGeometry {
    pub fn new(angles: Vec<f64>, offset_count: usize, offset_spacing: f64) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Geometry("at least one angle is required".into()));
        }
        if angles.iter().any(|a| !a.is_finite()) || angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Geometry("angles must be finite and strictly increasing".into()));
        }
        if angles[angles.len() - 1] - angles[0] >= PI {
            return Err(Error::Geometry("angles must lie within a half turn".into()));
        }
        if offset_count == 0 || !(offset_spacing.is_finite() && offset_spacing > 0.0) {
            return Err(Error::Geometry("offset grid must be nonempty with positive spacing".into()));
        }
        Ok(RadonGeometry { angles, offset_count, offset_spacing })
    }

    /// Offsets covering the diagonal of a `width x height` image.
    pub fn for_image(angles: Vec<f64>, width: usize, height: usize, extent: f64) -> Result<Self> {
        let n = (SQRT_2 * width.max(height) as f64).ceil() as usize;
        Self::new(angles, n, 2.0 * SQRT_2 * extent / n as f64)
    }

    pub fn from_degrees(angles_deg: &[f64], width: usize, height: usize) -> Result<Self> {
        Self::for_image(angles_deg.iter().map(|a| a.to_radians()).collect(), width, height, 1.0)
    }

    /// Angles `start, start + step, ...` up to and including `end` (degrees).
    pub fn degree_sweep(start: f64, end: f64, step: f64, width: usize, height: usize) -> Result<Self> {
        if !(step > 0.0) || end < start {
            return Err(Error::Geometry(format!("bad angle sweep {start}:{step}:{end}")));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        let deg: Vec<f64> = (0..count).map(|i| start + i as f64 * step).collect();
        Self::from_degrees(&deg, width, height)
    }

    pub fn offsets(&self) -> Vec<f64> {
        let c = (self.offset_count as f64 - 1.0) / 2.0;
        (0..self.offset_count).map(|i| (i as f64 - c) * self.offset_spacing).collect()
    }

    /// Tight angular range of the acquisition; a single angle gets a
    /// vanishing half width.
    pub fn range(&self) -> AngularRange {
        let (c, h) = covering_range(&self.angles).unwrap();
        AngularRange::new(c, h.max(1e-12)).unwrap()
    }

    /// Mean angular step, the quadrature weight of the angle sum.
    pub fn angle_step(&self) -> f64 {
        let n = self.angles.len();
        if n < 2 {
            PI
        } else {
            (self.angles[n - 1] - self.angles[0]) / (n - 1) as f64
        }
    }

    pub fn same_half_turn(&self) -> Self {
        let n = (PI / self.angle_step()).round().max(1.0) as usize;
        let angles = (0..n).map(|i| -PI / 2.0 + i as f64 * PI / n as f64).collect();
        RadonGeometry { angles, ..self.clone() }
    }

    pub fn matches(&self, g: &Sinogram) -> bool {
        let off = self.offsets();
        g.angles == self.angles
            && g.offsets.len() == off.len()
            && g.offsets.iter().zip(&off).all(|(a, b)| (a - b).abs() <= 1e-12)
    }

    pub fn zero_sinogram(&self) -> Sinogram {
        Sinogram {
            angles: self.angles.clone(),
            offsets: self.offsets(),
            samples: vec![0.0; self.angles.len() * self.offset_count],
            range: self.range(),
        }
    }

    /// Geometry read back from a sinogram's own grid.
    pub fn of_sinogram(g: &Sinogram) -> Result<Self> {
        let ds = if g.offsets.len() > 1 { g.offsets[1] - g.offsets[0] } else { 1.0 };
        let geom = Self::new(g.angles.clone(), g.offsets.len(), ds)?;
        if !geom.matches(g) {
            return Err(Error::Geometry("sinogram offsets are not centred on zero".into()));
        }
        Ok(geom)
    }
}

const OVERSAMPLE: usize = 16;
const TAPS: usize = 6;
const HALF: usize = OVERSAMPLE * TAPS;
const PAD: usize = HALF + 4;

fn bessel_i0(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Decimation filter from the oversampled detector, taps `m = -HALF..=HALF`.
fn decimation_kernel() -> &'static [f64] {
    static CELL: OnceLock<Vec<f64>> = OnceLock::new();
    CELL.get_or_init(|| {
        let (fc, beta) = (0.42, 8.0);
        let norm = bessel_i0(beta);
        let mut h: Vec<f64> = (0..=2 * HALF)
            .map(|i| {
                let x = (i as f64 - HALF as f64) / OVERSAMPLE as f64;
                let arg = 2.0 * fc * x;
                let sinc = if arg == 0.0 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
                let r = x / TAPS as f64;
                let win = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm;
                2.0 * fc * sinc * win
            })
            .collect();
        // unit sum per polyphase branch keeps mass exactly
        for phase in 0..OVERSAMPLE {
            let idx: Vec<usize> = (0..h.len()).filter(|i| i % OVERSAMPLE == phase).collect();
            let s: f64 = idx.iter().map(|&i| h[i]).sum();
            for i in idx {
                h[i] /= s;
            }
        }
        h
    })
}

struct Detector {
    s0: f64,
    fine_step: f64,
    len: usize,
    limit: f64,
}

impl Detector {
    fn new(geom: &RadonGeometry) -> Self {
        let n = geom.offset_count;
        let s0 = -(n as f64 - 1.0) / 2.0 * geom.offset_spacing;
        Detector {
            s0,
            fine_step: geom.offset_spacing / OVERSAMPLE as f64,
            len: OVERSAMPLE * (n - 1) + 2 * PAD + 1,
            limit: -s0 + 0.5 * geom.offset_spacing,
        }
    }

    // fine-grid coordinate of offset t
    fn coord(&self, t: f64) -> f64 {
        (t - self.s0) / self.fine_step + PAD as f64
    }
}

#[inline]
fn spline_weights(x: f64) -> (usize, [f64; 3]) {
    // x >= 1 here, so truncation is floor and avoids a libm call
    let i0 = (x + 0.5) as i64 as usize;
    let t = x - i0 as f64;
    let a = 0.5 - t;
    let b = 0.5 + t;
    (i0, [0.5 * a * a, 0.75 - t * t, 0.5 * b * b])
}

// Per angle, pixels are walked in lanes along the axis with the larger
// detector step, so consecutive deposits never share a fine bin. Returns
// whether lanes are columns, plus the lane base coordinate and in-lane step.
fn lane_plan(det: &Detector, xs: &[f64], ys: &[f64], d: f64, theta: f64) -> (bool, Vec<f64>, f64) {
    let (ct, st) = (theta.cos(), theta.sin());
    if ct.abs() >= st.abs() {
        (false, ys.iter().map(|&y| det.coord(xs[0] * ct + y * st)).collect(), d * ct / det.fine_step)
    } else {
        (true, xs.iter().map(|&x| det.coord(x * ct + ys[0] * st)).collect(), d * st / det.fine_step)
    }
}

// Indices k with base + k * step inside [1, top].
fn lane_span(base: f64, step: f64, top: f64, len: usize) -> std::ops::Range<usize> {
    let inside = |k: usize| {
        let x = base + k as f64 * step;
        (1.0..=top).contains(&x)
    };
    if step == 0.0 {
        return if inside(0) { 0..len } else { 0..0 };
    }
    let (a, b) = ((1.0 - base) / step, (top - base) / step);
    let (lo, hi) = (a.min(b), a.max(b));
    let mut k0 = lo.max(0.0).min(len as f64) as usize;
    let mut k1 = (hi.max(-1.0) + 1.0).min(len as f64) as usize;
    while k0 < k1 && !inside(k0) {
        k0 += 1;
    }
    while k1 > k0 && !inside(k1 - 1) {
        k1 -= 1;
    }
    k0..k1
}

fn transpose(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            out[c * h + r] = src[r * w + c];
        }
    }
    out
}

/// Discrete Radon transform on `geom`.
pub fn radon(f: &Image, geom: &RadonGeometry) -> Result<Sinogram> {
    let det = Detector::new(geom);
    let (w, h) = (f.width, f.height);
    let d = f.spacing();
    let xs: Vec<f64> = (0..w).map(|c| f.x_at(c)).collect();
    let ys: Vec<f64> = (0..h).map(|r| f.y_at(r)).collect();
    // mass outside the detector would be silently lost
    let lim2 = det.limit * det.limit;
    for (r, &y) in ys.iter().enumerate() {
        for (c, &x) in xs.iter().enumerate() {
            if f.pixels[r * w + c] != 0.0 && x * x + y * y > lim2 {
                return Err(Error::Geometry(format!(
                    "pixel at ({x:.3}, {y:.3}) lies beyond the detector half-width {:.3}",
                    det.limit
                )));
            }
        }
    }
    let columns = transpose(&f.pixels, w, h);
    let kernel = decimation_kernel();
    let nc = geom.offset_count;
    let scale = d * d / geom.offset_spacing;
    let top = (det.len - 2) as f64;
    let mut samples = vec![0.0; geom.angles.len() * nc];
    let mut fine = vec![0.0; det.len];
    for (m, &theta) in geom.angles.iter().enumerate() {
        fine.iter_mut().for_each(|v| *v = 0.0);
        let (by_column, bases, step) = lane_plan(&det, &xs, &ys, d, theta);
        let (src, len) = if by_column { (&columns, h) } else { (&f.pixels, w) };
        for (lane, &base) in src.chunks_exact(len).zip(&bases) {
            let span = lane_span(base, step, top, len);
            for (k, &v) in lane[span.clone()].iter().enumerate() {
                let (i, wts) = spline_weights(base + (k + span.start) as f64 * step);
                let bins = &mut fine[i - 1..i + 2];
                bins[0] += v * wts[0];
                bins[1] += v * wts[1];
                bins[2] += v * wts[2];
            }
        }
        let out = &mut samples[m * nc..(m + 1) * nc];
        for (n, o) in out.iter_mut().enumerate() {
            let start = PAD + OVERSAMPLE * n - HALF;
            let acc: f64 = fine[start..start + kernel.len()].iter().zip(kernel).map(|(a, b)| a * b).sum();
            *o = scale * acc;
        }
    }
    Ok(Sinogram { angles: geom.angles.clone(), offsets: geom.offsets(), samples, range: geom.range() })
}

/// Exact transpose of [`radon`] onto a `width x height` image.
pub fn backprojection(g: &Sinogram, width: usize, height: usize, extent: f64) -> Result<Image> {
    let geom = RadonGeometry::of_sinogram(g).map_err(|e| Error::Dimension(e.to_string()))?;
    let mut img = Image::with_extent(width, height, vec![0.0; width * height], extent)?;
    let det = Detector::new(&geom);
    let d = img.spacing();
    let xs: Vec<f64> = (0..width).map(|c| img.x_at(c)).collect();
    let ys: Vec<f64> = (0..height).map(|r| img.y_at(r)).collect();
    let kernel = decimation_kernel();
    let nc = geom.offset_count;
    let scale = d * d / geom.offset_spacing;
    let top = (det.len - 2) as f64;
    let mut columns = vec![0.0; width * height];
    let mut fine = vec![0.0; det.len];
    for (m, &theta) in geom.angles.iter().enumerate() {
        fine.iter_mut().for_each(|v| *v = 0.0);
        for (n, &gv) in g.samples[m * nc..(m + 1) * nc].iter().enumerate() {
            if gv == 0.0 {
                continue;
            }
            let start = PAD + OVERSAMPLE * n - HALF;
            for (fv, k) in fine[start..start + kernel.len()].iter_mut().zip(kernel) {
                *fv += gv * k;
            }
        }
        let (by_column, bases, step) = lane_plan(&det, &xs, &ys, d, theta);
        let (dst, len) = if by_column { (&mut columns, height) } else { (&mut img.pixels, width) };
        for (lane, &base) in dst.chunks_exact_mut(len).zip(&bases) {
            let span = lane_span(base, step, top, len);
            let start = span.start;
            for (k, px) in lane[span].iter_mut().enumerate() {
                let (i, wts) = spline_weights(base + (k + start) as f64 * step);
                let bins = &fine[i - 1..i + 2];
                *px += bins[0] * wts[0] + bins[1] * wts[1] + bins[2] * wts[2];
            }
        }
    }
    let back = transpose(&columns, height, width);
    img.pixels.iter_mut().zip(&back).for_each(|(v, b)| *v = (*v + b) * scale);
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    RamLak,
    SheppLogan,
    Hann,
}

impl std::str::FromStr for FilterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ram-lak" | "ramlak" => Ok(FilterKind::RamLak),
            "shepp-logan" => Ok(FilterKind::SheppLogan),
            "hann" => Ok(FilterKind::Hann),
            _ => Err(Error::Argument(format!("unknown filter '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbpFilter {
    pub kind: FilterKind,
    /// fraction of the detector Nyquist frequency
    pub cutoff: f64,
}

impl Default for FbpFilter {
    fn default() -> Self {
        FbpFilter { kind: FilterKind::RamLak, cutoff: 1.0 }
    }
}

impl FbpFilter {
    pub fn new(kind: FilterKind, cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff <= 1.0) {
            return Err(Error::Argument(format!("cutoff must lie in (0, 1], got {cutoff}")));
        }
        Ok(FbpFilter { kind, cutoff })
    }

    /// Apodization at `nu`, the frequency as a fraction of Nyquist.
    fn window(&self, nu: f64) -> f64 {
        let c = self.cutoff;
        if nu > c {
            return 0.0;
        }
        match self.kind {
            FilterKind::RamLak => 1.0,
            FilterKind::SheppLogan => {
                let x = PI * nu / (2.0 * c);
                if x == 0.0 {
                    1.0
                } else {
                    x.sin() / x
                }
            }
            FilterKind::Hann => 0.5 * (1.0 + (PI * nu / c).cos()),
        }
    }
}

/// Ramp-filters each projection along the offset variable.
pub fn ramp_filter(g: &Sinogram, filter: &FbpFilter) -> Result<Sinogram> {
    let geom = RadonGeometry::of_sinogram(g).map_err(|e| Error::Dimension(e.to_string()))?;
    let n = geom.offset_count;
    let ds = geom.offset_spacing;
    let len = smooth_size(2 * n);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    // spatial band-limited ramp, zero-padded so the convolution is linear
    let mut resp: Vec<Complex64> = (0..len)
        .map(|i| {
            let k = if i <= len / 2 { i as i64 } else { i as i64 - len as i64 };
            let v = if k == 0 {
                1.0 / (4.0 * ds * ds)
            } else if k % 2 != 0 {
                -1.0 / (PI * PI * (k * k) as f64 * ds * ds)
            } else {
                0.0
            };
            Complex64::new(v, 0.0)
        })
        .collect();
    fwd.process(&mut resp);
    for (i, z) in resp.iter_mut().enumerate() {
        let k = i.min(len - i);
        let nu = 2.0 * k as f64 / len as f64;
        *z *= ds * filter.window(nu) / len as f64;
    }
    let mut out = g.clone();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for m in 0..g.angles.len() {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (b, &v) in buf.iter_mut().zip(g.row(m)) {
            *b = Complex64::new(v, 0.0);
        }
        fwd.process(&mut buf);
        for (b, r) in buf.iter_mut().zip(&resp) {
            *b *= r;
        }
        inv.process(&mut buf);
        for (o, b) in out.samples[m * n..(m + 1) * n].iter_mut().zip(&buf) {
            *o = b.re;
        }
    }
    Ok(out)
}

/// Filtered backprojection.
pub fn fbp(g: &Sinogram, width: usize, height: usize, extent: f64, filter: &FbpFilter) -> Result<Image> {
    let geom = RadonGeometry::of_sinogram(g).map_err(|e| Error::Dimension(e.to_string()))?;
    let q = ramp_filter(g, filter)?;
    let mut img = backprojection(&q, width, height, extent)?;
    let d = img.spacing();
    let scale = geom.offset_spacing / (d * d) * geom.angle_step();
    img.pixels.iter_mut().for_each(|v| *v *= scale);
    Ok(img)
}

/// Closed-form `R psi_{j,l,k}(theta, s)` for an element of `system` on the
/// unit-extent square. Only scales with a dilated radial window qualify:
/// the low-pass and the finest scale are rejected.
pub fn analytic_radon_curvelet(system: &CurveletSystem, index: &CurveletIndex, theta: f64, s: f64) -> Result<f64> {
    let j = index.j;
    if j < 0 || j >= system.finest_scale() {
        return Err(Error::UnsupportedIndex(format!(
            "scale {j} has no closed form; only 0..{} are supported",
            system.finest_scale() - 1
        )));
    }
    let (bx, by) = system.location(index)?;
    let slot = system.slot(j, index.l).unwrap();
    let wedge = &system.wedges[slot.wedge];
    let dj = orientation_spacing(j);
    let theta_w = wedge.l as f64 * dj;
    let v_plus = angular(wrap_angle(theta - theta_w) / dj);
    let v_minus = angular(wrap_angle(theta + PI - theta_w) / dj);
    if v_plus == 0.0 && v_minus == 0.0 {
        return Ok(0.0);
    }
    let side = 2.0;
    let big = system.width.max(system.height) as f64;
    let scale = system.rho * 2f64.powi(j);
    let cells = ((system.width * system.height) as f64).sqrt();
    let c = side * scale * cells / (big * big * ((slot.rows * slot.cols) as f64).sqrt());
    let tau = 2.0 * PI * scale * (s - bx * theta.cos() - by * theta.sin()) / side;
    let (wc, ws) = RadialTransform::get().eval(tau);
    Ok(match slot.part {
        Part::Re => SQRT_2 * c * (v_plus + v_minus) * wc,
        Part::Im => -SQRT_2 * c * (v_plus - v_minus) * ws,
        Part::Real => unreachable!(),
    })
}

/// Spatial and frequency-side line integrals through the origin.
///
/// The spatial value integrates the periodic band-limited interpolant of `f`
/// along direction `eta`. The frequency value integrates the DTFT of the
/// samples along the perpendicular line over the Nyquist band, divided by
/// `2 pi`.
pub fn fourier_slice_check(f: &Image, eta: f64) -> (f64, f64) {
    let (w, h) = (f.width, f.height);
    let d = f.spacing();
    let (ce, se) = (eta.cos(), eta.sin());
    let xs: Vec<f64> = (0..w).map(|c| f.x_at(c)).collect();
    let ys: Vec<f64> = (0..h).map(|r| f.y_at(r)).collect();

    let dirichlet = |u: f64, n: usize| -> f64 {
        let a = PI * u / d;
        let b = a / n as f64;
        if b.sin().abs() < 1e-14 {
            return if (u / d).round() as i64 % 2 == 0 || n % 2 == 1 { 1.0 } else { -1.0 };
        }
        if n % 2 == 1 {
            a.sin() / (n as f64 * b.sin())
        } else {
            a.sin() / (n as f64 * b.tan())
        }
    };
    let half_x = w as f64 * d / 2.0;
    let half_y = h as f64 * d / 2.0;
    let reach = (half_x / ce.abs().max(1e-300)).min(half_y / se.abs().max(1e-300));
    let dt = d / 4.0;
    let nt = (reach / dt).floor() as i64;
    let mut spatial = 0.0;
    let mut kx = vec![0.0; w];
    let mut ky = vec![0.0; h];
    for i in -nt..=nt {
        let t = i as f64 * dt;
        let (px, py) = (t * ce, t * se);
        for (k, &x) in kx.iter_mut().zip(&xs) {
            *k = dirichlet(px - x, w);
        }
        for (k, &y) in ky.iter_mut().zip(&ys) {
            *k = dirichlet(py - y, h);
        }
        let mut v = 0.0;
        for r in 0..h {
            let row = &f.pixels[r * w..(r + 1) * w];
            v += ky[r] * row.iter().zip(&kx).map(|(a, b)| a * b).sum::<f64>();
        }
        let wt = if i.abs() == nt { 0.5 } else { 1.0 };
        spatial += wt * v * dt;
    }

    let side = f.extent * 2.0;
    let dsig = PI / side;
    let smax = PI / d;
    let ns = (smax / dsig).round() as i64;
    let (nx, ny) = (-se, ce);
    let mut freq = 0.0;
    let mut col_sum = vec![Complex64::new(0.0, 0.0); h];
    for i in -ns..=ns {
        let sig = i as f64 * dsig;
        let (wx, wy) = (sig * nx, sig * ny);
        let ex: Vec<Complex64> = xs.iter().map(|&x| Complex64::from_polar(1.0, -wx * x)).collect();
        for (r, cs) in col_sum.iter_mut().enumerate() {
            let row = &f.pixels[r * w..(r + 1) * w];
            *cs = row.iter().zip(&ex).map(|(&a, e)| e * a).sum();
        }
        let val: Complex64 =
            col_sum.iter().zip(&ys).map(|(cs, &y)| cs * Complex64::from_polar(1.0, -wy * y)).sum::<Complex64>() * d * d;
        let wt = if i.abs() == ns { 0.5 } else { 1.0 };
        freq += wt * val.re * dsig;
    }
    (spatial, freq / (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk(n: usize, radius: f64) -> Image {
        let mut f = Image::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let (x, y) = (f.x_at(c), f.y_at(r));
                if x * x + y * y <= radius * radius {
                    f.pixels[r * n + c] = 1.0;
                }
            }
        }
        f
    }

    fn gaussian(n: usize, cx: f64, cy: f64, sigma: f64) -> Image {
        let mut f = Image::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let (x, y) = (f.x_at(c) - cx, f.y_at(r) - cy);
                f.pixels[r * n + c] = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
            }
        }
        f
    }

    #[test]
    fn geometry_validation() {
        assert!(matches!(RadonGeometry::new(vec![], 10, 0.1), Err(Error::Geometry(_))));
        assert!(RadonGeometry::new(vec![0.0, 0.0], 10, 0.1).is_err());
        assert!(RadonGeometry::new(vec![0.0, PI], 10, 0.1).is_err());
        let g = RadonGeometry::degree_sweep(-35.0, 35.0, 1.0, 256, 256).unwrap();
        assert_eq!(g.angles.len(), 71);
        assert_eq!(g.offset_count, 363);
        let off = g.offsets();
        assert!((off[0] + off[off.len() - 1]).abs() < 1e-12);
        let r = g.range();
        assert!(r.center.abs() < 1e-9 && (r.half_width - 35f64.to_radians()).abs() < 1e-9);
    }

    #[test]
    fn kernel_branches_sum_to_one() {
        let h = decimation_kernel();
        for p in 0..OVERSAMPLE {
            let s: f64 = h.iter().skip(p).step_by(OVERSAMPLE).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn disk_chords() {
        let n = 256;
        let rad = 0.5;
        let f = disk(n, rad);
        let geom = RadonGeometry::degree_sweep(0.0, 170.0, 10.0, n, n).unwrap();
        let g = radon(&f, &geom).unwrap();
        let off = geom.offsets();
        let mut err = 0.0;
        let mut norm = 0.0;
        for m in 0..geom.angles.len() {
            for (i, &s) in off.iter().enumerate() {
                if (s.abs() - rad).abs() < 0.05 {
                    continue;
                }
                let truth = if s.abs() < rad { 2.0 * (rad * rad - s * s).sqrt() } else { 0.0 };
                err += (g.row(m)[i] - truth).powi(2);
                norm += truth * truth;
            }
        }
        assert!((err / norm).sqrt() < 1e-2, "{}", (err / norm).sqrt());
    }

    #[test]
    fn mass_is_conserved_per_angle() {
        let n = 128;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut f = Image::zeros(n, n);
        for r in 16..112 {
            for c in 16..112 {
                f.pixels[r * n + c] = rng.random_range(0.0..1.0);
            }
        }
        let mass: f64 = f.pixels.iter().sum::<f64>() * f.spacing().powi(2);
        let geom = RadonGeometry::degree_sweep(0.0, 179.0, 7.0, n, n).unwrap();
        let g = radon(&f, &geom).unwrap();
        for m in 0..geom.angles.len() {
            let s: f64 = g.row(m).iter().sum::<f64>() * geom.offset_spacing;
            assert!((s - mass).abs() <= 1e-3 * mass, "angle {m}: {s} vs {mass}");
        }
    }

    #[test]
    fn narrow_detector_is_rejected() {
        let f = disk(64, 0.9);
        let geom = RadonGeometry::new(vec![0.0], 10, 0.05).unwrap();
        assert!(matches!(radon(&f, &geom), Err(Error::Geometry(_))));
    }

    #[test]
    fn adjoint_identity() {
        let n = 128;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = Image::new(n, n, (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let geom = RadonGeometry::degree_sweep(0.0, 178.0, 2.0, n, n).unwrap();
        let mut g = geom.zero_sinogram();
        g.samples.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        let lhs = radon(&f, &geom).unwrap().dot(&g);
        let rhs = f.dot(&backprojection(&g, n, n, 1.0).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn zero_inputs() {
        let geom = RadonGeometry::degree_sweep(0.0, 90.0, 10.0, 64, 64).unwrap();
        let g = geom.zero_sinogram();
        assert!(backprojection(&g, 64, 64, 1.0).unwrap().pixels.iter().all(|&v| v == 0.0));
        assert!(fbp(&g, 64, 64, 1.0, &FbpFilter::default()).unwrap().pixels.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_angle_backprojection_smears_along_lines() {
        let n = 64;
        let geom = RadonGeometry::new(vec![0.0], 91, 2.0 * SQRT_2 / 91.0).unwrap();
        let mut g = geom.zero_sinogram();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        g.samples.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
        let b = backprojection(&g, n, n, 1.0).unwrap();
        // theta = 0 integrates along x2, so columns are constant
        for c in 0..n {
            for r in 1..n {
                assert!((b.get(r, c) - b.get(0, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_covariance() {
        let n = 128;
        let (cx, cy) = (0.3, -0.1);
        let alpha = 30f64.to_radians();
        let f = gaussian(n, cx, cy, 0.08);
        let (rx, ry) = (cx * alpha.cos() - cy * alpha.sin(), cx * alpha.sin() + cy * alpha.cos());
        let fr = gaussian(n, rx, ry, 0.08);
        let geom = RadonGeometry::degree_sweep(40.0, 100.0, 20.0, n, n).unwrap();
        let shifted = RadonGeometry::degree_sweep(10.0, 70.0, 20.0, n, n).unwrap();
        let a = radon(&fr, &geom).unwrap();
        let b = radon(&f, &shifted).unwrap();
        let err: f64 = a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(err / a.norm() < 1e-2);
    }

    #[test]
    fn fbp_improves_with_more_angles() {
        let n = 128;
        let f = gaussian(n, 0.1, 0.2, 0.15);
        let mut last = f64::INFINITY;
        for count in [23, 45, 90, 180] {
            let step = 180.0 / count as f64;
            let geom = RadonGeometry::degree_sweep(0.0, 180.0 - step, step, n, n).unwrap();
            let rec = fbp(&radon(&f, &geom).unwrap(), n, n, 1.0, &FbpFilter::default()).unwrap();
            let err = rec.pixels.iter().zip(&f.pixels).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / f.norm();
            assert!(err < last, "{count} angles: {err} vs {last}");
            last = err;
        }
        assert!(last < 0.05, "{last}");
    }

    #[test]
    fn filter_windows() {
        let ram = FbpFilter::default();
        assert_eq!(ram.window(0.9), 1.0);
        let half = FbpFilter::new(FilterKind::Hann, 0.5).unwrap();
        assert_eq!(half.window(0.6), 0.0);
        assert!((half.window(0.25) - 0.5).abs() < 1e-12);
        assert!(FbpFilter::new(FilterKind::SheppLogan, 0.0).is_err());
        assert_eq!("shepp-logan".parse::<FilterKind>().unwrap(), FilterKind::SheppLogan);
    }

    #[test]
    fn fourier_slice_gaussian() {
        let sigma = 0.1;
        let f = gaussian(64, 0.0, 0.0, sigma);
        let (a, b) = fourier_slice_check(&f, 0.0);
        // grid does not contain the origin, so compare with the interpolant's value
        let mass = sigma * (2.0 * PI).sqrt();
        assert!((a - b).abs() <= 1e-6 * a.abs(), "{a} {b}");
        assert!((a / mass - 1.0).abs() < 1e-2);
        for eta in [30f64, 45.0, 90.0] {
            let (a, b) = fourier_slice_check(&f, eta.to_radians());
            assert!((a - b).abs() <= 1e-4 * a.abs(), "eta {eta}: {a} {b}");
        }
    }

    #[test]
    fn analytic_rejects_unsupported_scales() {
        let sys = CurveletSystem::build(64, 64, 3).unwrap();
        assert!(matches!(
            analytic_radon_curvelet(&sys, &CurveletIndex::lowpass((0, 0)), 0.0, 0.0),
            Err(Error::UnsupportedIndex(_))
        ));
        assert!(matches!(
            analytic_radon_curvelet(&sys, &CurveletIndex::new(2, 0, (0, 0)), 0.0, 0.0),
            Err(Error::UnsupportedIndex(_))
        ));
    }

    #[test]
    fn analytic_vanishes_outside_angular_support() {
        let sys = CurveletSystem::build(128, 128, 4).unwrap();
        for &(j, l) in &[(1, 0), (2, 3), (2, -3)] {
            let idx = CurveletIndex::new(j, l, (1, 2));
            let slot = sys.slot(j, l).unwrap();
            let wl = sys.wedges[slot.wedge].l as f64 * orientation_spacing(j);
            let dj = orientation_spacing(j);
            for i in 0..360 {
                let th = (i as f64).to_radians();
                let off = wrap_angle(th - wl).abs().min(wrap_angle(th + PI - wl).abs());
                if off >= dj {
                    assert_eq!(analytic_radon_curvelet(&sys, &idx, th, 0.01).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn analytic_decays_far_from_centre() {
        let sys = CurveletSystem::build(128, 128, 4).unwrap();
        let idx = CurveletIndex::new(1, 1, (0, 0));
        let th = orientation_spacing(1);
        let peak = (0..200)
            .map(|i| analytic_radon_curvelet(&sys, &idx, th, -0.5 + i as f64 / 200.0).unwrap().abs())
            .fold(0.0, f64::max);
        for s in [30.0, -45.0, 120.0] {
            assert!(analytic_radon_curvelet(&sys, &idx, th, s).unwrap().abs() <= 1e-8 * peak);
        }
    }
}
