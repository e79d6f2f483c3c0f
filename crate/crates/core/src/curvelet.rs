//! Digital curvelet tight frame built from polar wedge windows on the DFT
//! grid, each wrapped onto its own rectangular coefficient grid.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;
use std::sync::Arc;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fft::{smooth_size, Fft2, C64};
use crate::geometry::{antipode, num_orientations, orientation_angle, orientation_spacing, wrap_angle, CurveletIndex, Image};
use crate::windows::{angular, lowpass_sq, radial, WindowPair};

/// Which part of a wedge's complex coefficients a slot stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Real,
    Re,
    Im,
}

/// One `(j, l)` block of the flat coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub j: i32,
    pub l: i32,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    pub wedge: usize,
    pub part: Part,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub slots: Vec<Slot>,
    pub total: usize,
}

/// Discretized support of one frequency window.
#[derive(Debug, Clone)]
pub struct Wedge {
    pub j: i32,
    pub l: i32,
    pub rows: usize,
    pub cols: usize,
    /// flat index into the `height x width` DFT array
    pub src: Vec<u32>,
    /// flat index into the `rows x cols` coefficient grid
    pub dst: Vec<u32>,
    pub win: Vec<f64>,
    /// unwrapped frequency (row, col) for each support point
    pub freq: Vec<(i32, i32)>,
    pub slots: [Option<usize>; 2],
}

pub struct CurveletSystem {
    pub width: usize,
    pub height: usize,
    pub num_scales: usize,
    /// radial scale unit in cycles per image side
    pub rho: f64,
    pub wedges: Vec<Wedge>,
    pub layout: Arc<Layout>,
    pub windows: WindowPair,
    image_fft: Fft2,
    grid_ffts: HashMap<(usize, usize), Fft2>,
}

impl std::fmt::Debug for CurveletSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CurveletSystem")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("num_scales", &self.num_scales)
            .field("coefficients", &self.layout.total)
            .finish()
    }
}

pub fn default_scales(width: usize, height: usize) -> usize {
    let m = width.min(height) as f64;
    (m.log2().ceil() as usize).saturating_sub(3).max(2)
}

pub fn max_scales(width: usize, height: usize) -> usize {
    (width.min(height) as f64).log2().floor() as usize - 2
}

// Smooth partition of unity over the period translates of one axis.
fn period_blend(t: f64, n: f64) -> f64 {
    let w = n / 16.0;
    let a = t.abs();
    if a <= n / 2.0 - w {
        1.0
    } else if a >= n / 2.0 + w {
        0.0
    } else {
        1.0 - crate::windows::nu((a - n / 2.0 + w) / (2.0 * w))
    }
}

struct Grid {
    h: usize,
    w: usize,
    sy: f64,
    sx: f64,
}

impl Grid {
    fn scaled(&self, p: i32, q: i32) -> (f64, f64) {
        (q as f64 * self.sx, p as f64 * self.sy)
    }

    fn base(&self, p: usize, q: usize) -> (i32, i32) {
        let pp = if p >= self.h.div_ceil(2) { p as i32 - self.h as i32 } else { p as i32 };
        let qq = if q >= self.w.div_ceil(2) { q as i32 - self.w as i32 } else { q as i32 };
        (pp, qq)
    }
}

impl CurveletSystem {
    pub fn build(width: usize, height: usize, num_scales: usize) -> Result<Self> {
        if width < 32 || height < 32 {
            return Err(Error::Config(format!("image {width}x{height} is smaller than 32x32")));
        }
        let max = max_scales(width, height);
        if num_scales < 2 || num_scales > max {
            return Err(Error::Config(format!(
                "num_scales {num_scales} outside [2, {max}] for {width}x{height}"
            )));
        }
        let big = width.max(height) as f64;
        let jmax = num_scales as i32 - 1;
        let rho = 3.0 * big / (8.0 * 2f64.powi(jmax));
        let grid = Grid { h: height, w: width, sy: big / height as f64, sx: big / width as f64 };

        let mut wedges = Vec::new();
        wedges.push(Self::make_wedge(&grid, -1, 0, |p, q| {
            let (x, y) = grid.scaled(p, q);
            lowpass_sq(x.hypot(y) / rho).sqrt()
        }));
        for j in 0..=jmax {
            let nl = num_orientations(j) as i32;
            let dj = orientation_spacing(j);
            for l in -nl / 4..nl / 4 {
                let theta = l as f64 * dj;
                let wedge = if j < jmax {
                    let scale = rho * 2f64.powi(j);
                    Self::make_wedge(&grid, j, l, |p, q| {
                        let (x, y) = grid.scaled(p, q);
                        let r = x.hypot(y);
                        let wr = radial(r / scale);
                        if wr == 0.0 {
                            return 0.0;
                        }
                        wr * angular(wrap_angle(y.atan2(x) - theta) / dj)
                    })
                } else {
                    Self::make_finest(&grid, j, l, theta, dj, rho)
                };
                wedges.push(wedge);
            }
        }

        // slots ordered by (j, l); the antipode of a half-set wedge stores its Im part
        let mut by_key: Vec<(i32, i32, usize, Part)> = Vec::new();
        by_key.push((-1, 0, 0, Part::Real));
        for (wi, wd) in wedges.iter().enumerate().skip(1) {
            by_key.push((wd.j, wd.l, wi, Part::Re));
            by_key.push((wd.j, antipode(wd.j, wd.l), wi, Part::Im));
        }
        by_key.sort_by_key(|&(j, l, _, _)| (j, l));
        let mut slots = Vec::with_capacity(by_key.len());
        let mut offset = 0;
        for (si, &(j, l, wi, part)) in by_key.iter().enumerate() {
            let wd = &mut wedges[wi];
            let which = if part == Part::Im { 1 } else { 0 };
            wd.slots[which] = Some(si);
            slots.push(Slot { j, l, rows: wd.rows, cols: wd.cols, offset, wedge: wi, part });
            offset += wd.rows * wd.cols;
        }

        let mut planner = FftPlanner::new();
        let image_fft = Fft2::new(&mut planner, height, width);
        let mut grid_ffts = HashMap::new();
        for wd in &wedges {
            grid_ffts
                .entry((wd.rows, wd.cols))
                .or_insert_with(|| Fft2::new(&mut planner, wd.rows, wd.cols));
        }
        Ok(CurveletSystem {
            width,
            height,
            num_scales,
            rho,
            wedges,
            layout: Arc::new(Layout { slots, total: offset }),
            windows: WindowPair::sample(1001),
            image_fft,
            grid_ffts,
        })
    }

    fn make_wedge(grid: &Grid, j: i32, l: i32, window: impl Fn(i32, i32) -> f64) -> Wedge {
        let mut pts = Vec::new();
        for p in 0..grid.h {
            for q in 0..grid.w {
                let (pp, qq) = grid.base(p, q);
                let v = window(pp, qq);
                if v > 0.0 {
                    pts.push((p * grid.w + q, pp, qq, v));
                }
            }
        }
        Self::pack(j, l, pts)
    }

    // Finest scale: complement of the coarser windows, blended over period
    // translates so the window stays smooth across the Nyquist lines.
    fn make_finest(grid: &Grid, j: i32, l: i32, theta: f64, dj: f64, rho: f64) -> Wedge {
        let (h, w) = (grid.h as i32, grid.w as i32);
        // closed form of 1 - W0^2 - sum_{j<J} W_j^2, free of cancellation
        let outer = rho * 2f64.powi(j - 1);
        let fin_sq = |r: f64| {
            let u = r / outer;
            if u <= 1.0 {
                0.0
            } else if u >= 2.0 {
                1.0
            } else {
                (std::f64::consts::FRAC_PI_2 * crate::windows::nu(u - 1.0)).sin().powi(2)
            }
        };
        let mut pts = Vec::new();
        for p in 0..grid.h {
            for q in 0..grid.w {
                let (pp, qq) = grid.base(p, q);
                let mut total = 0.0;
                let mut best = (0.0, pp, qq);
                for dp in [-h, 0, h] {
                    let cp = period_blend((pp + dp) as f64, h as f64);
                    if cp == 0.0 {
                        continue;
                    }
                    for dq in [-w, 0, w] {
                        let cq = period_blend((qq + dq) as f64, w as f64);
                        if cq == 0.0 {
                            continue;
                        }
                        let (x, y) = grid.scaled(pp + dp, qq + dq);
                        let v = angular(wrap_angle(y.atan2(x) - theta) / dj);
                        if v == 0.0 {
                            continue;
                        }
                        let c = cp * cq * v * v * fin_sq(x.hypot(y));
                        total += c;
                        if c > best.0 {
                            best = (c, pp + dp, qq + dq);
                        }
                    }
                }
                if total > 0.0 {
                    pts.push((p * grid.w + q, best.1, best.2, total.sqrt()));
                }
            }
        }
        Self::pack(j, l, pts)
    }

    fn pack(j: i32, l: i32, pts: Vec<(usize, i32, i32, f64)>) -> Wedge {
        let (mut p0, mut p1, mut q0, mut q1) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
        for &(_, p, q, _) in &pts {
            p0 = p0.min(p);
            p1 = p1.max(p);
            q0 = q0.min(q);
            q1 = q1.max(q);
        }
        let rows = smooth_size((p1 - p0 + 1) as usize);
        let cols = smooth_size((q1 - q0 + 1) as usize);
        let mut wd = Wedge {
            j,
            l,
            rows,
            cols,
            src: Vec::with_capacity(pts.len()),
            dst: Vec::with_capacity(pts.len()),
            win: Vec::with_capacity(pts.len()),
            freq: Vec::with_capacity(pts.len()),
            slots: [None, None],
        };
        for (s, p, q, v) in pts {
            let a = p.rem_euclid(rows as i32) as usize;
            let b = q.rem_euclid(cols as i32) as usize;
            wd.src.push(s as u32);
            wd.dst.push((a * cols + b) as u32);
            wd.win.push(v);
            wd.freq.push((p, q));
        }
        wd
    }

    pub fn finest_scale(&self) -> i32 {
        self.num_scales as i32 - 1
    }

    pub fn num_coefficients(&self) -> usize {
        self.layout.total
    }

    pub fn slot(&self, j: i32, l: i32) -> Option<&Slot> {
        self.layout.slots.iter().find(|s| s.j == j && s.l == l)
    }

    pub fn slot_index(&self, j: i32, l: i32) -> Option<usize> {
        self.layout.slots.iter().position(|s| s.j == j && s.l == l)
    }

    /// Scales present in the system, low-pass first.
    pub fn scales(&self) -> Vec<i32> {
        (-1..self.num_scales as i32).collect()
    }

    /// Flat position of `index` in a coefficient vector.
    pub fn flat_index(&self, index: &CurveletIndex) -> Result<usize> {
        index.validate()?;
        let slot = self
            .slot(index.j, index.l)
            .ok_or_else(|| Error::Index(format!("no wedge ({}, {}) in this system", index.j, index.l)))?;
        let (r0, c0) = ((slot.rows / 2) as i32, (slot.cols / 2) as i32);
        let (row, col) = (r0 + index.k.1, c0 + index.k.0);
        if row < 0 || col < 0 || row >= slot.rows as i32 || col >= slot.cols as i32 {
            return Err(Error::Index(format!(
                "location {:?} outside the {}x{} grid of ({}, {})",
                index.k, slot.rows, slot.cols, index.j, index.l
            )));
        }
        Ok(slot.offset + row as usize * slot.cols + col as usize)
    }

    pub fn index_at(&self, flat: usize) -> Option<CurveletIndex> {
        let s = self.layout.slots.iter().find(|s| flat >= s.offset && flat < s.offset + s.len())?;
        let r = (flat - s.offset) / s.cols;
        let c = (flat - s.offset) % s.cols;
        let k = (c as i32 - (s.cols / 2) as i32, r as i32 - (s.rows / 2) as i32);
        Some(CurveletIndex::new(s.j, s.l, k))
    }

    /// Physical centre of the element `index`, as `(x, y)`.
    pub fn location(&self, index: &CurveletIndex) -> Result<(f64, f64)> {
        self.flat_index(index)?;
        let slot = self.slot(index.j, index.l).unwrap();
        let d = 2.0 / self.width.max(self.height) as f64;
        let xc = ((self.width / 2) as f64 - (self.width as f64 - 1.0) / 2.0) * d;
        let yc = ((self.height / 2) as f64 - (self.height as f64 - 1.0) / 2.0) * d;
        Ok((
            xc + index.k.0 as f64 * self.width as f64 / slot.cols as f64 * d,
            yc + index.k.1 as f64 * self.height as f64 / slot.rows as f64 * d,
        ))
    }

    /// Largest deviation of `sum U^2` from 1 over the DFT grid.
    pub fn partition_deviation(&self) -> f64 {
        let (h, w) = (self.height, self.width);
        let mut acc = vec![0.0; h * w];
        for wd in &self.wedges {
            for (&s, &v) in wd.src.iter().zip(&wd.win) {
                let s = s as usize;
                acc[s] += v * v;
                if wd.j >= 0 {
                    let (p, q) = (s / w, s % w);
                    acc[((h - p) % h) * w + (w - q) % w] += v * v;
                }
            }
        }
        acc.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)
    }

    fn check_image(&self, f: &Image) -> Result<()> {
        if f.width != self.width || f.height != self.height {
            return Err(Error::Dimension(format!(
                "image {}x{} does not match system {}x{}",
                f.width, f.height, self.width, self.height
            )));
        }
        Ok(())
    }

    fn check_coeffs(&self, c: &CoeffSet) -> Result<()> {
        if !Arc::ptr_eq(&c.layout, &self.layout) && *c.layout != *self.layout {
            return Err(Error::Dimension("coefficient layout does not match system".into()));
        }
        Ok(())
    }

    fn image_spectrum(&self, f: &Image, work: &mut Vec<C64>) -> Vec<C64> {
        let (h, w) = (self.height, self.width);
        let (i0, j0) = (h / 2, w / 2);
        let mut spec = vec![C64::new(0.0, 0.0); h * w];
        for i in 0..h {
            let ri = (i + h - i0) % h;
            for j in 0..w {
                spec[ri * w + (j + w - j0) % w] = C64::new(f.pixels[i * w + j], 0.0);
            }
        }
        self.image_fft.forward(&mut spec, work);
        spec
    }

    /// Analysis operator `T`.
    pub fn analysis(&self, f: &Image) -> Result<CoeffSet> {
        self.analysis_masked(f, None)
    }

    /// `T` restricted to wedges whose mask entry is true; skipped wedges
    /// leave exact zeros.
    pub fn analysis_masked(&self, f: &Image, mask: Option<&[bool]>) -> Result<CoeffSet> {
        self.check_image(f)?;
        let mut work = Vec::new();
        let spec = self.image_spectrum(f, &mut work);
        let mut out = CoeffSet::zeros(self);
        let mut buf = Vec::new();
        for (wi, wd) in self.wedges.iter().enumerate() {
            if let Some(m) = mask {
                if !m[wi] {
                    continue;
                }
            }
            let (r, c) = (wd.rows, wd.cols);
            buf.clear();
            buf.resize(r * c, C64::new(0.0, 0.0));
            for ((&s, &d), &v) in wd.src.iter().zip(&wd.dst).zip(&wd.win) {
                buf[d as usize] = spec[s as usize] * v;
            }
            self.grid_ffts[&(r, c)].inverse(&mut buf, &mut work);
            let (r0, c0) = (r / 2, c / 2);
            let scale = if wd.j < 0 { 1.0 } else { SQRT_2 };
            let lay = &self.layout.slots;
            let re_off = lay[wd.slots[0].unwrap()].offset;
            let im_off = wd.slots[1].map(|s| lay[s].offset);
            for a in 0..r {
                let sa = (a + r - r0) % r;
                for b in 0..c {
                    let z = buf[sa * c + (b + c - c0) % c];
                    out.data[re_off + a * c + b] = scale * z.re;
                    if let Some(o) = im_off {
                        out.data[o + a * c + b] = scale * z.im;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Synthesis operator `T*`.
    pub fn synthesis(&self, c: &CoeffSet) -> Result<Image> {
        self.synthesis_masked(c, None)
    }

    pub fn synthesis_masked(&self, coeffs: &CoeffSet, mask: Option<&[bool]>) -> Result<Image> {
        self.check_coeffs(coeffs)?;
        let (h, w) = (self.height, self.width);
        let mut acc = vec![C64::new(0.0, 0.0); h * w];
        let mut buf = Vec::new();
        let mut work = Vec::new();
        for (wi, wd) in self.wedges.iter().enumerate() {
            if let Some(m) = mask {
                if !m[wi] {
                    continue;
                }
            }
            let (r, c) = (wd.rows, wd.cols);
            let lay = &self.layout.slots;
            let re = &coeffs.data[lay[wd.slots[0].unwrap()].offset..][..r * c];
            let im = wd.slots[1].map(|s| &coeffs.data[lay[s].offset..][..r * c]);
            buf.clear();
            buf.resize(r * c, C64::new(0.0, 0.0));
            let (r0, c0) = (r / 2, c / 2);
            let scale = if wd.j < 0 { 1.0 } else { SQRT_2 };
            for a in 0..r {
                let sa = (a + r - r0) % r;
                for b in 0..c {
                    let k = a * c + b;
                    let z = match im {
                        Some(x) => C64::new(re[k], x[k]),
                        None => C64::new(re[k], 0.0),
                    };
                    buf[sa * c + (b + c - c0) % c] = z * scale;
                }
            }
            self.grid_ffts[&(r, c)].forward(&mut buf, &mut work);
            for ((&s, &d), &v) in wd.src.iter().zip(&wd.dst).zip(&wd.win) {
                acc[s as usize] += buf[d as usize] * v;
            }
        }
        self.image_fft.inverse(&mut acc, &mut work);
        let (i0, j0) = (h / 2, w / 2);
        let mut pixels = vec![0.0; h * w];
        for i in 0..h {
            let ri = (i + h - i0) % h;
            for j in 0..w {
                pixels[i * w + j] = acc[ri * w + (j + w - j0) % w].re;
            }
        }
        Ok(Image { width: w, height: h, pixels, extent: 1.0 })
    }

    /// `(<T f, c>, <f, T* c>)`.
    pub fn adjoint_analysis_consistency(&self, f: &Image, c: &CoeffSet) -> Result<(f64, f64)> {
        let tf = self.analysis(f)?;
        let tc = self.synthesis(c)?;
        Ok((tf.dot(c)?, f.dot(&tc)))
    }

    /// The discrete curvelet `psi_{j,l,k}`: synthesis of a unit coefficient.
    pub fn curvelet_image(&self, index: &CurveletIndex) -> Result<Image> {
        let n = self.flat_index(index)?;
        let mut c = CoeffSet::zeros(self);
        c.data[n] = 1.0;
        self.synthesis(&c)
    }

    /// Wedge mask selecting the wedges that carry at least one kept slot.
    pub fn wedge_mask(&self, keep_slot: impl Fn(&Slot) -> bool) -> Vec<bool> {
        self.wedges
            .iter()
            .map(|wd| wd.slots.iter().flatten().any(|&s| keep_slot(&self.layout.slots[s])))
            .collect()
    }

    pub fn orientation(&self, slot: &Slot) -> Option<f64> {
        if slot.j < 0 {
            None
        } else {
            orientation_angle(slot.j, slot.l).ok()
        }
    }
}

/// Curvelet coefficients, one real grid per `(j, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSet {
    pub layout: Arc<Layout>,
    pub data: Vec<f64>,
}

impl CoeffSet {
    pub fn zeros(system: &CurveletSystem) -> Self {
        CoeffSet { layout: system.layout.clone(), data: vec![0.0; system.layout.total] }
    }

    pub fn from_vec(system: &CurveletSystem, data: Vec<f64>) -> Result<Self> {
        if data.len() != system.layout.total {
            return Err(Error::Dimension(format!(
                "expected {} coefficients, got {}",
                system.layout.total,
                data.len()
            )));
        }
        Ok(CoeffSet { layout: system.layout.clone(), data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn grid(&self, j: i32, l: i32) -> Option<&[f64]> {
        let s = self.layout.slots.iter().find(|s| s.j == j && s.l == l)?;
        Some(&self.data[s.offset..s.offset + s.len()])
    }

    pub fn slot_data(&self, slot: &Slot) -> &[f64] {
        &self.data[slot.offset..slot.offset + slot.len()]
    }

    pub fn slot_data_mut(&mut self, slot_index: usize) -> &mut [f64] {
        let s = &self.layout.slots[slot_index];
        let (o, n) = (s.offset, s.len());
        &mut self.data[o..o + n]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &CoeffSet) -> Result<f64> {
        if self.layout != other.layout {
            return Err(Error::Dimension("coefficient layouts differ".into()));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn same_layout(&self, other: &CoeffSet) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout
    }
}
