//! Domain types shared by every module: images, sinograms, angular ranges
//! and curvelet indices.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Real attenuation values on a pixel grid covering `[-extent, extent]`
/// along the longer side. Row `i` sits at `y = (i - (h-1)/2) * spacing`,
/// column `c` at `x = (c - (w-1)/2) * spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub extent: f64,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        Self::with_extent(width, height, pixels, 1.0)
    }

    pub fn with_extent(width: usize, height: usize, pixels: Vec<f64>, extent: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension("image must have nonzero size".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "expected {} pixels for {}x{}, got {}",
                width * height,
                width,
                height,
                pixels.len()
            )));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Argument(format!("extent must be positive, got {extent}")));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("image contains non-finite values".into()));
        }
        Ok(Image { width, height, pixels, extent })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Image { width, height, pixels: vec![0.0; width * height], extent: 1.0 }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.width.max(self.height) as f64
    }

    pub fn x_at(&self, col: usize) -> f64 {
        (col as f64 - (self.width as f64 - 1.0) / 2.0) * self.spacing()
    }

    pub fn y_at(&self, row: usize) -> f64 {
        (row as f64 - (self.height as f64 - 1.0) / 2.0) * self.spacing()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn norm(&self) -> f64 {
        self.pixels.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Image) -> f64 {
        self.pixels.iter().zip(&other.pixels).map(|(a, b)| a * b).sum()
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Closed angular interval `[center - half_width, center + half_width]`,
/// identified with its antipodal copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularRange {
    pub center: f64,
    pub half_width: f64,
}

impl AngularRange {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::Argument("range center must be finite".into()));
        }
        if !(half_width > 0.0 && half_width <= PI / 2.0 + 1e-12) {
            return Err(Error::Argument(format!(
                "half width must lie in (0, pi/2], got {half_width}"
            )));
        }
        Ok(AngularRange { center, half_width: half_width.min(PI / 2.0) })
    }

    pub fn from_degrees(center_deg: f64, half_width_deg: f64) -> Result<Self> {
        Self::new(center_deg.to_radians(), half_width_deg.to_radians())
    }

    /// `[0, theta]`, the acquisition used by the reconstruction experiments.
    pub fn from_span(theta: f64) -> Result<Self> {
        Self::new(theta / 2.0, theta / 2.0)
    }

    pub fn full() -> Self {
        AngularRange { center: 0.0, half_width: PI / 2.0 }
    }

    pub fn is_full(&self) -> bool {
        self.half_width >= PI / 2.0 - 1e-12
    }
}

/// Radon data on an `(angle, offset)` grid, angle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub angles: Vec<f64>,
    pub offsets: Vec<f64>,
    pub samples: Vec<f64>,
    pub range: AngularRange,
}

impl Sinogram {
    pub fn new(angles: Vec<f64>, offsets: Vec<f64>, samples: Vec<f64>, range: AngularRange) -> Result<Self> {
        if angles.is_empty() || offsets.is_empty() {
            return Err(Error::Dimension("sinogram needs at least one angle and one offset".into()));
        }
        if samples.len() != angles.len() * offsets.len() {
            return Err(Error::Dimension(format!(
                "expected {}x{} samples, got {}",
                angles.len(),
                offsets.len(),
                samples.len()
            )));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("angles must be strictly increasing".into()));
        }
        if offsets.len() > 1 {
            let step = offsets[1] - offsets[0];
            let uniform = offsets
                .windows(2)
                .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
            if !(step > 0.0 && uniform) {
                return Err(Error::Argument("offsets must be uniformly increasing".into()));
            }
        }
        if let Some(a) = angles.iter().find(|&&a| !angular_range_contains(&range, a)) {
            return Err(Error::Argument(format!("angle {a} lies outside the declared range")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("sinogram contains non-finite values".into()));
        }
        Ok(Sinogram { angles, offsets, samples, range })
    }

    pub fn zeros_like(&self) -> Self {
        Sinogram { samples: vec![0.0; self.samples.len()], ..self.clone() }
    }

    pub fn row(&self, m: usize) -> &[f64] {
        let n = self.offsets.len();
        &self.samples[m * n..(m + 1) * n]
    }

    pub fn norm(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Sinogram) -> f64 {
        self.samples.iter().zip(&other.samples).map(|(a, b)| a * b).sum()
    }

    pub fn same_grid(&self, other: &Sinogram) -> bool {
        self.angles == other.angles && self.offsets == other.offsets
    }
}

/// Distance between the lines at angles `a` and `b`, in `[0, pi/2]`.
pub fn line_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Folds an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

pub fn angular_range_contains(range: &AngularRange, theta: f64) -> bool {
    line_distance(theta, range.center) <= range.half_width + 1e-12
}

/// Tightest `(center, half_width)` covering every angle as a line
/// direction. The complement of the largest circular gap mod pi is the
/// covered arc; among equal gaps the centre nearest the raw midpoint wins,
/// and the centre is shifted by multiples of pi towards that midpoint.
pub fn covering_range(angles: &[f64]) -> Option<(f64, f64)> {
    if angles.is_empty() || angles.iter().any(|a| !a.is_finite()) {
        return None;
    }
    let lo = angles.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let mut folded: Vec<f64> = angles.iter().map(|a| a.rem_euclid(PI)).collect();
    folded.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = folded.len();
    let gaps: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let next = if i + 1 < n { folded[i + 1] } else { folded[0] + PI };
            (next - folded[i], next)
        })
        .collect();
    let largest = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let mut best: Option<(f64, f64)> = None;
    for &(gap, start) in &gaps {
        if gap < largest - 1e-12 {
            continue;
        }
        let half = ((PI - gap) / 2.0).max(0.0);
        let c = start + half;
        let c = c + ((mid - c) / PI).round() * PI;
        if best.is_none_or(|(bc, _)| (c - mid).abs() < (bc - mid).abs() - 1e-12) {
            best = Some((c, half));
        }
    }
    best
}

/// Index `(j, l, k)`; `j = -1` is the low-pass band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CurveletIndex {
    pub j: i32,
    pub l: i32,
    pub k: (i32, i32),
}

impl CurveletIndex {
    pub fn new(j: i32, l: i32, k: (i32, i32)) -> Self {
        CurveletIndex { j, l, k }
    }

    pub fn lowpass(k: (i32, i32)) -> Self {
        CurveletIndex { j: -1, l: 0, k }
    }

    pub fn validate(&self) -> Result<()> {
        if self.j < -1 {
            return Err(Error::Index(format!("scale {} below -1", self.j)));
        }
        if self.j == -1 {
            if self.l != 0 {
                return Err(Error::Index("low-pass index must have l = 0".into()));
            }
            return Ok(());
        }
        let half = (num_orientations(self.j) / 2) as i32;
        if self.l < -half || self.l >= half {
            return Err(Error::Index(format!(
                "orientation {} outside [{}, {}) at scale {}",
                self.l, -half, half, self.j
            )));
        }
        Ok(())
    }
}

fn ceil_half(j: i32) -> i32 {
    (j + 1).div_euclid(2)
}

pub fn num_orientations(j: i32) -> usize {
    1usize << (ceil_half(j.max(0)) + 2)
}

/// Angular spacing `pi * 2^(-ceil(j/2) - 1)` between neighbouring orientations.
pub fn orientation_spacing(j: i32) -> f64 {
    2.0 * PI / num_orientations(j) as f64
}

pub fn orientation_angle(j: i32, l: i32) -> Result<f64> {
    if j < 0 {
        return Err(Error::Index(format!("orientation undefined at scale {j}")));
    }
    CurveletIndex::new(j, l, (0, 0)).validate()?;
    Ok(l as f64 * orientation_spacing(j))
}

/// Partner orientation `l +- L/2` sharing the same line direction.
pub fn antipode(j: i32, l: i32) -> i32 {
    let half = (num_orientations(j) / 2) as i32;
    if l < 0 {
        l + half
    } else {
        l - half
    }
}
