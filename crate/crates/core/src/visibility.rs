//! Visible/invisible split of the curvelet index set for an angular range,
//! and the reduced problem built from it.

use std::sync::Arc;

use crate::curvelet::{CoeffSet, CurveletSystem, Layout, Slot};
use crate::error::{Error, Result};
use crate::geometry::{covering_range, line_distance, orientation_angle, orientation_spacing, AngularRange, CurveletIndex};
use crate::radon::{radon, RadonGeometry};

/// Tightest range `[center - half, center + half]` holding all angles.
pub fn extract_range(angles: &[f64]) -> Result<AngularRange> {
    if angles.is_empty() {
        return Err(Error::Argument("cannot extract a range from an empty angle list".into()));
    }
    let (center, half) =
        covering_range(angles).ok_or_else(|| Error::Argument("angles must be finite".into()))?;
    if half <= 1e-12 {
        return Err(Error::Geometry(format!(
            "degenerate angular range: all angles coincide at {:.4} deg",
            center.to_degrees()
        )));
    }
    AngularRange::new(center, half)
}

/// Angular half width of the data wedge at scale `j`.
pub fn wedge_half_width(range: &AngularRange, j: i32) -> f64 {
    range.half_width + orientation_spacing(j)
}

/// True when orientation `(j, l)` misses the open data wedge of `range`.
/// `V` vanishes at the edge of its support, so an orientation exactly on
/// the boundary is invisible.
pub fn is_invisible_orientation(range: &AngularRange, j: i32, l: i32) -> bool {
    if j < 0 {
        return false;
    }
    let theta = orientation_angle(j, l).expect("orientation index validated by caller");
    line_distance(theta, range.center) >= wedge_half_width(range, j) - 1e-12
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityPartition {
    pub range: AngularRange,
    layout: Arc<Layout>,
    /// per slot of the layout
    pub slot_visible: Vec<bool>,
    /// per wedge of the system; slot pairs of one wedge always agree
    pub wedge_visible: Vec<bool>,
    /// `(j, Phi + pi 2^(-ceil(j/2)-1))` per scale
    pub half_widths: Vec<(i32, f64)>,
}

/// Classifies every index of `system` against `range`.
pub fn invisible_indices(system: &CurveletSystem, range: &AngularRange) -> Result<VisibilityPartition> {
    if !(range.half_width > 0.0 && range.half_width <= std::f64::consts::FRAC_PI_2 + 1e-12) {
        return Err(Error::Argument(format!("half width {} outside (0, pi/2]", range.half_width)));
    }
    let slot_visible: Vec<bool> =
        system.layout.slots.iter().map(|s| !is_invisible_orientation(range, s.j, s.l)).collect();
    let wedge_visible = system
        .wedges
        .iter()
        .map(|w| w.slots.iter().flatten().any(|&s| slot_visible[s]))
        .collect();
    let half_widths = (0..system.num_scales as i32).map(|j| (j, wedge_half_width(range, j))).collect();
    Ok(VisibilityPartition { range: *range, layout: system.layout.clone(), slot_visible, wedge_visible, half_widths })
}

impl VisibilityPartition {
    pub fn slots(&self) -> &[Slot] {
        &self.layout.slots
    }

    pub fn full_dim(&self) -> usize {
        self.layout.total
    }

    pub fn visible_count(&self) -> usize {
        self.slots().iter().zip(&self.slot_visible).filter(|(_, &v)| v).map(|(s, _)| s.len()).sum()
    }

    pub fn invisible_count(&self) -> usize {
        self.full_dim() - self.visible_count()
    }

    pub fn is_visible(&self, index: &CurveletIndex) -> bool {
        self.slots()
            .iter()
            .position(|s| s.j == index.j && s.l == index.l)
            .map(|i| self.slot_visible[i])
            .unwrap_or(false)
    }

    /// `(j, l)` pairs whose coefficients are all invisible.
    pub fn invisible_orientations(&self) -> Vec<(i32, i32)> {
        self.slots()
            .iter()
            .zip(&self.slot_visible)
            .filter(|(_, &v)| !v)
            .map(|(s, _)| (s.j, s.l))
            .collect()
    }

    /// Per-entry visibility flags over the flat coefficient vector.
    pub fn entry_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.full_dim()];
        for (s, &v) in self.slots().iter().zip(&self.slot_visible) {
            m[s.offset..s.offset + s.len()].iter_mut().for_each(|x| *x = v);
        }
        m
    }

    /// Every invisible index, enumerated over all locations.
    pub fn invisible_index_list(&self) -> Vec<CurveletIndex> {
        let mut out = Vec::new();
        for (s, &v) in self.slots().iter().zip(&self.slot_visible) {
            if v {
                continue;
            }
            let (r0, c0) = ((s.rows / 2) as i32, (s.cols / 2) as i32);
            for r in 0..s.rows as i32 {
                for c in 0..s.cols as i32 {
                    out.push(CurveletIndex::new(s.j, s.l, (c - c0, r - r0)));
                }
            }
        }
        out
    }
}

/// Zeroes invisible coefficients.
pub fn restrict(c: &CoeffSet, part: &VisibilityPartition) -> Result<CoeffSet> {
    let mut out = c.clone();
    restrict_in_place(&mut out, part)?;
    Ok(out)
}

pub fn restrict_in_place(c: &mut CoeffSet, part: &VisibilityPartition) -> Result<()> {
    if *c.layout != *part.layout {
        return Err(Error::Dimension("coefficients and partition come from different systems".into()));
    }
    for (s, &v) in part.layout.slots.iter().zip(&part.slot_visible) {
        if !v {
            c.data[s.offset..s.offset + s.len()].iter_mut().for_each(|x| *x = 0.0);
        }
    }
    Ok(())
}

/// Full and reduced dimension for acquisitions on `[0, theta]`, degrees.
pub fn dimension_profile(system: &CurveletSystem, thetas_deg: &[f64]) -> Result<Vec<(f64, usize, usize)>> {
    thetas_deg
        .iter()
        .map(|&t| {
            if !(t > 0.0 && t <= 180.0) {
                return Err(Error::Argument(format!("angular range {t} deg outside (0, 180]")));
            }
            let part = invisible_indices(system, &AngularRange::from_span(t.to_radians())?)?;
            Ok((t, part.full_dim(), part.visible_count()))
        })
        .collect()
}

/// `||R_geom psi|| / ||R_full psi||`, the full reference using the same
/// angle step over a half turn.
pub fn kernel_leakage(system: &CurveletSystem, geom: &RadonGeometry, index: &CurveletIndex) -> Result<f64> {
    let psi = system.curvelet_image(index)?;
    let limited = radon(&psi, geom)?.norm();
    let full = radon(&psi, &geom.same_half_turn())?.norm();
    if full == 0.0 {
        return Err(Error::State("curvelet has a vanishing full-range sinogram".into()));
    }
    Ok(limited / full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn deg(v: &[f64]) -> Vec<f64> {
        v.iter().map(|a| a.to_radians()).collect()
    }

    #[test]
    fn extract_symmetric_and_one_sided() {
        let a: Vec<f64> = (-35..=35).map(|d| d as f64).collect();
        let r = extract_range(&deg(&a)).unwrap();
        assert!(r.center.abs() < 1e-9 && (r.half_width.to_degrees() - 35.0).abs() < 1e-9);
        let b: Vec<f64> = (0..=160).map(|d| d as f64).collect();
        let r = extract_range(&deg(&b)).unwrap();
        assert!((r.center.to_degrees() - 80.0).abs() < 1e-9 && (r.half_width.to_degrees() - 80.0).abs() < 1e-9);
        assert!(matches!(extract_range(&deg(&[10.0])), Err(Error::Geometry(_))));
        assert!(matches!(extract_range(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn extract_wraps_through_half_turn() {
        let r = extract_range(&deg(&[170.0, 175.0, 185.0, 190.0])).unwrap();
        assert!((r.center.to_degrees() - 180.0).abs() < 1e-9);
        assert!((r.half_width.to_degrees() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn full_range_hides_nothing() {
        let sys = CurveletSystem::build(128, 128, 4).unwrap();
        let p = invisible_indices(&sys, &AngularRange::full()).unwrap();
        assert_eq!(p.invisible_count(), 0);
        assert_eq!(p.visible_count(), sys.num_coefficients());
    }

    #[test]
    fn lowpass_is_always_visible() {
        let sys = CurveletSystem::build(128, 128, 4).unwrap();
        let p = invisible_indices(&sys, &AngularRange::from_degrees(0.0, 1.0).unwrap()).unwrap();
        assert!(p.is_visible(&CurveletIndex::lowpass((0, 0))));
        assert!(p.invisible_count() > 0);
    }

    #[test]
    fn invisible_sets_shrink_as_range_grows() {
        let sys = CurveletSystem::build(128, 128, 4).unwrap();
        let mut prev: Option<Vec<bool>> = None;
        for d in (5..=90).step_by(5) {
            let p = invisible_indices(&sys, &AngularRange::from_degrees(20.0, d as f64).unwrap()).unwrap();
            if let Some(q) = &prev {
                for (now, before) in p.slot_visible.iter().zip(q) {
                    assert!(!before || *now);
                }
            }
            prev = Some(p.slot_visible.clone());
        }
    }

    #[test]
    fn offset_range_matches_rotated_orientations() {
        // shifting the centre by a multiple of the finest spacing permutes orientations
        let sys = CurveletSystem::build(128, 128, 4).unwrap();
        let step = orientation_spacing(3);
        let shifted = invisible_indices(&sys, &AngularRange::new(4.0 * step, 0.5).unwrap()).unwrap();
        for s in sys.layout.slots.iter().filter(|s| s.j >= 0) {
            let theta = orientation_angle(s.j, s.l).unwrap() - 4.0 * step;
            let d = line_distance(theta, 0.0);
            let expect = d < 0.5 + orientation_spacing(s.j);
            let i = sys.slot_index(s.j, s.l).unwrap();
            assert_eq!(shifted.slot_visible[i], expect);
        }
    }

    #[test]
    fn restrict_is_idempotent_projection() {
        let sys = CurveletSystem::build(64, 64, 3).unwrap();
        let mut c = CoeffSet::zeros(&sys);
        c.data.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64 * 0.37).sin());
        let full = invisible_indices(&sys, &AngularRange::full()).unwrap();
        assert_eq!(restrict(&c, &full).unwrap(), c);
        let p = invisible_indices(&sys, &AngularRange::from_degrees(0.0, 20.0).unwrap()).unwrap();
        let once = restrict(&c, &p).unwrap();
        assert_eq!(restrict(&once, &p).unwrap(), once);
        let mask = p.entry_mask();
        for (i, &v) in once.data.iter().enumerate() {
            assert_eq!(v, if mask[i] { c.data[i] } else { 0.0 });
        }
    }

    #[test]
    fn boundary_orientation_is_invisible() {
        let j = 4;
        let r = AngularRange::new(0.0, PI / 4.0).unwrap();
        // l = 3 at 3pi/8 sits exactly on the wedge boundary
        assert!(!is_invisible_orientation(&r, j, 2));
        assert!(is_invisible_orientation(&r, j, 3));
        assert!(is_invisible_orientation(&r, j, 4));
        assert!(!is_invisible_orientation(&r, j, -2));
    }

    #[test]
    fn profile_reaches_full_dim() {
        let sys = CurveletSystem::build(128, 128, 4).unwrap();
        let prof = dimension_profile(&sys, &[10.0, 45.0, 90.0, 180.0]).unwrap();
        assert!(prof.windows(2).all(|w| w[0].2 <= w[1].2));
        assert_eq!(prof[3].1, prof[3].2);
        assert!(dimension_profile(&sys, &[0.0]).is_err());
    }
}
