//! Periodic-cell geometry of a perforated metallic slab.
//!
//! The reference cell is `[0, d] × [−H, H]`. The slab occupies
//! `|x₂| < ℓ/2` and is perforated by one slit centered at `x₁ = d/2` that
//! spans the full slab thickness.

use serde::{Deserialize, Serialize};

use crate::mesh::MeshError;

/// Smallest element edge the generator will attempt to produce, relative to the period.
pub const MIN_ELEMENT_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetalKind {
    /// Perfect conductor: the metal is removed from the computational domain.
    Pec,
    /// Penetrable metal with a frequency-dependent permittivity.
    Dispersive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum SlitShape {
    Rectangle { width: f64 },
    /// Isosceles trapezoid; `top_width` at `x₂ = ℓ/2`, `base_width` at `x₂ = −ℓ/2`.
    Trapezoid { top_width: f64, base_width: f64 },
}

impl SlitShape {
    pub fn top_width(&self) -> f64 {
        match *self {
            SlitShape::Rectangle { width } => width,
            SlitShape::Trapezoid { top_width, .. } => top_width,
        }
    }

    pub fn base_width(&self) -> f64 {
        match *self {
            SlitShape::Rectangle { width } => width,
            SlitShape::Trapezoid { base_width, .. } => base_width,
        }
    }

    /// Narrowest opening of the slit.
    pub fn min_width(&self) -> f64 {
        self.top_width().min(self.base_width())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    pub thickness: f64,
    pub slit: Option<SlitShape>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GratingGeometry {
    /// Period `d`.
    pub period: f64,
    /// Truncation half-height `H`; the DtN boundaries sit at `x₂ = ±H`.
    pub half_height: f64,
    /// `None` describes an empty (all-vacuum) cell.
    pub slab: Option<Slab>,
    pub metal: MetalKind,
}

impl GratingGeometry {
    /// Slab of thickness `thickness` perforated by `slit`, truncated at `half_height`.
    pub fn new(period: f64, thickness: f64, half_height: f64, slit: SlitShape, metal: MetalKind) -> Self {
        Self { period, half_height, slab: Some(Slab { thickness, slit: Some(slit) }), metal }
    }

    /// Cell containing no metal at all.
    pub fn open_cell(period: f64, half_height: f64) -> Self {
        Self { period, half_height, slab: None, metal: MetalKind::Dispersive }
    }

    /// Default truncation height `ℓ/2 + d/2`.
    pub fn default_half_height(period: f64, thickness: f64) -> f64 {
        0.5 * thickness + 0.5 * period
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let d = self.period;
        if !(d > 0.0 && d.is_finite()) {
            return Err(MeshError::InvalidGeometry(format!("period must be positive, got {d}")));
        }
        if !(self.half_height > 0.0 && self.half_height.is_finite()) {
            return Err(MeshError::InvalidGeometry("half_height must be positive".into()));
        }
        let Some(slab) = self.slab else { return Ok(()) };
        if !(slab.thickness > 0.0 && slab.thickness.is_finite()) {
            return Err(MeshError::InvalidGeometry("slab thickness must be positive".into()));
        }
        if self.half_height <= 0.5 * slab.thickness {
            return Err(MeshError::InvalidGeometry(format!(
                "half_height {} must exceed half the slab thickness {}",
                self.half_height,
                0.5 * slab.thickness
            )));
        }
        if let Some(slit) = slab.slit {
            for w in [slit.top_width(), slit.base_width()] {
                if !(w > 0.0 && w < d) {
                    return Err(MeshError::InvalidGeometry(format!("slit width {w} must lie in (0, {d})")));
                }
            }
            if slit.min_width() < 4.0 * MIN_ELEMENT_FRACTION * d {
                return Err(MeshError::GeometryDegenerate(format!("slit width {} is below resolvable size", slit.min_width())));
            }
        }
        Ok(())
    }

    pub fn thickness(&self) -> f64 {
        self.slab.map_or(0.0, |s| s.thickness)
    }

    pub fn slit(&self) -> Option<SlitShape> {
        self.slab.and_then(|s| s.slit)
    }

    pub fn cell_area(&self) -> f64 {
        2.0 * self.period * self.half_height
    }

    /// Slit polygon (counter-clockwise) in cell coordinates.
    pub fn slit_polygon(&self) -> Option<[[f64; 2]; 4]> {
        let slab = self.slab?;
        let slit = slab.slit?;
        let c = 0.5 * self.period;
        let h = 0.5 * slab.thickness;
        let (t, b) = (0.5 * slit.top_width(), 0.5 * slit.base_width());
        Some([[c - b, -h], [c + b, -h], [c + t, h], [c - t, h]])
    }

    /// Horizontal position of the slit walls at height `x2` (left, right).
    fn slit_walls_at(&self, x2: f64) -> Option<(f64, f64)> {
        let slab = self.slab?;
        let slit = slab.slit?;
        let h = 0.5 * slab.thickness;
        let s = (x2 + h) / (2.0 * h);
        let w = slit.base_width() + s * (slit.top_width() - slit.base_width());
        let c = 0.5 * self.period;
        Some((c - 0.5 * w, c + 0.5 * w))
    }

    /// Whether a point lies in the open metal region.
    pub fn is_metal(&self, p: [f64; 2]) -> bool {
        let Some(slab) = self.slab else { return false };
        let h = 0.5 * slab.thickness;
        if p[1] <= -h || p[1] >= h || p[0] < 0.0 || p[0] > self.period {
            return false;
        }
        match self.slit_walls_at(p[1]) {
            Some((l, r)) => p[0] < l || p[0] > r,
            None => true,
        }
    }

    /// Whether a point lies inside the slit opening (between the walls, inside the slab band).
    pub fn is_in_slit(&self, p: [f64; 2]) -> bool {
        let Some(slab) = self.slab else { return false };
        let h = 0.5 * slab.thickness;
        if p[1] <= -h || p[1] >= h {
            return false;
        }
        self.slit_walls_at(p[1]).is_some_and(|(l, r)| p[0] > l && p[0] < r)
    }

    /// Analytic area of the metal in one cell.
    pub fn metal_area(&self) -> f64 {
        let Some(slab) = self.slab else { return 0.0 };
        let slit_area = slab.slit.map_or(0.0, |s| 0.5 * (s.top_width() + s.base_width()) * slab.thickness);
        self.period * slab.thickness - slit_area
    }

    /// Segments of the metal/vacuum interface that are interior to the cell.
    pub fn interface_segments(&self) -> Vec<[[f64; 2]; 2]> {
        let Some(slab) = self.slab else { return Vec::new() };
        let h = 0.5 * slab.thickness;
        let d = self.period;
        match self.slit_polygon() {
            Some([bl, br, tr, tl]) => vec![
                [[0.0, -h], bl],
                [br, [d, -h]],
                [[0.0, h], tl],
                [tr, [d, h]],
                [bl, tl],
                [br, tr],
            ],
            None => vec![[[0.0, -h], [d, -h]], [[0.0, h], [d, h]]],
        }
    }

    /// Slit walls, the segments near which the mesh is graded.
    pub fn slit_walls(&self) -> Vec<[[f64; 2]; 2]> {
        match self.slit_polygon() {
            Some([bl, br, tr, tl]) => vec![[bl, tl], [br, tr]],
            None => Vec::new(),
        }
    }

    /// Distance from `p` to the closed metal region (0 inside).
    pub fn distance_to_metal(&self, p: [f64; 2]) -> f64 {
        if self.slab.is_none() {
            return f64::INFINITY;
        }
        if self.is_metal(p) {
            return 0.0;
        }
        self.interface_segments().iter().map(|s| segment_distance(p, s[0], s[1])).fold(f64::INFINITY, f64::min)
    }

    /// Distance from `p` to the nearest slit wall (corners included).
    pub fn distance_to_slit_walls(&self, p: [f64; 2]) -> f64 {
        self.slit_walls().iter().map(|s| segment_distance(p, s[0], s[1])).fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_metal_area() {
        let g = GratingGeometry::new(
            1.0,
            1.0,
            1.0,
            SlitShape::Trapezoid { top_width: 0.05, base_width: 0.1 },
            MetalKind::Dispersive,
        );
        assert!((g.metal_area() - (1.0 - 0.075)).abs() < 1e-15);
        assert!(g.is_metal([0.1, 0.0]));
        assert!(!g.is_metal([0.5, 0.0]));
        assert!(g.is_in_slit([0.5, 0.4]));
        // just inside the base, outside the top opening
        assert!(!g.is_metal([0.5 - 0.045, -0.49]));
        assert!(g.is_metal([0.5 - 0.045, 0.49]));
    }

    #[test]
    fn validation() {
        let ok = GratingGeometry::new(0.4, 1.0, 0.7, SlitShape::Rectangle { width: 0.05 }, MetalKind::Pec);
        assert!(ok.validate().is_ok());
        let low = GratingGeometry { half_height: 0.4, ..ok };
        assert!(matches!(low.validate(), Err(MeshError::InvalidGeometry(_))));
        let wide = GratingGeometry::new(0.4, 1.0, 0.7, SlitShape::Rectangle { width: 0.5 }, MetalKind::Pec);
        assert!(wide.validate().is_err());
        let thin = GratingGeometry::new(0.4, 1.0, 0.7, SlitShape::Rectangle { width: 1e-12 }, MetalKind::Pec);
        assert!(matches!(thin.validate(), Err(MeshError::GeometryDegenerate(_))));
    }

    #[test]
    fn distances() {
        let g = GratingGeometry::new(1.0, 1.0, 1.0, SlitShape::Rectangle { width: 0.1 }, MetalKind::Dispersive);
        assert_eq!(g.distance_to_metal([0.2, 0.1]), 0.0);
        assert!((g.distance_to_metal([0.2, 0.75]) - 0.25).abs() < 1e-15);
        assert!((g.distance_to_metal([0.5, 0.0]) - 0.05).abs() < 1e-15);
        assert!((g.distance_to_slit_walls([0.5, 0.7]) - (0.05f64.powi(2) + 0.2f64.powi(2)).sqrt()).abs() < 1e-15);
    }
}
