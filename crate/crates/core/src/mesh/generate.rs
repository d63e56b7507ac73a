//! Graded mesh generation: constrained Delaunay triangulation of the cell with
//! the metal interfaces forced in, a size-field pass, then Delaunay quality
//! refinement.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use spade::handles::FixedVertexHandle;

use super::{Mesh, MeshError, Region};
use crate::geometry::{GratingGeometry, MetalKind};

/// Size-field controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    /// Largest element edge anywhere.
    pub target_h: f64,
    /// Elements within one slit width of the slit walls are `target_h / grading`.
    pub grading: f64,
    /// Optional edge length inside and near the metal.
    #[serde(default)]
    pub metal_h: Option<f64>,
    /// Rate at which the size relaxes away from the refined zones.
    #[serde(default = "default_growth")]
    pub growth: f64,
}

fn default_growth() -> f64 {
    0.4
}

impl MeshParams {
    pub fn new(target_h: f64, grading: f64) -> Self {
        Self { target_h, grading, metal_h: None, growth: default_growth() }
    }

    pub fn with_metal_h(mut self, metal_h: f64) -> Self {
        self.metal_h = Some(metal_h);
        self
    }

    fn validate(&self, geometry: &GratingGeometry) -> Result<(), MeshError> {
        if !(self.target_h > 0.0 && self.target_h < geometry.period) {
            return Err(MeshError::InvalidParameters(format!(
                "target_h {} must lie in (0, d = {})",
                self.target_h, geometry.period
            )));
        }
        if !(self.grading >= 1.0 && self.grading.is_finite()) {
            return Err(MeshError::InvalidParameters(format!("grading {} must be >= 1", self.grading)));
        }
        if let Some(m) = self.metal_h {
            if !(m > 0.0) {
                return Err(MeshError::InvalidParameters("metal_h must be positive".into()));
            }
        }
        if !(self.growth > 0.0) {
            return Err(MeshError::InvalidParameters("growth must be positive".into()));
        }
        Ok(())
    }
}

struct SizeField<'a> {
    geometry: &'a GratingGeometry,
    params: MeshParams,
    slit_width: f64,
}

impl SizeField<'_> {
    fn at(&self, p: [f64; 2]) -> f64 {
        let p_ = &self.params;
        let mut s = p_.target_h;
        if self.geometry.slit().is_some() {
            let fine = p_.target_h / p_.grading;
            let dw = self.geometry.distance_to_slit_walls(p);
            s = s.min(fine + p_.growth * (dw - self.slit_width).max(0.0));
        }
        if let Some(mh) = p_.metal_h {
            let dm = self.geometry.distance_to_metal(p);
            s = s.min(mh + p_.growth * dm);
        }
        s
    }
}

type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;

/// Generates a conforming, region-tagged mesh of the computational domain.
pub fn generate_mesh(geometry: &GratingGeometry, params: MeshParams) -> Result<Mesh, MeshError> {
    geometry.validate()?;
    params.validate(geometry)?;
    let size = SizeField { geometry, params, slit_width: geometry.slit().map_or(0.0, |s| s.min_width()) };
    let (d, h) = (geometry.period, geometry.half_height);

    // Left boundary breakpoints; the right boundary mirrors them exactly.
    let mut left_breaks = vec![-h, h];
    if let Some(slab) = geometry.slab {
        left_breaks.extend([-0.5 * slab.thickness, 0.5 * slab.thickness]);
    }
    left_breaks.sort_by(f64::total_cmp);
    left_breaks.dedup();

    let mut segments: Vec<Vec<[f64; 2]>> = Vec::new();
    let mut left_points: Vec<[f64; 2]> = Vec::new();
    for w in left_breaks.windows(2) {
        let pts = subdivide(&size, [0.0, w[0]], [0.0, w[1]]);
        left_points.extend_from_slice(&pts[..pts.len() - 1]);
    }
    left_points.push([0.0, h]);
    let right_points: Vec<[f64; 2]> = left_points.iter().map(|p| [d, p[1]]).collect();
    segments.push(left_points.clone());
    segments.push(right_points);
    segments.push(subdivide(&size, [0.0, h], [d, h]));
    segments.push(subdivide(&size, [0.0, -h], [d, -h]));
    for s in geometry.interface_segments() {
        segments.push(subdivide(&size, s[0], s[1]));
    }

    let mut cdt = Cdt::new();
    for seg in &segments {
        let handles: Vec<FixedVertexHandle> = seg.iter().map(|&p| insert(&mut cdt, p)).collect::<Result<_, _>>()?;
        for w in handles.windows(2) {
            if w[0] != w[1] {
                cdt.add_constraint(w[0], w[1]);
            }
        }
    }

    // size pass: split oversized triangles at their centroids
    let skip_metal = geometry.metal == MetalKind::Pec;
    for _ in 0..200 {
        let mut pending = Vec::new();
        for face in cdt.inner_faces() {
            let pos = face.positions().map(|p| [p.x, p.y]);
            let c = [(pos[0][0] + pos[1][0] + pos[2][0]) / 3.0, (pos[0][1] + pos[1][1] + pos[2][1]) / 3.0];
            if skip_metal && geometry.is_metal(c) {
                continue;
            }
            let longest = (0..3).map(|i| edge_len(pos[i], pos[(i + 1) % 3])).fold(0.0, f64::max);
            if longest > size.at(c) {
                pending.push(c);
            }
        }
        if pending.is_empty() {
            break;
        }
        for c in pending {
            insert(&mut cdt, c)?;
        }
    }

    let result = cdt.refine(
        RefinementParameters::<f64>::new()
            .with_angle_limit(AngleLimit::from_deg(28.0))
            .keep_constraint_edges()
            .with_max_additional_vertices(4 * cdt.num_vertices() + 1000),
    );
    if !result.refinement_complete {
        return Err(MeshError::Generation("quality refinement did not converge".into()));
    }

    // quality refinement may split hull edges; restore the left/right mirror
    let tol = 1e-13 * d.max(h);
    for _ in 0..8 {
        let mut lefts = Vec::new();
        let mut rights = Vec::new();
        for v in cdt.vertices() {
            let p = v.position();
            if p.x.abs() <= tol {
                lefts.push(p.y);
            } else if (p.x - d).abs() <= tol {
                rights.push(p.y);
            }
        }
        lefts.sort_by(f64::total_cmp);
        rights.sort_by(f64::total_cmp);
        let missing_right: Vec<f64> = lefts.iter().filter(|y| rights.binary_search_by(|r| r.total_cmp(y)).is_err()).copied().collect();
        let missing_left: Vec<f64> = rights.iter().filter(|y| lefts.binary_search_by(|l| l.total_cmp(y)).is_err()).copied().collect();
        if missing_left.is_empty() && missing_right.is_empty() {
            break;
        }
        for y in missing_right {
            insert(&mut cdt, [d, y])?;
        }
        for y in missing_left {
            insert(&mut cdt, [0.0, y])?;
        }
    }

    let mut index: HashMap<FixedVertexHandle, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut triangles = Vec::new();
    let mut tags = Vec::new();
    for face in cdt.inner_faces() {
        let pos = face.positions().map(|p| [p.x, p.y]);
        let c = [(pos[0][0] + pos[1][0] + pos[2][0]) / 3.0, (pos[0][1] + pos[1][1] + pos[2][1]) / 3.0];
        let tag = if geometry.is_metal(c) { Region::Metal } else { Region::Vacuum };
        if tag == Region::Metal && skip_metal {
            continue;
        }
        let tri = face.vertices().map(|v| {
            *index.entry(v.fix()).or_insert_with(|| {
                let p = v.position();
                nodes.push([snap(p.x, 0.0, d, tol), snap(p.y, -h, h, tol)]);
                nodes.len() - 1
            })
        });
        triangles.push(tri);
        tags.push(tag);
    }
    // spade faces are counter-clockwise already; keep the check cheap and explicit
    for tri in &mut triangles {
        let [a, b, c] = tri.map(|i| nodes[i]);
        if (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]) < 0.0 {
            tri.swap(1, 2);
        }
    }
    Mesh::from_parts(d, h, nodes, triangles, tags)
}

fn insert(cdt: &mut Cdt, p: [f64; 2]) -> Result<FixedVertexHandle, MeshError> {
    cdt.insert(Point2::new(p[0], p[1])).map_err(|e| MeshError::Generation(format!("{e:?} at {p:?}")))
}

fn snap(v: f64, lo: f64, hi: f64, tol: f64) -> f64 {
    if (v - lo).abs() <= tol {
        lo
    } else if (v - hi).abs() <= tol {
        hi
    } else {
        v
    }
}

fn edge_len(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Recursive bisection of a segment until every piece is shorter than the
/// local size. Endpoints are included.
fn subdivide(size: &SizeField<'_>, a: [f64; 2], b: [f64; 2]) -> Vec<[f64; 2]> {
    fn rec(size: &SizeField<'_>, a: [f64; 2], b: [f64; 2], out: &mut Vec<[f64; 2]>, depth: u32) {
        let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let s = size.at(a).min(size.at(b)).min(size.at(m));
        if edge_len(a, b) > s && depth < 40 {
            rec(size, a, m, out, depth + 1);
            rec(size, m, b, out, depth + 1);
        } else {
            out.push(b);
        }
    }
    let mut out = vec![a];
    rec(size, a, b, &mut out, 0);
    // vertical pieces on x1 = 0 keep x1 exact
    if a[0] == b[0] {
        for p in &mut out {
            p[0] = a[0];
        }
    }
    out
}
