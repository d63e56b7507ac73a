//! Tagged triangular meshes of the periodic cell.

mod generate;
pub mod io;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_mesh, MeshParams};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("degenerate geometry: {0}")]
    GeometryDegenerate(String),
    #[error("invalid mesh parameters: {0}")]
    InvalidParameters(String),
    #[error("mesh generation failed: {0}")]
    Generation(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Vacuum,
    Metal,
}

impl Region {
    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Vacuum => "vacuum",
            Region::Metal => "metal",
        }
    }
}

/// Boundary node sets. A node belongs to exactly one set; corners resolve
/// with priority top/bottom, then left/right, then metal wall.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoundarySets {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub top: Vec<usize>,
    pub bottom: Vec<usize>,
    pub wall: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Top,
    Bottom,
}

/// Conforming triangulation of `[0, d] × [−H, H]` (minus the metal for PEC).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub period: f64,
    pub half_height: f64,
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    pub tags: Vec<Region>,
    pub boundary: BoundarySets,
    /// Pairs `(l_j, r_j)` of nodes on `x₁ = 0` and `x₁ = d` with equal `x₂`,
    /// sorted by `x₂`. Covers every node on the two vertical lines, corners included.
    pub pairs: Vec<(usize, usize)>,
}

impl Mesh {
    /// Builds a mesh from raw parts, deriving boundary sets and the periodic
    /// pairing, and checks all invariants.
    pub fn from_parts(
        period: f64,
        half_height: f64,
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        tags: Vec<Region>,
    ) -> Result<Self, MeshError> {
        let mut mesh = Mesh {
            period,
            half_height,
            nodes,
            triangles,
            tags,
            boundary: BoundarySets::default(),
            pairs: Vec::new(),
        };
        mesh.check_triangles()?;
        mesh.rebuild_boundary()?;
        Ok(mesh)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.num_triangles()).filter(|&t| self.tags[t] == region).map(|t| self.triangle_area(t)).sum()
    }

    /// Diameter of the inscribed circle of triangle `t`.
    pub fn inscribed_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        let perimeter = dist(a, b) + dist(b, c) + dist(c, a);
        4.0 * self.triangle_area(t) / perimeter
    }

    /// Mesh size `h`: the largest inscribed-circle diameter.
    pub fn mesh_size(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.inscribed_diameter(t)).fold(0.0, f64::max)
    }

    pub fn longest_edge(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    /// Undirected edges with the number of adjacent triangles.
    pub fn edges(&self) -> HashMap<(usize, usize), u32> {
        let mut edges = HashMap::with_capacity(3 * self.triangles.len() / 2 + 16);
        for tri in &self.triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Nodes of a DtN boundary sorted by `x₁`, corners included.
    pub fn side_nodes(&self, side: Side) -> &[usize] {
        match side {
            Side::Top => &self.boundary.top,
            Side::Bottom => &self.boundary.bottom,
        }
    }

    fn tol(&self) -> f64 {
        1e-12 * self.period.max(self.half_height)
    }

    fn check_triangles(&self) -> Result<(), MeshError> {
        if self.tags.len() != self.triangles.len() {
            return Err(MeshError::InvalidTopology(format!(
                "{} tags for {} triangles",
                self.tags.len(),
                self.triangles.len()
            )));
        }
        if self.triangles.is_empty() {
            return Err(MeshError::InvalidTopology("mesh has no triangles".into()));
        }
        let n = self.nodes.len();
        let mut used = vec![false; n];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &i in tri {
                if i >= n {
                    return Err(MeshError::InvalidTopology(format!("triangle {t} references node {i} of {n}")));
                }
                used[i] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::InvalidTopology(format!("triangle {t} repeats a node")));
            }
            if self.triangle_area(t) <= 0.0 {
                return Err(MeshError::InvalidTopology(format!("triangle {t} is not positively oriented")));
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(MeshError::InvalidTopology(format!("node {i} belongs to no triangle")));
        }
        if let Some((e, c)) = self.edges().into_iter().find(|&(_, c)| c > 2) {
            return Err(MeshError::InvalidTopology(format!("edge {e:?} is shared by {c} triangles")));
        }
        let tol = self.tol();
        for (i, p) in self.nodes.iter().enumerate() {
            if p[0] < -tol || p[0] > self.period + tol || p[1].abs() > self.half_height + tol {
                return Err(MeshError::InvalidTopology(format!("node {i} at {p:?} lies outside the cell")));
            }
        }
        Ok(())
    }

    /// Recomputes boundary sets and the left/right pairing from topology and coordinates.
    pub fn rebuild_boundary(&mut self) -> Result<(), MeshError> {
        let tol = self.tol();
        let (d, h) = (self.period, self.half_height);
        let on = |v: f64, target: f64| (v - target).abs() <= tol;
        let n = self.nodes.len();
        // 0 none, 1 wall, 2 left, 3 right, 4 bottom, 5 top; higher wins
        let mut class = vec![0u8; n];
        let mut on_left_line = vec![false; n];
        let mut on_right_line = vec![false; n];
        for ((a, b), count) in self.edges() {
            if count != 1 {
                continue;
            }
            let (pa, pb) = (self.nodes[a], self.nodes[b]);
            let c = if on(pa[1], h) && on(pb[1], h) {
                5
            } else if on(pa[1], -h) && on(pb[1], -h) {
                4
            } else if on(pa[0], 0.0) && on(pb[0], 0.0) {
                on_left_line[a] = true;
                on_left_line[b] = true;
                2
            } else if on(pa[0], d) && on(pb[0], d) {
                on_right_line[a] = true;
                on_right_line[b] = true;
                3
            } else {
                1
            };
            class[a] = class[a].max(c);
            class[b] = class[b].max(c);
        }
        // top/bottom corners also sit on the vertical lines
        for i in 0..n {
            if class[i] >= 4 {
                let p = self.nodes[i];
                if on(p[0], 0.0) {
                    on_left_line[i] = true;
                }
                if on(p[0], d) {
                    on_right_line[i] = true;
                }
            }
        }
        let mut sets = BoundarySets::default();
        for (i, &c) in class.iter().enumerate() {
            match c {
                1 => sets.wall.push(i),
                2 => sets.left.push(i),
                3 => sets.right.push(i),
                4 => sets.bottom.push(i),
                5 => sets.top.push(i),
                _ => {}
            }
        }
        let nodes = &self.nodes;
        let by_x1 = |v: &mut Vec<usize>| v.sort_by(|&a, &b| nodes[a][0].total_cmp(&nodes[b][0]));
        by_x1(&mut sets.top);
        by_x1(&mut sets.bottom);
        let by_x2 = |v: &mut Vec<usize>| v.sort_by(|&a, &b| nodes[a][1].total_cmp(&nodes[b][1]));
        by_x2(&mut sets.left);
        by_x2(&mut sets.right);

        let mut left: Vec<usize> = (0..n).filter(|&i| on_left_line[i]).collect();
        let mut right: Vec<usize> = (0..n).filter(|&i| on_right_line[i]).collect();
        by_x2(&mut left);
        by_x2(&mut right);
        if left.len() != right.len() {
            return Err(MeshError::InvalidTopology(format!(
                "{} nodes on x1 = 0 but {} on x1 = d",
                left.len(),
                right.len()
            )));
        }
        let mut pairs = Vec::with_capacity(left.len());
        for (&l, &r) in left.iter().zip(&right) {
            if (nodes[l][1] - nodes[r][1]).abs() > 1e-12 * d {
                return Err(MeshError::InvalidTopology(format!(
                    "left node {l} at x2 = {} has no partner (nearest right x2 = {})",
                    nodes[l][1], nodes[r][1]
                )));
            }
            pairs.push((l, r));
        }
        if sets.top.is_empty() || sets.bottom.is_empty() {
            return Err(MeshError::InvalidTopology("mesh does not reach both x2 = H and x2 = -H".into()));
        }
        self.boundary = sets;
        self.pairs = pairs;
        Ok(())
    }

    /// Checks every invariant: conformity, orientation, pairing, boundary coverage.
    pub fn validate(&self) -> Result<(), MeshError> {
        self.check_triangles()?;
        let mut copy = self.clone();
        copy.rebuild_boundary()?;
        if copy.boundary != self.boundary || copy.pairs != self.pairs {
            return Err(MeshError::InvalidTopology("stored boundary sets disagree with the topology".into()));
        }
        Ok(())
    }

    /// Splits each triangle into four congruent children that inherit the parent tag.
    pub fn refine_uniform(&self) -> Mesh {
        let mut nodes = self.nodes.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::with_capacity(2 * self.triangles.len());
        let mut mid = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (nodes[a], nodes[b]);
                nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                nodes.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut tags = Vec::with_capacity(4 * self.triangles.len());
        for (tri, &tag) in self.triangles.iter().zip(&self.tags) {
            let [a, b, c] = *tri;
            let ab = mid(a, b, &mut nodes);
            let bc = mid(b, c, &mut nodes);
            let ca = mid(c, a, &mut nodes);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
            tags.extend([tag; 4]);
        }
        let mut mesh = Mesh {
            period: self.period,
            half_height: self.half_height,
            nodes,
            triangles,
            tags,
            boundary: BoundarySets::default(),
            pairs: Vec::new(),
        };
        mesh.rebuild_boundary().expect("refinement preserves boundary structure");
        mesh
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Unit square `[0,1] × [−0.5, 0.5]` split along one diagonal.
    pub(crate) fn two_triangle_square() -> Mesh {
        Mesh::from_parts(
            1.0,
            0.5,
            vec![[0.0, -0.5], [1.0, -0.5], [1.0, 0.5], [0.0, 0.5]],
            vec![[0, 1, 2], [0, 2, 3]],
            vec![Region::Vacuum; 2],
        )
        .unwrap()
    }

    #[test]
    fn square_boundary_and_size() {
        let m = two_triangle_square();
        assert_eq!(m.boundary.top, vec![3, 2]);
        assert_eq!(m.boundary.bottom, vec![0, 1]);
        assert!(m.boundary.left.is_empty() && m.boundary.right.is_empty());
        assert_eq!(m.pairs, vec![(0, 1), (3, 2)]);
        // right isosceles triangle with unit legs: inradius (2 - √2)/2
        assert!((m.mesh_size() - (2.0 - 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn refine_two_triangles() {
        let m = two_triangle_square();
        let r = m.refine_uniform();
        assert_eq!(r.num_triangles(), 8);
        assert_eq!(r.num_nodes(), m.num_nodes() + m.edges().len());
        assert!((r.area() - 1.0).abs() < 1e-15);
        assert!((r.mesh_size() - 0.5 * m.mesh_size()).abs() < 1e-15);
        assert_eq!(r.pairs.len(), 3);
        assert_eq!(r.boundary.left.len(), 1);
        r.validate().unwrap();
    }

    #[test]
    fn rejects_bad_topology() {
        let bad = Mesh::from_parts(
            1.0,
            0.5,
            vec![[0.0, -0.5], [1.0, -0.5], [1.0, 0.5], [0.0, 0.5]],
            vec![[0, 1, 7], [0, 2, 3]],
            vec![Region::Vacuum; 2],
        );
        assert!(matches!(bad, Err(MeshError::InvalidTopology(_))));
        let cw = Mesh::from_parts(
            1.0,
            0.5,
            vec![[0.0, -0.5], [1.0, -0.5], [1.0, 0.5], [0.0, 0.5]],
            vec![[0, 2, 1], [0, 2, 3]],
            vec![Region::Vacuum; 2],
        );
        assert!(matches!(cw, Err(MeshError::InvalidTopology(_))));
    }
}
