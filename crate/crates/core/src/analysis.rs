//! Post-processing of computed eigenpairs: field files, mode classification,
//! convergence orders and band-branch linking.
//!
//! Field format:
//!
//! ```text
//! GRATRES-FIELD 1
//! MESH <path> <content hash>
//! KAPPA <κ>
//! K <re> <im>
//! NODES <n>
//! <x1> <x2> <re u> <im u>
//! ```

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use faer::c64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assembly::local_mass;
use crate::geometry::{segment_distance, GratingGeometry};
use crate::mesh::io::fmt_f64;
use crate::mesh::Mesh;

pub const FIELD_MAGIC: &str = "GRATRES-FIELD 1";

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("eigenvector has {got} entries, expected at least {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field vanishes identically")]
    ZeroField,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// First 16 hex digits of the SHA-256 digest.
pub fn content_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn mesh_hash(mesh: &Mesh) -> String {
    content_hash(crate::mesh::io::to_string(mesh).as_bytes())
}

fn nodal_part<'a>(mesh: &Mesh, eigvec: &'a [c64]) -> Result<&'a [c64], AnalysisError> {
    let n = mesh.num_nodes();
    if eigvec.len() < n {
        return Err(AnalysisError::LengthMismatch { expected: n, got: eigvec.len() });
    }
    Ok(&eigvec[..n])
}

/// Scales by the inverse of the largest-modulus entry, so that entry becomes exactly 1.
pub fn normalize_field(u: &[c64]) -> Result<Vec<c64>, AnalysisError> {
    let peak = u.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).ok_or(AnalysisError::ZeroField)?;
    if peak.norm() == 0.0 {
        return Err(AnalysisError::ZeroField);
    }
    Ok(u.iter().map(|&z| z / peak).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub mesh_path: String,
    pub mesh_hash: String,
    pub kappa: f64,
    pub k: c64,
    pub nodes: Vec<[f64; 2]>,
    pub values: Vec<c64>,
}

impl Field {
    /// Normalized field of an eigenvector (first `N` entries).
    pub fn from_eigenvector(
        mesh: &Mesh,
        mesh_path: &str,
        kappa: f64,
        k: c64,
        eigvec: &[c64],
    ) -> Result<Self, AnalysisError> {
        Ok(Self {
            mesh_path: mesh_path.to_owned(),
            mesh_hash: mesh_hash(mesh),
            kappa,
            k,
            nodes: mesh.nodes.clone(),
            values: normalize_field(nodal_part(mesh, eigvec)?)?,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(80 * self.nodes.len());
        writeln!(s, "{FIELD_MAGIC}").unwrap();
        writeln!(s, "MESH {} {}", self.mesh_path, self.mesh_hash).unwrap();
        writeln!(s, "KAPPA {}", fmt_f64(self.kappa)).unwrap();
        writeln!(s, "K {} {}", fmt_f64(self.k.re), fmt_f64(self.k.im)).unwrap();
        writeln!(s, "NODES {}", self.nodes.len()).unwrap();
        for (p, u) in self.nodes.iter().zip(&self.values) {
            writeln!(s, "{} {} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(u.re), fmt_f64(u.im)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, AnalysisError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| lines.next().ok_or(AnalysisError::Parse { line: 0, message: format!("missing {what}") });
        let err = |line: usize, message: String| AnalysisError::Parse { line, message };
        let num = |line: usize, s: &str| s.parse::<f64>().map_err(|e| err(line, format!("{s:?}: {e}")));

        let (l, magic) = next("header")?;
        if magic != FIELD_MAGIC {
            return Err(err(l, format!("expected {FIELD_MAGIC:?}")));
        }
        let (l, mesh_line) = next("MESH")?;
        let mut parts = mesh_line.split_whitespace();
        if parts.next() != Some("MESH") {
            return Err(err(l, "expected MESH <path> <hash>".into()));
        }
        let rest: Vec<&str> = parts.collect();
        let (mesh_path, mesh_hash) = match rest.as_slice() {
            [p @ .., h] if !p.is_empty() => (p.join(" "), (*h).to_owned()),
            _ => return Err(err(l, "expected MESH <path> <hash>".into())),
        };
        let (l, kl) = next("KAPPA")?;
        let kappa = match kl.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["KAPPA", v] => num(l, v)?,
            _ => return Err(err(l, "expected KAPPA <value>".into())),
        };
        let (l, kl) = next("K")?;
        let k = match kl.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["K", re, im] => c64::new(num(l, re)?, num(l, im)?),
            _ => return Err(err(l, "expected K <re> <im>".into())),
        };
        let (l, nl) = next("NODES")?;
        let n: usize = match nl.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["NODES", v] => v.parse().map_err(|e| err(l, format!("{v:?}: {e}")))?,
            _ => return Err(err(l, "expected NODES <count>".into())),
        };
        let mut nodes = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let (l, row) = next("node record")?;
            let v: Vec<&str> = row.split_whitespace().collect();
            if v.len() != 4 {
                return Err(err(l, format!("expected 4 columns, found {}", v.len())));
            }
            nodes.push([num(l, v[0])?, num(l, v[1])?]);
            values.push(c64::new(num(l, v[2])?, num(l, v[3])?));
        }
        if let Some((l, _)) = lines.next() {
            return Err(err(l, "trailing content after node records".into()));
        }
        Ok(Self { mesh_path, mesh_hash, kappa, k, nodes, values })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), AnalysisError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, AnalysisError> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Writes the normalized nodal field of `eigvec` next to a reference to its mesh file.
pub fn export_eigenfunction(
    mesh: &Mesh,
    mesh_path: &str,
    kappa: f64,
    k: c64,
    eigvec: &[c64],
    path: impl AsRef<Path>,
) -> Result<(), AnalysisError> {
    Field::from_eigenvector(mesh, mesh_path, kappa, k, eigvec)?.write(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeClass {
    Cavity,
    SurfacePlasmon,
    Unclassified,
}

impl fmt::Display for ModeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeClass::Cavity => "cavity",
            ModeClass::SurfacePlasmon => "surface-plasmon",
            ModeClass::Unclassified => "unclassified",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyParams {
    /// Shell half-width around the horizontal metal faces, in units of `d`.
    pub shell_fraction: f64,
    /// Surface-shell share of `|u|²` above which a mode with no slit content is a surface plasmon.
    pub surface_threshold: f64,
    /// Slit-box share of `|u|²` above which a mode is a cavity mode.
    pub slit_threshold: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self { shell_fraction: 0.05, surface_threshold: 0.2, slit_threshold: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeFractions {
    pub surface: f64,
    pub slit: f64,
    pub class: ModeClass,
}

/// Localization zones used by [`classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    /// Bounding box of the slit.
    Slit,
    /// Within the shell of a horizontal metal face, outside the slit box.
    Surface,
    Elsewhere,
}

pub fn zone_of(geometry: &GratingGeometry, params: &ClassifyParams, p: [f64; 2]) -> Zone {
    let Some(slab) = geometry.slab else { return Zone::Elsewhere };
    let h = 0.5 * slab.thickness;
    if let Some(poly) = geometry.slit_polygon() {
        let (lo, hi) = poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| (lo.min(q[0]), hi.max(q[0])));
        if p[0] >= lo && p[0] <= hi && p[1].abs() <= h {
            return Zone::Slit;
        }
    }
    let shell = params.shell_fraction * geometry.period;
    let near = geometry
        .interface_segments()
        .iter()
        .filter(|s| s[0][1] == s[1][1])
        .any(|s| segment_distance(p, s[0], s[1]) <= shell);
    if near {
        Zone::Surface
    } else {
        Zone::Elsewhere
    }
}

/// Splits `∫|u|²` (exact for the linear interpolant, triangles assigned by
/// centroid) between the slit box and the metal-surface shell.
pub fn classify(
    mesh: &Mesh,
    geometry: &GratingGeometry,
    eigvec: &[c64],
    params: &ClassifyParams,
) -> Result<ModeFractions, AnalysisError> {
    let u = nodal_part(mesh, eigvec)?;
    let (mut total, mut surface, mut slit) = (0.0, 0.0, 0.0);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let m = local_mass(mesh.triangle_area(t));
        let mut e = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                e += m[a][b] * (u[tri[a]].conj() * u[tri[b]]).re;
            }
        }
        total += e;
        match zone_of(geometry, params, mesh.centroid(t)) {
            Zone::Slit => slit += e,
            Zone::Surface => surface += e,
            Zone::Elsewhere => {}
        }
    }
    if !(total > 0.0) {
        return Err(AnalysisError::ZeroField);
    }
    let (surface, slit) = (surface / total, slit / total);
    let class = if slit > params.slit_threshold {
        ModeClass::Cavity
    } else if surface > params.surface_threshold {
        ModeClass::SurfacePlasmon
    } else {
        ModeClass::Unclassified
    };
    Ok(ModeFractions { surface, slit, class })
}

/// `log₂|(k^j − k^{j−1})/(k^{j+1} − k^j)|` at every interior level; `None`
/// at the ends and wherever a difference vanishes.
pub fn convergence_orders(ks: &[c64]) -> Vec<Option<f64>> {
    (0..ks.len())
        .map(|j| {
            if j == 0 || j + 1 >= ks.len() {
                return None;
            }
            let (a, b) = ((ks[j] - ks[j - 1]).norm(), (ks[j + 1] - ks[j]).norm());
            let o = (a / b).log2();
            (a > 0.0 && b > 0.0 && o.is_finite()).then_some(o)
        })
        .collect()
}

/// One point of a band diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub kappa: f64,
    pub branch: usize,
    pub k: c64,
    pub residual: f64,
    pub class: ModeClass,
}

/// Assigns branch indices by nearest-neighbour continuation in `k` across
/// successive `κ` samples. Sorts the rows by `(κ, Re k)`.
pub fn link_branches(rows: &mut [BandRow]) {
    rows.sort_by(|a, b| a.kappa.total_cmp(&b.kappa).then(a.k.re.total_cmp(&b.k.re)).then(a.k.im.total_cmp(&b.k.im)));
    let mut tails: Vec<c64> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let kappa = rows[start].kappa;
        let end = start + rows[start..].iter().take_while(|r| r.kappa == kappa).count();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (bi, tail) in tails.iter().enumerate() {
            for (i, row) in rows.iter().enumerate().take(end).skip(start) {
                pairs.push(((row.k - tail).norm(), bi, i));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut taken_branch = vec![false; tails.len()];
        let mut assigned = vec![None; end - start];
        for (_, bi, i) in pairs {
            if !taken_branch[bi] && assigned[i - start].is_none() {
                taken_branch[bi] = true;
                assigned[i - start] = Some(bi);
            }
        }
        for i in start..end {
            let bi = assigned[i - start].unwrap_or_else(|| {
                tails.push(rows[i].k);
                tails.len() - 1
            });
            tails[bi] = rows[i].k;
            rows[i].branch = bi;
        }
        start = end;
    }
}
