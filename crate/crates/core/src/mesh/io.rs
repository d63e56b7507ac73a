//! Plain ASCII mesh format.
//!
//! ```text
//! GRATRES-MESH 1
//! CELL <period> <half_height>
//! NODES <n>
//! <x1> <x2>                 (17 significant digits)
//! TRIANGLES <m>
//! <a> <b> <c>
//! TAGS <m>
//! metal|vacuum
//! BOUNDARY <count>
//! left|right|top|bottom|wall <node>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. The left/right
//! pairing is re-derived on import.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BoundarySets, Mesh, MeshError, Region};

pub const MAGIC: &str = "GRATRES-MESH 1";

/// Shortest decimal with 17 significant digits; parses back bit-exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_string(mesh: &Mesh) -> String {
    let mut s = String::with_capacity(64 * mesh.num_nodes() + 32 * mesh.num_triangles());
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "CELL {} {}", fmt_f64(mesh.period), fmt_f64(mesh.half_height)).unwrap();
    writeln!(s, "NODES {}", mesh.nodes.len()).unwrap();
    for p in &mesh.nodes {
        writeln!(s, "{} {}", fmt_f64(p[0]), fmt_f64(p[1])).unwrap();
    }
    writeln!(s, "TRIANGLES {}", mesh.triangles.len()).unwrap();
    for t in &mesh.triangles {
        writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "TAGS {}", mesh.tags.len()).unwrap();
    for t in &mesh.tags {
        writeln!(s, "{}", t.as_str()).unwrap();
    }
    let b = &mesh.boundary;
    let sets: [(&str, &Vec<usize>); 5] =
        [("left", &b.left), ("right", &b.right), ("top", &b.top), ("bottom", &b.bottom), ("wall", &b.wall)];
    writeln!(s, "BOUNDARY {}", sets.iter().map(|(_, v)| v.len()).sum::<usize>()).unwrap();
    for (name, v) in sets {
        for i in v {
            writeln!(s, "{name} {i}").unwrap();
        }
    }
    s
}

pub fn export_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    fs::write(path, to_string(mesh))?;
    Ok(())
}

pub fn import_mesh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    from_str(&fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), MeshError> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            if !line.is_empty() && !line.starts_with('#') {
                return Ok((i + 1, line));
            }
        }
        Err(MeshError::Parse { line: 0, message: "unexpected end of file".into() })
    }

    fn header(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>), MeshError> {
        let (ln, line) = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(perr(ln, format!("expected section {keyword}, found `{line}`")));
        }
        Ok((ln, parts.collect()))
    }

    fn count(&mut self, keyword: &str) -> Result<usize, MeshError> {
        let (ln, rest) = self.header(keyword)?;
        match rest.as_slice() {
            [n] => n.parse().map_err(|_| perr(ln, format!("bad count `{n}`"))),
            _ => Err(perr(ln, format!("{keyword} takes one count"))),
        }
    }
}

fn perr(line: usize, message: String) -> MeshError {
    MeshError::Parse { line, message }
}

fn fields<const N: usize, T: std::str::FromStr>(ln: usize, line: &str) -> Result<[T; N], MeshError> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != N {
        return Err(perr(ln, format!("expected {N} fields, found {}", parts.len())));
    }
    let mut out = Vec::with_capacity(N);
    for p in parts {
        out.push(p.parse::<T>().map_err(|_| perr(ln, format!("cannot parse `{p}`")))?);
    }
    Ok(out.try_into().unwrap_or_else(|_| unreachable!()))
}

pub fn from_str(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (ln, magic) = lines.next()?;
    if magic != MAGIC {
        return Err(perr(ln, format!("expected `{MAGIC}`")));
    }
    let (ln, cell) = lines.header("CELL")?;
    let [period, half_height]: [f64; 2] = fields(ln, &cell.join(" "))?;

    let n = lines.count("NODES")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, line) = lines.next()?;
        nodes.push(fields::<2, f64>(ln, line)?);
    }
    let m = lines.count("TRIANGLES")?;
    let mut triangles = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, line) = lines.next()?;
        triangles.push(fields::<3, usize>(ln, line)?);
    }
    let mt = lines.count("TAGS")?;
    let mut tags = Vec::with_capacity(mt);
    for _ in 0..mt {
        let (ln, line) = lines.next()?;
        tags.push(match line {
            "metal" => Region::Metal,
            "vacuum" => Region::Vacuum,
            other => return Err(perr(ln, format!("unknown region `{other}`"))),
        });
    }
    let nb = lines.count("BOUNDARY")?;
    let mut stored = BoundarySets::default();
    for _ in 0..nb {
        let (ln, line) = lines.next()?;
        let mut parts = line.split_whitespace();
        let (Some(name), Some(idx), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(perr(ln, "boundary record needs `<set> <node>`".into()));
        };
        let idx: usize = idx.parse().map_err(|_| perr(ln, format!("bad node index `{idx}`")))?;
        let set = match name {
            "left" => &mut stored.left,
            "right" => &mut stored.right,
            "top" => &mut stored.top,
            "bottom" => &mut stored.bottom,
            "wall" => &mut stored.wall,
            other => return Err(perr(ln, format!("unknown boundary set `{other}`"))),
        };
        set.push(idx);
    }

    let mesh = Mesh::from_parts(period, half_height, nodes, triangles, tags)?;
    if mesh.boundary != stored {
        return Err(MeshError::InvalidTopology("BOUNDARY section disagrees with the triangulation".into()));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tests::two_triangle_square;

    #[test]
    fn round_trip() {
        let mut m = two_triangle_square().refine_uniform();
        // coordinates that need all 17 digits
        m.nodes[4][0] = m.nodes[4][0] * (1.0 + f64::EPSILON) + (0.1 + 0.2 - 0.3);
        let text = to_string(&m);
        let back = from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_string(&back), text);
    }

    #[test]
    fn hand_written_square() {
        let text = "GRATRES-MESH 1\nCELL 1 0.5\nNODES 4\n0 -0.5\n1 -0.5\n1 0.5\n0 0.5\nTRIANGLES 2\n0 1 2\n0 2 3\n\
                    TAGS 2\nvacuum\nvacuum\nBOUNDARY 4\ntop 3\ntop 2\nbottom 0\nbottom 1\n";
        let m = from_str(text).unwrap();
        assert!((m.mesh_size() - (2.0 - 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_triangle() {
        let text = "GRATRES-MESH 1\nCELL 1 0.5\nNODES 4\n0 -0.5\n1 -0.5\n1 0.5\n0 0.5\nTRIANGLES 2\n0 1 9\n0 2 3\n\
                    TAGS 2\nvacuum\nvacuum\nBOUNDARY 0\n";
        assert!(matches!(from_str(text), Err(MeshError::InvalidTopology(_))));
    }

    #[test]
    fn parse_error_names_line() {
        let text = "GRATRES-MESH 1\nCELL 1 0.5\nNODES 2\n0 -0.5\n1 oops\n";
        match from_str(text) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }
}
