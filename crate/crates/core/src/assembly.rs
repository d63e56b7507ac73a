//! Finite-element blocks and the augmented operator
//! `G(k) = [[A(k), Bᴴ], [B, 0]]`, `A(k) = A₁(k) − k²A₂ − A₃(k) − A₄(k)`.

use std::f64::consts::PI;
use std::io::{self, Write};

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{c64, Conj, Mat, MatMut, MatRef};
use thiserror::Error;

use crate::dtn::{DtnBoundary, DtnSpec};
use crate::materials::{PermittivityModel, DEFAULT_POLE_EXCLUSION};
use crate::mesh::{Mesh, Region, Side};
use crate::nep::{finite, LinearSolve, NepError, NonlinearOperator, Singularity, SingularityKind};

/// Triangles smaller than this fraction of the cell area are rejected.
pub const DEGENERATE_AREA_FRACTION: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error("triangle {triangle} has area {area:e}, below the degeneracy threshold")]
    DegenerateTriangle { triangle: usize, area: f64 },
    #[error("Bloch wavenumber {kappa} lies outside [-π/d, π/d]")]
    KappaOutOfRange { kappa: f64 },
    #[error("material {0:?} does not match the mesh (metal triangles present: {1})")]
    MaterialMismatch(PermittivityModel, bool),
    #[error(transparent)]
    Material(#[from] crate::materials::MaterialError),
    #[error("symbolic factorization failed: {0}")]
    Linalg(String),
}

/// `∫ ∇φ_i·∇φ_j` over a linear triangle: `(b_i b_j + c_i c_j)/(4A)`.
pub fn local_stiffness(p: [[f64; 2]; 3]) -> ([[f64; 3]; 3], f64) {
    let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
    let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
    let area = 0.5 * (c[2] * b[1] - c[1] * b[2]);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    (k, area)
}

/// `∫ φ_i φ_j = A/12 · (1 + δ_ij)`.
pub fn local_mass(area: f64) -> [[f64; 3]; 3] {
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

/// Real sparse matrix in sorted coordinate form (column-major, duplicates summed).
#[derive(Debug, Clone, PartialEq)]
pub struct RealSparse {
    pub n: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl RealSparse {
    fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|e| (e.1, e.0));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len() / 2);
        for (r, c, v) in t {
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        Self { n, entries }
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.1, e.0).cmp(&(c, r)))
            .map_or(0.0, |i| self.entries[i].2)
    }
}

/// `k`-independent pieces of `G(k)`.
#[derive(Debug, Clone)]
pub struct AssembledBlocks {
    /// Nodal DOF count `N`.
    pub n: usize,
    /// Constraint count `J`.
    pub j: usize,
    pub kappa: f64,
    pub period: f64,
    pub k_vac: RealSparse,
    pub k_metal: RealSparse,
    pub mass: RealSparse,
    /// `(l_j, r_j)`.
    pub pairs: Vec<(usize, usize)>,
    /// `e^{iκd}`.
    pub phase: c64,
    pub top: DtnBoundary,
    pub bottom: DtnBoundary,
    pub has_metal: bool,
}

/// Assembles stiffness (split by region), mass, DtN Fourier caches and the
/// quasi-periodic constraint data.
pub fn assemble_blocks(mesh: &Mesh, kappa: f64, dtn_order: usize) -> Result<AssembledBlocks, AssemblyError> {
    let d = mesh.period;
    if !(kappa.abs() <= PI / d * (1.0 + 1e-12)) {
        return Err(AssemblyError::KappaOutOfRange { kappa });
    }
    let n = mesh.num_nodes();
    let min_area = DEGENERATE_AREA_FRACTION * 2.0 * d * mesh.half_height;
    let mut kv = Vec::with_capacity(9 * mesh.num_triangles());
    let mut km = Vec::new();
    let mut mm = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (k, area) = local_stiffness(tri.map(|i| mesh.nodes[i]));
        if !(area >= min_area) {
            return Err(AssemblyError::DegenerateTriangle { triangle: t, area });
        }
        let m = local_mass(area);
        let target = if mesh.tags[t] == Region::Metal { &mut km } else { &mut kv };
        for a in 0..3 {
            for b in 0..3 {
                target.push((tri[a], tri[b], k[a][b]));
                mm.push((tri[a], tri[b], m[a][b]));
            }
        }
    }
    let spec = DtnSpec::new(kappa, d, dtn_order);
    Ok(AssembledBlocks {
        n,
        j: mesh.pairs.len(),
        kappa,
        period: d,
        has_metal: !km.is_empty(),
        k_vac: RealSparse::from_triplets(n, kv),
        k_metal: RealSparse::from_triplets(n, km),
        mass: RealSparse::from_triplets(n, mm),
        pairs: mesh.pairs.clone(),
        phase: c64::from_polar(1.0, kappa * d),
        top: DtnBoundary::new(mesh, Side::Top, spec),
        bottom: DtnBoundary::new(mesh, Side::Bottom, spec),
    })
}

impl AssembledBlocks {
    pub fn dim(&self) -> usize {
        self.n + self.j
    }

    pub fn dtn_spec(&self) -> DtnSpec {
        self.top.spec
    }
}

/// Per-slot coefficients: `value = kv·1 + km/ε − k²·m + constant`, DtN added separately.
#[derive(Debug, Clone)]
struct SlotCoefficients {
    kv: Vec<f64>,
    km: Vec<f64>,
    m: Vec<f64>,
    constant: Vec<c64>,
    /// Slot of `(top[q], top[j])` at `q·n_top + j`.
    top: Vec<usize>,
    bottom: Vec<usize>,
}

/// The holomorphic matrix function `k ↦ G(k)` of a grating cell.
pub struct GratingOperator {
    pub blocks: AssembledBlocks,
    pub material: PermittivityModel,
    /// Distance to poles, zeros and branch points inside which evaluation is refused.
    pub exclusion: f64,
    pattern: SymbolicSparseColMat<usize>,
    slots: SlotCoefficients,
    symbolic: SymbolicLu<usize>,
}

impl GratingOperator {
    /// `material` is the metal's model: `Pec` requires a mesh without metal,
    /// any other model is applied to metal-tagged triangles.
    pub fn new(blocks: AssembledBlocks, material: PermittivityModel) -> Result<Self, AssemblyError> {
        material.validate()?;
        if material.is_pec() && blocks.has_metal {
            return Err(AssemblyError::MaterialMismatch(material, true));
        }
        let dim = blocks.dim();
        let n = blocks.n;
        // collect every structural position of G
        let mut pos: Vec<(usize, usize)> = Vec::new();
        for e in blocks.k_vac.entries.iter().chain(&blocks.k_metal.entries).chain(&blocks.mass.entries) {
            pos.push((e.1, e.0));
        }
        for (j, &(l, r)) in blocks.pairs.iter().enumerate() {
            let row = n + j;
            pos.extend([(r, row), (l, row), (row, r), (row, l)]);
        }
        for b in [&blocks.top, &blocks.bottom] {
            for &q in &b.nodes {
                for &c in &b.nodes {
                    pos.push((c, q));
                }
            }
        }
        pos.sort_unstable();
        pos.dedup();
        let mut col_ptr = vec![0usize; dim + 1];
        let mut row_idx = Vec::with_capacity(pos.len());
        for &(c, r) in &pos {
            col_ptr[c + 1] += 1;
            row_idx.push(r);
        }
        for c in 0..dim {
            col_ptr[c + 1] += col_ptr[c];
        }
        let slot = |r: usize, c: usize| -> usize {
            let lo = col_ptr[c];
            lo + row_idx[lo..col_ptr[c + 1]].binary_search(&r).expect("position in pattern")
        };
        let nnz = row_idx.len();
        let mut s = SlotCoefficients {
            kv: vec![0.0; nnz],
            km: vec![0.0; nnz],
            m: vec![0.0; nnz],
            constant: vec![c64::new(0.0, 0.0); nnz],
            top: Vec::new(),
            bottom: Vec::new(),
        };
        for &(r, c, v) in &blocks.k_vac.entries {
            s.kv[slot(r, c)] += v;
        }
        for &(r, c, v) in &blocks.k_metal.entries {
            s.km[slot(r, c)] += v;
        }
        for &(r, c, v) in &blocks.mass.entries {
            s.m[slot(r, c)] += v;
        }
        for (j, &(l, r)) in blocks.pairs.iter().enumerate() {
            let row = n + j;
            s.constant[slot(row, r)] += 1.0;
            s.constant[slot(row, l)] -= blocks.phase;
            s.constant[slot(r, row)] += 1.0;
            s.constant[slot(l, row)] -= blocks.phase.conj();
        }
        for (b, out) in [(&blocks.top, &mut s.top), (&blocks.bottom, &mut s.bottom)] {
            for &q in &b.nodes {
                for &c in &b.nodes {
                    out.push(slot(q, c));
                }
            }
        }
        let pattern = SymbolicSparseColMat::new_checked(dim, dim, col_ptr, None, row_idx);
        let symbolic = SymbolicLu::try_new(pattern.as_ref()).map_err(|e| AssemblyError::Linalg(format!("{e:?}")))?;
        Ok(Self { blocks, material, exclusion: DEFAULT_POLE_EXCLUSION, pattern, slots: s, symbolic })
    }

    pub fn with_exclusion(mut self, exclusion: f64) -> Self {
        self.exclusion = exclusion;
        self
    }

    pub fn nnz(&self) -> usize {
        self.slots.kv.len()
    }

    fn material_active(&self) -> bool {
        self.blocks.has_metal && !matches!(self.material, PermittivityModel::Vacuum | PermittivityModel::Pec)
    }

    /// Points where `G` stops being holomorphic: material poles/zeros and the
    /// branch points `±κ_n`.
    pub fn singular_points(&self) -> Vec<Singularity> {
        let mut v = Vec::new();
        if self.material_active() {
            v.extend(self.material.poles().into_iter().map(|at| Singularity { kind: SingularityKind::MaterialPole, at }));
            v.extend(self.material.zeros().into_iter().map(|at| Singularity { kind: SingularityKind::MaterialZero, at }));
        }
        v.extend(
            self.blocks
                .dtn_spec()
                .branch_points()
                .into_iter()
                .map(|x| Singularity { kind: SingularityKind::RayleighAnomaly, at: c64::new(x, 0.0) }),
        );
        v
    }

    /// Checks `k` against the singularity lists and returns `1/ε_m(k)`.
    pub fn check(&self, k: c64) -> Result<c64, NepError> {
        let mut inv_eps = c64::new(1.0, 0.0);
        if self.material_active() {
            for p in self.material.poles() {
                if (k - p).norm() < self.exclusion {
                    return Err(NepError::NotHolomorphicAt { k, reason: SingularityKind::MaterialPole });
                }
            }
            for z in self.material.zeros() {
                if (k - z).norm() < self.exclusion {
                    return Err(NepError::NotHolomorphicAt { k, reason: SingularityKind::MaterialZero });
                }
            }
            let eps = self
                .material
                .evaluate_with_exclusion(k, self.exclusion)
                .map_err(|_| NepError::NotHolomorphicAt { k, reason: SingularityKind::MaterialPole })?;
            inv_eps = eps.inv();
        }
        let spec = self.blocks.dtn_spec();
        for x in spec.branch_points() {
            if (k - x).norm() < self.exclusion {
                return Err(NepError::NotHolomorphicAt { k, reason: SingularityKind::RayleighAnomaly });
            }
        }
        Ok(inv_eps)
    }

    /// Nonzero values of `G(k)` in the operator's fixed sparsity pattern.
    pub fn values(&self, k: c64) -> Result<Vec<c64>, NepError> {
        let inv_eps = self.check(k)?;
        let s = &self.slots;
        let k2 = k * k;
        let mut val: Vec<c64> = (0..s.kv.len())
            .map(|i| s.constant[i] + s.km[i] * inv_eps + (s.kv[i] - k2 * s.m[i]))
            .collect();
        for (b, slots) in [(&self.blocks.top, &s.top), (&self.blocks.bottom, &s.bottom)] {
            let blk = b
                .block(k)
                .map_err(|_| NepError::NotHolomorphicAt { k, reason: SingularityKind::RayleighAnomaly })?;
            let nb = b.nodes.len();
            for q in 0..nb {
                for c in 0..nb {
                    val[slots[q * nb + c]] -= blk[(q, c)];
                }
            }
        }
        Ok(val)
    }

    /// Calls `f` with a borrowed sparse view of `G(k)`.
    pub fn with_matrix<R>(&self, k: c64, f: impl FnOnce(SparseColMatRef<'_, usize, c64>) -> R) -> Result<R, NepError> {
        let val = self.values(k)?;
        Ok(f(SparseColMatRef::new(self.pattern.as_ref(), &val)))
    }

    /// Dense copy of `G(k)`; for tests and small problems.
    pub fn evaluate_dense(&self, k: c64) -> Result<Mat<c64>, NepError> {
        self.with_matrix(k, |g| g.to_dense())
    }

    /// Coordinate-format dump `row col re im` (0-based), one entry per line.
    pub fn dump_coo(&self, k: c64, mut w: impl Write) -> io::Result<()> {
        let val = self.values(k).map_err(|e| io::Error::other(e.to_string()))?;
        let (cp, ri) = (self.pattern.col_ptr(), self.pattern.row_idx());
        writeln!(w, "# G(k) at k = {} {}; dimension {}; nnz {}", k.re, k.im, self.blocks.dim(), val.len())?;
        for c in 0..self.blocks.dim() {
            for s in cp[c]..cp[c + 1] {
                writeln!(w, "{} {} {:.17e} {:.17e}", ri[s], c, val[s].re, val[s].im)?;
            }
        }
        Ok(())
    }
}

/// Sparse LU of `G(k)`.
pub struct GratingFactor {
    lu: Lu<usize, c64>,
    k: c64,
}

fn check_solution(k: c64, rhs: MatRef<'_, c64>) -> Result<(), NepError> {
    if finite(rhs) {
        Ok(())
    } else {
        Err(NepError::SingularAt { k })
    }
}

impl LinearSolve for GratingFactor {
    fn solve_in_place(&self, mut rhs: MatMut<'_, c64>) -> Result<(), NepError> {
        self.lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        check_solution(self.k, rhs.as_ref())
    }

    fn solve_adjoint_in_place(&self, mut rhs: MatMut<'_, c64>) -> Result<(), NepError> {
        self.lu.solve_transpose_in_place_with_conj(Conj::Yes, rhs.as_mut());
        check_solution(self.k, rhs.as_ref())
    }
}

impl NonlinearOperator for GratingOperator {
    type Factor = GratingFactor;

    fn dim(&self) -> usize {
        self.blocks.dim()
    }

    fn factorize(&self, z: c64) -> Result<GratingFactor, NepError> {
        let val = self.values(z)?;
        let mat = SparseColMatRef::new(self.pattern.as_ref(), &val);
        match Lu::try_new_with_symbolic(self.symbolic.clone(), mat) {
            Ok(lu) => Ok(GratingFactor { lu, k: z }),
            Err(LuError::SymbolicSingular { .. }) => Err(NepError::SingularAt { k: z }),
            Err(LuError::Generic(e)) => Err(NepError::Linalg(format!("{e:?}"))),
        }
    }

    fn apply(&self, z: c64, x: MatRef<'_, c64>) -> Result<Mat<c64>, NepError> {
        let val = self.values(z)?;
        let (cp, ri) = (self.pattern.col_ptr(), self.pattern.row_idx());
        let mut y = Mat::<c64>::zeros(x.nrows(), x.ncols());
        for col in 0..x.ncols() {
            for c in 0..self.dim() {
                let xc = x[(c, col)];
                for s in cp[c]..cp[c + 1] {
                    y[(ri[s], col)] += val[s] * xc;
                }
            }
        }
        Ok(y)
    }

    fn norm_one(&self, z: c64) -> Result<f64, NepError> {
        let val = self.values(z)?;
        let cp = self.pattern.col_ptr();
        Ok((0..self.dim()).map(|c| val[cp[c]..cp[c + 1]].iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max))
    }

    fn singularities_in_disk(&self, center: c64, radius: f64) -> Vec<Singularity> {
        let reach = radius + self.exclusion;
        let mut hits: Vec<Singularity> = self
            .singular_points()
            .into_iter()
            .filter(|s| s.kind != SingularityKind::RayleighAnomaly && (s.at - center).norm() <= reach)
            .collect();
        let spec = self.blocks.dtn_spec();
        for n in spec.modes() {
            let kn = spec.kappa_n(n);
            if disk_meets_cut_preimage(center, reach, kn) {
                hits.push(Singularity { kind: SingularityKind::RayleighAnomaly, at: c64::new(kn, 0.0) });
            }
        }
        hits
    }
}

/// Whether the closed disk meets `{z : z² − κ_n² ∈ −i[0, ∞)}`, i.e. the
/// hyperbola `x² − y² = κ_n²` restricted to `xy ≤ 0`.
pub fn disk_meets_cut_preimage(center: c64, radius: f64, kappa_n: f64) -> bool {
    let k2 = kappa_n * kappa_n;
    let f = |x: f64, y: f64| x * x - y * y - k2;
    // x² − y² is harmonic, so on each convex piece disk ∩ {closed quadrant}
    // its range is spanned by boundary values: the arc and the axis chords
    for (sx, sy) in [(-1.0, 1.0), (1.0, -1.0)] {
        let in_quadrant = |x: f64, y: f64| x * sx >= 0.0 && y * sy >= 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut take = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        let samples = 2048;
        for i in 0..samples {
            let t = 2.0 * PI * i as f64 / samples as f64;
            let (x, y) = (center.re + radius * t.cos(), center.im + radius * t.sin());
            if in_quadrant(x, y) {
                take(f(x, y));
            }
        }
        // chord on y = 0
        let h2 = radius * radius - center.im * center.im;
        if h2 >= 0.0 {
            let h = h2.sqrt();
            let (a, b) = (center.re - h, center.re + h);
            let (a, b) = if sx > 0.0 { (a.max(0.0), b) } else { (a, b.min(0.0)) };
            if a <= b {
                take(f(a, 0.0));
                take(f(b, 0.0));
                if a <= 0.0 && b >= 0.0 {
                    take(f(0.0, 0.0));
                }
            }
        }
        // chord on x = 0
        let v2 = radius * radius - center.re * center.re;
        if v2 >= 0.0 {
            let v = v2.sqrt();
            let (a, b) = (center.im - v, center.im + v);
            let (a, b) = if sy > 0.0 { (a.max(0.0), b) } else { (a, b.min(0.0)) };
            if a <= b {
                take(f(0.0, a));
                take(f(0.0, b));
                if a <= 0.0 && b >= 0.0 {
                    take(f(0.0, 0.0));
                }
            }
        }
        if lo <= 0.0 && hi >= 0.0 {
            return true;
        }
    }
    false
}
