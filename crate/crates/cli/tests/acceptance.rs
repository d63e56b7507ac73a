//! Acceptance criteria 1–9. Each test prints one `criterion N [PASS|FAIL]` line
//! to the unbuffered stderr so the verdicts survive output capture.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use faer::{c64, Mat};
use gratres_cli::config::{preset, RunConfig};
use gratres_cli::run::{run_convergence, run_solve, run_sweep, Problem, SolveRow};
use gratres_core::analysis::ModeClass;
use gratres_core::dtn::{boundary_fourier_vector, zeta, zeta_n, DtnBoundary, DtnSpec};
use gratres_core::mesh::{generate_mesh, MeshParams, Region as Tag, Side};
use gratres_core::nep::dense::{diagonal_example, quadratic_example};
use gratres_core::nep::{
    hex_cover, indicator, probe_vector, solve_region, validate, Disk, LinearSolve, NonlinearOperator, Region,
    SolverConfig,
};
use gratres_core::pec_oracle::{asymptotic_eigenvalue, AsymptoticParams};
use proptest::prelude::*;

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n} [{verdict}] {name}: {detail}\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn with_preset(name: &str, edit: impl FnOnce(&mut RunConfig)) -> RunConfig {
    let mut cfg = preset(name).unwrap();
    edit(&mut cfg);
    cfg.validate().unwrap();
    cfg
}

fn disk(re: f64, im: f64, radius: f64) -> Region {
    Region::Disk { center: c64::new(re, im), radius }
}

fn max_residual(rows: &[&SolveRow]) -> f64 {
    rows.iter().map(|r| r.residual).fold(0.0, f64::max)
}

/// Greedy one-to-one matching of each reference value to the nearest unused computed value.
fn match_nearest(reference: &[c64], computed: &[c64]) -> Vec<Option<usize>> {
    let mut used = vec![false; computed.len()];
    reference
        .iter()
        .map(|r| {
            let best = (0..computed.len())
                .filter(|&i| !used[i])
                .min_by(|&a, &b| (computed[a] - r).norm().total_cmp(&(computed[b] - r).norm()));
            if let Some(i) = best {
                used[i] = true;
            }
            best
        })
        .collect()
}

#[test]
fn criterion_1_synthetic_nep_suite() {
    let t = Instant::now();
    let cfg = SolverConfig { quadrature_nodes: 32, ..SolverConfig::default() };
    let diag = solve_region(&diagonal_example(), &disk(1.5, 0.0, 1.0), &cfg).unwrap();
    let quad = solve_region(&quadratic_example(), &disk(0.0, 0.0, 1.5), &cfg).unwrap();
    let elapsed = t.elapsed().as_secs_f64();

    let err = |found: &[c64], exact: &[c64]| -> f64 {
        if found.len() != exact.len() {
            return f64::INFINITY;
        }
        let m = match_nearest(exact, found);
        m.iter().zip(exact).map(|(i, e)| (found[i.unwrap()] - e).norm()).fold(0.0, f64::max)
    };
    let d: Vec<c64> = diag.eigenvalues.iter().map(|e| e.k).collect();
    let q: Vec<c64> = quad.eigenvalues.iter().map(|e| e.k).collect();
    let one = c64::new(1.0, 0.0);
    let i = c64::new(0.0, 1.0);
    let e_diag = err(&d, &[one, 2.0 * one]);
    let e_quad = err(&q, &[one, -one, i, -i]);
    let pass = e_diag < 1e-10 && e_quad < 1e-10 && elapsed < 1.0;
    report(1, "synthetic NEP suite", pass, &format!("max error {e_diag:.1e} / {e_quad:.1e}, {elapsed:.3} s"));
    assert!(pass);
}

#[test]
fn criterion_2_pec_asymptotic_oracle() {
    let t = Instant::now();
    let d = 0.4;
    let mut worst: f64 = 0.0;
    let mut values = Vec::new();
    for (delta, want) in [(0.05, 2.8146), (0.02, 2.9741), (0.01, 3.0440)] {
        let k = asymptotic_eigenvalue(&AsymptoticParams::new(1, PI / d, delta, d)).unwrap();
        worst = worst.max((k - c64::new(want, 0.0)).norm());
        values.push(format!("{:.5}", k.re));
    }
    let elapsed = t.elapsed().as_secs_f64();
    let pass = worst < 5e-4 && elapsed < 1.0;
    report(2, "PEC asymptotic oracle", pass, &format!("{} (max deviation {worst:.1e}), {elapsed:.3} s", values.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_3_pec_fem_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_preset("pec-delta005", |_| {});
    let rep = run_convergence(cfg, dir.path()).unwrap();
    let ks: Vec<f64> = rep.rows.iter().map(|r| r.re.unwrap_or(f64::NAN)).collect();
    let orders: Vec<f64> = rep.rows.iter().filter_map(|r| r.order).collect();
    let monotone = ks.len() == 4 && ks.windows(2).all(|w| w[1] < w[0]);
    let gap = (ks[3] - 2.854_492_03).abs();
    let in_range = orders.len() == 2 && orders.iter().all(|&o| o > 1.0 && o < 2.0);
    let residual = rep.rows.iter().filter_map(|r| r.residual).fold(0.0, f64::max);
    let pass = monotone && gap < 2e-2 && in_range && residual < 1e-8;
    report(
        3,
        "PEC FEM refinement ladder",
        pass,
        &format!("k = {ks:.6?}, |k³ − 2.85449203| = {gap:.1e}, orders {orders:.3?}, max residual {residual:.1e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_oracle_cross_check() {
    let dir = tempfile::tempdir().unwrap();
    let text = preset("pec-delta005").unwrap().to_toml().replace("width = 0.05", "width = 0.01");
    let mut cfg = RunConfig::from_toml(&text).unwrap();
    cfg.mesh.refinement = 3;
    assert_eq!(cfg.geometry.slit.min_width(), 0.01);
    let rep = run_solve(cfg, dir.path()).unwrap();
    let rows: Vec<&SolveRow> = rep.outcome.eigenpairs.iter().map(|e| &e.row).collect();
    let fem = rows.iter().map(|r| r.re).fold(f64::INFINITY, f64::min);
    let asym = asymptotic_eigenvalue(&AsymptoticParams::new(1, PI / 0.4, 0.01, 0.4)).unwrap().re;
    let gap = (fem - 3.0440).abs();
    let pass = gap < 5e-3 && (fem - asym).abs() < 5e-3 && max_residual(&rows) < 1e-8;
    report(
        4,
        "FEM vs asymptotics at δ = 0.01",
        pass,
        &format!("FEM {fem:.6} (level 3, {} DOF), asymptotic {asym:.6}, |FEM − 3.0440| = {gap:.1e}", rows.first().map_or(0, |r| r.dof)),
    );
    assert!(pass);
}

#[test]
fn criterion_5_sheetmetal() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let rep = run_solve(with_preset("sheetmetal", |_| {}), dir.path()).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let mut rows: Vec<&SolveRow> = rep.outcome.eigenpairs.iter().map(|e| &e.row).collect();
    rows.sort_by(|a, b| a.re.total_cmp(&b.re));
    let want = [0.124_929_20, 0.239_165_92, 0.278_382_36, 0.332_811_63];
    let rel: Vec<f64> =
        want.iter().zip(&rows).map(|(w, r)| (c64::new(r.re, r.im) - c64::new(*w, 0.0)).norm() / w).collect();
    let worst = rel.iter().copied().fold(0.0, f64::max);
    let dof = rows.first().map_or(0, |r| r.dof);
    let pass = rows.len() >= 4 && worst < 1e-2 && elapsed < 600.0 && max_residual(&rows) < 1e-8;
    let found: Vec<String> = rows.iter().map(|r| format!("{:.6}", r.re)).collect();
    report(
        5,
        "sheetmetal grating",
        pass,
        &format!("[{}] at {dof} DOF, max relative error {worst:.1e}, {elapsed:.0} s", found.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_6_drude_sommerfeld_grating() {
    let paper = [
        c64::new(0.823_337_07, -0.010_987_13),
        c64::new(1.404_135_13, -0.014_174_61),
        c64::new(1.782_494_83, -0.016_008_98),
        c64::new(2.046_590_65, -0.016_855_95),
        c64::new(2.242_130_36, -0.017_178_07),
        c64::new(2.389_324_84, -0.016_890_01),
        c64::new(2.413_200_03, -0.009_521_27),
        c64::new(2.425_944_74, -0.009_188_62),
    ];
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let rep = run_solve(with_preset("gold", |_| {}), dir.path()).unwrap();
    let rows: Vec<&SolveRow> = rep.outcome.eigenpairs.iter().map(|e| &e.row).collect();
    let ks: Vec<c64> = rows.iter().map(|r| c64::new(r.re, r.im)).collect();
    let m = match_nearest(&paper, &ks);
    let mut worst: f64 = 0.0;
    let mut classes_ok = true;
    let mut lossy = true;
    for (j, i) in m.iter().enumerate() {
        let Some(i) = *i else {
            worst = f64::INFINITY;
            continue;
        };
        worst = worst.max((ks[i].re - paper[j].re).abs());
        lossy &= ks[i].im < 0.0;
        let want = if j < 6 { ModeClass::Cavity } else { ModeClass::SurfacePlasmon };
        classes_ok &= rows[i].class == want;
    }
    let solve_ok = rows.len() >= 8 && worst < 2e-2 && lossy && classes_ok && max_residual(&rows) < 1e-8;
    let solve_time = t.elapsed().as_secs_f64();

    // band samples κ ∈ {0, π/2, π} on a disk around the first listed region;
    // reference values within the tolerance of its edge may fall either side
    let r1 = [
        c64::new(2.244_598_45, -0.017_627_24),
        c64::new(2.397_860_05, -0.017_910_77),
        c64::new(2.519_046_53, -0.017_883_82),
        c64::new(2.616_899_89, -0.017_728_65),
        c64::new(2.662_863_67, -0.018_322_86),
        c64::new(2.667_972_79, -0.018_318_49),
        c64::new(2.699_499_77, -0.017_794_82),
    ];
    let sweep_dir = tempfile::tempdir().unwrap();
    let cfg = with_preset("gold", |c| {
        c.bloch.kappa_fraction = None;
        c.bloch.kappa_count = Some(3);
        c.regions = vec![disk(2.45, 0.0, 0.3)];
    });
    let sweep = run_sweep(cfg, sweep_dir.path(), 1).unwrap();
    let mut sweep_ok = sweep.outcomes.iter().all(|o| o.failures.is_empty() && !o.eigenpairs.is_empty());
    let mut sweep_worst: f64 = 0.0;
    for (o, reference) in sweep.outcomes.iter().zip([&[][..], &r1[..], &paper[..]]) {
        let ks: Vec<c64> = o.eigenpairs.iter().map(|e| c64::new(e.row.re, e.row.im)).collect();
        let inside: Vec<c64> = reference.iter().copied().filter(|z| (z - c64::new(2.45, 0.0)).norm() < 0.3 - 2e-2).collect();
        for (j, i) in match_nearest(&inside, &ks).iter().enumerate() {
            sweep_worst = sweep_worst.max(i.map_or(f64::INFINITY, |i| (ks[i].re - inside[j].re).abs()));
        }
        sweep_ok &= o.eigenpairs.iter().all(|e| e.row.im < 0.0 && e.row.residual < 1e-8);
    }
    sweep_ok &= sweep_worst < 2e-2;
    let branches = sweep.bands.iter().map(|b| b.branch).max().map_or(0, |b| b + 1);

    let pass = solve_ok && sweep_ok;
    let found: Vec<String> = ks.iter().map(|k| format!("{:.5}{:+.5}i", k.re, k.im)).collect();
    report(
        6,
        "Drude–Sommerfeld grating",
        pass,
        &format!(
            "{} eigenvalues at {} DOF [{}], max |ΔRe| {worst:.1e}, classes {}, {solve_time:.0} s; \
             sweep κ ∈ {{0, π/2, π}}: {} branches, max |ΔRe| {sweep_worst:.1e}",
            rows.len(),
            rows.first().map_or(0, |r| r.dof),
            found.join(", "),
            if classes_ok { "ok" } else { "wrong" },
            branches,
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_indicator_contrast() {
    let cfg = with_preset("pec-delta005", |c| c.mesh.refinement = 0);
    let kappa = cfg.kappa().unwrap();
    let solver = cfg.solver;
    let problem = Problem::new(cfg).unwrap();
    let mesh = problem.mesh_at(0);
    let op = problem.operator(&mesh, kappa).unwrap();

    let radius = 0.5;
    let centers = hex_cover([2.0, 7.0], [-3.5, 0.5], radius, solver.cover_overlap);
    let disks: Vec<Disk> = centers.iter().map(|&c| Disk::new(c, radius, solver.quadrature_nodes).unwrap()).collect();

    // reference spectrum: every cover disk solved on its own
    let mut spectrum: Vec<c64> = Vec::new();
    for d in &disks {
        let out = solve_region(&op, &disk(d.center.re, d.center.im, radius), &solver).unwrap();
        for e in out.eigenvalues {
            if spectrum.iter().all(|z| (z - e.k).norm() > 1e-6) {
                spectrum.push(e.k);
            }
        }
    }
    let probe = probe_vector(op.dim(), solver.rng_seed);
    let raw: Vec<f64> = disks.iter().map(|d| indicator(&op, d, probe.as_ref()).unwrap()).collect();
    let max = raw.iter().copied().fold(0.0, f64::max);
    let (mut empty_max, mut occupied_min): (f64, f64) = (0.0, f64::INFINITY);
    let mut occupied = 0;
    for (d, v) in disks.iter().zip(&raw) {
        let normalized = v / max;
        if spectrum.iter().any(|z| d.contains(*z)) {
            occupied += 1;
            occupied_min = occupied_min.min(normalized);
        } else {
            empty_max = empty_max.max(normalized);
        }
    }
    let pass = occupied > 0 && occupied < disks.len() && empty_max < 0.02 && occupied_min > 0.2;
    report(
        7,
        "indicator contrast",
        pass,
        &format!(
            "{} disks, {occupied} occupied by {} eigenvalues; empty max {empty_max:.2e}, occupied min {occupied_min:.3}",
            disks.len(),
            spectrum.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_validation_discipline() {
    let cfg = with_preset("gold", |c| c.bloch.kappa_fraction = Some(0.5));
    let kappa = cfg.kappa().unwrap();
    let solver = cfg.solver;
    let problem = Problem::new(cfg).unwrap();
    let mesh = problem.mesh_at(0);
    let op = problem.operator(&mesh, kappa).unwrap();

    // Λ₅ and the six Step-2 values found around it
    let spurious = [
        c64::new(1.558_634_15, -0.165_995_11),
        c64::new(1.578_695_31, -0.147_316_01),
        c64::new(1.578_925_33, -0.147_272_91),
        c64::new(1.580_434_66, -0.163_391_90),
        c64::new(1.581_004_71, -0.163_230_98),
        c64::new(1.581_885_08, -0.180_046_39),
        c64::new(1.582_107_12, -0.179_963_84),
    ];
    let metrics: Vec<f64> = spurious.iter().map(|&k| validate(&op, k, None, &solver).unwrap().metric).collect();
    let none_accepted = metrics.iter().all(|&m| m >= solver.accept_tol);
    let min_metric = metrics.iter().copied().fold(f64::INFINITY, f64::min);

    // the largest disk around Λ₅ that clears the Rayleigh-anomaly cut
    let around = solve_region(&op, &disk(spurious[0].re, spurious[0].im, 0.015), &solver).unwrap();
    let discarded = around.audit.events.len();

    // a genuine eigenvalue of the same operator, re-evaluated independently
    let genuine = solve_region(&op, &disk(1.784_005_11, -0.016_610_62, 0.03), &solver).unwrap();
    let residuals: Vec<f64> = genuine
        .eigenvalues
        .iter()
        .map(|e| gratres_core::nep::residual_norm(&op, e.k, &e.eigenvector).unwrap())
        .collect();
    let worst = residuals.iter().copied().fold(0.0, f64::max);

    let pass = none_accepted && around.eigenvalues.is_empty() && !genuine.eigenvalues.is_empty() && worst < 1e-8;
    report(
        8,
        "validation discipline",
        pass,
        &format!(
            "smallest metric at Λ₅-type points {min_metric:.1e}, {} emitted near Λ₅ ({discarded} audit events); \
             genuine {:?} with residual {worst:.1e}",
            around.eigenvalues.len(),
            genuine.eigenvalues.iter().map(|e| format!("{:.6}{:+.6}i", e.k.re, e.k.im)).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

/// Direct dense assembly of `G(k)` from element integrals, boundary quadrature and constraint rows.
fn direct_dense(problem: &Problem, mesh: &gratres_core::mesh::Mesh, kappa: f64, order: usize, k: c64) -> Mat<c64> {
    let n = mesh.num_nodes();
    let j = mesh.pairs.len();
    let mut g = Mat::<c64>::zeros(n + j, n + j);
    let inv_eps = match problem.material.evaluate(k) {
        Ok(eps) => 1.0 / eps,
        Err(_) => c64::new(0.0, 0.0),
    };
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|i| mesh.nodes[i]);
        let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        // ∇λ_a = (y_b − y_c, x_c − x_b)/(2A)
        let grad = |a: usize| {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            [(p[b][1] - p[c][1]) / (2.0 * area), (p[c][0] - p[b][0]) / (2.0 * area)]
        };
        let coef = if mesh.tags[t] == Tag::Metal { inv_eps } else { c64::new(1.0, 0.0) };
        for a in 0..3 {
            for b in 0..3 {
                let (ga, gb) = (grad(a), grad(b));
                let stiff = area * (ga[0] * gb[0] + ga[1] * gb[1]);
                let mass = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                g[(tri[a], tri[b])] += coef * stiff - k * k * mass;
            }
        }
    }
    let d = mesh.period;
    let gl = [(-0.906_179_845_938_664, 0.236_926_885_056_189_1), (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5), (0.0, 0.568_888_888_888_888_9), (0.538_469_310_105_683_1, 0.478_628_670_499_366_5), (0.906_179_845_938_664, 0.236_926_885_056_189_1)];
    for side in [Side::Top, Side::Bottom] {
        let mut nodes = mesh.side_nodes(side).to_vec();
        nodes.sort_by(|a, b| mesh.nodes[*a][0].total_cmp(&mesh.nodes[*b][0]));
        for m in -(order as i64)..=order as i64 {
            let kn = kappa + 2.0 * PI * m as f64 / d;
            let mut f: HashMap<usize, c64> = HashMap::new();
            for w in nodes.windows(2) {
                let (a, b) = (mesh.nodes[w[0]][0], mesh.nodes[w[1]][0]);
                // 40 panels of 5-point Gauss–Legendre per edge
                for panel in 0..40 {
                    let (pa, pb) = (a + (b - a) * panel as f64 / 40.0, a + (b - a) * (panel + 1) as f64 / 40.0);
                    for (x, wt) in gl {
                        let s = 0.5 * (pa + pb) + 0.5 * (pb - pa) * x;
                        let e = c64::cis(-kn * s) * (0.5 * (pb - pa) * wt / d);
                        *f.entry(w[0]).or_default() += e * ((b - s) / (b - a));
                        *f.entry(w[1]).or_default() += e * ((s - a) / (b - a));
                    }
                }
            }
            let z = zeta(k, kn).unwrap();
            for (&q, fq) in &f {
                for (&c, fc) in &f {
                    g[(q, c)] -= c64::new(0.0, d) * z * fq.conj() * fc;
                }
            }
        }
    }
    let phase = c64::cis(kappa * d);
    for (jj, &(l, r)) in mesh.pairs.iter().enumerate() {
        g[(n + jj, r)] += 1.0;
        g[(n + jj, l)] -= phase;
        g[(r, n + jj)] += 1.0;
        g[(l, n + jj)] -= phase.conj();
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn branch_rule(re in -6.0f64..6.0, im in -3.0f64..3.0, kn in -12.0f64..12.0) {
        let k = c64::new(re, im);
        if let Ok(z) = zeta(k, kn) {
            let w = k * k - kn * kn;
            prop_assert!((z * z - w).norm() <= 1e-12 * w.norm().max(1.0));
            let arg = z.arg();
            prop_assert!(arg > -PI / 4.0 - 1e-12 && arg <= 3.0 * PI / 4.0 + 1e-12);
        }
    }

    #[test]
    fn outgoing_on_real_axis(k in 0.01f64..10.0, kn in -10.0f64..10.0) {
        if let Ok(z) = zeta(c64::new(k, 0.0), kn) {
            if k > kn.abs() {
                prop_assert!(z.re > 0.0 && z.im.abs() <= 1e-12 * z.re);
            } else {
                prop_assert!(z.im > 0.0 && z.re.abs() <= 1e-12 * z.im);
            }
        }
    }
}

#[test]
fn criterion_9_structural_invariants() {
    let t = Instant::now();
    let mut checks: Vec<(&str, bool, String)> = Vec::new();

    // a small lossy cell
    let cfg = with_preset("gold", |c| c.dtn.order = 8);
    let kappa = cfg.kappa().unwrap();
    let mut problem = Problem::new(cfg).unwrap();
    problem.base_mesh = generate_mesh(&problem.geometry, MeshParams::new(0.25, 2.0).with_metal_h(0.08)).unwrap();
    let mesh = problem.mesh_at(0);
    let op = problem.operator(&mesh, kappa).unwrap();

    let samples = [c64::new(0.9, -0.05), c64::new(2.2, 0.3), c64::new(1.3, -0.4)];
    let mut worst: f64 = 0.0;
    for &k in &samples {
        let cached = op.evaluate_dense(k).unwrap();
        let direct = direct_dense(&problem, &mesh, kappa, 8, k);
        let scale = direct.norm_max().max(1.0);
        worst = worst.max((&cached - &direct).norm_max() / scale);
    }
    checks.push(("block cache = direct", worst < 1e-13, format!("{worst:.1e}")));

    // F^H diag(c) F against the explicit mode sum
    let spec = DtnSpec::new(kappa, mesh.period, 8);
    let top = DtnBoundary::new(&mesh, Side::Top, spec);
    let k = c64::new(1.7, -0.2);
    let blk = top.block(k).unwrap();
    let mut sum = Mat::<c64>::zeros(blk.nrows(), blk.ncols());
    for n in spec.modes() {
        let f = boundary_fourier_vector(&mesh, Side::Top, spec.kappa_n(n));
        let c = c64::new(0.0, mesh.period) * zeta_n(k, kappa, n, mesh.period).unwrap();
        for q in 0..f.len() {
            for j in 0..f.len() {
                sum[(q, j)] += c * f[q].conj() * f[j];
            }
        }
    }
    let low_rank = (&blk - &sum).norm_max() / sum.norm_max();
    let rank_ok = top.num_modes() == 17 && blk.nrows() == top.nodes.len();
    checks.push(("DtN low-rank identity", low_rank < 1e-13 && rank_ok, format!("{low_rank:.1e}")));

    // G(k) x = [b; 0] enforces x_r = e^{iκd} x_l
    let n = mesh.num_nodes();
    let rhs0 = gratres_core::nep::gaussian_matrix(op.dim(), 1, 7);
    let mut x = Mat::<c64>::from_fn(op.dim(), 1, |i, _| if i < n { rhs0[(i, 0)] } else { c64::new(0.0, 0.0) });
    op.factorize(c64::new(1.1, -0.05)).unwrap().solve_in_place(x.as_mut()).unwrap();
    let phase = c64::cis(kappa * mesh.period);
    let xmax = (0..n).map(|i| x[(i, 0)].norm()).fold(0.0, f64::max);
    let violation = mesh.pairs.iter().map(|&(l, r)| (x[(r, 0)] - phase * x[(l, 0)]).norm()).fold(0.0, f64::max) / xmax;
    checks.push(("quasi-periodic constraint", violation < 1e-9, format!("{violation:.1e}")));

    // byte-identical output for a fixed seed
    let det_cfg = with_preset("pec-delta005", |c| c.mesh.refinement = 0);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_solve(det_cfg.clone(), a.path()).unwrap();
    run_solve(det_cfg, b.path()).unwrap();
    let same = |f: &str| std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap();
    let csv_rows = std::fs::read_to_string(a.path().join("eigenvalues.csv")).unwrap().lines().count();
    checks.push(("seed determinism", same("eigenvalues.csv") && same("audit.jsonl") && csv_rows > 1, format!("{} rows", csv_rows - 1)));

    // the property suite proper
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig { cases: 512, ..ProptestConfig::default() });
    let branch = runner
        .run(&(-6.0f64..6.0, -3.0f64..3.0, -12.0f64..12.0), |(re, im, kn)| {
            let k = c64::new(re, im);
            if let Ok(z) = zeta(k, kn) {
                let w = k * k - kn * kn;
                prop_assert!((z * z - w).norm() <= 1e-12 * w.norm().max(1.0));
            }
            Ok(())
        })
        .is_ok();
    checks.push(("branch rule ζ² = k² − κ_n²", branch, "512 cases".into()));

    let elapsed = t.elapsed().as_secs_f64();
    let pass = checks.iter().all(|c| c.1) && elapsed < 60.0;
    let detail: Vec<String> =
        checks.iter().map(|(name, ok, d)| format!("{name} {} ({d})", if *ok { "ok" } else { "FAILED" })).collect();
    report(9, "structural invariants", pass, &format!("{}; {elapsed:.1} s", detail.join("; ")));
    assert!(pass);
}
