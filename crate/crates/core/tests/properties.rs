use std::collections::HashSet;

use faer::{c64, Mat};
use gratres_core::analysis::Field;
use gratres_core::assembly::assemble_blocks;
use gratres_core::geometry::{GratingGeometry, MetalKind, SlitShape};
use gratres_core::materials::PermittivityModel;
use gratres_core::mesh::{generate_mesh, MeshParams, Region as Tag};
use gratres_core::nep::dense::{diagonal_example, DenseOperator};
use gratres_core::nep::{indicator, probe_vector, solve_region, Disk, Region, SolverConfig};
use gratres_core::pec_oracle::{asymptotic_eigenvalue, AsymptoticParams};
use proptest::prelude::*;

fn geometry() -> impl Strategy<Value = GratingGeometry> {
    (0.8f64..1.5, 0.3f64..0.8, 0.05f64..0.3, 0.0f64..0.15, any::<bool>()).prop_map(|(d, l, w, taper, trap)| {
        let slit = if trap {
            SlitShape::Trapezoid { top_width: w * d, base_width: (w + taper) * d }
        } else {
            SlitShape::Rectangle { width: w * d }
        };
        GratingGeometry::new(d, l, l / 2.0 + 0.3, slit, MetalKind::Dispersive)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn drude_sommerfeld_is_holomorphic(re in 0.2f64..4.0, im in -1.0f64..1.0, wp in 0.5f64..5.0, g in 0.0f64..0.5) {
        let m = PermittivityModel::DrudeSommerfeld { omega_p_hat: wp, gamma_hat: g };
        let k = c64::new(re, im);
        let h = 1e-5;
        let dx = (m.evaluate(k + h).unwrap() - m.evaluate(k - h).unwrap()) / (2.0 * h);
        let ih = c64::new(0.0, h);
        let dy = (m.evaluate(k + ih).unwrap() - m.evaluate(k - ih).unwrap()) / (2.0 * ih);
        prop_assert!((dx - dy).norm() <= 1e-6 * dx.norm().max(1.0));
    }

    #[test]
    fn lossless_limit(k in 0.01f64..10.0, wp in 0.1f64..5.0) {
        let a = PermittivityModel::DrudeSommerfeld { omega_p_hat: wp, gamma_hat: 0.0 }.evaluate(c64::new(k, 0.0)).unwrap();
        let b = PermittivityModel::DrudeLossless { omega_p_hat: wp }.evaluate(c64::new(k, 0.0)).unwrap();
        prop_assert!((a - b).norm() <= 4.0 * f64::EPSILON * b.norm().max(1.0));
    }

    #[test]
    fn pole_exclusion_is_sharp(g in 0.01f64..1.0, t in 0.0f64..std::f64::consts::TAU, s in 0.1f64..10.0) {
        let m = PermittivityModel::DrudeSommerfeld { omega_p_hat: 2.0, gamma_hat: g };
        let eps = 1e-4;
        for pole in m.poles() {
            let dir = c64::cis(t);
            prop_assert!(m.evaluate_with_exclusion(pole + dir * (eps / (1.0 + s)), eps).is_err());
            prop_assert!(m.evaluate_with_exclusion(pole + dir * (eps * (1.0 + s)), eps).is_ok());
        }
    }

    #[test]
    fn oracle_tail_robust(delta in 0.005f64..0.08) {
        let mut p = AsymptoticParams::new(1, std::f64::consts::PI / 0.4, delta, 0.4);
        p.series_tol = 1e-10;
        let a = asymptotic_eigenvalue(&p).unwrap();
        p.series_tol = 5e-11;
        let b = asymptotic_eigenvalue(&p).unwrap();
        prop_assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn field_text_round_trip(values in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3, -5.0f64..5.0, -5.0f64..5.0), 1..40)) {
        let f = Field {
            mesh_path: "cell.mesh".into(),
            mesh_hash: "0123456789abcdef".into(),
            kappa: 0.7,
            k: c64::new(1.25, -0.01),
            nodes: values.iter().map(|v| [v.2, v.3]).collect(),
            values: values.iter().map(|v| c64::new(v.0, v.1)).collect(),
        };
        prop_assert_eq!(Field::from_text(&f.to_text()).unwrap(), f);
    }

    #[test]
    fn empty_disks_are_quiet(re in -3.0f64..6.0, im in -3.0f64..3.0, r in 0.05f64..0.5) {
        let c = c64::new(re, im);
        prop_assume!((c - 1.0).norm() >= 2.0 * r && (c - 2.0).norm() >= 2.0 * r);
        let op = diagonal_example();
        let v = indicator(&op, &Disk::new(c, r, 32).unwrap(), probe_vector(2, 5).as_ref()).unwrap();
        prop_assert!(v <= 1e-8, "{}", v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn accepted_eigenvalues_lie_in_their_disks(
        roots in prop::collection::vec((0.3f64..2.7, -0.7f64..0.7), 1..5),
    ) {
        let roots: Vec<c64> = roots.into_iter().map(|(a, b)| c64::new(a, b)).collect();
        let n = roots.len();
        let r2 = roots.clone();
        let op = DenseOperator::new(n, move |z| Mat::from_fn(n, n, |i, j| if i == j { z - r2[i] } else { c64::new(0.0, 0.0) }));
        let region = Region::Rectangle { re_min: 0.0, re_max: 3.0, im_min: -1.0, im_max: 1.0, disk_radius: 0.6 };
        let out = solve_region(&op, &region, &SolverConfig::default()).unwrap();
        for e in &out.eigenvalues {
            prop_assert!(e.disk.contains(e.k));
            prop_assert!(roots.iter().any(|r| (r - e.k).norm() < 1e-8), "{}", e.k);
        }

        // the 0.2 screen may drop a disk whose probe-weighted residue is small, so check completeness unscreened
        let cfg = SolverConfig { indicator_threshold: 1e-9, ..SolverConfig::default() };
        let out = solve_region(&op, &region, &cfg).unwrap();
        for r in &roots {
            prop_assert!(out.eigenvalues.iter().any(|e| (e.k - r).norm() < 1e-8), "missed {}", r);
        }
    }

    #[test]
    fn mesh_pairing_area_and_dimensions(g in geometry()) {
        let mesh = generate_mesh(&g, MeshParams::new(0.2, 2.0).with_metal_h(0.08)).unwrap();
        let on = |x: f64, target: f64| (x - target).abs() <= 1e-12 * g.period;

        // left/right pairing is a bijection with equal heights
        let lefts: HashSet<usize> = mesh.pairs.iter().map(|p| p.0).collect();
        let rights: HashSet<usize> = mesh.pairs.iter().map(|p| p.1).collect();
        prop_assert_eq!(lefts.len(), mesh.pairs.len());
        prop_assert_eq!(rights.len(), mesh.pairs.len());
        prop_assert_eq!(mesh.nodes.iter().filter(|p| on(p[0], 0.0)).count(), mesh.pairs.len());
        prop_assert_eq!(mesh.nodes.iter().filter(|p| on(p[0], g.period)).count(), mesh.pairs.len());
        for &(l, r) in &mesh.pairs {
            prop_assert!(on(mesh.nodes[l][0], 0.0) && on(mesh.nodes[r][0], g.period));
            prop_assert_eq!(mesh.nodes[l][1], mesh.nodes[r][1]);
        }

        // boundary sets are disjoint
        let b = &mesh.boundary;
        let all: Vec<usize> = [&b.left, &b.right, &b.top, &b.bottom, &b.wall].iter().flat_map(|s| s.iter().copied()).collect();
        prop_assert_eq!(all.iter().collect::<HashSet<_>>().len(), all.len());

        // refinement keeps the tagged areas
        let fine = mesh.refine_uniform();
        for tag in [Tag::Metal, Tag::Vacuum] {
            let (a, f) = (mesh.region_area(tag), fine.region_area(tag));
            prop_assert!((a - f).abs() <= 1e-12 * a.max(1.0));
        }

        let blocks = assemble_blocks(&mesh, 0.3, 4).unwrap();
        prop_assert_eq!(blocks.dim(), mesh.num_nodes() + mesh.pairs.len());
        prop_assert_eq!(blocks.top.nodes.len(), mesh.side_nodes(gratres_core::mesh::Side::Top).len());
    }
}
