use std::collections::VecDeque;

use faer::c64;
use serde::{Deserialize, Serialize};

use super::beyn::beyn_growing;
use super::{
    indicator, probe_vector, validate, AuditEvent, AuditLog, Decision, Disk, EigenResult, NepError, NonlinearOperator,
    SolverConfig,
};

/// Search region of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Disk { center: c64, radius: f64 },
    /// `[re_min, re_max] × [im_min, im_max]`, covered by disks of `disk_radius`.
    Rectangle { re_min: f64, re_max: f64, im_min: f64, im_max: f64, disk_radius: f64 },
}

impl Region {
    pub fn contains(&self, z: c64) -> bool {
        match *self {
            Region::Disk { center, radius } => (z - center).norm() < radius,
            Region::Rectangle { re_min, re_max, im_min, im_max, .. } => {
                z.re >= re_min && z.re <= re_max && z.im >= im_min && z.im <= im_max
            }
        }
    }

    pub fn validate(&self) -> Result<(), NepError> {
        let ok = match *self {
            Region::Disk { radius, .. } => radius > 0.0 && radius.is_finite(),
            Region::Rectangle { re_min, re_max, im_min, im_max, disk_radius } => {
                re_min <= re_max && im_min <= im_max && disk_radius > 0.0 && disk_radius.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(NepError::InvalidConfig(format!("degenerate search region {self:?}")))
        }
    }

    /// Disks of the indicator cover.
    pub fn cover(&self, nodes: usize, overlap: f64) -> Vec<Disk> {
        match *self {
            Region::Disk { center, radius } => vec![Disk { center, radius, nodes }],
            Region::Rectangle { re_min, re_max, im_min, im_max, disk_radius } => {
                hex_cover([re_min, re_max], [im_min, im_max], disk_radius, overlap)
                    .into_iter()
                    .map(|center| Disk { center, radius: disk_radius, nodes })
                    .collect()
            }
        }
    }
}

/// Centers of equal disks of radius `r` on a hexagonal lattice covering the
/// rectangle, with spacing shrunk by `overlap` relative to the tightest cover.
pub fn hex_cover(re: [f64; 2], im: [f64; 2], r: f64, overlap: f64) -> Vec<c64> {
    let dx_max = 3f64.sqrt() * r * (1.0 - overlap);
    let dy_max = 1.5 * r * (1.0 - overlap);
    let (w, h) = (re[1] - re[0], im[1] - im[0]);
    let rows = (h / dy_max).ceil() as usize + 1;
    let cols = (w / dx_max).ceil() as usize + 1;
    let dy = if rows > 1 { h / (rows - 1) as f64 } else { 0.0 };
    let dx = if cols > 1 { w / (cols - 1) as f64 } else { 0.0 };
    let mut centers = Vec::new();
    for i in 0..rows {
        let y = im[0] + i as f64 * dy;
        if i % 2 == 0 || cols == 1 {
            centers.extend((0..cols).map(|j| c64::new(re[0] + j as f64 * dx, y)));
        } else {
            // odd rows sit half a step over and reach one step further out to keep the edges covered
            centers.extend((0..=cols).map(|j| c64::new(re[0] + (j as f64 - 0.5) * dx, y)));
        }
    }
    centers
}

#[derive(Debug, Clone, Default)]
pub struct RegionOutcome {
    pub eigenvalues: Vec<EigenResult>,
    /// Every disk examined; the cover comes first, spawned disks follow.
    pub disks: Vec<Disk>,
    /// Normalized indicator of each cover disk (1 for a single-disk cover).
    pub indicators: Vec<f64>,
    pub audit: AuditLog,
}

struct Task {
    id: usize,
    depth: usize,
}

/// Indicator scan, Beyn extraction on occupied disks, validation
/// with recursive refinement of borderline candidates.
pub fn solve_region<O: NonlinearOperator>(
    op: &O,
    region: &Region,
    config: &SolverConfig,
) -> Result<RegionOutcome, NepError> {
    config.validate()?;
    region.validate()?;
    let cover = region.cover(config.quadrature_nodes, config.cover_overlap);
    let bad: Vec<_> = cover.iter().flat_map(|d| op.singularities_in_disk(d.center, d.radius)).collect();
    if !bad.is_empty() {
        return Err(NepError::RegionTouchesSingularity(bad));
    }

    let mut out = RegionOutcome { disks: cover.clone(), ..Default::default() };
    out.audit.push(AuditEvent::Cover { disks: cover.clone() });

    // indicator scan
    let mut kept = vec![true; cover.len()];
    if cover.len() > 1 {
        let probe = probe_vector(op.dim(), config.rng_seed);
        let mut values = Vec::with_capacity(cover.len());
        for disk in &cover {
            values.push(indicator(op, disk, probe.as_ref())?);
        }
        let max = values.iter().copied().fold(0.0, f64::max);
        for (id, &v) in values.iter().enumerate() {
            let normalized = if max > 0.0 { v / max } else { 0.0 };
            kept[id] = normalized >= config.indicator_threshold;
            out.indicators.push(normalized);
            out.audit.push(AuditEvent::Indicator { disk_id: id, value: v, normalized, kept: kept[id] });
        }
    } else {
        out.indicators.push(1.0);
    }

    // Steps 2 and 3
    let mut queue: VecDeque<Task> = (0..cover.len()).filter(|&i| kept[i]).map(|id| Task { id, depth: 0 }).collect();
    let kept_disks: Vec<Disk> = (0..cover.len()).filter(|&i| kept[i]).map(|i| cover[i]).collect();
    let seed = config.rng_seed.wrapping_add(1);
    while let Some(task) = queue.pop_front() {
        let disk = out.disks[task.id];
        let mut grow_events = Vec::new();
        let beyn = match beyn_growing(op, &disk, config.l1, config.l1_max, config.svd_tol, config.svd_tol_mode, seed, |l| {
            grow_events.push(l)
        }) {
            Ok(b) => b,
            Err(e) if task.depth == 0 && task.id < cover.len() => return Err(e),
            Err(e) => {
                out.audit.push(AuditEvent::DiskFailed { disk_id: task.id, error: e.to_string() });
                continue;
            }
        };
        for l1 in grow_events {
            out.audit.push(AuditEvent::SubspaceGrown { disk_id: task.id, l1 });
        }
        out.audit.push(AuditEvent::Beyn {
            disk_id: task.id,
            l1: beyn.l1,
            rank: beyn.rank,
            singular_values: beyn.singular_values.clone(),
        });

        for cand in &beyn.candidates {
            let k = cand.k;
            let log = |out: &mut RegionOutcome, metric, decision| {
                out.audit.push(AuditEvent::Candidate { disk_id: task.id, k, inside: cand.inside, metric, decision })
            };
            if !cand.inside {
                if !region.contains(k) {
                    log(&mut out, None, Decision::OutsideRegion);
                } else if task.depth == 0 && kept_disks.iter().any(|d| *d != disk && d.contains(k)) {
                    log(&mut out, None, Decision::HandledElsewhere);
                } else if task.depth < config.max_recursion_depth
                    && !out.disks.iter().skip(cover.len()).any(|d| d.contains(k))
                {
                    log(&mut out, None, Decision::Rerouted);
                    let radius = 0.5 * disk.radius;
                    let spawn = Disk { center: k, radius, nodes: disk.nodes };
                    push_spawn(op, &mut out, &mut queue, spawn, task.id, task.depth + 1, Decision::Rerouted);
                } else {
                    log(&mut out, None, Decision::DepthExhausted);
                }
                continue;
            }
            let val = match validate(op, k, Some(&cand.vector), config) {
                Ok(v) => v,
                Err(e) => {
                    out.audit.push(AuditEvent::DiskFailed { disk_id: task.id, error: format!("validation at {k}: {e}") });
                    continue;
                }
            };
            let metric = val.metric;
            if metric < config.accept_tol {
                if !region.contains(k) {
                    log(&mut out, Some(metric), Decision::OutsideRegion);
                } else if out.eigenvalues.iter().any(|e| (e.k - k).norm() < config.dedup_factor * e.disk.radius.max(disk.radius)) {
                    log(&mut out, Some(metric), Decision::Duplicate);
                } else {
                    log(&mut out, Some(metric), Decision::Accepted);
                    out.eigenvalues.push(EigenResult {
                        k,
                        residual: metric,
                        eigenvector: val.vector,
                        disk,
                        disk_id: task.id,
                        config: *config,
                    });
                }
            } else if metric <= config.reject_tol {
                if task.depth < config.max_recursion_depth {
                    log(&mut out, Some(metric), Decision::Refine);
                    let spawn = Disk { center: k, radius: disk.radius * config.refine_radius_factor, nodes: disk.nodes };
                    push_spawn(op, &mut out, &mut queue, spawn, task.id, task.depth + 1, Decision::Refine);
                } else {
                    log(&mut out, Some(metric), Decision::DepthExhausted);
                }
            } else {
                log(&mut out, Some(metric), Decision::Discarded);
            }
        }
    }
    out.eigenvalues.sort_by(|a, b| a.k.re.total_cmp(&b.k.re).then(a.k.im.total_cmp(&b.k.im)));
    Ok(out)
}

fn push_spawn<O: NonlinearOperator>(
    op: &O,
    out: &mut RegionOutcome,
    queue: &mut VecDeque<Task>,
    disk: Disk,
    parent: usize,
    depth: usize,
    reason: Decision,
) {
    let id = out.disks.len();
    out.disks.push(disk);
    out.audit.push(AuditEvent::Spawn { disk_id: id, parent, disk, depth, reason });
    let bad = op.singularities_in_disk(disk.center, disk.radius);
    if bad.is_empty() {
        queue.push_back(Task { id, depth });
    } else {
        out.audit.push(AuditEvent::DiskFailed { disk_id: id, error: format!("disk touches singularities {bad:?}") });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nep::dense::{diagonal_example, quadratic_example};

    #[test]
    fn hex_cover_covers_rectangle() {
        let (re, im, r) = ([2.0, 7.0], [-3.5, 0.5], 0.45);
        let centers = hex_cover(re, im, r, 0.15);
        for i in 0..=100 {
            for j in 0..=80 {
                let z = c64::new(re[0] + 5.0 * i as f64 / 100.0, im[0] + 4.0 * j as f64 / 80.0);
                assert!(centers.iter().any(|c| (z - c).norm() < r), "{z} uncovered");
            }
        }
    }

    #[test]
    fn diagonal_rectangle() {
        let op = diagonal_example();
        let region = Region::Rectangle { re_min: 0.0, re_max: 3.0, im_min: -1.0, im_max: 1.0, disk_radius: 0.5 };
        let cfg = SolverConfig { quadrature_nodes: 32, ..Default::default() };
        let out = solve_region(&op, &region, &cfg).unwrap();
        let ks: Vec<c64> = out.eigenvalues.iter().map(|e| e.k).collect();
        assert_eq!(ks.len(), 2, "{ks:?}");
        assert!((ks[0] - 1.0).norm() < 1e-10 && (ks[1] - 2.0).norm() < 1e-10);
        assert!(out.indicators.iter().any(|&v| v < cfg.indicator_threshold));
        for e in &out.eigenvalues {
            assert!(e.disk.contains(e.k));
        }
    }

    #[test]
    fn quadratic_single_disk() {
        let op = quadratic_example();
        let region = Region::Disk { center: c64::new(0.0, 0.0), radius: 1.5 };
        let cfg = SolverConfig { quadrature_nodes: 32, ..Default::default() };
        let out = solve_region(&op, &region, &cfg).unwrap();
        let ks: Vec<c64> = out.eigenvalues.iter().map(|e| e.k).collect();
        assert_eq!(ks.len(), 4, "{ks:?}");
    }

    #[test]
    fn deterministic_audit() {
        let op = diagonal_example();
        let region = Region::Rectangle { re_min: 0.0, re_max: 3.0, im_min: -1.0, im_max: 1.0, disk_radius: 0.5 };
        let cfg = SolverConfig::default();
        let a = solve_region(&op, &region, &cfg).unwrap();
        let b = solve_region(&op, &region, &cfg).unwrap();
        assert_eq!(a.audit, b.audit);
    }
}
