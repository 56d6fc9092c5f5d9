//! Binarization and linear grasp-proxy metrics for finished designs.
//!
//! All load sequencing is linear superposition: the actuated grasp position and the
//! probing load are solved independently and never interact.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::domain::{make_selector, FaceLabel, Mesh, NodeSelector};
use crate::fem::{max_solid_von_mises, von_mises, FactoredStiffness, FeSystem, LoadCase};
use crate::optimizer::{actuation_case, Formulation, Problem, CONTACT_DIRECTION};
use crate::{Error, Result};

/// Mid-face displacements smaller than this make adaptivity undefined (mm).
pub const MIN_MID_DISPLACEMENT: f64 = 1e-9;

const PROBE_FORCE: f64 = 1.0;

/// Header stored with every report.
pub const SUPERPOSITION_NOTE: &str = "linear FEM; the probing load is superposed on the actuated \
     position rather than applied after it; actuation_reaction is a prescribed-displacement \
     reaction, not a contact force";

/// 0/1 design over the active elements of a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryDesign {
    pub rho: Vec<f64>,
    /// Solid design elements chosen by thresholding, before island removal.
    pub thresholded: usize,
    /// Solid design elements dropped because they had no path to a support.
    pub removed: usize,
    /// Every load face is connected to a support through solid material.
    pub valid: bool,
}

impl BinaryDesign {
    /// Solid fraction of the design elements.
    pub fn volume_fraction(&self, design: &[bool]) -> f64 {
        let n = design.iter().filter(|&&d| d).count();
        let solid = self.rho.iter().zip(design).filter(|&(&r, &d)| d && r > 0.5).count();
        solid as f64 / n.max(1) as f64
    }
}

/// Threshold `rho` so that `round(target_vf * n_design)` design elements are solid,
/// then drop solid design elements not connected to a mounting slot.
///
/// Ranking by density with ties broken by element index is the same as bisecting the
/// threshold down to a single element.
pub fn binarize(mesh: &Mesh, rho: &[f64], target_vf: f64) -> Result<BinaryDesign> {
    let spec = mesh
        .spec()
        .ok_or_else(|| Error::InvalidDomain("mesh has no domain spec".into()))?;
    let active = mesh.active_elements();
    if rho.len() != active.len() {
        return Err(Error::InvalidDensity(format!(
            "field has {} entries for {} active elements",
            rho.len(),
            active.len()
        )));
    }
    if !(0.0..=1.0).contains(&target_vf) {
        return Err(Error::Config(format!("target volume fraction {target_vf} outside [0, 1]")));
    }
    let design = mesh.design_flags();
    let mut order: Vec<usize> = (0..rho.len()).filter(|&k| design[k]).collect();
    let n_design = order.len();
    let keep = ((target_vf * n_design as f64).round() as usize).min(n_design);
    order.sort_by(|&a, &b| rho[b].total_cmp(&rho[a]).then(a.cmp(&b)));
    let mut out: Vec<f64> = design.iter().map(|&d| if d { 0.0 } else { 1.0 }).collect();
    for &k in &order[..keep] {
        out[k] = 1.0;
    }

    let slot_cells = |k: usize| {
        let [cx, cy] = mesh.element_centroid(active[k]);
        spec.slot_regions.iter().any(|r| r.contains(cx, cy))
    };
    let seeds: Vec<usize> = (0..active.len()).filter(|&k| slot_cells(k)).collect();
    let reached = flood(mesh, &out, &seeds);
    let mut removed = 0;
    for k in 0..out.len() {
        if design[k] && out[k] == 1.0 && !reached[k] {
            out[k] = 0.0;
            removed += 1;
        }
    }
    let valid = (0..out.len()).all(|k| design[k] || reached[k]);
    Ok(BinaryDesign {
        rho: out,
        thresholded: keep,
        removed,
        valid,
    })
}

/// Solid active elements reachable from `seeds` through shared edges.
fn flood(mesh: &Mesh, rho: &[f64], seeds: &[usize]) -> Vec<bool> {
    let mut slot = vec![usize::MAX; mesh.elements.len()];
    for (k, &e) in mesh.active_elements().iter().enumerate() {
        slot[e] = k;
    }
    let mut seen = vec![false; rho.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in seeds {
        if rho[s] > 0.5 && !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(k) = queue.pop_front() {
        let (i, j) = mesh.element_cell(mesh.active_elements()[k]);
        let neighbours = [
            (i > 0).then(|| (i - 1, j)),
            (i + 1 < mesh.nx).then(|| (i + 1, j)),
            (j > 0).then(|| (i, j - 1)),
            (j + 1 < mesh.ny).then(|| (i, j + 1)),
        ];
        for (ni, nj) in neighbours.into_iter().flatten() {
            let n = slot[mesh.element_index(ni, nj)];
            if n != usize::MAX && !seen[n] && rho[n] > 0.5 {
                seen[n] = true;
                queue.push_back(n);
            }
        }
    }
    seen
}

fn probe(selector: &NodeSelector) -> LoadCase {
    LoadCase::force("probe", selector.clone(), PROBE_FORCE, CONTACT_DIRECTION)
}

fn probe_solve(factored: &FactoredStiffness<'_>, case: &LoadCase) -> Vec<f64> {
    let system = factored.system();
    factored.solve_loads(&system.force_vector(case), &[])
}

/// `1 N / mean tip x-displacement` under a 1 N x-load on the tip face. Prescribed
/// dofs stay at their grasp position, which superposition reduces to zero.
pub fn tip_stiffness(system: &FeSystem, rho: &[f64], tip: &NodeSelector) -> Result<f64> {
    let factored = system.assemble(rho)?.factorize()?;
    let u = probe_solve(&factored, &probe(tip));
    let delta = tip.apply(&u);
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidDesign(format!("tip displacement {delta:e} under a tip load")));
    }
    Ok(PROBE_FORCE / delta)
}

/// [`tip_stiffness`] of a binarized design on its run's problem; disconnected designs
/// are an error rather than a near-zero stiffness.
pub fn design_tip_stiffness(problem: &Problem, design: &BinaryDesign) -> Result<f64> {
    if !design.valid {
        return Err(Error::InvalidDesign("load faces are not connected to the supports".into()));
    }
    let tip = make_selector(&problem.mesh, FaceLabel::Tip)?;
    tip_stiffness(&problem.system, &design.rho, &tip)
}

/// `(d_mid - d_tip) / |d_mid|` for a 1 N x-load on `mid`.
pub fn adaptivity(system: &FeSystem, rho: &[f64], mid: &NodeSelector, tip: &NodeSelector) -> Result<f64> {
    let factored = system.assemble(rho)?.factorize()?;
    let u = probe_solve(&factored, &probe(mid));
    let (d_mid, d_tip) = (mid.apply(&u), tip.apply(&u));
    if d_mid.abs() < MIN_MID_DISPLACEMENT {
        return Err(Error::InvalidDesign(format!(
            "adaptivity undefined: mid-face displacement {d_mid:e} mm"
        )));
    }
    Ok((d_mid - d_tip) / d_mid.abs())
}

/// Face whose load probes adaptivity: `F_in3` for passive designs, `F_in2` for active.
pub fn adaptivity_face(formulation: Formulation) -> FaceLabel {
    match formulation {
        Formulation::Passive => FaceLabel::Input(2),
        Formulation::Active => FaceLabel::Input(1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub design_id: String,
    pub formulation: Formulation,
    pub element_size: f64,
    pub valid: bool,
    pub volume_fraction_binary: f64,
    pub removed_elements: usize,
    /// N/mm
    pub tip_stiffness: Option<f64>,
    pub adaptivity: Option<f64>,
    /// MPa, solid elements under the 1 N tip load
    pub max_von_mises: Option<f64>,
    /// MPa, solid elements at the actuated position
    pub max_von_mises_actuated: Option<f64>,
    /// mm, mean tip x-displacement at the actuated position
    pub tip_free_disp: Option<f64>,
    /// N, summed reaction on the actuation face at the actuated position
    pub actuation_reaction: Option<f64>,
    pub note: String,
    /// Sub-metrics that could not be computed.
    pub errors: Vec<String>,
}

impl VerificationReport {
    pub fn is_partial(&self) -> bool {
        !self.errors.is_empty()
    }
}

/// Binarize the physical field `rho` of a run on `problem` and compute every metric.
/// Failing metrics are left empty and listed in `errors`.
pub fn verify_design(
    design_id: &str,
    problem: &Problem,
    rho: &[f64],
    input_displacement: Option<f64>,
) -> Result<VerificationReport> {
    let mesh = &problem.mesh;
    let flags = mesh.design_flags();
    let n_design = flags.iter().filter(|&&d| d).count().max(1);
    let continuous = rho.iter().zip(&flags).filter(|(_, &d)| d).map(|(r, _)| r).sum::<f64>() / n_design as f64;
    let binary = binarize(mesh, rho, continuous)?;
    let mut report = VerificationReport {
        design_id: design_id.to_string(),
        formulation: problem.formulation,
        element_size: mesh.element_size,
        valid: binary.valid,
        volume_fraction_binary: binary.volume_fraction(&flags),
        removed_elements: binary.removed,
        tip_stiffness: None,
        adaptivity: None,
        max_von_mises: None,
        max_von_mises_actuated: None,
        tip_free_disp: None,
        actuation_reaction: None,
        note: SUPERPOSITION_NOTE.to_string(),
        errors: Vec::new(),
    };
    if !binary.valid {
        report
            .errors
            .push("load faces are not connected to the supports".to_string());
        return Ok(report);
    }
    let system = &problem.system;
    let tip = make_selector(mesh, FaceLabel::Tip)?;
    let mid = make_selector(mesh, adaptivity_face(problem.formulation))?;
    let mut errors = Vec::new();
    let mut report_error = |name: &str, e: &Error| errors.push(format!("{name}: {e}"));

    let tip_load = (|| -> Result<(f64, f64)> {
        let factored = system.assemble(&binary.rho)?.factorize()?;
        let u = probe_solve(&factored, &probe(&tip));
        let delta = tip.apply(&u);
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidDesign(format!("tip displacement {delta:e} under a tip load")));
        }
        let stress = max_solid_von_mises(&von_mises(system, &binary.rho, &u)?);
        Ok((PROBE_FORCE / delta, stress))
    })();
    match tip_load {
        Ok((k, s)) => {
            report.tip_stiffness = Some(k);
            report.max_von_mises = Some(s);
        }
        Err(e) => report_error("tip_stiffness", &e),
    }
    match adaptivity(system, &binary.rho, &mid, &tip) {
        Ok(a) => report.adaptivity = Some(a),
        Err(e) => report_error("adaptivity", &e),
    }
    if problem.formulation == Formulation::Active {
        let actuated = (|| -> Result<(f64, f64, f64)> {
            let x_in = input_displacement
                .ok_or_else(|| Error::Config("active design needs an input displacement".into()))?;
            let case = actuation_case(mesh, x_in)?;
            let factored = system.assemble(&binary.rho)?.factorize()?;
            let sol = factored.solve_case(&case, &tip)?;
            let driven = case.prescribed_dofs();
            let reaction = sol
                .reactions
                .iter()
                .filter(|(d, _)| driven.contains(d))
                .map(|(_, r)| r)
                .sum::<f64>();
            let stress = max_solid_von_mises(&von_mises(system, &binary.rho, &sol.u)?);
            Ok((sol.output_disp, reaction, stress))
        })();
        match actuated {
            Ok((d, r, s)) => {
                report.tip_free_disp = Some(d);
                report.actuation_reaction = Some(r);
                report.max_von_mises_actuated = Some(s);
            }
            Err(e) => report_error("actuation", &e),
        }
    }
    report.errors = errors;
    Ok(report)
}

/// Spearman rank correlation with average ranks for ties. `None` for fewer than two
/// points or a constant series.
pub fn rank_correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}
