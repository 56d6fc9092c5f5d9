//! Reference implementations used as test oracles. Nothing here calls the
//! production element, assembly or solver code.
#![allow(dead_code)]

use finger_topo::campaign::Coordinate;
use finger_topo::domain::{build_domain, Axis, DomainSpec, Mesh, NodeSelector};
use finger_topo::fem::{DofConstraints, FeSystem, LoadCase, LoadKind, MaterialParams};
use finger_topo::optimizer::{Formulation, ObjectiveSettings, Problem};
use finger_topo::sensitivity::{evaluate_objective, gradient};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 12 x 20 element desk mesh.
pub fn desk_spec() -> DomainSpec {
    DomainSpec::proportional(100.0, 60.0, 20.0, 5.0)
}

/// 40 x 80 element mesh.
pub fn regression_spec() -> DomainSpec {
    DomainSpec::proportional(100.0, 50.0, 15.0, 1.25)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(rng: &mut ChaCha8Rng, pinned: &[bool], lo: f64, hi: f64) -> Vec<f64> {
    pinned
        .iter()
        .map(|&p| if p { 1.0 } else { rng.random_range(lo..hi) })
        .collect()
}

/// Closed-form bilinear square-element stiffness (plane stress, unit modulus and
/// thickness), nodes counter-clockwise from the bottom-left.
pub fn closed_form_ke(nu: f64) -> [[f64; 8]; 8] {
    let k = [
        0.5 - nu / 6.0,
        0.125 + nu / 8.0,
        -0.25 - nu / 12.0,
        -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0,
        -0.125 - nu / 8.0,
        nu / 6.0,
        0.125 - 3.0 * nu / 8.0,
    ];
    let idx = [
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ];
    let c = 1.0 / (1.0 - nu * nu);
    let mut ke = [[0.0; 8]; 8];
    for r in 0..8 {
        for s in 0..8 {
            ke[r][s] = c * k[idx[r][s]];
        }
    }
    ke
}

/// Element stiffness by explicit 2x2 Gauss integration of a general quadrilateral.
pub fn gauss_ke(coords: &[[f64; 2]; 4], e: f64, nu: f64, t: f64) -> DMatrix<f64> {
    let c = e / (1.0 - nu * nu);
    let d = DMatrix::from_row_slice(3, 3, &[c, c * nu, 0.0, c * nu, c, 0.0, 0.0, 0.0, c * (1.0 - nu) / 2.0]);
    let g = 1.0 / 3f64.sqrt();
    let mut k = DMatrix::<f64>::zeros(8, 8);
    for (xi, eta) in [(-g, -g), (g, -g), (g, g), (-g, g)] {
        let dn_dxi = [-(1.0 - eta) / 4.0, (1.0 - eta) / 4.0, (1.0 + eta) / 4.0, -(1.0 + eta) / 4.0];
        let dn_deta = [-(1.0 - xi) / 4.0, -(1.0 + xi) / 4.0, (1.0 + xi) / 4.0, (1.0 - xi) / 4.0];
        let mut j = DMatrix::<f64>::zeros(2, 2);
        for a in 0..4 {
            j[(0, 0)] += dn_dxi[a] * coords[a][0];
            j[(0, 1)] += dn_dxi[a] * coords[a][1];
            j[(1, 0)] += dn_deta[a] * coords[a][0];
            j[(1, 1)] += dn_deta[a] * coords[a][1];
        }
        let det = j.determinant();
        let jinv = j.try_inverse().unwrap();
        let mut b = DMatrix::<f64>::zeros(3, 8);
        for a in 0..4 {
            let dx = jinv[(0, 0)] * dn_dxi[a] + jinv[(0, 1)] * dn_deta[a];
            let dy = jinv[(1, 0)] * dn_dxi[a] + jinv[(1, 1)] * dn_deta[a];
            b[(0, 2 * a)] = dx;
            b[(1, 2 * a + 1)] = dy;
            b[(2, 2 * a)] = dy;
            b[(2, 2 * a + 1)] = dx;
        }
        k += b.transpose() * &d * b * (det * t);
    }
    k
}

/// Dense global stiffness over all mesh dofs (unused dofs get a zero row).
pub fn dense_stiffness(mesh: &Mesh, rho: &[f64], mat: &MaterialParams) -> DMatrix<f64> {
    let n = mesh.dof_count;
    let mut k = DMatrix::<f64>::zeros(n, n);
    let active: Vec<usize> = (0..mesh.elements.len()).filter(|&e| mesh.active_mask[e]).collect();
    assert_eq!(active.len(), rho.len());
    for (&e, &r) in active.iter().zip(rho) {
        let nodes = mesh.elements[e];
        let coords = nodes.map(|n| mesh.nodes[n]);
        let modulus = mat.min_modulus + r.powf(mat.penalty) * (mat.youngs_modulus - mat.min_modulus);
        let ke = gauss_ke(&coords, modulus, mat.poisson_ratio, mat.thickness);
        for a in 0..8 {
            for b in 0..8 {
                k[(2 * nodes[a / 2] + a % 2, 2 * nodes[b / 2] + b % 2)] += ke[(a, b)];
            }
        }
    }
    k
}

/// Dense solve with supports and one case's prescribed values; returns full `u`.
pub fn dense_solve(k: &DMatrix<f64>, constraints: &DofConstraints, case: &LoadCase) -> DVector<f64> {
    let n = k.nrows();
    let mut value = vec![None; n];
    for &d in &constraints.fixed {
        value[d] = Some(0.0);
    }
    for &d in &constraints.prescribed {
        value[d] = Some(0.0);
    }
    let mut f = DVector::<f64>::zeros(n);
    let sel = &case.selector;
    for (i, &node) in sel.nodes.iter().enumerate() {
        for axis in 0..2 {
            let amount = sel.weights[i] * case.magnitude * case.direction[axis];
            match case.kind {
                LoadKind::Force => f[2 * node + axis] += amount,
                LoadKind::PrescribedDisplacement => {
                    if case.direction[axis] != 0.0 {
                        value[2 * node + axis] = Some(case.magnitude * case.direction[axis]);
                    }
                }
            }
        }
    }
    // dofs with an empty stiffness row belong to no element
    for d in 0..n {
        if k[(d, d)] == 0.0 {
            value[d] = Some(0.0);
        }
    }
    let free: Vec<usize> = (0..n).filter(|&d| value[d].is_none()).collect();
    let mut u = DVector::<f64>::zeros(n);
    for d in 0..n {
        if let Some(v) = value[d] {
            u[d] = v;
        }
    }
    let kf = DMatrix::from_fn(free.len(), free.len(), |a, b| k[(free[a], free[b])]);
    let rhs = DVector::from_fn(free.len(), |a, _| {
        let d = free[a];
        f[d] - (0..n).filter(|&c| value[c].is_some()).map(|c| k[(d, c)] * u[c]).sum::<f64>()
    });
    let uf = kf.cholesky().expect("oracle system positive definite").solve(&rhs);
    for (a, &d) in free.iter().enumerate() {
        u[d] = uf[a];
    }
    u
}

pub fn select(sel: &NodeSelector, u: &DVector<f64>) -> f64 {
    sel.dof_weights().map(|(d, w)| w * u[d]).sum()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

/// Desk-mesh problem with X_in = 5 mm for the active formulation.
pub fn problem(formulation: Formulation) -> Problem {
    let mesh = build_domain(&desk_spec()).unwrap();
    let x_in = (formulation == Formulation::Active).then_some(5.0);
    Problem::with_mesh(mesh, MaterialParams::default(), formulation, &ObjectiveSettings::default(), x_in, 2.0)
        .unwrap()
}

pub fn phi(p: &Problem, rho: &[f64]) -> f64 {
    evaluate_objective(&p.system, rho, &p.objective).unwrap().0.total_phi
}

/// Adjoint gradient against central differences on 50 random design elements of a
/// random design.
pub struct FdReport {
    /// Largest `|fd - g| / |g|`.
    pub worst: f64,
    /// `|g|` of the element attaining `worst`.
    pub worst_g: f64,
    /// Relative error of that element recomputed with a 100x larger step.
    pub worst_coarse: f64,
    /// Largest `|g|` over the design.
    pub g_max: f64,
    /// Elements with relative error above 1e-3.
    pub exceeding: usize,
    /// Largest `|fd - g| / (1e-3 |g| + 1e-9 max|g|)`.
    pub scaled: f64,
}

pub fn finite_difference_report(formulation: Formulation, seed: u64, h: f64) -> FdReport {
    let p = problem(formulation);
    let mut rng = rng(seed);
    let rho = random_field(&mut rng, &p.pinned, 0.1, 0.9);
    let (_, cache) = evaluate_objective(&p.system, &rho, &p.objective).unwrap();
    let g = gradient(&p.system, &rho, &p.objective, &cache, &p.pinned).unwrap();
    let central = |k: usize, h: f64| {
        let mut up = rho.clone();
        let mut down = rho.clone();
        up[k] += h;
        down[k] -= h;
        (phi(&p, &up) - phi(&p, &down)) / (2.0 * h)
    };
    let g_max = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let (mut worst, mut worst_k, mut exceeding, mut scaled) = (0.0, 0, 0, 0.0f64);
    for i in sample(&mut rng, p.design_count(), 50) {
        let k = p.design_vars[i];
        let err = (central(k, h) - g[k]).abs();
        let rel = err / g[k].abs();
        if rel > worst {
            worst = rel;
            worst_k = k;
        }
        exceeding += (rel > 1e-3) as usize;
        scaled = scaled.max(err / (1e-3 * g[k].abs() + 1e-9 * g_max));
    }
    FdReport {
        worst,
        worst_g: g[worst_k].abs(),
        worst_coarse: (central(worst_k, 100.0 * h) - g[worst_k]).abs() / g[worst_k].abs(),
        g_max,
        exceeding,
        scaled,
    }
}

pub fn finite_difference_error(formulation: Formulation, seed: u64) -> f64 {
    finite_difference_report(formulation, seed, 1e-6).worst
}

/// Relative tip-deflection error of a solid cantilever clamped at `x = 0`, unit
/// downward load over the free end, against Euler-Bernoulli `PL^3 / 3EI`.
pub fn cantilever_tip_error(length: f64, depth: f64, h: f64) -> f64 {
    let (nx, ny) = ((length / h).round() as usize, (depth / h).round() as usize);
    let mesh = Mesh::rectangle(nx, ny, h);
    let mut c = DofConstraints::default();
    let root: Vec<usize> = (0..=ny).map(|j| mesh.node_index(0, j)).collect();
    c.clamp_nodes(&root);
    let mat = MaterialParams::default();
    let sys = FeSystem::new(&mesh, mat, &c).unwrap();
    let tip = NodeSelector::uniform((0..=ny).map(|j| mesh.node_index(nx, j)).collect(), Axis::Y).unwrap();
    let case = LoadCase::force("tip", tip.clone(), 1.0, [0.0, -1.0]);
    let sol = sys.assemble(&vec![1.0; nx * ny]).unwrap().factorize().unwrap().solve_case(&case, &tip).unwrap();
    let inertia = mat.thickness * depth.powi(3) / 12.0;
    let beam = length.powi(3) / (3.0 * mat.youngs_modulus * inertia);
    (-sol.output_disp - beam).abs() / beam
}

/// O(n^2) dominance check; identical points are broken by run id. Sorted ids.
pub fn brute_front(points: &[Coordinate]) -> Vec<String> {
    let mut out: Vec<String> = points
        .iter()
        .filter(|p| {
            !points.iter().any(|q| {
                let weak = q.mean_output_disp <= p.mean_output_disp && q.total_strain_energy <= p.total_strain_energy;
                let strict = q.mean_output_disp < p.mean_output_disp || q.total_strain_energy < p.total_strain_energy;
                weak && (strict || q.run_id < p.run_id)
            })
        })
        .map(|p| p.run_id.clone())
        .collect();
    out.sort();
    out
}
