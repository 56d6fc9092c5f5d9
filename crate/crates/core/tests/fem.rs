mod common;

use common::*;
use finger_topo::domain::{build_domain, make_selector, Axis, FaceLabel, Mesh};
use finger_topo::fem::stress::von_mises_of;
use finger_topo::fem::{
    element_stiffness, max_solid_von_mises, square_element_stiffness, von_mises, DofConstraints, FeSystem,
    LoadCase, MaterialParams,
};
use finger_topo::optimizer::{actuation_case, constraints, Formulation};
use finger_topo::Error;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn unit_square_matches_closed_form() {
    for nu in [0.0, 0.25, 0.3, 0.45] {
        let ke = square_element_stiffness(1.0, nu, 1.0);
        let oracle = closed_form_ke(nu);
        for r in 0..8 {
            for c in 0..8 {
                assert!((ke[r][c] - oracle[r][c]).abs() < 1e-12, "nu {nu} ({r},{c})");
            }
        }
    }
}

#[test]
fn distorted_quad_matches_gauss_oracle() {
    let coords = [[0.0, 0.0], [2.1, 0.2], [2.4, 1.7], [-0.3, 1.3]];
    let ke = element_stiffness(&coords, 0.3, 1.0);
    let oracle = gauss_ke(&coords, 1.0, 0.3, 1.0);
    for r in 0..8 {
        for c in 0..8 {
            assert!((ke[r][c] - oracle[(r, c)]).abs() < 1e-12);
        }
    }
}

#[test]
fn stiffness_is_linear_in_modulus() {
    let mesh = Mesh::rectangle(3, 2, 1.0);
    let mut c = DofConstraints::default();
    c.clamp_nodes(&[0, 4]);
    let rho = vec![1.0; 6];
    let soft = MaterialParams::default();
    let stiff = MaterialParams {
        youngs_modulus: 2.0 * soft.youngs_modulus,
        min_modulus: 2.0 * soft.min_modulus,
        ..soft
    };
    let a = FeSystem::new(&mesh, soft, &c).unwrap();
    let b = FeSystem::new(&mesh, stiff, &c).unwrap();
    let (ka, kb) = (a.assemble(&rho).unwrap(), b.assemble(&rho).unwrap());
    for i in 0..ka.dim() {
        for j in 0..=i {
            assert_eq!(kb.entry(i, j), 2.0 * ka.entry(i, j));
        }
    }
}

fn reduced_matches_dense(mesh: &Mesh, c: &DofConstraints, rho: &[f64]) {
    let mat = MaterialParams::default();
    let sys = FeSystem::new(mesh, mat, c).unwrap();
    let k = sys.assemble(rho).unwrap();
    let dense = dense_stiffness(mesh, rho, &mat);
    let scale = max_abs(&dense);
    let free: Vec<usize> = (0..sys.dof_count()).filter(|&d| sys.equation(d).is_some()).collect();
    assert_eq!(free.len(), k.dim());
    for &a in &free {
        for &b in &free {
            let (i, j) = (sys.equation(a).unwrap(), sys.equation(b).unwrap());
            let got = if j <= i { k.entry(i, j) } else { k.entry(j, i) };
            assert!((got - dense[(a, b)]).abs() <= 1e-9 * scale, "dofs ({a},{b})");
        }
    }
}

#[test]
fn two_by_two_assembly_matches_dense_oracle() {
    let mesh = Mesh::rectangle(2, 2, 1.5);
    let mut c = DofConstraints::default();
    c.clamp_nodes(&[0, 3, 6]);
    let mut rng = rng(1);
    let rho: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
    reduced_matches_dense(&mesh, &c, &rho);
}

#[test]
fn finger_assembly_matches_dense_oracle() {
    let mesh = build_domain(&desk_spec()).unwrap();
    let c = constraints(&mesh, Formulation::Active).unwrap();
    let mut rng = rng(2);
    let rho: Vec<f64> = (0..mesh.active_count()).map(|_| rng.random::<f64>()).collect();
    reduced_matches_dense(&mesh, &c, &rho);
}

#[test]
fn solid_density_gives_solid_stiffness() {
    let mesh = Mesh::rectangle(4, 3, 1.0);
    let mut c = DofConstraints::default();
    c.clamp_nodes(&[0, 5, 10, 15]);
    let mat = MaterialParams::default();
    let sys = FeSystem::new(&mesh, mat, &c).unwrap();
    let k = sys.assemble(&[1.0; 12]).unwrap();
    let e0 = sys.assemble_moduli(vec![mat.youngs_modulus; 12]).unwrap();
    for i in 0..k.dim() {
        for j in 0..=i {
            assert_eq!(k.entry(i, j), e0.entry(i, j));
        }
    }
}

#[test]
fn symmetric_on_random_density() {
    let mesh = Mesh::rectangle(5, 4, 1.0);
    let mut c = DofConstraints::default();
    c.fix_axis(&[0, 6, 12], Axis::X);
    c.fix_axis(&[0], Axis::Y);
    let sys = FeSystem::new(&mesh, MaterialParams::default(), &c).unwrap();
    let mut rng = rng(9);
    let rho: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
    let k = sys.assemble(&rho).unwrap();
    let n = k.dim();
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let (xky, ykx) = (dot(&x, &k.mul_vec(&y)), dot(&y, &k.mul_vec(&x)));
    assert!((xky - ykx).abs() <= 1e-12 * xky.abs().max(ykx.abs()));
}

#[test]
fn cantilever_converges_to_beam_theory() {
    let coarse = cantilever_tip_error(100.0, 10.0, 2.5);
    let fine = cantilever_tip_error(100.0, 10.0, 1.25);
    assert!(fine < coarse, "coarse {coarse:.4} fine {fine:.4}");
    assert!(fine < 0.15, "fine error {fine:.4}");
}

#[test]
fn prescribed_reaction_reproduces_displacement() {
    let mesh = build_domain(&desk_spec()).unwrap();
    let mat = MaterialParams::default();
    let rho = vec![1.0; mesh.active_count()];
    let output = make_selector(&mesh, FaceLabel::Output).unwrap();

    let driven = FeSystem::new(&mesh, mat, &constraints(&mesh, Formulation::Active).unwrap()).unwrap();
    let case = actuation_case(&mesh, 5.0).unwrap();
    let sol = driven.assemble(&rho).unwrap().factorize().unwrap().solve_case(&case, &output).unwrap();

    let mut held = DofConstraints::default();
    held.clamp_nodes(&mesh.slot_nodes(0).unwrap());
    let loaded = FeSystem::new(&mesh, mat, &held).unwrap();
    let mut forces = vec![0.0; mesh.dof_count];
    for &(dof, r) in &sol.reactions {
        if driven.prescribed_dofs().contains(&dof) {
            forces[dof] = r;
        }
    }
    let u = loaded.assemble(&rho).unwrap().factorize().unwrap().solve_loads(&forces, &[]);
    for dof in case.prescribed_dofs() {
        assert!((u[dof] + 5.0).abs() < 5e-6, "dof {dof}: {}", u[dof]);
    }
    assert!((output.apply(&u) - sol.output_disp).abs() < 1e-6 * sol.output_disp.abs());
}

#[test]
fn force_solves_satisfy_energy_identity_and_balance() {
    let mesh = build_domain(&desk_spec()).unwrap();
    let c = constraints(&mesh, Formulation::Passive).unwrap();
    let sys = FeSystem::new(&mesh, MaterialParams::default(), &c).unwrap();
    let output = make_selector(&mesh, FaceLabel::Output).unwrap();
    let mut rng = rng(77);
    for _ in 0..5 {
        let rho: Vec<f64> = (0..mesh.active_count()).map(|_| rng.random_range(0.01..1.0)).collect();
        let factored = sys.assemble(&rho).unwrap().factorize().unwrap();
        for k in 0..6 {
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let sel = make_selector(&mesh, FaceLabel::Input(k)).unwrap();
            let case = LoadCase::force("random", sel, rng.random_range(0.1..10.0), [angle.cos(), angle.sin()]);
            let sol = factored.solve_case(&case, &output).unwrap();
            let f = sys.force_vector(&case);
            let work: f64 = f.iter().zip(&sol.u).map(|(a, b)| a * b).sum();
            assert!(sol.strain_energy >= 0.0);
            assert!((sol.strain_energy - work).abs() / sol.strain_energy.max(1e-300) < 1e-8);
            assert!(sol.relative_residual < 1e-10);
            for axis in 0..2 {
                let applied: f64 = f.iter().skip(axis).step_by(2).sum();
                let reacted: f64 = sol.reactions.iter().filter(|(d, _)| d % 2 == axis).map(|(_, r)| r).sum();
                assert!((applied + reacted).abs() <= 1e-8 * case.magnitude, "axis {axis}");
            }
        }
    }
}

#[test]
fn void_design_stays_positive_definite() {
    let mesh = build_domain(&desk_spec()).unwrap();
    let c = constraints(&mesh, Formulation::Passive).unwrap();
    let sys = FeSystem::new(&mesh, MaterialParams::default(), &c).unwrap();
    let rho: Vec<f64> = mesh.design_flags().iter().map(|&d| if d { 0.0 } else { 1.0 }).collect();
    assert!(sys.assemble(&rho).unwrap().factorize().is_ok());
}

#[test]
fn missing_supports_are_reported_as_singular() {
    let mesh = Mesh::rectangle(3, 3, 1.0);
    let sys = FeSystem::new(&mesh, MaterialParams::default(), &DofConstraints::default()).unwrap();
    let err = sys.assemble(&[1.0; 9]).unwrap().factorize().unwrap_err();
    assert!(matches!(err, Error::Singular { .. }));
}

#[test]
fn zero_displacement_has_zero_stress() {
    let mesh = Mesh::rectangle(3, 2, 1.0);
    let sys = FeSystem::new(&mesh, MaterialParams::default(), &DofConstraints::default()).unwrap();
    let s = von_mises(&sys, &[1.0; 6], &vec![0.0; mesh.dof_count]).unwrap();
    assert!(s.iter().all(|e| e.von_mises == 0.0));
}

#[test]
fn uniaxial_patch_has_uniform_stress() {
    // u_x = eps * x, u_y = -nu * eps * y is the exact plane-stress uniaxial state
    let (eps, mat) = (1e-3, MaterialParams::default());
    let mesh = Mesh::rectangle(4, 3, 2.0);
    let sys = FeSystem::new(&mesh, mat, &DofConstraints::default()).unwrap();
    let mut u = vec![0.0; mesh.dof_count];
    for (n, p) in mesh.nodes.iter().enumerate() {
        u[2 * n] = eps * p[0];
        u[2 * n + 1] = -mat.poisson_ratio * eps * p[1];
    }
    let expected = mat.youngs_modulus * eps;
    for s in von_mises(&sys, &[1.0; 12], &u).unwrap() {
        assert!((s.von_mises - expected).abs() < 1e-8 * expected);
    }
}

#[test]
fn single_element_pure_shear() {
    let (gamma, mat) = (2e-3, MaterialParams::default());
    let mesh = Mesh::rectangle(1, 1, 3.0);
    let sys = FeSystem::new(&mesh, mat, &DofConstraints::default()).unwrap();
    let mut u = vec![0.0; 8];
    for (n, p) in mesh.nodes.iter().enumerate() {
        u[2 * n] = 0.5 * gamma * p[1];
        u[2 * n + 1] = 0.5 * gamma * p[0];
    }
    // tau = G gamma, von Mises = sqrt(3) tau
    let g = mat.youngs_modulus / (2.0 * (1.0 + mat.poisson_ratio));
    let expected = 3f64.sqrt() * g * gamma;
    let s = von_mises(&sys, &[1.0], &u).unwrap();
    assert!((s[0].von_mises - expected).abs() < 1e-12 * expected);
    assert!((von_mises_of([0.0, 0.0, g * gamma]) - expected).abs() < 1e-12 * expected);
}

#[test]
fn void_elements_are_flagged_not_dropped() {
    let mesh = Mesh::rectangle(2, 1, 1.0);
    let sys = FeSystem::new(&mesh, MaterialParams::default(), &DofConstraints::default()).unwrap();
    let mut u = vec![0.0; mesh.dof_count];
    u[2 * mesh.node_index(2, 0)] = 0.1;
    let s = von_mises(&sys, &[1.0, 0.2], &u).unwrap();
    assert!(!s[0].void && s[1].void);
    assert!(s[1].von_mises > 0.0);
    assert_eq!(max_solid_von_mises(&s), s[0].von_mises);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn displacement_scales_with_force(seed in any::<u64>(), alpha in 0.01f64..100.0) {
        let mesh = build_domain(&desk_spec()).unwrap();
        let c = constraints(&mesh, Formulation::Passive).unwrap();
        let sys = FeSystem::new(&mesh, MaterialParams::default(), &c).unwrap();
        let mut rng = rng(seed);
        let rho: Vec<f64> = (0..mesh.active_count()).map(|_| rng.random_range(0.0..1.0)).collect();
        let factored = sys.assemble(&rho).unwrap().factorize().unwrap();
        let sel = make_selector(&mesh, FaceLabel::Input(rng.random_range(0..6))).unwrap();
        let out = make_selector(&mesh, FaceLabel::Output).unwrap();
        let one = factored.solve_case(&LoadCase::force("a", sel.clone(), 1.0, [1.0, 0.0]), &out).unwrap();
        let many = factored.solve_case(&LoadCase::force("b", sel, alpha, [1.0, 0.0]), &out).unwrap();
        let norm = one.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in one.u.iter().zip(&many.u) {
            prop_assert!((alpha * a - b).abs() <= 1e-10 * alpha * norm);
        }
    }
}
