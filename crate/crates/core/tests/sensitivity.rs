mod common;

use common::*;
use finger_topo::domain::build_domain;
use finger_topo::fem::MaterialParams;
use finger_topo::filter::FilterKernel;
use finger_topo::optimizer::{constraints, Formulation};
use finger_topo::sensitivity::{evaluate_objective, gradient, ObjectiveParams};
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::Rng;

#[test]
fn passive_gradient_matches_central_differences() {
    let err = finite_difference_error(Formulation::Passive, 11);
    assert!(err < 1e-3, "worst relative error {err:e}");
}

#[test]
fn active_gradient_matches_central_differences() {
    let err = finite_difference_error(Formulation::Active, 12);
    assert!(err < 1e-3, "worst relative error {err:e}");
}

#[test]
fn gradient_agrees_with_differences_over_many_designs() {
    for seed in 0..20 {
        for formulation in [Formulation::Passive, Formulation::Active] {
            let r = finite_difference_report(formulation, 1000 + seed, 1e-4);
            assert!(r.scaled <= 1.0, "{formulation} seed {seed}: scaled error {:.3}", r.scaled);
        }
    }
}

#[test]
fn pinned_elements_have_zero_gradient() {
    let p = problem(Formulation::Active);
    let rho = vec![0.5; p.pinned.len()]
        .into_iter()
        .zip(&p.pinned)
        .map(|(r, &pin)| if pin { 1.0 } else { r })
        .collect::<Vec<_>>();
    let (_, cache) = evaluate_objective(&p.system, &rho, &p.objective).unwrap();
    let g = gradient(&p.system, &rho, &p.objective, &cache, &p.pinned).unwrap();
    assert!(p.pinned.iter().any(|&x| x));
    for (k, &pin) in p.pinned.iter().enumerate() {
        if pin {
            assert_eq!(g[k], 0.0);
        }
    }
}

#[test]
fn objective_matches_dense_pipeline() {
    let p = problem(Formulation::Passive);
    let rho: Vec<f64> = p.pinned.iter().map(|&pin| if pin { 1.0 } else { 0.35 }).collect();
    let (b, _) = evaluate_objective(&p.system, &rho, &p.objective).unwrap();

    let mat = MaterialParams::default();
    let k = dense_stiffness(&p.mesh, &rho, &mat);
    let c = constraints(&p.mesh, Formulation::Passive).unwrap();
    let mut expected = 0.0;
    for case in &p.objective.load_cases {
        let u = dense_solve(&k, &c, case);
        let energy = u.dot(&(&k * &u));
        expected += p.objective.weight * select(&p.objective.output, &u) + energy;
    }
    let rel = (b.total_phi - expected).abs() / expected.abs();
    assert!(rel < 1e-9, "relative difference {rel:e}");
}

#[test]
fn active_objective_matches_dense_pipeline() {
    let p = problem(Formulation::Active);
    let mut rng = rng(5);
    let rho = random_field(&mut rng, &p.pinned, 0.2, 1.0);
    let (b, _) = evaluate_objective(&p.system, &rho, &p.objective).unwrap();
    let k = dense_stiffness(&p.mesh, &rho, &MaterialParams::default());
    let c = constraints(&p.mesh, Formulation::Active).unwrap();
    for (case, terms) in p.objective.load_cases.iter().zip(&b.per_case) {
        let u = dense_solve(&k, &c, case);
        let energy = u.dot(&(&k * &u));
        let disp = select(&p.objective.output, &u);
        assert!((terms.strain_energy - energy).abs() < 1e-9 * energy, "{}", case.label);
        assert!((terms.output_disp - disp).abs() < 1e-9 * disp.abs().max(1e-12), "{}", case.label);
    }
}

#[test]
fn gradient_is_additive_over_cases() {
    let p = problem(Formulation::Active);
    let mut rng = rng(21);
    let rho = random_field(&mut rng, &p.pinned, 0.05, 1.0);
    let (_, cache) = evaluate_objective(&p.system, &rho, &p.objective).unwrap();
    let total = gradient(&p.system, &rho, &p.objective, &cache, &p.pinned).unwrap();
    let mut sum = vec![0.0; total.len()];
    for case in &p.objective.load_cases {
        let single = ObjectiveParams {
            weight: p.objective.weight,
            load_cases: vec![case.clone()],
            output: p.objective.output.clone(),
        };
        let (_, c) = evaluate_objective(&p.system, &rho, &single).unwrap();
        for (s, g) in sum.iter_mut().zip(gradient(&p.system, &rho, &single, &c, &p.pinned).unwrap()) {
            *s += g;
        }
    }
    let scale = total.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    for (a, b) in total.iter().zip(&sum) {
        assert!((a - b).abs() <= 1e-10 * scale);
    }
}

#[test]
fn compliance_only_gradient_is_non_positive() {
    let mut p = problem(Formulation::Passive);
    p.objective.weight = 0.0;
    let mut rng = rng(3);
    let rho = random_field(&mut rng, &p.pinned, 0.01, 1.0);
    let (_, cache) = evaluate_objective(&p.system, &rho, &p.objective).unwrap();
    let g = gradient(&p.system, &rho, &p.objective, &cache, &p.pinned).unwrap();
    assert!(g.iter().all(|&v| v <= 0.0));
}

#[test]
fn filtered_design_gradient_matches_finite_differences() {
    let p = problem(Formulation::Passive);
    let mut rng = rng(8);
    let x: Vec<f64> = (0..p.design_count()).map(|_| rng.random_range(0.1..0.9)).collect();
    let f = |x: &[f64]| phi(&p, &p.physical(x));
    let phys = p.physical(&x);
    let (_, cache) = evaluate_objective(&p.system, &phys, &p.objective).unwrap();
    let g = p.design_gradient(&gradient(&p.system, &phys, &p.objective, &cache, &p.pinned).unwrap());
    for j in sample(&mut rng, p.design_count(), 10) {
        let mut up = x.clone();
        let mut down = x.clone();
        up[j] += 1e-6;
        down[j] -= 1e-6;
        let fd = (f(&up) - f(&down)) / 2e-6;
        assert!((fd - g[j]).abs() < 1e-3 * g[j].abs(), "var {j}: {fd} vs {}", g[j]);
    }
}

#[test]
fn filter_mean_drift_is_small_on_the_taper() {
    let p = problem(Formulation::Passive);
    let mut rng = rng(4);
    let x: Vec<f64> = (0..p.design_count()).map(|_| rng.random::<f64>()).collect();
    let y = p.filter.apply(&x);
    let (mx, my) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    assert!((mx - my).abs() / mx < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn filter_transpose_identity(seed in any::<u64>(), radius in 1.0f64..4.0) {
        let mesh = build_domain(&desk_spec()).unwrap();
        let elements = mesh.active_elements().to_vec();
        let kernel = FilterKernel::new(&mesh, &elements, radius);
        let mut rng = rng(seed);
        let x: Vec<f64> = (0..elements.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..elements.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs: f64 = kernel.apply(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(kernel.chain_rule(&y)).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }
}
