//! Multi-load-case objective `phi = sum_n (w * L u_n + E_n)` and its adjoint gradient.
//!
//! `L` averages the x-displacement of the output nodes, so `w * L u_n` is the weighted
//! mean output displacement of case `n`; `E_n = u_n^T K u_n` is its strain energy.

use serde::{Deserialize, Serialize};

use crate::domain::NodeSelector;
use crate::error::{Error, Result};
use crate::fem::element::quad_form;
use crate::fem::{FactoredStiffness, FeSystem, LoadCase, LoadKind};

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveParams {
    /// Weight on the output displacement term (N).
    pub weight: f64,
    pub load_cases: Vec<LoadCase>,
    pub output: NodeSelector,
}

impl ObjectiveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::Config(format!("objective weight {} must be non-negative", self.weight)));
        }
        if self.load_cases.is_empty() {
            return Err(Error::Config("objective needs at least one load case".into()));
        }
        self.load_cases.iter().try_for_each(LoadCase::validate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseTerms {
    /// `w * L u_n`
    pub weighted_output: f64,
    /// `L u_n` (mm)
    pub output_disp: f64,
    /// `E_n` (N·mm)
    pub strain_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub per_case: Vec<CaseTerms>,
    pub total_phi: f64,
    /// `(1/n) sum_n L u_n` (mm)
    pub mean_output_disp: f64,
    /// `sum_n E_n` (N·mm)
    pub total_strain_energy: f64,
}

impl ObjectiveBreakdown {
    fn from_terms(per_case: Vec<CaseTerms>) -> Self {
        let n = per_case.len() as f64;
        let total_phi = per_case.iter().map(|c| c.weighted_output + c.strain_energy).sum();
        let mean_output_disp = per_case.iter().map(|c| c.output_disp).sum::<f64>() / n;
        let total_strain_energy = per_case.iter().map(|c| c.strain_energy).sum();
        ObjectiveBreakdown {
            per_case,
            total_phi,
            mean_output_disp,
            total_strain_energy,
        }
    }
}

/// Factorization and per-case displacements kept from an objective evaluation so the
/// gradient can reuse them.
#[derive(Debug, Clone)]
pub struct SolveCache<'a> {
    pub factored: FactoredStiffness<'a>,
    pub displacements: Vec<Vec<f64>>,
}

/// One assembly and factorization, then one solve per load case.
pub fn evaluate_objective<'a>(
    system: &'a FeSystem,
    rho: &[f64],
    params: &ObjectiveParams,
) -> Result<(ObjectiveBreakdown, SolveCache<'a>)> {
    params.validate()?;
    let factored = system.assemble(rho)?.factorize()?;
    let mut terms = Vec::with_capacity(params.load_cases.len());
    let mut displacements = Vec::with_capacity(params.load_cases.len());
    for case in &params.load_cases {
        let forces = system.force_vector(case);
        let prescribed = system.prescribed_values(case)?;
        let u = factored.solve_loads(&forces, &prescribed);
        let output_disp = params.output.apply(&u);
        terms.push(CaseTerms {
            weighted_output: params.weight * output_disp,
            output_disp,
            strain_energy: system.strain_energy(factored.moduli(), &u),
        });
        displacements.push(u);
    }
    let cache = SolveCache {
        factored,
        displacements,
    };
    Ok((ObjectiveBreakdown::from_terms(terms), cache))
}

/// `d phi / d rho` for every active element's physical density.
///
/// Entries where `pinned[k]` is true are reported as zero.
pub fn gradient(
    system: &FeSystem,
    rho: &[f64],
    params: &ObjectiveParams,
    cache: &SolveCache<'_>,
    pinned: &[bool],
) -> Result<Vec<f64>> {
    if let Some(missing) = (cache.displacements.len()..params.load_cases.len()).next() {
        return Err(Error::MissingCache(missing));
    }
    let n_el = system.element_count();
    if rho.len() != n_el || pinned.len() != n_el {
        return Err(Error::InvalidDensity("gradient field length mismatch".into()));
    }
    let material = system.material();
    let ke = system.reference_stiffness();

    // The output functional is the same for every case, so one adjoint solve serves all.
    let mut rhs = vec![0.0; system.dof_count()];
    for (dof, w) in params.output.dof_weights() {
        rhs[dof] += w;
    }
    let lambda = cache.factored.solve_adjoint(&rhs);

    let mut grad = vec![0.0; n_el];
    for (case, u) in params.load_cases.iter().zip(&cache.displacements) {
        // energy term: u^T dK (u - 2 mu), mu = u for force cases, 0 for prescribed ones
        let energy_sign = match case.kind {
            LoadKind::Force => -1.0,
            LoadKind::PrescribedDisplacement => 1.0,
        };
        for k in 0..n_el {
            if pinned[k] {
                continue;
            }
            let dmod = material.modulus_derivative(rho[k].clamp(0.0, 1.0));
            let ue = system.gather(k, u);
            let le = system.gather(k, &lambda);
            let energy = quad_form(ke, &ue, &ue);
            let output = quad_form(ke, &le, &ue);
            grad[k] += dmod * (energy_sign * energy - params.weight * output);
        }
    }
    Ok(grad)
}
