//! Boundary conditions, load cases and design-variable bookkeeping for one formulation.

use super::{Formulation, ObjectiveSettings, RunConfig};
use crate::domain::{build_domain, make_selector, FaceLabel, Mesh, NodeSelector, INPUT_FACE_COUNT};
use crate::error::{Error, Result};
use crate::fem::{DofConstraints, FeSystem, LoadCase, MaterialParams};
use crate::filter::FilterKernel;
use crate::sensitivity::ObjectiveParams;

/// Contact forces push on the grasping edge from the object side.
pub const CONTACT_DIRECTION: [f64; 2] = [1.0, 0.0];
/// The mounting pin is driven downwards.
pub const ACTUATION_DIRECTION: [f64; 2] = [0.0, -1.0];
/// Number of contact load cases in the active formulation.
pub const ACTIVE_FORCE_CASES: usize = 3;

/// Supports and prescribed dofs: the passive finger is clamped at both slots; the
/// active finger is clamped at slot 0 and driven on the actuation face.
pub fn constraints(mesh: &Mesh, formulation: Formulation) -> Result<DofConstraints> {
    let mut c = DofConstraints::default();
    match formulation {
        Formulation::Passive => {
            c.clamp_nodes(&mesh.slot_nodes(0)?);
            c.clamp_nodes(&mesh.slot_nodes(1)?);
        }
        Formulation::Active => {
            c.clamp_nodes(&mesh.slot_nodes(0)?);
            let act = actuation_case(mesh, 0.0)?;
            c.prescribed = act.prescribed_dofs();
        }
    }
    Ok(c)
}

pub fn actuation_case(mesh: &Mesh, input_displacement: f64) -> Result<LoadCase> {
    let sel = make_selector(mesh, FaceLabel::Actuation)?;
    Ok(LoadCase::prescribed("X_in", sel, input_displacement, ACTUATION_DIRECTION))
}

pub fn contact_case(mesh: &Mesh, face: usize, magnitude: f64) -> Result<LoadCase> {
    let label = FaceLabel::Input(face);
    let sel = make_selector(mesh, label)?;
    Ok(LoadCase::force(label.to_string(), sel, magnitude, CONTACT_DIRECTION))
}

/// Load cases in objective order: `F_in1..F_in6` (passive) or `F_in1..F_in3, X_in` (active).
pub fn load_cases(
    mesh: &Mesh,
    formulation: Formulation,
    settings: &ObjectiveSettings,
    input_displacement: Option<f64>,
) -> Result<Vec<LoadCase>> {
    match formulation {
        Formulation::Passive => (0..INPUT_FACE_COUNT)
            .map(|k| contact_case(mesh, k, settings.force_magnitude))
            .collect(),
        Formulation::Active => {
            let x_in = input_displacement
                .ok_or_else(|| Error::Config("active formulation requires input_displacement".into()))?;
            let mut cases: Vec<LoadCase> = (0..ACTIVE_FORCE_CASES)
                .map(|k| contact_case(mesh, k, settings.force_magnitude))
                .collect::<Result<_>>()?;
            cases.push(actuation_case(mesh, x_in)?);
            Ok(cases)
        }
    }
}

/// Everything a run needs that depends only on its configuration.
#[derive(Debug, Clone)]
pub struct Problem {
    pub formulation: Formulation,
    pub mesh: Mesh,
    pub system: FeSystem,
    pub objective: ObjectiveParams,
    /// Active-element index of each design variable.
    pub design_vars: Vec<usize>,
    /// Per active element: true for non-design (always solid) elements.
    pub pinned: Vec<bool>,
    pub filter: FilterKernel,
    volume_coefficients: Vec<f64>,
}

impl Problem {
    pub fn new(config: &RunConfig) -> Result<Problem> {
        config.validate()?;
        let mesh = build_domain(&config.domain)?;
        Problem::with_mesh(
            mesh,
            config.material,
            config.formulation,
            &config.objective,
            config.input_displacement,
            config.filter_radius,
        )
    }

    pub fn with_mesh(
        mesh: Mesh,
        material: MaterialParams,
        formulation: Formulation,
        settings: &ObjectiveSettings,
        input_displacement: Option<f64>,
        filter_radius: f64,
    ) -> Result<Problem> {
        let c = constraints(&mesh, formulation)?;
        let system = FeSystem::new(&mesh, material, &c)?;
        let objective = ObjectiveParams {
            weight: settings.weight,
            load_cases: load_cases(&mesh, formulation, settings, input_displacement)?,
            output: make_selector(&mesh, FaceLabel::Output)?,
        };
        objective.validate()?;
        let pinned: Vec<bool> = mesh.design_flags().into_iter().map(|d| !d).collect();
        let design_vars: Vec<usize> = (0..pinned.len()).filter(|&k| !pinned[k]).collect();
        if design_vars.is_empty() {
            return Err(Error::InvalidDomain("no design elements".into()));
        }
        let design_elements: Vec<usize> = design_vars
            .iter()
            .map(|&k| mesh.active_elements()[k])
            .collect();
        let filter = FilterKernel::new(&mesh, &design_elements, filter_radius);
        let n = design_vars.len() as f64;
        let volume_coefficients = filter.column_sums().into_iter().map(|c| c / n).collect();
        Ok(Problem {
            formulation,
            mesh,
            system,
            objective,
            design_vars,
            pinned,
            filter,
            volume_coefficients,
        })
    }

    pub fn design_count(&self) -> usize {
        self.design_vars.len()
    }

    pub fn output(&self) -> &NodeSelector {
        &self.objective.output
    }

    /// Physical density per active element: filtered design variables, 1 where pinned.
    /// Filter rows are convex weights; the clamp only removes rounding past [0, 1].
    pub fn physical(&self, x: &[f64]) -> Vec<f64> {
        let filtered = self.filter.apply(x);
        let mut phys = vec![1.0; self.pinned.len()];
        for (&k, v) in self.design_vars.iter().zip(filtered) {
            phys[k] = v.clamp(0.0, 1.0);
        }
        phys
    }

    /// Expand design variables to a per-active-element field without filtering.
    pub fn scatter(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![1.0; self.pinned.len()];
        for (&k, &v) in self.design_vars.iter().zip(x) {
            full[k] = v;
        }
        full
    }

    /// Chain a physical-density gradient back to the design variables.
    pub fn design_gradient(&self, grad_phys: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = self.design_vars.iter().map(|&k| grad_phys[k]).collect();
        self.filter.chain_rule(&g)
    }

    /// Mean physical density over design elements.
    pub fn volume_fraction(&self, phys: &[f64]) -> f64 {
        self.design_vars.iter().map(|&k| phys[k]).sum::<f64>() / self.design_vars.len() as f64
    }

    /// Coefficients `v` with `volume_fraction(physical(x)) = v . x`.
    pub fn volume_coefficients(&self) -> &[f64] {
        &self.volume_coefficients
    }
}
