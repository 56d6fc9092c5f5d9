use serde::{Deserialize, Serialize};

use super::element::{quad_form, square_element_stiffness, Matrix8};
use super::skyline::Skyline;
use crate::domain::{Axis, Mesh, NodeSelector};
use crate::error::{Error, Result};

/// Linear isotropic material with SIMP interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Solid Young's modulus (MPa).
    pub youngs_modulus: f64,
    /// Void stiffness floor (MPa).
    pub min_modulus: f64,
    pub poisson_ratio: f64,
    /// SIMP penalty exponent.
    pub penalty: f64,
    /// Out-of-plane thickness (mm).
    pub thickness: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            youngs_modulus: 23.0,
            min_modulus: 23.0e-6,
            poisson_ratio: 0.3,
            penalty: 3.0,
            thickness: 5.0,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let e0 = self.youngs_modulus;
        let ok = e0.is_finite()
            && e0 > 0.0
            && self.min_modulus > 0.0
            && self.min_modulus < 1e-2 * e0
            && self.poisson_ratio >= 0.0
            && self.poisson_ratio < 0.5
            && self.penalty >= 1.0
            && self.thickness > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidMaterial(format!("{self:?}")))
        }
    }

    /// Interpolated modulus `E_min + rho^p (E0 - E_min)`.
    #[inline]
    pub fn modulus(&self, rho: f64) -> f64 {
        self.min_modulus + rho.powf(self.penalty) * (self.youngs_modulus - self.min_modulus)
    }

    /// Derivative of [`MaterialParams::modulus`] with respect to density.
    #[inline]
    pub fn modulus_derivative(&self, rho: f64) -> f64 {
        self.penalty * rho.powf(self.penalty - 1.0) * (self.youngs_modulus - self.min_modulus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    Force,
    PrescribedDisplacement,
}

/// One independent loading condition.
///
/// A force case distributes `magnitude * direction` over the selector nodes by weight.
/// A prescribed case sets each selected node's displacement to `magnitude * direction`
/// on the axes where `direction` is non-zero; those degrees of freedom must be
/// prescribed in the [`FeSystem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadCase {
    pub label: String,
    pub kind: LoadKind,
    pub selector: NodeSelector,
    pub magnitude: f64,
    pub direction: [f64; 2],
}

impl LoadCase {
    pub fn force(label: impl Into<String>, selector: NodeSelector, magnitude: f64, direction: [f64; 2]) -> Self {
        LoadCase {
            label: label.into(),
            kind: LoadKind::Force,
            selector,
            magnitude,
            direction,
        }
    }

    pub fn prescribed(
        label: impl Into<String>,
        selector: NodeSelector,
        magnitude: f64,
        direction: [f64; 2],
    ) -> Self {
        LoadCase {
            label: label.into(),
            kind: LoadKind::PrescribedDisplacement,
            selector,
            magnitude,
            direction,
        }
    }

    /// `magnitude >= 0` (zero allowed for homogeneous checks) and unit direction.
    pub fn validate(&self) -> Result<()> {
        let norm = self.direction[0].hypot(self.direction[1]);
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(Error::InvalidLoadCase(format!(
                "{}: magnitude {} must be non-negative",
                self.label, self.magnitude
            )));
        }
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidLoadCase(format!(
                "{}: direction {:?} is not a unit vector",
                self.label, self.direction
            )));
        }
        if self.selector.is_empty() {
            return Err(Error::InvalidLoadCase(format!("{}: empty selector", self.label)));
        }
        Ok(())
    }

    /// Global dofs this case prescribes (prescribed kind) along the non-zero direction axes.
    pub fn prescribed_dofs(&self) -> Vec<usize> {
        let mut dofs = Vec::new();
        for &n in &self.selector.nodes {
            for axis in 0..2 {
                if self.direction[axis] != 0.0 {
                    dofs.push(2 * n + axis);
                }
            }
        }
        dofs
    }
}

/// Supports (held at zero in every case) and prescribed dofs (set per load case).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DofConstraints {
    pub fixed: Vec<usize>,
    pub prescribed: Vec<usize>,
}

impl DofConstraints {
    /// Clamp both displacement components of `nodes`.
    pub fn clamp_nodes(&mut self, nodes: &[usize]) {
        for &n in nodes {
            self.fixed.extend([2 * n, 2 * n + 1]);
        }
    }

    pub fn fix_axis(&mut self, nodes: &[usize], axis: Axis) {
        self.fixed.extend(nodes.iter().map(|n| 2 * n + axis.offset()));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DofRole {
    Free(usize),
    Fixed,
    Prescribed(usize),
    /// Node not attached to any active element.
    Unused,
}

/// Finite element model of the active region of a mesh with its boundary conditions.
///
/// Equations are numbered in global dof order with constrained dofs removed, which
/// keeps the row-major grid numbering banded.
#[derive(Debug, Clone)]
pub struct FeSystem {
    material: MaterialParams,
    dof_count: usize,
    element_dofs: Vec<[usize; 8]>,
    roles: Vec<DofRole>,
    free_dofs: Vec<usize>,
    prescribed: Vec<usize>,
    ke: Matrix8,
    first_col: Vec<usize>,
    element_size: f64,
}

impl FeSystem {
    pub fn new(mesh: &Mesh, material: MaterialParams, constraints: &DofConstraints) -> Result<FeSystem> {
        material.validate()?;
        let element_dofs: Vec<[usize; 8]> = mesh
            .active_elements()
            .iter()
            .map(|&e| {
                let n = mesh.elements[e];
                std::array::from_fn(|k| 2 * n[k / 2] + k % 2)
            })
            .collect();

        let mut roles = vec![DofRole::Unused; mesh.dof_count];
        for dofs in &element_dofs {
            for &d in dofs {
                roles[d] = DofRole::Free(0);
            }
        }
        for &d in &constraints.fixed {
            if roles.get(d).is_none_or(|r| *r == DofRole::Unused) {
                return Err(Error::InvalidLoadCase(format!("support dof {d} is not in the model")));
            }
            roles[d] = DofRole::Fixed;
        }
        let mut prescribed = constraints.prescribed.clone();
        prescribed.sort_unstable();
        prescribed.dedup();
        for (k, &d) in prescribed.iter().enumerate() {
            match roles.get(d) {
                Some(DofRole::Free(_)) => roles[d] = DofRole::Prescribed(k),
                Some(DofRole::Fixed) => {
                    return Err(Error::InvalidLoadCase(format!("dof {d} is both fixed and prescribed")))
                }
                _ => return Err(Error::InvalidLoadCase(format!("prescribed dof {d} is not in the model"))),
            }
        }
        let mut free_dofs = Vec::new();
        for (d, role) in roles.iter_mut().enumerate() {
            if let DofRole::Free(eq) = role {
                *eq = free_dofs.len();
                free_dofs.push(d);
            }
        }

        let mut first_col: Vec<usize> = (0..free_dofs.len()).collect();
        for dofs in &element_dofs {
            let eqs: Vec<usize> = dofs
                .iter()
                .filter_map(|&d| match roles[d] {
                    DofRole::Free(eq) => Some(eq),
                    _ => None,
                })
                .collect();
            if let Some(&lo) = eqs.iter().min() {
                for &eq in &eqs {
                    first_col[eq] = first_col[eq].min(lo);
                }
            }
        }

        let ke = square_element_stiffness(mesh.element_size, material.poisson_ratio, material.thickness);
        Ok(FeSystem {
            material,
            dof_count: mesh.dof_count,
            element_dofs,
            roles,
            free_dofs,
            prescribed,
            ke,
            first_col,
            element_size: mesh.element_size,
        })
    }

    pub fn material(&self) -> &MaterialParams {
        &self.material
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    pub fn free_count(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn element_count(&self) -> usize {
        self.element_dofs.len()
    }

    pub fn element_size(&self) -> f64 {
        self.element_size
    }

    /// Reference element stiffness at unit modulus (thickness included).
    pub fn reference_stiffness(&self) -> &Matrix8 {
        &self.ke
    }

    pub fn element_dofs(&self) -> &[[usize; 8]] {
        &self.element_dofs
    }

    pub fn prescribed_dofs(&self) -> &[usize] {
        &self.prescribed
    }

    /// Equation index of a global dof if it is free.
    pub fn equation(&self, dof: usize) -> Option<usize> {
        match self.roles.get(dof) {
            Some(DofRole::Free(eq)) => Some(*eq),
            _ => None,
        }
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        matches!(self.roles.get(dof), Some(DofRole::Fixed | DofRole::Prescribed(_)))
    }

    /// Gather the displacements of active element `k`.
    #[inline]
    pub fn gather(&self, k: usize, u: &[f64]) -> [f64; 8] {
        let dofs = &self.element_dofs[k];
        std::array::from_fn(|a| u[dofs[a]])
    }

    fn check_density(&self, rho: &[f64]) -> Result<()> {
        if rho.len() != self.element_dofs.len() {
            return Err(Error::InvalidDensity(format!(
                "expected {} entries, got {}",
                self.element_dofs.len(),
                rho.len()
            )));
        }
        if let Some((k, v)) = rho
            .iter()
            .enumerate()
            .find(|(_, &v)| !(-1e-12..=1.0 + 1e-12).contains(&v))
        {
            return Err(Error::InvalidDensity(format!("entry {k} = {v} outside [0, 1]")));
        }
        Ok(())
    }

    /// Per-element interpolated moduli for a physical density field.
    pub fn moduli(&self, rho: &[f64]) -> Result<Vec<f64>> {
        self.check_density(rho)?;
        Ok(rho.iter().map(|&r| self.material.modulus(r.clamp(0.0, 1.0))).collect())
    }

    /// Assemble the reduced stiffness `K_ff(rho)` over free dofs.
    pub fn assemble(&self, rho: &[f64]) -> Result<StiffnessMatrix<'_>> {
        let moduli = self.moduli(rho)?;
        self.assemble_moduli(moduli)
    }

    /// Assemble from explicit per-element moduli.
    pub fn assemble_moduli(&self, moduli: Vec<f64>) -> Result<StiffnessMatrix<'_>> {
        if moduli.len() != self.element_dofs.len() {
            return Err(Error::InvalidDensity("moduli length mismatch".into()));
        }
        let mut matrix = Skyline::new(self.first_col.clone());
        for (dofs, &scale) in self.element_dofs.iter().zip(&moduli) {
            let eqs: [Option<usize>; 8] = std::array::from_fn(|a| self.equation(dofs[a]));
            for a in 0..8 {
                let Some(ea) = eqs[a] else { continue };
                for b in 0..8 {
                    let Some(eb) = eqs[b] else { continue };
                    if eb <= ea {
                        matrix.add(ea, eb, scale * self.ke[a][b]);
                    }
                }
            }
        }
        Ok(StiffnessMatrix {
            system: self,
            moduli,
            matrix,
        })
    }

    /// Full-system product `K u` over all dofs (constrained ones included).
    pub fn apply_full(&self, moduli: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dof_count];
        for (k, dofs) in self.element_dofs.iter().enumerate() {
            let ue = self.gather(k, u);
            let s = moduli[k];
            for a in 0..8 {
                let mut acc = 0.0;
                for b in 0..8 {
                    acc += self.ke[a][b] * ue[b];
                }
                out[dofs[a]] += s * acc;
            }
        }
        out
    }

    /// Strain energy `u^T K u` summed element by element.
    pub fn strain_energy(&self, moduli: &[f64], u: &[f64]) -> f64 {
        (0..self.element_dofs.len())
            .map(|k| {
                let ue = self.gather(k, u);
                moduli[k] * quad_form(&self.ke, &ue, &ue)
            })
            .sum()
    }

    fn node_axis(&self, dof: usize) -> (usize, char) {
        (dof / 2, if dof % 2 == 0 { 'x' } else { 'y' })
    }

    /// Global nodal force vector for a force case.
    pub fn force_vector(&self, case: &LoadCase) -> Vec<f64> {
        let mut f = vec![0.0; self.dof_count];
        if case.kind == LoadKind::Force {
            for (&n, &w) in case.selector.nodes.iter().zip(&case.selector.weights) {
                f[2 * n] += w * case.magnitude * case.direction[0];
                f[2 * n + 1] += w * case.magnitude * case.direction[1];
            }
        }
        f
    }

    /// Values of all prescribed dofs for a case (zero for force cases).
    pub fn prescribed_values(&self, case: &LoadCase) -> Result<Vec<f64>> {
        let mut values = vec![0.0; self.prescribed.len()];
        if case.kind == LoadKind::PrescribedDisplacement {
            for dof in case.prescribed_dofs() {
                let Some(DofRole::Prescribed(k)) = self.roles.get(dof) else {
                    return Err(Error::InvalidLoadCase(format!(
                        "{}: dof {dof} is not prescribed in this model",
                        case.label
                    )));
                };
                values[*k] = case.magnitude * case.direction[dof % 2];
            }
        }
        Ok(values)
    }
}

/// Assembled (not yet factorized) reduced stiffness matrix.
#[derive(Debug, Clone)]
pub struct StiffnessMatrix<'a> {
    system: &'a FeSystem,
    moduli: Vec<f64>,
    matrix: Skyline,
}

impl<'a> StiffnessMatrix<'a> {
    pub fn system(&self) -> &'a FeSystem {
        self.system
    }

    pub fn moduli(&self) -> &[f64] {
        &self.moduli
    }

    /// Entry `(i, j)` of `K_ff` by equation index.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    pub fn factorize(&self) -> Result<FactoredStiffness<'a>> {
        let mut factor = self.matrix.clone();
        factor.factorize().map_err(|e| {
            let (node, axis) = self.system.node_axis(self.system.free_dofs[e.row]);
            Error::Singular {
                equation: e.row,
                node,
                axis,
                pivot: e.pivot,
                max_diagonal: e.max_diagonal,
            }
        })?;
        Ok(FactoredStiffness {
            system: self.system,
            moduli: self.moduli.clone(),
            factor,
        })
    }
}

/// Outcome of one load-case solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Global displacement vector (mm); unused dofs are zero.
    pub u: Vec<f64>,
    /// `u^T K u` over the full system (N·mm).
    pub strain_energy: f64,
    /// Output selector applied to `u` (mm).
    pub output_disp: f64,
    /// `(dof, K u - f)` at every fixed and prescribed dof (N).
    pub reactions: Vec<(usize, f64)>,
    /// `||K_ff u_f - f_eq|| / ||f_eq||` (zero for a homogeneous system).
    pub relative_residual: f64,
}

/// Cholesky-factorized stiffness, reusable across load cases.
#[derive(Debug, Clone)]
pub struct FactoredStiffness<'a> {
    system: &'a FeSystem,
    moduli: Vec<f64>,
    factor: Skyline,
}

impl<'a> FactoredStiffness<'a> {
    pub fn system(&self) -> &'a FeSystem {
        self.system
    }

    pub fn moduli(&self) -> &[f64] {
        &self.moduli
    }

    /// Solve with explicit global forces and prescribed values; returns the full `u`.
    pub fn solve_loads(&self, forces: &[f64], prescribed_values: &[f64]) -> Vec<f64> {
        let sys = self.system;
        let mut u = vec![0.0; sys.dof_count];
        for (&d, &v) in sys.prescribed.iter().zip(prescribed_values) {
            u[d] = v;
        }
        // K_fp u_p via the element loop over the prescribed part only
        let coupling = if prescribed_values.iter().any(|&v| v != 0.0) {
            Some(sys.apply_full(&self.moduli, &u))
        } else {
            None
        };
        let mut rhs: Vec<f64> = sys
            .free_dofs
            .iter()
            .map(|&d| forces[d] - coupling.as_ref().map_or(0.0, |c| c[d]))
            .collect();
        self.factor.solve_in_place(&mut rhs);
        for (&d, &v) in sys.free_dofs.iter().zip(&rhs) {
            u[d] = v;
        }
        u
    }

    /// Solve `K_ff x = rhs` for a right-hand side given on global dofs; constrained
    /// entries of `rhs` are ignored and the returned vector is zero there.
    pub fn solve_adjoint(&self, rhs: &[f64]) -> Vec<f64> {
        let sys = self.system;
        let mut r: Vec<f64> = sys.free_dofs.iter().map(|&d| rhs[d]).collect();
        self.factor.solve_in_place(&mut r);
        let mut out = vec![0.0; sys.dof_count];
        for (&d, &v) in sys.free_dofs.iter().zip(&r) {
            out[d] = v;
        }
        out
    }

    pub fn solve_case(&self, case: &LoadCase, output: &NodeSelector) -> Result<SolveResult> {
        case.validate()?;
        let sys = self.system;
        let forces = sys.force_vector(case);
        let prescribed = sys.prescribed_values(case)?;
        let u = self.solve_loads(&forces, &prescribed);
        Ok(self.summarize(u, &forces, &prescribed, output))
    }

    fn summarize(&self, u: Vec<f64>, forces: &[f64], prescribed: &[f64], output: &NodeSelector) -> SolveResult {
        let sys = self.system;
        let ku = sys.apply_full(&self.moduli, &u);
        let reactions = (0..sys.dof_count)
            .filter(|&d| sys.is_constrained(d))
            .map(|d| (d, ku[d] - forces[d]))
            .collect();

        let mut rhs_norm2 = 0.0;
        let mut res_norm2 = 0.0;
        let coupling = if prescribed.iter().any(|&v| v != 0.0) {
            let mut up = vec![0.0; sys.dof_count];
            for (&d, &v) in sys.prescribed.iter().zip(prescribed) {
                up[d] = v;
            }
            Some(sys.apply_full(&self.moduli, &up))
        } else {
            None
        };
        for &d in &sys.free_dofs {
            let feq = forces[d] - coupling.as_ref().map_or(0.0, |c| c[d]);
            rhs_norm2 += feq * feq;
            res_norm2 += (ku[d] - forces[d]).powi(2);
        }
        let relative_residual = if rhs_norm2 > 0.0 {
            (res_norm2 / rhs_norm2).sqrt()
        } else {
            res_norm2.sqrt()
        };
        SolveResult {
            strain_energy: sys.strain_energy(&self.moduli, &u),
            output_disp: output.apply(&u),
            reactions,
            relative_residual,
            u,
        }
    }
}
