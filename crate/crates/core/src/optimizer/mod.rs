//! One optimization run: density initialization, the filtered SIMP loop and its history.

mod mma;
mod problem;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use mma::{Mma, MmaSettings, StepOutcome};
pub use problem::{
    actuation_case, constraints, contact_case, load_cases, Problem, ACTIVE_FORCE_CASES, ACTUATION_DIRECTION,
    CONTACT_DIRECTION,
};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::fem::MaterialParams;
use crate::filter::FilterKernel;
use crate::sensitivity::{evaluate_objective, gradient};

/// Smallest density produced by noise initialization.
pub const INIT_FLOOR: f64 = 0.01;
/// Smoothing radius (elements) for noise initialization.
pub const NOISE_RADIUS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Passive,
    Active,
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Formulation::Passive => "passive",
            Formulation::Active => "active",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStyle {
    Uniform,
    SmoothedNoise,
}

/// Objective weighting and contact load magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveSettings {
    /// Weight on the mean output displacement term (N).
    pub weight: f64,
    /// Magnitude of each contact load case (N).
    pub force_magnitude: f64,
}

impl Default for ObjectiveSettings {
    fn default() -> Self {
        ObjectiveSettings {
            weight: 1e5,
            force_magnitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub formulation: Formulation,
    pub volume_fraction: f64,
    /// Prescribed actuation displacement (mm); active formulation only.
    pub input_displacement: Option<f64>,
    pub seed: u64,
    pub init_style: InitStyle,
    pub max_iters: usize,
    pub move_limit: f64,
    pub convergence_tol: f64,
    /// Density filter radius in element sizes.
    pub filter_radius: f64,
    pub mma: MmaSettings,
    pub domain: DomainSpec,
    pub material: MaterialParams,
    pub objective: ObjectiveSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            formulation: Formulation::Passive,
            volume_fraction: 0.35,
            input_displacement: None,
            seed: 0,
            init_style: InitStyle::SmoothedNoise,
            max_iters: 300,
            move_limit: 0.2,
            convergence_tol: 0.01,
            filter_radius: 2.0,
            mma: MmaSettings::default(),
            domain: DomainSpec::default(),
            material: MaterialParams::default(),
            objective: ObjectiveSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.05..=1.0).contains(&self.volume_fraction) {
            return bad(format!("volume_fraction {} outside [0.05, 1]", self.volume_fraction));
        }
        match (self.formulation, self.input_displacement) {
            (Formulation::Active, None) => return bad("active formulation requires input_displacement".into()),
            (Formulation::Passive, Some(_)) => {
                return bad("passive formulation does not take input_displacement".into())
            }
            (_, Some(x)) if !(x.is_finite() && x >= 0.0) => {
                return bad(format!("input_displacement {x} must be non-negative"))
            }
            _ => {}
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return bad(format!("move_limit {} outside (0, 1]", self.move_limit));
        }
        if !(self.convergence_tol > 0.0) {
            return bad(format!("convergence_tol {} must be positive", self.convergence_tol));
        }
        if !(self.filter_radius >= 0.0 && self.filter_radius.is_finite()) {
            return bad(format!("filter_radius {} must be non-negative", self.filter_radius));
        }
        let o = &self.objective;
        if !(o.weight >= 0.0 && o.weight.is_finite()) {
            return bad(format!("objective weight {} must be non-negative", o.weight));
        }
        if !(o.force_magnitude >= 0.0 && o.force_magnitude.is_finite()) {
            return bad(format!("force_magnitude {} must be non-negative", o.force_magnitude));
        }
        self.mma.validate()?;
        self.material.validate()
    }
}

/// One row of the iteration history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub phi: f64,
    /// Mean over load cases of the output displacement (mm).
    pub mean_output_disp: f64,
    /// Sum over load cases of the strain energy (N·mm).
    pub strain_energy: f64,
    /// Mean physical density over design elements.
    pub volume_fraction: f64,
    /// Largest design-variable change of the step that produced this iterate (0 for the start).
    pub max_density_change: f64,
}

/// Physical densities per active element; non-design elements are exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DensityField(pub Vec<f64>);

impl DensityField {
    pub fn validate(&self, pinned: &[bool]) -> Result<()> {
        if self.0.len() != pinned.len() {
            return Err(Error::InvalidDensity(format!(
                "field has {} entries, mesh has {} active elements",
                self.0.len(),
                pinned.len()
            )));
        }
        for (k, (&r, &p)) in self.0.iter().zip(pinned).enumerate() {
            if !(0.0..=1.0).contains(&r) || (p && r != 1.0) {
                return Err(Error::InvalidDensity(format!("entry {k} = {r} (pinned: {p})")));
            }
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub history: Vec<HistoryRow>,
    pub final_rho: DensityField,
    pub converged: bool,
    /// Elapsed time (s); kept out of persisted data files.
    #[serde(skip)]
    pub wall_time: f64,
}

impl RunResult {
    pub fn last(&self) -> &HistoryRow {
        self.history.last().expect("history always holds the initial row")
    }

    /// Pareto coordinates `(mean_output_disp, strain_energy)` of the final iterate.
    pub fn coordinates(&self) -> (f64, f64) {
        let r = self.last();
        (r.mean_output_disp, r.strain_energy)
    }
}

/// Starting design variables (one per design element).
pub fn init_density(config: &RunConfig, problem: &Problem) -> Vec<f64> {
    let n = problem.design_count();
    let vf = config.volume_fraction;
    match config.init_style {
        InitStyle::Uniform => vec![vf; n],
        InitStyle::SmoothedNoise => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let noise: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let elements: Vec<usize> = problem
                .design_vars
                .iter()
                .map(|&k| problem.mesh.active_elements()[k])
                .collect();
            let smooth = FilterKernel::new(&problem.mesh, &elements, NOISE_RADIUS).apply(&noise);
            let mean = smooth.iter().sum::<f64>() / n as f64;
            let spread = smooth.iter().map(|s| (s - mean).abs()).fold(0.0, f64::max);
            let room = (vf - INIT_FLOOR).min(1.0 - vf).max(0.0);
            let scale = if spread > 0.0 { room / spread } else { 0.0 };
            let x: Vec<f64> = smooth.iter().map(|s| vf + scale * (s - mean)).collect();
            shift_to_mean(&x, vf, INIT_FLOOR, 1.0)
        }
    }
}

/// `clamp(x + s, lo, hi)` with `s` chosen by bisection so the plain mean equals `target`.
fn shift_to_mean(x: &[f64], target: f64, lo: f64, hi: f64) -> Vec<f64> {
    let weights = vec![1.0 / x.len() as f64; x.len()];
    shift_to_budget(x, &weights, target, lo, hi)
}

/// `clamp(x + s, lo, hi)` with `s` chosen by bisection so that `v . x` hits `target`.
fn shift_to_budget(x: &[f64], v: &[f64], target: f64, lo: f64, hi: f64) -> Vec<f64> {
    let shifted = |s: f64| -> Vec<f64> { x.iter().map(|&xi| (xi + s).clamp(lo, hi)).collect() };
    let value = |y: &[f64]| -> f64 { y.iter().zip(v).map(|(a, b)| a * b).sum() };
    let (mut a, mut b) = (-1.0 - hi, 1.0 + hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if value(&shifted(mid)) > target {
            b = mid;
        } else {
            a = mid;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    shifted(a)
}

/// Execute one optimization run.
pub fn run(config: &RunConfig) -> Result<RunResult> {
    let problem = Problem::new(config)?;
    run_problem(config, &problem)
}

/// Execute one optimization run on a prebuilt [`Problem`] matching `config`.
pub fn run_problem(config: &RunConfig, problem: &Problem) -> Result<RunResult> {
    let start = Instant::now();
    let vf = config.volume_fraction;
    let coeffs = problem.volume_coefficients();
    let mut x = init_density(config, problem);
    // Filter truncation at the boundary can lift the physical volume slightly.
    let vol0: f64 = x.iter().zip(coeffs).map(|(a, b)| a * b).sum();
    if vol0 > vf {
        x = shift_to_budget(&x, coeffs, vf, 0.0, 1.0);
    }

    let mut mma = Mma::new(x.len(), 0.0, 1.0, config.move_limit, config.mma);
    let mut history = Vec::new();
    let mut change = 0.0;
    let mut converged = false;
    let mut phys = problem.physical(&x);
    let (mut breakdown, mut cache) = evaluate_objective(&problem.system, &phys, &problem.objective)?;
    // Scaling the objective by its starting magnitude keeps the asymptote constants
    // independent of units and mesh size.
    let scale = if breakdown.total_phi.abs() > 0.0 { 1.0 / breakdown.total_phi.abs() } else { 1.0 };
    loop {
        let iter = history.len();
        let row = HistoryRow {
            iter,
            phi: breakdown.total_phi,
            mean_output_disp: breakdown.mean_output_disp,
            strain_energy: breakdown.total_strain_energy,
            volume_fraction: problem.volume_fraction(&phys),
            max_density_change: change,
        };
        log::debug!(
            "iter {iter}: phi {:.6e} disp {:.6e} energy {:.6e} vol {:.4} change {:.4}",
            row.phi,
            row.mean_output_disp,
            row.strain_energy,
            row.volume_fraction,
            change
        );
        history.push(row);
        if iter > 0 && change < config.convergence_tol {
            converged = true;
            break;
        }
        if iter >= config.max_iters {
            break;
        }
        let grad_phys = gradient(&problem.system, &phys, &problem.objective, &cache, &problem.pinned)?;
        let grad: Vec<f64> = problem.design_gradient(&grad_phys).into_iter().map(|g| g * scale).collect();
        let mut trial = None;
        let outcome = mma.conservative_step(&x, breakdown.total_phi * scale, &grad, coeffs, vf, |candidate| {
            let p = problem.physical(candidate);
            let (b, c) = evaluate_objective(&problem.system, &p, &problem.objective)?;
            let value = b.total_phi * scale;
            trial = Some((p, b, c));
            Ok(value)
        })?;
        match outcome {
            StepOutcome::Accepted { x: x_new, .. } => {
                change = x.iter().zip(&x_new).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                x = x_new;
                (phys, breakdown, cache) = trial.expect("accepted step was evaluated");
            }
            StepOutcome::Stalled { evaluations } => {
                log::debug!("iter {iter}: no descent after {evaluations} trial points");
                converged = true;
                break;
            }
        }
    }

    Ok(RunResult {
        config: config.clone(),
        history,
        final_rho: DensityField(phys),
        converged,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
