use super::element::{plane_stress_matrix, square, strain_displacement};
use super::system::FeSystem;
use crate::error::Result;

/// Density below which an element counts as void for stress reporting.
pub const VOID_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementStress {
    /// `[sigma_xx, sigma_yy, tau_xy]` at the centroid (MPa).
    pub stress: [f64; 3],
    pub von_mises: f64,
    pub void: bool,
}

pub fn von_mises_of(s: [f64; 3]) -> f64 {
    let [sx, sy, txy] = s;
    (sx * sx - sx * sy + sy * sy + 3.0 * txy * txy).max(0.0).sqrt()
}

/// Centroid stresses of every active element for physical densities `rho`.
pub fn von_mises(system: &FeSystem, rho: &[f64], u: &[f64]) -> Result<Vec<ElementStress>> {
    let moduli = system.moduli(rho)?;
    let d = plane_stress_matrix(system.material().poisson_ratio);
    let (b, _) = strain_displacement(&square(system.element_size()), 0.0, 0.0);
    Ok((0..system.element_count())
        .map(|k| {
            let ue = system.gather(k, u);
            let mut strain = [0.0; 3];
            for r in 0..3 {
                strain[r] = (0..8).map(|c| b[r][c] * ue[c]).sum();
            }
            let stress: [f64; 3] = std::array::from_fn(|r| {
                moduli[k] * (d[r][0] * strain[0] + d[r][1] * strain[1] + d[r][2] * strain[2])
            });
            ElementStress {
                stress,
                von_mises: von_mises_of(stress),
                void: rho[k] < VOID_THRESHOLD,
            }
        })
        .collect())
}

/// Largest von Mises stress over non-void elements (0 if all are void).
pub fn max_solid_von_mises(stresses: &[ElementStress]) -> f64 {
    stresses
        .iter()
        .filter(|s| !s.void)
        .map(|s| s.von_mises)
        .fold(0.0, f64::max)
}
