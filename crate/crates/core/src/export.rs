//! Plain-file outputs: history tables, density graymaps, campaign summaries and the
//! front scatter plot.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::campaign::{load_records, pareto_front, Coordinate, RunRecord};
use crate::domain::{build_domain, Mesh};
use crate::optimizer::{Formulation, HistoryRow};
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct HistoryCsvRow {
    iter: usize,
    phi: f64,
    mean_output_disp_mm: f64,
    strain_energy_Nmm: f64,
    volume_fraction: f64,
    max_density_change: f64,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// `history.csv` bytes.
pub fn history_csv(history: &[HistoryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in history {
        w.serialize(HistoryCsvRow {
            iter: r.iter,
            phi: r.phi,
            mean_output_disp_mm: r.mean_output_disp,
            strain_energy_Nmm: r.strain_energy,
            volume_fraction: r.volume_fraction,
            max_density_change: r.max_density_change,
        })
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))
}

/// Binary graymap of a density field over the full grid, top row first. Density 1 maps
/// to 255; cells outside the domain are 0.
pub fn density_pgm(mesh: &Mesh, rho: &[f64]) -> Vec<u8> {
    let mut grid = vec![0u8; mesh.nx * mesh.ny];
    for (&e, &r) in mesh.active_elements().iter().zip(rho) {
        let (i, j) = mesh.element_cell(e);
        grid[(mesh.ny - 1 - j) * mesh.nx + i] = (255.0 * r.clamp(0.0, 1.0)).round() as u8;
    }
    let mut out = format!("P5\n{} {}\n255\n", mesh.nx, mesh.ny).into_bytes();
    out.extend_from_slice(&grid);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    PgmBundle,
    FrontSvg,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "pgm_bundle" | "pgm-bundle" => Ok(ExportFormat::PgmBundle),
            "front_svg" | "front-svg" => Ok(ExportFormat::FrontSvg),
            _ => Err(Error::Config(format!("unknown export format `{s}`"))),
        }
    }
}

/// One row of the campaign summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SummaryRow {
    pub run_id: String,
    pub formulation: Formulation,
    pub sweep_value: f64,
    pub seed: u64,
    pub volume_fraction: f64,
    pub input_displacement: Option<f64>,
    pub max_iters: usize,
    pub converged: bool,
    pub iterations: usize,
    pub phi: f64,
    pub mean_output_disp_mm: f64,
    pub strain_energy_Nmm: f64,
    pub final_volume_fraction: f64,
}

impl SummaryRow {
    pub fn of(r: &RunRecord) -> SummaryRow {
        let c = &r.result.config;
        let last = r.result.last();
        SummaryRow {
            run_id: r.run_id.clone(),
            formulation: c.formulation,
            sweep_value: r.sweep_value,
            seed: c.seed,
            volume_fraction: c.volume_fraction,
            input_displacement: c.input_displacement,
            max_iters: c.max_iters,
            converged: r.result.converged,
            iterations: r.result.history.len() - 1,
            phi: last.phi,
            mean_output_disp_mm: last.mean_output_disp,
            strain_energy_Nmm: last.strain_energy,
            final_volume_fraction: last.volume_fraction,
        }
    }

    pub fn coordinate(&self) -> Coordinate {
        Coordinate {
            run_id: self.run_id.clone(),
            mean_output_disp: self.mean_output_disp_mm,
            total_strain_energy: self.strain_energy_Nmm,
        }
    }
}

pub fn summary_csv(records: &[RunRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(SummaryRow::of(r)).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))
}

/// Rows of a summary table written by [`summary_csv`].
pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::CorruptRecord {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| Error::CorruptRecord {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })
        })
        .collect()
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Scatter of every run coloured by sweep value, with the front drawn as a polyline.
pub fn front_svg(records: &[RunRecord]) -> String {
    let (w, h, m) = (720.0, 480.0, 70.0);
    let coords: Vec<Coordinate> = records.iter().map(RunRecord::coordinate).collect();
    let finite = |c: &&Coordinate| c.mean_output_disp.is_finite() && c.total_strain_energy.is_finite();
    let span = |vals: Vec<f64>| {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo <= 0.0 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = span(coords.iter().filter(finite).map(|c| c.mean_output_disp).collect());
    let (y0, y1) = span(coords.iter().filter(finite).map(|c| c.total_strain_energy).collect());
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut values: Vec<f64> = records.iter().map(|r| r.sweep_value).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let colour = |v: f64| PALETTE[values.iter().position(|&u| u == v).unwrap_or(0) % PALETTE.len()];

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    let _ = writeln!(s, r#"<text x="{m}" y="{}" >{x0:.4}</text>"#, h - m + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{x1:.4}</text>"#, w - m, h - m + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y0:.4}</text>"#, m - 4.0, h - m);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{y1:.4}</text>"#, m - 4.0, m + 4.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">mean output displacement (mm)</text>"#,
        w / 2.0,
        h - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">strain energy (N·mm)</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (k, v) in values.iter().enumerate() {
        let y = m + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{y}" r="4" fill="{}"/><text x="{}" y="{}">{v}</text>"#,
            w - m + 10.0,
            colour(*v),
            w - m + 18.0,
            y + 4.0
        );
    }
    for (r, c) in records.iter().zip(&coords) {
        if !finite(&c) {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<circle class="run" data-run-id="{}" cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
            r.run_id,
            px(c.mean_output_disp),
            py(c.total_strain_energy),
            colour(r.sweep_value)
        );
    }
    let mut front: Vec<_> = pareto_front(&coords).into_iter().filter(|p| !p.dominated).collect();
    front.sort_by(|a, b| a.mean_output_disp.total_cmp(&b.mean_output_disp));
    let pts: Vec<String> = front
        .iter()
        .map(|p| format!("{:.2},{:.2}", px(p.mean_output_disp), py(p.total_strain_energy)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline class="front" points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        pts.join(" ")
    );
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportReport {
    pub files: Vec<PathBuf>,
    /// Records that could not be read and were skipped.
    pub warnings: Vec<String>,
}

/// Write `format` for the campaign in `dir` to `out` (a file, or a directory for the
/// graymap bundle). `out` defaults to a name inside `dir`.
pub fn export(dir: &Path, format: ExportFormat, out: Option<&Path>) -> Result<ExportReport> {
    let (records, warnings) = load_records(dir)?;
    let default_name = match format {
        ExportFormat::Csv => "summary.csv",
        ExportFormat::PgmBundle => "densities",
        ExportFormat::FrontSvg => "front.svg",
    };
    let target = out.map_or_else(|| dir.join(default_name), Path::to_path_buf);
    let write = |path: &Path, bytes: &[u8]| fs::write(path, bytes).map_err(|e| Error::io(path, e));
    let files = match format {
        ExportFormat::Csv => {
            write(&target, &summary_csv(&records)?)?;
            vec![target]
        }
        ExportFormat::FrontSvg => {
            write(&target, front_svg(&records).as_bytes())?;
            vec![target]
        }
        ExportFormat::PgmBundle => {
            fs::create_dir_all(&target).map_err(|e| Error::io(&target, e))?;
            let mut files = Vec::new();
            for r in &records {
                let mesh = build_domain(&r.result.config.domain)?;
                let path = target.join(format!("{}.pgm", r.run_id));
                write(&path, &density_pgm(&mesh, &r.result.final_rho.0))?;
                files.push(path);
            }
            files
        }
    };
    for w in &warnings {
        log::warn!("skipped: {w}");
    }
    Ok(ExportReport { files, warnings })
}

/// Front run ids recomputed from a summary table.
pub fn front_from_summary(rows: &[SummaryRow]) -> Vec<String> {
    let mut ids: Vec<String> = pareto_front(&rows.iter().map(SummaryRow::coordinate).collect::<Vec<_>>())
        .into_iter()
        .filter(|p| !p.dominated)
        .map(|p| p.run_id)
        .collect();
    ids.sort();
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_header_and_orientation() {
        let mesh = Mesh::rectangle(2, 2, 1.0);
        let bytes = density_pgm(&mesh, &[1.0, 0.0, 0.0, 0.5]);
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        // bottom-left element lands in the last image row
        assert_eq!(&bytes[header.len()..], &[0, 128, 255, 0]);
    }

    #[test]
    fn history_header_names_units() {
        let row = HistoryRow {
            iter: 0,
            phi: -1.5,
            mean_output_disp: 0.25,
            strain_energy: 3.0,
            volume_fraction: 0.3,
            max_density_change: 0.0,
        };
        let text = String::from_utf8(history_csv(&[row]).unwrap()).unwrap();
        assert_eq!(
            text,
            "iter,phi,mean_output_disp_mm,strain_energy_Nmm,volume_fraction,max_density_change\n0,-1.5,0.25,3.0,0.3,0.0\n"
        );
    }
}
