//! Tapered finger design domain on a structured quadrilateral grid.
//!
//! Coordinates are in millimetres with the origin at the bottom-left corner of the
//! bounding box. The grasping edge is the straight left edge `x = 0`; the back edge
//! runs from `(width_bottom, 0)` to `(width_top, height)`. The finger is mounted at the
//! top (two slots) and its tip is at `y = 0`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of grasp input faces on the contact edge.
pub const INPUT_FACE_COUNT: usize = 6;

/// Smallest mesh accepted by [`build_domain`].
pub const MIN_ACTIVE_ELEMENTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

/// Closed interval along one straight boundary edge. On the grasping edge the
/// interval is in `y`; on the top edge it is in `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSegment {
    pub start: f64,
    pub end: f64,
}

impl EdgeSegment {
    pub fn new(start: f64, end: f64) -> Self {
        EdgeSegment { start, end }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    fn contains(&self, t: f64, tol: f64) -> bool {
        t >= self.start - tol && t <= self.end + tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub height: f64,
    pub width_top: f64,
    pub width_bottom: f64,
    pub element_size: f64,
    /// Two mounting slots near the top, forced solid. Slot 0 is on the grasping side.
    pub slot_regions: [Rect; 2],
    /// `F_in1` (tip) to `F_in6` (base), as `y` intervals on the grasping edge.
    pub input_faces: [EdgeSegment; INPUT_FACE_COUNT],
    /// `y` interval on the grasping edge whose mean x-displacement is the output.
    pub output_region: EdgeSegment,
    /// `x` interval on the top edge where the input displacement is prescribed.
    pub actuation_face: EdgeSegment,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec::proportional(100.0, 40.0, 15.0, 1.0)
    }
}

impl DomainSpec {
    /// Outline with slots and faces placed at fixed fractions of the outline.
    ///
    /// Input faces fill 60% of six equal pitches over the lower 80% of the grasping
    /// edge; the output region spans all of them.
    pub fn proportional(height: f64, width_top: f64, width_bottom: f64, element_size: f64) -> Self {
        let slot = |x0: f64, x1: f64| Rect {
            x_min: x0 * width_top,
            x_max: x1 * width_top,
            y_min: 0.86 * height,
            y_max: 0.94 * height,
        };
        let pitch = 0.8 * height / INPUT_FACE_COUNT as f64;
        let input_faces: [EdgeSegment; INPUT_FACE_COUNT] = std::array::from_fn(|k| {
            let start = k as f64 * pitch;
            EdgeSegment::new(start, start + 0.6 * pitch)
        });
        let output_region = EdgeSegment::new(0.0, input_faces[INPUT_FACE_COUNT - 1].end);
        DomainSpec {
            height,
            width_top,
            width_bottom,
            element_size,
            slot_regions: [slot(0.1, 0.3), slot(0.6, 0.8)],
            input_faces,
            output_region,
            actuation_face: EdgeSegment::new(0.6 * width_top, 0.8 * width_top),
        }
    }

    /// x-coordinate of the back edge at height `y`.
    pub fn back_edge_x(&self, y: f64) -> f64 {
        self.width_bottom + (self.width_top - self.width_bottom) * y / self.height
    }

    pub fn trapezoid_area(&self) -> f64 {
        0.5 * (self.width_top + self.width_bottom) * self.height
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDomain(msg));
        let h = self.element_size;
        for (name, v) in [
            ("height", self.height),
            ("width_top", self.width_top),
            ("width_bottom", self.width_bottom),
            ("element_size", h),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.width_bottom >= self.width_top {
            return bad(format!(
                "domain must taper: width_bottom {} >= width_top {}",
                self.width_bottom, self.width_top
            ));
        }
        let rows = self.height / h;
        if (rows - rows.round()).abs() > 1e-9 * rows.max(1.0) {
            return bad(format!("element_size {h} does not divide height {}", self.height));
        }

        let tol = 1e-9 * self.height;
        let mut prev_end = f64::NEG_INFINITY;
        for (k, face) in self.input_faces.iter().enumerate() {
            if !(face.start.is_finite() && face.end.is_finite()) || face.start > face.end {
                return bad(format!("F_in{} has an inverted interval", k + 1));
            }
            if face.start < -tol || face.end > self.height + tol {
                return bad(format!("F_in{} lies outside the grasping edge", k + 1));
            }
            if face.start <= prev_end {
                return bad(format!(
                    "F_in{} overlaps or precedes F_in{} (faces run tip to base)",
                    k + 1,
                    k
                ));
            }
            prev_end = face.end;
        }
        let out = &self.output_region;
        if out.start > out.end || out.start < -tol || out.end > self.height + tol {
            return bad("output region lies outside the grasping edge".into());
        }
        let act = &self.actuation_face;
        if act.start > act.end || act.start < -tol || act.end > self.width_top + tol {
            return bad("actuation face lies outside the top edge".into());
        }
        for (k, slot) in self.slot_regions.iter().enumerate() {
            let inside = slot.x_min >= -tol
                && slot.y_min >= -tol
                && slot.y_max <= self.height + tol
                && slot.x_min < slot.x_max
                && slot.y_min < slot.y_max
                // the back edge is narrowest at the slot's lowest point
                && slot.x_max <= self.back_edge_x(slot.y_min) + tol;
            if !inside {
                return bad(format!("slot {k} lies outside the trapezoid"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn offset(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
        }
    }
}

/// Structured quadrilateral mesh over the bounding box of the domain.
///
/// Nodes are numbered row-major from the bottom-left: node `(i, j)` has index
/// `j * (nx + 1) + i`. Elements are numbered the same way and list their nodes
/// counter-clockwise starting at the bottom-left corner.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub element_size: f64,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 4]>,
    pub active_mask: Vec<bool>,
    pub nondesign_mask: Vec<bool>,
    pub dof_count: usize,
    spec: Option<DomainSpec>,
    active: Vec<usize>,
}

impl Mesh {
    /// Fully active rectangular grid without non-design regions.
    pub fn rectangle(nx: usize, ny: usize, element_size: f64) -> Mesh {
        let n_el = nx * ny;
        Mesh::with_masks(nx, ny, element_size, vec![true; n_el], vec![false; n_el], None)
    }

    fn with_masks(
        nx: usize,
        ny: usize,
        element_size: f64,
        active_mask: Vec<bool>,
        nondesign_mask: Vec<bool>,
        spec: Option<DomainSpec>,
    ) -> Mesh {
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([i as f64 * element_size, j as f64 * element_size]);
            }
        }
        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let n0 = j * (nx + 1) + i;
                let n3 = n0 + nx + 1;
                elements.push([n0, n0 + 1, n3 + 1, n3]);
            }
        }
        let active = (0..elements.len()).filter(|&e| active_mask[e]).collect();
        let dof_count = 2 * nodes.len();
        Mesh {
            nx,
            ny,
            element_size,
            nodes,
            elements,
            active_mask,
            nondesign_mask,
            dof_count,
            spec,
            active,
        }
    }

    pub fn spec(&self) -> Option<&DomainSpec> {
        self.spec.as_ref()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn element_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Grid position `(i, j)` of an element.
    pub fn element_cell(&self, e: usize) -> (usize, usize) {
        (e % self.nx, e / self.nx)
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 2] {
        let (i, j) = self.element_cell(e);
        [
            (i as f64 + 0.5) * self.element_size,
            (j as f64 + 0.5) * self.element_size,
        ]
    }

    /// Indices of active elements in ascending order.
    pub fn active_elements(&self) -> &[usize] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    /// Per-active-element flag: true where the element is a free design variable.
    pub fn design_flags(&self) -> Vec<bool> {
        self.active.iter().map(|&e| !self.nondesign_mask[e]).collect()
    }

    /// Number of active elements touching each node.
    pub fn node_valence(&self) -> Vec<u8> {
        let mut valence = vec![0u8; self.nodes.len()];
        for &e in &self.active {
            for &n in &self.elements[e] {
                valence[n] += 1;
            }
        }
        valence
    }

    /// Nodes of the active region that are not surrounded by four active elements.
    pub fn boundary_nodes(&self) -> Vec<bool> {
        self.node_valence()
            .into_iter()
            .map(|v| v > 0 && v < 4)
            .collect()
    }

    /// Sorted, de-duplicated nodes of all active elements whose centroid lies in `rect`.
    pub fn nodes_in_region(&self, rect: &Rect) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .active
            .iter()
            .filter(|&&e| {
                let [cx, cy] = self.element_centroid(e);
                rect.contains(cx, cy)
            })
            .flat_map(|&e| self.elements[e])
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Nodes of the mounting slot `slot` (0 or 1). Requires a domain-built mesh.
    pub fn slot_nodes(&self, slot: usize) -> Result<Vec<usize>> {
        let spec = self
            .spec
            .as_ref()
            .ok_or_else(|| Error::InvalidDomain("mesh has no domain spec".into()))?;
        let rect = spec
            .slot_regions
            .get(slot)
            .ok_or_else(|| Error::InvalidDomain(format!("no slot {slot}")))?;
        Ok(self.nodes_in_region(rect))
    }

    /// Plain-text listing of nodes and elements for debugging.
    pub fn to_listing(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for (k, [x, y]) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{k} {x} {y}");
        }
        let _ = writeln!(out, "elements {}", self.elements.len());
        for (k, [a, b, c, d]) in self.elements.iter().enumerate() {
            let _ = writeln!(
                out,
                "{k} {a} {b} {c} {d} {} {}",
                self.active_mask[k] as u8, self.nondesign_mask[k] as u8
            );
        }
        out
    }
}

/// Mesh the tapered domain described by `spec`.
pub fn build_domain(spec: &DomainSpec) -> Result<Mesh> {
    spec.validate()?;
    let h = spec.element_size;
    let ny = (spec.height / h).round() as usize;
    let nx = (spec.width_top / h - 1e-9).ceil() as usize;

    let mut active_mask = vec![false; nx * ny];
    let mut nondesign_mask = vec![false; nx * ny];
    for j in 0..ny {
        let yc = (j as f64 + 0.5) * h;
        let x_back = spec.back_edge_x(yc);
        for i in 0..nx {
            let xc = (i as f64 + 0.5) * h;
            let e = j * nx + i;
            if xc >= x_back {
                continue;
            }
            active_mask[e] = true;
            let in_slot = spec.slot_regions.iter().any(|r| r.contains(xc, yc));
            let under_face = i == 0
                && spec
                    .input_faces
                    .iter()
                    .any(|f| f.length() > 0.0 && yc >= f.start && yc <= f.end);
            nondesign_mask[e] = in_slot || under_face;
        }
    }

    let active_count = active_mask.iter().filter(|&&a| a).count();
    if active_count < MIN_ACTIVE_ELEMENTS {
        return Err(Error::InvalidDomain(format!(
            "too few active elements: {active_count} < {MIN_ACTIVE_ELEMENTS}"
        )));
    }
    if spec.width_bottom < 4.0 * h - 1e-12 {
        return Err(Error::InvalidDomain(format!(
            "width_bottom {} is narrower than four elements of size {h}",
            spec.width_bottom
        )));
    }
    for (k, slot) in spec.slot_regions.iter().enumerate() {
        let covered = (0..nx * ny).any(|e| {
            let (i, j) = (e % nx, e / nx);
            active_mask[e] && slot.contains((i as f64 + 0.5) * h, (j as f64 + 0.5) * h)
        });
        if !covered {
            return Err(Error::InvalidDomain(format!(
                "slot {k} contains no element centroid at element_size {h}"
            )));
        }
    }
    Ok(Mesh::with_masks(
        nx,
        ny,
        h,
        active_mask,
        nondesign_mask,
        Some(spec.clone()),
    ))
}

/// Named boundary segments that can be turned into node selectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceLabel {
    /// `F_in1` (index 0, tip) through `F_in6` (index 5, base).
    Input(usize),
    Output,
    /// Alias for the `F_in1` node set.
    Tip,
    Actuation,
}

impl fmt::Display for FaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaceLabel::Input(k) => write!(f, "F_in{}", k + 1),
            FaceLabel::Output => f.write_str("output"),
            FaceLabel::Tip => f.write_str("tip"),
            FaceLabel::Actuation => f.write_str("actuation"),
        }
    }
}

impl FromStr for FaceLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "output" => return Ok(FaceLabel::Output),
            "tip" => return Ok(FaceLabel::Tip),
            "actuation" => return Ok(FaceLabel::Actuation),
            _ => {}
        }
        lower
            .strip_prefix("f_in")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|k| (1..=INPUT_FACE_COUNT).contains(k))
            .map(|k| FaceLabel::Input(k - 1))
            .ok_or_else(|| Error::UnknownFace(s.to_string()))
    }
}

/// Weighted set of nodal degrees of freedom along one axis (the `L` operator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSelector {
    pub nodes: Vec<usize>,
    pub dof_axis: Axis,
    pub weights: Vec<f64>,
}

impl NodeSelector {
    /// Uniform weights `1 / |nodes|`. `nodes` is sorted and de-duplicated.
    pub fn uniform(mut nodes: Vec<usize>, dof_axis: Axis) -> Result<Self> {
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.is_empty() {
            return Err(Error::EmptySelector(format!("{dof_axis:?} selector")));
        }
        let w = 1.0 / nodes.len() as f64;
        let weights = vec![w; nodes.len()];
        Ok(NodeSelector {
            nodes,
            dof_axis,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dof(&self, k: usize) -> usize {
        2 * self.nodes[k] + self.dof_axis.offset()
    }

    /// Weighted sum of the selected displacement components.
    pub fn apply(&self, u: &[f64]) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&n, &w)| w * u[2 * n + self.dof_axis.offset()])
            .sum()
    }

    /// Iterator of `(global dof, weight)` pairs.
    pub fn dof_weights(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let off = self.dof_axis.offset();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&n, &w)| (2 * n + off, w))
    }
}

/// Node selector for a labeled face of a domain-built mesh.
///
/// Grasping-edge selectors act on `x`; the actuation selector acts on `y`, the
/// direction the mounting pin is driven.
pub fn make_selector(mesh: &Mesh, label: FaceLabel) -> Result<NodeSelector> {
    let spec = mesh
        .spec
        .as_ref()
        .ok_or_else(|| Error::InvalidDomain("mesh has no domain spec".into()))?;
    let (segment, on_grasping_edge) = match label {
        FaceLabel::Input(k) => (
            *spec
                .input_faces
                .get(k)
                .ok_or_else(|| Error::UnknownFace(label.to_string()))?,
            true,
        ),
        FaceLabel::Tip => (spec.input_faces[0], true),
        FaceLabel::Output => (spec.output_region, true),
        FaceLabel::Actuation => (spec.actuation_face, false),
    };
    if segment.length() <= 0.0 {
        return Err(Error::EmptySelector(format!("{label} has zero length")));
    }
    let tol = 1e-9 * mesh.element_size;
    let valence = mesh.node_valence();
    let nodes: Vec<usize> = if on_grasping_edge {
        (0..=mesh.ny)
            .map(|j| mesh.node_index(0, j))
            .filter(|&n| valence[n] > 0 && segment.contains(mesh.nodes[n][1], tol))
            .collect()
    } else {
        (0..=mesh.nx)
            .map(|i| mesh.node_index(i, mesh.ny))
            .filter(|&n| valence[n] > 0 && segment.contains(mesh.nodes[n][0], tol))
            .collect()
    };
    if nodes.is_empty() {
        return Err(Error::EmptySelector(format!(
            "{label} contains no mesh nodes at element_size {}",
            mesh.element_size
        )));
    }
    let axis = if on_grasping_edge { Axis::X } else { Axis::Y };
    NodeSelector::uniform(nodes, axis)
}
