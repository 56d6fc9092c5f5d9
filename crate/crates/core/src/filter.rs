//! Linear-decay density filter over the design elements of a structured mesh.

use crate::domain::Mesh;

/// Row-normalized convolution weights stored as a sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterKernel {
    radius: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl FilterKernel {
    /// Kernel over `elements` (mesh element indices, in variable order) with
    /// `radius` measured in element sizes. Neighbours outside `elements` are ignored
    /// and the truncated weights renormalized.
    pub fn new(mesh: &Mesh, elements: &[usize], radius: f64) -> FilterKernel {
        let n = elements.len();
        if radius < 1.0 {
            if radius != 0.0 {
                log::warn!("filter radius {radius} is below one element; using the identity");
            }
            return FilterKernel::identity(n, radius);
        }
        let mut slot = vec![usize::MAX; mesh.nx * mesh.ny];
        for (k, &e) in elements.iter().enumerate() {
            slot[e] = k;
        }
        let reach = radius.ceil() as isize;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for &e in elements {
            let (i, j) = mesh.element_cell(e);
            let start = cols.len();
            let mut total = 0.0;
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    let (ii, jj) = (i as isize + di, j as isize + dj);
                    if ii < 0 || jj < 0 || ii >= mesh.nx as isize || jj >= mesh.ny as isize {
                        continue;
                    }
                    let k = slot[mesh.element_index(ii as usize, jj as usize)];
                    if k == usize::MAX {
                        continue;
                    }
                    let w = radius - ((di * di + dj * dj) as f64).sqrt();
                    if w > 0.0 {
                        cols.push(k);
                        weights.push(w);
                        total += w;
                    }
                }
            }
            for w in &mut weights[start..] {
                *w /= total;
            }
            row_ptr.push(cols.len());
        }
        FilterKernel {
            radius,
            row_ptr,
            cols,
            weights,
        }
    }

    pub fn identity(n: usize, radius: f64) -> FilterKernel {
        FilterKernel {
            radius,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            weights: vec![1.0; n],
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Neighbour indices and weights of variable `k`.
    pub fn row(&self, k: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[k]..self.row_ptr[k + 1];
        (&self.cols[r.clone()], &self.weights[r])
    }

    /// Filtered field `H x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (cols, w) = self.row(k);
                cols.iter().zip(w).map(|(&c, &w)| w * x[c]).sum()
            })
            .collect()
    }

    /// Transpose product `H^T g`: maps physical-density sensitivities to design variables.
    pub fn chain_rule(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (k, &gk) in g.iter().enumerate().take(self.len()) {
            let (cols, w) = self.row(k);
            for (&c, &w) in cols.iter().zip(w) {
                out[c] += w * gk;
            }
        }
        out
    }

    /// Column sums of the weight matrix (how much each variable contributes in total).
    pub fn column_sums(&self) -> Vec<f64> {
        self.chain_rule(&vec![1.0; self.len()])
    }
}
