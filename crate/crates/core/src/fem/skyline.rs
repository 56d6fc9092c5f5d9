//! Symmetric skyline (variable-band) storage with in-place Cholesky factorization.
//!
//! Row `i` stores the lower-triangular entries from column `first_col[i]` through the
//! diagonal contiguously. Fill-in during factorization stays inside the profile, so
//! the factor reuses the same storage.

#[derive(Debug, Clone)]
pub struct Skyline {
    first_col: Vec<usize>,
    row_start: Vec<usize>,
    values: Vec<f64>,
}

/// Failure of the factorization at equation `row`.
#[derive(Debug, Clone, Copy)]
pub struct NotPositiveDefinite {
    pub row: usize,
    pub pivot: f64,
    pub max_diagonal: f64,
}

impl Skyline {
    /// Empty matrix with the given profile. `first_col[i] <= i` must hold.
    pub fn new(first_col: Vec<usize>) -> Skyline {
        let mut row_start = Vec::with_capacity(first_col.len() + 1);
        let mut offset = 0;
        for (i, &fc) in first_col.iter().enumerate() {
            debug_assert!(fc <= i);
            row_start.push(offset);
            offset += i - fc + 1;
        }
        row_start.push(offset);
        Skyline {
            first_col,
            row_start,
            values: vec![0.0; offset],
        }
    }

    pub fn dim(&self) -> usize {
        self.first_col.len()
    }

    pub fn stored_len(&self) -> usize {
        self.values.len()
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> Option<usize> {
        let fc = self.first_col[i];
        (j >= fc && j <= i).then(|| self.row_start[i] + (j - fc))
    }

    /// Add `v` to entry `(i, j)`; only the lower triangle (`j <= i`) is stored.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        let p = self
            .pos(r, c)
            .expect("entry outside skyline profile");
        self.values[p] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        self.pos(r, c).map_or(0.0, |p| self.values[p])
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.row_start[i]..self.row_start[i + 1]]
    }

    /// `y = A x` for the symmetric matrix.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let fc = self.first_col[i];
            let row = self.row(i);
            let mut acc = 0.0;
            for (k, &a) in row.iter().enumerate() {
                let j = fc + k;
                acc += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
            y[i] += acc;
        }
        y
    }

    /// Replace the matrix by its Cholesky factor `L` (`A = L L^T`).
    pub fn factorize(&mut self) -> Result<(), NotPositiveDefinite> {
        let n = self.dim();
        let max_diagonal = (0..n).map(|i| self.get(i, i)).fold(0.0, f64::max);
        for i in 0..n {
            let fci = self.first_col[i];
            let si = self.row_start[i];
            for j in fci..i {
                let fcj = self.first_col[j];
                let sj = self.row_start[j];
                let k0 = fci.max(fcj);
                let len = j - k0;
                let li = &self.values[si + (k0 - fci)..si + (k0 - fci) + len];
                let lj = &self.values[sj + (k0 - fcj)..sj + (k0 - fcj) + len];
                let dot = dot(li, lj);
                let diag_j = self.values[sj + (j - fcj)];
                let p = si + (j - fci);
                self.values[p] = (self.values[p] - dot) / diag_j;
            }
            let row = &self.values[si..si + (i - fci)];
            let pivot = self.values[si + (i - fci)] - dot(row, row);
            if !(pivot > 0.0) || pivot <= max_diagonal * 1e-15 {
                return Err(NotPositiveDefinite {
                    row: i,
                    pivot,
                    max_diagonal,
                });
            }
            self.values[si + (i - fci)] = pivot.sqrt();
        }
        Ok(())
    }

    /// Solve `L L^T x = b` in place using a factorized matrix.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fc = self.first_col[i];
            let row = self.row(i);
            let (off, diag) = row.split_at(i - fc);
            b[i] = (b[i] - dot(off, &b[fc..i])) / diag[0];
        }
        for i in (0..n).rev() {
            let fc = self.first_col[i];
            let row = self.row(i);
            let xi = b[i] / row[i - fc];
            b[i] = xi;
            for (k, &l) in row[..i - fc].iter().enumerate() {
                b[fc + k] -= l * xi;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators keep the loop vectorizable without reassociation flags
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
