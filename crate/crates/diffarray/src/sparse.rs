/// Constant CSR matrix used for graph propagation and segment pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f32>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f32)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f32> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    /// Row-averaging matrix: row `g` averages the rows listed in `groups[g]`.
    pub fn segment_mean(groups: &[Vec<usize>], cols: usize) -> Self {
        let mut t = Vec::new();
        for (g, members) in groups.iter().enumerate() {
            let w = 1.0 / members.len().max(1) as f32;
            t.extend(members.iter().map(|&m| (g, m, w)));
        }
        Self::from_triplets(groups.len(), cols, t)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f32)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// `out += self * b` for a dense `b` of shape `[cols, width]`.
    pub(crate) fn mul_dense(&self, b: &[f32], width: usize, out: &mut [f32]) {
        for r in 0..self.rows {
            let dst = &mut out[r * width..(r + 1) * width];
            for (c, v) in self.row_entries(r) {
                let src = &b[c * width..(c + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
    }

    /// `out += selfᵀ * g` for a dense `g` of shape `[rows, width]`.
    pub(crate) fn mul_dense_transposed(&self, g: &[f32], width: usize, out: &mut [f32]) {
        for r in 0..self.rows {
            let src = &g[r * width..(r + 1) * width];
            for (c, v) in self.row_entries(r) {
                let dst = &mut out[c * width..(c + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
    }
}
