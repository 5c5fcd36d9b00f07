use rand::Rng;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `out = self · x + bias`
    pub fn affine(&self, x: &[f64], bias: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for ((o, row), b) in out
            .iter_mut()
            .zip(self.data.chunks_exact(self.cols))
            .zip(bias)
        {
            *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// `out += selfᵀ · d`
    pub fn add_transpose_mul(&self, d: &[f64], out: &mut [f64]) {
        for (row, &dr) in self.data.chunks_exact(self.cols).zip(d) {
            if dr != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += w * dr;
                }
            }
        }
    }

    /// `self += d ⊗ x`
    pub fn add_outer(&mut self, d: &[f64], x: &[f64]) {
        for (row, &dr) in self.data.chunks_exact_mut(self.cols).zip(d) {
            if dr != 0.0 {
                for (w, v) in row.iter_mut().zip(x) {
                    *w += dr * v;
                }
            }
        }
    }
}
