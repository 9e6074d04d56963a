//! Packed lower-triangular matrices.
//!
//! Products are evaluated with a fixed summation order per output element,
//! so a vector gives bit-identical results whether it is multiplied alone or
//! as part of a batch.

use std::ops::Range;

#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular {
    n: usize,
    /// Row `r` occupies `data[r (r+1) / 2 ..][..= r]`.
    data: Vec<f64>,
}

fn row_range(r: usize) -> Range<usize> {
    let start = r * (r + 1) / 2;
    start..start + r + 1
}

/// Dot product with eight independent accumulators.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s += x * y;
    }
    s
}

impl LowerTriangular {
    pub fn zeros(n: usize) -> Self {
        LowerTriangular {
            n,
            data: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for r in 0..n {
            let range = row_range(r);
            for (c, v) in m.data[range].iter_mut().enumerate() {
                *v = f(r, c);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entries `0..=r` of row `r`.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[row_range(r)]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[row_range(r)]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c > r {
            0.0
        } else {
            self.data[row_range(r).start + c]
        }
    }

    /// `out = L x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        assert!(x.len() >= self.n && out.len() >= self.n);
        for r in 0..self.n {
            out[r] = dot(self.row(r), &x[..=r]);
        }
    }

    /// `outs[j] = L xs[j]` for every `j`, streaming each row of `L` once per
    /// block of vectors.
    pub fn apply_batch(&self, xs: &[&[f64]], outs: &mut [&mut [f64]]) {
        assert_eq!(xs.len(), outs.len());
        const BLOCK: usize = 16;
        for (xb, ob) in xs.chunks(BLOCK).zip(outs.chunks_mut(BLOCK)) {
            for r in 0..self.n {
                let row = self.row(r);
                for (x, o) in xb.iter().zip(ob.iter_mut()) {
                    o[r] = dot(row, &x[..=r]);
                }
            }
        }
    }
}
