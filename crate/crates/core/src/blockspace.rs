//! Stacked per-agent vectors and the mixing operator `W ⊗ I_d`.
//!
//! A [`BlockVector`] is an `n x d` array whose row `i` is agent `i`'s local
//! copy. The Kronecker operator is never materialized; [`mix`] applies the
//! `n x n` matrix to the rows.

use std::ops::{Add, Mul, Neg, Sub};

use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1, Axis};

use crate::error::{Error, Result};
use crate::topology::MixingMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    data: Array2<f64>,
}

impl BlockVector {
    pub fn zeros(n: usize, d: usize) -> Self {
        BlockVector {
            data: Array2::zeros((n, d)),
        }
    }

    pub fn from_array(data: Array2<f64>) -> Self {
        BlockVector { data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::shape(format!("rows of length {d}"), "ragged rows"));
        }
        Ok(BlockVector {
            data: Array2::from_shape_fn((n, d), |(i, j)| rows[i][j]),
        })
    }

    /// Every agent holds the same vector `v`.
    pub fn consensus(n: usize, v: ArrayView1<'_, f64>) -> Self {
        let d = v.len();
        BlockVector {
            data: Array2::from_shape_fn((n, d), |(_, j)| v[j]),
        }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<f64> {
        &mut self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn row_mut(&mut self, i: usize) -> ArrayViewMut1<'_, f64> {
        self.data.row_mut(i)
    }

    pub fn check_same_shape(&self, other: &BlockVector) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(())
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &BlockVector) {
        self.data.scaled_add(a, &x.data);
    }

    pub fn scaled(&self, a: f64) -> BlockVector {
        BlockVector {
            data: &self.data * a,
        }
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &BlockVector) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &BlockVector) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Sum over agents, one entry per coordinate.
    pub fn column_sums(&self) -> Array1<f64> {
        self.data.sum_axis(Axis(0))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Add<&BlockVector> for &BlockVector {
    type Output = BlockVector;
    fn add(self, rhs: &BlockVector) -> BlockVector {
        BlockVector {
            data: &self.data + &rhs.data,
        }
    }
}

impl Sub<&BlockVector> for &BlockVector {
    type Output = BlockVector;
    fn sub(self, rhs: &BlockVector) -> BlockVector {
        BlockVector {
            data: &self.data - &rhs.data,
        }
    }
}

impl Mul<&BlockVector> for f64 {
    type Output = BlockVector;
    fn mul(self, rhs: &BlockVector) -> BlockVector {
        rhs.scaled(self)
    }
}

impl Neg for &BlockVector {
    type Output = BlockVector;
    fn neg(self) -> BlockVector {
        self.scaled(-1.0)
    }
}

/// Row `i` of the result is `sum_j W_ij x_j`, summed in increasing `j` over
/// nonzero weights. The per-agent execution path relies on this exact order.
pub fn mix(w: &MixingMatrix, x: &BlockVector) -> Result<BlockVector> {
    let n = w.n();
    if x.n() != n {
        return Err(Error::shape(format!("{n} agents"), format!("{} agents", x.n())));
    }
    Ok(mix_unchecked(w.entries(), x))
}

pub(crate) fn mix_unchecked(w: &Array2<f64>, x: &BlockVector) -> BlockVector {
    let (n, d) = x.shape();
    let mut out = Array2::zeros((n, d));
    for i in 0..n {
        let mut acc = out.row_mut(i);
        for j in 0..n {
            let wij = w[[i, j]];
            if wij != 0.0 {
                acc.scaled_add(wij, &x.data.row(j));
            }
        }
    }
    BlockVector { data: out }
}

/// `sum_k x_{:,k}^T W x_{:,k}`, clamped at zero.
pub fn seminorm_sq(w: &MixingMatrix, x: &BlockVector) -> Result<f64> {
    let wx = mix(w, x)?;
    Ok(x.dot(&wx).max(0.0))
}

pub fn consensus_mean(x: &BlockVector) -> Array1<f64> {
    x.data
        .mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(x.d()))
}

/// Largest Euclidean distance of an agent from the consensus mean.
pub fn consensus_gap(x: &BlockVector) -> f64 {
    let mean = consensus_mean(x);
    x.data
        .rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .zip(mean.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Removes the per-coordinate mean so that every column sums to zero.
pub fn project_zero_mean(x: &BlockVector) -> BlockVector {
    let mean = consensus_mean(x);
    let mut out = x.clone();
    for mut r in out.data.rows_mut() {
        r -= &mean;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_graph, laplacian, GraphKind};
    use ndarray::arr2;
    use proptest::prelude::*;

    fn lap(kind: GraphKind, n: usize) -> MixingMatrix {
        laplacian(&build_graph(kind, n).unwrap()).unwrap()
    }

    #[test]
    fn mix_examples() {
        let w = lap(GraphKind::Path, 2);
        let x = BlockVector::from_array(arr2(&[[1.0], [0.0]]));
        assert_eq!(mix(&w, &x).unwrap().data(), &arr2(&[[1.0], [-1.0]]));

        let w = lap(GraphKind::Cycle, 4);
        let e0 = BlockVector::from_array(arr2(&[[1.0], [0.0], [0.0], [0.0]]));
        assert_eq!(mix(&w, &e0).unwrap().data(), &arr2(&[[2.0], [-1.0], [0.0], [-1.0]]));

        let c = BlockVector::consensus(4, ndarray::arr1(&[0.3, -2.0]).view());
        assert_eq!(mix(&w, &c).unwrap().max_abs(), 0.0);

        assert!(mix(&w, &BlockVector::zeros(3, 1)).is_err());
    }

    #[test]
    fn seminorm_examples() {
        let w = lap(GraphKind::Path, 2);
        let x = BlockVector::from_array(arr2(&[[1.0], [0.0]]));
        assert_eq!(seminorm_sq(&w, &x).unwrap(), 1.0);
        assert_eq!(seminorm_sq(&w, &x.scaled(3.0)).unwrap(), 9.0);
        let c = BlockVector::consensus(2, ndarray::arr1(&[5.0]).view());
        assert_eq!(seminorm_sq(&w, &c).unwrap(), 0.0);
    }

    #[test]
    fn consensus_examples() {
        let x = BlockVector::from_array(arr2(&[[1.0], [-1.0]]));
        assert_eq!(consensus_mean(&x)[0], 0.0);
        assert_eq!(consensus_gap(&x), 1.0);
        let x = BlockVector::from_array(arr2(&[[2.0], [0.0], [0.0], [2.0]]));
        assert_eq!(consensus_mean(&x)[0], 1.0);
        assert_eq!(consensus_gap(&x), 1.0);
        let c = BlockVector::consensus(3, ndarray::arr1(&[1.5, 2.5]).view());
        assert_eq!(consensus_gap(&c), 0.0);
    }

    fn block(n: usize, d: usize) -> impl Strategy<Value = BlockVector> {
        proptest::collection::vec(-10.0f64..10.0, n * d)
            .prop_map(move |v| BlockVector::from_array(Array2::from_shape_vec((n, d), v).unwrap()))
    }

    proptest! {
        #[test]
        fn mix_is_linear(x in block(6, 3), y in block(6, 3), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let w = lap(GraphKind::Cycle, 6);
            let lhs = mix(&w, &(&x.scaled(a) + &y.scaled(b))).unwrap();
            let rhs = &mix(&w, &x).unwrap().scaled(a) + &mix(&w, &y).unwrap().scaled(b);
            prop_assert!(lhs.dist_sq(&rhs).sqrt() <= 1e-12 * (1.0 + lhs.norm()));
        }

        #[test]
        fn seminorm_is_frobenius_pairing(x in block(5, 2)) {
            let w = lap(GraphKind::Path, 5);
            let s = seminorm_sq(&w, &x).unwrap();
            let f = x.dot(&mix(&w, &x).unwrap());
            prop_assert!((s - f.max(0.0)).abs() <= 1e-12 * (1.0 + f.abs()));
        }

        #[test]
        fn mixed_columns_sum_to_zero(x in block(8, 4)) {
            let w = lap(GraphKind::Barbell, 8);
            let sums = mix(&w, &x).unwrap().column_sums();
            for s in sums.iter() {
                prop_assert!(s.abs() <= 1e-10 * (1.0 + x.max_abs()));
            }
        }
    }
}
