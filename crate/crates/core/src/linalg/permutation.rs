use super::{Matrix, Vector};
use crate::{Error, Result};

/// A permutation matrix stored as an index map: `(P v)[i] = v[map[i]]`.
///
/// Never densified unless [`PermutationMatrix::to_dense`] is called.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationMatrix {
    map: Vec<usize>,
}

impl PermutationMatrix {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &k in &map {
            if k >= n || seen[k] {
                return Err(Error::InvalidParameter(format!(
                    "index map of length {n} is not a bijection"
                )));
            }
            seen[k] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.map.len()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &k)| i == k)
    }

    /// The inverse permutation, which is also the transpose.
    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &k) in self.map.iter().enumerate() {
            inv[k] = i;
        }
        Self { map: inv }
    }

    pub fn transpose(&self) -> Self {
        self.inverse()
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::dims("permutation compose", self.dim(), other.dim()));
        }
        Ok(Self {
            map: self.map.iter().map(|&k| other.map[k]).collect(),
        })
    }

    pub fn apply(&self, v: &Vector) -> Result<Vector> {
        if v.len() != self.dim() {
            return Err(Error::dims("permutation apply", self.dim(), v.len()));
        }
        Ok(Vector::from_iterator(
            self.dim(),
            self.map.iter().map(|&k| v[k]),
        ))
    }

    /// `P · m` (row permutation).
    pub fn left_mul(&self, m: &Matrix) -> Result<Matrix> {
        if m.nrows() != self.dim() {
            return Err(Error::dims("permutation left_mul", self.dim(), m.nrows()));
        }
        Ok(Matrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            m[(self.map[i], j)]
        }))
    }

    /// `m · P` (column permutation).
    pub fn right_mul(&self, m: &Matrix) -> Result<Matrix> {
        if m.ncols() != self.dim() {
            return Err(Error::dims("permutation right_mul", self.dim(), m.ncols()));
        }
        let mut out = Matrix::zeros(m.nrows(), m.ncols());
        for (i, &k) in self.map.iter().enumerate() {
            out.set_column(k, &m.column(i));
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        for (i, &k) in self.map.iter().enumerate() {
            out[(i, k)] = 1.0;
        }
        out
    }
}

/// The commutation matrix `T_{rows,cols}`: maps `vec(M)` to `vec(Mᵀ)` for
/// every `rows × cols` matrix `M`. Its inverse is `T_{cols,rows}`.
pub fn commutation_matrix(rows: usize, cols: usize) -> PermutationMatrix {
    let mut map = vec![0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            // vec(Mᵀ)[j + cols·i] = M[i, j] = vec(M)[i + rows·j]
            map[j + cols * i] = i + rows * j;
        }
    }
    PermutationMatrix { map }
}
