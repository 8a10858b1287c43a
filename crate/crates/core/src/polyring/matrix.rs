//! Dense matrices of polynomials and exact determinants.

use super::{MatrixError, Polynomial};

/// Row-major matrix of polynomials over a fixed variable set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMatrix {
    nvars: usize,
    rows: usize,
    cols: usize,
    data: Vec<Polynomial>,
}

impl PolyMatrix {
    /// Build from rows; every entry must share one ambient variable count,
    /// which must be supplied explicitly so empty matrices stay well formed.
    pub fn from_rows(nvars: usize, rows: Vec<Vec<Polynomial>>) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            assert_eq!(row.len(), ncols, "ragged matrix rows");
            for p in row {
                assert_eq!(p.nvars(), nvars, "entry over wrong variable set");
                data.push(p);
            }
        }
        PolyMatrix {
            nvars,
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> PolyMatrix {
        let mut rows = Vec::with_capacity(self.cols);
        for j in 0..self.cols {
            rows.push((0..self.rows).map(|i| self.get(i, j).clone()).collect());
        }
        PolyMatrix::from_rows(self.nvars, rows)
    }

    pub fn mul(&self, rhs: &PolyMatrix) -> Result<PolyMatrix, MatrixError> {
        if self.cols != rhs.rows {
            return Err(MatrixError::DimensionMismatch(
                self.rows, self.cols, rhs.rows, rhs.cols,
            ));
        }
        let mut rows = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut row = Vec::with_capacity(rhs.cols);
            for j in 0..rhs.cols {
                let mut acc = Polynomial::zero(self.nvars);
                for k in 0..self.cols {
                    acc = &acc + &(self.get(i, k) * rhs.get(k, j));
                }
                row.push(acc);
            }
            rows.push(row);
        }
        Ok(PolyMatrix::from_rows(self.nvars, rows))
    }

    /// Exact determinant. Small orders expand by cofactors; larger ones use
    /// one-step fraction-free elimination, whose interior divisions are exact
    /// because every intermediate entry is a minor of the original matrix.
    pub fn det(&self) -> Result<Polynomial, MatrixError> {
        if self.rows != self.cols {
            return Err(MatrixError::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if self.rows == 0 {
            return Ok(Polynomial::one(self.nvars));
        }
        if self.rows <= 4 {
            Ok(self.det_cofactor())
        } else {
            Ok(self.det_bareiss())
        }
    }

    fn det_cofactor(&self) -> Polynomial {
        let n = self.rows;
        if n == 1 {
            return self.get(0, 0).clone();
        }
        let mut acc = Polynomial::zero(self.nvars);
        for j in 0..n {
            let entry = self.get(0, j);
            if entry.is_zero() {
                continue;
            }
            let mut minor_rows = Vec::with_capacity(n - 1);
            for i in 1..n {
                let row: Vec<Polynomial> = (0..n)
                    .filter(|&c| c != j)
                    .map(|c| self.get(i, c).clone())
                    .collect();
                minor_rows.push(row);
            }
            let minor = PolyMatrix::from_rows(self.nvars, minor_rows).det_cofactor();
            let signed = entry * &minor;
            if j % 2 == 0 {
                acc = &acc + &signed;
            } else {
                acc = &acc - &signed;
            }
        }
        acc
    }

    fn det_bareiss(&self) -> Polynomial {
        let n = self.rows;
        let mut m: Vec<Vec<Polynomial>> = (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j).clone()).collect())
            .collect();
        let mut sign_flip = false;
        let mut prev = Polynomial::one(self.nvars);
        for k in 0..n - 1 {
            if m[k][k].is_zero() {
                match (k + 1..n).find(|&r| !m[r][k].is_zero()) {
                    Some(r) => {
                        m.swap(k, r);
                        sign_flip = !sign_flip;
                    }
                    None => return Polynomial::zero(self.nvars),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &(&m[k][k] * &m[i][j]) - &(&m[i][k] * &m[k][j]);
                    m[i][j] = num
                        .exact_div(&prev)
                        .expect("fraction-free elimination divides exactly");
                }
                m[i][k] = Polynomial::zero(self.nvars);
            }
            prev = m[k][k].clone();
        }
        if sign_flip {
            -&m[n - 1][n - 1]
        } else {
            m[n - 1][n - 1].clone()
        }
    }
}
