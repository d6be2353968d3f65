//! Small dense linear algebra: just enough for n ≤ 8 intensive variables
//! and (2n+1)-dimensional phase-space tensors.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        Ok(Self::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum()
        }))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols != x.len() {
            return Err(Error::DimensionMismatch { expected: self.cols, got: x.len() });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `selfᵀ x`
    pub fn tmatvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.rows != x.len() {
            return Err(Error::DimensionMismatch { expected: self.rows, got: x.len() });
        }
        Ok((0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)] * x[i]).sum())
            .collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn tri_index(i: usize, j: usize) -> usize {
    let (a, b) = if i >= j { (i, j) } else { (j, i) };
    a * (a + 1) / 2 + b
}

/// Symmetric (0,2)-tensor components, stored as a packed lower triangle so
/// that symmetry holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor2 {
    dim: usize,
    packed: Vec<f64>,
}

impl SymTensor2 {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, packed: vec![0.0; dim * (dim + 1) / 2] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..=i {
                t.packed[tri_index(i, j)] = f(i, j);
            }
        }
        t
    }

    /// Symmetric part `½(M + Mᵀ)` of a square matrix.
    pub fn symmetrize(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.rows(), got: m.cols() });
        }
        Ok(Self::from_fn(m.rows(), |i, j| {
            if i == j {
                m[(i, i)]
            } else {
                0.5 * (m[(i, j)] + m[(j, i)])
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[tri_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.packed[tri_index(i, j)] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.packed[tri_index(i, j)] += v;
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    pub(crate) fn from_packed(dim: usize, packed: Vec<f64>) -> Self {
        debug_assert_eq!(packed.len(), dim * (dim + 1) / 2);
        Self { dim, packed }
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.to_matrix().to_rows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.packed.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entrywise absolute difference; infinite on a shape mismatch.
    pub fn max_abs_diff(&self, other: &SymTensor2) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.packed
            .iter()
            .zip(&other.packed)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += x[i] * self.get(i, j) * y[j];
            }
        }
        s
    }

    /// `Jᵀ T J` for a `dim × k` matrix `J`.
    pub fn congruence(&self, j: &Matrix) -> Result<SymTensor2> {
        if j.rows() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: j.rows() });
        }
        let k = j.cols();
        let tj = self.to_matrix().matmul(j)?;
        Ok(SymTensor2::from_fn(k, |a, b| {
            (0..self.dim).map(|mu| j[(mu, a)] * tj[(mu, b)]).sum()
        }))
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::new(self, 0.0)
    }

    pub fn determinant(&self) -> f64 {
        Lu::new(&self.to_matrix()).map_or(0.0, |lu| lu.determinant())
    }
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
    min_pivot: f64,
}

impl Cholesky {
    /// Factorizes, failing when a pivot falls to `tol` or below.
    pub fn new(a: &SymTensor2, tol: f64) -> Result<Self> {
        let n = a.dim();
        let mut l = vec![0.0; n * (n + 1) / 2];
        let mut min_pivot = f64::INFINITY;
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l[tri_index(j, k)] * l[tri_index(j, k)];
            }
            if !(d > tol) {
                return Err(Error::Singular {
                    what: "matrix (Cholesky pivot)",
                    at: alloc::format!("column {j}"),
                    det: d,
                });
            }
            min_pivot = min_pivot.min(d);
            let djj = libm::sqrt(d);
            l[tri_index(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[tri_index(i, k)] * l[tri_index(j, k)];
                }
                l[tri_index(i, j)] = s / djj;
            }
        }
        Ok(Self { n, l, min_pivot })
    }

    /// Smallest squared diagonal pivot encountered.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[tri_index(i, k)] * y[k];
            }
            y[i] /= self.l[tri_index(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[tri_index(k, i)] * y[k];
            }
            y[i] /= self.l[tri_index(i, i)];
        }
        y
    }

    pub fn inverse(&self) -> SymTensor2 {
        let n = self.n;
        let mut inv = SymTensor2::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for (i, v) in col.iter().enumerate().skip(j) {
                inv.set(i, j, *v);
            }
        }
        inv
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.rows(), got: a.cols() });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| lu[(x, k)].abs().total_cmp(&lu[(y, k)].abs()))
                .unwrap_or(k);
            if lu[(p, k)] == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = f;
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Self { lu, perm, sign, singular })
    }

    pub fn determinant(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        (0..self.lu.rows()).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.rows();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        if self.singular {
            return Err(Error::Singular { what: "matrix (LU)", at: alloc::string::String::new(), det: 0.0 });
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lu[(i, k)] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.lu[(i, k)] * y[k];
            }
            y[i] /= self.lu[(i, i)];
        }
        Ok(y)
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.rows();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        if self.singular {
            return Err(Error::Singular { what: "matrix (LU)", at: alloc::string::String::new(), det: 0.0 });
        }
        // Aᵀ = Uᵀ Lᵀ P
        let mut z = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] -= self.lu[(k, i)] * z[k];
            }
            z[i] /= self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                z[i] -= self.lu[(k, i)] * z[k];
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let n = self.lu.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }
}

pub fn determinant(a: &Matrix) -> Result<f64> {
    Ok(Lu::new(a)?.determinant())
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &SymTensor2) -> Vec<f64> {
    let n = a.dim();
    let mut m = a.to_matrix();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let scale: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum::<f64>() + off;
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Counts (positive, negative) eigenvalues with magnitude above `cutoff`.
pub fn signature(a: &SymTensor2, cutoff: f64) -> (usize, usize) {
    let ev = symmetric_eigenvalues(a);
    let pos = ev.iter().filter(|&&v| v > cutoff).count();
    let neg = ev.iter().filter(|&&v| v < -cutoff).count();
    (pos, neg)
}

/// Neumaier-compensated running sum. Partition sums over thousands of
/// microstates otherwise drift by ~1e-12 relative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub const ZERO: Self = Self { sum: 0.0, comp: 0.0 };

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn scale(&mut self, r: f64) {
        self.sum *= r;
        self.comp *= r;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
