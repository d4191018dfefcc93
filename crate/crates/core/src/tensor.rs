//! Four-way convolution weight tensors and their mode-3 / mode-4 unfoldings.
//!
//! A [`Tensor4`] stores a kernel `(N1, N2, N3, N4)` = (height, width, input
//! channels, output channels) in lexicographic order with the last index
//! fastest. The unfoldings stack every entry sharing a third (resp. fourth)
//! index into one column; the remaining indices run lexicographically down
//! the rows.

use std::io::{Read, Write};

use crate::error::{AdasError, Result};

/// Magic prefix of the binary snapshot format.
pub const AT4_MAGIC: [u8; 4] = *b"AT4\0";

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(AdasError::Shape(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(AdasError::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |r, c| if r == c { values[r] } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self - eta * other`, the shape of a plain gradient step.
    pub fn sub_scaled(&self, eta: f64, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - eta * b)
                .collect(),
        })
    }

    /// `tr(selfᵀ other)`, the Frobenius inner product.
    pub fn frobenius_dot(&self, other: &Matrix) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(AdasError::Shape(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

/// A 4-way array with dims `(N1, N2, N3, N4)`, last index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(AdasError::Shape(format!(
                "tensor dims must be >= 1, got {dims:?}"
            )));
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(AdasError::Shape(format!(
                "tensor {dims:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Result<Self> {
        let len = dims.iter().product();
        Self::new(dims, vec![0.0; len])
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut([usize; 4]) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.iter().product());
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                for c in 0..dims[2] {
                    for d in 0..dims[3] {
                        data.push(f([a, b, c, d]));
                    }
                }
            }
        }
        Self::new(dims, data)
    }

    #[inline]
    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn offset(&self, idx: [usize; 4]) -> usize {
        let [_, n2, n3, n4] = self.dims;
        ((idx[0] * n2 + idx[1]) * n3 + idx[2]) * n4 + idx[3]
    }

    #[inline]
    pub fn get(&self, idx: [usize; 4]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Writes the AT4 snapshot: magic, four little-endian `u32` dims, then
    /// the values as little-endian `f64` in storage order.
    pub fn write_at4<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&AT4_MAGIC)?;
        for d in self.dims {
            let d = u32::try_from(d)
                .map_err(|_| AdasError::Shape(format!("dim {d} does not fit in u32")))?;
            w.write_all(&d.to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_at4_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 8 * self.data.len());
        self.write_at4(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_at4<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| AdasError::Format("truncated AT4 header".into()))?;
        if magic != AT4_MAGIC {
            return Err(AdasError::Format(format!("bad AT4 magic {magic:?}")));
        }
        let mut dims = [0usize; 4];
        let mut word = [0u8; 4];
        for d in &mut dims {
            r.read_exact(&mut word)
                .map_err(|_| AdasError::Format("truncated AT4 dims".into()))?;
            *d = u32::from_le_bytes(word) as usize;
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(AdasError::Format(format!("AT4 dims must be >= 1, got {dims:?}")));
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| AdasError::Format("AT4 dims overflow".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != len * 8 {
            return Err(AdasError::Format(format!(
                "AT4 payload holds {} bytes, expected {}",
                bytes.len(),
                len * 8
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(dims, data)
    }

    pub fn from_at4_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_at4(bytes)
    }
}

/// Mode-3 unfolding: an `(N1·N2·N4) × N3` matrix, rows ordered by `(d1, d2, d4)`.
pub fn unfold_mode3(t: &Tensor4) -> Matrix {
    let [n1, n2, n3, n4] = t.dims;
    let mut m = Matrix::zeros(n1 * n2 * n4, n3);
    for a in 0..n1 {
        for b in 0..n2 {
            for c in 0..n3 {
                for d in 0..n4 {
                    let row = (a * n2 + b) * n4 + d;
                    m.set(row, c, t.get([a, b, c, d]));
                }
            }
        }
    }
    m
}

/// Mode-4 unfolding: an `(N1·N2·N3) × N4` matrix, rows ordered by `(d1, d2, d3)`.
///
/// With the storage layout this is the flat buffer reinterpreted row-major.
pub fn unfold_mode4(t: &Tensor4) -> Matrix {
    let [n1, n2, n3, n4] = t.dims;
    Matrix {
        rows: n1 * n2 * n3,
        cols: n4,
        data: t.data.clone(),
    }
}

/// Inverse of [`unfold_mode3`].
pub fn fold_mode3(m: &Matrix, dims: [usize; 4]) -> Result<Tensor4> {
    let [n1, n2, n3, n4] = dims;
    if m.rows != n1 * n2 * n4 || m.cols != n3 {
        return Err(AdasError::Shape(format!(
            "{}x{} matrix cannot fold into mode-3 of {dims:?}",
            m.rows, m.cols
        )));
    }
    Tensor4::from_fn(dims, |[a, b, c, d]| m.get((a * n2 + b) * n4 + d, c))
}

/// Inverse of [`unfold_mode4`].
pub fn fold_mode4(m: &Matrix, dims: [usize; 4]) -> Result<Tensor4> {
    let [n1, n2, n3, n4] = dims;
    if m.rows != n1 * n2 * n3 || m.cols != n4 {
        return Err(AdasError::Shape(format!(
            "{}x{} matrix cannot fold into mode-4 of {dims:?}",
            m.rows, m.cols
        )));
    }
    Tensor4::new(dims, m.data.clone())
}
