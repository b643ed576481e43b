//! Dense row-major `f64` tensors.

use serde::{Deserialize, Serialize};

use super::NumericsError;

/// A dense tensor of 64-bit floats in row-major order.
///
/// Shapes are arbitrary-rank but the crate only ever builds scalars (`[]`),
/// vectors (`[n]`) and matrices (`[n, m]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NumericsError> {
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(NumericsError::ShapeMismatch {
                op: "from_vec",
                detail: format!("shape {:?} holds {} values, got {}", shape, expect, data.len()),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Scalar value of a 0-rank or single-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on tensor of len {}", self.data.len());
        self.data[0]
    }

    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "rows() on non-matrix {:?}", self.shape);
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "cols() on non-matrix {:?}", self.shape);
        self.shape[1]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reinterprets the data under a new shape of the same total length.
    pub fn reshaped(&self, shape: &[usize]) -> Result<Self, NumericsError> {
        Tensor::from_vec(shape, self.data.clone())
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape, "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }
}

/// `c += a @ b` for row-major matrices, `a: [n,m]`, `b: [m,p]`, `c: [n,p]`.
pub(crate) fn matmul_acc(a: &Tensor, b: &Tensor, c: &mut Tensor) {
    let (n, m, p) = (a.rows(), a.cols(), b.cols());
    assert_eq!(b.rows(), m);
    assert_eq!(c.rows(), n);
    assert_eq!(c.cols(), p);
    let ad = a.data();
    let bd = b.data();
    let cd = c.data_mut();
    // i-k-j order keeps the inner loop contiguous in both b and c.
    for i in 0..n {
        for k in 0..m {
            let aik = ad[i * m + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &bd[k * p..(k + 1) * p];
            let crow = &mut cd[i * p..(i + 1) * p];
            for j in 0..p {
                crow[j] += aik * brow[j];
            }
        }
    }
}

/// `c += a @ b^T`, `a: [n,m]`, `b: [p,m]`, `c: [n,p]`.
pub(crate) fn matmul_nt_acc(a: &Tensor, b: &Tensor, c: &mut Tensor) {
    let (n, m, p) = (a.rows(), a.cols(), b.rows());
    assert_eq!(b.cols(), m);
    assert_eq!(c.rows(), n);
    assert_eq!(c.cols(), p);
    let ad = a.data();
    let bd = b.data();
    let cd = c.data_mut();
    for i in 0..n {
        let arow = &ad[i * m..(i + 1) * m];
        let crow = &mut cd[i * p..(i + 1) * p];
        for j in 0..p {
            let brow = &bd[j * m..(j + 1) * m];
            let mut acc = 0.0;
            for k in 0..m {
                acc += arow[k] * brow[k];
            }
            crow[j] += acc;
        }
    }
}

/// `c += a^T @ b`, `a: [n,m]`, `b: [n,p]`, `c: [m,p]`.
pub(crate) fn matmul_tn_acc(a: &Tensor, b: &Tensor, c: &mut Tensor) {
    let (n, m, p) = (a.rows(), a.cols(), b.cols());
    assert_eq!(b.rows(), n);
    assert_eq!(c.rows(), m);
    assert_eq!(c.cols(), p);
    let ad = a.data();
    let bd = b.data();
    let cd = c.data_mut();
    for i in 0..n {
        let arow = &ad[i * m..(i + 1) * m];
        let brow = &bd[i * p..(i + 1) * p];
        for k in 0..m {
            let aik = arow[k];
            if aik == 0.0 {
                continue;
            }
            let crow = &mut cd[k * p..(k + 1) * p];
            for j in 0..p {
                crow[j] += aik * brow[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0]).is_err());
        let t = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.at(1, 0), 3.0);
    }

    #[test]
    fn matmul_identity() {
        let a = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let eye = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let mut c = Tensor::zeros(&[2, 2]);
        matmul_acc(&a, &eye, &mut c);
        assert_eq!(c, a);
    }

    #[test]
    fn matmul_variants_agree() {
        let a = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::from_vec(&[3, 2], vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let mut c = Tensor::zeros(&[2, 2]);
        matmul_acc(&a, &b, &mut c);
        // b^T is [2,3]; a @ (b^T)^T == a @ b
        let bt = Tensor::from_vec(&[2, 3], vec![7.0, 9.0, 11.0, 8.0, 10.0, 12.0]).unwrap();
        let mut c2 = Tensor::zeros(&[2, 2]);
        matmul_nt_acc(&a, &bt, &mut c2);
        assert_eq!(c, c2);
        // (a^T)^T @ b via tn on a^T
        let at = Tensor::from_vec(&[3, 2], vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]).unwrap();
        let mut c3 = Tensor::zeros(&[2, 2]);
        matmul_tn_acc(&at, &b, &mut c3);
        assert_eq!(c, c3);
    }
}
