//! Elements of the prolongation fibre and its dual.
//!
//! Vectors are expanded in `(T_0, T_1..T_n, V_1..V_n)` and covectors in the dual
//! basis `(phi_0, T^1..T^n, V^1..V^n)`. Flattened layout is `[z0, z, v]`.

use crate::linalg::{Mat, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct ProlongVector {
    pub z0: f64,
    pub z: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProlongCovector {
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

fn flatten(head: f64, mid: &[f64], tail: &[f64]) -> Vector {
    let mut out = Vector::zeros(1 + mid.len() + tail.len());
    out[0] = head;
    out.rows_mut(1, mid.len()).copy_from_slice(mid);
    out.rows_mut(1 + mid.len(), tail.len()).copy_from_slice(tail);
    out
}

fn split(v: &Vector) -> (f64, Vec<f64>, Vec<f64>) {
    let n = (v.len() - 1) / 2;
    (
        v[0],
        v.rows(1, n).iter().cloned().collect(),
        v.rows(1 + n, n).iter().cloned().collect(),
    )
}

impl ProlongVector {
    pub fn new(z0: f64, z: Vec<f64>, v: Vec<f64>) -> Self {
        Self { z0, z, v }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(0.0, vec![0.0; n], vec![0.0; n])
    }

    pub fn to_vector(&self) -> Vector {
        flatten(self.z0, &self.z, &self.v)
    }

    pub fn from_vector(v: &Vector) -> Self {
        let (z0, z, w) = split(v);
        Self::new(z0, z, w)
    }
}

impl ProlongCovector {
    pub fn new(a0: f64, a: Vec<f64>, b: Vec<f64>) -> Self {
        Self { a0, a, b }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(0.0, vec![0.0; n], vec![0.0; n])
    }

    /// The covector `phi_0`.
    pub fn phi0(n: usize) -> Self {
        Self::new(1.0, vec![0.0; n], vec![0.0; n])
    }

    pub fn to_vector(&self) -> Vector {
        flatten(self.a0, &self.a, &self.b)
    }

    pub fn from_vector(v: &Vector) -> Self {
        let (a0, a, b) = split(v);
        Self::new(a0, a, b)
    }

    /// Pairing with a vector.
    pub fn apply(&self, x: &ProlongVector) -> f64 {
        self.to_vector().dot(&x.to_vector())
    }
}

/// Matrix of the vertical endomorphism `S = (T^a - y^a phi_0) (x) V_a`.
pub fn vertical_endomorphism_matrix(y: &[f64]) -> Mat {
    let n = y.len();
    let mut s = Mat::zeros(2 * n + 1, 2 * n + 1);
    for a in 0..n {
        s[(1 + n + a, 1 + a)] = 1.0;
        s[(1 + n + a, 0)] = -y[a];
    }
    s
}

/// `S X = (0, 0, z - y z0)`.
pub fn vertical_endomorphism(y: &[f64], x: &ProlongVector) -> ProlongVector {
    let n = y.len();
    let v = (0..n).map(|a| x.z[a] - y[a] * x.z0).collect();
    ProlongVector::new(0.0, vec![0.0; n], v)
}

/// `S* alpha = (-b . y, b, 0)`.
pub fn vertical_endomorphism_dual(y: &[f64], alpha: &ProlongCovector) -> ProlongCovector {
    let n = y.len();
    let a0 = -alpha.b.iter().zip(y).map(|(b, y)| b * y).sum::<f64>();
    ProlongCovector::new(a0, alpha.b.clone(), vec![0.0; n])
}

/// `theta^a = T^a - y^a phi_0` in flattened form.
pub fn theta(y: &[f64], alpha: usize) -> Vector {
    let n = y.len();
    let mut t = Vector::zeros(2 * n + 1);
    t[1 + alpha] = 1.0;
    t[0] = -y[alpha];
    t
}

/// `u (x) alpha` as the matrix `u alpha^T`, i.e. `X -> u alpha(X)`.
pub fn outer(u: &Vector, alpha: &Vector) -> Mat {
    u * alpha.transpose()
}

/// `a ^ b = a (x) b - b (x) a` as a bilinear-form matrix.
pub fn wedge(a: &Vector, b: &Vector) -> Mat {
    a * b.transpose() - b * a.transpose()
}

/// `i_X Omega` for a bilinear-form matrix: `(i_X Omega)(Y) = X^T Omega Y`.
pub fn contract(omega: &Mat, x: &Vector) -> Vector {
    omega.transpose() * x
}
