//! Small fixed-size linear algebra for 3-vectors, 3x3 matrices and
//! Minkowski 4-vectors / 4x4 matrices.
//!
//! 4x4 matrices are stored row-major as flat 16-element `f64` arrays.
//! The Minkowski metric is `eta = diag(+1, -1, -1, -1)`.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

/// Euclidean 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3([
            self.0[1] * other.0[2] - self.0[2] * other.0[1],
            self.0[2] * other.0[0] - self.0[0] * other.0[2],
            self.0[0] * other.0[1] - self.0[1] * other.0[0],
        ])
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3([self.0[0] / s, self.0[1] / s, self.0[2] / s])
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

/// 3x3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [f64; 9]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn zero() -> Mat3 {
        Mat3([0.0; 9])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[3 * r + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.0[3 * r + c] = v;
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    }

    /// Inverse via cofactors. Returns `None` for singular matrices.
    pub fn inverse(&self) -> Option<Mat3> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        let inv = Mat3([
            m[4] * m[8] - m[5] * m[7],
            m[2] * m[7] - m[1] * m[8],
            m[1] * m[5] - m[2] * m[4],
            m[5] * m[6] - m[3] * m[8],
            m[0] * m[8] - m[2] * m[6],
            m[2] * m[3] - m[0] * m[5],
            m[3] * m[7] - m[4] * m[6],
            m[1] * m[6] - m[0] * m[7],
            m[0] * m[4] - m[1] * m[3],
        ]);
        Some(inv * (1.0 / d))
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3([
            m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
            m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
        ])
    }

    /// Rotation by `angle` about the unit axis `axis` (Rodrigues).
    pub fn rotation(axis: Vec3, angle: f64) -> Mat3 {
        let n = axis.norm();
        if n == 0.0 {
            return Mat3::IDENTITY;
        }
        let u = axis / n;
        let (s, c) = angle.sin_cos();
        let omc = 1.0 - c;
        let (x, y, z) = (u[0], u[1], u[2]);
        Mat3([
            c + x * x * omc,
            x * y * omc - z * s,
            x * z * omc + y * s,
            y * x * omc + z * s,
            c + y * y * omc,
            y * z * omc - x * s,
            z * x * omc - y * s,
            z * y * omc + x * s,
            c + z * z * omc,
        ])
    }

    /// Eigenvalues of a symmetric 3x3 matrix (ascending), via the
    /// trigonometric closed form.
    pub fn sym_eigenvalues(&self) -> [f64; 3] {
        let m = self;
        let p1 = m.get(0, 1).powi(2) + m.get(0, 2).powi(2) + m.get(1, 2).powi(2);
        let q = (m.get(0, 0) + m.get(1, 1) + m.get(2, 2)) / 3.0;
        let p2 = (m.get(0, 0) - q).powi(2)
            + (m.get(1, 1) - q).powi(2)
            + (m.get(2, 2) - q).powi(2)
            + 2.0 * p1;
        if p2 <= 0.0 {
            return [q, q, q];
        }
        let p = (p2 / 6.0).sqrt();
        // B = (A - q I)/p; r = det(B)/2 clamped into [-1,1]
        let mut b = *self;
        for i in 0..3 {
            b.set(i, i, b.get(i, i) - q);
        }
        let r = (b.det() / (p * p * p) / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut ev = [e1, e2, e3];
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: f64) -> Mat3 {
        let mut out = self;
        for v in out.0.iter_mut() {
            *v *= s;
        }
        out
    }
}

impl Mul<Mat3> for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut out = Mat3::zero();
        for r in 0..3 {
            for c in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += self.get(r, k) * o.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        out
    }
}

/// Minkowski 4-vector `(x^0; x^1, x^2, x^3)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec4(pub [f64; 4]);

impl Vec4 {
    pub const ZERO: Vec4 = Vec4([0.0; 4]);

    pub fn new(t: f64, spatial: Vec3) -> Self {
        Vec4([t, spatial[0], spatial[1], spatial[2]])
    }

    pub fn time(&self) -> f64 {
        self.0[0]
    }

    pub fn spatial(&self) -> Vec3 {
        Vec3([self.0[1], self.0[2], self.0[3]])
    }

    /// Minkowski inner product with signature `(+,-,-,-)`.
    pub fn mink_dot(&self, o: &Vec4) -> f64 {
        self.0[0] * o.0[0] - self.0[1] * o.0[1] - self.0[2] * o.0[2] - self.0[3] * o.0[3]
    }

    pub fn mink_norm_sq(&self) -> f64 {
        self.mink_dot(self)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Index<usize> for Vec4 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for Vec4 {
    type Output = Vec4;
    fn add(self, o: Vec4) -> Vec4 {
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = self.0[i] + o.0[i];
        }
        Vec4(out)
    }
}

impl Sub for Vec4 {
    type Output = Vec4;
    fn sub(self, o: Vec4) -> Vec4 {
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = self.0[i] - o.0[i];
        }
        Vec4(out)
    }
}

impl Mul<f64> for Vec4 {
    type Output = Vec4;
    fn mul(self, s: f64) -> Vec4 {
        let mut out = self.0;
        for v in out.iter_mut() {
            *v *= s;
        }
        Vec4(out)
    }
}

/// 4x4 matrix stored row-major as a flat 16-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat4(pub [f64; 16]);

/// Metric tensor `diag(+1,-1,-1,-1)` as a matrix.
pub const MINKOWSKI: Mat4 = Mat4([
    1.0, 0.0, 0.0, 0.0, //
    0.0, -1.0, 0.0, 0.0, //
    0.0, 0.0, -1.0, 0.0, //
    0.0, 0.0, 0.0, -1.0,
]);

impl Mat4 {
    pub const IDENTITY: Mat4 = Mat4([
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    ]);

    pub fn zero() -> Mat4 {
        Mat4([0.0; 16])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.0[4 * r + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.0[4 * r + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec4 {
        Vec4([self.get(0, c), self.get(1, c), self.get(2, c), self.get(3, c)])
    }

    pub fn transpose(&self) -> Mat4 {
        let mut out = Mat4::zero();
        for r in 0..4 {
            for c in 0..4 {
                out.set(r, c, self.get(c, r));
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &Vec4) -> Vec4 {
        let mut out = [0.0; 4];
        for (r, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for c in 0..4 {
                acc += self.get(r, c) * v.0[c];
            }
            *slot = acc;
        }
        Vec4(out)
    }

    /// Maximum absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Mat4) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Embed a 3x3 spatial block into a 4x4 matrix with unit time-time entry.
    pub fn from_spatial(r: &Mat3) -> Mat4 {
        let mut out = Mat4::IDENTITY;
        for i in 0..3 {
            for j in 0..3 {
                out.set(i + 1, j + 1, r.get(i, j));
            }
        }
        out
    }

    /// Spatial 3x3 block.
    pub fn spatial_block(&self) -> Mat3 {
        let mut out = Mat3::zero();
        for i in 0..3 {
            for j in 0..3 {
                out.set(i, j, self.get(i + 1, j + 1));
            }
        }
        out
    }

    /// Inverse of a Lorentz matrix: `L^{-1} = eta L^T eta`.
    pub fn lorentz_inverse(&self) -> Mat4 {
        MINKOWSKI * self.transpose() * MINKOWSKI
    }

    /// `Lambda^T eta Lambda - eta`, max abs entry; zero iff Lorentz.
    pub fn lorentz_defect(&self) -> f64 {
        let g = self.transpose() * MINKOWSKI * *self;
        g.max_abs_diff(&MINKOWSKI)
    }

    pub fn det(&self) -> f64 {
        // Laplace expansion via 3x3 minors along the first row.
        let mut det = 0.0;
        for c in 0..4 {
            let mut minor = Mat3::zero();
            for (ri, r) in (1..4).enumerate() {
                let mut ci = 0;
                for cc in 0..4 {
                    if cc == c {
                        continue;
                    }
                    minor.set(ri, ci, self.get(r, cc));
                    ci += 1;
                }
            }
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            det += sign * self.get(0, c) * minor.det();
        }
        det
    }
}

impl Mul<Mat4> for Mat4 {
    type Output = Mat4;
    fn mul(self, o: Mat4) -> Mat4 {
        let mut out = Mat4::zero();
        for r in 0..4 {
            for c in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += self.get(r, k) * o.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_product_right_handed() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(x.cross(y), Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn mat3_inverse_roundtrip() {
        let m = Mat3([2.0, 1.0, 0.5, -1.0, 3.0, 0.0, 0.25, -0.5, 1.5]);
        let inv = m.inverse().unwrap();
        let id = m * inv;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((id.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotation_is_orthogonal() {
        let r = Mat3::rotation(Vec3::new(1.0, 2.0, -0.5), 0.7);
        let should_be_id = r * r.transpose();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((should_be_id.get(i, j) - expect).abs() < 1e-13);
            }
        }
        assert!((r.det() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn sym_eigenvalues_diag() {
        let m = Mat3([3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0]);
        let ev = m.sym_eigenvalues();
        assert!((ev[0] + 1.0).abs() < 1e-12);
        assert!((ev[1] - 2.0).abs() < 1e-12);
        assert!((ev[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mink_dot_signature() {
        let v = Vec4([2.0, 1.0, 1.0, 1.0]);
        assert_eq!(v.mink_norm_sq(), 1.0);
    }

    #[test]
    fn mat4_det_identity() {
        assert_eq!(Mat4::IDENTITY.det(), 1.0);
        assert_eq!(MINKOWSKI.det(), -1.0);
    }
}
