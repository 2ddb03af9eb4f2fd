//! Vector helpers on `&[f64]` slices and affine hyperplanes in `R^(d+1)`.
//!
//! The ambient dimension is a runtime value (`d + 1` for a `d`-dimensional
//! measure), so points are slices into flat coordinate storage rather than
//! fixed-size arrays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// An affine hyperplane given by a unit normal and an anchor point. A linear
/// hyperplane through the origin uses `anchor = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    normal: Vec<f64>,
    anchor: Vec<f64>,
}

impl Hyperplane {
    /// Normal is renormalized on entry and must be unit length within 1e-12
    /// beforehand (a zero normal is rejected).
    pub fn new(normal: Vec<f64>, anchor: Vec<f64>) -> Result<Self> {
        if normal.len() != anchor.len() {
            return Err(Error::InvalidParameter(
                "hyperplane normal and anchor dimensions differ".into(),
            ));
        }
        let n = norm(&normal);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidParameter("hyperplane normal must be nonzero".into()));
        }
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "hyperplane normal must be unit length (|n| = {n})"
            )));
        }
        let mut normal = normal;
        normalize(&mut normal);
        Ok(Self { normal, anchor })
    }

    /// Coordinate hyperplane `x_axis = level` (normal along `axis`).
    pub fn coordinate(ambient: usize, axis: usize, level: f64) -> Self {
        let mut normal = vec![0.0; ambient];
        normal[axis] = 1.0;
        let mut anchor = vec![0.0; ambient];
        anchor[axis] = level;
        Self { normal, anchor }
    }

    pub fn ambient_dim(&self) -> usize {
        self.normal.len()
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    /// Signed distance from `x` to the plane, positive on the normal's side.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..x.len() {
            s += (x[i] - self.anchor[i]) * self.normal[i];
        }
        s
    }

    /// Removes the normal component of a (free) vector: the projection onto
    /// the parallel linear hyperplane.
    pub fn project_vector(&self, v: &[f64]) -> Vec<f64> {
        let c = dot(v, &self.normal);
        let mut out = v.to_vec();
        axpy(&mut out, -c, &self.normal);
        out
    }

    /// Orthogonal projection of a point onto the affine plane.
    pub fn project_point(&self, x: &[f64]) -> Vec<f64> {
        let s = self.signed_distance(x);
        let mut out = x.to_vec();
        axpy(&mut out, -s, &self.normal);
        out
    }

    /// Mirror image of `x` about the plane.
    pub fn reflect(&self, x: &[f64]) -> Vec<f64> {
        let s = self.signed_distance(x);
        let mut out = x.to_vec();
        axpy(&mut out, -2.0 * s, &self.normal);
        out
    }

    /// Deterministic orthonormal basis of the tangent space (d vectors for an
    /// ambient dimension d+1), built by Gram-Schmidt over the standard basis.
    pub fn tangent_basis(&self) -> Vec<Vec<f64>> {
        let n = self.normal.len();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
        for axis in 0..n {
            if basis.len() == n - 1 {
                break;
            }
            let mut v = vec![0.0; n];
            v[axis] = 1.0;
            let c = dot(&v, &self.normal);
            axpy(&mut v, -c, &self.normal);
            for b in &basis {
                let c = dot(&v, b);
                axpy(&mut v, -c, b);
            }
            if normalize(&mut v) > 1e-8 {
                basis.push(v);
            }
        }
        basis
    }

    /// Plane parallel to `self` through the point `z`.
    pub fn through(&self, z: &[f64]) -> Hyperplane {
        Hyperplane {
            normal: self.normal.clone(),
            anchor: z.to_vec(),
        }
    }
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns (eigenvalues ascending, eigenvectors as rows).
/// Intended for the (d+1)x(d+1) second-moment matrices, not large systems.
pub fn sym_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap());
    let vals = order.iter().map(|&i| m[i][i]).collect();
    let vecs = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_non_unit_normal() {
        assert!(Hyperplane::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn reflection_is_involutive_and_fixes_plane() {
        let h = Hyperplane::coordinate(3, 2, 0.5);
        let x = [0.3, -1.0, 2.0];
        let r = h.reflect(&x);
        assert_abs_diff_eq!(r[2], -1.0, epsilon = 1e-14);
        let rr = h.reflect(&r);
        for i in 0..3 {
            assert_abs_diff_eq!(rr[i], x[i], epsilon = 1e-14);
        }
        let on = [7.0, 8.0, 0.5];
        let r = h.reflect(&on);
        for i in 0..3 {
            assert_abs_diff_eq!(r[i], on[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn tangent_basis_is_orthonormal_and_tangent() {
        let n = {
            let mut v = vec![1.0, 2.0, -0.5];
            let s = norm(&v);
            v.iter_mut().for_each(|x| *x /= s);
            v
        };
        let h = Hyperplane::new(n, vec![0.0; 3]).unwrap();
        let basis = h.tangent_basis();
        assert_eq!(basis.len(), 2);
        for b in &basis {
            assert_abs_diff_eq!(norm(b), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(dot(b, h.normal()), 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(dot(&basis[0], &basis[1]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobi_eigen_recovers_spectrum() {
        // symmetric matrix with known eigenvalues {1, 3}
        let a = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (vals, vecs) = sym_eigen(&a);
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-12);
        // eigenvector of smallest eigenvalue is (1,-1)/sqrt(2) up to sign
        assert_abs_diff_eq!(vecs[0][0].abs(), 1.0 / 2f64.sqrt(), epsilon = 1e-12);
    }
}
