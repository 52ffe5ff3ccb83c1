//! Scalar and matrix special functions for the two-diagonal plant matrix.
//!
//! The plant matrix has the distinct real spectrum `{-a1, -a2, -a3}`, so any
//! analytic function of it is expressed through values and divided
//! differences of the scalar function at those eigenvalues (Opitz form).
//! Everything here is real arithmetic.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{IgoError, Result};
use crate::model::PlantParams;

/// Dense 3×3 real matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Matrix3(pub [[f64; 3]; 3]);

impl Matrix3 {
    pub const fn zeros() -> Self {
        Matrix3([[0.0; 3]; 3])
    }

    pub const fn identity() -> Self {
        Matrix3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn diag(d: [f64; 3]) -> Self {
        let mut m = Self::zeros();
        for (i, v) in d.into_iter().enumerate() {
            m.0[i][i] = v;
        }
        m
    }

    /// `u vᵀ`
    pub fn outer(u: [f64; 3], v: [f64; 3]) -> Self {
        let mut m = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = u[i] * v[j];
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> [f64; 3] {
        [self.0[0][j], self.0[1][j], self.0[2][j]]
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, row) in self.0.iter().enumerate() {
            out[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|x| *x *= s);
        m
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Sum of the three principal 2×2 minors (second characteristic invariant).
    pub fn principal_minor_sum(&self) -> f64 {
        let m = &self.0;
        (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            + (m[0][0] * m[2][2] - m[2][0] * m[0][2])
            + (m[0][0] * m[1][1] - m[1][0] * m[0][1])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Matrix3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Mul for Matrix3 {
    type Output = Matrix3;
    fn mul(self, rhs: Matrix3) -> Matrix3 {
        let mut out = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        out
    }
}

impl Add for Matrix3 {
    type Output = Matrix3;
    fn add(self, rhs: Matrix3) -> Matrix3 {
        let mut out = self;
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl Sub for Matrix3 {
    type Output = Matrix3;
    fn sub(self, rhs: Matrix3) -> Matrix3 {
        self + rhs.scale(-1.0)
    }
}

/// Relative separation below which two nodes are treated as coincident.
pub fn node_tolerance(z0: f64, z1: f64) -> f64 {
    1e-9 * 1f64.max(z0.abs()).max(z1.abs())
}

fn check_distinct(z0: f64, z1: f64) -> Result<()> {
    if (z0 - z1).abs() <= node_tolerance(z0, z1) || !(z0 - z1).is_finite() {
        Err(IgoError::DegenerateNodes { z0, z1 })
    } else {
        Ok(())
    }
}

fn check_distinct3(z0: f64, z1: f64, z2: f64) -> Result<()> {
    check_distinct(z0, z1)?;
    check_distinct(z1, z2)?;
    check_distinct(z0, z2)
}

/// First divided difference `f[z0, z1]`.
pub fn dd1<F: Fn(f64) -> f64>(f: F, z0: f64, z1: f64) -> Result<f64> {
    check_distinct(z0, z1)?;
    Ok((f(z1) - f(z0)) / (z1 - z0))
}

/// Second divided difference `f[z0, z1, z2]`.
pub fn dd2<F: Fn(f64) -> f64>(f: F, z0: f64, z1: f64, z2: f64) -> Result<f64> {
    check_distinct3(z0, z1, z2)?;
    let left = (f(z1) - f(z0)) / (z1 - z0);
    let right = (f(z2) - f(z1)) / (z2 - z1);
    Ok((right - left) / (z2 - z0))
}

/// `exp[z0, z1]` evaluated without cancellation for close nodes.
pub fn exp_dd1(z0: f64, z1: f64) -> Result<f64> {
    check_distinct(z0, z1)?;
    let (lo, hi) = if z0 < z1 { (z0, z1) } else { (z1, z0) };
    let h = hi - lo;
    Ok(lo.exp() * h.exp_m1() / h)
}

/// `exp[z0, z1, z2]`; nodes are sorted so the outer gap is the widest.
pub fn exp_dd2(z0: f64, z1: f64, z2: f64) -> Result<f64> {
    check_distinct3(z0, z1, z2)?;
    let mut z = [z0, z1, z2];
    z.sort_by(f64::total_cmp);
    let left = exp_dd1(z[0], z[1])?;
    let right = exp_dd1(z[1], z[2])?;
    Ok((right - left) / (z[2] - z[0]))
}

/// `μ(z) = 1 / (e^{-z} - 1) = e^z / (1 - e^z)`.
pub fn mu(z: f64) -> Result<f64> {
    check_distinct(z, 0.0)?;
    Ok(1.0 / (-z).exp_m1())
}

/// `ν(z) = z μ(z)`.
pub fn nu(z: f64) -> Result<f64> {
    Ok(z * mu(z)?)
}

fn assemble(plant: &PlantParams, s: f64, diag: [f64; 3], d12: f64, d23: f64, d123: f64) -> Matrix3 {
    let mut m = Matrix3::diag(diag);
    m[(1, 0)] = plant.g1() * s * d12;
    m[(2, 1)] = plant.g2() * s * d23;
    m[(2, 0)] = plant.g1() * plant.g2() * s * s * d123;
    m
}

/// `f(A)` for the plant matrix `A` through the Opitz closed form.
///
/// The result is lower triangular: `f(-a_i)` on the diagonal, first divided
/// differences scaled by `g1`, `g2` on the subdiagonal and `g1 g2 f[-a1,-a2,-a3]`
/// in the corner.
pub fn opitz_apply<F: Fn(f64) -> f64>(f: F, plant: &PlantParams) -> Result<Matrix3> {
    opitz_scaled(f, plant, 1.0)
}

/// `f(A s)`: Opitz form at the scaled spectrum `-a_i s`.
pub fn opitz_scaled<F: Fn(f64) -> f64>(f: F, plant: &PlantParams, s: f64) -> Result<Matrix3> {
    let [z1, z2, z3] = plant.eigenvalues().map(|z| z * s);
    let d12 = dd1(&f, z1, z2)?;
    let d23 = dd1(&f, z2, z3)?;
    let d123 = dd2(&f, z1, z2, z3)?;
    Ok(assemble(plant, s, [f(z1), f(z2), f(z3)], d12, d23, d123))
}

/// Transition matrix `e^{At}` in closed form.
pub fn expm_at(plant: &PlantParams, t: f64) -> Result<Matrix3> {
    if !t.is_finite() {
        return Err(crate::error::invalid("t", "time must be finite"));
    }
    if t == 0.0 {
        return Ok(Matrix3::identity());
    }
    let [z1, z2, z3] = plant.eigenvalues().map(|z| z * t);
    Ok(assemble(plant, t, [z1.exp(), z2.exp(), z3.exp()], exp_dd1(z1, z2)?, exp_dd1(z2, z3)?, exp_dd2(z1, z2, z3)?))
}
