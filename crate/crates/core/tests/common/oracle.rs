//! Reference computations kept independent of the library's closed forms.
#![allow(clippy::needless_range_loop)]

type M3 = [[f64; 3]; 3];

fn matmul(a: &M3, b: &M3) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn max_abs(a: &M3) -> f64 {
    a.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

/// `e^{At}` by truncated Taylor series with scaling and squaring.
///
/// The diagonal is shifted by `c = -min_i A_ii` so that `N = A + cI` is
/// nonnegative for Metzler `A`; the series for `e^{Nt}` then has no
/// cancellation and `e^{At} = e^{-ct} e^{Nt}`.
pub fn expm_series(a: &M3, t: f64) -> M3 {
    let c = -(0..3).map(|i| a[i][i]).fold(f64::INFINITY, f64::min);
    let mut n = *a;
    for i in 0..3 {
        n[i][i] += c;
    }
    n.iter_mut().flatten().for_each(|x| *x *= t);
    let norm = max_abs(&n) * 3.0;
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    n.iter_mut().flatten().for_each(|x| *x *= scale);

    let mut sum = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut term = sum;
    for k in 1..60 {
        term = matmul(&term, &n);
        term.iter_mut().flatten().for_each(|x| *x /= k as f64);
        for i in 0..3 {
            for j in 0..3 {
                sum[i][j] += term[i][j];
            }
        }
        if max_abs(&term) < 1e-13 * 1e-3 * max_abs(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = matmul(&sum, &sum);
    }
    let shift = (-c * t).exp();
    sum.iter_mut().flatten().for_each(|x| *x *= shift);
    sum
}

/// Solve `M x = b` by Gaussian elimination with partial pivoting.
pub fn solve3(m: &M3, b: [f64; 3]) -> [f64; 3] {
    let mut a = *m;
    let mut rhs = b;
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / a[row][row];
    }
    x
}

/// Fixed point `X` of `(e^{-AT} - I) X = λ B`, solved in the equivalent form
/// `(I - e^{AT}) X = λ e^{AT} B` so only the cancellation-free forward
/// series is needed.
pub fn fixed_point_direct(a: &M3, lambda: f64, period: f64) -> [f64; 3] {
    let e = expm_series(a, period);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = -e[i][j];
        }
        m[i][i] += 1.0;
    }
    // lower triangular: forward substitution keeps tiny components accurate
    let b = [lambda * e[0][0], lambda * e[1][0], lambda * e[2][0]];
    let mut x = [0.0; 3];
    for i in 0..3 {
        let s: f64 = (0..i).map(|j| m[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / m[i][i];
    }
    x
}

/// Roots of `ρ³ - c2 ρ² + c1 ρ - c0` for the characteristic polynomial of
/// `m`, by Durand–Kerner iteration.
pub fn eigenvalues_dk(m: &M3) -> [num_complex::Complex64; 3] {
    use num_complex::Complex64 as C;
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0] + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let p = |z: C| ((z - tr) * z + minors) * z - det;
    let r = 1.0 + tr.abs().max(minors.abs()).max(det.abs());
    let seed = C::new(0.4, 0.9);
    let mut z = [seed * r, seed.powu(2) * r, seed.powu(3) * r];
    for _ in 0..500 {
        let mut delta: f64 = 0.0;
        for i in 0..3 {
            let mut den = C::new(1.0, 0.0);
            for j in 0..3 {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            if den.norm() == 0.0 {
                continue;
            }
            let step = p(z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * r {
            break;
        }
    }
    z
}
