//! Orbital stability of the 1-cycle: the Jacobian of the impulse-to-impulse
//! map at its fixed point, characteristic invariants, the three-condition
//! Schur test for 3×3 matrices, multipliers and convergence time.
//!
//! At a fixed point with output `z0` and period `T = Φ(z0)` the Jacobian is
//!
//! ```text
//! Q'(X) = e^{AT}(I + F'(z0) B C) + Φ'(z0) A X C = e^{AT} + (F' J + Φ' D) C
//! ```
//!
//! with `J = e^{AT} B > 0` and `D = A X < 0`. Only the third column depends
//! on the slopes, so trace, determinant and the principal-minor sum are
//! affine in `(F', Φ')`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cycle::{fixed_point, map_q, CycleSpec, StateVec};
use crate::error::{invalid, IgoError, Result};
use crate::matfun::{exp_dd1, exp_dd2, expm_at, Matrix3};
use crate::model::{IgoModel, PlantParams, INPUT_B, OUTPUT_C};

/// Relative fixed-point residual accepted before linearizing.
pub const FIXED_POINT_GATE: f64 = 1e-7;
/// Pairwise multiplier separation below which roots are flagged as clustered.
pub const CLUSTER_SEPARATION: f64 = 1e-5;

/// Slopes of the modulation laws at the firing output `z0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSlopes")]
pub struct Slopes {
    f_prime: f64,
    phi_prime: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlopes {
    f_prime: f64,
    phi_prime: f64,
}

impl TryFrom<RawSlopes> for Slopes {
    type Error = IgoError;
    fn try_from(r: RawSlopes) -> Result<Self> {
        Slopes::new(r.f_prime, r.phi_prime)
    }
}

impl Slopes {
    /// `F' <= 0` (weights drop as the output rises), `Φ' >= 0` (intervals grow).
    pub fn new(f_prime: f64, phi_prime: f64) -> Result<Self> {
        if !(f_prime.is_finite() && f_prime <= 0.0) {
            return Err(invalid("f_prime", format!("must be <= 0, got {f_prime}")));
        }
        if !(phi_prime.is_finite() && phi_prime >= 0.0) {
            return Err(invalid("phi_prime", format!("must be >= 0, got {phi_prime}")));
        }
        Ok(Self { f_prime, phi_prime })
    }

    pub const OPEN_LOOP: Slopes = Slopes { f_prime: 0.0, phi_prime: 0.0 };

    pub fn f_prime(&self) -> f64 {
        self.f_prime
    }

    pub fn phi_prime(&self) -> f64 {
        self.phi_prime
    }

    pub fn norm(&self) -> f64 {
        self.f_prime.hypot(self.phi_prime)
    }
}

/// `J = e^{AT} B` and `D = A X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianParts {
    pub j: [f64; 3],
    pub d: [f64; 3],
}

impl JacobianParts {
    /// Feedback gain `K = F' J + Φ' D`.
    pub fn gain(&self, s: &Slopes) -> [f64; 3] {
        [0, 1, 2].map(|i| s.f_prime * self.j[i] + s.phi_prime * self.d[i])
    }
}

/// Trace, principal-minor sum `M` and determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    pub trace: f64,
    pub minor_sum: f64,
    pub det: f64,
}

impl Invariants {
    pub fn of(m: &Matrix3) -> Self {
        Self { trace: m.trace(), minor_sum: m.principal_minor_sum(), det: m.det() }
    }
}

/// Invariants as affine functions of the slopes:
/// `tr = c + f F' + p Φ'`, `det = c + p Φ'`, `M = c + ψ1 F' + ψ2 Φ'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantCoefficients {
    /// `[constant, F' coefficient, Φ' coefficient]`
    pub trace: [f64; 3],
    /// `[constant, Φ' coefficient]`
    pub det: [f64; 2],
    /// `[constant, ψ1, ψ2]`
    pub minor_sum: [f64; 3],
}

impl InvariantCoefficients {
    pub fn evaluate(&self, s: &Slopes) -> Invariants {
        let (f, p) = (s.f_prime, s.phi_prime);
        Invariants {
            trace: self.trace[0] + self.trace[1] * f + self.trace[2] * p,
            minor_sum: self.minor_sum[0] + self.minor_sum[1] * f + self.minor_sum[2] * p,
            det: self.det[0] + self.det[1] * p,
        }
    }
}

/// Outcome of the three-condition Schur test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchurVerdict {
    pub is_schur: bool,
    /// `|det| < 1`, `|tr + det| < 1 + M`, `|tr det - M| < 1 - det²`
    pub flags: [bool; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub jacobian: Matrix3,
    pub trace: f64,
    pub minor_sum: f64,
    pub det: f64,
    /// Sorted by decreasing modulus.
    pub multipliers: [Complex64; 3],
    /// Spectral radius.
    pub r0: f64,
    /// `ln r0`
    pub log_r0: f64,
    /// `1/|ln r0|`; absent on the unit circle.
    pub tau: Option<f64>,
    pub is_schur: bool,
    pub condition_flags: [bool; 3],
    /// Some pair of multipliers is closer than [`CLUSTER_SEPARATION`].
    pub clustered: bool,
}

/// `J` and `D` for a prescribed cycle.
pub fn jacobian_parts(plant: &PlantParams, spec: &CycleSpec) -> Result<JacobianParts> {
    let e = expm_at(plant, spec.period())?;
    let x = fixed_point(plant, spec)?;
    Ok(JacobianParts { j: e.column(0), d: plant.matrix_a().mul_vec(x.to_array()) })
}

/// Jacobian of the map at a fixed point, directly from the model.
pub fn jacobian(model: &IgoModel, x: &StateVec) -> Result<Matrix3> {
    let residual = map_q(model, x)?.distance(x);
    let tolerance = FIXED_POINT_GATE * (1.0 + x.max_norm());
    if !(residual <= tolerance) {
        return Err(IgoError::NotAFixedPoint { residual, tolerance });
    }
    let z0 = x.x3;
    let period = model.hill.phi(z0)?;
    let slopes = Slopes::new(model.hill.f_prime(z0)?, model.hill.phi_prime(z0)?)?;
    let e = expm_at(&model.plant, period)?;
    Ok(jacobian_direct(&model.plant, &e, x, &slopes))
}

/// `e^{AT}(I + F' B C) + Φ' A X C`
fn jacobian_direct(plant: &PlantParams, e: &Matrix3, x: &StateVec, s: &Slopes) -> Matrix3 {
    let bc = Matrix3::outer(INPUT_B, OUTPUT_C).scale(s.f_prime);
    let ax = plant.matrix_a().mul_vec(x.to_array());
    *e * (Matrix3::identity() + bc) + Matrix3::outer(ax, OUTPUT_C).scale(s.phi_prime)
}

/// Jacobian through the gain parameterization `e^{AT} + K C`.
pub fn jacobian_from_slopes(plant: &PlantParams, spec: &CycleSpec, s: &Slopes) -> Result<Matrix3> {
    let e = expm_at(plant, spec.period())?;
    let parts = JacobianParts { j: e.column(0), d: plant.matrix_a().mul_vec(fixed_point(plant, spec)?.to_array()) };
    Ok(e + Matrix3::outer(parts.gain(s), OUTPUT_C))
}

/// Direct-form Jacobian for prescribed slopes at the prescribed cycle.
pub fn jacobian_with_slopes(plant: &PlantParams, spec: &CycleSpec, s: &Slopes) -> Result<Matrix3> {
    let e = expm_at(plant, spec.period())?;
    let x = fixed_point(plant, spec)?;
    Ok(jacobian_direct(plant, &e, &x, s))
}

/// Closed-form coefficients of trace, determinant and principal-minor sum.
///
/// The determinant uses `C e^{-AT} A X = C A X = d3`, which holds because
/// `e^{-AT} X = X + λB` at the fixed point and `C A B = 0`.
pub fn invariant_coefficients(plant: &PlantParams, spec: &CycleSpec) -> Result<InvariantCoefficients> {
    let t = spec.period();
    let parts = jacobian_parts(plant, spec)?;
    let (j, d) = (parts.j, parts.d);
    let [a1, a2, a3] = plant.rates();
    let [e1, e2, e3] = [a1, a2, a3].map(|a| (-a * t).exp());

    let trace = [e1 + e2 + e3, j[2], d[2]];
    let det = [(-(a1 + a2 + a3) * t).exp(), (-(a1 + a2 + a3) * t).exp() * d[2]];

    let e23 = exp_dd1(-a2 * t, -a3 * t)?;
    let e123 = exp_dd2(-a1 * t, -a2 * t, -a3 * t)?;
    let psi = |v: [f64; 3]| (e1 + e2) * v[2] - plant.g2() * t * (e23 * v[1] + plant.g1() * t * e123 * v[0]);
    let minor_const = (-(a1 + a2) * t).exp() + (-(a1 + a3) * t).exp() + (-(a2 + a3) * t).exp();
    Ok(InvariantCoefficients { trace, det, minor_sum: [minor_const, psi(j), psi(d)] })
}

/// Trace, determinant and `M` of the Jacobian from the closed-form expressions.
pub fn invariants_closed_form(plant: &PlantParams, spec: &CycleSpec, s: &Slopes) -> Result<Invariants> {
    Ok(invariant_coefficients(plant, spec)?.evaluate(s))
}

/// Schur stability of a real 3×3 matrix from its invariants.
pub fn schur_test(m: &Matrix3) -> SchurVerdict {
    schur_from_invariants(&Invariants::of(m))
}

pub fn schur_from_invariants(inv: &Invariants) -> SchurVerdict {
    let Invariants { trace: tr, minor_sum: m, det } = *inv;
    let flags = [det.abs() < 1.0, (tr + det).abs() < 1.0 + m, (tr * det - m).abs() < 1.0 - det * det];
    SchurVerdict { is_schur: flags.iter().all(|&f| f), flags }
}

fn char_poly(inv: &Invariants, rho: Complex64) -> (Complex64, Complex64) {
    let p = ((rho - inv.trace) * rho + inv.minor_sum) * rho - inv.det;
    let dp = (rho * 3.0 - 2.0 * inv.trace) * rho + inv.minor_sum;
    (p, dp)
}

/// Residual of the characteristic cubic `ρ³ - tr ρ² + M ρ - det` at `rho`.
pub fn char_poly_residual(inv: &Invariants, rho: Complex64) -> f64 {
    char_poly(inv, rho).0.norm()
}

/// Roots of `ρ³ - tr ρ² + M ρ - det`, sorted by decreasing modulus.
pub fn cubic_roots(inv: &Invariants) -> [Complex64; 3] {
    let b = -inv.trace;
    let c = inv.minor_sum;
    let d = -inv.det;
    let shift = -b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);

    let mut roots = if disc > 0.0 {
        let u = -q.signum() * (q.abs() / 2.0 + disc.sqrt()).cbrt();
        let v = if u != 0.0 { -p / (3.0 * u) } else { 0.0 };
        let re = -(u + v) / 2.0 + shift;
        let im = 3f64.sqrt() / 2.0 * (u - v);
        [Complex64::new(u + v + shift, 0.0), Complex64::new(re, im), Complex64::new(re, -im)]
    } else if p == 0.0 {
        [Complex64::new(shift, 0.0); 3]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        [0.0, 1.0, 2.0].map(|k| Complex64::new(r * (phi - 2.0 * std::f64::consts::PI * k / 3.0).cos() + shift, 0.0))
    };

    for rho in roots.iter_mut() {
        let (p0, dp) = char_poly(inv, *rho);
        if dp.norm() > 0.0 {
            let cand = *rho - p0 / dp;
            let cand = if rho.im == 0.0 { Complex64::new(cand.re, 0.0) } else { cand };
            if char_poly(inv, cand).0.norm() < p0.norm() {
                *rho = cand;
            }
        }
    }
    roots.sort_by(|x, y| y.norm().total_cmp(&x.norm()).then(y.im.total_cmp(&x.im)));
    roots
}

/// Eigenvalues (multipliers) of a 3×3 matrix.
pub fn multipliers(m: &Matrix3) -> [Complex64; 3] {
    cubic_roots(&Invariants::of(m))
}

/// `τ = 1/|ln r0|`, the e-folding number of impulses.
pub fn convergence_time(r0: f64) -> Result<f64> {
    let lambda = r0.ln();
    if !(lambda.abs() >= 1e-12) {
        return Err(IgoError::MarginalStability { r0 });
    }
    Ok(1.0 / lambda.abs())
}

pub fn spectral_radius(roots: &[Complex64; 3]) -> f64 {
    roots.iter().map(|r| r.norm()).fold(0.0, f64::max)
}

fn is_clustered(roots: &[Complex64; 3]) -> bool {
    (0..3).any(|i| (i + 1..3).any(|j| (roots[i] - roots[j]).norm() < CLUSTER_SEPARATION))
}

/// Full stability summary of a Jacobian.
pub fn stability_report(jac: &Matrix3) -> StabilityReport {
    report_with_invariants(jac, Invariants::of(jac))
}

pub(crate) fn report_with_invariants(jac: &Matrix3, inv: Invariants) -> StabilityReport {
    let verdict = schur_from_invariants(&inv);
    let roots = cubic_roots(&inv);
    let r0 = spectral_radius(&roots);
    StabilityReport {
        jacobian: *jac,
        trace: inv.trace,
        minor_sum: inv.minor_sum,
        det: inv.det,
        multipliers: roots,
        r0,
        log_r0: r0.ln(),
        tau: convergence_time(r0).ok(),
        is_schur: verdict.is_schur,
        condition_flags: verdict.flags,
        clustered: is_clustered(&roots),
    }
}
