//! Impulse-to-impulse map and its 1-cycle fixed point.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, IgoError, Result};
use crate::matfun::{exp_dd1, exp_dd2, expm_at, opitz_scaled};
use crate::model::{IgoModel, PlantParams, INPUT_B};

/// Continuous state `x = (x1, x2, x3)`; `x3` is the measured output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVec {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl StateVec {
    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn max_norm(&self) -> f64 {
        self.x1.abs().max(self.x2.abs()).max(self.x3.abs())
    }

    pub fn is_positive(&self) -> bool {
        self.x1 > 0.0 && self.x2 > 0.0 && self.x3 > 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.x1 * s, self.x2 * s, self.x3 * s)
    }

    /// Max-norm distance.
    pub fn distance(&self, other: &StateVec) -> f64 {
        (self.x1 - other.x1).abs().max((self.x2 - other.x2).abs()).max((self.x3 - other.x3).abs())
    }
}

impl From<[f64; 3]> for StateVec {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCycleSpec {
    lambda: f64,
    #[serde(rename = "T")]
    period: f64,
}

/// Prescribed 1-cycle: impulse weight `λ` and period `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCycleSpec")]
pub struct CycleSpec {
    lambda: f64,
    #[serde(rename = "T")]
    period: f64,
}

impl TryFrom<RawCycleSpec> for CycleSpec {
    type Error = IgoError;
    fn try_from(r: RawCycleSpec) -> Result<Self> {
        CycleSpec::new(r.lambda, r.period)
    }
}

impl CycleSpec {
    pub fn new(lambda: f64, period: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(invalid("lambda", format!("impulse weight must be positive, got {lambda}")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(invalid("T", format!("period must be positive, got {period}")));
        }
        Ok(Self { lambda, period })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

/// A located 1-cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSolution {
    /// Pre-jump state at firing.
    pub x: StateVec,
    pub z0: f64,
    pub lambda: f64,
    #[serde(rename = "T")]
    pub period: f64,
    /// `max|Q(X) - X|`
    pub residual: f64,
}

/// `Q(ξ) = e^{AΦ(Cξ)} (ξ + F(Cξ) B)`.
pub fn map_q(model: &IgoModel, x: &StateVec) -> Result<StateVec> {
    let z = x.x3;
    let period = model.hill.phi(z)?;
    let weight = model.hill.f_mod(z)?;
    let e = expm_at(&model.plant, period)?;
    let jumped = [x.x1 + weight * INPUT_B[0], x.x2, x.x3];
    Ok(e.mul_vec(jumped).into())
}

/// Fixed point `X = λ (e^{-AT} - I)^{-1} B = λ μ(AT) B` for a prescribed cycle.
pub fn fixed_point(plant: &PlantParams, spec: &CycleSpec) -> Result<StateVec> {
    let mu_at = opitz_scaled(|z| 1.0 / (-z).exp_m1(), plant, spec.period)?;
    let col = mu_at.column(0);
    Ok(StateVec::new(spec.lambda * col[0], spec.lambda * col[1], spec.lambda * col[2]))
}

/// Output at firing, `z0 = λ g1 g2 Σ α_i / (e^{a_i T} - 1)` with
/// `α_i = Π_{j≠i} 1/(a_j - a_i)`.
pub fn output_z0(plant: &PlantParams, spec: &CycleSpec) -> Result<f64> {
    Ok(spec.lambda * unit_output(plant, spec.period))
}

/// `C (e^{-AT} - I)^{-1} B`: output at firing per unit impulse weight.
fn unit_output(plant: &PlantParams, period: f64) -> f64 {
    let a = plant.rates();
    let sum: f64 = (0..3)
        .map(|i| {
            let alpha: f64 = (0..3).filter(|&j| j != i).map(|j| 1.0 / (a[j] - a[i])).product();
            alpha / (a[i] * period).exp_m1()
        })
        .sum();
    plant.g1() * plant.g2() * sum
}

/// Expanded closed forms of the second and third fixed-point components.
///
/// ```text
/// x2 = λ g1 T e[-a1T,-a2T] / ((1-e^{-a1T})(1-e^{-a2T}))
/// x3 = λ g1 g2 T² / Π(1-e^{-aiT}) · (e[-a1T,-a2T,-a3T] + e[-(a1+a2)T,-(a1+a3)T,-(a2+a3)T])
/// ```
pub fn fixed_point_expanded(plant: &PlantParams, spec: &CycleSpec) -> Result<(f64, f64)> {
    let t = spec.period;
    let [a1, a2, a3] = plant.rates();
    let q = |a: f64| -(-a * t).exp_m1();
    let x2 = spec.lambda * plant.g1() * t * exp_dd1(-a1 * t, -a2 * t)? / (q(a1) * q(a2));
    let e1 = exp_dd2(-a1 * t, -a2 * t, -a3 * t)?;
    let e2 = exp_dd2(-(a1 + a2) * t, -(a1 + a3) * t, -(a2 + a3) * t)?;
    let x3 = spec.lambda * plant.g1() * plant.g2() * t * t / (q(a1) * q(a2) * q(a3)) * (e1 + e2);
    Ok((x2, x3))
}

/// Right-hand side of the scalar cycle equation `z = C(e^{-AΦ(z)} - I)^{-1} B F(z)`.
pub fn cycle_rhs(model: &IgoModel, z: f64) -> Result<f64> {
    let period = model.hill.phi(z)?;
    let weight = model.hill.f_mod(z)?;
    Ok(weight * unit_output(&model.plant, period))
}

/// Upper end of the root bracket: the cycle equation's right-hand side
/// never exceeds its value at the extreme modulation `(F2, Φ1)`.
pub fn cycle_bracket(model: &IgoModel) -> (f64, f64) {
    let (phi1, _) = model.hill.period_bounds();
    let (_, f2) = model.hill.weight_bounds();
    let hi = f2 * unit_output(&model.plant, phi1);
    (1e-8 * hi, hi)
}

const BISECTION_MAX_ITER: usize = 200;

/// Locate the unique 1-cycle of a fully specified oscillator.
pub fn solve_one_cycle(model: &IgoModel) -> Result<CycleSolution> {
    let (mut lo, mut hi) = cycle_bracket(model);
    let g = |z: f64| -> Result<f64> { Ok(z - cycle_rhs(model, z)?) };
    let g_lo = g(lo)?;
    let g_hi = g(hi)?;
    if g_hi == 0.0 {
        lo = hi;
    } else if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(IgoError::BracketingFailure { lo, hi });
    }
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo < 1e-12 * (1.0 + lo) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    let spec = CycleSpec::new(model.hill.f_mod(z)?, model.hill.phi(z)?)?;
    let x = fixed_point(&model.plant, &spec)?;
    let residual = map_q(model, &x)?.distance(&x);
    Ok(CycleSolution { x, z0: x.x3, lambda: spec.lambda, period: spec.period, residual })
}
