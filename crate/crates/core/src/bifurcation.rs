//! Parameter sweeps, multiplier tracking and crossing detection.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycle::{output_z0, solve_one_cycle, CycleSpec};
use crate::error::{invalid, IgoError, Result};
use crate::matfun::node_tolerance;
use crate::model::{HillParams, IgoModel, PlantParams};
use crate::stability::{
    convergence_time, cubic_roots, invariant_coefficients, jacobian, schur_from_invariants, spectral_radius,
    Invariants, Slopes,
};

/// Shared-`h` parameter set for the `a3` continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBase {
    pub a1: f64,
    pub a2: f64,
    pub g1: f64,
    #[serde(default = "one")]
    pub g2: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub p: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HCalibration {
    pub h: f64,
    pub z0: f64,
    /// `F(z0)/λ - 1`
    pub f_residual: f64,
    pub warning: Option<String>,
}

/// Relative mismatch of `F(z0)` against `λ` above which a warning is raised.
pub const F_CONSISTENCY_TOL: f64 = 1e-3;

/// Shared half-rise point `h` placing `Φ(z0) = T` for the plant with this `a3`.
pub fn solve_h_for(a3: f64, base: &SweepBase, spec: &CycleSpec) -> Result<HCalibration> {
    let (t, lambda) = (spec.period(), spec.lambda());
    if !(t > base.k1 && t < base.k1 + base.k2) {
        return Err(IgoError::Infeasible {
            step: "h calibration",
            reason: format!("T = {t} outside the range of Φ ({}, {})", base.k1, base.k1 + base.k2),
        });
    }
    if !(lambda > base.k3 && lambda < base.k3 + base.k4) {
        return Err(IgoError::Infeasible {
            step: "h calibration",
            reason: format!("λ = {lambda} outside the range of F ({}, {})", base.k3, base.k3 + base.k4),
        });
    }
    let plant = PlantParams::new(base.a1, base.a2, a3, base.g1, base.g2)?;
    let z0 = output_z0(&plant, spec)?;
    let eta = (t - base.k1) / (base.k1 + base.k2 - t);
    let h = z0 / eta.powf(1.0 / base.p);
    let f = base.k3 + base.k4 / (1.0 + eta);
    let f_residual = f / lambda - 1.0;
    let warning = (f_residual.abs() > F_CONSISTENCY_TOL)
        .then(|| format!("F(z0) = {f} differs from λ = {lambda} by {:.2e} relative", f_residual.abs()));
    Ok(HCalibration { h, z0, f_residual, warning })
}

impl SweepBase {
    pub fn model(&self, a3: f64, h: f64) -> Result<IgoModel> {
        let plant = PlantParams::new(self.a1, self.a2, a3, self.g1, self.g2)?;
        let hill = HillParams::new(self.k1, self.k2, self.k3, self.k4, h, self.p, h, self.p)?;
        Ok(IgoModel::new(plant, hill))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub param: f64,
    pub h: Option<f64>,
    pub z0: Option<f64>,
    pub multipliers: Option<[Complex64; 3]>,
    pub r0: Option<f64>,
    pub tau: Option<f64>,
    pub is_schur: Option<bool>,
    pub error: Option<String>,
}

impl SweepRecord {
    fn failed(param: f64, err: impl ToString) -> Self {
        Self {
            param,
            h: None,
            z0: None,
            multipliers: None,
            r0: None,
            tau: None,
            is_schur: None,
            error: Some(err.to_string()),
        }
    }

    fn from_invariants(param: f64, h: Option<f64>, z0: f64, inv: &Invariants) -> Self {
        let multipliers = cubic_roots(inv);
        let r0 = spectral_radius(&multipliers);
        let (tau, error) = match convergence_time(r0) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            param,
            h,
            z0: Some(z0),
            multipliers: Some(multipliers),
            r0: Some(r0),
            tau,
            is_schur: Some(schur_from_invariants(inv).is_schur),
            error,
        }
    }
}

fn linspace(range: (f64, f64), n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![range.0],
        _ => (0..n).map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Multipliers of the realized 1-cycle at one `a3` value, with `h` recalibrated.
pub fn a3_point(a3: f64, base: &SweepBase, spec: &CycleSpec) -> Result<(HCalibration, Invariants)> {
    for a in [base.a1, base.a2] {
        if (a3 - a).abs() <= node_tolerance(a3, a) {
            return Err(IgoError::DegenerateNodes { z0: a3, z1: a });
        }
    }
    let cal = solve_h_for(a3, base, spec)?;
    let model = base.model(a3, cal.h)?;
    let cycle = solve_one_cycle(&model)?;
    let jac = jacobian(&model, &cycle.x)?;
    Ok((cal, Invariants::of(&jac)))
}

pub fn sweep_a3(base: &SweepBase, spec: &CycleSpec, range: (f64, f64), n_points: usize) -> Vec<SweepRecord> {
    linspace(range, n_points)
        .into_par_iter()
        .map(|a3| match a3_point(a3, base, spec) {
            Ok((cal, inv)) => {
                let mut rec = SweepRecord::from_invariants(a3, Some(cal.h), cal.z0, &inv);
                if let Some(w) = cal.warning {
                    rec.error.get_or_insert(w);
                }
                rec
            }
            Err(e) => SweepRecord::failed(a3, e),
        })
        .collect()
}

/// Slope-plane sweep along `Φ' = -(k2/k4) F'`.
pub fn sweep_slopes(
    plant: &PlantParams,
    spec: &CycleSpec,
    f_prime_range: (f64, f64),
    k2: f64,
    k4: f64,
    n_points: usize,
) -> Result<Vec<SweepRecord>> {
    if !(k2 > 0.0 && k4 > 0.0) {
        return Err(invalid("k2/k4", format!("must be positive, got {k2}, {k4}")));
    }
    if f_prime_range.0.max(f_prime_range.1) > 0.0 {
        return Err(invalid("f_prime_range", "F' must be non-positive over the range"));
    }
    let coeffs = invariant_coefficients(plant, spec)?;
    let z0 = output_z0(plant, spec)?;
    Ok(linspace(f_prime_range, n_points)
        .into_par_iter()
        .map(|f| match Slopes::new(f, -(k2 / k4) * f) {
            Ok(s) => SweepRecord::from_invariants(f, None, z0, &coeffs.evaluate(&s)),
            Err(e) => SweepRecord::failed(f, e),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingKind {
    /// Real multiplier through `-1`.
    PeriodDoubling,
    /// Real multiplier through `+1`.
    Fold,
    /// Complex pair through the unit circle.
    NeimarkSacker,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub kind: CrossingKind,
    pub param_lo: f64,
    pub param_hi: f64,
    /// Refined (or interpolated) critical parameter.
    pub param: f64,
    /// Critical multiplier at `param`.
    pub multiplier: Complex64,
}

const REAL_TOL: f64 = 1e-9;

fn is_real(z: &Complex64) -> bool {
    z.im.abs() <= REAL_TOL * (1.0 + z.re.abs())
}

/// Signed distance of the tracked multiplier from the boundary for `kind`,
/// with the multiplier it refers to.
fn indicator(kind: CrossingKind, rho: &[Complex64; 3]) -> Option<(f64, Complex64)> {
    let reals = rho.iter().filter(|z| is_real(z));
    match kind {
        CrossingKind::PeriodDoubling => reals.min_by(|a, b| a.re.total_cmp(&b.re)).map(|z| (z.re + 1.0, *z)),
        CrossingKind::Fold => reals.max_by(|a, b| a.re.total_cmp(&b.re)).map(|z| (z.re - 1.0, *z)),
        CrossingKind::NeimarkSacker => rho
            .iter()
            .filter(|z| !is_real(z))
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .map(|z| (z.norm() - 1.0, *z)),
    }
}

const KINDS: [CrossingKind; 3] = [CrossingKind::PeriodDoubling, CrossingKind::Fold, CrossingKind::NeimarkSacker];

/// Brackets between consecutive successful records where a multiplier
/// leaves or enters the unit circle. The critical parameter is linearly
/// interpolated.
pub fn detect_crossings(records: &[SweepRecord]) -> Vec<BifurcationPoint> {
    let ok: Vec<(f64, [Complex64; 3])> = records.iter().filter_map(|r| r.multipliers.map(|m| (r.param, m))).collect();
    let mut out = Vec::new();
    for w in ok.windows(2) {
        let ((p0, m0), (p1, m1)) = (w[0], w[1]);
        for kind in KINDS {
            let (Some((g0, z0)), Some((g1, z1))) = (indicator(kind, &m0), indicator(kind, &m1)) else {
                continue;
            };
            if g0 == 0.0 || g0.signum() != g1.signum() {
                let s = if g0 == g1 { 0.0 } else { g0 / (g0 - g1) };
                out.push(BifurcationPoint {
                    kind,
                    param_lo: p0,
                    param_hi: p1,
                    param: p0 + s * (p1 - p0),
                    multiplier: z0 + (z1 - z0) * s,
                });
            }
        }
    }
    out
}

/// Bisection on the parameter until the bracket is below `tol` and the
/// indicator is below `tol`, re-evaluating multipliers with `eval`.
pub fn refine_crossing<E>(point: &BifurcationPoint, eval: E, tol: f64) -> Result<BifurcationPoint>
where
    E: Fn(f64) -> Result<[Complex64; 3]>,
{
    let g = |p: f64| -> Result<(f64, Complex64)> {
        indicator(point.kind, &eval(p)?).ok_or(IgoError::BracketingFailure { lo: point.param_lo, hi: point.param_hi })
    };
    let (mut lo, mut hi) = (point.param_lo, point.param_hi);
    let (mut g_lo, _) = g(lo)?;
    let (mut mid, mut g_mid) = ((lo + hi) / 2.0, g((lo + hi) / 2.0)?);
    for _ in 0..200 {
        if (hi - lo).abs() < tol && g_mid.0.abs() < tol {
            break;
        }
        if g_mid.0 == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if g_mid.0.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid.0;
        } else {
            hi = mid;
        }
        mid = (lo + hi) / 2.0;
        g_mid = g(mid)?;
    }
    Ok(BifurcationPoint { kind: point.kind, param_lo: lo, param_hi: hi, param: mid, multiplier: g_mid.1 })
}

/// `a3` crossings refined on the full model.
pub fn a3_crossings(base: &SweepBase, spec: &CycleSpec, records: &[SweepRecord]) -> Result<Vec<BifurcationPoint>> {
    detect_crossings(records)
        .iter()
        .map(|p| refine_crossing(p, |a3| a3_point(a3, base, spec).map(|(_, inv)| cubic_roots(&inv)), 1e-6))
        .collect()
}

/// Slope-plane crossings refined on the closed-form invariants.
pub fn slope_crossings(
    plant: &PlantParams,
    spec: &CycleSpec,
    k2: f64,
    k4: f64,
    records: &[SweepRecord],
) -> Result<Vec<BifurcationPoint>> {
    let coeffs = invariant_coefficients(plant, spec)?;
    detect_crossings(records)
        .iter()
        .map(|p| refine_crossing(p, |f| Ok(cubic_roots(&coeffs.evaluate(&Slopes::new(f, -(k2 / k4) * f)?))), 1e-9))
        .collect()
}

fn opt<T: std::fmt::Debug>(v: Option<T>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn quoted(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_sweep_csv<W: Write>(mut w: W, records: &[SweepRecord]) -> io::Result<()> {
    writeln!(w, "param,h,z0,re_rho1,im_rho1,re_rho2,im_rho2,re_rho3,im_rho3,r0,tau,is_schur,error")?;
    for r in records {
        let rho: Vec<String> = match r.multipliers {
            Some(m) => m.iter().flat_map(|z| [format!("{:?}", z.re), format!("{:?}", z.im)]).collect(),
            None => vec![String::new(); 6],
        };
        writeln!(
            w,
            "{:?},{},{},{},{},{},{},{}",
            r.param,
            opt(r.h),
            opt(r.z0),
            rho.join(","),
            opt(r.r0),
            opt(r.tau),
            opt(r.is_schur),
            quoted(r.error.as_deref().unwrap_or(""))
        )?;
    }
    Ok(())
}
