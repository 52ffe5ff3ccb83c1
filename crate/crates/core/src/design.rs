//! Design of Hill modulation laws that realize a prescribed, orbitally
//! stable 1-cycle.
//!
//! The procedure fixes the plant and `(λ, T)`, computes the fixed point and
//! `z0`, picks slopes `(F'(z0), Φ'(z0))` inside the Schur region, solves the
//! Hill slope equations for the half-rise points and finally shifts the
//! offsets `k1`, `k3` so that `Φ(z0) = T` and `F(z0) = λ`.
//!
//! With `η = (z0/h)^p` the slope conditions become quadratics with unit
//! constant term,
//!
//! ```text
//! η² + 2(1 - θΦ)η + 1 = 0,   θΦ = k2 pΦ / (2 z0 Φ')
//! η² + 2(1 + θF)η + 1 = 0,   θF = k4 pF / (2 z0 F')
//! ```
//!
//! so the two roots of each are reciprocal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycle::{fixed_point, output_z0, solve_one_cycle, CycleSolution, CycleSpec};
use crate::error::{IgoError, Result};
use crate::model::{HillParams, IgoModel, PlantParams};
use crate::stability::{
    cubic_roots, invariant_coefficients, jacobian, jacobian_parts, schur_from_invariants, spectral_radius,
    stability_report, Slopes, StabilityReport,
};

/// Which of the two admissible half-rise points to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootChoice {
    /// Larger `h`: the cycle sits on the lower, shallower part of the curve.
    #[default]
    LargerH,
    SmallerH,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HillSolveDiagnostics {
    /// Selected `η = (z0/h)^p`.
    pub eta: f64,
    pub theta: f64,
    /// Positive roots of the slope quadratic, largest first.
    pub roots: Vec<f64>,
    /// Half-rise points `z0 / η^{1/p}` in root order.
    pub h_candidates: Vec<f64>,
    /// Index into `roots` of the selected root.
    pub chosen_root: usize,
    pub choice_reason: String,
}

impl HillSolveDiagnostics {
    pub fn h(&self) -> f64 {
        self.h_candidates[self.chosen_root]
    }

    fn select(mut self, choice: RootChoice) -> Self {
        if self.h_candidates.len() > 1 {
            let (idx, why) = match choice {
                RootChoice::LargerH => (1, "larger h (default)"),
                RootChoice::SmallerH => (0, "smaller h (requested)"),
            };
            self.chosen_root = idx;
            self.eta = self.roots[idx];
            self.choice_reason = why.to_string();
        }
        self
    }
}

/// `pΦ >= 4 z0 Φ'/k2`: the Φ-side quadratic has positive real roots.
pub fn feasibility_phi(z0: f64, k2: f64, p_phi: f64, phi_prime: f64) -> bool {
    if phi_prime == 0.0 {
        return true;
    }
    phi_prime > 0.0 && p_phi >= 4.0 * z0 * phi_prime / k2
}

/// `pF >= -4 z0 F'/k4 > 0`: the F-side quadratic has positive real roots.
pub fn feasibility_f(z0: f64, k4: f64, p_f: f64, f_prime: f64) -> bool {
    f_prime < 0.0 && p_f >= -4.0 * z0 * f_prime / k4
}

/// Roots `m ± sqrt(m² - 1)` of `η² - 2mη + 1`, larger first; the smaller
/// one is taken as the reciprocal to avoid cancellation.
fn reciprocal_pair(m: f64) -> Vec<f64> {
    let disc = (m * m - 1.0).max(0.0);
    if disc == 0.0 {
        return vec![m];
    }
    let big = m + disc.sqrt();
    vec![big, 1.0 / big]
}

fn diagnostics(z0: f64, p: f64, theta: f64, roots: Vec<f64>) -> HillSolveDiagnostics {
    let h_candidates = roots.iter().map(|eta| z0 / eta.powf(1.0 / p)).collect();
    HillSolveDiagnostics {
        eta: roots[0],
        theta,
        roots,
        h_candidates,
        chosen_root: 0,
        choice_reason: "double root".to_string(),
    }
}

/// Half-rise points of `Φ` giving slope `phi_prime` at `z0`.
pub fn solve_hill_phi(z0: f64, k2: f64, p_phi: f64, phi_prime: f64) -> Result<HillSolveDiagnostics> {
    if phi_prime == 0.0 {
        return Err(IgoError::Infeasible {
            step: "Step 6 (Φ half-rise)",
            reason: "zero slope is reached only in the limit h → 0 or h → ∞".to_string(),
        });
    }
    if !feasibility_phi(z0, k2, p_phi, phi_prime) {
        return Err(IgoError::Infeasible {
            step: "Step 6 (Φ half-rise)",
            reason: format!("p_phi = {p_phi} is below 4 z0 Φ'/k2 = {}", 4.0 * z0 * phi_prime / k2),
        });
    }
    let theta = k2 * p_phi / (2.0 * z0 * phi_prime);
    Ok(diagnostics(z0, p_phi, theta, reciprocal_pair(theta - 1.0)))
}

/// Half-rise points of `F` giving slope `f_prime` at `z0`.
pub fn solve_hill_f(z0: f64, k4: f64, p_f: f64, f_prime: f64) -> Result<HillSolveDiagnostics> {
    if !(f_prime < 0.0) {
        return Err(IgoError::Infeasible {
            step: "Step 6 (F half-rise)",
            reason: format!("F'(z0) must be negative, got {f_prime}"),
        });
    }
    if !feasibility_f(z0, k4, p_f, f_prime) {
        return Err(IgoError::Infeasible {
            step: "Step 6 (F half-rise)",
            reason: format!("p_f = {p_f} is below -4 z0 F'/k4 = {}", -4.0 * z0 * f_prime / k4),
        });
    }
    let theta = k4 * p_f / (2.0 * z0 * f_prime);
    Ok(diagnostics(z0, p_f, theta, reciprocal_pair(-(theta + 1.0))))
}

/// Offsets `(k1, k3)` enforcing `Φ(z0) = T` and `F(z0) = λ`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_offsets(
    z0: f64,
    spec: &CycleSpec,
    k2: f64,
    h_phi: f64,
    p_phi: f64,
    k4: f64,
    h_f: f64,
    p_f: f64,
) -> Result<(f64, f64)> {
    let eta_phi = (z0 / h_phi).powf(p_phi);
    let eta_f = (z0 / h_f).powf(p_f);
    let k1 = spec.period() - k2 * eta_phi / (1.0 + eta_phi);
    let k3 = spec.lambda() - k4 / (1.0 + eta_f);
    if !(k1 > 0.0) {
        return Err(IgoError::Infeasible {
            step: "Step 7 (Φ offset)",
            reason: format!("T = {} is not above k2 η/(1+η); k1 would be {k1}", spec.period()),
        });
    }
    if !(k3 > 0.0) {
        return Err(IgoError::Infeasible {
            step: "Step 7 (F offset)",
            reason: format!("λ = {} is not above k4/(1+η); k3 would be {k3}", spec.lambda()),
        });
    }
    Ok((k1, k3))
}

/// Hill-realizability constraint applied during the slope search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillConstraint {
    pub z0: f64,
    pub k2: f64,
    pub p_phi: f64,
    pub k4: f64,
    pub p_f: f64,
}

impl HillConstraint {
    fn admits(&self, s: &Slopes) -> bool {
        s.phi_prime() > 0.0
            && feasibility_phi(self.z0, self.k2, self.p_phi, s.phi_prime())
            && feasibility_f(self.z0, self.k4, self.p_f, s.f_prime())
    }
}

/// Rectangular slope grid, optionally followed by local zoom passes around
/// the best cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlopeSearch {
    pub f_prime_range: (f64, f64),
    pub f_prime_points: usize,
    pub phi_prime_range: (f64, f64),
    pub phi_prime_points: usize,
    /// Number of 11×11 zoom passes, each shrinking the cell by 5.
    pub refine_levels: usize,
    #[serde(skip)]
    pub constraint: Option<HillConstraint>,
}

impl Default for SlopeSearch {
    fn default() -> Self {
        Self {
            f_prime_range: (-1.0, 0.0),
            f_prime_points: 101,
            phi_prime_range: (0.0, 5.0),
            phi_prime_points: 101,
            refine_levels: 8,
            constraint: None,
        }
    }
}

fn grid(range: (f64, f64), n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![range.0];
    }
    (0..n).map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64).collect()
}

fn step(range: (f64, f64), n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        (range.1 - range.0) / (n - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeChoice {
    pub slopes: Slopes,
    pub r0: f64,
}

type Candidate = (f64, f64, usize, Slopes);

fn better(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// Search for the Schur-stable slope pair with the smallest spectral
/// radius; ties go to the smaller slope norm, then to grid order.
pub fn choose_slopes(plant: &PlantParams, spec: &CycleSpec, search: &SlopeSearch) -> Result<SlopeChoice> {
    let coeffs = invariant_coefficients(plant, spec)?;
    let score = |f: f64, p: f64, idx: usize| -> Option<Candidate> {
        let s = Slopes::new(f, p).ok()?;
        if let Some(c) = &search.constraint {
            if !c.admits(&s) {
                return None;
            }
        }
        let inv = coeffs.evaluate(&s);
        if !schur_from_invariants(&inv).is_schur {
            return None;
        }
        let r0 = spectral_radius(&cubic_roots(&inv));
        (r0 < 1.0).then_some((r0, s.norm(), idx, s))
    };
    let scan = |fr: (f64, f64), nf: usize, pr: (f64, f64), np: usize| -> Option<Candidate> {
        let fs = grid(fr, nf);
        let ps = grid(pr, np);
        (0..fs.len() * ps.len())
            .into_par_iter()
            .filter_map(|idx| score(fs[idx / ps.len()], ps[idx % ps.len()], idx))
            .min_by(better)
    };

    let (fr, pr) = (search.f_prime_range, search.phi_prime_range);
    let mut best = scan(fr, search.f_prime_points, pr, search.phi_prime_points).ok_or(IgoError::NoStableSlopes)?;
    let mut df = step(fr, search.f_prime_points);
    let mut dp = step(pr, search.phi_prime_points);
    for _ in 0..search.refine_levels {
        let (f0, p0) = (best.3.f_prime(), best.3.phi_prime());
        let zf = ((f0 - df).max(fr.0), (f0 + df).min(fr.1));
        let zp = ((p0 - dp).max(pr.0), (p0 + dp).min(pr.1));
        if let Some(c) = scan(zf, 11, zp, 11) {
            if c.0 < best.0 {
                best = c;
            }
        }
        df /= 5.0;
        dp /= 5.0;
    }
    Ok(SlopeChoice { slopes: best.3, r0: best.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignOptions {
    pub p_phi: f64,
    pub p_f: f64,
    pub k2: f64,
    pub k4: f64,
    /// Fixed slopes; searched on `search` when absent.
    pub slopes: Option<Slopes>,
    pub root: RootChoice,
    /// Reject slopes outside the Schur region.
    pub require_stable: bool,
    /// Offsets the caller expects; compared against the calibrated ones.
    pub k1: Option<f64>,
    pub k3: Option<f64>,
    pub search: SlopeSearch,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            p_phi: 2.0,
            p_f: 2.0,
            k2: 40.0,
            k4: 2.0,
            slopes: None,
            root: RootChoice::default(),
            require_stable: true,
            k1: None,
            k3: None,
            search: SlopeSearch::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub model: IgoModel,
    pub slopes: Slopes,
    pub cycle: CycleSolution,
    pub stability: StabilityReport,
    pub phi_diagnostics: HillSolveDiagnostics,
    pub f_diagnostics: HillSolveDiagnostics,
    pub warnings: Vec<String>,
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Run the design procedure for `plant` and the prescribed cycle.
pub fn design(plant: &PlantParams, spec: &CycleSpec, opts: &DesignOptions) -> Result<DesignResult> {
    let mut warnings = Vec::new();
    if !(opts.k2 > 0.0 && opts.k4 > 0.0) {
        return Err(IgoError::Infeasible {
            step: "Step 4 (modulation structure)",
            reason: format!("spans must be positive, got k2 = {}, k4 = {}", opts.k2, opts.k4),
        });
    }

    // Step 3
    let x = fixed_point(plant, spec)?;
    let z0 = x.x3;
    let z0_sum = output_z0(plant, spec)?;
    if !rel_close(z0, z0_sum, 1e-9) {
        warnings.push(format!("fixed-point x3 = {z0} and partial-fraction z0 = {z0_sum} differ"));
    }

    // Steps 5-6: slopes inside the Schur region
    let coeffs = invariant_coefficients(plant, spec)?;
    let slopes = match opts.slopes {
        Some(s) => s,
        None => {
            let search = SlopeSearch {
                constraint: Some(HillConstraint { z0, k2: opts.k2, p_phi: opts.p_phi, k4: opts.k4, p_f: opts.p_f }),
                ..opts.search
            };
            choose_slopes(plant, spec, &search)?.slopes
        }
    };
    let predicted = coeffs.evaluate(&slopes);
    let verdict = schur_from_invariants(&predicted);
    if !verdict.is_schur {
        let msg = format!(
            "slopes F' = {}, Φ' = {} violate the Schur conditions {:?} (tr = {})",
            slopes.f_prime(),
            slopes.phi_prime(),
            verdict.flags,
            predicted.trace
        );
        if opts.require_stable {
            return Err(IgoError::Infeasible { step: "Step 5 (Schur conditions)", reason: msg });
        }
        warnings.push(msg);
    }
    let parts = jacobian_parts(plant, spec)?;
    if parts.gain(&slopes).iter().any(|&k| k > 0.0) {
        warnings.push("feedback gain K = F'J + Φ'D has a positive component".to_string());
    }

    // Steps 4 and 6: half-rise points
    let phi_diag = solve_hill_phi(z0, opts.k2, opts.p_phi, slopes.phi_prime())?.select(opts.root);
    let f_diag = solve_hill_f(z0, opts.k4, opts.p_f, slopes.f_prime())?.select(opts.root);
    let (h_phi, h_f) = (phi_diag.h(), f_diag.h());

    // Step 7
    let (k1, k3) = calibrate_offsets(z0, spec, opts.k2, h_phi, opts.p_phi, opts.k4, h_f, opts.p_f)?;
    for (name, given, got) in [("k1", opts.k1, k1), ("k3", opts.k3, k3)] {
        if let Some(given) = given {
            if !rel_close(given, got, 1e-9) {
                warnings
                    .push(format!("supplied {name} = {given} does not interpolate the cycle; recalibrated to {got}"));
            }
        }
    }
    let hill = HillParams::new(k1, opts.k2, k3, opts.k4, h_phi, opts.p_phi, h_f, opts.p_f)?;
    let model = IgoModel::new(*plant, hill);

    // Verification on the assembled model
    let check = |what: &str, got: f64, want: f64, tol: f64| -> Result<()> {
        if rel_close(got, want, tol) {
            Ok(())
        } else {
            Err(IgoError::Infeasible { step: "verification", reason: format!("{what} = {got}, expected {want}") })
        }
    };
    check("F(z0)", hill.f_mod(z0)?, spec.lambda(), 1e-9)?;
    check("Φ(z0)", hill.phi(z0)?, spec.period(), 1e-9)?;
    check("F'(z0)", hill.f_prime(z0)?, slopes.f_prime(), 1e-9)?;
    check("Φ'(z0)", hill.phi_prime(z0)?, slopes.phi_prime(), 1e-9)?;
    let cycle = solve_one_cycle(&model)?;
    check("realized λ", cycle.lambda, spec.lambda(), 1e-6)?;
    check("realized T", cycle.period, spec.period(), 1e-6)?;

    let jac = jacobian(&model, &cycle.x)?;
    let stability = stability_report(&jac);
    if stability.is_schur != (stability.r0 < 1.0) {
        warnings
            .push(format!("Schur conditions ({}) and spectral radius {} disagree", stability.is_schur, stability.r0));
    }
    if stability.is_schur != verdict.is_schur {
        warnings.push("closed-form and assembled Jacobian verdicts disagree".to_string());
    }

    Ok(DesignResult { model, slopes, cycle, stability, phi_diagnostics: phi_diag, f_diagnostics: f_diag, warnings })
}
