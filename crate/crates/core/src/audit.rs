//! Recomputation of the reference worked example: every printed quantity is
//! evaluated on its own and compared with what the toolkit produces.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cycle::{fixed_point, output_z0, CycleSpec};
use crate::design::{solve_hill_f, solve_hill_phi};
use crate::error::Result;
use crate::model::{HillParams, PlantParams};
use crate::stability::{cubic_roots, invariant_coefficients, Slopes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Match,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub key: &'static str,
    pub quantity: &'static str,
    pub printed: f64,
    pub computed: f64,
    /// Relative tolerance, or absolute for claims encoded as 0/1.
    pub tolerance: f64,
    pub status: AuditStatus,
    pub note: &'static str,
}

impl AuditRow {
    fn numeric(key: &'static str, quantity: &'static str, printed: f64, computed: f64, tolerance: f64) -> Self {
        let ok = (computed - printed).abs() <= tolerance * printed.abs();
        Self {
            key,
            quantity,
            printed,
            computed,
            tolerance,
            status: if ok { AuditStatus::Match } else { AuditStatus::Mismatch },
            note: "",
        }
    }

    /// A yes/no claim: printed 1 means the source asserts it holds.
    fn claim(key: &'static str, quantity: &'static str, holds: bool) -> Self {
        Self {
            key,
            quantity,
            printed: 1.0,
            computed: if holds { 1.0 } else { 0.0 },
            tolerance: 0.0,
            status: if holds { AuditStatus::Match } else { AuditStatus::Mismatch },
            note: "",
        }
    }

    fn note(mut self, note: &'static str) -> Self {
        self.note = note;
        self
    }

    pub fn is_flagged(&self) -> bool {
        self.status == AuditStatus::Mismatch
    }
}

/// Plant, cycle and modulation parameters of the worked example.
pub struct ReferenceExample {
    pub plant: PlantParams,
    pub spec: CycleSpec,
    pub slopes: Slopes,
    pub hill: HillParams,
}

pub fn reference_example() -> Result<ReferenceExample> {
    Ok(ReferenceExample {
        plant: PlantParams::new(0.08, 0.15, 0.12, 2.0, 0.5)?,
        spec: CycleSpec::new(4.66, 66.75)?,
        slopes: Slopes::new(-0.1143, 2.2852)?,
        hill: HillParams::new(60.0, 40.0, 3.0, 2.0, 4.112, 2.0, 4.112, 2.0)?,
    })
}

pub fn audit_reference_example() -> Result<Vec<AuditRow>> {
    let ex = reference_example()?;
    let x = fixed_point(&ex.plant, &ex.spec)?;
    let z0 = output_z0(&ex.plant, &ex.spec)?;
    let c = invariant_coefficients(&ex.plant, &ex.spec)?;
    let inv = c.evaluate(&ex.slopes);
    let rho = cubic_roots(&inv);
    let (k2, k4, p) = (ex.hill.k2(), ex.hill.k4(), ex.hill.p_phi());
    // printed z0 is used downstream, as in the source
    let zp = 6.833;
    let h_phi = solve_hill_phi(zp, k2, p, ex.slopes.phi_prime())?;
    let h_f = solve_hill_f(zp, k4, p, ex.slopes.f_prime())?;
    let nearest = |hs: &[f64], target: f64| {
        hs.iter().copied().min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs())).unwrap()
    };

    Ok(vec![
        AuditRow::numeric("x1", "fixed point x1", 0.0225, x.x1, 1e-2),
        AuditRow::numeric("x2", "fixed point x2", 0.6360, x.x2, 1e-2),
        AuditRow::numeric("z0", "fixed point x3 = z0", 6.8330, z0, 1e-2),
        AuditRow::numeric("tr_0", "trace: constant term", 0.0052, c.trace[0], 2e-2),
        AuditRow::numeric("tr_f", "trace: F' coefficient", 1.4574, c.trace[1], 5e-3),
        AuditRow::numeric("tr_phi", "trace: Φ' coefficient", -0.5020, c.trace[2], 5e-3),
        AuditRow::numeric("det_0", "det: constant term", 7.1410e-11, c.det[0], 1e-2),
        AuditRow::numeric("det_phi", "det: Φ' coefficient", -0.172e-14, c.det[1], 5e-2)
            .note("assembled-matrix determinant gives e^{-ΣaT}·C e^{-AT}AX"),
        AuditRow::numeric("m_0", "M: constant term", 2.1528e-7, c.minor_sum[0], 5e-2)
            .note("only the e^{-(a1+a2)T} summand matches"),
        AuditRow::numeric("m_f", "M: F' coefficient", -0.1251e-4, c.minor_sum[1], 5e-2)
            .note("sign agrees, magnitude does not"),
        AuditRow::numeric("m_phi", "M: Φ' coefficient", 0.1460e-4, c.minor_sum[2], 5e-2)
            .note("sign agrees, magnitude does not"),
        AuditRow::claim(
            "m_positive",
            "M > 0 for all admissible slopes",
            c.minor_sum[0] > 0.0 && c.minor_sum[1] <= 0.0 && c.minor_sum[2] >= 0.0,
        ),
        AuditRow::claim("tr_bound", "|tr Q'| < 1 at the printed slopes", inv.trace.abs() < 1.0)
            .note("printed slopes give |tr| ≈ 1.31"),
        AuditRow::claim(
            "rho_range",
            "all multipliers in (-1, 0) at the printed slopes",
            rho.iter().all(|z| z.im == 0.0 && z.re > -1.0 && z.re < 0.0),
        )
        .note("dominant multiplier is below -1"),
        AuditRow::numeric("f_prime", "F'(z0) with h = 4.112", -0.1143, ex.hill.f_prime(zp)?, 1e-3),
        AuditRow::numeric("phi_prime", "Φ'(z0) with h = 4.112", 2.2852, ex.hill.phi_prime(zp)?, 1e-3),
        AuditRow::numeric("h_phi", "h from the Φ slope quadratic", 4.112, nearest(&h_phi.h_candidates, 4.112), 1e-3),
        AuditRow::numeric("h_f", "h from the F slope quadratic", 4.112, nearest(&h_f.h_candidates, 4.112), 2e-3),
        AuditRow::claim(
            "pf_bound",
            "p_F = 2 satisfies p_F < -4 z0 F'/k4 as printed",
            p < -4.0 * zp * ex.slopes.f_prime() / k4,
        )
        .note("inequality direction is reversed; p_F >= 1.562 is what gives real roots"),
        AuditRow::numeric("phi_z0", "Φ(z0) = T with k1 = 60", ex.spec.period(), ex.hill.phi(zp)?, 1e-3)
            .note("interpolation needs k1 ≈ 37.38"),
        AuditRow::numeric("f_z0", "F(z0) = λ with k3 = 3", ex.spec.lambda(), ex.hill.f_mod(zp)?, 1e-3)
            .note("interpolation needs k3 ≈ 4.128"),
    ])
}

pub fn format_audit(rows: &[AuditRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<48} {:>14} {:>14} {:>8}  note", "quantity", "printed", "computed", "status");
    for r in rows {
        let status = match r.status {
            AuditStatus::Match => "ok",
            AuditStatus::Mismatch => "MISMATCH",
        };
        let _ = writeln!(s, "{:<48} {:>14.6e} {:>14.6e} {:>8}  {}", r.quantity, r.printed, r.computed, status, r.note);
    }
    let flagged = rows.iter().filter(|r| r.is_flagged()).count();
    let _ = writeln!(s, "{flagged} of {} rows flagged", rows.len());
    s
}
