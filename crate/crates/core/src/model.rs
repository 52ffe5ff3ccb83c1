//! Plant and pulse-modulation data model.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, IgoError, Result};
use crate::matfun::{node_tolerance, Matrix3};

/// Input vector `B`: impulses enter the first compartment only.
pub const INPUT_B: [f64; 3] = [1.0, 0.0, 0.0];
/// Output row `C`: the measured output is the third compartment.
pub const OUTPUT_C: [f64; 3] = [0.0, 0.0, 1.0];

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn default_g2() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    a1: f64,
    a2: f64,
    a3: f64,
    g1: f64,
    #[serde(default = "default_g2")]
    g2: f64,
}

/// Third-order cascade plant `ẋ = Ax`, `z = Cx` with
///
/// ```text
///     | -a1   0    0  |
/// A = |  g1  -a2   0  |
///     |  0    g2  -a3 |
/// ```
///
/// Decay rates must be positive and pairwise distinct, gains positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlant")]
pub struct PlantParams {
    a1: f64,
    a2: f64,
    a3: f64,
    g1: f64,
    g2: f64,
}

impl TryFrom<RawPlant> for PlantParams {
    type Error = IgoError;
    fn try_from(r: RawPlant) -> Result<Self> {
        PlantParams::new(r.a1, r.a2, r.a3, r.g1, r.g2)
    }
}

impl PlantParams {
    pub fn new(a1: f64, a2: f64, a3: f64, g1: f64, g2: f64) -> Result<Self> {
        positive("a1", a1)?;
        positive("a2", a2)?;
        positive("a3", a3)?;
        positive("g1", g1)?;
        positive("g2", g2)?;
        for (name, x, y) in [("a1/a2", a1, a2), ("a2/a3", a2, a3), ("a1/a3", a1, a3)] {
            if (x - y).abs() <= node_tolerance(x, y) {
                return Err(invalid(
                    if name == "a2/a3" { "a3" } else { "a2" },
                    format!("decay rates {name} must be distinct, got {x} and {y}"),
                ));
            }
        }
        Ok(Self { a1, a2, a3, g1, g2 })
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn a2(&self) -> f64 {
        self.a2
    }
    pub fn a3(&self) -> f64 {
        self.a3
    }
    pub fn g1(&self) -> f64 {
        self.g1
    }
    pub fn g2(&self) -> f64 {
        self.g2
    }

    pub fn rates(&self) -> [f64; 3] {
        [self.a1, self.a2, self.a3]
    }

    /// Spectrum of `A`.
    pub fn eigenvalues(&self) -> [f64; 3] {
        [-self.a1, -self.a2, -self.a3]
    }

    pub fn min_rate(&self) -> f64 {
        self.a1.min(self.a2).min(self.a3)
    }

    pub fn with_a3(&self, a3: f64) -> Result<Self> {
        Self::new(self.a1, self.a2, a3, self.g1, self.g2)
    }

    pub fn matrix_a(&self) -> Matrix3 {
        Matrix3([[-self.a1, 0.0, 0.0], [self.g1, -self.a2, 0.0], [0.0, self.g2, -self.a3]])
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHill {
    k1: f64,
    k2: f64,
    k3: f64,
    k4: f64,
    h_phi: f64,
    p_phi: f64,
    h_f: f64,
    p_f: f64,
}

/// Hill-type modulation laws
///
/// ```text
/// Φ(z) = k1 + k2 (z/hΦ)^pΦ / (1 + (z/hΦ)^pΦ)     (inter-impulse interval)
/// F(z) = k3 + k4 / (1 + (z/hF)^pF)              (impulse weight)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHill")]
pub struct HillParams {
    k1: f64,
    k2: f64,
    k3: f64,
    k4: f64,
    h_phi: f64,
    p_phi: f64,
    h_f: f64,
    p_f: f64,
}

impl TryFrom<RawHill> for HillParams {
    type Error = IgoError;
    fn try_from(r: RawHill) -> Result<Self> {
        HillParams::new(r.k1, r.k2, r.k3, r.k4, r.h_phi, r.p_phi, r.h_f, r.p_f)
    }
}

/// `r/(1+r)` for `r = (z/h)^p`, safe for overflow and underflow of `r`.
fn hill_rise(z: f64, h: f64, p: f64) -> f64 {
    let r = (z / h).powf(p);
    if r <= 1.0 {
        r / (1.0 + r)
    } else {
        1.0 / (1.0 + r.recip())
    }
}

/// `p r / (z (1+r)^2)`, the slope of `hill_rise` in `z`.
fn hill_slope(z: f64, h: f64, p: f64) -> f64 {
    let r = (z / h).powf(p);
    p / (z * (2.0 + r + r.recip()))
}

fn positive_output(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(IgoError::NonPositiveOutput { z })
    }
}

impl HillParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(k1: f64, k2: f64, k3: f64, k4: f64, h_phi: f64, p_phi: f64, h_f: f64, p_f: f64) -> Result<Self> {
        positive("k1", k1)?;
        positive("k2", k2)?;
        positive("k3", k3)?;
        positive("k4", k4)?;
        positive("h_phi", h_phi)?;
        positive("h_f", h_f)?;
        if !(p_phi.is_finite() && p_phi >= 1.0) {
            return Err(invalid("p_phi", format!("exponent must be >= 1, got {p_phi}")));
        }
        if !(p_f.is_finite() && p_f >= 1.0) {
            return Err(invalid("p_f", format!("exponent must be >= 1, got {p_f}")));
        }
        Ok(Self { k1, k2, k3, k4, h_phi, p_phi, h_f, p_f })
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }
    pub fn k2(&self) -> f64 {
        self.k2
    }
    pub fn k3(&self) -> f64 {
        self.k3
    }
    pub fn k4(&self) -> f64 {
        self.k4
    }
    pub fn h_phi(&self) -> f64 {
        self.h_phi
    }
    pub fn p_phi(&self) -> f64 {
        self.p_phi
    }
    pub fn h_f(&self) -> f64 {
        self.h_f
    }
    pub fn p_f(&self) -> f64 {
        self.p_f
    }

    /// `(Φ1, Φ2)`: shortest and longest inter-impulse interval.
    pub fn period_bounds(&self) -> (f64, f64) {
        (self.k1, self.k1 + self.k2)
    }

    /// `(F1, F2)`: smallest and largest impulse weight.
    pub fn weight_bounds(&self) -> (f64, f64) {
        (self.k3, self.k3 + self.k4)
    }

    /// Frequency modulation `Φ(z)`.
    pub fn phi(&self, z: f64) -> Result<f64> {
        positive_output(z)?;
        Ok(self.k1 + self.k2 * hill_rise(z, self.h_phi, self.p_phi))
    }

    /// Amplitude modulation `F(z)`.
    pub fn f_mod(&self, z: f64) -> Result<f64> {
        positive_output(z)?;
        Ok(self.k3 + self.k4 * (1.0 - hill_rise(z, self.h_f, self.p_f)))
    }

    pub fn phi_prime(&self, z: f64) -> Result<f64> {
        positive_output(z)?;
        Ok(self.k2 * hill_slope(z, self.h_phi, self.p_phi))
    }

    pub fn f_prime(&self, z: f64) -> Result<f64> {
        positive_output(z)?;
        Ok(-self.k4 * hill_slope(z, self.h_f, self.p_f))
    }
}

/// Plant closed by the pulse-modulated feedback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IgoModel {
    pub plant: PlantParams,
    pub hill: HillParams,
}

impl IgoModel {
    pub fn new(plant: PlantParams, hill: HillParams) -> Self {
        Self { plant, hill }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_hill() -> HillParams {
        HillParams::new(60.0, 40.0, 3.0, 2.0, 4.112, 2.0, 4.112, 2.0).unwrap()
    }

    #[test]
    fn plant_validation() {
        assert!(PlantParams::new(0.08, 0.15, 0.12, 2.0, 0.5).is_ok());
        assert!(PlantParams::new(-0.08, 0.15, 0.12, 2.0, 0.5).is_err());
        assert!(PlantParams::new(0.08, 0.15, 0.15, 2.0, 0.5).is_err());
        assert!(PlantParams::new(0.08, 0.15, 0.12, 0.0, 0.5).is_err());
        assert!(PlantParams::new(0.08, 0.15, f64::NAN, 1.0, 0.5).is_err());
    }

    #[test]
    fn structural_zeros_cb_cab() {
        let a = PlantParams::new(0.08, 0.15, 0.12, 2.0, 0.5).unwrap().matrix_a();
        let ab = a.mul_vec(INPUT_B);
        let a2b = a.mul_vec(ab);
        let dot = |v: [f64; 3]| v[2];
        assert_eq!(dot(INPUT_B), 0.0);
        assert_eq!(dot(ab), 0.0);
        assert_ne!(dot(a2b), 0.0);
    }

    #[test]
    fn hill_validation() {
        assert!(HillParams::new(60.0, 40.0, 3.0, 2.0, 4.0, 0.5, 4.0, 2.0).is_err());
        assert!(HillParams::new(60.0, 0.0, 3.0, 2.0, 4.0, 2.0, 4.0, 2.0).is_err());
        assert!(HillParams::new(60.0, 40.0, 3.0, 2.0, 4.0, 2.0, -1.0, 2.0).is_err());
    }

    #[test]
    fn phi_examples() {
        let h = reference_hill();
        assert!(h.phi(1e-12).unwrap() - 60.0 < 1e-9 * 40.0);
        assert!((h.phi(4.112).unwrap() - 80.0).abs() < 1e-12);
        assert!((h.phi(6.833).unwrap() - 89.365_433_579_157_5).abs() < 1e-9);
        assert!(matches!(h.phi(0.0), Err(IgoError::NonPositiveOutput { .. })));
        assert!(h.phi(-1.0).is_err());
    }

    #[test]
    fn f_examples() {
        let h = reference_hill();
        assert!((h.f_mod(1e-12).unwrap() - 5.0).abs() < 1e-12);
        assert!((h.f_mod(4.112).unwrap() - 4.0).abs() < 1e-12);
        assert!((h.f_mod(6.833).unwrap() - 3.531_728_321_042_12).abs() < 1e-9);
        assert!(h.f_mod(0.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let h = reference_hill();
        let pp = h.phi_prime(6.833).unwrap();
        assert!((pp - 2.2852).abs() / 2.2852 < 1e-3);
        assert!((pp - 2.285_150_401_539_5).abs() < 1e-9);
        let fp = h.f_prime(6.833).unwrap();
        assert!((fp + 0.1143).abs() / 0.1143 < 1e-3);
        assert!((h.phi_prime(4.112).unwrap() - 40.0 * 2.0 / (4.0 * 4.112)).abs() < 1e-12);
        assert!((h.f_prime(4.112).unwrap() + 2.0 * 2.0 / (4.0 * 4.112)).abs() < 1e-12);
    }

    #[test]
    fn slopes_scale_linearly_in_spans() {
        let h1 = HillParams::new(60.0, 1e-6, 3.0, 1e-6, 4.1, 2.0, 4.1, 2.0).unwrap();
        let h2 = HillParams::new(60.0, 2e-6, 3.0, 2e-6, 4.1, 2.0, 4.1, 2.0).unwrap();
        for z in [0.5, 4.1, 9.0] {
            let r = h2.phi_prime(z).unwrap() / h1.phi_prime(z).unwrap();
            assert!((r - 2.0).abs() < 1e-12);
            let r = h2.f_prime(z).unwrap() / h1.f_prime(z).unwrap();
            assert!((r - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extreme_arguments_stay_finite() {
        let h = HillParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 8.0, 1.0, 8.0).unwrap();
        for z in [1e-300, 1e-40, 1e40, 1e300] {
            assert!(h.phi(z).unwrap().is_finite());
            assert!(h.f_mod(z).unwrap().is_finite());
            assert!(h.phi_prime(z).unwrap() >= 0.0);
            assert!(h.f_prime(z).unwrap() <= 0.0);
        }
    }

    #[test]
    fn json_field_names() {
        let json = r#"{"plant":{"a1":0.08,"a2":0.15,"a3":0.12,"g1":2.0,"g2":0.5},
            "hill":{"k1":60,"k2":40,"k3":3,"k4":2,"h_phi":4.112,"p_phi":2,"h_f":4.112,"p_f":2}}"#;
        let m: IgoModel = serde_json::from_str(json).unwrap();
        assert_eq!(m.hill.k2(), 40.0);
        let back = serde_json::to_value(m).unwrap();
        for key in ["k1", "k2", "k3", "k4", "h_phi", "p_phi", "h_f", "p_f"] {
            assert!(back["hill"].get(key).is_some(), "{key}");
        }
        for key in ["a1", "a2", "a3", "g1", "g2"] {
            assert!(back["plant"].get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn json_rejects_invalid_and_unknown() {
        let bad = r#"{"a1":0.1,"a2":0.1,"a3":0.2,"g1":1,"g2":1}"#;
        assert!(serde_json::from_str::<PlantParams>(bad).is_err());
        let unknown = r#"{"a1":0.1,"a2":0.2,"a3":0.3,"g1":1,"g2":1,"g3":2}"#;
        assert!(serde_json::from_str::<PlantParams>(unknown).is_err());
        let no_g2 = r#"{"a1":0.1,"a2":0.2,"a3":0.3,"g1":1}"#;
        assert_eq!(serde_json::from_str::<PlantParams>(no_g2).unwrap().g2(), 1.0);
    }
}
