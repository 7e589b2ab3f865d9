//! Problem definition and the dimensionless groups derived from it.

use crate::error::{Error, Result};
use crate::units::UNITS;

/// A rectangular barrier of height `v_ev` on `0 ≤ x ≤ l_nm`, hit by a cutoff
/// plane wave of energy `e_ev` carried by a particle of mass `m_rel · m_e`.
///
/// `v_ev = 0` is accepted and describes the free shutter; everything else
/// must be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSpec {
    pub v_ev: f64,
    pub l_nm: f64,
    pub m_rel: f64,
    pub e_ev: f64,
}

/// Quantities derived from a [`BarrierSpec`] with `V > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    /// Incidence wavenumber k (nm⁻¹).
    pub k: f64,
    /// U = 2mV/ħ² (nm⁻²).
    pub barrier_k2: f64,
    /// Cutoff frequency ω_V = V/ħ (fs⁻¹).
    pub omega_v: f64,
    /// Opacity α = √U · L.
    pub opacity: f64,
    /// Height ratio u = V/E.
    pub height_ratio: f64,
}

fn positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite and > 0, got {value}")))
    }
}

impl BarrierSpec {
    pub fn new(v_ev: f64, l_nm: f64, m_rel: f64, e_ev: f64) -> Result<Self> {
        let spec = BarrierSpec {
            v_ev,
            l_nm,
            m_rel,
            e_ev,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The reference GaAs barrier: V = 0.3 eV,
    /// L = 4 nm, m = 0.067 mₑ, E = 1 meV.
    pub fn gaas_reference() -> Self {
        BarrierSpec {
            v_ev: 0.3,
            l_nm: 4.0,
            m_rel: 0.067,
            e_ev: 0.001,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_ev.is_finite() && self.v_ev >= 0.0) {
            return Err(Error::validation(
                "V",
                format!("must be finite and >= 0, got {}", self.v_ev),
            ));
        }
        positive("L", self.l_nm)?;
        positive("m_rel", self.m_rel)?;
        positive("E", self.e_ev)
    }

    pub fn with_width(self, l_nm: f64) -> Result<Self> {
        BarrierSpec { l_nm, ..self }.checked()
    }

    pub fn with_energy(self, e_ev: f64) -> Result<Self> {
        BarrierSpec { e_ev, ..self }.checked()
    }

    fn checked(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// ħ²/(2m) in eV·nm².
    pub fn hbar2_over_2m(&self) -> f64 {
        UNITS.hbar2_over_2m(self.m_rel)
    }

    /// ħ/m in nm²/fs.
    pub fn hbar_over_m(&self) -> f64 {
        UNITS.hbar_over_m(self.m_rel)
    }

    /// Incidence wavenumber k = √(E / (ħ²/2m)).
    pub fn k(&self) -> f64 {
        (self.e_ev / self.hbar2_over_2m()).sqrt()
    }

    /// U = V / (ħ²/2m), zero for the free shutter.
    pub fn barrier_k2(&self) -> f64 {
        self.v_ev / self.hbar2_over_2m()
    }

    /// Frequency of the incident stationary wave, E/ħ (fs⁻¹).
    pub fn omega_e(&self) -> f64 {
        self.e_ev / UNITS.hbar
    }

    pub fn is_free(&self) -> bool {
        self.v_ev == 0.0
    }

    /// Semiclassical time for the incident wave to cross the barrier width, L/(ħk/m).
    pub fn crossing_time(&self) -> f64 {
        self.l_nm / (self.hbar_over_m() * self.k())
    }
}

/// Derives k, U, ω_V, α and u. Rejects `V = 0` (there is no cutoff
/// frequency without a barrier) and any other non-positive field.
pub fn derive_kinematics(spec: &BarrierSpec) -> Result<Kinematics> {
    positive("V", spec.v_ev)?;
    positive("L", spec.l_nm)?;
    positive("m_rel", spec.m_rel)?;
    positive("E", spec.e_ev)?;
    let barrier_k2 = spec.barrier_k2();
    Ok(Kinematics {
        k: spec.k(),
        barrier_k2,
        omega_v: spec.v_ev / UNITS.hbar,
        opacity: barrier_k2.sqrt() * spec.l_nm,
        height_ratio: spec.v_ev / spec.e_ev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_ratio_and_opacity() {
        let kin = derive_kinematics(&BarrierSpec::gaas_reference()).unwrap();
        assert!((kin.height_ratio - 300.0).abs() < 1e-12);
        // sqrt(0.3 * 0.067 / 0.0380998) * 4, evaluated by hand
        let alpha = (0.3_f64 * 0.067 / 0.0380998).sqrt() * 4.0;
        assert!((kin.opacity - alpha).abs() < 1e-12);
        assert!((kin.opacity - 2.9054).abs() < 1e-4);
        assert!((kin.omega_v - 0.455_80).abs() < 5e-5);
    }

    #[test]
    fn opacity_vanishes_with_width() {
        let spec = BarrierSpec::new(0.3, 1e-300, 0.067, 0.01).unwrap();
        let kin = derive_kinematics(&spec).unwrap();
        assert!(kin.opacity < 1e-298);
    }

    #[test]
    fn kinetic_energy_round_trip() {
        let spec = BarrierSpec::new(0.3, 4.0, 0.067, 0.0123).unwrap();
        let kin = derive_kinematics(&spec).unwrap();
        let e = spec.hbar2_over_2m() * kin.k * kin.k;
        assert!((e - spec.e_ev).abs() <= 1e-12 * spec.e_ev);
    }

    #[test]
    fn rejects_non_positive_fields_by_name() {
        let cases = [
            (BarrierSpec { v_ev: 0.0, ..BarrierSpec::gaas_reference() }, "V"),
            (BarrierSpec { l_nm: -1.0, ..BarrierSpec::gaas_reference() }, "L"),
            (BarrierSpec { m_rel: 0.0, ..BarrierSpec::gaas_reference() }, "m_rel"),
            (BarrierSpec { e_ev: f64::NAN, ..BarrierSpec::gaas_reference() }, "E"),
        ];
        for (spec, name) in cases {
            match derive_kinematics(&spec) {
                Err(Error::Validation { field, .. }) => assert_eq!(field, name),
                other => panic!("expected validation error for {name}, got {other:?}"),
            }
        }
    }

    #[test]
    fn free_spec_is_valid_but_has_no_kinematics() {
        let spec = BarrierSpec::new(0.0, 4.0, 0.067, 0.001).unwrap();
        assert!(spec.is_free());
        assert!(derive_kinematics(&spec).is_err());
    }
}
