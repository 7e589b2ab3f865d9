//! Practical units used throughout the crate: lengths in nm, times in fs,
//! energies in eV, wavenumbers in nm⁻¹ and angular frequencies in fs⁻¹.

/// The two constants every other module derives its scales from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    /// ħ in eV·fs.
    pub hbar: f64,
    /// ħ²/(2 m_e) in eV·nm².
    pub hbar2_over_2me: f64,
}

pub const UNITS: UnitSystem = UnitSystem {
    hbar: 0.658_211_956_9,
    hbar2_over_2me: 0.038_099_8,
};

impl UnitSystem {
    /// ħ²/(2m) in eV·nm² for an effective mass `m_rel · m_e`.
    pub fn hbar2_over_2m(&self, m_rel: f64) -> f64 {
        self.hbar2_over_2me / m_rel
    }

    /// ħ/m in nm²/fs for an effective mass `m_rel · m_e`.
    pub fn hbar_over_m(&self, m_rel: f64) -> f64 {
        2.0 * self.hbar2_over_2m(m_rel) / self.hbar
    }
}
