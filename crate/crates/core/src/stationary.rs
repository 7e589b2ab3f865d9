//! Stationary scattering states of the rectangular barrier.
//!
//! Everything here is written in terms of the even functions cos(qL) and
//! sinc(qL) of the interior wavenumber, so the results do not depend on the
//! branch of q and stay finite at E = V where q = 0.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantities::BarrierSpec;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Which of the two stationary solutions φ_{±k}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// q = √(k² − U); when k² − U is real and negative the branch q = iκ with
/// κ > 0 is returned, otherwise the principal root.
pub fn interior_wavenumber(k: Complex64, barrier_k2: f64) -> Complex64 {
    let arg = k * k - barrier_k2;
    if arg.im == 0.0 && arg.re < 0.0 {
        return Complex64::new(0.0, (-arg.re).sqrt());
    }
    arg.sqrt()
}

/// Interior representation of φ on [0, L].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteriorForm {
    /// a₊ e^{iqx} + a₋ e^{−iqx}.
    Exponential { a_plus: Complex64, a_minus: Complex64 },
    /// E = V: q = 0 and φ(x) = c₀ + c₁ (x − L).
    Linear { c0: Complex64, c1: Complex64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryState {
    /// Signed incidence wavenumber (negative for φ_{−k}).
    pub k: f64,
    pub q: Complex64,
    /// T_k, defined so that the transmitted wave is T_k e^{ikx}.
    pub t_amp: Complex64,
    pub r_amp: Complex64,
    pub interior: InteriorForm,
    /// Barrier width (nm).
    pub l: f64,
}

/// cos z and sinc z = sin z / z.
pub(crate) fn cos_sinc(z: Complex64) -> (Complex64, Complex64) {
    let c = z.cos();
    if z.norm() < 1e-3 {
        let z2 = z * z;
        let s = 1.0 - z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0));
        (c, s)
    } else {
        (c, z.sin() / z)
    }
}

/// Derivatives of cos(√Q a) and sinc(√Q a) with respect to Q.
fn cos_sinc_dq(z: Complex64, c: Complex64, s: Complex64, a: f64) -> (Complex64, Complex64) {
    let a2 = a * a;
    let dc = -0.5 * a2 * s;
    // (cos z − sinc z) / z² has a removable singularity at 0
    let ratio = if z.norm() < 0.1 {
        let z2 = z * z;
        let mut term = Complex64::new(-1.0 / 3.0, 0.0);
        let mut sum = term;
        for n in 2..8 {
            let n = n as f64;
            // ratio of successive coefficients (−1)ⁿ 2n/(2n+1)!
            term *= -z2 * n / ((n - 1.0) * (2.0 * n) * (2.0 * n + 1.0));
            sum += term;
        }
        sum
    } else {
        (c - s) / (z * z)
    };
    (dc, 0.5 * a2 * ratio)
}

/// Half the reduced transmission denominator,
/// den(p) = 2p cos(qL) − i(q² + p²) L sinc(qL),
/// together with d den/dp. Its zeros are the resonance poles.
pub(crate) fn denominator(p: Complex64, barrier_k2: f64, l: f64) -> (Complex64, Complex64) {
    let q2 = p * p - barrier_k2;
    let z = q2.sqrt() * l;
    let (c, s) = cos_sinc(z);
    let (dc, ds) = cos_sinc_dq(z, c, s, l);
    let sum = q2 + p * p;
    let den = 2.0 * p * c - I * sum * l * s;
    let dden = 2.0 * c + 4.0 * p * p * dc - I * (4.0 * p * l * s + 2.0 * p * sum * l * ds);
    (den, dden)
}

/// The stationary solution φ_p at a point x = L + s inside the barrier,
/// analytically continued to complex p, with dφ_p/dp.
pub(crate) fn continued_phi(p: Complex64, barrier_k2: f64, l: f64, x: f64) -> (Complex64, Complex64) {
    let (den, dden) = denominator(p, barrier_k2, l);
    let tau = 2.0 * p / den;
    let dtau = (2.0 * den - 2.0 * p * dden) / (den * den);
    let shift = x - l;
    let q2 = p * p - barrier_k2;
    let zs = q2.sqrt() * shift;
    let (cs, ss) = cos_sinc(zs);
    let (dcs, dss) = cos_sinc_dq(zs, cs, ss, shift);
    let g = cs + I * p * shift * ss;
    let dg = 2.0 * p * dcs + I * shift * ss + I * p * shift * dss * 2.0 * p;
    (tau * g, dtau * g + tau * dg)
}

/// φ_p(x) only.
#[cfg(test)]
pub(crate) fn continued_phi_value(p: Complex64, barrier_k2: f64, l: f64, x: f64) -> Complex64 {
    let q2 = p * p - barrier_k2;
    let q = q2.sqrt();
    let (c, s) = cos_sinc(q * l);
    let den = 2.0 * p * c - I * (q2 + p * p) * l * s;
    let shift = x - l;
    let (cs, ss) = cos_sinc(q * shift);
    2.0 * p / den * (cs + I * p * shift * ss)
}

/// Solves the matching problem for incidence e^{±ikx} from the left.
pub fn stationary_state(spec: &BarrierSpec, sign: Sign) -> Result<StationaryState> {
    spec.validate()?;
    Ok(state_for(sign.factor() * spec.k(), spec.barrier_k2(), spec.l_nm))
}

pub(crate) fn state_for(k: f64, barrier_k2: f64, l: f64) -> StationaryState {
    let kc = Complex64::new(k, 0.0);
    let q = interior_wavenumber(kc, barrier_k2);
    let (c, s) = cos_sinc(q * l);
    let den = 2.0 * k * c - I * (q * q + k * k) * l * s;
    let eikl = Complex64::from_polar(1.0, k * l);
    let t_amp = 2.0 * k / den / eikl;
    let at_l = t_amp * eikl;
    // φ(0): shift −L in the interior form
    let r_amp = at_l * (c - I * k * l * s) - 1.0;
    let interior = if (q * l).norm() < 1e-8 {
        InteriorForm::Linear {
            c0: at_l,
            c1: I * k * at_l,
        }
    } else {
        let eiql = (I * q * l).exp();
        InteriorForm::Exponential {
            a_plus: at_l / eiql * (q + k) / (2.0 * q),
            a_minus: at_l * eiql * (q - k) / (2.0 * q),
        }
    };
    StationaryState {
        k,
        q,
        t_amp,
        r_amp,
        interior,
        l,
    }
}

impl StationaryState {
    fn check(&self, x: f64) -> Result<()> {
        if (0.0..=self.l).contains(&x) {
            Ok(())
        } else {
            Err(Error::domain("x", format!("{x} nm is outside [0, {}] nm", self.l)))
        }
    }

    fn profile(&self, x: f64) -> (Complex64, Complex64) {
        let shift = x - self.l;
        let (cs, ss) = cos_sinc(self.q * shift);
        let at_l = self.t_amp * Complex64::from_polar(1.0, self.k * self.l);
        let k = self.k;
        let value = at_l * (cs + I * k * shift * ss);
        let slope = at_l * (-self.q * self.q * shift * ss + I * k * cs);
        (value, slope)
    }

    /// φ(x) for 0 ≤ x ≤ L.
    pub fn phi(&self, x: f64) -> Result<Complex64> {
        self.check(x)?;
        Ok(self.profile(x).0)
    }

    /// dφ/dx for 0 ≤ x ≤ L.
    pub fn dphi_dx(&self, x: f64) -> Result<Complex64> {
        self.check(x)?;
        Ok(self.profile(x).1)
    }

    /// Probability current Im(φ* φ′) in units of ħ/m; equals k|T|² for real k.
    pub fn flux(&self, x: f64) -> Result<f64> {
        let (v, d) = {
            self.check(x)?;
            self.profile(x)
        };
        Ok((v.conj() * d).im)
    }

    pub fn transmission_probability(&self) -> f64 {
        self.t_amp.norm_sqr()
    }
}

/// φ(x) of a stationary state (free function form).
pub fn phi(state: &StationaryState, x: f64) -> Result<Complex64> {
    state.phi(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> BarrierSpec {
        BarrierSpec::gaas_reference()
    }

    #[test]
    fn branch_choices() {
        assert_eq!(interior_wavenumber(Complex64::new(2.0, 0.0), 4.0), Complex64::new(0.0, 0.0));
        let k = Complex64::new(0.7, -0.2);
        assert!((interior_wavenumber(k, 0.0) - k).norm() < 1e-15);
        let q = interior_wavenumber(Complex64::new(-0.5, 0.0), 4.0);
        assert!(q.re == 0.0 && q.im > 0.0);
    }

    #[test]
    fn tunnelling_wavenumber() {
        let spec = reference();
        let q = interior_wavenumber(Complex64::new(spec.k(), 0.0), spec.barrier_k2());
        let kappa = ((spec.v_ev - spec.e_ev) / spec.hbar2_over_2m()).sqrt();
        assert!(q.re.abs() < 1e-15);
        assert!((q.im - kappa).abs() < 1e-12 * kappa);
    }

    #[test]
    fn free_barrier_is_transparent() {
        let spec = BarrierSpec::new(0.0, 3.0, 0.067, 0.01).unwrap();
        let st = stationary_state(&spec, Sign::Plus).unwrap();
        assert!((st.t_amp - 1.0).norm() < 1e-14);
        assert!(st.r_amp.norm() < 1e-14);
        let x = 1.7;
        let expected = Complex64::from_polar(1.0, spec.k() * x);
        assert!((st.phi(x).unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn edge_values() {
        let st = stationary_state(&reference(), Sign::Plus).unwrap();
        let at_l = st.t_amp * Complex64::from_polar(1.0, st.k * st.l);
        assert!((st.phi(st.l).unwrap() - at_l).norm() < 1e-15);
        assert!((st.phi(0.0).unwrap() - (1.0 + st.r_amp)).norm() < 1e-14);
        assert!(st.phi(-0.1).is_err());
        assert!(st.phi(st.l + 0.1).is_err());
    }

    #[test]
    fn reference_transmission() {
        let st = stationary_state(&reference(), Sign::Plus).unwrap();
        let t2 = st.transmission_probability();
        assert!((t2 - 1.617_24e-4).abs() < 1e-8, "|T|^2 = {t2}");
    }

    #[test]
    fn exponential_form_matches_stable_form() {
        let spec = BarrierSpec::new(0.3, 2.0, 0.067, 0.05).unwrap();
        let st = stationary_state(&spec, Sign::Plus).unwrap();
        let InteriorForm::Exponential { a_plus, a_minus } = st.interior else {
            panic!("expected exponential form")
        };
        for x in [0.0, 0.3, 1.1, 2.0] {
            let direct = a_plus * (I * st.q * x).exp() + a_minus * (-I * st.q * x).exp();
            assert!((direct - st.phi(x).unwrap()).norm() < 1e-12 * direct.norm());
        }
    }

    #[test]
    fn energy_equal_to_height() {
        let spec = BarrierSpec::new(0.3, 4.0, 0.067, 0.3).unwrap();
        let st = stationary_state(&spec, Sign::Plus).unwrap();
        assert!(matches!(st.interior, InteriorForm::Linear { .. }));
        let k = spec.k();
        let l = spec.l_nm;
        // q → 0: t = 2k e^{−ikL} / (2k − i k² L)
        let expected = 1.0 / (Complex64::new(1.0, -0.5 * k * l) * Complex64::from_polar(1.0, k * l));
        assert!((st.t_amp - expected).norm() < 1e-14);
        assert!((st.r_amp.norm_sqr() + st.t_amp.norm_sqr() - 1.0).abs() < 1e-13);
        // a hair away from E = V the generic path agrees
        let near = stationary_state(&spec.with_energy(0.3 * (1.0 + 1e-9)).unwrap(), Sign::Plus).unwrap();
        assert!((near.t_amp - st.t_amp).norm() < 1e-7);
    }

    #[test]
    fn continued_phi_derivative() {
        let spec = reference();
        let (u, l) = (spec.barrier_k2(), spec.l_nm);
        for (p, x) in [
            (Complex64::new(0.3, 0.8), 1.0),
            (Complex64::new(-1.2, 0.4), 3.9),
            (Complex64::new(2.5, -0.3), 0.0),
            (Complex64::new(0.72, 0.01), 2.0),
        ] {
            let (_, d) = continued_phi(p, u, l, x);
            let h = 1e-6;
            let fd = (continued_phi_value(p + h, u, l, x) - continued_phi_value(p - h, u, l, x)) / (2.0 * h);
            assert!((d - fd).norm() < 1e-6 * d.norm().max(1e-3), "{p} {x}: {d} vs {fd}");
        }
    }

    #[test]
    fn denominator_derivative() {
        let spec = reference();
        for p in [Complex64::new(0.9, -0.25), Complex64::new(0.74, 0.0), Complex64::new(3.0, -1.0)] {
            let (_, d) = denominator(p, spec.barrier_k2(), spec.l_nm);
            let h = 1e-6;
            let fd = (denominator(p + h, spec.barrier_k2(), spec.l_nm).0
                - denominator(p - h, spec.barrier_k2(), spec.l_nm).0)
                / (2.0 * h);
            assert!((d - fd).norm() < 1e-6 * d.norm());
        }
    }
}
