//! Resonance poles of the rectangular barrier and their Gamow states.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::export::fmt_f64;
use crate::quantities::BarrierSpec;
use crate::stationary::{cos_sinc, denominator, interior_wavenumber};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Scaled residual accepted for a converged pole.
pub const POLE_TOLERANCE: f64 = 1e-10;
/// Poles closer than this (nm⁻¹) are considered the same root.
pub const POLE_SEPARATION: f64 = 1e-8;
const MAX_ITERATIONS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonancePole {
    /// Index n ≥ 1.
    pub n: usize,
    /// k_n = a_n − i b_n (nm⁻¹).
    pub k_n: Complex64,
    /// E_n = ħ²k_n²/2m (eV).
    pub e_n: Complex64,
    /// |D(k_n)|.
    pub residual: f64,
    /// |D(k_n)| / max(|(q+k)²e^{−iqL}|, |(q−k)²e^{iqL}|).
    pub scaled_residual: f64,
    /// Newton iterations used.
    pub iterations: usize,
}

/// D(k) = (q+k)²e^{−iqL} − (q−k)²e^{iqL} and its natural scale.
pub fn pole_condition(k: Complex64, barrier_k2: f64, l: f64) -> (Complex64, f64) {
    let q = interior_wavenumber(k, barrier_k2);
    let e = (I * q * l).exp();
    // q − k = −U/(q + k) avoids cancellation for |k|² ≫ U
    let diff = -barrier_k2 / (q + k);
    let a = (q + k) * (q + k) / e;
    let b = diff * diff * e;
    (a - b, a.norm().max(b.norm()))
}

fn newton(mut k: Complex64, barrier_k2: f64, l: f64) -> Option<(Complex64, usize)> {
    let mut iterations = MAX_ITERATIONS;
    for it in 1..=MAX_ITERATIONS {
        let (f, df) = denominator(k, barrier_k2, l);
        let step = f / df;
        if !(step.re.is_finite() && step.im.is_finite()) {
            return None;
        }
        k -= step;
        if step.norm() <= 1e-12 * k.norm() {
            iterations = it;
            break;
        }
    }
    // The reduced denominator loses digits to cancellation at large |k|;
    // polish on D = 2q·den, whose two terms are individually accurate.
    let mut best = (k, pole_condition_scaled(k, barrier_k2, l));
    for _ in 0..4 {
        let (d, _) = pole_condition(k, barrier_k2, l);
        let (den, dden) = denominator(k, barrier_k2, l);
        let q = interior_wavenumber(k, barrier_k2);
        let dd = 2.0 * q * dden + 2.0 * k / q * den;
        let step = d / dd;
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        k -= step;
        let r = pole_condition_scaled(k, barrier_k2, l);
        if r < best.1 {
            best = (k, r);
        }
    }
    Some((best.0, iterations))
}

fn pole_condition_scaled(k: Complex64, barrier_k2: f64, l: f64) -> f64 {
    let (d, scale) = pole_condition(k, barrier_k2, l);
    d.norm() / scale
}

/// Newton seed for pole n: √(U + (nπ/L)²) − 0.1i/L.
pub fn pole_seed(n: usize, barrier_k2: f64, l: f64) -> Complex64 {
    let re = (barrier_k2 + (n as f64 * std::f64::consts::PI / l).powi(2)).sqrt();
    Complex64::new(re, -0.1 / l)
}

/// Seed from the large-n asymptotics of the pole condition, used when the
/// primary seed fails: Im k ≈ −ln(4k²/U)/L.
fn fallback_seed(n: usize, barrier_k2: f64, l: f64) -> Complex64 {
    let re = pole_seed(n, barrier_k2, l).re;
    let ratio = (4.0 * re * re / barrier_k2).max(std::f64::consts::E);
    Complex64::new(re, -ratio.ln() / l)
}

fn solve_pole(n: usize, spec: &BarrierSpec) -> Result<ResonancePole> {
    let (u, l) = (spec.barrier_k2(), spec.l_nm);
    let mut best: Option<(Complex64, usize, f64, f64)> = None;
    for seed in [pole_seed(n, u, l), fallback_seed(n, u, l)] {
        if let Some((k, it)) = newton(seed, u, l) {
            let (d, scale) = pole_condition(k, u, l);
            let scaled = d.norm() / scale;
            if scaled.is_finite() && best.map_or(true, |b| scaled < b.3) {
                best = Some((k, it, d.norm(), scaled));
            }
            if scaled <= POLE_TOLERANCE {
                break;
            }
        }
    }
    let Some((k, iterations, residual, scaled_residual)) = best else {
        return Err(Error::PoleNotConverged {
            index: n,
            iterations: MAX_ITERATIONS,
            residual: f64::INFINITY,
        });
    };
    if scaled_residual > POLE_TOLERANCE {
        return Err(Error::PoleNotConverged {
            index: n,
            iterations,
            residual: scaled_residual,
        });
    }
    if !(k.re > 0.0 && k.im < 0.0) {
        return Err(Error::PoleQuadrant {
            index: n,
            re: k.re,
            im: k.im,
        });
    }
    Ok(ResonancePole {
        n,
        k_n: k,
        e_n: spec.hbar2_over_2m() * k * k,
        residual,
        scaled_residual,
        iterations,
    })
}

/// Poles n = 1..=count, each found by Newton iteration on the transmission
/// denominator from [`pole_seed`].
pub fn find_poles(spec: &BarrierSpec, count: usize) -> Result<Vec<ResonancePole>> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::validation("count", "must be >= 1"));
    }
    if spec.is_free() {
        return Err(Error::validation("V", "a free particle has no resonance poles"));
    }
    let poles = (1..=count)
        .into_par_iter()
        .map(|n| solve_pole(n, spec))
        .collect::<Result<Vec<_>>>()?;
    for pair in poles.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if (a.k_n - b.k_n).norm() < POLE_SEPARATION || b.k_n.re <= a.k_n.re {
            return Err(Error::PoleCollision {
                first: a.n,
                second: b.n,
            });
        }
    }
    Ok(poles)
}

/// Writes a pole table with columns n, Re k_n, Im k_n, Re E_n, Im E_n, residual.
pub fn write_pole_csv<W: Write>(mut out: W, poles: &[ResonancePole]) -> std::io::Result<()> {
    writeln!(out, "n,re_k_per_nm,im_k_per_nm,re_E_eV,im_E_eV,residual")?;
    for p in poles {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.n,
            fmt_f64(p.k_n.re),
            fmt_f64(p.k_n.im),
            fmt_f64(p.e_n.re),
            fmt_f64(p.e_n.im),
            fmt_f64(p.scaled_residual)
        )?;
    }
    Ok(())
}

/// A normalized resonant state u(x) = c₊e^{iqx} + c₋e^{−iqx} on [0, L].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonantState {
    pub pole: ResonancePole,
    pub q: Complex64,
    pub u0: Complex64,
    pub u_l: Complex64,
    pub c_plus: Complex64,
    pub c_minus: Complex64,
    pub l: f64,
}

/// Builds the normalized Gamow state of `pole`, checking that the pole
/// belongs to `spec`.
pub fn resonant_state(spec: &BarrierSpec, pole: &ResonancePole) -> Result<ResonantState> {
    spec.validate()?;
    let (d, scale) = pole_condition(pole.k_n, spec.barrier_k2(), spec.l_nm);
    let scaled = d.norm() / scale;
    if !(scaled <= 1e3 * POLE_TOLERANCE) {
        return Err(Error::PoleMismatch { residual: scaled });
    }
    Ok(state_at(*pole, spec.barrier_k2(), spec.l_nm))
}

/// The state for an arbitrary root of the pole condition (including the
/// mirror roots −k̄_n). No residual check is made.
pub fn resonant_state_at(spec: &BarrierSpec, k_n: Complex64) -> ResonantState {
    let (d, scale) = pole_condition(k_n, spec.barrier_k2(), spec.l_nm);
    let pole = ResonancePole {
        n: 0,
        k_n,
        e_n: spec.hbar2_over_2m() * k_n * k_n,
        residual: d.norm(),
        scaled_residual: d.norm() / scale,
        iterations: 0,
    };
    state_at(pole, spec.barrier_k2(), spec.l_nm)
}

fn state_at(pole: ResonancePole, barrier_k2: f64, l: f64) -> ResonantState {
    let k = pole.k_n;
    let q = interior_wavenumber(k, barrier_k2);
    let b = q + k;
    let a = -barrier_k2 / b;
    let e = (I * q * l).exp();
    let (_, s) = cos_sinc(q * l);
    // ∫₀ᴸ (a e^{iqx} + b e^{−iqx})² dx, with (e^{2iqL} − 1)/(2iq) = L e^{iqL} sinc(qL)
    let integral = a * a * l * e * s + b * b * l / e * s + 2.0 * a * b * l;
    let u0 = a + b;
    let u_l = a * e + b / e;
    let norm = integral + I * (u0 * u0 + u_l * u_l) / (2.0 * k);
    let mut c = 1.0 / norm.sqrt();
    if (c * u0).re < 0.0 {
        c = -c;
    }
    ResonantState {
        pole,
        q,
        u0: c * u0,
        u_l: c * u_l,
        c_plus: c * a,
        c_minus: c * b,
        l,
    }
}

impl ResonantState {
    pub fn k_n(&self) -> Complex64 {
        self.pole.k_n
    }

    /// u_n(x) for 0 ≤ x ≤ L (not range-checked).
    pub fn u(&self, x: f64) -> Complex64 {
        let e = (I * self.q * x).exp();
        self.c_plus * e + self.c_minus / e
    }

    pub fn du_dx(&self, x: f64) -> Complex64 {
        let e = (I * self.q * x).exp();
        I * self.q * (self.c_plus * e - self.c_minus / e)
    }

    /// The state of the mirror pole −k̄_n: u_{−n} = ū_n.
    pub fn mirror(&self) -> ResonantState {
        let mut pole = self.pole;
        pole.k_n = -self.pole.k_n.conj();
        pole.e_n = self.pole.e_n.conj();
        ResonantState {
            pole,
            q: self.q.conj(),
            u0: self.u0.conj(),
            u_l: self.u_l.conj(),
            c_plus: self.c_minus.conj(),
            c_minus: self.c_plus.conj(),
            l: self.l,
        }
    }

    /// Relative residuals of u′(0) = −ik u(0) and u′(L) = ik u(L).
    pub fn siegert_residuals(&self) -> (f64, f64) {
        let k = self.k_n();
        let left = self.du_dx(0.0) + I * k * self.u0;
        let right = self.du_dx(self.l) - I * k * self.u_l;
        (
            left.norm() / (k * self.u0).norm(),
            right.norm() / (k * self.u_l).norm(),
        )
    }

    /// |∫u² + i(u(0)² + u(L)²)/(2k) − 1| with the integral in closed form.
    pub fn normalization_residual(&self) -> f64 {
        let (q, l) = (self.q, self.l);
        let e = (I * q * l).exp();
        let (_, s) = cos_sinc(q * l);
        let integral = self.c_plus * self.c_plus * l * e * s
            + self.c_minus * self.c_minus * l / e * s
            + 2.0 * self.c_plus * self.c_minus * l;
        (integral + I * (self.u0 * self.u0 + self.u_l * self.u_l) / (2.0 * self.k_n()) - 1.0).norm()
    }
}

/// Coefficients of one pole term in the expansion of the transient
/// solution for incidence wavenumber k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionCoefficients {
    pub k: f64,
    pub state: ResonantState,
    /// 2ik u_n(0) / (k² − k_n²).
    pub prefactor: Complex64,
}

impl ExpansionCoefficients {
    /// φ_n(x) = 2ik u_n(0) u_n(x) / (k² − k_n²).
    pub fn phi_n_at(&self, x: f64) -> Complex64 {
        self.prefactor * self.state.u(x)
    }

    /// T_n = 2ik u_n(0) u_n(L) e^{−ik_nL} / (k² − k_n²).
    pub fn t_n(&self) -> Complex64 {
        self.prefactor * self.state.u_l * (-I * self.state.k_n() * self.state.l).exp()
    }
}

pub fn expansion_coefficients(k: f64, state: &ResonantState) -> Result<ExpansionCoefficients> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::validation("k", format!("must be > 0, got {k}")));
    }
    let kn = state.k_n();
    Ok(ExpansionCoefficients {
        k,
        state: *state,
        prefactor: 2.0 * I * k * state.u0 / (k * k - kn * kn),
    })
}

/// Σ_{n=−N..N} u_n(x)u_n(x′)/k_n over the given states and their mirrors.
pub fn completeness_sum(states: &[ResonantState], x: f64, x_prime: f64) -> Complex64 {
    states
        .iter()
        .map(|s| {
            let term = s.u(x) * s.u(x_prime) / s.k_n();
            // mirror term is −conj(term)
            term - term.conj()
        })
        .sum()
}
