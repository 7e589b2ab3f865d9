//! The Faddeeva function w(z) = exp(−z²) erfc(−iz) and the Moshinsky
//! shutter function built on it.
//!
//! `w` is evaluated in the closed upper half-plane by one of three methods,
//! chosen by |z|:
//!
//! * `|z| < 0.5`: the power series Σ (iz)ⁿ / Γ(n/2 + 1);
//! * `0.5 ≤ |z| < 6`: a 40-term rational approximation in (L + iz)/(L − iz);
//! * `|z| ≥ 6`: the Laplace continued fraction, truncated at a depth fitted
//!   to give full double precision.
//!
//! The lower half-plane follows from w(z) = 2 exp(−z²) − w(−z), which can
//! overflow; [`moshinsky_m`] never needs it because it folds the exponential
//! analytically.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const FRAC_2_SQRT_PI: f64 = 1.128_379_167_095_512_6;

/// Radius below which the power series is used.
pub const SERIES_RADIUS: f64 = 0.5;
/// Radius from which the continued fraction is used.
pub const CONTINUED_FRACTION_RADIUS: f64 = 6.0;

const RATIONAL_TERMS: usize = 40;

/// e^{−iπ/4}
const ROT_M45: Complex64 = Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2);

/// w(z) for any finite z.
///
/// Fails with [`Error::OutOfRange`] when the lower-half-plane reflection
/// exceeds the floating-point range.
pub fn faddeeva_w(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::validation("z", format!("must be finite, got {z}")));
    }
    if z.im >= 0.0 {
        return Ok(w_upper(z));
    }
    let value = 2.0 * (-z * z).exp() - w_upper(-z);
    if value.re.is_finite() && value.im.is_finite() {
        Ok(value)
    } else {
        Err(Error::OutOfRange { context: "w(z) in the lower half-plane" })
    }
}

/// w'(z) = −2z w(z) + 2i/√π, given w(z).
#[inline]
pub fn faddeeva_w_prime(z: Complex64, w: Complex64) -> Complex64 {
    -2.0 * z * w + Complex64::new(0.0, FRAC_2_SQRT_PI)
}

/// w(z) for Im z ≥ 0. Uses w(−z̄) = conj(w(z)) to work with Re z ≥ 0.
pub(crate) fn w_upper(z: Complex64) -> Complex64 {
    debug_assert!(z.im >= 0.0);
    if z.re < 0.0 {
        return w_upper_right(Complex64::new(-z.re, z.im)).conj();
    }
    w_upper_right(z)
}

fn w_upper_right(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r < SERIES_RADIUS {
        w_series(z)
    } else if r < CONTINUED_FRACTION_RADIUS {
        w_rational(z)
    } else {
        w_continued_fraction(z)
    }
}

/// Power series, accurate for small |z|.
pub(crate) fn w_series(z: Complex64) -> Complex64 {
    let iz = Complex64::new(-z.im, z.re);
    let iz2 = iz * iz;
    // even chain (iz)^{2m}/m!, odd chain (iz)^{2m+1}/Γ(m + 3/2)
    let mut even = Complex64::new(1.0, 0.0);
    let mut odd = iz * FRAC_2_SQRT_PI;
    let mut sum = even + odd;
    for m in 1..200 {
        let m = m as f64;
        even *= iz2 / m;
        odd *= iz2 / (m + 0.5);
        let term = even + odd;
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

struct RationalTable {
    coeffs: [f64; RATIONAL_TERMS],
    l: f64,
}

fn rational_table() -> &'static RationalTable {
    static TABLE: OnceLock<RationalTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = RATIONAL_TERMS;
        let m = 2 * n;
        let l = (n as f64 / 2f64.sqrt()).sqrt();
        let samples: Vec<f64> = (0..m)
            .map(|j| {
                let t = l * (j as f64 * PI / (2 * m) as f64).tan();
                (-t * t).exp() * (l * l + t * t)
            })
            .collect();
        let mut coeffs = [0.0; RATIONAL_TERMS];
        for (c, slot) in coeffs.iter_mut().enumerate() {
            let freq = (c + 1) as f64;
            let mut acc = samples[0];
            for (j, f) in samples.iter().enumerate().skip(1) {
                acc += 2.0 * f * (PI * j as f64 * freq / m as f64).cos();
            }
            *slot = acc / (2 * m) as f64;
        }
        RationalTable { coeffs, l }
    })
}

/// Rational approximation, valid in the upper half-plane.
pub(crate) fn w_rational(z: Complex64) -> Complex64 {
    let table = rational_table();
    let iz = Complex64::new(-z.im, z.re);
    let denom = table.l - iz;
    let big_z = (table.l + iz) / denom;
    let mut p = Complex64::new(0.0, 0.0);
    for c in table.coeffs.iter().rev() {
        p = p * big_z + c;
    }
    2.0 * p / (denom * denom) + FRAC_1_SQRT_PI / denom
}

/// Laplace continued fraction w(z) = (i/√π) / (z − ½/(z − 1/(z − ³⁄₂/(z − …)))).
pub(crate) fn w_continued_fraction(z: Complex64) -> Complex64 {
    let x = z.re.abs();
    let y = z.im;
    if x + y > 1e7 {
        return Complex64::new(0.0, FRAC_1_SQRT_PI) / z;
    }
    let depth = (3.9 + 11.398 / (0.082_54 * x + 0.1421 * y + 0.2023)).floor();
    let mut acc = z;
    let mut coeff = 0.5 * (depth - 1.0);
    while coeff > 0.4 {
        acc = z - coeff / acc;
        coeff -= 0.5;
    }
    Complex64::new(0.0, FRAC_1_SQRT_PI) / acc
}

/// Arguments of the Moshinsky function M(x, q, t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoshinskyArgs {
    /// Position (nm).
    pub x: f64,
    /// Time (fs), strictly positive.
    pub t: f64,
    /// Complex wavenumber (nm⁻¹).
    pub q: Complex64,
    /// ħ²/(2m) in eV·nm².
    pub mass_energy_scale: f64,
}

impl MoshinskyArgs {
    fn check(&self) -> Result<()> {
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::validation("t", format!("must be > 0, got {}", self.t)));
        }
        if !(self.x.is_finite() && self.q.re.is_finite() && self.q.im.is_finite()) {
            return Err(Error::validation("x/q", "must be finite"));
        }
        if !(self.mass_energy_scale.is_finite() && self.mass_energy_scale > 0.0) {
            return Err(Error::validation("mass_energy_scale", "must be > 0"));
        }
        Ok(())
    }
}

/// M together with its time derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoshinskyValue {
    pub m: Complex64,
    pub dm_dt: Complex64,
}

/// M(y_q) = ½ exp(i m x²/2ħt) w(i y_q).
///
/// When i·y_q falls in the lower half-plane the equivalent form
/// exp(i(qx − ħq²t/2m)) − ½ exp(i m x²/2ħt) w(−i y_q) is used, so the
/// Faddeeva argument always has Im ≥ 0.
pub fn moshinsky_m(args: &MoshinskyArgs) -> Result<Complex64> {
    args.check()?;
    let value = eval(args, false);
    finite(value.m, "Moshinsky function")
}

/// dM/dt by the chain rule, with the same branch folding as [`moshinsky_m`].
pub fn moshinsky_m_dt(args: &MoshinskyArgs) -> Result<Complex64> {
    moshinsky(args).map(|v| v.dm_dt)
}

/// M and dM/dt from a single Faddeeva evaluation.
pub fn moshinsky(args: &MoshinskyArgs) -> Result<MoshinskyValue> {
    args.check()?;
    let value = eval(args, true);
    finite(value.m, "Moshinsky function")?;
    finite(value.dm_dt, "Moshinsky time derivative")?;
    Ok(value)
}

fn finite(v: Complex64, context: &'static str) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::OutOfRange { context })
    }
}

/// Unchecked evaluation in units where `hbar_over_m` = ħ/m (nm²/fs).
pub(crate) fn eval_hbm(x: f64, t: f64, q: Complex64, hbar_over_m: f64, with_dt: bool) -> MoshinskyValue {
    let sigma = (2.0 * hbar_over_m * t).sqrt();
    let theta = x * x / (sigma * sigma);
    let phase = Complex64::from_polar(1.0, theta);
    let y = ROT_M45 * (x - hbar_over_m * q * t) / sigma;
    let z = Complex64::new(-y.im, y.re);
    let (m, w, wz, sign) = if z.im >= 0.0 {
        let w = w_upper(z);
        (0.5 * phase * w, w, z, 1.0)
    } else {
        let w = w_upper(-z);
        let plane = (Complex64::i() * (q * x - 0.5 * hbar_over_m * q * q * t)).exp();
        (plane - 0.5 * phase * w, w, -z, -1.0)
    };
    if !with_dt {
        return MoshinskyValue {
            m,
            dm_dt: Complex64::new(0.0, 0.0),
        };
    }
    let dy = -y / (2.0 * t) - ROT_M45 * hbar_over_m * q / sigma;
    let dz = Complex64::new(-dy.im, dy.re) * sign;
    let dphase = Complex64::new(0.0, -theta / t);
    let folded = 0.5 * phase * (dphase * w + faddeeva_w_prime(wz, w) * dz);
    let dm_dt = if sign > 0.0 {
        folded
    } else {
        let plane = (Complex64::i() * (q * x - 0.5 * hbar_over_m * q * q * t)).exp();
        plane * Complex64::new(0.0, -0.5 * hbar_over_m) * q * q - folded
    };
    MoshinskyValue { m, dm_dt }
}

fn eval(args: &MoshinskyArgs, with_dt: bool) -> MoshinskyValue {
    let hbm = 2.0 * args.mass_energy_scale / crate::units::UNITS.hbar;
    eval_hbm(args.x, args.t, args.q, hbm, with_dt)
}
