//! Helpers shared by the integration tests, including an arbitrary-precision
//! Faddeeva oracle independent of the library's double-precision code.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_complex::Complex64;
use tunneltime::faddeeva::MoshinskyArgs;
use tunneltime::units::UNITS;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Fixed-point fraction bits.
const P: u64 = 480;

const PI_DIGITS: &str = "31415926535897932384626433832795028841971693993751058209749445923078164062862089986280348253421170679821480865132823066470938446";

/// A complex number in fixed point, value · 2^P.
#[derive(Clone, Debug)]
struct Fx {
    re: BigInt,
    im: BigInt,
}

fn real_fx(x: f64) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    // x = mantissa · 2^exp exactly
    let bits = x.abs().to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let (mant, exp) = if raw_exp == 0 {
        (bits & ((1 << 52) - 1), -1074)
    } else {
        ((bits & ((1 << 52) - 1)) | (1 << 52), raw_exp - 1075)
    };
    let shift = exp + P as i64;
    let v = if shift >= 0 {
        BigInt::from(mant) << shift as u64
    } else {
        BigInt::from(mant) >> (-shift) as u64
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn to_f64(v: &BigInt) -> f64 {
    // Keep 64 significant bits before converting so that the conversion cannot overflow.
    let bits = v.bits();
    if bits > 64 {
        let drop = bits - 64;
        (v >> drop).to_f64().unwrap() * 2f64.powi(drop as i32 - P as i32)
    } else {
        v.to_f64().unwrap() * 2f64.powi(-(P as i32))
    }
}

impl Fx {
    fn new(z: Complex64) -> Self {
        Fx {
            re: real_fx(z.re),
            im: real_fx(z.im),
        }
    }

    fn real(re: BigInt) -> Self {
        Fx { re, im: BigInt::zero() }
    }

    fn to_c64(&self) -> Complex64 {
        Complex64::new(to_f64(&self.re), to_f64(&self.im))
    }

    fn add(&self, o: &Fx) -> Fx {
        Fx {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    fn sub(&self, o: &Fx) -> Fx {
        Fx {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }

    fn mul(&self, o: &Fx) -> Fx {
        Fx {
            re: (&self.re * &o.re - &self.im * &o.im) >> P,
            im: (&self.re * &o.im + &self.im * &o.re) >> P,
        }
    }

    fn div(&self, o: &Fx) -> Fx {
        let den = (&o.re * &o.re + &o.im * &o.im) >> P;
        let re = (&self.re * &o.re + &self.im * &o.im) >> P;
        let im = (&self.im * &o.re - &self.re * &o.im) >> P;
        Fx {
            re: (re << P) / &den,
            im: (im << P) / &den,
        }
    }

    /// Multiplication by the rational num/den.
    fn scale(&self, num: u64, den: u64) -> Fx {
        Fx {
            re: &self.re * num / den,
            im: &self.im * num / den,
        }
    }

    fn times_i(&self) -> Fx {
        Fx {
            re: -&self.im,
            im: self.re.clone(),
        }
    }

    fn max_abs(&self) -> BigInt {
        self.re.abs().max(self.im.abs())
    }
}

fn one() -> BigInt {
    BigInt::one() << P
}

fn pi() -> BigInt {
    let digits: BigInt = PI_DIGITS.parse().unwrap();
    let scale = BigInt::from(10u32).pow(PI_DIGITS.len() as u32 - 1);
    (digits << P) / scale
}

/// 1/√π in fixed point.
fn inv_sqrt_pi() -> BigInt {
    let root = (pi() << P).sqrt();
    (one() << P) / root
}

/// w(z) from the Taylor series Σ (iz)ⁿ/Γ(n/2 + 1), summed in fixed point.
fn taylor(z: Complex64) -> Complex64 {
    let iz = Fx::new(z).times_i();
    let iz2 = iz.mul(&iz);
    let tiny = BigInt::one() << 16u32;
    let kmin = (z.norm_sqr() as u64) + 4;
    // even chain: (iz)^{2k}/k!
    let mut term = Fx::real(one());
    let mut sum = term.clone();
    let mut k = 0u64;
    loop {
        term = term.mul(&iz2).scale(1, k + 1);
        sum = sum.add(&term);
        k += 1;
        if k > kmin && term.max_abs() < tiny {
            break;
        }
    }
    // odd chain: (iz)^{2k+1}/Γ(k + 3/2), Γ(3/2) = √π/2
    let mut term = iz.mul(&Fx::real(inv_sqrt_pi() * 2));
    sum = sum.add(&term);
    let mut k = 0u64;
    loop {
        term = term.mul(&iz2).scale(2, 2 * k + 3);
        sum = sum.add(&term);
        k += 1;
        if k > kmin && term.max_abs() < tiny {
            break;
        }
    }
    sum.to_c64()
}

/// Laplace continued fraction (i/√π)/(z − ½/(z − 1/(z − 3/2/…))) at `depth`.
fn continued_fraction(z: Complex64, depth: u64) -> Fx {
    let zf = Fx::new(z);
    let mut acc = zf.clone();
    for j in (1..depth).rev() {
        acc = zf.sub(&Fx::real(one()).scale(j, 2).div(&acc));
    }
    Fx::real(inv_sqrt_pi()).times_i().div(&acc)
}

/// Continued fraction at increasing depth; stops when successive values
/// agree to 1e-40 or start to drift apart (the real-axis asymptotic case).
fn continued_fraction_adaptive(z: Complex64) -> Complex64 {
    let mut prev = continued_fraction(z, 4).to_c64();
    let mut best = (f64::INFINITY, prev);
    let mut worse = 0;
    let mut depth = 8;
    while depth <= 4096 {
        let v = continued_fraction(z, depth).to_c64();
        let d = (v - prev).norm() / v.norm();
        if d < best.0 {
            best = (d, v);
            worse = 0;
        } else {
            worse += 1;
        }
        if d < 1e-40 || worse >= 3 {
            break;
        }
        prev = v;
        depth *= 2;
    }
    best.1
}

/// Radius below which the oracle sums the Taylor series.
pub const ORACLE_SPLIT: f64 = 8.0;

/// High-precision reference value of w(z) for Im z ≥ 0.
pub fn oracle_w(z: Complex64) -> Complex64 {
    assert!(z.im >= 0.0, "oracle covers the closed upper half-plane");
    if z.norm() <= ORACLE_SPLIT {
        taylor(z)
    } else {
        continued_fraction_adaptive(z)
    }
}

/// The oracle's two methods at one point, for self-checks on the seam.
pub fn oracle_both(z: Complex64) -> (Complex64, Complex64) {
    (taylor(z), continued_fraction_adaptive(z))
}

pub fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

/// |Re z| ≤ 8, 0 ≤ Im z ≤ 8 on a 0.25 grid.
pub fn faddeeva_grid() -> Vec<Complex64> {
    let mut pts = Vec::new();
    for i in -32..=32 {
        for j in 0..=32 {
            pts.push(Complex64::new(0.25 * i as f64, 0.25 * j as f64));
        }
    }
    pts
}

/// Rays from |z| = 1 to 10⁴ in the closed upper half-plane.
pub fn faddeeva_rays() -> Vec<Complex64> {
    let angles = [0.0, 1e-3, 0.1, 0.25, 0.5, 0.75, 0.9, 0.999, 1.0];
    let mut pts = Vec::new();
    for a in angles {
        for e in 0..=16 {
            let r = 10f64.powf(e as f64 * 0.25);
            let z = Complex64::from_polar(r, a * std::f64::consts::PI);
            pts.push(Complex64::new(z.re, z.im.max(0.0)));
        }
    }
    pts
}

/// ħ²/2m for m_rel = 0.067.
pub fn moshinsky_scale() -> f64 {
    UNITS.hbar2_over_2me / 0.067
}

/// Phase factor, argument i·y and plane wave of the Moshinsky function.
pub fn moshinsky_pieces(args: &MoshinskyArgs) -> (Complex64, Complex64, Complex64) {
    let hbm = 2.0 * args.mass_energy_scale / UNITS.hbar;
    let sigma = (2.0 * hbm * args.t).sqrt();
    let phase = Complex64::from_polar(1.0, args.x * args.x / (sigma * sigma));
    let y = Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4) * (args.x - hbm * args.q * args.t) / sigma;
    let plane = (Complex64::i() * (args.q * args.x - 0.5 * hbm * args.q * args.q * args.t)).exp();
    (phase, Complex64::i() * y, plane)
}
