//! Dimensionless formulation in terms of the opacity α and the ratio u = V/E,
//! and the opacity-window search.
//!
//! With X = x/L and T = ω_V t the shutter problem depends on (α, u) only, so
//! every query here instantiates a concrete barrier from a reference
//! (V, m_rel) and delegates to the dimensional propagator.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::export::{fmt_f64, fmt_opt};
use crate::quantities::{derive_kinematics, BarrierSpec};
use crate::shutter::{build_model_with, BuildOptions, WaveModel};
use crate::tfa::relative_frequency;
use crate::transients::{find_tmax, PeakSearch};

/// Pole count used when two references must be compared point by point.
/// The adaptive build validates on a grid in fs, which is not dimensionless,
/// so equal (α, u) could otherwise get different truncations.
pub const INVARIANCE_POLES: usize = 200;
/// Default u for the window search.
pub const DEFAULT_U_LARGE: f64 = 300.0;
/// Smallest u accepted by [`find_window`].
pub const MIN_U_LARGE: f64 = 100.0;
/// Opacity interval searched for the onset of time-domain resonances.
pub const ALPHA_MIN_BRACKET: (f64, f64) = (1.8, 2.9);
/// Opacity interval searched for the cutoff crossing at t_max.
pub const ALPHA_MAX_BRACKET: (f64, f64) = (2.9, 4.5);

/// Barrier height and effective mass that fix the physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub v_ev: f64,
    pub m_rel: f64,
}

impl Default for Reference {
    fn default() -> Self {
        Reference { v_ev: 0.3, m_rel: 0.067 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessPoint {
    pub alpha: f64,
    pub u: f64,
    /// x/L.
    pub x_rel: f64,
    /// ω_V t.
    pub t_rel: f64,
}

impl DimensionlessPoint {
    pub fn validate(&self) -> Result<()> {
        check_alpha_u(self.alpha, self.u)?;
        if !(self.x_rel >= 0.0 && self.x_rel.is_finite()) {
            return Err(Error::validation("X", format!("must be finite and >= 0, got {}", self.x_rel)));
        }
        if !(self.t_rel > 0.0 && self.t_rel.is_finite()) {
            return Err(Error::validation("T", format!("must be finite and > 0, got {}", self.t_rel)));
        }
        Ok(())
    }
}

fn check_alpha_u(alpha: f64, u: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::validation("alpha", format!("must be finite and > 0, got {alpha}")));
    }
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::validation("u", format!("must be finite and > 0, got {u}")));
    }
    Ok(())
}

/// Barrier with E = V/u and L = α/√(2mV/ħ²).
pub fn instantiate(alpha: f64, u: f64, reference: Reference) -> Result<BarrierSpec> {
    check_alpha_u(alpha, u)?;
    if !(reference.v_ev > 0.0) {
        return Err(Error::validation("V", "reference barrier height must be > 0"));
    }
    let probe = BarrierSpec::new(reference.v_ev, 1.0, reference.m_rel, reference.v_ev / u)?;
    let l = alpha / probe.barrier_k2().sqrt();
    probe.with_width(l)
}

/// (α, u) of an existing spec.
pub fn opacity_and_ratio(spec: &BarrierSpec) -> Result<(f64, f64)> {
    let kin = derive_kinematics(spec)?;
    Ok((kin.opacity, kin.height_ratio))
}

/// Model for the (α, u) pair in the given reference.
pub fn instantiate_model(alpha: f64, u: f64, reference: Reference, options: &BuildOptions) -> Result<WaveModel> {
    build_model_with(&instantiate(alpha, u, reference)?, options)
}

/// ω_av/ω_V at (X, T); delegates to [`relative_frequency`] at x = X L,
/// t = T/ω_V.
pub fn rescaled_relative_frequency(point: &DimensionlessPoint, reference: Reference, options: &BuildOptions) -> Result<f64> {
    point.validate()?;
    let model = instantiate_model(point.alpha, point.u, reference, options)?;
    relative_frequency_at(&model, point.x_rel, point.t_rel)
}

/// ω_av/ω_V at (X, T) for an already built model.
pub fn relative_frequency_at(model: &WaveModel, x_rel: f64, t_rel: f64) -> Result<f64> {
    let x = x_rel * model.spec().l_nm;
    let t = t_rel / model.omega_v();
    relative_frequency(model, x, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpacityPoint {
    pub alpha: f64,
    pub omega_rel_at_tmax: Option<f64>,
    /// ω_V t_max.
    pub t_max_rel: Option<f64>,
    pub error: Option<String>,
}

impl OpacityPoint {
    pub fn found(&self) -> bool {
        self.omega_rel_at_tmax.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpacityCurve {
    pub u: f64,
    pub points: Vec<OpacityPoint>,
}

/// ω_av/ω_V at (x = L, t_max), or `None` without a time-domain resonance.
/// Also returns ω_V t_max.
pub fn edge_frequency(alpha: f64, u: f64, reference: Reference, options: &BuildOptions) -> Result<Option<(f64, f64)>> {
    let model = instantiate_model(alpha, u, reference, options)?;
    let l = model.spec().l_nm;
    match find_tmax(&model, l, &PeakSearch::for_spec(model.spec()))? {
        Some(peak) => {
            let w = relative_frequency(&model, l, peak.t_max)?;
            Ok(Some((w, peak.t_max * model.omega_v())))
        }
        None => Ok(None),
    }
}

/// One curve per u over a common α grid.
pub fn opacity_scan(u_list: &[f64], alpha_grid: &[f64], reference: Reference, options: &BuildOptions) -> Result<Vec<OpacityCurve>> {
    if u_list.is_empty() || alpha_grid.is_empty() {
        return Err(Error::validation("grid", "u list and alpha grid must be non-empty"));
    }
    for &u in u_list {
        check_alpha_u(1.0, u)?;
    }
    if alpha_grid.iter().any(|&a| !(a > 0.0 && a.is_finite())) || alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("alpha_grid", "must be positive and strictly increasing"));
    }
    Ok(u_list
        .iter()
        .map(|&u| OpacityCurve {
            u,
            points: alpha_grid
                .par_iter()
                .map(|&alpha| match edge_frequency(alpha, u, reference, options) {
                    Ok(v) => OpacityPoint {
                        alpha,
                        omega_rel_at_tmax: v.map(|p| p.0),
                        t_max_rel: v.map(|p| p.1),
                        error: None,
                    },
                    Err(e) => OpacityPoint {
                        alpha,
                        omega_rel_at_tmax: None,
                        t_max_rel: None,
                        error: Some(e.to_string()),
                    },
                })
                .collect(),
        })
        .collect())
}

/// Columns alpha, omega_rel_at_tmax, T_tmax, found.
pub fn write_opacity_csv<W: Write>(mut out: W, curve: &OpacityCurve) -> std::io::Result<()> {
    writeln!(out, "alpha,omega_rel_at_tmax,T_tmax,found")?;
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(p.alpha),
            fmt_opt(p.omega_rel_at_tmax),
            fmt_opt(p.t_max_rel),
            p.found()
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpacityWindow {
    pub u: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

fn bisect(mut lo: f64, mut hi: f64, tol: f64, mut upper: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if upper(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Onset α_min of time-domain resonances at x = L and the opacity α_max at
/// which ω_av/ω_V(t_max) reaches 1, each by bisection to `bisect_tol`.
pub fn find_window(u_large: f64, reference: Reference, bisect_tol: f64, options: &BuildOptions) -> Result<OpacityWindow> {
    if !(u_large >= MIN_U_LARGE && u_large.is_finite()) {
        return Err(Error::validation("u_large", format!("must be >= {MIN_U_LARGE}, got {u_large}")));
    }
    if !(bisect_tol > 0.0) {
        return Err(Error::validation("bisect_tol", "must be > 0"));
    }
    let exists = |alpha: f64| edge_frequency(alpha, u_large, reference, options).map(|v| v.is_some());
    let (lo, hi) = ALPHA_MIN_BRACKET;
    if exists(lo)? || !exists(hi)? {
        return Err(Error::Bracket {
            quantity: "alpha_min",
            lo,
            hi,
        });
    }
    let alpha_min = bisect(lo, hi, bisect_tol, exists)?;

    let excess = |alpha: f64| -> Result<f64> {
        match edge_frequency(alpha, u_large, reference, options)? {
            Some((w, _)) => Ok(w - 1.0),
            None => Err(Error::Bracket {
                quantity: "alpha_max",
                lo: alpha,
                hi: alpha,
            }),
        }
    };
    let (lo, hi) = ALPHA_MAX_BRACKET;
    if excess(lo)? >= 0.0 || excess(hi)? < 0.0 {
        return Err(Error::Bracket {
            quantity: "alpha_max",
            lo,
            hi,
        });
    }
    let alpha_max = bisect(lo, hi, bisect_tol, |a| excess(a).map(|e| e >= 0.0))?;
    Ok(OpacityWindow {
        u: u_large,
        alpha_min,
        alpha_max,
    })
}
