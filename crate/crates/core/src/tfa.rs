//! Local average frequency and instantaneous bandwidth of Ψ(x, t).
//!
//! With (1/Ψ) ∂Ψ/∂t = a + ib, the local average frequency is ω_av = −b and
//! the bandwidth is σ = |a|. Since a = ½ ∂ ln|Ψ|²/∂t, σ vanishes at every
//! extremum of the density.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::export::{fmt_f64, fmt_opt, Metadata};
use crate::shutter::{PsiValue, Region, WaveModel};
use crate::transients::{find_tmax, PeakSearch};

/// |Ψ| below which a single-point evaluation is treated as a node.
pub const NODE_FLOOR: f64 = 1e-150;
/// Relative node guard used on grids: |Ψ| < NODE_GUARD · max|Ψ|.
pub const NODE_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrequency {
    /// ω_av (fs⁻¹).
    pub omega_av: f64,
    /// σ (fs⁻¹), never negative.
    pub sigma: f64,
}

impl LocalFrequency {
    pub fn from_value(v: &PsiValue) -> Self {
        let ratio = v.dpsi_dt / v.psi;
        LocalFrequency {
            omega_av: -ratio.im,
            sigma: ratio.re.abs(),
        }
    }
}

fn evaluate(model: &WaveModel, region: Region, x: f64, t: f64) -> Result<PsiValue> {
    let v = model.probe_in(region, x)?.psi_and_dt(t)?;
    let magnitude = v.psi.norm();
    if magnitude < NODE_FLOOR {
        return Err(Error::NearNode { x, t, magnitude });
    }
    Ok(v)
}

/// ω_av and σ at one point.
pub fn local_frequency(model: &WaveModel, region: Region, x: f64, t: f64) -> Result<LocalFrequency> {
    evaluate(model, region, x, t).map(|v| LocalFrequency::from_value(&v))
}

/// ω_av = −Im[(1/Ψ) ∂Ψ/∂t].
pub fn omega_av(model: &WaveModel, region: Region, x: f64, t: f64) -> Result<f64> {
    local_frequency(model, region, x, t).map(|f| f.omega_av)
}

/// σ = |Re[(1/Ψ) ∂Ψ/∂t]|.
pub fn sigma(model: &WaveModel, region: Region, x: f64, t: f64) -> Result<f64> {
    local_frequency(model, region, x, t).map(|f| f.sigma)
}

fn omega_v(model: &WaveModel) -> Result<f64> {
    let w = model.omega_v();
    if w > 0.0 {
        Ok(w)
    } else {
        Err(Error::validation("V", "relative frequencies need a barrier (V > 0)"))
    }
}

/// ω_av/ω_V at a point, with automatic region selection.
pub fn relative_frequency(model: &WaveModel, x: f64, t: f64) -> Result<f64> {
    let w = omega_v(model)?;
    omega_av(model, Region::of(x, model.spec().l_nm), x, t).map(|o| o / w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub x_probe: f64,
    pub t_grid: Vec<f64>,
    /// ω_av/ω_V; `None` where the node guard rejected the point.
    pub omega_rel: Vec<Option<f64>>,
    /// σ in fs⁻¹; `None` where rejected.
    pub sigma: Vec<Option<f64>>,
    pub t_max_marker: Option<f64>,
}

/// ω_av/ω_V and σ on a time grid. Points with |Ψ| < 1e-12·max|Ψ| are gaps.
pub fn spectrogram(model: &WaveModel, x: f64, t_grid: &[f64]) -> Result<Spectrogram> {
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::validation("t_grid", "entries must be finite and > 0"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("t_grid", "must be strictly increasing"));
    }
    let w = omega_v(model)?;
    let probe = model.probe(x)?;
    let values: Vec<PsiValue> = t_grid
        .par_iter()
        .map(|&t| probe.psi_and_dt(t))
        .collect::<Result<_>>()?;
    let max = values.iter().map(|v| v.psi.norm()).fold(0.0, f64::max);
    let guard = (NODE_GUARD * max).max(NODE_FLOOR);
    let (omega_rel, sigma) = values
        .iter()
        .map(|v| {
            if v.psi.norm() < guard {
                (None, None)
            } else {
                let f = LocalFrequency::from_value(v);
                (Some(f.omega_av / w), Some(f.sigma))
            }
        })
        .unzip();
    let search = PeakSearch::for_spec(model.spec());
    let t_max_marker = find_tmax(model, x, &search)?.map(|p| p.t_max);
    Ok(Spectrogram {
        x_probe: x,
        t_grid: t_grid.to_vec(),
        omega_rel,
        sigma,
        t_max_marker,
    })
}

/// Columns t_fs, omega_rel, sigma_per_fs, valid.
pub fn write_spectrogram_csv<W: Write>(mut out: W, s: &Spectrogram) -> std::io::Result<()> {
    writeln!(out, "t_fs,omega_rel,sigma_per_fs,valid")?;
    for ((t, o), g) in s.t_grid.iter().zip(&s.omega_rel).zip(&s.sigma) {
        writeln!(out, "{},{},{},{}", fmt_f64(*t), fmt_opt(*o), fmt_opt(*g), o.is_some())?;
    }
    Ok(())
}

/// Sidecar entries describing a spectrogram.
pub fn spectrogram_metadata(model: &WaveModel, s: &Spectrogram) -> Metadata {
    let spec = model.spec();
    let mut m = Metadata::new();
    m.push("V_eV", spec.v_ev)
        .push("L_nm", spec.l_nm)
        .push("m_rel", spec.m_rel)
        .push("E_eV", spec.e_ev)
        .push("x_probe_nm", s.x_probe)
        .push("t_max_fs", fmt_opt(s.t_max_marker));
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionRow {
    pub x_nm: f64,
    pub x_over_l: f64,
    pub t_max: Option<f64>,
    pub omega_rel_at_tmax: Option<f64>,
    pub error: Option<String>,
}

/// t_max(x) and ω_av/ω_V at (x, t_max(x)) along a grid of positions.
pub fn position_scan(model: &WaveModel, x_grid: &[f64]) -> Result<Vec<PositionRow>> {
    if x_grid.is_empty() {
        return Err(Error::validation("x_grid", "is empty"));
    }
    if x_grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) || x_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("x_grid", "must be positive and strictly increasing"));
    }
    omega_v(model)?;
    let l = model.spec().l_nm;
    let search = PeakSearch::for_spec(model.spec());
    Ok(x_grid
        .par_iter()
        .map(|&x| {
            let row = find_tmax(model, x, &search).and_then(|peak| match peak {
                Some(p) => relative_frequency(model, x, p.t_max).map(|w| (Some(p.t_max), Some(w))),
                None => Ok((None, None)),
            });
            match row {
                Ok((t_max, omega)) => PositionRow {
                    x_nm: x,
                    x_over_l: x / l,
                    t_max,
                    omega_rel_at_tmax: omega,
                    error: None,
                },
                Err(e) => PositionRow {
                    x_nm: x,
                    x_over_l: x / l,
                    t_max: None,
                    omega_rel_at_tmax: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// First position where ω_av/ω_V(t_max) rises through 1, by linear
/// interpolation between neighbouring rows.
pub fn cutoff_crossing(rows: &[PositionRow]) -> Option<f64> {
    rows.windows(2).find_map(|w| {
        let (a, b) = (w[0].omega_rel_at_tmax?, w[1].omega_rel_at_tmax?);
        (a < 1.0 && b >= 1.0).then(|| w[0].x_nm + (1.0 - a) / (b - a) * (w[1].x_nm - w[0].x_nm))
    })
}

/// Columns x_over_L, t_max_fs, omega_rel_at_tmax, found.
pub fn write_position_csv<W: Write>(mut out: W, rows: &[PositionRow]) -> std::io::Result<()> {
    writeln!(out, "x_over_L,t_max_fs,omega_rel_at_tmax,found")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(r.x_over_l),
            fmt_opt(r.t_max),
            fmt_opt(r.omega_rel_at_tmax),
            r.t_max.is_some()
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    /// The peak is built from sub-cutoff frequencies.
    Tunneling { t_max: f64, omega_rel: f64 },
    /// The peak is dominated by frequencies above the cutoff.
    NonTunneling { t_max: f64, omega_rel: f64 },
    /// No transient peak at this position.
    NoResonance,
}

/// Tunneling iff a peak exists and ω_av/ω_V < 1 at t_max.
pub fn classify_tunneling(model: &WaveModel, x: f64) -> Result<Classification> {
    let search = PeakSearch::for_spec(model.spec());
    let Some(peak) = find_tmax(model, x, &search)? else {
        return Ok(Classification::NoResonance);
    };
    let omega_rel = relative_frequency(model, x, peak.t_max)?;
    Ok(if omega_rel < 1.0 {
        Classification::Tunneling {
            t_max: peak.t_max,
            omega_rel,
        }
    } else {
        Classification::NonTunneling {
            t_max: peak.t_max,
            omega_rel,
        }
    })
}
