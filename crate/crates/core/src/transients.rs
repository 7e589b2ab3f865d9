//! Density time series at a probe, detection of the transient peak t_max,
//! and the scan of t_max against barrier width.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::export::{fmt_f64, fmt_opt};
use crate::quantities::BarrierSpec;
use crate::shutter::{build_model_with, BuildOptions, Probe, WaveModel};

/// Default number of coarse grid points in a peak search.
pub const DEFAULT_COARSE_POINTS: usize = 2000;
/// Default relative time tolerance of the golden-section refinement.
pub const DEFAULT_REFINE_TOL: f64 = 1e-6;
/// Lower end of the default detection window (fs).
pub const DEFAULT_T_LO: f64 = 0.05;
/// Coarse maxima below this fraction of the largest sampled density are
/// roundoff ripple on a vanishing signal and are skipped.
pub const PEAK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TransientProfile {
    pub x_probe: f64,
    pub t_grid: Vec<f64>,
    /// |Ψ|², divided by |T_k|² when `normalized`.
    pub density: Vec<f64>,
    pub normalized: bool,
    pub t_max: Option<f64>,
    pub peak_value: Option<f64>,
    pub detection_window: Option<(f64, f64)>,
}

/// A refined transient peak.
#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub t_max: f64,
    /// |Ψ(x, t_max)|² / |T_k|².
    pub peak_value: f64,
    /// Golden-section bracket that contained the maximum.
    pub bracket: (f64, f64),
    /// Later coarse-grid local maxima (fs).
    pub secondary_maxima: Vec<f64>,
}

/// Options of [`find_tmax`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakSearch {
    pub window: (f64, f64),
    pub coarse_points: usize,
    pub refine_tol: f64,
}

impl PeakSearch {
    /// Window (0.05 fs, max(100 fs, 20 L/(ħk/m))) and the default grid.
    pub fn for_spec(spec: &BarrierSpec) -> Self {
        PeakSearch {
            window: default_window(spec),
            coarse_points: DEFAULT_COARSE_POINTS,
            refine_tol: DEFAULT_REFINE_TOL,
        }
    }
}

pub fn default_window(spec: &BarrierSpec) -> (f64, f64) {
    (DEFAULT_T_LO, (20.0 * spec.crossing_time()).max(100.0))
}

/// `n` log-spaced times covering [lo, hi].
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::validation("window", format!("need 0 < t_lo < t_hi, got ({lo}, {hi})")));
    }
    if n < 2 {
        return Err(Error::validation("points", "need at least 2 points"));
    }
    let ratio = (hi / lo).ln();
    let mut grid: Vec<f64> = (0..n)
        .map(|i| lo * (ratio * i as f64 / (n - 1) as f64).exp())
        .collect();
    grid[n - 1] = hi;
    Ok(grid)
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::validation("t_grid", "is empty"));
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::validation("t_grid", "entries must be finite and > 0"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("t_grid", "must be strictly increasing"));
    }
    Ok(())
}

fn densities(probe: &Probe<'_>, t_grid: &[f64], scale: f64) -> Result<Vec<f64>> {
    t_grid
        .par_iter()
        .map(|&t| probe.density(t).map(|d| d / scale))
        .collect()
}

/// |Ψ(x, t)|² on a grid, optionally divided by |T_k|².
pub fn density_series(model: &WaveModel, x: f64, t_grid: &[f64], normalize: bool) -> Result<TransientProfile> {
    check_grid(t_grid)?;
    let probe = model.probe(x)?;
    let scale = if normalize { model.transmission_probability() } else { 1.0 };
    Ok(TransientProfile {
        x_probe: x,
        t_grid: t_grid.to_vec(),
        density: densities(&probe, t_grid, scale)?,
        normalized: normalize,
        t_max: None,
        peak_value: None,
        detection_window: None,
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximises `f` on [a, b] by golden-section search to width `tol`.
fn golden_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Earliest significant strict interior local maximum of the density at x, refined by
/// golden-section search. `None` means the density has no interior maximum
/// on the window: no time-domain resonance.
///
/// The window start is raised to [`WaveModel::resolved_after`] when that is
/// later, so unresolved early times never produce a peak.
pub fn find_tmax(model: &WaveModel, x: f64, search: &PeakSearch) -> Result<Option<Peak>> {
    let (lo, hi) = search.window;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::validation("window", format!("need 0 < t_lo < t_hi, got ({lo}, {hi})")));
    }
    let lo = lo.max(model.resolved_after(x));
    if lo >= hi {
        return Err(Error::validation(
            "window",
            format!("expansion resolves x = {x} nm only after {lo} fs, past t_hi = {hi} fs"),
        ));
    }
    if !(search.refine_tol > 0.0 && search.refine_tol < 1.0) {
        return Err(Error::validation("refine_tol", "must lie in (0, 1)"));
    }
    if search.coarse_points < 3 {
        return Err(Error::validation("coarse_points", "need at least 3 points"));
    }
    let grid = log_grid(lo, hi, search.coarse_points)?;
    let probe = model.probe(x)?;
    let scale = model.transmission_probability();
    let density = densities(&probe, &grid, scale)?;
    let floor = PEAK_FLOOR * density.iter().cloned().fold(0.0, f64::max);
    let maxima: Vec<usize> = (1..grid.len() - 1)
        .filter(|&i| density[i] > floor && density[i] > density[i - 1] && density[i] > density[i + 1])
        .collect();
    let Some(&first) = maxima.first() else {
        return Ok(None);
    };
    let (a, b) = (grid[first - 1], grid[first + 1]);
    let tol = search.refine_tol * grid[first];
    let (t_max, peak_value) = golden_max(|t| probe.density(t).map(|d| d / scale), a, b, tol)?;
    Ok(Some(Peak {
        t_max,
        peak_value,
        bracket: (a, b),
        secondary_maxima: maxima[1..].iter().map(|&i| grid[i]).collect(),
    }))
}

/// A density series with the peak attached.
pub fn transient_profile(model: &WaveModel, x: f64, t_grid: &[f64], search: &PeakSearch) -> Result<TransientProfile> {
    let mut profile = density_series(model, x, t_grid, true)?;
    if let Some(peak) = find_tmax(model, x, search)? {
        profile.t_max = Some(peak.t_max);
        profile.peak_value = Some(peak.peak_value);
    }
    profile.detection_window = Some(search.window);
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinRow {
    pub l_nm: f64,
    pub t_max: Option<f64>,
    pub peak_value: Option<f64>,
    /// Set when the row could not be computed; the scan itself continues.
    pub error: Option<String>,
}

impl BasinRow {
    pub fn found(&self) -> bool {
        self.t_max.is_some()
    }
}

/// Builds a model per width and locates t_max at x = L.
pub fn basin_scan(template: &BarrierSpec, l_grid: &[f64], options: &BuildOptions) -> Result<Vec<BasinRow>> {
    if l_grid.is_empty() {
        return Err(Error::validation("L_grid", "is empty"));
    }
    if l_grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) || l_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("L_grid", "must be positive and strictly increasing"));
    }
    Ok(l_grid
        .par_iter()
        .map(|&l| {
            let row = template.with_width(l).and_then(|spec| {
                let model = build_model_with(&spec, options)?;
                find_tmax(&model, l, &PeakSearch::for_spec(&spec))
            });
            match row {
                Ok(peak) => BasinRow {
                    l_nm: l,
                    t_max: peak.as_ref().map(|p| p.t_max),
                    peak_value: peak.as_ref().map(|p| p.peak_value),
                    error: None,
                },
                Err(e) => BasinRow {
                    l_nm: l,
                    t_max: None,
                    peak_value: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// Columns L_nm, t_max_fs, peak_value, found; absent values are empty.
pub fn write_basin_csv<W: Write>(mut out: W, rows: &[BasinRow]) -> std::io::Result<()> {
    writeln!(out, "L_nm,t_max_fs,peak_value,found")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(r.l_nm),
            fmt_opt(r.t_max),
            fmt_opt(r.peak_value),
            r.found()
        )?;
    }
    Ok(())
}

/// Columns t_fs, density.
pub fn write_profile_csv<W: Write>(mut out: W, profile: &TransientProfile) -> std::io::Result<()> {
    writeln!(out, "t_fs,density")?;
    for (t, d) in profile.t_grid.iter().zip(&profile.density) {
        writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*d))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (t, v) = golden_max(|t| Ok(1.0 - (t - 0.3).powi(2)), 0.0, 1.0, 1e-9).unwrap();
        assert!((t - 0.3).abs() < 1e-8 && (v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grids_are_validated() {
        assert!(log_grid(0.0, 1.0, 10).is_err());
        assert!(log_grid(2.0, 1.0, 10).is_err());
        let g = log_grid(0.1, 10.0, 3).unwrap();
        assert!((g[1] - 1.0).abs() < 1e-12);
        assert!(check_grid(&[1.0, 1.0]).is_err());
        assert!(check_grid(&[-1.0, 1.0]).is_err());
    }

    #[test]
    fn default_window_scales_with_crossing_time() {
        let spec = BarrierSpec::gaas_reference();
        let (lo, hi) = default_window(&spec);
        assert_eq!(lo, 0.05);
        assert!((hi - 20.0 * spec.crossing_time()).abs() < 1e-9);
        let fast = spec.with_energy(0.3).unwrap().with_width(0.5).unwrap();
        assert_eq!(default_window(&fast).1, 100.0);
    }
}
