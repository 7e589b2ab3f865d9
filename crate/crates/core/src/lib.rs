//! Exact transients of the quantum shutter problem for a rectangular
//! barrier.
//!
//! A cutoff plane wave released at t = 0 meets a barrier of height V on
//! 0 ≤ x ≤ L. [`shutter`] evaluates Ψ(x, t) and ∂Ψ/∂t as a sum over the
//! resonance poles found by [`resonances`], with Moshinsky functions from
//! [`faddeeva`]. On top of that:
//!
//! * [`transients`] finds the transient peak t_max of |Ψ|² and scans it
//!   against barrier width;
//! * [`tfa`] gives the local average frequency and bandwidth of Ψ;
//! * [`scaling`] works in opacity α and ratio u = V/E, including the
//!   opacity window search;
//! * [`oracle_cn`] is an independent Crank-Nicolson integrator used for
//!   validation.
//!
//! Units are eV, nm and fs; masses are relative to the electron mass.
//!
//! ```
//! use tunneltime::quantities::BarrierSpec;
//! use tunneltime::shutter::build_model;
//! use tunneltime::tfa::relative_frequency;
//! use tunneltime::transients::{find_tmax, PeakSearch};
//!
//! let spec = BarrierSpec::gaas_reference();
//! let model = build_model(&spec, 1e-8)?;
//! let peak = find_tmax(&model, spec.l_nm, &PeakSearch::for_spec(&spec))?.unwrap();
//! assert!(relative_frequency(&model, spec.l_nm, peak.t_max)? < 1.0);
//! # Ok::<(), tunneltime::error::Error>(())
//! ```

pub mod error;
pub mod export;
pub mod faddeeva;
pub mod oracle_cn;
pub mod quantities;
pub mod resonances;
pub mod scaling;
pub mod shutter;
pub mod stationary;
pub mod tfa;
pub mod transients;
pub mod units;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/barrier.md")]
    mod barrier {}
    #[doc = include_str!("../../../book/src/resonances.md")]
    mod resonances {}
    #[doc = include_str!("../../../book/src/transients.md")]
    mod transients {}
    #[doc = include_str!("../../../book/src/frequency.md")]
    mod frequency {}
    #[doc = include_str!("../../../book/src/scaling.md")]
    mod scaling {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
