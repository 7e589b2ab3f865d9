mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use tunneltime::quantities::{derive_kinematics, BarrierSpec};
use tunneltime::resonances::{completeness_sum, find_poles, pole_condition, pole_seed, resonant_state, POLE_TOLERANCE};
use tunneltime::shutter::{build_model, build_model_with, BuildOptions, Region};
use tunneltime::stationary::{stationary_state, InteriorForm, Sign};
use tunneltime::transients::{density_series, find_tmax, log_grid, PeakSearch};
use tunneltime::units::UNITS;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn reference() -> BarrierSpec {
    BarrierSpec::gaas_reference()
}

fn spec_strategy() -> impl Strategy<Value = BarrierSpec> {
    (0.05f64..1.0, 0.5f64..12.0, 0.03f64..1.0, 1e-4f64..2.0)
        .prop_map(|(v, l, m, e)| BarrierSpec::new(v, l, m, e).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn unitarity(spec in spec_strategy()) {
        let s = stationary_state(&spec, Sign::Plus).unwrap();
        prop_assert!((s.r_amp.norm_sqr() + s.t_amp.norm_sqr() - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kinematics_round_trip(spec in spec_strategy()) {
        let kin = derive_kinematics(&spec).unwrap();
        let e = UNITS.hbar2_over_2m(spec.m_rel) * kin.k * kin.k;
        prop_assert!((e - spec.e_ev).abs() <= 1e-12 * spec.e_ev);
        let back = tunneltime::scaling::instantiate(
            kin.opacity,
            kin.height_ratio,
            tunneltime::scaling::Reference { v_ev: spec.v_ev, m_rel: spec.m_rel },
        ).unwrap();
        let kin2 = derive_kinematics(&back).unwrap();
        prop_assert!((kin2.opacity - kin.opacity).abs() <= 1e-12 * kin.opacity);
        prop_assert!((kin2.height_ratio - kin.height_ratio).abs() <= 1e-12 * kin.height_ratio);
    }

    #[test]
    fn matching_and_flux(spec in spec_strategy(), sign in prop_oneof![Just(Sign::Plus), Just(Sign::Minus)]) {
        let s = stationary_state(&spec, sign).unwrap();
        let k = s.k;
        let l = spec.l_nm;
        // outside: e^{ikx} + R e^{−ikx} for x ≤ 0 and T e^{ikx} for x ≥ L
        let left = (1.0 + s.r_amp, I * k * (1.0 - s.r_amp));
        let eikl = Complex64::from_polar(1.0, k * l);
        let right = (s.t_amp * eikl, I * k * s.t_amp * eikl);
        let close = |a: Complex64, b: Complex64| (a - b).norm() <= 1e-12 * a.norm().max(b.norm()).max(1e-300);
        prop_assert!(close(s.phi(0.0).unwrap(), left.0));
        prop_assert!(close(s.dphi_dx(0.0).unwrap(), left.1) || (s.dphi_dx(0.0).unwrap() - left.1).norm() <= 1e-12 * k.abs());
        prop_assert!(close(s.phi(l).unwrap(), right.0));
        prop_assert!((s.dphi_dx(l).unwrap() - right.1).norm() <= 1e-12 * k.abs() * s.t_amp.norm().max(1e-300));
        let expected = k * s.t_amp.norm_sqr();
        for j in 0..=8 {
            let f = s.flux(l * j as f64 / 8.0).unwrap();
            prop_assert!((f - expected).abs() <= 1e-12 * k.abs().max(expected.abs()), "flux {} vs {}", f, expected);
        }
    }

    #[test]
    fn minus_state_is_continuation(spec in spec_strategy()) {
        let p = stationary_state(&spec, Sign::Plus).unwrap();
        let m = stationary_state(&spec, Sign::Minus).unwrap();
        prop_assert_eq!(p.q, m.q);
        prop_assert_eq!(m.k, -p.k);
        // T_{−k} = conj(T_k) and φ_{−k} = conj(φ_k) for real k and real potential
        prop_assert!((m.t_amp - p.t_amp.conj()).norm() <= 1e-12 * p.t_amp.norm());
        if let (InteriorForm::Exponential { .. }, InteriorForm::Exponential { .. }) = (p.interior, m.interior) {
            let x = 0.37 * spec.l_nm;
            prop_assert!((m.phi(x).unwrap() - p.phi(x).unwrap().conj()).norm() <= 1e-12 * p.phi(x).unwrap().norm().max(1e-300) + 1e-300);
        }
    }
}

fn pole_spec_strategy() -> impl Strategy<Value = BarrierSpec> {
    (0.1f64..0.5, 2.0f64..8.0, 0.05f64..0.2)
        .prop_map(|(v, l, m)| BarrierSpec::new(v, l, m, 0.01 * v).unwrap())
        .prop_filter("opacity above the antibound regime", |s| derive_kinematics(s).unwrap().opacity >= 2.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pole_properties(spec in pole_spec_strategy()) {
        let poles = find_poles(&spec, 30).unwrap();
        let (u, l) = (spec.barrier_k2(), spec.l_nm);
        for p in &poles {
            prop_assert!(p.scaled_residual <= POLE_TOLERANCE);
            prop_assert!(p.k_n.re > 0.0 && p.k_n.im < 0.0, "pole {} not in the fourth quadrant", p.k_n);
            let (d, scale) = pole_condition(-p.k_n.conj(), u, l);
            prop_assert!(d.norm() / scale <= POLE_TOLERANCE);
            let st = resonant_state(&spec, p).unwrap();
            let (a, b) = st.siegert_residuals();
            prop_assert!(a <= 1e-10 && b <= 1e-10, "Siegert residuals {} {}", a, b);
            prop_assert!(st.normalization_residual() <= 1e-10);
        }
    }
}

/// Near the barrier centre the partial sums of Σ u_n(x)u_n(x′)/k_n fall
/// towards zero. Closer to the edges the terms grow with n and the sum is
/// not a usable diagnostic.
#[test]
fn completeness_sum_shrinks_near_the_centre() {
    let spec = reference();
    let states: Vec<_> = find_poles(&spec, 400)
        .unwrap()
        .iter()
        .map(|p| resonant_state(&spec, p).unwrap())
        .collect();
    for (x, xp) in [(2.0, 2.0), (1.8, 2.2), (2.2, 2.2), (1.7, 1.7)] {
        let s: Vec<f64> = [25, 100, 400].iter().map(|&n| completeness_sum(&states[..n], x, xp).norm()).collect();
        assert!(s[2] < s[0] && s[2] < 1e-2, "{s:?} at ({x}, {xp})");
    }
}

#[test]
fn newton_converges_quadratically() {
    let spec = reference();
    let (u, l) = (spec.barrier_k2(), spec.l_nm);
    let root = find_poles(&spec, 5).unwrap()[4].k_n;
    let d = |k: Complex64| pole_condition(k, u, l).0;
    let mut k = pole_seed(5, u, l);
    let mut errors = vec![(k - root).norm()];
    for _ in 0..8 {
        // complex-step-free derivative: central difference in the analytic variable
        let h = 1e-7 * k.norm();
        let dd = (d(k + h) - d(k - h)) / (2.0 * h);
        k -= d(k) / dd;
        errors.push((k - root).norm());
    }
    let useful: Vec<f64> = errors.into_iter().take_while(|&e| e > 1e-9).collect();
    assert!(useful.len() >= 3, "too few iterates to estimate the order: {useful:?}");
    let n = useful.len();
    let order = (useful[n - 1] / useful[n - 2]).ln() / (useful[n - 2] / useful[n - 3]).ln();
    assert!(order >= 1.8, "observed order {order}, errors {useful:?}");
}

#[test]
fn internal_and_external_agree_at_the_edge() {
    let spec = reference();
    let model = build_model(&spec, 1e-8).unwrap();
    let l = spec.l_nm;
    let at_edge = (model.probe_in(Region::Internal, l).unwrap(), model.probe_in(Region::External, l).unwrap());
    // The two forms are different expressions away from the edge.
    let across = (
        model.probe_in(Region::Internal, l - 1e-9).unwrap(),
        model.probe_in(Region::External, l + 1e-9).unwrap(),
    );
    for t in log_grid(0.05, 1000.0, 200).unwrap() {
        for (inner, outer) in [&at_edge, &across] {
            let (a, b) = (inner.psi(t).unwrap(), outer.psi(t).unwrap());
            assert!((a - b).norm() <= 1e-6 * b.norm(), "t = {t}: {a} vs {b}");
        }
    }
}

#[test]
fn density_vanishes_just_after_opening() {
    let spec = reference();
    let model = build_model(&spec, 1e-8).unwrap();
    for j in 1..=40 {
        let x = spec.l_nm * j as f64 / 40.0;
        let d = model.psi(x, 0.01).unwrap().norm_sqr();
        assert!(d <= 1e-4, "|psi|^2 = {d} at x = {x}");
    }
}

/// The approach to the stationary density is algebraic; the envelope of
/// the deviation is about 1.1e-3 at 10⁴ fs and falls below 1e-3 soon after.
#[test]
fn long_time_limit_is_stationary() {
    let spec = reference();
    let model = build_model(&spec, 1e-8).unwrap();
    let at_1e4 = density_series(&model, spec.l_nm, &[1e4], true).unwrap().density[0];
    assert!((at_1e4 - 1.0).abs() <= 1.5e-3, "normalized density {at_1e4}");
    let late = density_series(&model, spec.l_nm, &log_grid(2e4, 1e6, 200).unwrap(), true).unwrap();
    for (t, d) in late.t_grid.iter().zip(&late.density) {
        assert!((d - 1.0).abs() <= 1e-3, "normalized density {d} at t = {t}");
    }
}

#[test]
fn more_poles_stay_within_the_tail_estimate() {
    let spec = reference();
    let adaptive = build_model(&spec, 1e-8).unwrap();
    let n = adaptive.pole_count();
    let richer = build_model_with(&spec, &BuildOptions::fixed(2 * n)).unwrap();
    for x in [2.0, 4.0, 8.0] {
        for t in log_grid(0.5, 200.0, 60).unwrap() {
            let a = adaptive.psi(x, t).unwrap();
            let b = richer.psi(x, t).unwrap();
            assert!((a - b).norm() <= 10.0 * adaptive.tail_tol() * b.norm() + 1e-14, "x = {x}, t = {t}: {a} vs {b}");
        }
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let spec = reference();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let model = build_model(&spec, 1e-8).unwrap();
                let peak = find_tmax(&model, spec.l_nm, &PeakSearch::for_spec(&spec)).unwrap().unwrap();
                let series = density_series(&model, 2.0, &log_grid(0.1, 50.0, 300).unwrap(), false).unwrap();
                (peak.t_max, series.density, find_poles(&spec, 40).unwrap())
            })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn peak_is_bracketed() {
    for l in [3.0, 4.0, 6.0, 10.0] {
        let spec = reference().with_width(l).unwrap();
        let model = build_model_with(&spec, &BuildOptions::extended(1e-8)).unwrap();
        let peak = find_tmax(&model, l, &PeakSearch::for_spec(&spec)).unwrap().unwrap();
        let probe = model.probe(l).unwrap();
        let scale = model.transmission_probability();
        let (a, b) = peak.bracket;
        assert!(a < peak.t_max && peak.t_max < b);
        assert!(peak.peak_value >= probe.density(a).unwrap() / scale);
        assert!(peak.peak_value >= probe.density(b).unwrap() / scale);
    }
}

#[test]
fn long_time_frequency_and_interior_profile() {
    let spec = reference();
    let model = build_model(&spec, 1e-8).unwrap();
    let t = 1e4;
    let w = tunneltime::tfa::omega_av(&model, Region::External, spec.l_nm, t).unwrap();
    let e_over_hbar = spec.e_ev / UNITS.hbar;
    assert!((w / e_over_hbar - 1.0).abs() <= 1e-3, "omega_av {w} vs {e_over_hbar}");
    for j in 1..=8 {
        let x = spec.l_nm * j as f64 / 8.0;
        let a = tunneltime::shutter::psi_internal(&model, x, t).unwrap().norm();
        let b = model.stationary_plus().phi(x).unwrap().norm();
        assert!((a / b - 1.0).abs() <= 1e-3, "x = {x}: {a} vs {b}");
    }
}
