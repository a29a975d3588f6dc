//! Independent oracles for the pendulum model: dense grids, finite
//! differences, direct position quadrature, an explicit ODE integrator and
//! a Kolmogorov–Smirnov check of the adiabatic invariant.

use std::f64::consts::{FRAC_PI_2, PI};

use ion_lattice::constants::BOLTZMANN;
use ion_lattice::pendulum::*;
use ion_lattice::specfun::integrate_with_endpoint_singularity;
use ion_lattice::{IonSpecies, LatticeConfig, RampProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MK: f64 = 1e-3;

fn blue_lattice(t_latt: f64) -> LatticeConfig {
    LatticeConfig::from_temperature(t_latt, 866.214e-9, 2.0 * PI * 0.76e12)
}

fn red_lattice(t_latt: f64) -> LatticeConfig {
    LatticeConfig::from_temperature(t_latt, 866.214e-9, -2.0 * PI * 0.76e12)
}

#[test]
fn energy_density_normalizes() {
    let u0 = 1.0;
    for &theta in &[0.05, 0.14, 1.0, 10.0] {
        let t0 = theta * u0 / BOLTZMANN;
        let e_cut = u0 * (PI / 4.0).powi(2) * 4.0 * theta * 70.0 + 2.0 * u0;
        let r = integrate_with_endpoint_singularity(
            |e| energy_density(e, t0, u0).unwrap(),
            0.0,
            e_cut,
            &[u0],
            1e-10,
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-6, "theta={theta}: {}", r.value);
    }
}

#[test]
fn separatrix_window_matches_dense_grid() {
    // Trapezoid on 10⁷ points, offset so no node lands on E = U0.
    let u0 = 1.0;
    let t0 = 0.2 * u0 / BOLTZMANN;
    let (a, b) = (0.9 * u0, 1.1 * u0);
    let n = 10_000_000usize;
    let h = (b - a) / n as f64;
    let mut dense = 0.0;
    for i in 0..n {
        let e = a + (i as f64 + 0.5) * h;
        dense += energy_density(e, t0, u0).unwrap();
    }
    dense *= h;
    let r = integrate_with_endpoint_singularity(|e| energy_density(e, t0, u0).unwrap(), a, b, &[u0], 1e-12)
        .unwrap();
    assert!((r.value - dense).abs() < 1e-6, "{} vs {dense}", r.value);
    // The density itself blows up at the separatrix.
    assert!(energy_density(u0 * (1.0 - 1e-12), t0, u0).unwrap() > energy_density(0.9, t0, u0).unwrap());
}

#[test]
fn full_range_normalization_matches_dense_grid() {
    // Midpoint rule on [0, 2U0] with θ = 0.2: 10⁷ points, none on E = U0.
    let u0 = 1.0;
    let t0 = 0.2 * u0 / BOLTZMANN;
    let n = 10_000_000usize;
    let h = 2.0 * u0 / n as f64;
    let dense: f64 = (0..n).map(|i| energy_density((i as f64 + 0.5) * h, t0, u0).unwrap()).sum::<f64>() * h;
    let r = integrate_with_endpoint_singularity(|e| energy_density(e, t0, u0).unwrap(), 0.0, 2.0 * u0, &[u0], 1e-12)
        .unwrap();
    assert!((r.value - dense).abs() < 1e-6, "{} vs {dense}", r.value);
}

#[test]
fn period_is_derivative_of_action() {
    for &x in &[0.3, 0.7, 2.0, 5.0] {
        let h = 1e-5;
        let fd = (action_ratio(x + h).unwrap() - action_ratio(x - h).unwrap()) / (2.0 * h);
        let tau = period_ratio(x).unwrap();
        assert!(((fd - tau) / tau).abs() < 1e-6, "x={x}: fd={fd} tau={tau}");
    }
}

#[test]
fn free_gas_limit_of_energy_density() {
    let kt = 1.0;
    let t0 = kt / BOLTZMANN;
    let u0 = 1e-8 * kt;
    for &e in &[0.5, 1.0, 2.0] {
        let model = energy_density(e, t0, u0).unwrap();
        let free = (-e / kt).exp() / (PI * e * kt).sqrt();
        assert!(((model - free) / free).abs() < 1e-3, "E={e}: {model} vs {free}");
    }
}

fn position_integral(x: f64, weight: impl Fn(f64) -> f64) -> f64 {
    let u0 = 1.0;
    let e = x * u0;
    if x < 1.0 {
        let a = x.sqrt().asin();
        integrate_with_endpoint_singularity(
            |kz| position_density_given_energy(kz, e, u0).unwrap() * weight(kz),
            -a,
            a,
            &[-a, a],
            1e-13,
        )
        .unwrap()
        .value
    } else {
        integrate_with_endpoint_singularity(
            |kz| position_density_given_energy(kz, e, u0).unwrap() * weight(kz),
            -FRAC_PI_2,
            FRAC_PI_2,
            &[],
            1e-13,
        )
        .unwrap()
        .value
    }
}

#[test]
fn position_density_normalizes_over_one_well() {
    for &x in &[0.3, 0.9, 2.0, 10.0] {
        let norm = position_integral(x, |_| 1.0);
        assert!((norm - 1.0).abs() < 1e-8, "x={x}: {norm}");
    }
}

#[test]
fn one_well_and_full_period_give_identical_averages() {
    // Above the barrier the density is π-periodic: [−π, π] holds two wells.
    let x = 2.5;
    let full = integrate_with_endpoint_singularity(
        |kz| position_density_given_energy(kz, x, 1.0).unwrap() * kz.sin().powi(2),
        -PI,
        PI,
        &[],
        1e-13,
    )
    .unwrap()
    .value;
    let full_norm = integrate_with_endpoint_singularity(
        |kz| position_density_given_energy(kz, x, 1.0).unwrap(),
        -PI,
        PI,
        &[],
        1e-13,
    )
    .unwrap()
    .value;
    let well = position_integral(x, |kz| kz.sin().powi(2));
    assert!((full / full_norm - well).abs() < 1e-12);
}

#[test]
fn trajectory_average_matches_position_quadrature() {
    for &x in &[0.5, 3.0] {
        let direct = position_integral(x, |kz| kz.sin().powi(2));
        let closed = bunching_ratio(x).unwrap();
        assert!((direct - closed).abs() < 1e-8, "x={x}: {direct} vs {closed}");
    }
}

#[test]
fn bunching_limits() {
    // Shallow lattice: delocalized.
    let b = bunching_dimensionless(1e4).unwrap();
    assert!((b - 0.5).abs() < 1e-3, "{b}");
    // Deep lattice: the adiabatic harmonic limit B ≈ √(θ/π).
    for &theta in &[1e-4, 1e-3] {
        let b = bunching_dimensionless(theta).unwrap();
        let harmonic = (theta / PI).sqrt();
        assert!(((b - harmonic) / harmonic).abs() < 0.02, "θ={theta}: {b} vs {harmonic}");
    }
}

#[test]
fn bunching_anchor_at_experiment_depth() {
    for &t0 in &[3.6, 3.5, 3.1] {
        let b = bunching(t0 * MK, 25.0 * MK * BOLTZMANN).unwrap();
        assert!((0.19..=0.25).contains(&b), "T0={t0} mK: B={b}");
    }
}

#[test]
fn bunching_monotonicity() {
    let u0 = 25.0 * MK * BOLTZMANN;
    let mut prev = 0.0;
    for i in 1..=12 {
        let b = bunching(0.5 * MK * i as f64, u0).unwrap();
        assert!(b > prev);
        prev = b;
    }
    let t0 = 3.5 * MK;
    let mut prev = 1.0;
    for i in 1..=12 {
        let b = bunching(t0, 4.0 * MK * BOLTZMANN * i as f64).unwrap();
        assert!(b < prev);
        prev = b;
    }
}

/// Inverse of the monotone map `x ↦ s(x)` by bisection.
fn energy_of_action(s: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while action_ratio(hi).unwrap() < s {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if action_ratio(mid).unwrap() < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn adiabatic_invariant_kolmogorov_smirnov() {
    // Sample the half-Gaussian action at depth a, carry the conserved action
    // to depth b, and compare the energies with the model CDF at depth b.
    let theta_a: f64 = 0.3;
    let (u_a, u_b): (f64, f64) = (1.0, 4.0);
    let theta_b = theta_a * u_a / u_b;
    let mut rng = ChaCha8Rng::seed_from_u64(2019);
    let n = 100_000;
    let sd = (2.0 * theta_a).sqrt();
    let mut xs: Vec<f64> = (0..n)
        .map(|_| {
            let g: f64 = rng.sample(rand_distr::StandardNormal);
            let s_a = (g * sd).abs();
            let s_b = s_a * (u_a / u_b).sqrt();
            energy_of_action(s_b)
        })
        .collect();
    xs.sort_by(f64::total_cmp);

    let cdf = |x: f64| -> f64 {
        let pts: &[f64] = if x > 1.0 { &[1.0] } else { &[] };
        integrate_with_endpoint_singularity(
            |y| energy_density_ratio(y, theta_b).unwrap_or(0.0),
            0.0,
            x,
            pts,
            1e-10,
        )
        .unwrap()
        .value
    };
    let mut d: f64 = 0.0;
    for q in 1..200 {
        let i = q * n / 200;
        let x = xs[i];
        let f = cdf(x);
        d = d.max((f - i as f64 / n as f64).abs());
    }
    assert!(d < 1.36 / (n as f64).sqrt(), "KS distance {d}");
}

/// Accepts an estimate whose error bound is small even if the requested
/// tolerance was not reached.
fn loose(r: Result<ion_lattice::specfun::QuadratureResult, ion_lattice::specfun::SpecfunError>) -> f64 {
    match r {
        Ok(r) => r.value,
        Err(ion_lattice::specfun::SpecfunError::NoConvergence { estimate, error_bound }) if error_bound < 1e-5 => estimate,
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn full_lorentzian_average_matches_far_detuned_product() {
    let ca = IonSpecies::calcium40();
    let lat = blue_lattice(25.0 * MK);
    let t0 = 3.5 * MK;
    let u0 = lat.depth;
    let theta = BOLTZMANN * t0 / u0;
    let rabi = rabi_frequency(&lat);
    let simple = ca.gamma_397 * rabi * rabi / (4.0 * lat.detuning * lat.detuning);
    let rel = |kz: f64| scattering_rate(kz, rabi, &lat, &ca) / simple;

    // ⟨Γ⟩ = ∫ P(x) ∫ P(kz|x) Γ_sc(kz) dkz dx with the inner average done by
    // the substitution sin(kz) = √x·sin φ below the barrier.
    let inner = |x: f64| -> f64 {
        if x < 1.0 {
            let k = ion_lattice::specfun::elliptic_k(x).unwrap();
            let g = |phi: f64| {
                let kz = (x.sqrt() * phi.sin()).asin();
                rel(kz) / (1.0 - x * phi.sin().powi(2)).sqrt()
            };
            loose(integrate_with_endpoint_singularity(g, 0.0, FRAC_PI_2, &[FRAC_PI_2], 1e-10 * k)) / k
        } else {
            loose(integrate_with_endpoint_singularity(
                |kz| position_density_given_energy(kz, x, 1.0).unwrap() * rel(kz),
                -FRAC_PI_2,
                FRAC_PI_2,
                &[-FRAC_PI_2, FRAC_PI_2],
                1e-10,
            ))
        }
    };
    let outer = integrate_with_endpoint_singularity(
        |x| energy_density_ratio(x, theta).unwrap_or(0.0) * inner(x),
        0.0,
        40.0,
        &[1.0],
        1e-7,
    );
    let brute = simple * loose(outer);
    let ramp = RampProfile::linear(1e-6, 0.0);
    let product = mean_scattering_rate(2e-6, t0, &ramp, &lat, &ca).unwrap();
    assert!(((brute - product) / product).abs() < 5e-3, "{brute} vs {product}");

    // At an antinode the full form differs from the far-detuned one only by
    // saturation and the linewidth.
    let hbar = 1.054_571_817e-34;
    let d = lat.detuning;
    let expected = 1.0 / (1.0 + 2.0 * u0 / (hbar * d) + (ca.gamma_p_total / (2.0 * d)).powi(2));
    assert!((rel(FRAC_PI_2) - expected).abs() < 1e-12);
    assert!((rel(FRAC_PI_2) - 1.0).abs() < 2e-3);
}

#[test]
fn delocalized_rate_is_half_the_antinode_rate() {
    let ca = IonSpecies::calcium40();
    let lat = blue_lattice(1e-6);
    let ramp = RampProfile::linear(1e-6, 0.0);
    let t0 = 10.0;
    let rate = mean_scattering_rate(2e-6, t0, &ramp, &lat, &ca).unwrap();
    let antinode = antinode_rate(1.0, &lat, &ca);
    assert!((rate / antinode - 0.5).abs() < 1e-3);
    assert_eq!(mean_scattering_rate(2e-6, t0, &ramp, &lat.with_depth(0.0), &ca).unwrap(), 0.0);
}

/// Classical RK4 on dP/dt = −⟨Γ⟩(t)·P with a fixed step.
fn ode_oracle(t_end: f64, t0: f64, ramp: &RampProfile, lat: &LatticeConfig, ca: &IonSpecies, steps: usize) -> f64 {
    let h = t_end / steps as f64;
    let rate = |t: f64| mean_scattering_rate(t, t0, ramp, lat, ca).unwrap();
    let mut p = 1.0;
    let mut t = 0.0;
    for _ in 0..steps {
        let k1 = -rate(t) * p;
        let k2 = -rate(t + 0.5 * h) * (p + 0.5 * h * k1);
        let k3 = -rate(t + 0.5 * h) * (p + 0.5 * h * k2);
        let k4 = -rate(t + h) * (p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    1.0 - p
}

#[test]
fn scattering_probability_matches_ode_oracle() {
    let ca = IonSpecies::calcium40();
    let ramp = RampProfile::experiment();
    let t0 = 3.6 * MK;
    // 300 RK4 steps put a grid node on the ramp kink at 2 µs.
    for &depth in &[1.0, 5.0, 12.0, 25.0] {
        for lat in [blue_lattice(depth * MK), red_lattice(depth * MK)] {
            let model = scattering_probability(3e-6, t0, &ramp, &lat, &ca).unwrap();
            let oracle = ode_oracle(3e-6, t0, &ramp, &lat, &ca, 300);
            assert!((model - oracle).abs() < 1e-6, "depth {depth} mK: {model} vs {oracle}");
        }
    }
}

#[test]
fn scattering_probability_constant_rate_and_zero_intensity() {
    let ca = IonSpecies::calcium40();
    let lat = blue_lattice(25.0 * MK);
    // Held from t = 0: the rate is constant.
    let ramp = RampProfile::linear(0.0, 5e-6);
    let t0 = 3.6 * MK;
    let rate = mean_scattering_rate(1e-6, t0, &ramp, &lat, &ca).unwrap();
    let p = scattering_probability(2e-6, t0, &ramp, &lat, &ca).unwrap();
    assert!((p - (1.0 - (-rate * 2e-6).exp())).abs() < 1e-12);
    assert_eq!(scattering_probability(3e-6, t0, &RampProfile::experiment(), &lat.with_depth(0.0), &ca).unwrap(), 0.0);
}

#[test]
fn scattering_probability_is_monotone_and_red_exceeds_blue() {
    let ca = IonSpecies::calcium40();
    let ramp = RampProfile::experiment();
    let t0 = 3.6 * MK;
    let lat = blue_lattice(25.0 * MK);
    let mut prev = 0.0;
    for i in 0..=6 {
        let p = scattering_probability(0.5e-6 * i as f64, t0, &ramp, &lat, &ca).unwrap();
        assert!(p >= prev);
        prev = p;
    }
    let mut prev = 0.0;
    for &d in &[2.0, 5.0, 10.0, 20.0, 25.0] {
        let blue = scattering_probability(3e-6, t0, &ramp, &blue_lattice(d * MK), &ca).unwrap();
        let red = scattering_probability(3e-6, t0, &ramp, &red_lattice(d * MK), &ca).unwrap();
        assert!(red >= blue);
        assert!(blue >= prev);
        prev = blue;
    }
}

#[test]
fn occupancy_scales_probability() {
    let ca = IonSpecies::calcium40();
    let ramp = RampProfile::experiment();
    let lat = blue_lattice(25.0 * MK);
    let full = scattering_probability_quiet(3e-6, 3.6 * MK, &ramp, &lat, &ca, 1.0).unwrap();
    let half = scattering_probability_quiet(3e-6, 3.6 * MK, &ramp, &lat, &ca, 0.5).unwrap();
    assert!((half - 0.5 * full).abs() < 1e-15);
    assert!(scattering_probability_quiet(3e-6, 3.6 * MK, &ramp, &lat, &ca, 1.5).is_err());
}

#[test]
fn adiabaticity_check() {
    let ca = IonSpecies::calcium40();
    let lat = blue_lattice(25.0 * MK);
    assert!(adiabaticity_shortfall(&RampProfile::experiment(), &lat, &ca).is_some());
    assert!(adiabaticity_shortfall(&RampProfile::linear(1e-5, 0.0), &lat, &ca).is_none());
}
