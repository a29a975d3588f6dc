//! Excess micromotion of the three experimental crystals.

use ion_lattice::constants::BOLTZMANN;
use ion_lattice::crystal::equilibrium;
use ion_lattice::micromotion::*;
use ion_lattice::{IonSpecies, TrapConfig};

fn ca() -> IonSpecies {
    IonSpecies::calcium40()
}

fn report(n: usize, axial: f64, radial: f64) -> MicromotionReport {
    let trap = TrapConfig::from_hz(axial, radial, 0.03, 3.98e6);
    let s = equilibrium(n, &trap, None, &ca(), None).unwrap();
    excess_micromotion(&s, &trap, &ca()).unwrap()
}

#[test]
fn string_has_no_radial_micromotion() {
    let r = report(8, 70e3, 350e3);
    for ion in &r.ions {
        assert!(ion.radial_amplitude() < 1e-15);
    }
    assert!(r.max_radial_temperature() < 1e-12);
}

#[test]
fn zigzag_and_octahedron_brackets() {
    let zig = report(4, 85e3, 170e3).max_radial_temperature();
    assert!((zig / 0.160 - 1.0).abs() < 0.5, "{zig}");
    let oct = report(6, 105e3, 190e3).max_radial_temperature();
    assert!((oct / 0.800 - 1.0).abs() < 0.5, "{oct}");
}

#[test]
fn axial_channel_is_weak() {
    // On-axis ions of the octahedron against its off-axis ions.
    let oct = report(6, 105e3, 190e3);
    let radial = oct.max_radial_temperature();
    let on_axis: Vec<_> = oct.ions.iter().filter(|i| i.radial_amplitude() < 1e-12).collect();
    assert_eq!(on_axis.len(), 2);
    for ion in on_axis {
        assert!(ion.equivalent_temperature[2] / radial < 1e-3);
    }
    // The zigzag has no ion on the rf-free line; its least displaced ions
    // still carry far less axial than radial energy.
    let zig = report(4, 85e3, 170e3);
    let radial = zig.max_radial_temperature();
    for ion in &zig.ions {
        assert!(ion.equivalent_temperature[2] / radial < 1e-2);
    }
    assert!(zig.effective_q_axial < 1e-2 * zig.q[1]);
}

#[test]
fn quadratic_scaling() {
    let mass = ca().mass;
    let omega = 2.0 * std::f64::consts::PI * 3.98e6;
    for r0 in [1e-6, 3e-6, 7e-6] {
        for q in [0.05, 0.12, 0.3] {
            let e = kinetic_energy(0.5 * r0 * q, omega, mass);
            let e2r = kinetic_energy(0.5 * 2.0 * r0 * q, omega, mass);
            let e2q = kinetic_energy(0.5 * r0 * 2.0 * q, omega, mass);
            assert!((e2r / e - 4.0).abs() < 1e-12 && (e2q / e - 4.0).abs() < 1e-12);
            assert!((equivalent_temperature(e) * BOLTZMANN / 2.0 / e - 1.0).abs() < 1e-14);
        }
    }
}

#[test]
fn explicit_q_overrides_derived() {
    let mut trap = TrapConfig::from_hz(85e3, 170e3, 0.03, 3.98e6);
    trap.q_radial = Some(0.14);
    trap.q_axial = Some(5e-4);
    let s = equilibrium(4, &trap, None, &ca(), None).unwrap();
    let r = excess_micromotion(&s, &trap, &ca()).unwrap();
    assert_eq!(r.q, [0.14, 0.14, 5e-4]);
    assert!((r.effective_q_axial - 1.225e-3).abs() < 1e-15);
    assert!((r.variance_broadening_factor[2] - 1.0 - 3.125e-8).abs() < 1e-16);
    for (ion, p) in r.ions.iter().zip(&s.positions) {
        assert!((ion.amplitude[1] - 0.07 * p[1].abs()).abs() < 1e-18);
    }
}
