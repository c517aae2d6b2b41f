use std::f64::consts::PI;

use acsm_core::pde::{PdeKind, PdeProblem};
use acsm_core::refsolver::{cahn_hilliard_energy, mass, snapshot_times, solve_reference, ReferenceSolution};

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = b.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

fn last(sol: &ReferenceSolution) -> &[f64] {
    sol.snapshot(sol.n_snap() - 1)
}

/// Mass drift measured against the L1 size of the initial state, since the
/// KdV initial mass is zero.
fn max_mass_drift(sol: &ReferenceSolution) -> f64 {
    let len = sol.x_hi - sol.x_lo;
    let m0 = mass(sol.snapshot(0), len);
    let abs0: Vec<f64> = sol.snapshot(0).iter().map(|u| u.abs()).collect();
    let scale = m0.abs().max(mass(&abs0, len));
    (0..sol.n_snap()).map(|s| (mass(sol.snapshot(s), len) - m0).abs() / scale).fold(0.0, f64::max)
}

#[test]
fn advection_analytic() {
    let p = PdeProblem::advection();
    let sol = solve_reference(&p, 512, 1e-3, &snapshot_times(1.0, 11)).unwrap();
    for s in 0..sol.n_snap() {
        for (j, x) in sol.x.iter().enumerate() {
            let exact = (PI * (x - sol.t[s])).cos();
            assert!((sol.value(s, j) - exact).abs() < 1e-8);
        }
    }
}

#[test]
fn kdv_conservation_and_convergence() {
    let p = PdeProblem::kdv();
    let times = snapshot_times(0.8, 11);
    let fine = solve_reference(&p, 512, 1e-5, &times).unwrap();
    let drift = max_mass_drift(&fine);
    println!("kdv mass drift {drift:e}");
    assert!(drift < 1e-8);
    let half = solve_reference(&p, 512, 5e-6, &times).unwrap();
    let dt_change = rel_l2(last(&fine), last(&half));
    let coarse = solve_reference(&p, 256, 1e-5, &times).unwrap();
    let restricted: Vec<f64> = last(&fine).iter().step_by(2).copied().collect();
    let nx_change = rel_l2(last(&coarse), &restricted);
    println!("kdv dt-halving {dt_change:e}, N_x doubling {nx_change:e}");
    assert!(dt_change < 1e-7);
    assert!(nx_change < 1e-7);
}

#[test]
fn cahn_hilliard_conservation_energy_and_convergence() {
    let p = PdeProblem::cahn_hilliard_case1();
    let PdeKind::CahnHilliard { r1, r2 } = p.kind else { unreachable!() };
    let times = snapshot_times(1.0, 101);
    let fine = solve_reference(&p, 512, 1e-5, &times).unwrap();
    let drift = max_mass_drift(&fine);
    println!("ch mass drift {drift:e}");
    assert!(drift < 1e-8);
    let energies: Vec<f64> = (0..fine.n_snap()).map(|s| cahn_hilliard_energy(fine.snapshot(s), 2.0, r1, r2).unwrap()).collect();
    for w in energies.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "energy rose {} -> {}", w[0], w[1]);
    }
    let half = solve_reference(&p, 512, 5e-6, &times).unwrap();
    let dt_change = rel_l2(last(&fine), last(&half));
    let coarse = solve_reference(&p, 256, 1e-5, &times).unwrap();
    let restricted: Vec<f64> = last(&fine).iter().step_by(2).copied().collect();
    let nx_change = rel_l2(last(&coarse), &restricted);
    println!("ch dt-halving {dt_change:e}, N_x doubling {nx_change:e}, energy {:?}", (energies[0], energies[100]));
    assert!(dt_change < 1e-7);
    assert!(nx_change < 1e-7);
}
