//! Statistical checks of the quantum-jump simulation against exact results.

use condqed::basis::ExcitationBasis;
use condqed::model::{angular, per_ns};
use condqed::steady_state::no_jump_generator;
use condqed::trajectory::{run, Detector, InitialState, TrajectoryConfig};
use condqed::SystemParams;

/// Kolmogorov–Smirnov statistic of samples against a CDF.
fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn empty_cavity_photon_leaves_exponentially() {
    let p = SystemParams::new(0.0, 3.7, 6.0, 1.0, 0.0);
    let cfg = TrajectoryConfig {
        duration_ns: 2000.0,
        n_trajectories: 4000,
        seed: 11,
        cutoff: 2,
        initial: InitialState::Basis { photons: 1, excited: 0 },
        ..Default::default()
    };
    let out = run(&p, &cfg).unwrap();
    assert_eq!(out.clicks.len(), 4000);
    assert_eq!(out.stats.cavity_jumps, 4000);
    let mut per_traj = vec![0u32; 4000];
    for c in &out.clicks {
        per_traj[c.trajectory_id as usize] += 1;
    }
    assert!(per_traj.iter().all(|&n| n == 1));
    let rate = per_ns(2.0 * angular(3.7));
    let times: Vec<f64> = out.clicks.iter().map(|c| c.time_ns).collect();
    let d = ks_statistic(times, |t| 1.0 - (-rate * t).exp());
    // 1% critical value
    assert!(d < 1.628 / 4000f64.sqrt(), "KS statistic {d}");
}

#[test]
fn single_excitation_branching_matches_no_jump_integral() {
    let p = SystemParams::new(1.2, 3.7, 6.0, 4.0, 0.0).with_gamma_prime(9.1);
    let n = 20_000;
    let cfg = TrajectoryConfig {
        duration_ns: 1500.0,
        n_trajectories: n,
        seed: 5,
        cutoff: 2,
        initial: InitialState::Basis { photons: 0, excited: 1 },
        ..Default::default()
    };
    let out = run(&p, &cfg).unwrap();
    assert_eq!(out.stats.cavity_jumps + out.stats.atomic_jumps, n);

    // probability of leaving through the cavity: ∫ 2κ|c₁₀(t)|² dt
    let basis = ExcitationBasis::new(p.n_atoms, 2).unwrap();
    let a = no_jump_generator(&p, &basis, 0.0) * 1e-3;
    let (i10, i01) = (basis.index_of(1, 0).unwrap(), basis.index_of(0, 1).unwrap());
    let dt = 0.01;
    let step = (&a * dt).exp();
    let mut c = nalgebra::DVector::zeros(basis.len());
    c[i01] = 1.0;
    let kappa2 = per_ns(2.0 * angular(3.7));
    let mut prob = 0.0;
    for _ in 0..150_000 {
        let next = &step * &c;
        prob += 0.5 * dt * kappa2 * (c[i10].powi(2) + next[i10].powi(2));
        c = next;
    }
    let observed = out.stats.cavity_jumps as f64 / n as f64;
    let sigma = (prob * (1.0 - prob) / n as f64).sqrt();
    assert!((observed - prob).abs() < 4.0 * sigma, "observed {observed}, expected {prob} ± {sigma}");
}

#[test]
fn steady_click_rate_matches_field_amplitude() {
    let lambda = 0.03;
    let p = SystemParams::new(5.1, 3.7, 6.0, 20.0, 0.0)
        .with_gamma_prime(9.1)
        .with_lambda(lambda);
    let cfg = TrajectoryConfig {
        duration_ns: 20_000.0,
        n_trajectories: 500,
        seed: 3,
        cutoff: 5,
        ..Default::default()
    };
    let out = run(&p, &cfg).unwrap();
    let expected = per_ns(2.0 * angular(3.7)) * lambda * lambda * out.stats.recorded_ns;
    let observed = out.stats.cavity_jumps as f64;
    assert!(
        (observed - expected).abs() < 3.0 * expected.sqrt() + 0.01 * expected,
        "observed {observed}, expected {expected}"
    );
    // the splitter sends half to each detector
    let starts = out.clicks.iter().filter(|c| c.detector == Detector::Start).count() as f64;
    assert!((starts / observed - 0.5).abs() < 4.0 * (0.25 / observed).sqrt());
}
