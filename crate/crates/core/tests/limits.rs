//! Large-N limits of the conditioned family and the limit inequality along
//! the kinetic flow.

use kac_core::conditioned::FamilyConfig;
use kac_core::inequalities::{boltzmann_trajectory_check, gamma_ratio_sweep, GeneratorSource};
use kac_core::limit::{evolve, limit_production, EvolveConfig, PdeState, PDE_GRID};
use kac_core::{mixture, mixture_on, MixtureSpec};

#[test]
fn entropic_gap_ratio_approaches_the_limit_ratio() {
    let f = mixture(MixtureSpec::new(0.25).unwrap()).unwrap();
    let limit = limit_production(&f, 0.0).unwrap() / (2.0 * f.relative_entropy().unwrap());
    let rows = gamma_ratio_sweep(&GeneratorSource::Fixed(f), 0.0, &[64, 256], FamilyConfig::default()).unwrap();
    let gaps: Vec<f64> = rows.iter().map(|r| (r.gamma_hat / limit - 1.0).abs()).collect();
    eprintln!("D/(2H) = {limit:.5}; Γ̂_N relative gaps {gaps:?}");
    assert!(gaps[1] < 0.10, "{gaps:?}");
    assert!(gaps[1] < gaps[0]);
}

#[test]
fn limit_inequality_ratio_stays_away_from_zero_along_the_flow() {
    let f0 = mixture_on(MixtureSpec::new(0.25).unwrap(), PDE_GRID).unwrap();
    let mut config = EvolveConfig::new(0.5, 5.0);
    config.snapshot_every = 0.5;
    let traj = evolve(&PdeState::new(f0).unwrap(), &config).unwrap();
    let check = boltzmann_trajectory_check(&traj, 1.0, 3.0).unwrap();
    let ratios: Vec<f64> = check.reports.iter().filter_map(|r| r.ratio).collect();
    eprintln!("D_γ/H^a along the flow: {ratios:?}");
    assert_eq!(ratios.len(), 11);
    assert!(check.reports.iter().all(|r| r.hypotheses.satisfied));
    let first = ratios[0];
    assert!(ratios.iter().all(|&r| r >= 0.5 * first), "{ratios:?}");
}
