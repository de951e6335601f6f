//! The stochastic Kac process with velocity-dependent collision rates, simulated
//! by thinning, plus exact small-N spectral analysis of its generator.

mod observe;
mod spectral;

pub use observe::{empirical_marginal, wasserstein1, wasserstein1_samples, Histogram, HistogramSpec};
pub use spectral::{dirichlet_rayleigh, generator_matrix_small_n, spectral_gap, RayleighEstimate, MAX_GALERKIN_DEGREE};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KacError, Result};
use crate::sphere::{apply_rotation_in_place, RotationSpec, VelocityEnsemble};

/// Accepted collisions between two energy renormalizations.
pub const DEFAULT_RENORMALIZE_EVERY: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub gamma: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Time between two recorded observations.
    pub cadence: f64,
    pub renormalize_every: u64,
    /// Histogram of the pooled velocities recorded with every observation.
    pub histogram: Option<HistogramSpec>,
}

impl SimulationConfig {
    pub fn new(n: usize, gamma: f64, t_end: f64, seed: u64) -> Self {
        SimulationConfig {
            n,
            gamma,
            t_end,
            seed,
            cadence: t_end,
            renormalize_every: DEFAULT_RENORMALIZE_EVERY,
            histogram: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(KacError::arg(format!("the Kac process needs N >= 2, got {}", self.n)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(KacError::arg(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(KacError::arg(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.cadence > 0.0) {
            return Err(KacError::arg(format!("cadence must be positive, got {}", self.cadence)));
        }
        if self.renormalize_every == 0 {
            return Err(KacError::arg("renormalize_every must be positive"));
        }
        Ok(())
    }

    /// Dominating event rate Λ = N (1 + N)^γ.
    pub fn dominating_rate(&self) -> f64 {
        let n = self.n as f64;
        n * (1.0 + n).powf(self.gamma)
    }

    /// Random stream of replica `index`: the seed plus a stream id.
    pub fn replica_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// State of the process at one observation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    /// Mean of v_i² over particles.
    pub second_moment: f64,
    /// Mean of v_i⁴ over particles.
    pub fourth_moment: f64,
    pub energy: f64,
    pub collisions: u64,
    pub proposals: u64,
    pub acceptance_rate: f64,
    pub histogram: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub times: Vec<f64>,
    pub observations: Vec<Observation>,
    pub final_state: VelocityEnsemble,
}

impl TrajectoryStats {
    pub fn last(&self) -> &Observation {
        self.observations.last().expect("a trajectory records at least one observation")
    }

    /// Observations as CSV rows (histograms omitted).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "time",
            "second_moment",
            "fourth_moment",
            "energy",
            "collisions",
            "proposals",
            "acceptance_rate",
        ])?;
        for o in &self.observations {
            w.write_record([
                format!("{:.6}", o.time),
                format!("{:.12e}", o.second_moment),
                format!("{:.12e}", o.fourth_moment),
                format!("{:.12e}", o.energy),
                o.collisions.to_string(),
                o.proposals.to_string(),
                format!("{:.6}", o.acceptance_rate),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A proposed collision, reported to observers whether or not it was accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    pub time: f64,
    pub i: usize,
    pub j: usize,
    pub theta: f64,
    /// v_i² + v_j² before the collision.
    pub pair_energy: f64,
    pub accepted: bool,
}

/// Runs one trajectory.
pub fn simulate<R: Rng + ?Sized>(
    initial: &VelocityEnsemble,
    config: &SimulationConfig,
    rng: &mut R,
) -> Result<TrajectoryStats> {
    simulate_observed(initial, config, rng, |_, _| {})
}

/// Runs one trajectory, calling `observer` after every proposal with the
/// event and the velocities after it.
pub fn simulate_observed<R, F>(
    initial: &VelocityEnsemble,
    config: &SimulationConfig,
    rng: &mut R,
    mut observer: F,
) -> Result<TrajectoryStats>
where
    R: Rng + ?Sized,
    F: FnMut(&CollisionEvent, &[f64]),
{
    config.validate()?;
    if initial.n() != config.n {
        return Err(KacError::arg(format!(
            "initial ensemble has {} particles, configuration says {}",
            initial.n(),
            config.n
        )));
    }
    let n = config.n;
    let nf = n as f64;
    let rate = config.dominating_rate();
    let waiting = Exp::new(rate).map_err(|e| KacError::arg(e.to_string()))?;
    let mut state = initial.clone();
    let mut time = 0.0;
    let mut next_obs = 0.0;
    let (mut proposals, mut collisions, mut since_renorm) = (0u64, 0u64, 0u64);
    let mut observations = Vec::new();
    let mut record = |t: f64, state: &VelocityEnsemble, proposals: u64, collisions: u64| {
        observations.push(observe(t, state, proposals, collisions, config));
    };
    loop {
        let dt = waiting.sample(rng);
        let t_next = time + dt;
        while next_obs <= config.t_end && next_obs < t_next {
            record(next_obs, &state, proposals, collisions);
            next_obs += config.cadence;
        }
        if t_next > config.t_end {
            break;
        }
        time = t_next;
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let (i, j) = (i.min(j), i.max(j));
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        let v = state.velocities();
        let pair_energy = v[i] * v[i] + v[j] * v[j];
        let accepted = config.gamma == 0.0
            || rng.random::<f64>() < ((1.0 + pair_energy) / (1.0 + nf)).powf(config.gamma);
        proposals += 1;
        if accepted {
            apply_rotation_in_place(&mut state, &RotationSpec::new(i, j, theta)?)?;
            collisions += 1;
            since_renorm += 1;
            if since_renorm >= config.renormalize_every {
                state.renormalize();
                since_renorm = 0;
            }
        }
        observer(
            &CollisionEvent {
                time,
                i,
                j,
                theta,
                pair_energy,
                accepted,
            },
            state.velocities(),
        );
    }
    // the final time is always observed
    if next_obs - config.cadence < config.t_end {
        record(config.t_end, &state, proposals, collisions);
    }
    let times = observations.iter().map(|o| o.time).collect();
    Ok(TrajectoryStats {
        times,
        observations,
        final_state: state,
    })
}

fn observe(time: f64, state: &VelocityEnsemble, proposals: u64, collisions: u64, config: &SimulationConfig) -> Observation {
    let v = state.velocities();
    let nf = v.len() as f64;
    let energy = state.energy();
    Observation {
        time,
        second_moment: energy / nf,
        fourth_moment: v.iter().map(|x| x.powi(4)).sum::<f64>() / nf,
        energy,
        collisions,
        proposals,
        acceptance_rate: if proposals == 0 {
            1.0
        } else {
            collisions as f64 / proposals as f64
        },
        histogram: config
            .histogram
            .map(|spec| empirical_marginal(std::iter::once(v), &spec).density),
    }
}

/// Runs `count` independent replicas in parallel. Replica r uses the stream
/// [`SimulationConfig::replica_rng`]`(r)` both for its initial state and its
/// trajectory, so results do not depend on scheduling.
pub fn replicas<I>(config: &SimulationConfig, count: usize, initial: I) -> Result<Vec<TrajectoryStats>>
where
    I: Fn(&mut ChaCha8Rng) -> Result<VelocityEnsemble> + Sync,
{
    config.validate()?;
    (0..count)
        .into_par_iter()
        .map(|r| {
            let mut rng = config.replica_rng(r as u64);
            let start = initial(&mut rng)?;
            simulate(&start, config, &mut rng)
        })
        .collect()
}
