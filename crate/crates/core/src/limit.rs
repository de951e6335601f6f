//! The Boltzmann–Kac equation ∂f/∂t = Q_γ(f) and its limit functionals.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditioned::{Ring, SELF_CHECK_TOLERANCE};
use crate::density::{GridDensity1D, GridSpec};
use crate::error::{KacError, Result};
use crate::quadrature::{lagrange4, trapezoid_weights, CompositeRule};

/// Grid used by the solver unless another is supplied: wide enough for the
/// hot component of f_{1/4}, fine enough for its cold one.
pub const PDE_GRID: GridSpec = GridSpec {
    v_max: 12.0,
    nodes: 1025,
};

/// Largest mass allowed within 5% of the grid edge before rotated arguments
/// are considered to leak out of the window.
pub const TAIL_LEAK_TOLERANCE: f64 = 1e-6;

/// Clipped negative mass per step above which time stepping is aborted.
pub const CLIP_TOLERANCE: f64 = 1e-8;

/// Default time step at γ = 0.
pub const DEFAULT_DT: f64 = 0.01;

const RING_ANGLES: usize = 256;

/// A solution snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    pub density: GridDensity1D,
    pub time: f64,
}

impl PdeState {
    pub fn new(density: GridDensity1D) -> Result<Self> {
        if (density.second_moment() - 1.0).abs() > 1e-6 {
            return Err(KacError::arg(format!(
                "initial density must have unit second moment, got {}",
                density.second_moment()
            )));
        }
        Ok(PdeState { density, time: 0.0 })
    }

    /// H(f|M) = ∫ f log f + ∫ v² f / 2 + log(2π)/2.
    pub fn entropy(&self) -> f64 {
        relative_entropy_any(&self.density)
    }
}

fn relative_entropy_any(f: &GridDensity1D) -> f64 {
    f.neg_entropy() + 0.5 * f.second_moment() + 0.5 * (2.0 * PI).ln()
}

/// (1 + s)^γ with cheap paths for the common exponents.
fn rate_weight(gamma: f64, s: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else if gamma == 0.5 {
        (1.0 + s).sqrt()
    } else if gamma == 1.0 {
        1.0 + s
    } else {
        (1.0 + s).powf(gamma)
    }
}

/// Q_γ on a fixed grid. The gain term reduces to
/// 2 ∫ (1 + v² + w²)^γ ḡ(√(v² + w²)) dw with ḡ(ρ) the circle average of
/// f(ρ cos φ) f(ρ sin φ), tabulated once per evaluation.
#[derive(Debug, Clone)]
pub struct CollisionOperator {
    grid: GridSpec,
    gamma: f64,
    weights: Vec<f64>,
    cos: Vec<f64>,
    drho: f64,
    rho_nodes: usize,
}

impl CollisionOperator {
    pub fn new(grid: GridSpec, gamma: f64) -> Result<Self> {
        grid.validate()?;
        if !(0.0..=1.0).contains(&gamma) {
            return Err(KacError::arg(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        let drho = 0.5 * grid.dv();
        let rho_nodes = (2f64.sqrt() * grid.v_max / drho).ceil() as usize + 3;
        let cos = (0..RING_ANGLES)
            .map(|a| (2.0 * PI * a as f64 / RING_ANGLES as f64).cos())
            .collect();
        Ok(CollisionOperator {
            grid,
            gamma,
            weights: trapezoid_weights(grid.nodes, grid.dv()),
            cos,
            drho,
            rho_nodes,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    fn node(&self, i: usize) -> f64 {
        -self.grid.v_max + i as f64 * self.grid.dv()
    }

    /// Circle averages ḡ(k dρ).
    fn ring_means(&self, values: &[f64]) -> Vec<f64> {
        let (x0, dv) = (-self.grid.v_max, self.grid.dv());
        let m = RING_ANGLES;
        let quarter = m / 4;
        (0..self.rho_nodes)
            .into_par_iter()
            .map_init(
                || vec![0.0; m],
                |fc, k| {
                    let rho = k as f64 * self.drho;
                    for (a, c) in self.cos.iter().enumerate() {
                        fc[a] = lagrange4(values, x0, dv, rho * c).map_or(0.0, |x| x.max(0.0));
                    }
                    // sin φ_a = cos φ_{m/4 − a}
                    (0..m).map(|a| fc[a] * fc[(quarter + m - a) % m]).sum::<f64>() / m as f64
                },
            )
            .collect()
    }

    /// Q_γ(f) at the grid nodes for raw node values (negative values are
    /// treated as zero).
    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.grid.nodes {
            return Err(KacError::arg(format!(
                "expected {} node values, got {}",
                self.grid.nodes,
                values.len()
            )));
        }
        let gbar = self.ring_means(values);
        let n = values.len();
        let half = n / 2;
        // the grid is symmetric and both integrands depend on w only through
        // w², so nodes ±w are folded together and only v ≥ 0 is computed
        let folded = |j: usize, x: &[f64]| {
            let mirror = n - 1 - j;
            if mirror == j {
                self.weights[j] * x[j]
            } else {
                self.weights[j] * x[j] + self.weights[mirror] * x[mirror]
            }
        };
        let clamped: Vec<f64> = values.iter().map(|x| x.max(0.0)).collect();
        let ones = vec![1.0; n];
        let paired: Vec<(f64, f64)> = (half..n).map(|j| (folded(j, &ones), folded(j, &clamped))).collect();
        let rates: Vec<(f64, f64)> = (half..n)
            .into_par_iter()
            .map(|i| {
                let v = self.node(i);
                let (mut gain, mut loss) = (0.0, 0.0);
                for (j, (cw, cf)) in (half..n).zip(&paired) {
                    let w = self.node(j);
                    let s = v * v + w * w;
                    let k = rate_weight(self.gamma, s);
                    gain += cw * k * lagrange4(&gbar, 0.0, self.drho, s.sqrt()).unwrap_or(0.0).max(0.0);
                    loss += cf * k;
                }
                (gain, loss)
            })
            .collect();
        Ok((0..n)
            .map(|i| {
                let (gain, loss) = rates[i.max(n - 1 - i) - half];
                2.0 * (gain - clamped[i] * loss)
            })
            .collect())
    }

    /// Upper bound 2 (2 + v_max²)^γ on the loss rate 2 ∫ (1 + v² + w²)^γ f(w) dw
    /// for unit-energy f (Jensen).
    pub fn loss_rate_bound(&self) -> f64 {
        2.0 * rate_weight(self.gamma, 1.0 + self.grid.v_max * self.grid.v_max)
    }
}

/// Mass of f within 5% of either edge of its window.
fn edge_mass(f: &GridDensity1D) -> f64 {
    let n = f.len();
    let edge = (n / 20).max(2);
    let w = f.quadrature_weights();
    let v = f.values();
    (0..edge).chain(n - edge..n).map(|i| w[i] * v[i]).sum()
}

fn check_tail(f: &GridDensity1D) -> Result<()> {
    let leak = edge_mass(f);
    if leak > TAIL_LEAK_TOLERANCE {
        return Err(KacError::accuracy("tail leak of the collision window", leak, TAIL_LEAK_TOLERANCE));
    }
    Ok(())
}

/// Q_γ(f) at the nodes of f's grid.
pub fn collision_operator(f: &GridDensity1D, gamma: f64) -> Result<Vec<f64>> {
    check_tail(f)?;
    CollisionOperator::new(f.grid(), gamma)?.apply(f.values())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub gamma: f64,
    pub t_end: f64,
    /// Time step; defaults to min(0.01, 0.25 / loss-rate bound).
    pub dt: Option<f64>,
    /// Interval between stored snapshots (every step is recorded in the rows).
    pub snapshot_every: f64,
    /// Evaluate D_γ at every snapshot.
    pub production: bool,
}

impl EvolveConfig {
    pub fn new(gamma: f64, t_end: f64) -> Self {
        EvolveConfig {
            gamma,
            t_end,
            dt: None,
            snapshot_every: t_end,
            production: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeRecord {
    pub time: f64,
    /// Mass after the step, before renormalization.
    pub mass: f64,
    pub energy: f64,
    pub entropy: f64,
    pub clipped: f64,
    pub d_gamma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PdeTrajectory {
    pub gamma: f64,
    pub dt: f64,
    pub rows: Vec<PdeRecord>,
    pub snapshots: Vec<PdeState>,
}

impl PdeTrajectory {
    pub fn final_state(&self) -> &PdeState {
        self.snapshots.last().expect("trajectory stores the final state")
    }

    /// Central difference of H(f(t)) at the recorded time closest to t.
    pub fn entropy_rate(&self, t: f64) -> Result<f64> {
        let k = self
            .rows
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.time - t).abs().total_cmp(&(b.1.time - t).abs()))
            .map(|(k, _)| k)
            .ok_or_else(|| KacError::State("empty trajectory".into()))?;
        if k == 0 || k + 1 >= self.rows.len() {
            return Err(KacError::arg(format!("t = {t} is at the end of the recorded interval")));
        }
        let (a, b) = (&self.rows[k - 1], &self.rows[k + 1]);
        Ok((b.entropy - a.entropy) / (b.time - a.time))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mass", "energy", "H", "D_gamma"])?;
        for r in &self.rows {
            w.write_record([
                format!("{:.6}", r.time),
                format!("{:.12e}", r.mass),
                format!("{:.12e}", r.energy),
                format!("{:.12e}", r.entropy),
                r.d_gamma.map_or(String::new(), |d| format!("{d:.12e}")),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Classical RK4 with nonnegativity clipping and mass renormalization per step.
pub fn evolve(state: &PdeState, config: &EvolveConfig) -> Result<PdeTrajectory> {
    if !(config.t_end > 0.0) || !config.t_end.is_finite() {
        return Err(KacError::arg(format!("t_end must be positive, got {}", config.t_end)));
    }
    if !(config.snapshot_every > 0.0) {
        return Err(KacError::arg("snapshot interval must be positive"));
    }
    check_tail(&state.density)?;
    let f0 = &state.density;
    let op = CollisionOperator::new(f0.grid(), config.gamma)?;
    let dt_max = config.dt.unwrap_or(DEFAULT_DT.min(0.25 / op.loss_rate_bound()));
    if !(dt_max > 0.0) {
        return Err(KacError::arg(format!("dt must be positive, got {dt_max}")));
    }
    let steps = (config.t_end / dt_max).ceil() as usize;
    let dt = config.t_end / steps as f64;
    let weights = f0.quadrature_weights().to_vec();
    let nodes: Vec<f64> = f0.nodes().collect();
    let v_max = f0.v_max();
    let tag = f0.tag().to_string();

    let snapshot = |values: &[f64], time: f64| -> Result<PdeState> {
        Ok(PdeState {
            density: GridDensity1D::from_values(v_max, values.to_vec(), tag.clone())?,
            time,
        })
    };
    let production = |s: &PdeState| -> Result<Option<f64>> {
        if config.production {
            limit_production(&s.density, config.gamma).map(Some)
        } else {
            Ok(None)
        }
    };

    let mut f = f0.values().to_vec();
    let first = snapshot(&f, state.time)?;
    let mut rows = vec![PdeRecord {
        time: state.time,
        mass: first.density.mass(),
        energy: first.density.second_moment(),
        entropy: first.entropy(),
        clipped: 0.0,
        d_gamma: production(&first)?,
    }];
    let mut snapshots = vec![first];
    let mut next_snapshot = state.time + config.snapshot_every;
    let axpy = |a: &[f64], k: &[f64], h: f64| -> Vec<f64> { a.iter().zip(k).map(|(x, y)| x + h * y).collect() };

    for step in 1..=steps {
        let time = state.time + step as f64 * dt;
        let k1 = op.apply(&f)?;
        let k2 = op.apply(&axpy(&f, &k1, 0.5 * dt))?;
        let k3 = op.apply(&axpy(&f, &k2, 0.5 * dt))?;
        let k4 = op.apply(&axpy(&f, &k3, dt))?;
        for i in 0..f.len() {
            f[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let mut clipped = 0.0;
        for (x, w) in f.iter_mut().zip(&weights) {
            if *x < 0.0 {
                clipped -= w * *x;
                *x = 0.0;
            }
        }
        if clipped > CLIP_TOLERANCE {
            return Err(KacError::Stability { clipped, time });
        }
        let mass: f64 = f.iter().zip(&weights).map(|(x, w)| x * w).sum();
        f.iter_mut().for_each(|x| *x /= mass);
        let energy: f64 = f.iter().zip(&weights).zip(&nodes).map(|((x, w), v)| x * w * v * v).sum();
        let neg_entropy: f64 = f
            .iter()
            .zip(&weights)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, w)| w * x * x.ln())
            .sum();
        let mut row = PdeRecord {
            time,
            mass,
            energy,
            entropy: neg_entropy + 0.5 * energy + 0.5 * (2.0 * PI).ln(),
            clipped,
            d_gamma: None,
        };
        if time >= next_snapshot - 0.5 * dt || step == steps {
            let s = snapshot(&f, time)?;
            row.d_gamma = production(&s)?;
            snapshots.push(s);
            next_snapshot += config.snapshot_every;
        }
        rows.push(row);
    }
    Ok(PdeTrajectory {
        gamma: config.gamma,
        dt,
        rows,
        snapshots,
    })
}

/// Quadrature resolution for the limit production: Gauss–Legendre nodes in
/// ρ and equispaced angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneResolution {
    pub radial: usize,
    pub angular: usize,
}

impl Default for PlaneResolution {
    fn default() -> Self {
        PlaneResolution {
            radial: 512,
            angular: 256,
        }
    }
}

/// D_γ(f) = 4π ∫ ρ (1 + ρ²)^γ Cov_φ(g, log g) dρ at a fixed resolution.
pub fn limit_production_at(f: &GridDensity1D, gamma: f64, res: PlaneResolution) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(KacError::arg(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let order = 16;
    let rule = CompositeRule::new(0.0, 2f64.sqrt() * f.v_max(), (res.radial / order).max(1), order);
    let mut ring = Ring::new(res.angular);
    let mut total = 0.0;
    for (&rho, &w) in rule.points.iter().zip(&rule.weights) {
        ring.fill(f, rho);
        total += w * rho * rate_weight(gamma, rho * rho) * ring.covariance();
    }
    Ok(4.0 * PI * total)
}

/// D_γ(f), with the resolution doubled until the value moves by less than 0.1%.
pub fn limit_production(f: &GridDensity1D, gamma: f64) -> Result<f64> {
    check_tail(f)?;
    let mut res = PlaneResolution::default();
    let mut prev = limit_production_at(f, gamma, res)?;
    let mut change = f64::INFINITY;
    for _ in 0..5 {
        res = PlaneResolution {
            radial: 2 * res.radial,
            angular: 2 * res.angular,
        };
        let next = limit_production_at(f, gamma, res)?;
        change = (next - prev).abs() / next.abs().max(1e-300);
        prev = next;
        if change < SELF_CHECK_TOLERANCE || next.abs() < 1e-12 {
            return Ok(next);
        }
    }
    Err(KacError::accuracy("limit entropy production", change, SELF_CHECK_TOLERANCE))
}

/// D(f) / (2 H(f|M)).
pub fn cercignani_ratio(f: &GridDensity1D) -> Result<f64> {
    let h = f.relative_entropy()?;
    if h < 1e-12 {
        return Err(KacError::Degenerate(format!(
            "H(f|M) = {h:.3e}: f is indistinguishable from the Maxwellian"
        )));
    }
    Ok(limit_production(f, 0.0)? / (2.0 * h))
}
