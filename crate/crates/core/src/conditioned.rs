//! The conditioned tensorisation F_N of a generator f: the product f^{⊗N}
//! restricted to Kac's sphere and renormalized.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{psi_beta_ln, GridDensity1D};
use crate::error::{KacError, Result};
use crate::normalization::{LadderConfig, NormalizationLadder};
use crate::quadrature::CompositeRule;
use crate::sphere::{ln_marginal_kernel, VelocityEnsemble};

/// Relative change below which a doubled resolution is accepted.
pub const SELF_CHECK_TOLERANCE: f64 = 1e-3;

/// Largest deviation of a marginal's mass from 1 before a quadrature is rejected.
pub const MARGINAL_MASS_TOLERANCE: f64 = 1e-4;

/// Maximum number of proposals for a single coordinate.
pub const MAX_REJECTION_TRIALS: usize = 1_000_000;

/// Quadrature resolution on the disk v₁² + v₂² ≤ N: Gauss–Legendre nodes in
/// s = ρ² and equispaced nodes in the angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskResolution {
    pub radial: usize,
    pub angular: usize,
}

impl Default for DiskResolution {
    fn default() -> Self {
        DiskResolution {
            radial: 512,
            angular: 256,
        }
    }
}

impl DiskResolution {
    fn doubled(self) -> Self {
        DiskResolution {
            radial: 2 * self.radial,
            angular: 2 * self.angular,
        }
    }

    fn radial_rule(&self, n: f64) -> CompositeRule {
        let order = 16;
        CompositeRule::new(0.0, n, (self.radial / order).max(1), order)
    }
}

/// Resolution settings for a family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub ladder: LadderConfig,
    pub disk: DiskResolution,
    /// Panels of 16-point Gauss–Legendre on [-√N, √N] for one-dimensional integrals.
    pub line_panels: usize,
    /// Maximum number of resolution doublings in the self-check.
    pub max_doublings: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            ladder: LadderConfig::default(),
            disk: DiskResolution::default(),
            line_panels: 64,
            max_doublings: 4,
        }
    }
}

/// F_N = f^{⊗N} / Z_N(f, √N) on S^{N-1}(√N).
#[derive(Debug, Clone)]
pub struct ConditionedFamily {
    n: usize,
    ladder: Arc<NormalizationLadder>,
    ln_h_n: f64,
    config: FamilyConfig,
}

impl ConditionedFamily {
    /// Builds the ladder levels N-2, N-1, N for `f`.
    pub fn new(f: &GridDensity1D, n: usize, config: FamilyConfig) -> Result<Self> {
        check_generator(f, n)?;
        let levels = [n - 2, n - 1, n];
        let ladder = NormalizationLadder::build(f, &levels, &config.ladder)?;
        Self::from_ladder(Arc::new(ladder), n, config)
    }

    /// Uses an existing ladder, which must cover N-2, N-1 and N up to u = N.
    pub fn from_ladder(ladder: Arc<NormalizationLadder>, n: usize, config: FamilyConfig) -> Result<Self> {
        check_generator(ladder.generator(), n)?;
        for level in [n - 2, n - 1, n] {
            if !ladder.has_level(level) {
                return Err(KacError::State(format!("ladder lacks level {level} needed for N = {n}")));
            }
        }
        if ladder.u_max() < n as f64 {
            return Err(KacError::config(format!(
                "ladder u-grid ends at {} < N = {n}",
                ladder.u_max()
            )));
        }
        let ln_h_n = ladder.ln_h(n, n as f64)?;
        Ok(ConditionedFamily {
            n,
            ladder,
            ln_h_n,
            config,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generator(&self) -> &GridDensity1D {
        self.ladder.generator()
    }

    pub fn ladder(&self) -> &NormalizationLadder {
        &self.ladder
    }

    pub fn config(&self) -> &FamilyConfig {
        &self.config
    }

    /// log Z_N(f, √N).
    pub fn ln_z(&self) -> Result<f64> {
        self.ladder.z_value(self.n, self.n as f64)
    }

    /// log of h^{⊗(N-k)}(N - s) / h^{⊗N}(N), the factor multiplying Π f in
    /// the k-marginal. `-inf` for s ≥ N.
    pub fn ln_marginal_weight(&self, k: usize, s: f64) -> Result<f64> {
        let residual = self.n as f64 - s;
        if !(residual > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.ladder.ln_h(self.n - k, residual)? - self.ln_h_n)
    }

    /// F_{N,k}(point) for k ∈ {1, 2}:
    /// marginal_kernel · Z_{N-k}(f, √(N-s)) / Z_N(f, √N) · Π f(v_i).
    pub fn marginal(&self, point: &[f64]) -> Result<f64> {
        let k = point.len();
        if !(k == 1 || k == 2) {
            return Err(KacError::arg(format!("marginals are available for k = 1, 2, got {k}")));
        }
        let s: f64 = point.iter().map(|v| v * v).sum();
        let nf = self.n as f64;
        if s >= nf {
            return Ok(0.0);
        }
        let ln_f: f64 = point.iter().map(|&v| self.generator().ln_eval(v)).sum();
        if self.n - k < 2 {
            return Ok((self.ln_marginal_weight(k, s)? + ln_f).exp());
        }
        let ln_kernel = ln_marginal_kernel(self.n, k, s)?;
        let ln_ratio = self.ladder.log_z_ratio(self.n - k, nf - s, self.n, nf)?;
        Ok((ln_kernel + ln_ratio + ln_f).exp())
    }

    fn line_rule(&self) -> CompositeRule {
        let r = (self.n as f64).sqrt();
        CompositeRule::new(-r, r, self.config.line_panels, 16)
    }

    /// ∫ F_{N,1}.
    pub fn first_marginal_mass(&self) -> Result<f64> {
        let rule = self.line_rule();
        let mut mass = 0.0;
        for (&v, &w) in rule.points.iter().zip(&rule.weights) {
            mass += w * (self.generator().ln_eval(v) + self.ln_marginal_weight(1, v * v)?).exp();
        }
        Ok(mass)
    }

    /// M_p(F_{N,1}) = ∫ |v|^p F_{N,1}(v) dv.
    pub fn first_marginal_moment(&self, p: u32) -> Result<f64> {
        let rule = self.line_rule();
        let mut total = 0.0;
        for (&v, &w) in rule.points.iter().zip(&rule.weights) {
            total += w * v.abs().powi(p as i32) * (self.generator().ln_eval(v) + self.ln_marginal_weight(1, v * v)?).exp();
        }
        Ok(total)
    }

    /// Kac's entropy H_N(F_N) = N ∫ F_{N,1} log f - log Z_N(f, √N), the
    /// integral taken over v ∈ [-√N, √N].
    pub fn entropy_hn(&self) -> Result<f64> {
        let rule = self.line_rule();
        let (mut mass, mut cross) = (0.0, 0.0);
        for (&v, &w) in rule.points.iter().zip(&rule.weights) {
            let ln_f = self.generator().ln_eval(v);
            let marginal = (ln_f + self.ln_marginal_weight(1, v * v)?).exp();
            mass += w * marginal;
            cross += w * marginal * ln_f;
        }
        check_mass("first marginal", mass)?;
        Ok(self.n as f64 * cross - self.ln_z()?)
    }

    /// Generalized entropy production D_{N,γ}(F_N), with the resolution
    /// doubled until the value moves by less than 0.1%.
    pub fn production_dn(&self, gamma: f64) -> Result<f64> {
        check_gamma(gamma)?;
        self.self_checked("entropy production", |res| self.production_at(gamma, res))
    }

    /// (1/2π) ∫∫ ψ_β(F_N(V), F_N(R_{1,2,θ}V)) dσ_N dθ, self-checked like
    /// [`ConditionedFamily::production_dn`].
    pub fn log_power_integral(&self, beta: f64) -> Result<f64> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(KacError::arg(format!("beta must be positive, got {beta}")));
        }
        self.self_checked("log-power integral", |res| self.log_power_at(beta, res))
    }

    fn self_checked(&self, what: &str, eval: impl Fn(DiskResolution) -> Result<f64>) -> Result<f64> {
        let mut res = self.config.disk;
        let mut prev = eval(res)?;
        let mut change = f64::INFINITY;
        for _ in 0..self.config.max_doublings {
            res = res.doubled();
            let next = eval(res)?;
            change = (next - prev).abs() / next.abs().max(1e-300);
            prev = next;
            if change < SELF_CHECK_TOLERANCE || next.abs() < 1e-12 {
                return Ok(next);
            }
        }
        Err(KacError::accuracy(format!("{what} at N = {}", self.n), change, SELF_CHECK_TOLERANCE))
    }

    /// πN ∫_0^N W₂(s) (1+s)^γ Cov_φ(g, log g) ds, with g(φ) = f(ρ cos φ) f(ρ sin φ).
    pub fn production_at(&self, gamma: f64, res: DiskResolution) -> Result<f64> {
        let rule = res.radial_rule(self.n as f64);
        let mut ring = Ring::new(res.angular);
        let (mut total, mut mass) = (0.0, 0.0);
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let weight = self.ln_marginal_weight(2, s)?.exp();
            ring.fill(self.generator(), s.sqrt());
            total += w * weight * (1.0 + s).powf(gamma) * ring.covariance();
            mass += w * weight * ring.mean_g();
        }
        check_mass("second marginal", PI * mass)?;
        Ok(PI * self.n as f64 * total)
    }

    /// π ∫_0^N W₂(s) mean_{a,b} ψ_β(g_a, g_b) ds over all angle pairs.
    pub fn log_power_at(&self, beta: f64, res: DiskResolution) -> Result<f64> {
        let rule = res.radial_rule(self.n as f64);
        let mut ring = Ring::new(res.angular);
        let mut total = 0.0;
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let weight = self.ln_marginal_weight(2, s)?.exp();
            if weight == 0.0 {
                continue;
            }
            ring.fill(self.generator(), s.sqrt());
            total += w * weight * ring.pair_mean_psi_beta(beta);
        }
        Ok(PI * total)
    }

    /// L¹ distance between F_{N,k} and f^{⊗k}, k ∈ {1, 2}, including the mass
    /// of f^{⊗k} outside the ball of radius √N.
    pub fn chaos_distance(&self, k: usize) -> Result<f64> {
        match k {
            1 => {
                let rule = self.line_rule();
                let (mut gap, mut inside) = (0.0, 0.0);
                for (&v, &w) in rule.points.iter().zip(&rule.weights) {
                    let ln_f = self.generator().ln_eval(v);
                    let f = ln_f.exp();
                    let marginal = (ln_f + self.ln_marginal_weight(1, v * v)?).exp();
                    gap += w * (marginal - f).abs();
                    inside += w * f;
                }
                Ok(gap + (1.0 - inside).max(0.0))
            }
            2 => {
                let res = self.config.disk;
                let rule = res.radial_rule(self.n as f64);
                let mut ring = Ring::new(res.angular);
                let (mut gap, mut inside) = (0.0, 0.0);
                for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                    let weight = self.ln_marginal_weight(2, s)?.exp();
                    ring.fill(self.generator(), s.sqrt());
                    gap += w * (weight - 1.0).abs() * ring.mean_g();
                    inside += w * ring.mean_g();
                }
                Ok(PI * gap + (1.0 - PI * inside).max(0.0))
            }
            _ => Err(KacError::arg(format!("chaos distance needs k = 1 or 2, got {k}"))),
        }
    }

    /// sup_v |F_{N,1}(v) - f(v)| over the line quadrature nodes.
    pub fn first_marginal_sup_gap(&self) -> Result<f64> {
        let rule = self.line_rule();
        let mut gap: f64 = 0.0;
        for &v in &rule.points {
            let ln_f = self.generator().ln_eval(v);
            let marginal = (ln_f + self.ln_marginal_weight(1, v * v)?).exp();
            gap = gap.max((marginal - ln_f.exp()).abs());
        }
        Ok(gap)
    }

    /// Builds an exact sampler; needs every ladder level 2..N-1.
    pub fn sampler(&self, ladder: LadderConfig) -> Result<ConditionedSampler> {
        ConditionedSampler::new(self.generator(), self.n, ladder)
    }

    /// One report row for this family.
    pub fn report(&self, gamma: f64, beta: Option<f64>, seed: Option<u64>) -> Result<FunctionalReport> {
        Ok(FunctionalReport {
            f_tag: self.generator().tag().to_string(),
            n: self.n,
            gamma,
            beta,
            h_n: self.entropy_hn()?,
            d_n_gamma: self.production_dn(gamma)?,
            logpower: beta.map(|b| self.log_power_integral(b)).transpose()?,
            chaos_l1: self.chaos_distance(1)?,
            u_nodes: self.ladder.node_count(),
            u_max: self.ladder.u_max(),
            radial_nodes: self.config.disk.radial,
            angular_nodes: self.config.disk.angular,
            seed,
        })
    }
}

fn check_generator(f: &GridDensity1D, n: usize) -> Result<()> {
    if n < 3 {
        return Err(KacError::arg(format!("conditioned tensorisation needs N >= 3, got {n}")));
    }
    if (f.second_moment() - 1.0).abs() > 1e-6 {
        return Err(KacError::arg(format!(
            "generator must have unit second moment, got {}",
            f.second_moment()
        )));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(KacError::arg(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    Ok(())
}

fn check_mass(what: &str, mass: f64) -> Result<()> {
    let gap = (mass - 1.0).abs();
    if !(gap <= MARGINAL_MASS_TOLERANCE) {
        return Err(KacError::accuracy(format!("{what} mass"), gap, MARGINAL_MASS_TOLERANCE));
    }
    Ok(())
}

/// Values of g(φ) = f(ρ cos φ) f(ρ sin φ) on equispaced angles.
pub(crate) struct Ring {
    g: Vec<f64>,
    ln_g: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Ring {
    pub(crate) fn new(m: usize) -> Self {
        let (sin, cos) = (0..m)
            .map(|a| (2.0 * PI * a as f64 / m as f64).sin_cos())
            .unzip();
        Ring {
            g: vec![0.0; m],
            ln_g: vec![0.0; m],
            cos,
            sin,
        }
    }

    pub(crate) fn fill(&mut self, f: &GridDensity1D, rho: f64) {
        for a in 0..self.g.len() {
            let l = f.ln_eval(rho * self.cos[a]) + f.ln_eval(rho * self.sin[a]);
            self.ln_g[a] = l;
            self.g[a] = l.exp();
        }
    }

    pub(crate) fn mean_g(&self) -> f64 {
        self.g.iter().sum::<f64>() / self.g.len() as f64
    }

    /// ⟨g log g⟩ - ⟨g⟩⟨log g⟩, which equals half the angle-pair mean of ψ(g_a, g_b).
    pub(crate) fn covariance(&self) -> f64 {
        let m = self.g.len() as f64;
        let mean_g = self.mean_g();
        let mean_l = self.ln_g.iter().sum::<f64>() / m;
        let cov = self
            .g
            .iter()
            .zip(&self.ln_g)
            .map(|(g, l)| (g - mean_g) * (l - mean_l))
            .sum::<f64>()
            / m;
        cov.max(0.0)
    }

    pub(crate) fn pair_mean_psi_beta(&self, beta: f64) -> f64 {
        let m = self.g.len();
        let mut total = 0.0;
        for a in 0..m {
            for b in a + 1..m {
                total += psi_beta_ln(self.g[a], self.g[b], self.ln_g[a], self.ln_g[b], beta);
            }
        }
        2.0 * total / (m * m) as f64
    }
}

/// Exact sampler for F_N dσ_N: coordinates drawn one at a time from their
/// conditional law f(v) h^{⊗(r-1)}(E - v²) by rejection from f, the last two
/// on the residual circle by rejection against the uniform angle.
#[derive(Debug, Clone)]
pub struct ConditionedSampler {
    n: usize,
    ladder: NormalizationLadder,
    /// Running maxima of each level's node values.
    running_max: Vec<Vec<f64>>,
}

impl ConditionedSampler {
    pub fn new(f: &GridDensity1D, n: usize, ladder: LadderConfig) -> Result<Self> {
        check_generator(f, n)?;
        let levels: Vec<usize> = (2..n).collect();
        let config = LadderConfig {
            u_max: ladder.u_max.or(Some(crate::normalization::default_u_max(n, f.sigma2()))),
            ..ladder
        };
        let ladder = NormalizationLadder::build(f, &levels, &config)?;
        let mut running_max = vec![Vec::new(); n];
        for (level, slot) in running_max.iter_mut().enumerate().skip(2) {
            let values = ladder.node_values(level)?;
            let mut acc = 0.0f64;
            *slot = values
                .iter()
                .map(|&x| {
                    acc = acc.max(x);
                    acc
                })
                .collect();
        }
        Ok(ConditionedSampler { n, ladder, running_max })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn bound(&self, level: usize, energy: f64) -> f64 {
        let table = &self.running_max[level];
        let j = ((energy / self.ladder.du()).ceil() as usize + 1).min(table.len() - 1);
        1.05 * table[j]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<VelocityEnsemble> {
        let f = self.ladder.generator();
        let mut v = Vec::with_capacity(self.n);
        let mut energy = self.n as f64;
        for m in 0..self.n - 2 {
            let remaining = self.n - m;
            let level = remaining - 1;
            let bound = self.bound(level, energy);
            let mut accepted = None;
            for _ in 0..MAX_REJECTION_TRIALS {
                let x = f.sample(rng);
                let residual = energy - x * x;
                if !(residual > 0.0) {
                    continue;
                }
                let h = self.ladder.ln_h(level, residual)?.exp();
                if rng.random::<f64>() * bound < h {
                    accepted = Some(x);
                    break;
                }
            }
            let x = accepted.ok_or_else(|| {
                KacError::Sampling(format!("coordinate {m} not accepted after {MAX_REJECTION_TRIALS} trials"))
            })?;
            energy -= x * x;
            v.push(x);
        }
        let (a, b) = sample_on_circle(f, energy.max(0.0).sqrt(), rng)?;
        v.push(a);
        v.push(b);
        let mut ensemble = VelocityEnsemble::from_raw(v);
        ensemble.renormalize();
        Ok(ensemble)
    }
}

/// (ρ cos φ, ρ sin φ) with φ ∝ f(ρ cos φ) f(ρ sin φ).
fn sample_on_circle<R: Rng + ?Sized>(f: &GridDensity1D, rho: f64, rng: &mut R) -> Result<(f64, f64)> {
    let g = |phi: f64| f.eval(rho * phi.cos()) * f.eval(rho * phi.sin());
    let mut scan = 64;
    'outer: for _ in 0..8 {
        let bound = 1.5 * (0..scan).map(|a| g(2.0 * PI * a as f64 / scan as f64)).fold(0.0, f64::max);
        if !(bound > 0.0) {
            scan *= 4;
            continue;
        }
        for _ in 0..MAX_REJECTION_TRIALS {
            let phi = 2.0 * PI * rng.random::<f64>();
            let value = g(phi);
            if value > bound {
                // the scan missed a peak: refine and redraw
                scan *= 4;
                continue 'outer;
            }
            if rng.random::<f64>() * bound < value {
                return Ok((rho * phi.cos(), rho * phi.sin()));
            }
        }
        break;
    }
    Err(KacError::Sampling(format!("angle on the circle of radius {rho} not accepted")))
}

/// One row of measured functionals with grid metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub f_tag: String,
    pub n: usize,
    pub gamma: f64,
    pub beta: Option<f64>,
    pub h_n: f64,
    pub d_n_gamma: f64,
    pub logpower: Option<f64>,
    pub chaos_l1: f64,
    pub u_nodes: usize,
    pub u_max: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub seed: Option<u64>,
}

impl FunctionalReport {
    /// Appends rows to a CSV stream, writing the header first when asked.
    pub fn write_csv<W: Write>(rows: &[FunctionalReport], out: W, header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(out);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}
