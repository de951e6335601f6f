//! Acceptance suite: runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use kac_core::conditioned::{ConditionedFamily, FamilyConfig};
use kac_core::inequalities::{
    gamma_ratio_sweep, logpower_envelope, loglog_slope, rescaled_inequality_check, GammaRatio, GeneratorSource,
    LogPowerWitness, SweepSup, DEFAULT_C1, DEFAULT_EPSILON,
};
use kac_core::kac_process::{replicas, spectral_gap, wasserstein1, SimulationConfig};
use kac_core::limit::{cercignani_ratio, evolve, limit_production, EvolveConfig, PdeState, PDE_GRID};
use kac_core::normalization::{build_ladder, clt_envelope, default_u_max, LadderConfig, NormalizationLadder};
use kac_core::{gaussian, mixture, mixture_on, uniform_sphere_sample, GridDensity1D, KacError, MixtureSpec, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;
const FIXED_SWEEP: [usize; 4] = [32, 64, 128, 256];

struct Outcome {
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Context {
    quarter_ladder: Option<Arc<NormalizationLadder>>,
    villani_rows: Vec<GammaRatio>,
}

impl Context {
    fn quarter_ladder(&mut self) -> Result<Arc<NormalizationLadder>> {
        if self.quarter_ladder.is_none() {
            let f = quarter();
            let ladder = build_ladder(&f, 256, default_u_max(256, f.sigma2()))?;
            self.quarter_ladder = Some(Arc::new(ladder));
        }
        Ok(Arc::clone(self.quarter_ladder.as_ref().unwrap()))
    }

    fn quarter_families(&mut self) -> Result<Vec<ConditionedFamily>> {
        let ladder = self.quarter_ladder()?;
        FIXED_SWEEP
            .iter()
            .map(|&n| ConditionedFamily::from_ladder(Arc::clone(&ladder), n, FamilyConfig::default()))
            .collect()
    }
}

fn quarter() -> GridDensity1D {
    mixture(MixtureSpec::new(0.25).unwrap()).unwrap()
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn fmt(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn spectral_gaps(_: &mut Context) -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [3usize, 4, 5] {
        let gap = spectral_gap(n, 4)?;
        let expected = (n as f64 + 2.0) / (2.0 * (n as f64 - 1.0));
        pass &= (gap - expected).abs() < 1e-6;
        parts.push(format!("Δ_{n} = {gap:.9} (exact {expected})"));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn local_clt(ctx: &mut Context) -> Result<Outcome> {
    let envelope = clt_envelope(&*ctx.quarter_ladder()?)?;
    let sups: Vec<f64> = FIXED_SWEEP
        .iter()
        .map(|&n| envelope.lambda_sup(n).ok_or_else(|| KacError::State(format!("no level {n}"))))
        .collect::<Result<_>>()?;
    let envelope_ok = strictly_decreasing(&sups) && sups[3] < 0.05;

    let m = gaussian(1.0)?;
    let ladder = build_ladder(&m, 64, default_u_max(64, m.sigma2()))?;
    let mut worst: f64 = 0.0;
    for n in 2..=64usize {
        for scale in [0.25, 0.5, 1.0, 1.5, 2.0] {
            let u = scale * n as f64;
            let exact = -0.5 * n as f64 * (2.0 * PI).ln() - 0.5 * u;
            worst = worst.max((ladder.z_value(n, u)? - exact).abs());
        }
    }
    Ok(Outcome {
        pass: envelope_ok && worst < 1e-6,
        detail: format!("sup|λ_N| over N = 32..256: [{}]; Gaussian max |Δ log Z| = {worst:.2e}", fmt(&sups)),
    })
}

fn entropic_chaoticity(ctx: &mut Context) -> Result<Outcome> {
    let f = quarter();
    let h = f.relative_entropy()?;
    let d = limit_production(&f, 0.0)?;
    let ladder = ctx.quarter_ladder()?;
    let families: Vec<ConditionedFamily> = FIXED_SWEEP
        .iter()
        .map(|&n| ConditionedFamily::from_ladder(Arc::clone(&ladder), n, FamilyConfig::default()))
        .collect::<Result<_>>()?;
    let mut h_gaps = Vec::new();
    let mut d_gaps = Vec::new();
    for fam in &families {
        let nf = fam.n() as f64;
        let h_n = fam.entropy_hn()?;
        let d_n = fam.production_dn(0.0)?;
        h_gaps.push((h_n / nf - h).abs() / h);
        d_gaps.push((2.0 * d_n / (nf * d) - 1.0).abs());
        ctx.villani_rows.push(GammaRatio {
            n: fam.n(),
            delta: None,
            gamma: 0.0,
            h_n,
            d_n,
            gamma_hat: d_n / h_n,
            villani_bound: Some(2.0 / (nf - 1.0)),
            villani_holds: Some(d_n / h_n >= 2.0 / (nf - 1.0)),
        });
    }
    let pass = h_gaps[3] < 0.05 && d_gaps[3] < 0.10 && strictly_decreasing(&h_gaps) && strictly_decreasing(&d_gaps);
    Ok(Outcome {
        pass,
        detail: format!(
            "H(f|M) = {h:.6}, D(f) = {d:.6}; H gaps [{}]; D gaps [{}]",
            fmt(&h_gaps),
            fmt(&d_gaps)
        ),
    })
}

fn villani_bound(ctx: &mut Context) -> Result<Outcome> {
    let rows = &ctx.villani_rows;
    if rows.is_empty() {
        return Ok(Outcome {
            pass: false,
            detail: "no sweep produced Γ̂_N values".into(),
        });
    }
    let violations: Vec<String> = rows
        .iter()
        .filter(|r| r.villani_holds != Some(true))
        .map(|r| format!("N = {} Γ̂ = {:.4}", r.n, r.gamma_hat))
        .collect();
    let margin = rows
        .iter()
        .map(|r| r.gamma_hat / r.villani_bound.unwrap_or(f64::NAN))
        .fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        pass: violations.is_empty(),
        detail: format!(
            "{} ratios checked, smallest Γ̂_N (N−1)/2 = {margin:.3}{}",
            rows.len(),
            if violations.is_empty() { String::new() } else { format!("; violations: {}", violations.join(", ")) }
        ),
    })
}

fn gamma_decay(ctx: &mut Context) -> Result<Outcome> {
    let ns = [64usize, 128, 256, 512, 1024];
    let rows = gamma_ratio_sweep(&GeneratorSource::Schedule { beta: 0.1 }, 0.0, &ns, FamilyConfig::default())?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.gamma_hat)).collect();
    let slope = loglog_slope(&pts);
    let ratios: Vec<f64> = rows.iter().map(|r| r.gamma_hat).collect();
    ctx.villani_rows.extend(rows);
    Ok(Outcome {
        pass: slope <= -0.5,
        detail: format!("Γ̂_N over N = 64..1024: [{}]; fitted slope {slope:.3}", fmt(&ratios)),
    })
}

fn cercignani(_: &mut Context) -> Result<Outcome> {
    let deltas = [0.1, 0.03, 0.01, 0.003];
    let ratios: Vec<f64> = deltas
        .iter()
        .map(|&d| cercignani_ratio(&mixture(MixtureSpec::new(d)?)?))
        .collect::<Result<_>>()?;
    let shape: Vec<f64> = deltas.iter().map(|&d| d * (1.0 / d).ln()).collect();
    let scaled: Vec<f64> = ratios.iter().zip(&shape).map(|(r, s)| r / s).collect();
    let k = scaled.iter().copied().fold(0.0, f64::max);
    let bounded = ratios.iter().zip(&shape).all(|(r, s)| *r <= k * s);
    Ok(Outcome {
        pass: strictly_decreasing(&ratios) && bounded && k.is_finite(),
        detail: format!(
            "D/(2H) over δ = 0.1..0.003: [{}]; ratio/(δ log 1/δ): [{}]; K = {k:.3}",
            fmt(&ratios),
            fmt(&scaled)
        ),
    })
}

fn rescaled(ctx: &mut Context) -> Result<Outcome> {
    let (gamma, beta, k) = (0.5, 1.0, 3.0);
    let families = ctx.quarter_families()?;
    let witness = LogPowerWitness::new(&quarter(), beta, k, DEFAULT_EPSILON)?;
    let sup = SweepSup::measure(&families, beta, k)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for fam in &families {
        let r = rescaled_inequality_check(fam, gamma, &witness, sup, DEFAULT_C1)?;
        pass &= r.intermediate_holds && r.final_holds;
        parts.push(format!(
            "N = {}: λ-grid {}, D/N = {:.3e} ≥ {:.3e}{}",
            r.n,
            if r.intermediate_holds { "ok" } else { "violated" },
            r.dgamma_over_n,
            r.final_rhs,
            if r.optimizer_consistent { "" } else { " (λ* outside argmin bracket)" }
        ));
    }
    Ok(Outcome {
        pass,
        detail: format!("𝒞_β = {:.4}, M_6 = {:.3}, C₁ = {DEFAULT_C1}; {}", sup.c_beta, sup.m_2k, parts.join("; ")),
    })
}

fn log_power(ctx: &mut Context) -> Result<Outcome> {
    let families = ctx.quarter_families()?;
    let witness = LogPowerWitness::new(&quarter(), 1.0, 3.0, DEFAULT_EPSILON)?;
    let mut pass = true;
    let mut applicable = 0;
    let mut parts = Vec::new();
    for fam in &families {
        let r = logpower_envelope(&witness, fam)?;
        if let Some(e) = r.envelope {
            applicable += 1;
            pass &= r.measured <= e;
            parts.push(format!("N = {}: {:.4e} ≤ {:.4}", r.n, r.measured, e));
        } else {
            parts.push(format!("N = {}: envelope undefined", r.n));
        }
    }
    Ok(Outcome {
        pass: pass && applicable > 0,
        detail: parts.join("; "),
    })
}

fn h_theorem(_: &mut Context) -> Result<Outcome> {
    let f0 = mixture_on(MixtureSpec::new(0.25)?, PDE_GRID)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for gamma in [0.0, 0.5] {
        let mut config = EvolveConfig::new(gamma, 5.0);
        config.snapshot_every = 0.5;
        config.production = true;
        let traj = evolve(&PdeState::new(f0.clone())?, &config)?;
        let e0 = traj.rows[0].energy;
        let mass_drift = traj.rows.iter().map(|r| (r.mass - 1.0).abs()).fold(0.0, f64::max);
        let energy_drift = traj.rows.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max);
        let monotone = traj.rows.windows(2).all(|w| w[1].entropy <= w[0].entropy);
        let mut worst: f64 = 0.0;
        for t in [0.5, 1.0, 2.0] {
            let row = traj
                .rows
                .iter()
                .find(|r| (r.time - t).abs() < 1e-9)
                .ok_or_else(|| KacError::State(format!("no record at t = {t}")))?;
            let d = row.d_gamma.ok_or_else(|| KacError::State("missing D_γ".into()))?;
            worst = worst.max((traj.entropy_rate(t)? + 0.5 * d).abs() / d);
        }
        pass &= mass_drift < 1e-6 && energy_drift < 1e-6 && monotone && worst < 0.02;
        parts.push(format!(
            "γ = {gamma}: mass drift {mass_drift:.1e}, energy drift {energy_drift:.1e}, H monotone {monotone}, \
             max |dH/dt + D/2|/D = {worst:.2e}"
        ));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

fn chaos_bridge(_: &mut Context) -> Result<Outcome> {
    let f0 = mixture_on(MixtureSpec::new(0.25)?, PDE_GRID)?;
    let pde = evolve(&PdeState::new(f0)?, &EvolveConfig::new(0.0, 1.0))?;
    let target = &pde.final_state().density;
    let generator = quarter();
    let mut distances = Vec::new();
    let ns = [64usize, 128, 256, 512];
    for &n in &ns {
        let sampler = kac_core::conditioned::ConditionedSampler::new(
            &generator,
            n,
            LadderConfig {
                nodes: 1 << 13,
                u_max: None,
            },
        )?;
        let config = SimulationConfig::new(n, 0.0, 1.0, SEED);
        let runs = replicas(&config, 200, |rng| sampler.sample(rng))?;
        let pooled: Vec<f64> = runs.iter().flat_map(|r| r.final_state.velocities().to_vec()).collect();
        distances.push(wasserstein1(&pooled, target));
    }
    let last = *distances.last().unwrap();
    Ok(Outcome {
        pass: last < 0.05 && last < distances[0],
        detail: format!("W₁ at t = 1 for N = 64, 128, 256, 512: [{}]", fmt(&distances)),
    })
}

/// Monte Carlo over the uniform sphere with P = Π f(v_i):
/// H_N = E[P log P]/E[P] − log E[P] and
/// D_{N,γ} = (N/2) E[(1+s)^γ ψ(P/Z, P∘R/Z)] with a random pair and angle.
fn oracle(_: &mut Context) -> Result<Outcome> {
    let n = 8;
    let samples = 1_000_000;
    let f = quarter();
    let family = ConditionedFamily::new(&f, n, FamilyConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let ln_p = |v: &[f64]| v.iter().map(|&x| f.ln_eval(x)).sum::<f64>();
    let mut draws = Vec::with_capacity(samples);
    for _ in 0..samples {
        let v = uniform_sphere_sample(n, &mut rng)?.into_velocities();
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let theta = rng.random::<f64>() * 2.0 * PI;
        let (vi, vj) = kac_core::sphere::rotate_pair(v[i], v[j], theta);
        let s = v[i] * v[i] + v[j] * v[j];
        let before = ln_p(&v);
        let after = before - f.ln_eval(v[i]) - f.ln_eval(v[j]) + f.ln_eval(vi) + f.ln_eval(vj);
        draws.push((before, after, s));
    }
    let m = samples as f64;
    let z = draws.iter().map(|d| d.0.exp()).sum::<f64>() / m;
    let plp = draws.iter().map(|d| d.0.exp() * d.0).sum::<f64>() / m;
    let h_mc = plp / z - z.ln();
    let h_quad = family.entropy_hn()?;
    let mut pass = (h_mc - h_quad).abs() < 0.02 * h_quad;
    let mut parts = vec![format!("H_8: quadrature {h_quad:.5}, Monte Carlo {h_mc:.5}")];
    for gamma in [0.0, 0.5] {
        let d_mc = 0.5 * n as f64
            * draws
                .iter()
                .map(|&(a, b, s)| {
                    let (fa, fb) = (a.exp() / z, b.exp() / z);
                    (1.0 + s).powf(gamma) * (fa - fb) * (a - b)
                })
                .sum::<f64>()
            / m;
        let d_quad = family.production_dn(gamma)?;
        pass &= (d_mc - d_quad).abs() < 0.02 * d_quad;
        parts.push(format!("D_8,{gamma}: quadrature {d_quad:.5}, Monte Carlo {d_mc:.5}"));
    }
    Ok(Outcome { pass, detail: parts.join("; ") })
}

type Criterion = fn(&mut Context) -> Result<Outcome>;

fn main() {
    let criteria: [(u32, &str, Option<f64>, Criterion); 11] = [
        (1, "spectral gap", Some(60.0), spectral_gaps),
        (2, "local CLT", Some(120.0), local_clt),
        (3, "entropic chaoticity", Some(300.0), entropic_chaoticity),
        (4, "Villani bound", None, villani_bound),
        (5, "Γ_N decay", Some(600.0), gamma_decay),
        (6, "Cercignani failure", Some(120.0), cercignani),
        (7, "rescaled inequality", Some(300.0), rescaled),
        (8, "log-power envelope", Some(300.0), log_power),
        (9, "H-theorem", Some(300.0), h_theorem),
        (10, "propagation of chaos", Some(600.0), chaos_bridge),
        (11, "oracle equivalence", None, oracle),
    ];
    // criterion 4 collects the ratios of criteria 3 and 5
    let order = [1, 2, 3, 5, 4, 6, 7, 8, 9, 10, 11];
    let mut ctx = Context::default();
    let mut failed = 0;
    for id in order {
        let (_, name, budget, run) = criteria[id - 1];
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| run(&mut ctx)));
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(Ok(o)) => (o.pass, o.detail),
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        let in_budget = budget.is_none_or(|b| secs <= b);
        let pass = pass && in_budget;
        if !pass {
            failed += 1;
        }
        let budget_note = budget.map_or(String::new(), |b| format!(" / {b:.0} s"));
        println!(
            "{} criterion {id:>2} ({name}) [{secs:.1} s{budget_note}]: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
