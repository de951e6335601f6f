//! The normalization function Z_n(f, √u) through convolution powers of the
//! squared-velocity density h, and its local-CLT approximation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::density::{mixture, GridDensity1D, MixtureSpec, DENSITY_FLOOR};
use crate::error::{KacError, Result};
use crate::quadrature::GaussLegendre;
use crate::sphere::ln_sphere_area;

/// Largest tolerated mass loss of a convolution power.
pub const MASS_LEAK_TOLERANCE: f64 = 1e-4;

/// Relative level below which convolution values are treated as round-off.
const FFT_NOISE: f64 = 1e-14;

/// Number of u-nodes in a default ladder.
pub const DEFAULT_U_NODES: usize = 1 << 15;

/// Resolution and extent of the u-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    pub nodes: usize,
    /// Upper end of the u-grid; `None` picks n_max + 10√(n_max Σ²).
    pub u_max: Option<f64>,
}

impl Default for LadderConfig {
    fn default() -> Self {
        LadderConfig {
            nodes: DEFAULT_U_NODES,
            u_max: None,
        }
    }
}

/// Smallest u-range that contains the bulk of h^{⊗n} for n ≤ n_max.
pub fn default_u_max(n_max: usize, sigma2: f64) -> f64 {
    n_max as f64 + 10.0 * (n_max as f64 * sigma2.max(1.0)).sqrt()
}

#[derive(Debug, Clone)]
struct Level {
    /// h^{⊗n} at nodes -n, …, K-1 (offset n).
    values: Vec<f64>,
    offset: usize,
}

impl Level {
    fn at(&self, j: usize) -> f64 {
        self.values[j + self.offset]
    }
}

/// Tables of h^{⊗n}(u) on a uniform u-grid for a selection of levels n.
#[derive(Debug, Clone)]
pub struct NormalizationLadder {
    generator: GridDensity1D,
    sigma2: f64,
    du: f64,
    nodes: usize,
    levels: BTreeMap<usize, Level>,
}

/// Builds every level 1..=n_max.
pub fn build_ladder(f: &GridDensity1D, n_max: usize, u_max: f64) -> Result<NormalizationLadder> {
    let levels: Vec<usize> = (1..=n_max).collect();
    NormalizationLadder::build(
        f,
        &levels,
        &LadderConfig {
            u_max: Some(u_max),
            ..LadderConfig::default()
        },
    )
}

impl NormalizationLadder {
    /// Builds only the requested levels; the FFT of h is raised to each power.
    pub fn build(f: &GridDensity1D, levels: &[usize], config: &LadderConfig) -> Result<Self> {
        let n_max = *levels
            .iter()
            .max()
            .ok_or_else(|| KacError::arg("ladder needs at least one level"))?;
        if levels.contains(&0) {
            return Err(KacError::arg("ladder levels start at 1"));
        }
        if config.nodes < 64 {
            return Err(KacError::config(format!("u-grid needs at least 64 nodes, got {}", config.nodes)));
        }
        let sigma2 = f.sigma2();
        let u_max = config.u_max.unwrap_or_else(|| default_u_max(n_max, sigma2));
        if !(u_max > 0.0) || !u_max.is_finite() {
            return Err(KacError::config(format!("u_max must be positive, got {u_max}")));
        }
        let k = config.nodes;
        let du = u_max / (k - 1) as f64;
        let cells = discretize(f, du, k);

        let size = (2 * k).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut base: Vec<Complex<f64>> = cells.iter().map(|&x| Complex::new(x, 0.0)).collect();
        base.resize(size, Complex::new(0.0, 0.0));
        forward.process(&mut base);

        let mut wanted: Vec<usize> = levels.to_vec();
        wanted.sort_unstable();
        wanted.dedup();
        let mut power = base.clone();
        let mut current = 1;
        let mut out = BTreeMap::new();
        let mut buffer = vec![Complex::new(0.0, 0.0); size];
        for &n in &wanted {
            while current < n {
                power.iter_mut().zip(&base).for_each(|(p, b)| *p *= b);
                current += 1;
            }
            buffer.copy_from_slice(&power);
            inverse.process(&mut buffer);
            let scale = 1.0 / (size as f64 * du);
            // node j (from -n) lives at index (j + n) mod size
            let mut values: Vec<f64> = (0..k + n).map(|i| buffer[i % size].re * scale).collect();
            // FFT round-off leaves ~1e-16 relative noise; below that nothing is signal
            let noise = FFT_NOISE * values.iter().copied().fold(0.0, f64::max);
            values.iter_mut().filter(|x| x.abs() < noise).for_each(|x| *x = 0.0);
            let level = Level { values, offset: n };
            let mass: f64 = level.values.iter().sum::<f64>() * du;
            let leak = (1.0 - mass).abs();
            if leak > MASS_LEAK_TOLERANCE {
                return Err(KacError::config(format!(
                    "u_max = {u_max} loses mass {leak:.3e} at level {n}; enlarge the u-grid"
                )));
            }
            out.insert(n, level);
        }
        Ok(NormalizationLadder {
            generator: f.clone(),
            sigma2,
            du,
            nodes: k,
            levels: out,
        })
    }

    pub fn generator(&self) -> &GridDensity1D {
        &self.generator
    }

    /// Σ² = ∫ v⁴ f - 1 of the generator.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn du(&self) -> f64 {
        self.du
    }

    pub fn u_max(&self) -> f64 {
        self.du * (self.nodes - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn n_max(&self) -> usize {
        self.levels.keys().next_back().copied().unwrap_or(0)
    }

    pub fn levels(&self) -> impl Iterator<Item = usize> + '_ {
        self.levels.keys().copied()
    }

    pub fn has_level(&self, n: usize) -> bool {
        self.levels.contains_key(&n)
    }

    fn level(&self, n: usize) -> Result<&Level> {
        self.levels
            .get(&n)
            .ok_or_else(|| KacError::State(format!("ladder has no level n = {n}")))
    }

    /// h^{⊗n} at nodes 0..K-1.
    pub fn node_values(&self, n: usize) -> Result<&[f64]> {
        let level = self.level(n)?;
        Ok(&level.values[level.offset..])
    }

    /// h^{⊗n} at nodes -n..K-1, as (first node index, values).
    pub fn extended_values(&self, n: usize) -> Result<(isize, &[f64])> {
        let level = self.level(n)?;
        Ok((-(level.offset as isize), &level.values))
    }

    /// Quadrature mass of h^{⊗n} over the grid.
    pub fn mass(&self, n: usize) -> Result<f64> {
        Ok(self.level(n)?.values.iter().sum::<f64>() * self.du)
    }

    /// Quadrature mean of h^{⊗n}.
    pub fn mean(&self, n: usize) -> Result<f64> {
        let level = self.level(n)?;
        Ok(level
            .values
            .iter()
            .enumerate()
            .map(|(i, x)| (i as f64 - level.offset as f64) * self.du * x)
            .sum::<f64>()
            * self.du)
    }

    /// log h^{⊗n}(u), 4-point Lagrange interpolation in the log values; linear
    /// where the stencil touches unresolved (zero) values.
    pub fn ln_h(&self, n: usize, u: f64) -> Result<f64> {
        let level = self.level(n)?;
        let u_top = self.u_max();
        if !(u >= 0.0 && u <= u_top) {
            return Err(KacError::Range { u, u_max: u_top });
        }
        let t = u / self.du;
        let i = (t.floor() as usize).min(self.nodes - 2);
        let s = t - i as f64;
        let ln = |j: usize| level.at(j).max(DENSITY_FLOOR).ln();
        let resolved = |j: usize| level.at(j) > 0.0;
        if i == 0 || i + 2 >= self.nodes || !(resolved(i - 1) && resolved(i + 2)) || !(resolved(i) && resolved(i + 1)) {
            return Ok(ln(i) * (1.0 - s) + ln(i + 1) * s);
        }
        let (y0, y1, y2, y3) = (ln(i - 1), ln(i), ln(i + 1), ln(i + 2));
        let w0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
        let w1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
        let w2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
        let w3 = (s + 1.0) * s * (s - 1.0) / 6.0;
        Ok(w0 * y0 + w1 * y1 + w2 * y2 + w3 * y3)
    }

    /// log Z_n(f, √u) = log 2 + log h^{⊗n}(u) - ((n-2)/2) log u - log |S^{n-1}|.
    pub fn z_value(&self, n: usize, u: f64) -> Result<f64> {
        if n < 2 {
            return Err(KacError::arg(format!("Z_n needs n >= 2, got {n}")));
        }
        if !(u > 0.0) {
            return Err(KacError::Range { u, u_max: self.u_max() });
        }
        let ln_h = self.ln_h(n, u)?;
        Ok(2f64.ln() + ln_h - 0.5 * (n as f64 - 2.0) * u.ln() - ln_sphere_area(n)?)
    }

    /// log Z_{n_num}(f, √u_num) - log Z_{n_den}(f, √u_den), with the sphere
    /// areas and radius powers combined before anything is exponentiated.
    pub fn log_z_ratio(&self, n_num: usize, u_num: f64, n_den: usize, u_den: f64) -> Result<f64> {
        Ok(self.z_value(n_num, u_num)? - self.z_value(n_den, u_den)?)
    }

    /// λ_n(u) = √n Σ h^{⊗n}(u) - φ((u - n)/(√n Σ)), φ the standard normal density.
    pub fn clt_residual(&self, n: usize, u: f64) -> Result<f64> {
        let sigma = self.sigma2.sqrt();
        let h = self.ln_h(n, u)?.exp();
        let z = (u - n as f64) / ((n as f64).sqrt() * sigma);
        Ok((n as f64).sqrt() * sigma * h - (-0.5 * z * z).exp() / (2.0 * PI).sqrt())
    }

    /// sup |λ_n| over the grid nodes in [0, u_top].
    pub fn lambda_sup(&self, n: usize, u_top: f64) -> Result<f64> {
        let level = self.level(n)?;
        let sigma = self.sigma2.sqrt();
        let scale = (n as f64).sqrt() * sigma;
        let last = ((u_top / self.du).floor() as usize).min(self.nodes - 1);
        Ok((0..=last)
            .map(|j| {
                let z = (j as f64 * self.du - n as f64) / scale;
                (scale * level.at(j) - (-0.5 * z * z).exp() / (2.0 * PI).sqrt()).abs()
            })
            .fold(0.0, f64::max))
    }

    /// Rows (n, u, log h^{⊗n}(u)), every `stride`-th node.
    pub fn write_csv<W: Write>(&self, out: W, stride: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "u", "log_hconv"])?;
        for (&n, level) in &self.levels {
            for j in (0..self.nodes).step_by(stride.max(1)) {
                let lh = level.at(j).max(DENSITY_FLOOR).ln();
                w.write_record([n.to_string(), format!("{:.12e}", j as f64 * self.du), format!("{lh:.12e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Splits the mass of h over u-cells centred on the nodes k·du and hands it
/// to the nodes k-1, k, k+1 so that mass, mean and second moment of every
/// cell are kept. Index j + 1 holds node j; node -1 receives the spill of the
/// first half-cell.
fn discretize(f: &GridDensity1D, du: f64, k: usize) -> Vec<f64> {
    let gl = GaussLegendre::new(8);
    let mut m = vec![0.0; k + 2];
    for c in 0..k {
        let centre = c as f64 * du;
        let a = (centre - 0.5 * du).max(0.0).sqrt();
        let b = (centre + 0.5 * du).sqrt();
        let (mut w_minus, mut w_zero, mut w_plus) = (0.0, 0.0, 0.0);
        for (v, w) in gl.on(a, b) {
            let g = w * (f.eval(v) + f.eval(-v));
            let x = (v * v - centre) / du;
            w_minus += g * 0.5 * x * (x - 1.0);
            w_zero += g * (1.0 - x * x);
            w_plus += g * 0.5 * x * (x + 1.0);
        }
        m[c] += w_minus;
        m[c + 1] += w_zero;
        m[c + 2] += w_plus;
    }
    m
}

/// log of the leading local-CLT term
/// 2/(√n Σ |S^{n-1}| u^{(n-2)/2}) · e^{-(u-n)²/(2nΣ²)}/√(2π).
pub fn clt_approx(f: &GridDensity1D, n: usize, u: f64) -> Result<f64> {
    if (f.second_moment() - 1.0).abs() > 1e-6 {
        return Err(KacError::arg("local CLT needs a unit second moment"));
    }
    clt_leading_term(f.sigma2(), n, u)
}

pub(crate) fn clt_leading_term(sigma2: f64, n: usize, u: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(KacError::arg(format!("Σ² must be positive, got {sigma2}")));
    }
    if n < 2 || !(u > 0.0) {
        return Err(KacError::arg(format!("CLT term needs n >= 2 and u > 0, got n = {n}, u = {u}")));
    }
    let nf = n as f64;
    let sigma = sigma2.sqrt();
    Ok(2f64.ln()
        - 0.5 * nf.ln()
        - sigma.ln()
        - ln_sphere_area(n)?
        - 0.5 * (nf - 2.0) * u.ln()
        - (u - nf).powi(2) / (2.0 * nf * sigma2)
        - 0.5 * (2.0 * PI).ln())
}

/// sup |λ_n| for one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRecord {
    pub n: usize,
    pub sigma2: f64,
    pub lambda_sup: f64,
}

/// Uniform local-CLT error envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltEnvelope {
    pub records: Vec<EnvelopeRecord>,
}

impl CltEnvelope {
    pub fn lambda_sup(&self, n: usize) -> Option<f64> {
        self.records.iter().find(|r| r.n == n).map(|r| r.lambda_sup)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.records)?)
    }
}

/// sup_{u ∈ [0, n]} |λ_n(u)| for every level n ≥ 2 of the ladder.
pub fn clt_envelope(ladder: &NormalizationLadder) -> Result<CltEnvelope> {
    if !(ladder.sigma2() > 0.0) {
        return Err(KacError::arg("Σ² must be positive"));
    }
    let records = ladder
        .levels()
        .filter(|&n| n >= 2)
        .map(|n| {
            Ok(EnvelopeRecord {
                n,
                sigma2: ladder.sigma2(),
                lambda_sup: ladder.lambda_sup(n, n as f64)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CltEnvelope { records })
}

/// For each N, the generator f_{δ_N} with δ_N = N^{2β-1} and the envelope
/// sup_u |λ(N - j, u)| over the whole u-grid. Records are keyed by N.
pub fn clt_envelope_ndependent(beta: f64, n_list: &[usize], j: usize) -> Result<CltEnvelope> {
    if !(beta > 0.0 && beta < 1.0 / 6.0) {
        return Err(KacError::arg(format!(
            "the N-dependent local CLT needs 0 < beta < 1/6, got {beta}"
        )));
    }
    if j > 2 {
        return Err(KacError::arg(format!("j must be 0, 1 or 2, got {j}")));
    }
    let records = n_list
        .par_iter()
        .map(|&n| {
            if n < j + 2 {
                return Err(KacError::arg(format!("N = {n} too small for j = {j}")));
            }
            let spec = MixtureSpec::scheduled(n, beta)?;
            let f = mixture(spec)?;
            let level = n - j;
            let ladder = NormalizationLadder::build(&f, &[level], &LadderConfig::default())?;
            Ok(EnvelopeRecord {
                n,
                sigma2: ladder.sigma2(),
                lambda_sup: ladder.lambda_sup(level, ladder.u_max())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CltEnvelope { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::gaussian;
    use crate::quadrature::{ln_gamma, CompositeRule};

    fn chi2_ln_pdf(u: f64, n: usize) -> f64 {
        let k = n as f64;
        (0.5 * k - 1.0) * u.ln() - 0.5 * u - 0.5 * k * 2f64.ln() - ln_gamma(0.5 * k)
    }

    fn gaussian_ladder() -> NormalizationLadder {
        let m = gaussian(1.0).unwrap();
        build_ladder(&m, 64, default_u_max(64, 2.0)).unwrap()
    }

    #[test]
    fn gaussian_ladder_is_chi_square() {
        let ladder = gaussian_ladder();
        for n in [4usize, 16, 64] {
            let u = n as f64;
            let got = ladder.ln_h(n, u).unwrap();
            let exact = chi2_ln_pdf(u, n);
            assert!((got - exact).abs() < 1e-6 * exact.abs(), "n = {n}: {got} vs {exact}");
        }
        for n in 1..=64 {
            assert!((ladder.mass(n).unwrap() - 1.0).abs() < 1e-5, "mass at n = {n}");
            assert!((ladder.mean(n).unwrap() / n as f64 - 1.0).abs() < 1e-4, "mean at n = {n}");
        }
    }

    #[test]
    fn gaussian_z_values() {
        let ladder = gaussian_ladder();
        for n in [4usize, 16, 64] {
            for u in [0.5 * n as f64, n as f64, 2.0 * n as f64] {
                let exact = -0.5 * n as f64 * (2.0 * PI).ln() - 0.5 * u;
                let got = ladder.z_value(n, u).unwrap();
                assert!((got - exact).abs() < 1e-6 * exact.abs(), "n = {n}, u = {u}: {got} vs {exact}");
            }
        }
        let z = ladder.z_value(4, 4.0).unwrap();
        assert!((z - (-2.0 * (2.0 * PI).ln() - 2.0)).abs() < 1e-6);
        assert!((z + 5.6758).abs() < 1e-4);
    }

    #[test]
    fn z_total_mass_identity() {
        // ∫ Z_n(f, r) |S^{n-1}| r^{n-1} dr = 1, with r = √u
        let f = mixture(MixtureSpec::new(0.25).unwrap()).unwrap();
        let ladder = NormalizationLadder::build(&f, &[6], &LadderConfig::default()).unwrap();
        let top = ladder.u_max().sqrt() * 0.999;
        let area = crate::sphere::sphere_area(6).unwrap();
        let total = CompositeRule::new(1e-6, top, 400, 16)
            .integrate(|r| (ladder.z_value(6, r * r).unwrap()).exp() * area * r.powi(5));
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn range_and_level_errors() {
        let ladder = gaussian_ladder();
        assert!(matches!(ladder.z_value(4, -1.0), Err(KacError::Range { .. })));
        assert!(matches!(ladder.z_value(4, 1e6), Err(KacError::Range { .. })));
        assert!(matches!(ladder.ln_h(65, 1.0), Err(KacError::State(_))));
        assert!(ladder.z_value(1, 1.0).is_err());
    }

    #[test]
    fn small_grid_leaks_mass() {
        let f = mixture(MixtureSpec::new(0.25).unwrap()).unwrap();
        let err = build_ladder(&f, 32, 20.0).unwrap_err();
        assert!(matches!(err, KacError::Configuration(_)));
    }

    #[test]
    fn ladder_consistency_against_direct_convolution() {
        let f = mixture(MixtureSpec::new(0.25).unwrap()).unwrap();
        let config = LadderConfig {
            nodes: 4096,
            u_max: Some(120.0),
        };
        let ladder = NormalizationLadder::build(&f, &[2, 4, 8, 16], &config).unwrap();
        let du = ladder.du();
        for (a, b) in [(2usize, 4usize), (4, 8), (8, 16)] {
            let (lo, small) = ladder.extended_values(a).unwrap();
            let big = ladder.node_values(b).unwrap();
            let mut l1 = 0.0;
            for (j, &target) in big.iter().enumerate() {
                // (h^a * h^a)(u_j) with both factors on the extended node set
                let mut conv = 0.0;
                for (p, &x) in small.iter().enumerate() {
                    let node_p = lo + p as isize;
                    let q = j as isize - node_p - lo;
                    if q >= 0 && (q as usize) < small.len() {
                        conv += x * small[q as usize];
                    }
                }
                l1 += (conv * du - target).abs() * du;
            }
            assert!(l1 < 1e-6, "levels {a}+{a} vs {b}: L1 gap {l1}");
        }
    }

    #[test]
    fn clt_sigma_values() {
        let m = gaussian(1.0).unwrap();
        assert!((m.sigma2() - 2.0).abs() < 1e-8);
        let f = mixture(MixtureSpec::new(0.25).unwrap()).unwrap();
        assert!((f.sigma2() - 3.0).abs() < 1e-6);
        assert!(clt_leading_term(0.0, 4, 4.0).is_err());
    }

    #[test]
    fn clt_term_approaches_exact_value_at_the_mode() {
        let f = mixture(MixtureSpec::new(0.25).unwrap()).unwrap();
        let ladder = NormalizationLadder::build(&f, &[16, 64, 256], &LadderConfig::default()).unwrap();
        let mut prev = f64::INFINITY;
        for n in [16usize, 64, 256] {
            let u = n as f64;
            let gap = (clt_approx(&f, n, u).unwrap() - ladder.z_value(n, u).unwrap()).abs();
            assert!(gap < prev, "n = {n}: {gap}");
            prev = gap;
        }
    }

    #[test]
    fn clt_envelope_decreases_for_quarter_mixture() {
        let f = mixture(MixtureSpec::new(0.25).unwrap()).unwrap();
        let ladder = NormalizationLadder::build(&f, &[32, 64, 128, 256], &LadderConfig::default()).unwrap();
        let env = clt_envelope(&ladder).unwrap();
        let sups: Vec<f64> = env.records.iter().map(|r| r.lambda_sup).collect();
        assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
        assert!(*sups.last().unwrap() < 0.05);
        assert!(env.to_json().unwrap().contains("lambda_sup"));
    }

    #[test]
    fn ndependent_envelope_validation() {
        assert!(matches!(clt_envelope_ndependent(0.2, &[64], 0), Err(KacError::Argument(_))));
        assert!(matches!(clt_envelope_ndependent(0.0, &[64], 0), Err(KacError::Argument(_))));
        assert!(clt_envelope_ndependent(0.1, &[64], 3).is_err());
    }

    #[test]
    fn ndependent_envelope_decreases_past_the_preasymptotic_range() {
        // N = 64 and 128 sit before the asymptotic regime (N δ_N = N^0.2 hot
        // particles); the decrease is checked from N = 256 on.
        let env = clt_envelope_ndependent(0.1, &[256, 512, 1024], 0).unwrap();
        let sups: Vec<f64> = env.records.iter().map(|r| r.lambda_sup).collect();
        assert!(sups.windows(2).all(|w| w[1] < w[0]), "{sups:?}");
        let s100 = MixtureSpec::scheduled(100, 0.1).unwrap().sigma2();
        assert!((s100 - 29.65).abs() < 0.05);
    }

    #[test]
    fn ladder_matches_sampled_sums_of_squares() {
        use rand::SeedableRng;
        let n = 64;
        let f = mixture(MixtureSpec::scheduled(n, 0.1).unwrap()).unwrap();
        let ladder = NormalizationLadder::build(&f, &[n], &LadderConfig::default()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let samples = 200_000;
        let width = 4.0;
        let mut hist = vec![0.0; 100];
        for _ in 0..samples {
            let s: f64 = (0..n).map(|_| f.sample(&mut rng).powi(2)).sum();
            if let Some(b) = hist.get_mut((s / width) as usize) {
                *b += 1.0 / samples as f64;
            }
        }
        let l1: f64 = hist
            .iter()
            .enumerate()
            .map(|(b, p)| {
                let lo = b as f64 * width;
                let q = CompositeRule::new(lo, lo + width, 1, 8)
                    .integrate(|u| ladder.ln_h(n, u).map_or(0.0, f64::exp));
                (p - q).abs()
            })
            .sum();
        // sampling noise alone is about 0.01 here
        assert!(l1 < 0.03, "{l1}");
    }

    #[test]
    fn ladder_csv_has_rows() {
        let ladder = gaussian_ladder();
        let mut buf = Vec::new();
        ladder.write_csv(&mut buf, 4096).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,u,log_hconv"));
        assert!(text.lines().count() > 64);
    }
}
