//! One-dimensional densities on a truncated uniform grid: Maxwellians, the
//! two-temperature mixtures, moments, the squared-velocity pushforward,
//! relative entropy, Fisher information and the ψ kernels.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{KacError, Result};
use crate::quadrature::{lagrange4, trapezoid_weights, GaussLegendre};

/// Floor applied before taking logarithms or ratios of density values.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Relative tail budget accepted by [`GridDensity1D::moment`].
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Grid layout: `nodes` equispaced points on [-v_max, v_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub v_max: f64,
    pub nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            v_max: 16.0,
            nodes: 4096,
        }
    }
}

impl GridSpec {
    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / (self.nodes - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > 0.0) || !self.v_max.is_finite() {
            return Err(KacError::config(format!("v_max must be positive, got {}", self.v_max)));
        }
        if self.nodes < 16 {
            return Err(KacError::config(format!("grid needs at least 16 nodes, got {}", self.nodes)));
        }
        Ok(())
    }

    /// Widens v_max to `min_v_max` if needed, keeping the node spacing.
    pub fn widened_to(&self, min_v_max: f64) -> GridSpec {
        if self.v_max >= min_v_max {
            return *self;
        }
        let dv = self.dv();
        let nodes = ((2.0 * min_v_max / dv).ceil() as usize + 1).max(self.nodes);
        GridSpec {
            v_max: min_v_max,
            nodes,
        }
    }
}

/// The two-Gaussian generator f_δ = δ M_{1/(2δ)} + (1-δ) M_{1/(2(1-δ))}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    delta: f64,
}

impl MixtureSpec {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(KacError::arg(format!("mixture weight must lie in (0, 1), got {delta}")));
        }
        Ok(MixtureSpec { delta })
    }

    /// The N-dependent weight δ_N = N^{2β-1}.
    pub fn scheduled(n: usize, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 0.5) {
            return Err(KacError::arg(format!("schedule exponent must lie in (0, 1/2), got {beta}")));
        }
        MixtureSpec::new((n as f64).powf(2.0 * beta - 1.0))
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn hot_variance(&self) -> f64 {
        0.5 / self.delta
    }

    pub fn cold_variance(&self) -> f64 {
        0.5 / (1.0 - self.delta)
    }

    /// ∫ v⁴ f_δ = 3 / (4δ(1-δ)).
    pub fn fourth_moment(&self) -> f64 {
        0.75 / (self.delta * (1.0 - self.delta))
    }

    /// Σ² = ∫ v⁴ f_δ - 1.
    pub fn sigma2(&self) -> f64 {
        self.fourth_moment() - 1.0
    }

    /// Variances of the wider and the narrower component.
    fn spread(&self) -> (f64, f64) {
        let (a, b) = (self.hot_variance(), self.cold_variance());
        (a.max(b), a.min(b))
    }

    /// Smallest v_max that resolves the wider component (8/√(2δ) for δ ≤ 1/2).
    pub fn required_v_max(&self) -> f64 {
        8.0 * self.spread().0.sqrt()
    }
}

/// Closed form behind a grid density, when one exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Gaussian { variance: f64 },
    Mixture { delta: f64 },
}

fn ln_gaussian(v: f64, variance: f64) -> f64 {
    -0.5 * v * v / variance - 0.5 * (2.0 * PI * variance).ln()
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl Profile {
    fn ln_eval(&self, v: f64) -> f64 {
        match *self {
            Profile::Gaussian { variance } => ln_gaussian(v, variance),
            Profile::Mixture { delta } => ln_add_exp(
                delta.ln() + ln_gaussian(v, 0.5 / delta),
                (1.0 - delta).ln() + ln_gaussian(v, 0.5 / (1.0 - delta)),
            ),
        }
    }

    /// Components as (weight, variance).
    fn components(&self) -> [(f64, f64); 2] {
        match *self {
            Profile::Gaussian { variance } => [(1.0, variance), (0.0, 1.0)],
            Profile::Mixture { delta } => [(delta, 0.5 / delta), (1.0 - delta, 0.5 / (1.0 - delta))],
        }
    }

    /// ∫_{|v| > a} |v|^p f(v) dv in closed form.
    fn tail_moment(&self, p: u32, a: f64) -> f64 {
        use statrs::function::gamma::{gamma, gamma_ur};
        let s = 0.5 * (p as f64 + 1.0);
        self.components()
            .iter()
            .filter(|(w, _)| *w > 0.0)
            .map(|&(w, var)| {
                w * (2.0 * var).powf(0.5 * p as f64) / PI.sqrt() * gamma(s) * gamma_ur(s, a * a / (2.0 * var))
            })
            .sum()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let [(w0, v0), (_, v1)] = self.components();
        let z: f64 = StandardNormal.sample(rng);
        let var = if rng.random::<f64>() < w0 { v0 } else { v1 };
        z * var.sqrt()
    }
}

/// A probability density on ℝ, truncated to [-v_max, v_max] and sampled on a
/// uniform grid with trapezoid weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridDensity1D {
    grid: GridSpec,
    values: Vec<f64>,
    #[serde(skip)]
    weights: Vec<f64>,
    #[serde(skip)]
    ln_values: Vec<f64>,
    profile: Option<Profile>,
    /// Factor applied to the closed form so that it matches the renormalized grid.
    scale: f64,
    second_moment: f64,
    fourth_moment: f64,
    tag: String,
}

impl PartialEq for GridDensity1D {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values && self.profile == other.profile
    }
}

impl GridDensity1D {
    /// Builds a density from node values, renormalizing to unit mass.
    pub fn from_values(v_max: f64, values: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        let grid = GridSpec {
            v_max,
            nodes: values.len(),
        };
        grid.validate()?;
        if values.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(KacError::arg("density values must be finite and nonnegative"));
        }
        Self::assemble(grid, values, None, tag.into())
    }

    fn from_profile(grid: GridSpec, profile: Profile, tag: String) -> Result<Self> {
        grid.validate()?;
        let dv = grid.dv();
        let values = (0..grid.nodes)
            .map(|i| profile.ln_eval(-grid.v_max + i as f64 * dv).exp())
            .collect();
        Self::assemble(grid, values, Some(profile), tag)
    }

    fn assemble(grid: GridSpec, mut values: Vec<f64>, profile: Option<Profile>, tag: String) -> Result<Self> {
        let weights = trapezoid_weights(grid.nodes, grid.dv());
        let mass: f64 = values.iter().zip(&weights).map(|(f, w)| f * w).sum();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(KacError::arg("density has zero or non-finite mass on the grid"));
        }
        values.iter_mut().for_each(|f| *f /= mass);
        let mut density = GridDensity1D {
            grid,
            values,
            weights,
            ln_values: Vec::new(),
            profile,
            scale: 1.0 / mass,
            second_moment: 0.0,
            fourth_moment: 0.0,
            tag,
        };
        density.refresh_caches();
        Ok(density)
    }

    fn refresh_caches(&mut self) {
        if self.weights.len() != self.values.len() {
            self.weights = trapezoid_weights(self.grid.nodes, self.grid.dv());
        }
        self.ln_values = self.values.iter().map(|f| f.max(DENSITY_FLOOR).ln()).collect();
        self.second_moment = self.raw_moment(2);
        self.fourth_moment = self.raw_moment(4);
    }

    fn raw_moment(&self, p: u32) -> f64 {
        self.nodes()
            .zip(&self.values)
            .zip(&self.weights)
            .map(|((v, f), w)| w * f * v.powi(p as i32))
            .sum()
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn v_max(&self) -> f64 {
        self.grid.v_max
    }

    pub fn dv(&self) -> f64 {
        self.grid.dv()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.grid.v_max + i as f64 * self.grid.dv()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.grid.nodes).map(|i| self.node(i))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn profile(&self) -> Option<Profile> {
        self.profile
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    /// Cached ∫ v² f.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// Cached ∫ v⁴ f.
    pub fn fourth_moment(&self) -> f64 {
        self.fourth_moment
    }

    /// Σ² = ∫ v⁴ f - 1.
    pub fn sigma2(&self) -> f64 {
        self.fourth_moment - 1.0
    }

    /// Quadrature of the density values (1 after construction).
    pub fn mass(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    /// Density at an arbitrary point: the closed form when known, otherwise
    /// cubic interpolation clamped at zero. Zero outside the grid.
    pub fn eval(&self, v: f64) -> f64 {
        if let Some(p) = self.profile {
            return self.scale * p.ln_eval(v).exp();
        }
        lagrange4(&self.values, -self.grid.v_max, self.grid.dv(), v)
            .map_or(0.0, |x| x.max(0.0))
    }

    /// log f(v) with the density floor applied.
    pub fn ln_eval(&self, v: f64) -> f64 {
        if let Some(p) = self.profile {
            return (self.scale.ln() + p.ln_eval(v)).max(DENSITY_FLOOR.ln());
        }
        lagrange4(&self.ln_values, -self.grid.v_max, self.grid.dv(), v)
            .map_or(DENSITY_FLOOR.ln(), |x| x.max(DENSITY_FLOOR.ln()))
    }

    /// ∫ v^p f(v) dv with a truncation-tail check.
    pub fn moment(&self, p: u32) -> Result<f64> {
        let total = self.raw_moment(p);
        let scale = self.raw_moment_abs(p).max(f64::MIN_POSITIVE);
        let tail = self.tail_estimate(p);
        if tail > TAIL_TOLERANCE * scale {
            return Err(KacError::accuracy(format!("moment of order {p}"), tail / scale, TAIL_TOLERANCE));
        }
        Ok(total)
    }

    fn raw_moment_abs(&self, p: u32) -> f64 {
        self.nodes()
            .zip(&self.values)
            .zip(&self.weights)
            .map(|((v, f), w)| w * f * v.abs().powi(p as i32))
            .sum()
    }

    /// Estimate of ∫_{|v| > v_max} |v|^p f. Exact for closed forms; for
    /// gridded densities, the contribution of the outermost 5% of the window.
    fn tail_estimate(&self, p: u32) -> f64 {
        if let Some(prof) = self.profile {
            return self.scale * prof.tail_moment(p, self.grid.v_max);
        }
        let n = self.len();
        let edge = (n / 20).max(2);
        (0..edge)
            .chain(n - edge..n)
            .map(|i| self.weights[i] * self.values[i] * self.node(i).abs().powi(p as i32))
            .sum()
    }

    /// H(f|M) = ∫ f log f + 1/2 + log(2π)/2, valid for unit second moment.
    pub fn relative_entropy(&self) -> Result<f64> {
        if (self.second_moment - 1.0).abs() > 1e-6 {
            return Err(KacError::arg(format!(
                "relative entropy needs unit second moment, got {}",
                self.second_moment
            )));
        }
        Ok(self.neg_entropy() + 0.5 + 0.5 * (2.0 * PI).ln())
    }

    /// ∫ f log f.
    pub fn neg_entropy(&self) -> f64 {
        let ln_values: Box<dyn Iterator<Item = f64>> = match self.profile {
            Some(_) => Box::new(self.nodes().map(|v| self.ln_eval(v))),
            None => Box::new(self.ln_values.iter().copied()),
        };
        self.values
            .iter()
            .zip(&self.weights)
            .zip(ln_values)
            .map(|((f, w), l)| w * f * l)
            .sum()
    }

    /// I(f) = ∫ (f')² / f with central differences.
    pub fn fisher_information(&self) -> Result<f64> {
        let n = self.len();
        let dv = self.dv();
        let mut total = 0.0;
        for i in 1..n - 1 {
            let f = self.values[i];
            if !(f > 0.0) {
                return Err(KacError::Degenerate(format!(
                    "Fisher information needs a positive density, zero at v = {}",
                    self.node(i)
                )));
            }
            let d = (self.values[i + 1] - self.values[i - 1]) / (2.0 * dv);
            total += dv * d * d / f;
        }
        Ok(total)
    }

    /// Sup-norm of f on the grid.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Draws v ~ f: exact for closed forms, inverse CDF on the grid otherwise.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if let Some(p) = self.profile {
            return p.sample(rng);
        }
        let target = rng.random::<f64>();
        let dv = self.dv();
        let mut acc = 0.0;
        for i in 0..self.len() - 1 {
            let cell = 0.5 * dv * (self.values[i] + self.values[i + 1]);
            if acc + cell >= target {
                let t = if cell > 0.0 { (target - acc) / cell } else { 0.5 };
                return self.node(i) + t * dv;
            }
            acc += cell;
        }
        self.grid.v_max
    }

    /// Writes `v,value` rows after a `#`-prefixed JSON header line.
    pub fn write_csv<W: Write>(&self, mut out: W, provenance: &serde_json::Value) -> Result<()> {
        let header = serde_json::json!({
            "v_max": self.grid.v_max,
            "nodes": self.grid.nodes,
            "tag": self.tag,
            "profile": self.profile,
            "provenance": provenance,
        });
        writeln!(out, "# {header}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["v", "value"])?;
        for (v, f) in self.nodes().zip(&self.values) {
            w.write_record([format!("{v:.17e}"), format!("{f:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`GridDensity1D::write_csv`].
    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self> {
        let mut first = String::new();
        input.read_line(&mut first)?;
        let header: serde_json::Value = serde_json::from_str(first.trim_start_matches('#').trim())?;
        let v_max = header["v_max"]
            .as_f64()
            .ok_or_else(|| KacError::Io("density header lacks v_max".into()))?;
        let tag = header["tag"].as_str().unwrap_or("").to_string();
        let profile: Option<Profile> = serde_json::from_value(header["profile"].clone())?;
        let mut reader = csv::Reader::from_reader(input);
        let mut values = Vec::new();
        for row in reader.records() {
            let row = row?;
            let f: f64 = row
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| KacError::Io("malformed density row".into()))?;
            values.push(f);
        }
        let grid = GridSpec {
            v_max,
            nodes: values.len(),
        };
        match profile {
            Some(p) => Self::from_profile(grid, p, tag),
            None => Self::from_values(v_max, values, tag),
        }
    }
}

/// M_a on the default grid, widened to 8√a when needed.
pub fn gaussian(a: f64) -> Result<GridDensity1D> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(KacError::arg(format!("Gaussian variance must be positive, got {a}")));
    }
    gaussian_on(a, GridSpec::default().widened_to(8.0 * a.sqrt()))
}

/// M_a on an explicit grid.
pub fn gaussian_on(a: f64, grid: GridSpec) -> Result<GridDensity1D> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(KacError::arg(format!("Gaussian variance must be positive, got {a}")));
    }
    check_resolution(&grid, a, a)?;
    GridDensity1D::from_profile(grid, Profile::Gaussian { variance: a }, format!("gaussian:{a}"))
}

/// f_δ on the default grid, widened to 8/√(2δ) when needed.
pub fn mixture(spec: MixtureSpec) -> Result<GridDensity1D> {
    mixture_on(spec, GridSpec::default().widened_to(spec.required_v_max()))
}

/// f_δ on an explicit grid.
pub fn mixture_on(spec: MixtureSpec, grid: GridSpec) -> Result<GridDensity1D> {
    let (widest, narrowest) = spec.spread();
    check_resolution(&grid, widest, narrowest)?;
    GridDensity1D::from_profile(
        grid,
        Profile::Mixture { delta: spec.delta() },
        format!("mixture:{}", spec.delta()),
    )
}

fn check_resolution(grid: &GridSpec, widest: f64, narrowest: f64) -> Result<()> {
    grid.validate()?;
    if grid.v_max < 8.0 * widest.sqrt() * (1.0 - 1e-12) {
        return Err(KacError::config(format!(
            "v_max = {} does not resolve a component of standard deviation {}",
            grid.v_max,
            widest.sqrt()
        )));
    }
    if grid.dv() > 0.25 * narrowest.sqrt() {
        return Err(KacError::config(format!(
            "grid spacing {} too coarse for standard deviation {}",
            grid.dv(),
            narrowest.sqrt()
        )));
    }
    Ok(())
}

/// Density of 𝒱² when 𝒱 ~ f: h(r) = (f(√r) + f(-√r)) / (2√r).
#[derive(Debug, Clone)]
pub struct SquareDensity<'a> {
    generator: &'a GridDensity1D,
}

/// The pushforward of f under v ↦ v².
pub fn square_pushforward(f: &GridDensity1D) -> SquareDensity<'_> {
    SquareDensity { generator: f }
}

impl SquareDensity<'_> {
    /// h(r); +∞ at r = 0 when f(0) > 0.
    pub fn eval(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        let s = r.sqrt();
        (self.generator.eval(s) + self.generator.eval(-s)) / (2.0 * s)
    }

    pub fn r_max(&self) -> f64 {
        self.generator.v_max() * self.generator.v_max()
    }

    /// Mass of h on [a, b], integrated in v = √r where the 1/√r singularity
    /// disappears.
    pub fn cell_mass(&self, a: f64, b: f64) -> f64 {
        let gl = GaussLegendre::new(8);
        let (sa, sb) = (a.max(0.0).sqrt(), b.max(0.0).sqrt());
        gl.on(sa, sb)
            .map(|(v, w)| w * (self.generator.eval(v) + self.generator.eval(-v)))
            .sum()
    }

    /// Values on the r-grid r_i = i·dr, i = 0..=cells, with r_0 left at the
    /// finite cell average of the first cell.
    pub fn tabulate(&self, cells: usize) -> (f64, Vec<f64>) {
        let dr = self.r_max() / cells as f64;
        let mut values: Vec<f64> = (0..=cells).map(|i| self.eval(i as f64 * dr)).collect();
        values[0] = self.cell_mass(0.0, dr) / dr;
        (dr, values)
    }

    /// Total mass, cell by cell in v so the 1/√r singularity at the origin
    /// never meets a node.
    pub fn mass(&self, cells: usize) -> f64 {
        let dr = self.r_max() / cells as f64;
        (0..cells)
            .map(|i| self.cell_mass(i as f64 * dr, (i + 1) as f64 * dr))
            .sum()
    }

    /// ∫ r h(r) dr, computed cell by cell in v.
    pub fn mean(&self, cells: usize) -> f64 {
        let dr = self.r_max() / cells as f64;
        let gl = GaussLegendre::new(8);
        (0..cells)
            .map(|i| {
                let (sa, sb) = ((i as f64 * dr).sqrt(), ((i + 1) as f64 * dr).sqrt());
                gl.on(sa, sb)
                    .map(|(v, w)| w * v * v * (self.generator.eval(v) + self.generator.eval(-v)))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// ψ(x, y) = (x - y) log(x / y).
pub fn psi(x: f64, y: f64) -> Result<f64> {
    check_positive(x, y)?;
    Ok(psi_ln(x, y, x.ln(), y.ln()))
}

/// ψ_β(x, y) = |x - y| |log(x / y)|^{1+β}.
pub fn psi_beta(x: f64, y: f64, beta: f64) -> Result<f64> {
    check_positive(x, y)?;
    if !(beta >= 0.0) {
        return Err(KacError::arg(format!("beta must be nonnegative, got {beta}")));
    }
    Ok(psi_beta_ln(x, y, x.ln(), y.ln(), beta))
}

fn check_positive(x: f64, y: f64) -> Result<()> {
    if !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite() {
        return Err(KacError::arg(format!("psi needs positive finite arguments, got ({x}, {y})")));
    }
    Ok(())
}

/// ψ from values and precomputed logs; symmetric by construction.
#[inline]
pub(crate) fn psi_ln(x: f64, y: f64, lx: f64, ly: f64) -> f64 {
    (x - y) * (lx - ly)
}

#[inline]
pub(crate) fn psi_beta_ln(x: f64, y: f64, lx: f64, ly: f64, beta: f64) -> f64 {
    let d = (lx - ly).abs();
    let p = if beta == 1.0 { d * d } else { d.powf(1.0 + beta) };
    (x - y).abs() * p
}
