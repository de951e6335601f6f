use serde::{Deserialize, Serialize};

use crate::density::GridDensity1D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl HistogramSpec {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.bins).map(move |b| self.lo + (b as f64 + 0.5) * self.width())
    }
}

/// Binned density of pooled velocities. `density` integrates to the fraction
/// of samples inside the range; `outside` holds the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub spec: HistogramSpec,
    pub density: Vec<f64>,
    pub outside: f64,
    pub samples: usize,
}

impl Histogram {
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.spec.width() + self.outside
    }

    /// L¹ distance to a density, bin averages against the exact bin masses,
    /// plus the mismatch of the out-of-range mass.
    pub fn l1_distance(&self, f: impl Fn(f64) -> f64) -> f64 {
        let w = self.spec.width();
        let rule = crate::quadrature::GaussLegendre::new(8);
        let mut inside = 0.0;
        let mut gap = 0.0;
        for (b, h) in self.density.iter().enumerate() {
            let a = self.spec.lo + b as f64 * w;
            let m: f64 = rule.on(a, a + w).map(|(x, wi)| wi * f(x)).sum();
            inside += m;
            gap += (h * w - m).abs();
        }
        gap + (self.outside - (1.0 - inside)).abs()
    }
}

/// Histogram of all velocities of all given ensembles (exchangeability makes
/// the pooled sample an estimate of the one-particle marginal).
pub fn empirical_marginal<'a, I>(ensembles: I, spec: &HistogramSpec) -> Histogram
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut counts = vec![0u64; spec.bins];
    let mut total = 0usize;
    let mut outside = 0usize;
    let w = spec.width();
    for v in ensembles {
        for &x in v {
            total += 1;
            if x < spec.lo || x >= spec.hi {
                outside += 1;
                continue;
            }
            let b = (((x - spec.lo) / w) as usize).min(spec.bins - 1);
            counts[b] += 1;
        }
    }
    let m = total.max(1) as f64;
    Histogram {
        spec: *spec,
        density: counts.iter().map(|&c| c as f64 / (m * w)).collect(),
        outside: outside as f64 / m,
        samples: total,
    }
}

/// W¹ distance between the empirical law of `samples` and a tabulated density,
/// as ∫ |F_emp − F| over the density grid plus the mass beyond it.
pub fn wasserstein1(samples: &[f64], f: &GridDensity1D) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let values = f.values();
    let dv = f.dv();
    let nodes: Vec<f64> = f.nodes().collect();
    let mut cdf = 0.0;
    let mut below = 0usize;
    let mut dist = 0.0;
    for k in 0..values.len() - 1 {
        let next = cdf + 0.5 * dv * (values[k] + values[k + 1]);
        let mid = 0.5 * (nodes[k] + nodes[k + 1]);
        while below < sorted.len() && sorted[below] <= mid {
            below += 1;
        }
        dist += (below as f64 / m - 0.5 * (cdf + next)).abs() * dv;
        cdf = next;
    }
    let v_max = f.v_max();
    dist + sorted
        .iter()
        .map(|&x| (x.abs() - v_max).max(0.0))
        .sum::<f64>()
        / m
}

/// W¹ distance between two empirical laws, ∫ |F_a − F_b|.
pub fn wasserstein1_samples(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (ma, mb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut dist = 0.0;
    let mut x = match (a.first(), b.first()) {
        (Some(&x), Some(&y)) => x.min(y),
        _ => return 0.0,
    };
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        dist += (i as f64 / ma - j as f64 / mb).abs() * (next - x);
        x = next;
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
    }
    dist
}
