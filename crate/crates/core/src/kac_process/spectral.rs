use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KacError, Result};
use crate::quadrature::ln_gamma;
use crate::sphere::{rotate_pair, uniform_sphere_sample};

/// Largest polynomial degree accepted by the Galerkin construction.
pub const MAX_GALERKIN_DEGREE: usize = 8;
/// Relative eigenvalue threshold below which scaled Gram directions are
/// treated as vanishing on the sphere.
const GRAM_CUTOFF: f64 = 1e-10;
/// θ nodes per sample in the Rayleigh-quotient estimate.
const RAYLEIGH_THETA_NODES: usize = 16;

/// Spectrum of −ℒ_N (γ = 0) restricted to polynomials of degree ≤ `degree` on
/// the sphere, ascending. The space is invariant under the generator, so the
/// eigenvalues are exact; the first is 0 (constants).
pub fn generator_matrix_small_n(n: usize, degree: usize) -> Result<Vec<f64>> {
    if !(3..=6).contains(&n) {
        return Err(KacError::arg(format!("Galerkin spectrum is available for 3 <= N <= 6, got {n}")));
    }
    if degree == 0 {
        return Err(KacError::arg("polynomial degree must be positive"));
    }
    if degree > MAX_GALERKIN_DEGREE {
        return Err(KacError::Conditioning(format!(
            "degree {degree} exceeds {MAX_GALERKIN_DEGREE}; the monomial Gram matrix is too ill-conditioned"
        )));
    }
    let basis = monomials(n, degree);
    let index: HashMap<&[u8], usize> = basis.iter().enumerate().map(|(k, a)| (a.as_slice(), k)).collect();
    let dim = basis.len();

    let gram = DMatrix::from_fn(dim, dim, |a, b| sphere_moment(&basis[a], &basis[b]));
    let q = averaged_rotation(&basis, &index);
    let nf = n as f64;
    let a = (&gram - &gram * &q) * nf;

    // whiten the Gram matrix after Jacobi scaling
    let scale: Vec<f64> = (0..dim).map(|k| gram[(k, k)].sqrt().recip()).collect();
    let scaled = DMatrix::from_fn(dim, dim, |i, j| gram[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::new(scaled);
    let top = eig.eigenvalues.max();
    let kept: Vec<usize> = (0..dim).filter(|&k| eig.eigenvalues[k] > GRAM_CUTOFF * top).collect();
    let mut b = DMatrix::zeros(dim, kept.len());
    for (c, &k) in kept.iter().enumerate() {
        let norm = eig.eigenvalues[k].sqrt().recip();
        for i in 0..dim {
            b[(i, c)] = eig.eigenvectors[(i, k)] * norm * scale[i];
        }
    }
    let reduced = b.transpose() * a * &b;
    let asym = (&reduced - reduced.transpose()).amax();
    if asym > 1e-6 * reduced.amax().max(1.0) {
        return Err(KacError::Conditioning(format!(
            "reduced generator is not symmetric (defect {asym:.3e})"
        )));
    }
    let sym = (&reduced + reduced.transpose()) * 0.5;
    let mut values: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Smallest nonzero eigenvalue of the Galerkin spectrum.
pub fn spectral_gap(n: usize, degree: usize) -> Result<f64> {
    generator_matrix_small_n(n, degree)?
        .into_iter()
        .find(|&l| l > 1e-8)
        .ok_or_else(|| KacError::Conditioning("no nonzero eigenvalue in the Galerkin space".into()))
}

fn monomials(n: usize, degree: usize) -> Vec<Vec<u8>> {
    fn extend(prefix: &mut Vec<u8>, n: usize, left: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for e in 0..=left {
            prefix.push(e as u8);
            extend(prefix, n, left - e, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), n, degree, &mut out);
    out.sort_by_key(|a| a.iter().map(|&e| e as usize).sum::<usize>());
    out
}

/// E_σ[x^α x^β] on the sphere of radius √N.
fn sphere_moment(a: &[u8], b: &[u8]) -> f64 {
    let n = a.len();
    let mut ln = 0.0;
    let mut half_total = 0usize;
    for (x, y) in a.iter().zip(b) {
        let e = (*x + *y) as usize;
        if e % 2 == 1 {
            return 0.0;
        }
        let k = e / 2;
        half_total += k;
        ln += ln_gamma(k as f64 + 0.5) - ln_gamma(0.5);
    }
    let nf = n as f64;
    ln += ln_gamma(nf / 2.0) - ln_gamma(nf / 2.0 + half_total as f64) + half_total as f64 * nf.ln();
    ln.exp()
}

/// (1/2π) ∫ cos^p θ sin^q θ dθ.
fn angle_average(p: usize, q: usize) -> f64 {
    if p % 2 == 1 || q % 2 == 1 {
        return 0.0;
    }
    double_factorial(p as i64 - 1) * double_factorial(q as i64 - 1) / double_factorial((p + q) as i64)
}

fn double_factorial(k: i64) -> f64 {
    (1..=k.max(0)).rev().step_by(2).map(|x| x as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}

/// Matrix of Q φ = C(N,2)⁻¹ Σ_{i<j} (1/2π) ∫ φ∘R_{ij,θ} dθ in the monomial basis
/// (column β holds the expansion of Q x^β).
fn averaged_rotation(basis: &[Vec<u8>], index: &HashMap<&[u8], usize>) -> DMatrix<f64> {
    let dim = basis.len();
    let n = basis[0].len();
    let pairs = (n * (n - 1) / 2) as f64;
    let mut q = DMatrix::zeros(dim, dim);
    for (col, beta) in basis.iter().enumerate() {
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (beta[i] as usize, beta[j] as usize);
                // (x_i c + x_j s)^a (−x_i s + x_j c)^b
                for k in 0..=a {
                    for l in 0..=b {
                        let avg = angle_average(k + b - l, a - k + l);
                        if avg == 0.0 {
                            continue;
                        }
                        let sign = if l % 2 == 1 { -1.0 } else { 1.0 };
                        let coeff = binomial(a, k) * binomial(b, l) * sign * avg;
                        let mut target = beta.clone();
                        target[i] = (k + l) as u8;
                        target[j] = (a + b - k - l) as u8;
                        q[(index[target.as_slice()], col)] += coeff / pairs;
                    }
                }
            }
        }
    }
    q
}

/// Monte Carlo estimate of ⟨φ, −ℒ_{N,γ} φ⟩ / Var_σ(φ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayleighEstimate {
    pub quotient: f64,
    pub std_error: f64,
    pub dirichlet: f64,
    pub variance: f64,
    pub samples: usize,
}

/// Uses the Dirichlet form (N/2) E[(1 + s_ij)^γ (φ(R_{ij,θ}V) − φ(V))²] with a
/// uniform pair, uniform sphere samples and a shifted θ grid.
pub fn dirichlet_rayleigh<F, R>(phi: F, n: usize, gamma: f64, samples: usize, rng: &mut R) -> Result<RayleighEstimate>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    if n < 2 {
        return Err(KacError::arg(format!("N must be at least 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(KacError::arg(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if samples < 2 {
        return Err(KacError::arg("at least two samples are needed"));
    }
    let nf = n as f64;
    let mut dirichlet = Vec::with_capacity(samples);
    let mut values = Vec::with_capacity(samples);
    let mut rotated = vec![0.0; n];
    for _ in 0..samples {
        let v = uniform_sphere_sample(n, rng)?.into_velocities();
        let base = phi(&v);
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let s = v[i] * v[i] + v[j] * v[j];
        let offset = rng.random::<f64>();
        rotated.copy_from_slice(&v);
        let mut acc = 0.0;
        for t in 0..RAYLEIGH_THETA_NODES {
            let theta = (t as f64 + offset) / RAYLEIGH_THETA_NODES as f64 * std::f64::consts::TAU;
            let (a, b) = rotate_pair(v[i], v[j], theta);
            rotated[i] = a;
            rotated[j] = b;
            acc += (phi(&rotated) - base).powi(2);
        }
        dirichlet.push(0.5 * nf * (1.0 + s).powf(gamma) * acc / RAYLEIGH_THETA_NODES as f64);
        values.push(base);
    }
    let m = samples as f64;
    let mean = values.iter().sum::<f64>() / m;
    let centered: Vec<f64> = values.iter().map(|x| (x - mean).powi(2)).collect();
    let var = centered.iter().sum::<f64>() / m;
    let var_se = (centered.iter().map(|y| (y - var).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
    if var <= 1e-14 * (1.0 + mean * mean) || var < 3.0 * var_se {
        return Err(KacError::Degenerate(format!(
            "Var(φ) = {var:.3e} is indistinguishable from zero (standard error {var_se:.3e})"
        )));
    }
    let a = dirichlet.iter().sum::<f64>() / m;
    let quotient = a / var;
    // delta method for a ratio of sample means
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (d, y) in dirichlet.iter().zip(&centered) {
        saa += (d - a).powi(2);
        sbb += (y - var).powi(2);
        sab += (d - a) * (y - var);
    }
    let (saa, sbb, sab) = (saa / (m - 1.0), sbb / (m - 1.0), sab / (m - 1.0));
    let se2 = (saa / var.powi(2) + a * a * sbb / var.powi(4) - 2.0 * a * sab / var.powi(3)) / m;
    Ok(RayleighEstimate {
        quotient,
        std_error: se2.max(0.0).sqrt(),
        dirichlet: a,
        variance: var,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exact_gap(n: usize) -> f64 {
        (n as f64 + 2.0) / (2.0 * (n as f64 - 1.0))
    }

    #[test]
    fn gaps_match_the_closed_form() {
        for (n, expected) in [(3, 1.25), (4, 1.0), (5, 0.875), (6, 0.8)] {
            let gap = spectral_gap(n, 4).unwrap();
            assert!((gap - expected).abs() < 1e-9, "N = {n}: {gap}");
            assert!((gap - exact_gap(n)).abs() < 1e-9);
        }
    }

    #[test]
    fn spectrum_starts_at_zero_and_is_nonnegative() {
        let spec = generator_matrix_small_n(4, 6).unwrap();
        assert!(spec[0].abs() < 1e-9);
        assert!(spec[1] > 1e-6);
        assert!(spec.iter().all(|&l| l > -1e-9));
        // higher degree does not lower the gap
        assert!((spectral_gap(4, 6).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degree_two_eigenvalue() {
        // φ = v_1² − v_2² spans the degree-2 nonconstant modes, eigenvalue N/(N−1)
        for n in 3..=6 {
            let spec = generator_matrix_small_n(n, 2).unwrap();
            let nonzero: Vec<f64> = spec.into_iter().filter(|&l| l > 1e-8).collect();
            let expected = n as f64 / (n as f64 - 1.0);
            assert!(nonzero.iter().any(|l| (l - expected).abs() < 1e-9), "{n}: {nonzero:?}");
        }
    }

    #[test]
    fn galerkin_validation() {
        assert!(matches!(generator_matrix_small_n(2, 4), Err(KacError::Argument(_))));
        assert!(matches!(generator_matrix_small_n(4, 9), Err(KacError::Conditioning(_))));
    }

    #[test]
    fn angle_averages() {
        assert_eq!(angle_average(0, 0), 1.0);
        assert_eq!(angle_average(2, 0), 0.5);
        assert_eq!(angle_average(2, 2), 0.125);
        assert_eq!(angle_average(4, 0), 0.375);
        assert_eq!(angle_average(1, 1), 0.0);
    }

    #[test]
    fn rayleigh_quotient_of_the_gap_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let phi = |v: &[f64]| v.iter().map(|x| x.powi(4) - 3.0 * x * x).sum::<f64>();
        let est = dirichlet_rayleigh(phi, 10, 0.0, 100_000, &mut rng).unwrap();
        assert!((est.quotient - exact_gap(10)).abs() < 3.0 * est.std_error, "{est:?}");
        assert!(est.std_error < 0.02);
    }

    #[test]
    fn rayleigh_quotient_is_above_the_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let phi = |v: &[f64]| v[0].powi(2) + v[0] * v[1] + (v[2]).sin();
        let est = dirichlet_rayleigh(phi, 6, 0.0, 50_000, &mut rng).unwrap();
        assert!(est.quotient > exact_gap(6) - 3.0 * est.std_error, "{est:?}");
        // positive γ only increases the rates
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let hot = dirichlet_rayleigh(phi, 6, 1.0, 50_000, &mut rng).unwrap();
        assert!(hot.quotient > est.quotient);
    }

    #[test]
    fn constant_observable_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = dirichlet_rayleigh(|_| 2.0, 8, 0.5, 1000, &mut rng);
        assert!(matches!(r, Err(KacError::Degenerate(_))));
        // Σ v_i² is constant on the sphere up to round-off
        let r = dirichlet_rayleigh(|v: &[f64]| v.iter().map(|x| x * x).sum(), 8, 0.5, 1000, &mut rng);
        assert!(matches!(r, Err(KacError::Degenerate(_))));
    }
}
