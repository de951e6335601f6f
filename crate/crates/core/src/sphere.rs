//! Geometry of Kac's sphere S^{N-1}(√N): pair rotations, uniform sampling and
//! the log-domain area factors used by the marginal formulas.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{KacError, Result};
use crate::quadrature::ln_gamma;

/// Relative tolerance on the kinetic-energy constraint Σ v_i² = N.
pub const ENERGY_TOLERANCE: f64 = 1e-10;

/// A point on Kac's sphere: N one-dimensional velocities with Σ v_i² = N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityEnsemble {
    velocities: Vec<f64>,
}

impl VelocityEnsemble {
    /// Wraps `velocities`, checking the energy constraint.
    pub fn new(velocities: Vec<f64>) -> Result<Self> {
        let n = velocities.len();
        if n < 2 {
            return Err(KacError::arg(format!("ensemble needs n >= 2, got {n}")));
        }
        let energy: f64 = velocities.iter().map(|v| v * v).sum();
        let rel = (energy - n as f64).abs() / n as f64;
        if !(rel <= ENERGY_TOLERANCE) {
            return Err(KacError::arg(format!(
                "velocities are not on Kac's sphere: sum v^2 = {energy}, n = {n}"
            )));
        }
        Ok(VelocityEnsemble { velocities })
    }

    /// Rescales arbitrary (nonzero) velocities onto the sphere of radius √n.
    pub fn project(mut velocities: Vec<f64>) -> Result<Self> {
        let n = velocities.len();
        if n < 2 {
            return Err(KacError::arg(format!("ensemble needs n >= 2, got {n}")));
        }
        let energy: f64 = velocities.iter().map(|v| v * v).sum();
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(KacError::arg("cannot project a zero or non-finite vector"));
        }
        let scale = (n as f64 / energy).sqrt();
        velocities.iter_mut().for_each(|v| *v *= scale);
        Ok(VelocityEnsemble { velocities })
    }

    pub(crate) fn from_raw(velocities: Vec<f64>) -> Self {
        VelocityEnsemble { velocities }
    }

    pub fn n(&self) -> usize {
        self.velocities.len()
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn into_velocities(self) -> Vec<f64> {
        self.velocities
    }

    pub fn energy(&self) -> f64 {
        self.velocities.iter().map(|v| v * v).sum()
    }

    /// Rescales in place to radius √N exactly (up to rounding).
    pub fn renormalize(&mut self) {
        let n = self.n() as f64;
        let scale = (n / self.energy()).sqrt();
        self.velocities.iter_mut().for_each(|v| *v *= scale);
    }

    pub(crate) fn velocities_mut(&mut self) -> &mut [f64] {
        &mut self.velocities
    }
}

/// A collision R_{i,j,θ} acting on the pair (i, j), i < j.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    i: usize,
    j: usize,
    theta: f64,
}

impl RotationSpec {
    /// Builds a rotation; the indices are reordered so that i < j and θ is
    /// reduced into [0, 2π).
    pub fn new(i: usize, j: usize, theta: f64) -> Result<Self> {
        if i == j {
            return Err(KacError::arg(format!("rotation indices must differ, got ({i}, {j})")));
        }
        if !theta.is_finite() {
            return Err(KacError::arg("rotation angle must be finite"));
        }
        let (i, j, theta) = if i < j { (i, j, theta) } else { (j, i, -theta) };
        Ok(RotationSpec {
            i,
            j,
            theta: theta.rem_euclid(2.0 * PI),
        })
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn inverse(&self) -> Self {
        RotationSpec {
            i: self.i,
            j: self.j,
            theta: (-self.theta).rem_euclid(2.0 * PI),
        }
    }
}

/// Post-collisional pair (v_i(θ), v_j(θ)).
#[inline]
pub fn rotate_pair(vi: f64, vj: f64, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    (vi * c + vj * s, -vi * s + vj * c)
}

/// Applies R_{i,j,θ}; all coordinates other than i and j are copied.
pub fn apply_rotation(v: &VelocityEnsemble, r: &RotationSpec) -> Result<VelocityEnsemble> {
    let mut out = v.clone();
    apply_rotation_in_place(&mut out, r)?;
    Ok(out)
}

pub(crate) fn apply_rotation_in_place(v: &mut VelocityEnsemble, r: &RotationSpec) -> Result<()> {
    let n = v.n();
    if r.j >= n {
        return Err(KacError::arg(format!(
            "rotation indices ({}, {}) out of range for n = {n}",
            r.i, r.j
        )));
    }
    let vel = v.velocities_mut();
    let (a, b) = rotate_pair(vel[r.i], vel[r.j], r.theta);
    vel[r.i] = a;
    vel[r.j] = b;
    Ok(())
}

/// Draws a point from the uniform probability measure on S^{n-1}(√n):
/// n independent standard normals rescaled to radius √n.
pub fn uniform_sphere_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<VelocityEnsemble> {
    if n < 2 {
        return Err(KacError::arg(format!("sphere sampling needs n >= 2, got {n}")));
    }
    loop {
        let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let energy: f64 = raw.iter().map(|v| v * v).sum();
        if energy > 0.0 {
            return VelocityEnsemble::project(raw);
        }
    }
}

/// log |S^{n-1}|, the log surface area of the unit sphere in ℝ^n.
pub fn ln_sphere_area(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(KacError::arg("sphere_area needs n >= 1"));
    }
    let half = 0.5 * n as f64;
    Ok(2f64.ln() + half * PI.ln() - ln_gamma(half))
}

/// |S^{n-1}| = 2π^{n/2} / Γ(n/2). Overflows to infinity for very large n;
/// use [`ln_sphere_area`] there.
pub fn sphere_area(n: usize) -> Result<f64> {
    ln_sphere_area(n).map(f64::exp)
}

/// Log of the geometric prefactor of the k-marginal of a conditioned
/// tensorisation at residual energy N - s:
///
/// (|S^{N-k-1}| / |S^{N-1}|) · N^{-(N-2)/2} · (N - s)_+^{(N-k-2)/2}.
///
/// Returns `-inf` when s ≥ N.
pub fn ln_marginal_kernel(n: usize, k: usize, s: f64) -> Result<f64> {
    if k < 1 || k + 2 > n {
        return Err(KacError::arg(format!(
            "marginal kernel needs 1 <= k <= n - 2, got n = {n}, k = {k}"
        )));
    }
    let nf = n as f64;
    let residual = nf - s;
    if !(residual > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let exponent = 0.5 * (nf - k as f64 - 2.0);
    Ok(ln_sphere_area(n - k)? - ln_sphere_area(n)? - 0.5 * (nf - 2.0) * nf.ln()
        + exponent * residual.ln())
}

/// [`ln_marginal_kernel`] exponentiated.
pub fn marginal_kernel(n: usize, k: usize, s: f64) -> Result<f64> {
    ln_marginal_kernel(n, k, s).map(f64::exp)
}
