//! Shared fixtures for the benchmarks.

use kac_core::{mixture, mixture_on, GridDensity1D, GridSpec, MixtureSpec};

/// The two-scale mixture with δ = 1/4 on the default grid.
pub fn quarter() -> GridDensity1D {
    mixture(MixtureSpec::new(0.25).expect("valid δ")).expect("mixture on the default grid")
}

/// The same mixture on a given grid.
pub fn quarter_on(grid: GridSpec) -> GridDensity1D {
    mixture_on(MixtureSpec::new(0.25).expect("valid δ"), grid).expect("mixture on the grid")
}
