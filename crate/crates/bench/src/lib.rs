//! Fixtures shared by the benchmarks.

use erw_core::{Construction, CookieEnvironment, CouplingKernel};

/// `(0.9, 0.9, 0.9)`, the positive-speed reference environment.
pub fn reference_env() -> CookieEnvironment {
    CookieEnvironment::finite([0.9, 0.9, 0.9]).expect("valid environment")
}

pub fn swap_kernel() -> CouplingKernel {
    CouplingKernel::new(
        CookieEnvironment::finite([0.7, 0.9, 0.9]).expect("valid environment"),
        Construction::swap(1, 2),
    )
    .expect("favorable swap")
}

pub fn pointwise_kernel() -> CouplingKernel {
    CouplingKernel::new(
        reference_env(),
        Construction::pointwise(
            CookieEnvironment::finite([0.95, 0.9, 0.9]).expect("valid environment"),
        ),
    )
    .expect("pointwise increase")
}
