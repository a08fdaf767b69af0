//! Multi-excited random walks on the integers: cookie environments, monotone
//! couplings of arrow systems, regeneration-based speed estimation, and exact
//! small-horizon laws for validation.

pub mod arrows;
pub mod coupling;
pub mod env;
pub mod error;
pub mod oracle;
pub mod regen;
pub mod rng;
pub mod stats;
pub mod walk;

pub use arrows::{
    check_path_order, check_theorem_order_properties, walk_from_arrows, ArrowSystem, Property,
    PropertyReport, Step, Violation, WalkPath,
};
pub use coupling::{Construction, CouplingKernel, JointTable};
pub use env::{Classification, CookieEnvironment, Delta, EnvDiagnostics, Form};
pub use error::{Error, Result};
pub use oracle::{
    exact_coupled_distribution, exact_dominance_check, exact_path_distribution, DominanceReport,
    ExactDistribution,
};
pub use regen::{
    coupled_speed_pair, find_regenerations, naive_speed, regen_probability,
    regen_probability_coupled, speed_regeneration, witness_event_frequency, RegenerationReport,
    RunParams, SpeedEstimate,
};
pub use rng::SeedKey;
pub use stats::Interval;
pub use walk::{simulate_coupled, simulate_erw, CoupledSample};
