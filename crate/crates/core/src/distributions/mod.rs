//! Rate priors and conditional sales processes.

mod prior;
mod process;

pub use prior::{MixtureComponent, PriorKind, RatePrior, MIXTURE_WEIGHT_TOLERANCE};
pub use process::{sample_poisson, DemandProcess, TAIL_CUTOFF};
