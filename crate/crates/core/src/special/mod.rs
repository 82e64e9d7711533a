pub mod bessel;
pub mod bump;
pub mod gamma;
pub mod hankel;
pub mod quad;

pub use bessel::bessel_j;
pub use bump::{bump, bump_jet, bump_of, BumpFunction, Jet};
pub use gamma::{gamma_p, gamma_q, log_gamma};
pub use hankel::{hankel_transform, vring_pm, HankelProfile, Kernel, QuarterTurn, Sign, SmoothCertificate, VringParams};
pub use quad::integrate;
