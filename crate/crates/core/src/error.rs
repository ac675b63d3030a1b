use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// No Assumption-(A) parameters exist for the potential.
    #[error("certification error: {0}")]
    Certification(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// `b(a) <= 2 υ₀(a)`: the superstability constant `A(a)` would not be positive.
    #[error(
        "edge too coarse: a = {a} gives b(a) = {b} <= 2·v0(a) = {two_v0}; choose a smaller edge so that b(a) > 2·v0(a)"
    )]
    EdgeTooCoarse { a: f64, b: f64, two_v0: f64 },

    /// Only the `s > d` constant branch is implemented.
    #[error(
        "core exponent s = {s} equals dimension d = {d}: stability constants are only computed on the s > d branch (m = 2, A = (b - 2 v0)/4, B = v0/2)"
    )]
    LogarithmicBranch { s: f64, d: usize },

    #[error("region has {cubes} cubes; enumeration is limited to {limit}")]
    RegionTooLarge { cubes: usize, limit: usize },

    /// Activity outside the Kirkwood–Salzburg convergence disc `|z| <= e^{-2βB-1}/C(β)`.
    #[error(
        "activity z = {z} exceeds the KS convergence radius z_max = e^(-2 beta B - 1)/C(beta) = {z_max}; pass the radius override to force evaluation"
    )]
    AboveRadius { z: f64, z_max: f64 },

    #[error("division by an estimate consistent with zero: {0}")]
    Division(String),
}
