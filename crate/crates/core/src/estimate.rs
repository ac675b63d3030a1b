use alloc::string::String;

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Enumeration,
    Quadrature,
    MonteCarlo,
}

/// A numerical value with one standard error and a deterministic bound on
/// everything the computation left out.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stat_err: f64,
    pub trunc_bound: f64,
    pub method: Method,
    pub warning: Option<String>,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stat_err: 0.0,
            trunc_bound: 0.0,
            method: Method::Enumeration,
            warning: None,
        }
    }

    pub fn new(value: f64, stat_err: f64, trunc_bound: f64, method: Method) -> Self {
        debug_assert!(stat_err >= 0.0 && trunc_bound >= 0.0);
        Self {
            value,
            stat_err,
            trunc_bound,
            method,
            warning: None,
        }
    }

    pub fn with_warning(mut self, w: impl Into<String>) -> Self {
        let w = w.into();
        self.warning = Some(match self.warning.take() {
            Some(old) => alloc::format!("{old}; {w}"),
            None => w,
        });
        self
    }

    /// `|value - target| <= k·stat_err + trunc_bound`.
    pub fn contains(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stat_err + self.trunc_bound
    }

    /// Two estimates agree within `k` combined standard errors plus both truncation bounds.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        let s = math::sqrt(self.stat_err * self.stat_err + other.stat_err * other.stat_err);
        (self.value - other.value).abs() <= k * s + self.trunc_bound + other.trunc_bound
    }

    /// Combines two method tags, keeping the least exact one.
    pub(crate) fn weakest(a: Method, b: Method) -> Method {
        use Method::*;
        match (a, b) {
            (MonteCarlo, _) | (_, MonteCarlo) => MonteCarlo,
            (Quadrature, _) | (_, Quadrature) => Quadrature,
            _ => Enumeration,
        }
    }
}
