//! Optimal transport between histograms: exact LP and entropic regularization.

mod entropic;
mod exact;

pub use entropic::{
    entropic_dual_gradient, entropic_dual_gradient_sample, entropic_dual_value, entropic_ot_value,
    independent_coupling_value, sample_index, sinkhorn, sinkhorn_warm, EntropicParams,
    SinkhornOutput,
};
pub use exact::exact_ot;

use serde::Serialize;

use crate::measures::TransportPlan;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPotentials {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl DualPotentials {
    /// `<u, p> + <v, q>`.
    pub fn dual_objective(&self, p: &[f64], q: &[f64]) -> f64 {
        crate::numerics::dot(&self.u, p) + crate::numerics::dot(&self.v, q)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OTSolution {
    pub value: f64,
    #[serde(skip)]
    pub plan: TransportPlan,
    #[serde(skip)]
    pub potentials: DualPotentials,
    pub marginal_error: f64,
    pub iterations: usize,
}
