use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};
use crate::model::ModelPrimitives;

/// Whether the resource constraint is slack or binds along a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Slack,
    Binding,
}

fn output_slope(prims: &ModelPrimitives, m1: f64, t: f64) -> Result<f64> {
    let f_t = finite("f_t", prims.f_t(m1, t), &[m1, t])?;
    if f_t <= 0.0 {
        return Err(Error::DegenerateDenominator { m1, t, f_t });
    }
    Ok(f_t)
}

/// `dt/dm1` along the separating schedule while `m2 = m2°`.
pub fn slack_rhs(prims: &ModelPrimitives, m1: f64, t: f64) -> Result<f64> {
    let f_t = output_slope(prims, m1, t)?;
    let marginal = prims.f_m1(m1, t) - prims.c_m1(m1, t);
    finite("slack rhs", -marginal / f_t, &[m1, t])
}

/// `dt/dm1` along the separating schedule while `m2 = M - m1`.
pub fn binding_rhs(prims: &ModelPrimitives, m1: f64, t: f64) -> Result<f64> {
    let f_t = output_slope(prims, m1, t)?;
    let marginal = prims.f_m1(m1, t) - prims.c_m1(m1, t) - prims.alpha
        + prims.h_prime(prims.budget - m1);
    finite("binding rhs", -marginal / f_t, &[m1, t])
}

pub fn rhs(prims: &ModelPrimitives, region: Region, m1: f64, t: f64) -> Result<f64> {
    match region {
        Region::Slack => slack_rhs(prims, m1, t),
        Region::Binding => binding_rhs(prims, m1, t),
    }
}
