//! The JSON report emitted for one accounting request.

use crate::accountant::CompositeBound;
use crate::conversions::gdp_to_delta;
use crate::conversions::gdp_to_eps;
use crate::error::Result;
use crate::io::{DeltaRow, EpsRow};
use crate::prv::{evaluate_composite_curves, GridSpec};
use crate::sweep::TauSweep;
use crate::tradeoff::GdpParam;
use serde::Serialize;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Conversions {
    pub eps_at_delta: Vec<EpsRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub delta_at_eps: Vec<DeltaRow>,
}

/// Result of an accounting request: a Gaussian DP parameter or a composite
/// bound, plus the requested conversions.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PrivacyReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Path of a tradeoff-curve file written alongside the report.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_ref: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub composite: Option<CompositeBound>,
    /// Coupling start the bound was evaluated at, when one was used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<u64>,
    /// τ candidates of a sweep; each conversion row then reports its own τ.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<TauSweep>,
    pub conversions: Conversions,
}

impl PrivacyReport {
    pub fn from_gdp(
        mu: GdpParam,
        tau: Option<u64>,
        deltas: &[f64],
        eps_list: &[f64],
    ) -> Result<Self> {
        let eps_at_delta = deltas
            .iter()
            .map(|&delta| {
                Ok(EpsRow {
                    delta,
                    eps: gdp_to_eps(mu.mu(), delta)?,
                })
            })
            .collect::<Result<_>>()?;
        let delta_at_eps = eps_list
            .iter()
            .map(|&eps| {
                Ok(DeltaRow {
                    eps,
                    delta: gdp_to_delta(mu.mu(), eps)?,
                    uncertainty: 0.0,
                })
            })
            .collect::<Result<_>>()?;
        Ok(PrivacyReport {
            mu: Some(mu.mu()),
            tau,
            conversions: Conversions {
                eps_at_delta,
                delta_at_eps,
            },
            ..Default::default()
        })
    }

    pub fn from_composite(
        cb: CompositeBound,
        tau: Option<u64>,
        deltas: &[f64],
        eps_list: &[f64],
        spec: &GridSpec,
    ) -> Result<Self> {
        let (delta_at_eps, eps_at_delta) = evaluate_composite_curves(&cb, eps_list, deltas, spec)?;
        Ok(PrivacyReport {
            composite: Some(cb),
            tau,
            conversions: Conversions {
                eps_at_delta,
                delta_at_eps,
            },
            ..Default::default()
        })
    }

    pub fn from_sweep(sweep: TauSweep) -> Self {
        let conversions = Conversions {
            eps_at_delta: sweep
                .eps_at_delta
                .iter()
                .map(|r| EpsRow {
                    delta: r.delta,
                    eps: r.eps,
                })
                .collect(),
            delta_at_eps: sweep.delta_rows(),
        };
        PrivacyReport {
            sweep: Some(sweep),
            conversions,
            ..Default::default()
        }
    }
}
