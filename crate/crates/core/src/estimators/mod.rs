//! Reconstruction methods.
//!
//! * [`maxent_estimate`]: the maximum-entropy state `exp(-sum l_i E_i) / N`,
//!   with multipliers fitted by Levenberg-Marquardt.
//! * [`pvqt_estimate`]: the variational family. PVQT(alpha, beta) minimizes
//!   `sum Delta_i + alpha |u|_1 + beta |u|_inf` subject to
//!   `|tr(E_i rho) - f_i| <= Delta_i f_i`, `tr rho = 1`, `rho >= 0`, where `u`
//!   holds the probabilities of the unmeasured effects. `(1, 0)` is VQT and
//!   `(0, 1)` is VQT-infinity.

mod maxent;
mod vqt;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::sdp::SdpStatus;
use crate::states::DensityMatrix;

pub use maxent::{
    maxent_estimate, maxent_jacobian, maxent_residual, LagrangeVector, MaxEntModel, MaxEntOptions,
};
pub use vqt::{
    compile_pvqt, compile_vqt, compile_vqt_inf, estimate_compiled, pvqt_estimate, solve_tomography_sdp,
    CompiledTomography, TomographySolution, ZERO_FREQUENCY_FLOOR,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvqtParams {
    pub alpha: f64,
    pub beta: f64,
}

impl PvqtParams {
    pub const VQT: PvqtParams = PvqtParams {
        alpha: 1.0,
        beta: 0.0,
    };
    pub const VQT_INF: PvqtParams = PvqtParams {
        alpha: 0.0,
        beta: 1.0,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let ok = |x: f64| (0.0..=1.0).contains(&x);
        if !ok(alpha) || !ok(beta) {
            return Err(Error::Config(format!(
                "PVQT hyperparameters must lie in [0, 1], got ({alpha}, {beta})"
            )));
        }
        if alpha == 0.0 && beta == 0.0 {
            return Err(Error::Config("PVQT needs alpha > 0 or beta > 0".into()));
        }
        Ok(PvqtParams { alpha, beta })
    }
}

/// Method tag used in configs and output rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    MaxEnt,
    Pvqt(PvqtParams),
}

impl Method {
    pub fn is_maxent(&self) -> bool {
        matches!(self, Method::MaxEnt)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::MaxEnt => write!(f, "maxent"),
            Method::Pvqt(p) => write!(f, "pvqt({},{})", p.alpha, p.beta),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts `maxent`, `vqt`, `vqt_inf` and `pvqt(alpha,beta)`.
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        match t.to_ascii_lowercase().as_str() {
            "maxent" => return Ok(Method::MaxEnt),
            "vqt" => return Ok(Method::Pvqt(PvqtParams::VQT)),
            "vqt_inf" | "vqtinf" => return Ok(Method::Pvqt(PvqtParams::VQT_INF)),
            _ => {}
        }
        let inner = t
            .strip_prefix("pvqt(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))?;
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))?;
        let parse = |x: &str| {
            x.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number '{x}' in method '{s}'")))
        };
        Ok(Method::Pvqt(PvqtParams::new(parse(a)?, parse(b)?)?))
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Outcome of one estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Stopping rule met (residual tolerance, or a least-squares stationary
    /// point for inconsistent MaxEnt data).
    Optimal,
    /// MaxEnt multipliers reached the magnitude cap; the state is the best
    /// full-rank approximation found.
    LambdaCap,
    NoConvergence,
    Infeasible,
    MaxIter,
    NumericalTrouble,
}

impl SolveStatus {
    pub fn is_failure(self) -> bool {
        !matches!(self, SolveStatus::Optimal | SolveStatus::LambdaCap)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::LambdaCap => "lambda_cap",
            SolveStatus::NoConvergence => "no_convergence",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::NumericalTrouble => "numerical_trouble",
        }
    }
}

impl From<SdpStatus> for SolveStatus {
    fn from(s: SdpStatus) -> Self {
        match s {
            SdpStatus::Optimal => SolveStatus::Optimal,
            SdpStatus::Infeasible => SolveStatus::Infeasible,
            SdpStatus::MaxIter => SolveStatus::MaxIter,
            SdpStatus::NumericalTrouble => SolveStatus::NumericalTrouble,
        }
    }
}

impl FromStr for SolveStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "optimal" => SolveStatus::Optimal,
            "lambda_cap" => SolveStatus::LambdaCap,
            "no_convergence" => SolveStatus::NoConvergence,
            "infeasible" => SolveStatus::Infeasible,
            "max_iter" => SolveStatus::MaxIter,
            "numerical_trouble" => SolveStatus::NumericalTrouble,
            other => return Err(Error::Config(format!("unknown status '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub status: SolveStatus,
    pub iterations: usize,
    /// `max_i |tr(E_i rho) - f_i|` over the measured effects, on the
    /// returned state.
    pub constraint_residual: f64,
    /// Solver-specific convergence measure (largest KKT residual for SDPs,
    /// residual norm for MaxEnt).
    pub solver_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub rho: DensityMatrix,
    pub method: Method,
    /// Measurement tolerances; empty for MaxEnt.
    pub deltas: Vec<f64>,
    /// Infinity-norm auxiliary variable, when the program has one.
    pub delta_inf: Option<f64>,
    pub diagnostics: SolverDiagnostics,
}

/// `max_i |tr(E_i rho) - f_i|`.
pub(crate) fn constraint_residual(
    rho: &DensityMatrix,
    effects: &[crate::cxmat::CMatrix],
    f: &[f64],
) -> f64 {
    effects
        .iter()
        .zip(f)
        .map(|(e, &fi)| (rho.expectation(e) - fi).abs())
        .fold(0.0, f64::max)
}
