//! Two-point boundary-value problems of the general (convex-cost) hedging
//! problems: Hamiltonian shooting, the direct-transcription oracle and an
//! Euler–Lagrange residual check.

mod residual;
mod shooting;
mod transcription;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hedging::{HedgeInputs, ProblemKind};

pub use residual::{el_residual, ResidualReport};
pub use shooting::{solve_hamiltonian_bvp, BvpSolution};
pub use transcription::{transcription_oracle, Transcription, TranscriptionSolution};

pub const DEFAULT_BVP_GRID: usize = 512;
pub const DEFAULT_ORACLE_GRID: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvpProblem {
    pub inputs: HedgeInputs,
    pub kind: ProblemKind,
}

impl BvpProblem {
    pub fn new(inputs: HedgeInputs, kind: ProblemKind) -> Result<Self> {
        inputs.validate()?;
        Ok(BvpProblem { inputs, kind })
    }

    /// 𝒱_SV = 0: the exposure term vanishes and the problem is pure execution.
    pub(crate) fn is_degenerate(&self) -> bool {
        self.inputs.vega_sv.iter().all(|v| *v == 0.0)
    }

    /// Degenerate-case trajectory: hold (free end) or straight line (pinned).
    pub(crate) fn execution_only(&self, m: usize) -> crate::trajectory::Trajectory {
        use crate::trajectory::Trajectory;
        match self.kind {
            ProblemKind::VegaHedge => Trajectory::constant(&self.inputs.q0, self.inputs.horizon, m),
            ProblemKind::BucketCancellation => Trajectory::linear(
                &self.inputs.q0,
                &self.inputs.hedged_position(),
                self.inputs.horizon,
                m,
            ),
        }
    }
}
