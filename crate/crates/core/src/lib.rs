//! Optimal execution of Vega hedges for an exotic book.
//!
//! The crate prices the hedging vanillas in a stochastic-volatility model,
//! turns the book's bucket Vegas into a target vanilla position, and plans
//! deterministic trading schedules that trade off execution costs against
//! residual Vega risk and a directional view on volatility.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod book;
pub mod costs;
pub mod error;
pub mod hedging;
pub mod market_model;
pub mod numerics;
pub mod pnl_sim;
pub mod pricing;
pub mod tpbvp;
pub mod trajectory;

pub use book::{exposure, target_ratios, ExoticBook, TargetVector};
pub use costs::CostSpec;
pub use error::{HedgeError, Result};
pub use hedging::{
    lambda_of, objective, plan_bucket_cancellation, plan_closed_form, plan_vega_hedge, ClosedForm,
    HedgeInputs, ProblemKind,
};
pub use market_model::{
    frozen_view, simulate_paths, validate_params, MarketView, Measure, PathSet, SpotState,
    SvParams, ValidationReport,
};
pub use pnl_sim::{
    compare_strategies, estimate_objective, optimal_stock_loading, simulate_pnl, stock_overlay,
    ObjectiveEstimate, PairedComparison, PnLSampleSet, StockLevels, StockMode, StockOverlay,
};
pub use pricing::{
    bs_price, bs_vega, heston_delta, heston_price, implied_vol, vega_profile, OptionKind,
    VanillaOption, VegaProfile,
};
pub use tpbvp::{
    el_residual, solve_hamiltonian_bvp, transcription_oracle, BvpProblem, BvpSolution,
    ResidualReport, Transcription, TranscriptionSolution,
};
pub use trajectory::Trajectory;
