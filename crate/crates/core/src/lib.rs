//! Discretized unit commitment with min-stop ramping constraints.
//!
//! The crate builds the compact ILP of a fleet of units with discrete
//! operating points, solves its LP relaxation with a bounded revised
//! simplex, solves it exactly by branch and bound, and computes the
//! Dantzig-Wolfe bound by column generation with a dynamic-programming
//! pricing oracle.

pub mod bnb;
pub mod colgen;
pub mod compact;
pub mod lp;
pub mod model;
pub mod subproblem;

pub use bnb::{solve_ilp, BnbOptions, IlpResult, IlpStatus};
pub use colgen::{
    cg_solve, compare_bounds, integer_rmp_heuristic, BoundsReport, CgConfig, CgResult, CgStatus, Column, CompareConfig,
    InitStrategy, IntegerRmpOutcome, IntegerRmpStatus,
};
pub use compact::{build_compact, build_compact_with, BuildOptions, CompactModel, Formulation};
pub use lp::{solve_lp, Basis, LpModel, LpSolution, LpStatus, Sense, VarStatus};
pub use model::{
    generate_instance, plan_cost, read_instance, validate_plan, write_instance, DemandProfile, GeneratorConfig,
    InitialCondition, Instance, OperatingPoint, Plan, Unit,
};
pub use subproblem::{
    check_conjecture, price_unit_dp, ConjectureConfig, ConjectureReport, CounterExample, DualPrices, UnitDuals,
};
