pub mod adapted;
pub mod chain;
pub mod orbit;
pub mod sections;
pub mod tower;
pub mod triple;

pub use chain::{stabilizer_chain, stabilizer_chain_with, ChainFlag, StabilizerChain, STABILIZER_TOL};
pub use sections::{
    metric_curvature_section, parallel_tensors_section, torsion_curvature_section, SectionSetup, MAX_DEFAULT_KMAX,
};
pub use tower::{build_tower, build_tower_in_frame, nested_chart, tower_fields, DerivativeTower, NESTED_STEP_SCALE};
pub use orbit::{orbit_match, tower_invariants, MatchResult, NoMatchReason, OrbitOptions};
pub use adapted::{adapted_connection, adapted_residuals, stabilizer_field, AdaptedConnection, AdaptedResiduals, SubalgebraField};
pub use triple::{
    check_lh_triple, check_ls_triple, equivalence_check_c_c0, metricity_residual, TripleSpec, METRIC_TOL, PARALLEL_TOL,
};
