//! Classical values, extreme-point norms and maximally entangled quantum values.

mod classical;
mod injective;
mod quantum;

pub use classical::{
    classical_value_bruteforce, classical_value_heuristic, ClassicalValue, DeterministicStrategy,
    DEFAULT_CLASSICAL_BUDGET,
};
pub use injective::{
    hypercontractive_upper_bound, injective_norm, oh_map_norm, ExtremePoint, HypercontractiveBound, NormMode,
    NormValue, OhMap, DEFAULT_EXTREME_BUDGET,
};
pub use quantum::{
    chsh_optimal_strategy, kv_me_strategy, kv_quantum_closed_form, me_functional_sum_of_squares, me_state_value,
    sign_vector, KvQuantumValue, ProjectiveStrategyME, POVM_TOL,
};
