//! Function-preserving reparameterisations and the diagnostics built on them.

mod coupling;
mod diag;
mod expansion;
mod sparsify;

pub use coupling::{
    coupling_by_backprop, gradient_divergence, scaffold_coupling_probe, CouplingReport, Divergence, FACTOR_TOL,
};
pub use diag::{
    extract_pair, full_diagonalize, hidden_interfaces, install_pair, partial_diagonalize, reparam_single,
    DiagonalizedPair, ORTHOGONALITY_TOL,
};
pub use expansion::{nested_expand_eval, shell_collapse_check, shell_forward};
pub use sparsify::{sparsify_network, sparsity_counts, sparsity_factor, SparsityReport};
