//! Relative cubical homology, induced maps and symbolic dynamics over ℤ.

pub mod cubical;
pub mod induced;
pub mod matrix;
pub mod snf;
pub mod symbolic;

pub use cubical::{acyclicity_check, relative_homology, Cell, Chain, CubicalPair, Generator, Lattice, RelHomology};
pub use induced::{induced_map, induced_map_with_homology, GradedIntMatrix};
pub use matrix::IntMatrix;
pub use snf::Smith;
pub use symbolic::{
    build_symbol_system, entropy_lower_bound, lefschetz, reduce_recurrent, verify_sft, CertificationReport, EntropyBound,
    Reduced, ShiftEquivalence, SymbolSystem,
};
