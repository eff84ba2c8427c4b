//! Cost-function constructions and closed-form rates.
pub mod formulas;
pub mod psi;
pub mod tabulated;
pub use formulas::*;
pub use psi::{build_psi_eigen, build_psi_example31, example31_gamma, mixed_eigenvalue, EigenRegime};
pub use tabulated::{PsiTag, TabulatedCostFunction};
