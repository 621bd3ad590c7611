//! Free-fermion simulation of QAOA on transverse-field Ising rings.
//!
//! The circuit `∏ e^{-iθ^x H_x} e^{-iθ^z H_z} |+⟩^⊗N` stays on the manifold of
//! fermionic Gaussian states after a Jordan-Wigner mapping, so its energy is a
//! trace over `2N × 2N` Bogoliubov-de Gennes matrices. The crate provides
//! those matrices ([`nambu`]), the coupling families studied ([`models`]), the
//! circuit energy and gradient ([`evolution`]), multistart minimisation and
//! critical-depth searches ([`optimizer`]), closed-form dimension counts with
//! numerical certificates ([`theory`]), a dense `2^N` reference ([`ed`]) and an
//! experiment harness ([`harness`]).

pub mod ed;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod models;
pub mod nambu;
pub mod optimizer;
pub mod theory;

pub use error::{Error, Result};
pub use evolution::{EvolutionCache, QaoaParams};
pub use nambu::{CouplingConfig, FermionParity, NambuMatrix};
