//! Static dependency analysis for linearized EVM bytecode.
//!
//! The pipeline decodes bytecode into SSA form, materializes an abstract CFG
//! whose edges carry Def/Use sets, derives program-dependence facts through a
//! Horn-clause fixpoint, and decides security patterns on the least fixed
//! point. A concrete small-step interpreter serves as the differential
//! oracle for the independence claims the patterns certify.

pub mod cfg;
pub mod fixpoint;
pub mod frontend;
pub mod keccak;
pub mod oracle;
pub mod par;
pub mod patterns;
pub mod pdg;
pub mod pipeline;
pub mod u256;

pub use frontend::{Contract, VarId};
pub use u256::U256;
