//! Exact computation of exponentially twisted periodic cyclic homology and
//! twisted de Rham cohomology on desk-scale affine instances, with their
//! Weyl-algebra actions and the comparison between the two sides.
//!
//! All arithmetic is over the rationals and exact. The crate is organized in
//! layers:
//!
//! * [`linalg`] — sparse rational matrices, kernels, homology, and Gaussian
//!   reduction of folded complexes;
//! * [`dgcat`] — table presentations of dg categories with central families,
//!   and implicit polynomial coordinate algebras;
//! * [`hochschild`] — normalized Hochschild chains and the operator suite
//!   `b`, `B`, `β(t)`, `e(t)`, `E(t)`;
//! * [`lambdamod`] — the generic twisted-module engine: relation checking,
//!   truncated periodic towers, Weyl actions, weak morphisms, intertwiners;
//! * [`derham`] — polynomial differential forms, the two de Rham module
//!   structures, and the twisted de Rham complex with its Weyl action;
//! * [`hkr`] — the Hochschild–Kostant–Rosenberg comparison map and the
//!   end-to-end comparison driver;
//! * [`instance`] / [`report`] — file formats and deterministic reports.

pub mod dgcat;
pub mod derham;
pub mod hkr;
pub mod hochschild;
pub mod instance;
pub mod lambdamod;
pub mod lin;
pub mod linalg;
pub mod report;
