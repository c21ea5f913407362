//! Incidence geometries over finite fields, their automorphism groups and
//! amalgams, and replayable null-homotopy certificates.
//!
//! * [`gf`]: prime-field arithmetic and linear algebra.
//! * [`orthospace`]: orthogonal spaces, `±` types, the geometry of
//!   nondegenerate subspaces and its hall-restricted parts.
//! * [`pregeo`]: pregeometries, flags, residues, diagrams.
//! * [`group`], [`cosetgeo`]: groups by generators, coset pregeometries,
//!   sketches and the reconstruction of a geometry from its sketch.
//! * [`homotopy`]: cycles, elementary homotopies, certificates, coverings,
//!   `H₁`.
//! * [`todd_coxeter`], [`amalgam`]: coset enumeration, amalgams, universal
//!   completions and the verification pipelines built on them.

pub mod amalgam;
pub mod cosetgeo;
pub mod fixtures;
pub mod gf;
pub mod group;
pub mod homotopy;
pub mod orthospace;
pub mod pregeo;
pub mod todd_coxeter;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The crate's one source of randomness: a seeded ChaCha generator.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
