//! Brute-force oracles and checkers: exact diagonalization, commutation-rule
//! generation with lattice verification, weight identities and operator
//! identities on small chains.

pub mod appendix;
pub mod identities;
pub mod rules;
pub mod spectrum;

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::linalg::C64;

pub use crate::bethe::eigenstate_residual;
pub use rules::{
    check_rule_on_lattice, generate_annihilation_creation_rule, generate_creation_creation_rule,
    generate_diag_creation_rule, RuleCoefficients,
};
pub use spectrum::{exact_spectrum, match_spectra, SectorSpectrum};

pub(crate) fn serialize_point<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

pub(crate) fn serialize_points<S: Serializer>(pts: &[C64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(pts.len()))?;
    for z in pts {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}
