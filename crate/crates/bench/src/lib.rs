//! Fixtures shared by the criterion benches in `benches/`.

use walkdual_core::{FiniteRV, UtilitySpec};

/// Innovations the benches sweep over, with a short label each.
pub fn innovations() -> Vec<(&'static str, FiniteRV)> {
    vec![
        ("symmetric", FiniteRV::symmetric_binomial()),
        ("asymmetric", FiniteRV::asymmetric_binomial()),
        ("trinomial", FiniteRV::trinomial()),
    ]
}

pub fn crra_cube_root() -> UtilitySpec {
    UtilitySpec::crra(1.0 / 3.0).expect("valid exponent")
}

pub fn power_conjugate() -> UtilitySpec {
    UtilitySpec::power_conjugate(1.0, 1.0).expect("valid parameters")
}
