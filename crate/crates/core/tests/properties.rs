mod common;

use common::*;
use proptest::prelude::*;
use walkdual_core::FiniteRV;

fn check(r: Check) -> Result<(), TestCaseError> {
    r.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn crra_conjugate_roundtrip(gamma in 0.1f64..0.9, x in 0.1f64..10.0) {
        check(crra_roundtrip(gamma, x))?;
    }

    #[test]
    fn power_conjugate_roundtrip(alpha in 0.2f64..3.0, beta in 0.1f64..10.0, x in 0.1f64..10.0) {
        check(power_roundtrip(alpha, beta, x))?;
    }

    #[test]
    fn lattice_law_invariants(rv in arb_rv(), n in 1usize..40) {
        check(lattice_invariants(&rv, n))?;
    }

    #[test]
    fn esscher_density_identities(rv in arb_rv(), n in 1usize..64) {
        check(esscher_identities(&rv, n))?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn power_primal_identity(alpha in 0.05f64..5.0, beta in 0.01f64..100.0, y0 in 0.05f64..20.0) {
        check(power_identity(alpha, beta, y0))?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn dual_values_are_convex_decreasing(n in 1usize..64, gamma in 0.2f64..0.7) {
        for rv in [FiniteRV::symmetric_binomial(), FiniteRV::asymmetric_binomial(), FiniteRV::trinomial()] {
            check(dual_convexity(&rv, n, gamma))?;
        }
    }
}
