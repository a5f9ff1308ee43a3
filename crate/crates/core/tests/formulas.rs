// Formula spot-checks against scalar-loop oracles on tiny random instances.

#[path = "support/oracles.rs"]
mod oracles;

use oracles::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn loss_matches_oracle(t in tiny()) {
        check_loss(t)?;
    }

    #[test]
    fn penalty_matches_oracle(t in tiny()) {
        check_penalty(t)?;
    }

    #[test]
    fn df_matches_oracle(t in tiny()) {
        check_df(t)?;
    }

    #[test]
    fn gic_matches_oracle(t in tiny()) {
        check_gic(t)?;
    }

    #[test]
    fn er_matches_oracle(c in er_case()) {
        check_er(c)?;
    }

    #[test]
    fn rates_match_oracle(c in rate_case()) {
        check_rates(c)?;
    }
}
