mod common;

use common::instance;
use musiclab_core::lfap::{brute_force_performance, performance_ranking};
use musiclab_core::model::{expected_downloads, one_step_expected_downloads, one_step_expected_downloads_with};
use musiclab_core::Ranking;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn performance_ranking_never_loses_ground(inst in instance(1..=10, true)) {
        let market = inst.market();
        let star = performance_ranking(&market, &inst.a, &inst.q).unwrap();
        let now = expected_downloads(&market, &inst.a, &star).unwrap();
        let next = one_step_expected_downloads(&market, &inst.a, &star, &star).unwrap();
        prop_assert!(next - now >= -1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn re_optimizing_after_each_branch_helps(inst in instance(1..=6, true)) {
        let market = inst.market();
        let star = performance_ranking(&market, &inst.a, &inst.q).unwrap();
        let kept = one_step_expected_downloads(&market, &inst.a, &star, &star).unwrap();
        let reoptimized = one_step_expected_downloads_with(&market, &inst.a, &star, |a, _| {
            brute_force_performance(a, market.quality(), market.visibility()).map(|(r, _)| r)
        })
        .unwrap();
        prop_assert!(reoptimized >= kept - 1e-9);
    }
}

#[test]
fn two_song_event_tree() {
    // v = (2, 1), a = (1, 1), q = (0.9, 0.1), identity at both steps.
    let market = musiclab_core::Market::with_defaults(vec![1.0, 1.0], vec![0.9, 0.1], vec![2.0, 1.0]).unwrap();
    let a = musiclab_core::AttractionVector::new(vec![1.0, 1.0]).unwrap();
    let id = Ranking::identity(2);
    let e0 = 1.9 / 3.0;
    let after_first = (2.0 * 2.0 * 0.9 + 0.1) / 5.0;
    let after_second = (2.0 * 0.9 + 2.0 * 0.1) / 4.0;
    let oracle = (1.8 / 3.0) * after_first + (0.1 / 3.0) * after_second + (1.0 - e0) * e0;
    let got = one_step_expected_downloads(&market, &a, &id, &id).unwrap();
    assert!((got - oracle).abs() < 1e-15);
}
