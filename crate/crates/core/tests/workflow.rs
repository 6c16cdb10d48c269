use proptest::prelude::*;

use vaxnet_core::experiment::{run_campaign_on, summarize, CampaignSettings, StrategySpec};
use vaxnet_core::fcd::{truncate, TruncationParams};
use vaxnet_core::graph::Village;
use vaxnet_core::metrics::village_characteristics;
use vaxnet_core::netgen::{convergence_check, sample_ensemble, ConvergenceTolerances, McmcParams};
use vaxnet_core::sir::SirParams;
use vaxnet_core::synth::{synth_village, VillageParams};
use vaxnet_core::vaccinate::Strategy;
use vaxnet_core::StreamKey;

fn village(id: &str, n: usize, seed: u64) -> Village {
    let params = VillageParams { n_nodes: n, ..VillageParams::default() };
    Village { id: id.into(), graph: synth_village(&params, &StreamKey::new(seed)).unwrap() }
}

#[test]
fn generated_network_keeps_the_target_shape() {
    let target = village("t", 400, 3).graph;
    let mut params = McmcParams::from_reference(&target, 8).unwrap();
    params.burn_in = 150_000;
    let ens = sample_ensemble(&params, 2).unwrap();
    assert_eq!(ens.samples.len(), 2);
    let verdict = convergence_check(
        &ens.report,
        params.target_mean_degree,
        &ConvergenceTolerances { dmm_distance: 1.0, ..Default::default() },
    );
    assert!(verdict.passed, "{verdict:?}");
    let want = village_characteristics(&target).unwrap();
    for g in &ens.samples {
        let got = village_characteristics(g).unwrap();
        assert_eq!(got.n_nodes, want.n_nodes);
        assert!((got.mean_degree - want.mean_degree).abs() < 0.5, "{} vs {}", got.mean_degree, want.mean_degree);
    }
}

#[test]
fn vaccinating_hubs_beats_doing_nothing() {
    let villages = [village("a", 300, 1), village("b", 350, 2)];
    let result = run_campaign_on(
        &villages,
        &CampaignSettings {
            strategies: vec![
                StrategySpec::new(Strategy::None),
                StrategySpec::observed(Strategy::HighestDegree, None),
            ],
            coverage: 0.2,
            sir: SirParams::default(),
            runs_per_cell: 40,
            master_seed: 5,
            freeze_truncation: false,
        },
    )
    .unwrap();
    let none = result.cell(&StrategySpec::new(Strategy::None)).unwrap();
    let hubs = result.cell(&StrategySpec::observed(Strategy::HighestDegree, None)).unwrap();
    assert!(hubs.mean_incidence < none.mean_incidence - 10.0, "{hubs:?} vs {none:?}");
    assert_eq!(summarize(&result.runs), result.summary);
}

#[test]
fn observed_network_at_large_k_is_the_full_network() {
    let g = village("a", 250, 4).graph;
    let seen = truncate(&g, TruncationParams { k: g.max_degree(), rng_seed: 1 });
    assert_eq!(seen, g);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn every_run_vaccinates_the_quota(seed in 0u64..1000, coverage in 0.01f64..0.5) {
        let v = village("p", 120, seed);
        let result = run_campaign_on(
            std::slice::from_ref(&v),
            &CampaignSettings {
                strategies: vec![StrategySpec::new(Strategy::Random), StrategySpec::new(Strategy::Nomination)],
                coverage,
                sir: SirParams::default(),
                runs_per_cell: 3,
                master_seed: seed,
                freeze_truncation: false,
            },
        )
        .unwrap();
        let quota = (coverage * 120.0 + 1e-9).round() as usize;
        for r in &result.runs {
            // repeated nominations shrink the nomination list
            match r.strategy {
                Strategy::Random => prop_assert_eq!(r.n_vaccinated, quota),
                _ => prop_assert!(r.n_vaccinated <= quota && r.interviews == quota),
            }
            prop_assert!((0.0..=1.0).contains(&r.incidence));
            prop_assert!(r.incidence * 120.0 + 1e-9 >= r.n_seeds as f64);
        }
    }
}
