use chronicity::features::DiagnosticFeatures;
use chronicity::scoring::{
    chronicity, proportions, score_patient, subscore, Breakpoint, Parameter, ScoringRule, SubScores,
};
use chronicity::Error;
use proptest::prelude::*;

#[test]
fn conventional_boundaries() {
    let rule = ScoringRule::conventional();
    for (p, s) in [(0.0, 0), (0.10, 1), (0.25, 2), (0.50, 2), (0.51, 3), (1.0, 3)] {
        for parameter in Parameter::ALL {
            assert_eq!(subscore(p, &rule, parameter).unwrap(), s, "p = {p}");
        }
    }
    assert_eq!(subscore(1e-300, &rule, Parameter::Gs).unwrap(), 1);
    assert!(subscore(1.01, &rule, Parameter::Gs).is_err());
}

#[test]
fn hundredth_sweep_is_monotone() {
    for rule in [ScoringRule::conventional(), ScoringRule::nuanced_example()] {
        for parameter in Parameter::ALL {
            let scores: Vec<u32> = (0..=100).map(|k| subscore(k as f64 / 100.0, &rule, parameter).unwrap()).collect();
            assert!(scores.windows(2).all(|w| w[0] <= w[1]), "{}", rule.name);
            assert_eq!(scores[0], 0);
            assert!(scores[1..].iter().all(|&s| s > 0));
        }
    }
}

#[test]
fn insufficient_tissue_names_parameter() {
    let f = DiagnosticFeatures { area_cortex: 10, area_tubule_total: 5, ..Default::default() };
    match proportions(&f) {
        Err(Error::InsufficientTissue { parameter, .. }) => assert_eq!(parameter, Parameter::Gs),
        other => panic!("{other:?}"),
    }
}

#[test]
fn all_lesion_slide() {
    let f = DiagnosticFeatures {
        n_glom_total: 4,
        n_glom_gs: 4,
        area_tubule_total: 10,
        area_ta: 10,
        area_cortex: 50,
        area_if: 50,
        ..Default::default()
    };
    let r = score_patient(&f, &ScoringRule::conventional()).unwrap();
    assert_eq!(r.proportions.p_gs, 1.0);
    assert_eq!(r.proportions.p_if, 1.0);
    assert_eq!(r.total, 9);
}

fn arb_rule() -> impl Strategy<Value = ScoringRule> {
    prop::collection::vec((1u32..1000, any::<bool>(), 0u32..3), 0..6).prop_map(|raw| {
        let mut bounds: Vec<(u32, bool, u32)> = raw;
        bounds.sort_by_key(|b| b.0);
        bounds.dedup_by_key(|b| b.0);
        let mut table = vec![Breakpoint { upto: 0.0, inclusive: true, score: 0 }];
        let mut score = 0;
        for (b, inclusive, inc) in bounds {
            score += inc;
            table.push(Breakpoint { upto: b as f64 / 1000.0, inclusive, score });
        }
        table.push(Breakpoint { upto: 1.0, inclusive: true, score: score + 1 });
        ScoringRule::uniform("random", table).unwrap()
    })
}

fn arb_features() -> impl Strategy<Value = DiagnosticFeatures> {
    (1u64..500, 0u64..500, 0u64..500, 1u64..100_000, 0u64..100_000, 1u64..100_000, 0u64..100_000).prop_map(
        |(total, gs, fc, tub, ta, other, if_)| {
            let gs = gs % (total + 1);
            let fc = fc % (total - gs + 1);
            let ta = ta % (tub + 1);
            DiagnosticFeatures {
                n_glom_total: total,
                n_glom_gs: gs,
                n_glom_fc: fc,
                area_tubule_total: tub,
                area_ta: ta,
                area_cortex: tub + other + if_,
                area_if: if_,
                slide_ids: vec![],
            }
        },
    )
}

proptest! {
    #[test]
    fn subscore_is_monotone(rule in arb_rule(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for parameter in Parameter::ALL {
            prop_assert!(subscore(lo, &rule, parameter).unwrap() <= subscore(hi, &rule, parameter).unwrap());
        }
    }

    #[test]
    fn scale_invariance_and_total(f in arb_features(), k in 1u64..50, rule in arb_rule()) {
        let base = score_patient(&f, &rule).unwrap();
        let scaled = score_patient(&f.scaled(k), &rule).unwrap();
        prop_assert_eq!(&base, &scaled);
        let s = base.sub_scores;
        prop_assert_eq!(base.total, s.gs + s.fc + s.if_ + s.ta);
        prop_assert_eq!(chronicity(&s), base.total);
    }

    #[test]
    fn total_is_sum(gs in 0u32..4, fc in 0u32..4, if_ in 0u32..4, ta in 0u32..4) {
        prop_assert_eq!(chronicity(&SubScores { gs, fc, if_, ta }), gs + fc + if_ + ta);
    }
}
