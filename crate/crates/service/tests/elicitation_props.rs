use proptest::prelude::*;
use rentdiv_core::rational::{q, qi};
use rentdiv_core::Rational;
use rentdiv_service::elicitation::{classify, infer_rho, Answer, Case, ElicitationSession, SelfAssessment, SessionConfig, Stage};

fn menu() -> Vec<Rational> {
    vec![qi(0), q(1, 2), qi(1), qi(2)]
}

fn config(n: usize, m: i64) -> SessionConfig {
    SessionConfig {
        agents: (0..n).map(|i| format!("agent{i}")).collect(),
        rooms: (0..n).map(|a| format!("room{a}")).collect(),
        total_rent: qi(m),
        rho_menu: menu(),
        rho_bar: None,
        population: None,
    }
}

/// Rents for `n` rooms from free parts, shifted to sum to `m`.
fn split(parts: &[i64], m: i64) -> Vec<Rational> {
    let n = parts.len() as i64;
    let sum: i64 = parts.iter().sum();
    let shift = q(m - sum, n);
    parts.iter().map(|&p| qi(p) + &shift).collect()
}

proptest! {
    #[test]
    fn classification_is_exclusive(parts in proptest::collection::vec(0i64..50, 1..5), b in 0i64..60) {
        let rents: Vec<Rational> = parts.iter().map(|&p| qi(p)).collect();
        let budget = qi(b);
        let all_within = rents.iter().all(|r| *r <= budget);
        let differ = rents.windows(2).any(|w| w[0] != w[1]);
        let all_above = rents.iter().all(|r| *r > budget);
        let expected = [
            (all_within, Case::WithinBudget),
            (differ && !all_within, Case::Uneven),
            (!differ && all_above, Case::FlatAboveBudget),
        ];
        prop_assert_eq!(expected.iter().filter(|(c, _)| *c).count(), 1);
        let case = classify(&rents, &budget);
        prop_assert!(expected.iter().any(|(c, k)| *c && *k == case));
    }

    #[test]
    fn menu_answers_are_recovered(k in 0usize..4, delta in 1i64..200, v in 1i64..200) {
        let rho = menu()[k].clone();
        let reach = qi(delta.min(v));
        let e = qi(delta) + &rho * &reach;
        prop_assert_eq!(infer_rho(&e, &qi(delta), &qi(v), &menu()).unwrap(), rho);
    }

    #[test]
    fn inferred_rho_is_on_menu(num in 0i64..1000, delta in 1i64..50, v in 1i64..50) {
        let e = qi(delta) + q(num, 7);
        let rho = infer_rho(&e, &qi(delta), &qi(v), &menu()).unwrap();
        prop_assert!(menu().contains(&rho));
    }

    #[test]
    fn scripted_sessions(
        parts in proptest::collection::vec(proptest::collection::vec(0i64..100, 3), 3),
        budgets in proptest::collection::vec(0i64..150, 3),
        picks in proptest::collection::vec(0usize..3, 3),
        m in 0i64..300,
    ) {
        let mut s = ElicitationSession::new("p".into(), config(3, m)).unwrap();
        let mut asked = Vec::new();
        for i in 0..3 {
            let id = format!("agent{i}");
            let rents = split(&parts[i], m);
            let map = rents.iter().enumerate().map(|(a, r)| (format!("room{a}"), r.clone())).collect();
            s.answer(&id, Answer::Rents { rents: map }).unwrap();
            s.answer(&id, Answer::Budget { budget: qi(budgets[i]) }).unwrap();
            let case = classify(&rents, &qi(budgets[i]));
            prop_assert_eq!(s.intake[i].case, Some(case));
            match s.intake[i].stage {
                Stage::Done => prop_assert_eq!(case, Case::WithinBudget),
                Stage::AwaitRhoEquivalent => {
                    prop_assert_eq!(case, Case::Uneven);
                    let probe = s.rebate_probe(i);
                    let pick = probe.options[picks[i].min(probe.options.len() - 1)].clone();
                    s.answer(&id, Answer::RebateEquivalent { equivalent: pick }).unwrap();
                }
                Stage::AwaitRhoSelfAssessment => {
                    prop_assert_eq!(case, Case::FlatAboveBudget);
                    let level = [SelfAssessment::Lower, SelfAssessment::Typical, SelfAssessment::Higher][picks[i]];
                    s.answer(&id, Answer::SelfAssessment { level }).unwrap();
                }
                other => prop_assert!(false, "unexpected stage {:?}", other),
            }
            asked.push(rents);
        }
        prop_assert!(s.is_done());
        let json = serde_json::to_string(&s).unwrap();
        let back: ElicitationSession = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &s);

        // Each recovered preference is indifferent across its reported split.
        let e = s.build_economy().unwrap();
        for (i, rents) in asked.iter().enumerate() {
            let p = e.pref(i);
            let u0 = p.utility(0, &rents[0]);
            for (a, r) in rents.iter().enumerate() {
                prop_assert_eq!(p.utility(a, r), u0.clone());
            }
        }
    }
}
