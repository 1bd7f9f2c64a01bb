mod common;

use std::sync::Arc;

use proptest::prelude::*;

use common::*;
use stepwise::engine::{Engine, StrategyChoice};
use stepwise::expr::{parse, Expr};
use stepwise::prelude::{parse_prelude, pat_to_expr};
use stepwise::rules::{add_rule, append_rule, builtin_rules};
use stepwise::strategy::{firsts, outermost, Context, Strategy as Strat};

#[test]
fn parse_pretty_round_trip() {
    prop_round_trip(PROPERTY_CASES).unwrap();
}

#[test]
fn substitution_agrees_with_free_variable_oracle() {
    prop_substitution(PROPERTY_CASES).unwrap();
}

#[test]
fn derivations_replay() {
    prop_replay(PROPERTY_CASES).unwrap();
}

#[test]
fn remaining_steps_count_down() {
    prop_countdown(PROPERTY_CASES).unwrap();
}

#[test]
fn partial_seq_law_by_enumeration() {
    let checked = check_partial_seq_law().unwrap();
    assert_eq!(checked, 72 * 72 * 3);
}

#[test]
fn enumeration_sizes() {
    assert_eq!(enumerate_strategies(1).len(), 4);
    assert_eq!(enumerate_strategies(2).len(), 4 + 4 + 4 * 4 * 4);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn addition_matches_integer_sum(x in -1000i64..1000, y in -1000i64..1000) {
        let rule = add_rule();
        prop_assert_eq!(rule.apply(&Expr::binop("+", Expr::lit(x), Expr::lit(y))), Some(Expr::lit(x + y)));
        prop_assert_eq!(rule.apply(&Expr::binop("+", Expr::var("a"), Expr::lit(y))), None);
    }

    #[test]
    fn append_matches_list_concatenation(
        xs in prop::collection::vec(0i64..50, 0..=5),
        ys in prop::collection::vec(0i64..50, 0..=5),
    ) {
        let lit_list = |v: &[i64]| Expr::list(v.iter().copied().map(Expr::lit));
        let rule = Arc::new(append_rule());
        let only_append = outermost(Strat::rule(rule));
        let mut term = Expr::binop("++", lit_list(&xs), lit_list(&ys));
        for _ in 0..=xs.len() {
            let Some(step) = firsts(&only_append, &Context::new(term.clone())).unwrap().into_iter().next() else { break };
            term = step.result;
        }
        let oracle: Vec<i64> = xs.iter().chain(&ys).copied().collect();
        prop_assert_eq!(term, lit_list(&oracle));
    }

    #[test]
    fn rule_application_is_deterministic(p in arb_program()) {
        for rule in builtin_rules() {
            for path in p.paths() {
                let sub = p.at(&path).unwrap();
                if let Some((i, b)) = rule.match_rule(sub) {
                    let again = rule.alternative(i).unwrap().apply(sub);
                    prop_assert_eq!(rule.apply(sub), again.clone());
                    if let stepwise::rules::RuleBody::Intensional(alts) = &rule.body {
                        prop_assert_eq!(Some(alts[i].instantiate(&b)), again);
                    }
                }
            }
        }
    }

    #[test]
    fn labels_are_transparent(p in arb_program()) {
        let engine = Engine::new();
        let s = engine.strategy(StrategyChoice::Outermost);
        let labelled = Strat::label("outer", s.clone());
        let ctx = Context::new(p);
        let plain: Vec<_> = firsts(s, &ctx).unwrap().into_iter().map(|st| (st.rule.id.clone(), st.focus, st.result)).collect();
        let with: Vec<_> = firsts(&labelled, &ctx).unwrap().into_iter().map(|st| (st.rule.id.clone(), st.focus, st.result)).collect();
        prop_assert_eq!(plain, with);
    }

    #[test]
    fn subterm_paths_address_nodes(x in arb_expr(5)) {
        for path in x.paths() {
            prop_assert!(x.at(&path).is_some());
            for k in 0..path.depth() {
                prop_assert!(x.at(&stepwise::expr::Path(path.0[..k].to_vec())).is_some());
            }
        }
    }

    #[test]
    fn is_fun_counts_spine_applications(n in 0usize..5, m in 0usize..5) {
        let term = Expr::app_n(Expr::var("f"), (0..n).map(|i| Expr::lit(i as i64)));
        prop_assert_eq!(term.is_fun("f", m), n == m);
    }
}

#[test]
fn patterns_map_injectively_to_expressions() {
    let prelude = parse_prelude(
        "f [] = 0\nf (x:xs) = 1\nf [x] = 2\nf [x,y] = 3\nf (x:(y:zs)) = 4\nf 5 = 5\nf (Just x) = 6\nf Nothing = 7\nf _ = 8",
    )
    .unwrap();
    let exprs: Vec<Expr> = prelude.groups[0].bindings.iter().map(|d| pat_to_expr(&d.patterns[0])).collect();
    for (i, a) in exprs.iter().enumerate() {
        assert!(!format!("{a:?}").contains("Abs"));
        for b in &exprs[i + 1..] {
            assert_ne!(a, b);
        }
    }
}

#[test]
fn evaluation_strategies_are_deterministic_on_the_running_example() {
    let engine = Engine::new();
    for choice in [StrategyChoice::Outermost, StrategyChoice::Innermost] {
        let d = engine.derive(&parse(RUNNING_EXAMPLE).unwrap(), choice).unwrap();
        for term in d.terms() {
            let n = firsts(engine.strategy(choice), &Context::new(term.clone())).unwrap().len();
            assert!(n <= 1, "{term} has {n} next steps under {choice:?}");
        }
    }
}
