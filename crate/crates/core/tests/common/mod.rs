#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, prop_oneof, BoxedStrategy, Just};
use proptest::strategy::Strategy as Gen;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use stepwise::cli::render_derivation;
use stepwise::engine::{Derivation, Diagnosis, Engine, EngineError, Mode, StrategyChoice, STANDARD_PRELUDE};
use stepwise::expr::{parse, pretty, substitute, Expr};
use stepwise::rules::{Alternative, Rule, RuleId};
use stepwise::strategy::{analyse, Context, Strategy};

pub const RUNNING_EXAMPLE: &str = "sum ([3,7] ++ [5])";
pub const OUTERMOST_GOLDEN: &str = include_str!("../golden/outermost.txt");
pub const INNERMOST_GOLDEN: &str = include_str!("../golden/innermost.txt");
pub const PROPERTY_CASES: u32 = 1000;

pub fn e(text: &str) -> Expr {
    parse(text).unwrap_or_else(|err| panic!("{text}: {err}"))
}

/// Each derivation line with all whitespace removed.
pub fn normalized_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.chars().filter(|c| !c.is_whitespace()).collect::<String>())
        .filter(|l| !l.is_empty())
        .collect()
}

pub fn golden(choice: StrategyChoice) -> &'static str {
    match choice {
        StrategyChoice::Outermost => OUTERMOST_GOLDEN,
        StrategyChoice::Innermost => INNERMOST_GOLDEN,
    }
}

/// Derives the running example and compares it with the golden file.
pub fn check_golden(engine: &Engine, choice: StrategyChoice) -> Result<(), String> {
    let d = engine.derive(&e(RUNNING_EXAMPLE), choice).map_err(|err| err.to_string())?;
    if d.len() != 11 {
        return Err(format!("expected 11 steps, got {}", d.len()));
    }
    let got = normalized_lines(&render_derivation(&d, false));
    let want = normalized_lines(golden(choice));
    if got != want {
        let first = got.iter().zip(&want).position(|(g, w)| g != w);
        return Err(format!("mismatch at line {first:?}:\n{}", render_derivation(&d, false)));
    }
    Ok(())
}

pub fn generated_only_engine() -> Engine {
    Engine::builder().builtins(false).prelude(STANDARD_PRELUDE).build().unwrap()
}

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn outcome(r: Result<(), proptest::test_runner::TestError<impl std::fmt::Debug>>) -> Result<(), String> {
    r.map_err(|err| err.to_string())
}


const VARS: &[&str] = &["x", "y", "z", "f", "xs", "sum'", "map"];
const CONSTRUCTORS: &[&str] = &["True", "Nothing", "Just"];
const OPERATORS: &[&str] = &["+", "++", ":"];

pub fn arb_var() -> impl Gen<Value = String> {
    prop::sample::select(VARS).prop_map(str::to_string)
}

/// Arbitrary expressions of depth at most `depth`.
pub fn arb_expr(depth: u32) -> BoxedStrategy<Expr> {
    let leaf = prop_oneof![
        3 => arb_var().prop_map(Expr::var),
        1 => prop::sample::select(CONSTRUCTORS).prop_map(Expr::var),
        1 => prop::sample::select(OPERATORS).prop_map(Expr::var),
        2 => (-20i64..100).prop_map(Expr::lit),
        1 => Just(Expr::nil()),
    ];
    leaf.prop_recursive(depth, 64, 4, |inner| {
        prop_oneof![
            3 => (inner.clone(), inner.clone()).prop_map(|(f, a)| Expr::app(f, a)),
            2 => (arb_var(), inner.clone()).prop_map(|(x, b)| Expr::abs(x, b)),
            2 => (prop::sample::select(OPERATORS), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Expr::binop(op, l, r)),
            1 => prop::collection::vec(inner, 1..4).prop_map(Expr::list),
        ]
    })
    .boxed()
}

/// Closed, terminating programs over the default prelude and builtins.
pub fn arb_program() -> BoxedStrategy<Expr> {
    let num_leaf = (0i64..10).prop_map(Expr::lit).boxed();
    let list_leaf = prop::collection::vec(0i64..10, 0..4)
        .prop_map(|ns| Expr::list(ns.into_iter().map(Expr::lit)))
        .boxed();
    let mut num = num_leaf.clone();
    let mut list = list_leaf.clone();
    for _ in 0..2 {
        let (n, l) = (num.clone(), list.clone());
        let next_num = prop_oneof![
            2 => num_leaf.clone(),
            2 => (n.clone(), n.clone()).prop_map(|(a, b)| Expr::binop("+", a, b)),
            2 => l.clone().prop_map(|xs| Expr::app(Expr::var("sum"), xs)),
            1 => n.clone().prop_map(|a| Expr::app(Expr::var("double"), a)),
            1 => n.clone().prop_map(|a| Expr::app(Expr::var("id"), a)),
            1 => l.clone().prop_map(|xs| Expr::app(Expr::var("length"), xs)),
            1 => (n.clone(), l.clone())
                .prop_map(|(v, xs)| Expr::app_n(Expr::var("foldl"), [Expr::var("+"), v, xs])),
        ]
        .boxed();
        let next_list = prop_oneof![
            2 => list_leaf.clone(),
            2 => (l.clone(), l.clone()).prop_map(|(a, b)| Expr::binop("++", a, b)),
            1 => (n.clone(), l.clone()).prop_map(|(h, t)| Expr::cons(h, t)),
            1 => l.clone().prop_map(|xs| Expr::app_n(Expr::var("map"), [Expr::var("double"), xs])),
        ]
        .boxed();
        num = next_num;
        list = next_list;
    }
    prop_oneof![2 => num, 1 => list].boxed()
}


/// Free variable occurrences with multiplicity, computed independently of
/// the library.
pub fn free_occurrences(e: &Expr) -> BTreeMap<String, usize> {
    fn go(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeMap<String, usize>) {
        match e {
            Expr::Var(x) => {
                if !bound.iter().any(|b| b == x) {
                    *out.entry(x.clone()).or_default() += 1;
                }
            }
            Expr::Lit(_) => {}
            Expr::App(f, a) => {
                go(f, bound, out);
                go(a, bound, out);
            }
            Expr::Abs(x, b) => {
                bound.push(x.clone());
                go(b, bound, out);
                bound.pop();
            }
        }
    }
    let mut out = BTreeMap::new();
    go(e, &mut Vec::new(), &mut out);
    out
}

/// Expected free occurrences after substituting `r` for `x` in `body`.
pub fn substituted_occurrences(x: &str, r: &Expr, body: &Expr) -> BTreeMap<String, usize> {
    let mut expected = free_occurrences(body);
    let n = expected.remove(x).unwrap_or(0);
    for (v, k) in free_occurrences(r) {
        *expected.entry(v).or_default() += n * k;
    }
    expected.retain(|_, k| *k > 0);
    expected
}

/// Alpha-equivalence by comparing binder positions.
pub fn alpha_eq(a: &Expr, b: &Expr) -> bool {
    fn go<'a>(a: &'a Expr, b: &'a Expr, env: &mut Vec<(&'a str, &'a str)>) -> bool {
        match (a, b) {
            (Expr::Var(x), Expr::Var(y)) => {
                let ix = env.iter().rposition(|(l, _)| *l == x);
                let iy = env.iter().rposition(|(_, r)| *r == y);
                match (ix, iy) {
                    (None, None) => x == y,
                    (i, j) => i == j,
                }
            }
            (Expr::Lit(m), Expr::Lit(n)) => m == n,
            (Expr::App(f, x), Expr::App(g, y)) => go(f, g, env) && go(x, y, env),
            (Expr::Abs(x, p), Expr::Abs(y, q)) => {
                env.push((x, y));
                let r = go(p, q, env);
                env.pop();
                r
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

/// Sums and concatenations evaluated directly, for checking derivation results.
pub fn reference_value(e: &Expr) -> Option<Expr> {
    fn num(e: &Expr) -> Option<i64> {
        if let Expr::Lit(n) = e {
            return Some(*n);
        }
        let (head, args) = e.spine();
        let Expr::Var(h) = head else { return None };
        match (h.as_str(), args.as_slice()) {
            ("+", [a, b]) => Some(num(a)? + num(b)?),
            ("sum", [xs]) => Some(list(xs)?.iter().sum()),
            ("double", [a]) => Some(num(a)? + num(a)?),
            ("id", [a]) => num(a),
            ("length", [xs]) => Some(list(xs)?.len() as i64),
            ("foldl", [f, v, xs]) if **f == Expr::var("+") => Some(num(v)? + list(xs)?.iter().sum::<i64>()),
            _ => None,
        }
    }
    fn list(e: &Expr) -> Option<Vec<i64>> {
        if *e == Expr::nil() {
            return Some(Vec::new());
        }
        let (head, args) = e.spine();
        let Expr::Var(h) = head else { return None };
        match (h.as_str(), args.as_slice()) {
            (":", [x, xs]) => {
                let mut out = vec![num(x)?];
                out.extend(list(xs)?);
                Some(out)
            }
            ("++", [a, b]) => {
                let mut out = list(a)?;
                out.extend(list(b)?);
                Some(out)
            }
            ("map", [f, xs]) if **f == Expr::var("double") => Some(list(xs)?.into_iter().map(|n| 2 * n).collect()),
            _ => None,
        }
    }
    num(e).map(Expr::lit).or_else(|| list(e).map(|ns| Expr::list(ns.into_iter().map(Expr::lit))))
}


pub fn prop_round_trip(cases: u32) -> Result<(), String> {
    outcome(runner(cases).run(&arb_expr(6), |ex| {
        let text = pretty(&ex);
        let back = parse(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(back, ex, "text: {}", text);
        Ok(())
    }))
}

pub fn prop_substitution(cases: u32) -> Result<(), String> {
    let input = (arb_var(), arb_expr(3), arb_expr(4));
    outcome(runner(cases).run(&input, |(x, r, body)| {
        let out = substitute(&x, &r, &body);
        prop_assert_eq!(free_occurrences(&out), substituted_occurrences(&x, &r, &body));
        if !free_occurrences(&body).contains_key(&x) {
            prop_assert!(alpha_eq(&out, &body));
        }
        Ok(())
    }))
}

/// Every step replays from its rule and focus, consecutive steps connect and
/// the end is a value with no further step.
pub fn check_replay(engine: &Engine, d: &Derivation, choice: StrategyChoice) -> Result<(), String> {
    let mut prev = &d.start;
    for (i, step) in d.steps.iter().enumerate() {
        if &step.before != prev {
            return Err(format!("step {i}: before does not continue the derivation"));
        }
        let sub = step.before.at(&step.focus).ok_or(format!("step {i}: focus out of range"))?;
        let new = step.rule.apply(sub).ok_or(format!("step {i}: {} does not apply", step.rule.id))?;
        let replayed = step.before.replace_at(step.focus.as_slice(), new).unwrap();
        if replayed != step.after {
            return Err(format!("step {i}: replay gives {replayed}, derivation has {}", step.after));
        }
        prev = &step.after;
    }
    if !engine.is_value(d.result()) {
        return Err(format!("end {} is not a value", d.result()));
    }
    match engine.hint(d.result(), choice) {
        Err(EngineError::NoStep(_)) => Ok(()),
        other => Err(format!("end admits a further step: {other:?}")),
    }
}

pub fn prop_replay(cases: u32) -> Result<(), String> {
    let engine = Engine::new();
    outcome(runner(cases).run(&arb_program(), |p| {
        let mut results = Vec::new();
        for choice in [StrategyChoice::Outermost, StrategyChoice::Innermost] {
            let d = engine.derive(&p, choice).map_err(|err| TestCaseError::fail(format!("{p}: {err}")))?;
            check_replay(&engine, &d, choice).map_err(|m| TestCaseError::fail(format!("{p} {choice:?}: {m}")))?;
            results.push(d.result().clone());
        }
        prop_assert_eq!(&results[0], &results[1], "strategies disagree on {}", p);
        prop_assert_eq!(Some(results[0].clone()), reference_value(&p), "wrong value for {}", p);
        Ok(())
    }))
}

/// Along a derivation the remaining count drops by one per accepted step,
/// and each engine step is diagnosed as correct.
pub fn prop_countdown(cases: u32) -> Result<(), String> {
    let engine = Engine::new();
    outcome(runner(cases).run(&(arb_program(), any::<bool>()), |(p, outer)| {
        let (choice, mode) = if outer {
            (StrategyChoice::Outermost, Mode::Outermost)
        } else {
            (StrategyChoice::Innermost, Mode::Innermost)
        };
        let d = engine.derive(&p, choice).map_err(|err| TestCaseError::fail(err.to_string()))?;
        let n = d.len();
        prop_assert_eq!(engine.steps_remaining(&p, choice).ok(), Some(n));
        for (k, step) in d.steps.iter().enumerate() {
            match engine.diagnose(&step.before, &step.after, mode) {
                Ok(Diagnosis::CorrectStep { remaining, .. }) => {
                    prop_assert_eq!(remaining, Some(n - k - 1), "after step {} of {}", k, p)
                }
                other => return Err(TestCaseError::fail(format!("step {k} of {p}: {other:?}"))),
            }
        }
        Ok(())
    }))
}


pub fn atom_rule(id: &str, from: &str, to: &str) -> Arc<Rule> {
    Arc::new(Rule::intensional(RuleId::new(id), id, vec![Alternative::new(&[], Expr::var(from), Expr::var(to))]))
}

/// Every strategy of depth at most `depth` over the two rules `A -> B` and
/// `B -> C`.
pub fn enumerate_strategies(depth: usize) -> Vec<Strategy> {
    let r1 = atom_rule("r1", "A", "B");
    let r2 = atom_rule("r2", "B", "C");
    let mut all = vec![Strategy::succeed(), Strategy::fail(), Strategy::rule(r1), Strategy::rule(r2)];
    for _ in 1..depth {
        let smaller = all.clone();
        let mut next = smaller.clone();
        for s in &smaller {
            next.push(s.clone().repeat());
            for t in &smaller {
                next.push(s.clone().seq(t.clone()));
                next.push(s.clone().partial_seq(t.clone()));
                next.push(s.clone().choice(t.clone()));
                next.push(s.clone().or_else(t.clone()));
            }
        }
        all = next;
    }
    all
}

pub type Trace = Vec<(String, String)>;

/// All complete step sequences of `s` from `term`, up to `limit` steps.
pub fn traces(s: &Strategy, term: &Expr, limit: usize) -> BTreeSet<Trace> {
    let mut out = BTreeSet::new();
    let a = analyse(s, &Context::new(term.clone())).expect("finite strategy");
    if a.can_stop {
        out.insert(Vec::new());
    }
    if limit > 0 {
        for st in a.steps {
            for mut rest in traces(&st.remainder, &st.result, limit - 1) {
                rest.insert(0, (st.rule.id.as_str().to_string(), pretty(&st.result)));
                out.insert(rest);
            }
        }
    }
    out
}

/// `s <* t` has the same step language as `s <*> (t |> succeed)` for every
/// pair of strategies of depth at most 2 and every start term.
pub fn check_partial_seq_law() -> Result<usize, String> {
    let strategies = enumerate_strategies(2);
    let starts = [Expr::var("A"), Expr::var("B"), Expr::var("C")];
    let mut checked = 0;
    for s in &strategies {
        for t in &strategies {
            let lhs = s.clone().partial_seq(t.clone());
            let rhs = s.clone().seq(t.clone().or_else(Strategy::succeed()));
            for start in &starts {
                if traces(&lhs, start, 6) != traces(&rhs, start, 6) {
                    return Err(format!("law fails for s = {s}, t = {t} from {start}"));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}
