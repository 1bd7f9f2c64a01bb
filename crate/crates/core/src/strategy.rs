//! Strategy combinators over rewrite rules, interpreted as an enumerator of
//! permitted next steps.
//!
//! A strategy is evaluated against a [`Context`] (a term plus a focus). The
//! interpreter computes, for the current term, every rewrite step the
//! strategy permits next together with the strategy that remains after
//! taking it, and whether the strategy may stop without taking any step.
//! Navigation, checks and `succeed` are silent; only rule applications are
//! steps.
//!
//! Left-biased choice `s |> t` commits to `s` when `s` can make progress
//! (take a step); otherwise `t` is used. `repeat s` applies `s` while it can
//! make progress. Recursion uses an explicit binder ([`Strategy::fix`]) so a
//! remaining strategy is an ordinary value that can be resumed.

use std::collections::HashSet;
use std::fmt;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use crate::expr::{is_constructor_name, Expr, Path};
use crate::rules::{Rule, RuleId};

/// Default bound on the number of rewrite steps in one run.
pub const DEFAULT_STEP_BUDGET: usize = 10_000;

/// Bound on recursion unfoldings while computing one set of next steps.
const UNFOLD_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("step budget of {0} steps exhausted")]
    BudgetExceeded(usize),
    #[error("strategy recursion re-enters itself at {0} without taking a step")]
    Unguarded(Path),
    #[error("more than {0} recursion unfoldings while looking for the next step")]
    UnfoldLimit(usize),
    #[error("unbound strategy variable x{0}")]
    UnboundVariable(u32),
}

/// Term plus focus.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Context {
    pub term: Expr,
    pub focus: Path,
}

impl Context {
    pub fn new(term: Expr) -> Context {
        Context { term, focus: Path::root() }
    }

    pub fn focused(term: Expr, focus: Path) -> Option<Context> {
        term.at(&focus)?;
        Some(Context { term, focus })
    }

    pub fn current(&self) -> &Expr {
        self.term.at(&self.focus).expect("focus addresses an existing node")
    }
}

/// Predicates usable with [`Strategy::check`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Predicate {
    IsApp,
    /// A constructor name such as `:`, `[]` or `Just`.
    IsConstructor,
    IsFun { name: String, arity: usize },
    Equals(Expr),
}

impl Predicate {
    pub fn is_fun(name: impl Into<String>, arity: usize) -> Predicate {
        Predicate::IsFun { name: name.into(), arity }
    }

    pub fn holds(&self, e: &Expr) -> bool {
        match self {
            Predicate::IsApp => e.is_app(),
            Predicate::IsConstructor => matches!(e, Expr::Var(c) if is_constructor_name(c)),
            Predicate::IsFun { name, arity } => e.is_fun(name, *arity),
            Predicate::Equals(x) => e == x,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::IsApp => f.write_str("isApp"),
            Predicate::IsConstructor => f.write_str("isConstructor"),
            Predicate::IsFun { name, arity } => write!(f, "isFun {name:?} {arity}"),
            Predicate::Equals(e) => write!(f, "(== {e})"),
        }
    }
}

#[derive(Debug)]
pub enum Node {
    Succeed,
    Fail,
    Rule(Arc<Rule>),
    Check(Predicate),
    Seq(Strategy, Strategy),
    /// `s <* t`: `s`, then `t` if `t` can make progress.
    PartialSeq(Strategy, Strategy),
    Choice(Strategy, Strategy),
    OrElse(Strategy, Strategy),
    Repeat(Strategy),
    Child(usize, Strategy),
    Label(String, Strategy),
    Fix(u32, Strategy),
    Var(u32),
}

#[derive(Clone, Debug)]
pub struct Strategy(Arc<Node>);

static NEXT_VAR: AtomicU32 = AtomicU32::new(0);

impl Strategy {
    fn node(n: Node) -> Strategy {
        Strategy(Arc::new(n))
    }

    pub fn kind(&self) -> &Node {
        &self.0
    }

    pub fn succeed() -> Strategy {
        Strategy::node(Node::Succeed)
    }

    pub fn fail() -> Strategy {
        Strategy::node(Node::Fail)
    }

    /// Lifts a rule to the focus of a context.
    pub fn rule(rule: Arc<Rule>) -> Strategy {
        Strategy::node(Node::Rule(rule))
    }

    pub fn check(p: Predicate) -> Strategy {
        Strategy::node(Node::Check(p))
    }

    pub fn seq(self, next: Strategy) -> Strategy {
        match (self.kind(), next.kind()) {
            (Node::Succeed, _) => next,
            (_, Node::Succeed) => self,
            _ => Strategy::node(Node::Seq(self, next)),
        }
    }

    pub fn partial_seq(self, next: Strategy) -> Strategy {
        Strategy::node(Node::PartialSeq(self, next))
    }

    pub fn choice(self, other: Strategy) -> Strategy {
        Strategy::node(Node::Choice(self, other))
    }

    pub fn or_else(self, other: Strategy) -> Strategy {
        Strategy::node(Node::OrElse(self, other))
    }

    pub fn repeat(self) -> Strategy {
        Strategy::node(Node::Repeat(self))
    }

    pub fn child(index: usize, s: Strategy) -> Strategy {
        Strategy::node(Node::Child(index, s))
    }

    pub fn label(label: impl Into<String>, s: Strategy) -> Strategy {
        Strategy::node(Node::Label(label.into(), s))
    }

    /// Recursive strategy; `body` receives the recursion variable.
    pub fn fix(body: impl FnOnce(Strategy) -> Strategy) -> Strategy {
        let id = NEXT_VAR.fetch_add(1, Ordering::Relaxed);
        let var = Strategy::node(Node::Var(id));
        Strategy::node(Node::Fix(id, body(var)))
    }

    pub fn sequence(items: impl IntoIterator<Item = Strategy>) -> Strategy {
        let items: Vec<Strategy> = items.into_iter().collect();
        items.into_iter().rev().fold(Strategy::succeed(), |acc, s| s.seq(acc))
    }

    /// Like [`Strategy::sequence`] with partial sequencing between the items.
    pub fn partial_sequence(items: impl IntoIterator<Item = Strategy>) -> Strategy {
        let mut items: Vec<Strategy> = items.into_iter().collect();
        match items.pop() {
            None => Strategy::succeed(),
            Some(last) => items.into_iter().rev().fold(last, |acc, s| s.partial_seq(acc)),
        }
    }

    pub fn alternatives(items: impl IntoIterator<Item = Strategy>) -> Strategy {
        let items: Vec<Strategy> = items.into_iter().collect();
        let mut it = items.into_iter().rev();
        match it.next() {
            None => Strategy::fail(),
            Some(last) => it.fold(last, |acc, s| s.choice(acc)),
        }
    }

    pub fn strip_labels(&self) -> Strategy {
        self.map_children(&|s| s.strip_labels(), true)
    }

    /// Rebuilds the node with `f` applied to each child strategy.
    fn map_children(&self, f: &dyn Fn(&Strategy) -> Strategy, drop_labels: bool) -> Strategy {
        match self.kind() {
            Node::Succeed | Node::Fail | Node::Rule(_) | Node::Check(_) | Node::Var(_) => self.clone(),
            Node::Seq(a, b) => Strategy::node(Node::Seq(f(a), f(b))),
            Node::PartialSeq(a, b) => Strategy::node(Node::PartialSeq(f(a), f(b))),
            Node::Choice(a, b) => Strategy::node(Node::Choice(f(a), f(b))),
            Node::OrElse(a, b) => Strategy::node(Node::OrElse(f(a), f(b))),
            Node::Repeat(a) => Strategy::node(Node::Repeat(f(a))),
            Node::Child(i, a) => Strategy::node(Node::Child(*i, f(a))),
            Node::Label(l, a) => {
                if drop_labels {
                    f(a)
                } else {
                    Strategy::node(Node::Label(l.clone(), f(a)))
                }
            }
            Node::Fix(x, a) => Strategy::node(Node::Fix(*x, f(a))),
        }
    }

    /// Replaces free occurrences of variable `var` by `with`.
    fn subst(&self, var: u32, with: &Strategy) -> Strategy {
        match self.kind() {
            Node::Var(x) if *x == var => with.clone(),
            Node::Fix(x, _) if *x == var => self.clone(),
            _ if !self.mentions(var) => self.clone(),
            _ => self.map_children(&|s| s.subst(var, with), false),
        }
    }

    fn mentions(&self, var: u32) -> bool {
        match self.kind() {
            Node::Var(x) => *x == var,
            Node::Succeed | Node::Fail | Node::Rule(_) | Node::Check(_) => false,
            Node::Seq(a, b) | Node::PartialSeq(a, b) | Node::Choice(a, b) | Node::OrElse(a, b) => {
                a.mentions(var) || b.mentions(var)
            }
            Node::Repeat(a) | Node::Child(_, a) | Node::Label(_, a) | Node::Fix(_, a) => a.mentions(var),
        }
    }

    /// Depth of the combinator tree.
    pub fn depth(&self) -> usize {
        match self.kind() {
            Node::Succeed | Node::Fail | Node::Rule(_) | Node::Check(_) | Node::Var(_) => 1,
            Node::Seq(a, b) | Node::PartialSeq(a, b) | Node::Choice(a, b) | Node::OrElse(a, b) => {
                1 + a.depth().max(b.depth())
            }
            Node::Repeat(a) | Node::Child(_, a) | Node::Label(_, a) | Node::Fix(_, a) => 1 + a.depth(),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Node::Succeed => f.write_str("succeed"),
            Node::Fail => f.write_str("fail"),
            Node::Rule(r) => write!(f, "{}", r.id),
            Node::Check(p) => write!(f, "check({p})"),
            Node::Seq(a, b) => write!(f, "({a} <*> {b})"),
            Node::PartialSeq(a, b) => write!(f, "({a} <* {b})"),
            Node::Choice(a, b) => write!(f, "({a} <|> {b})"),
            Node::OrElse(a, b) => write!(f, "({a} |> {b})"),
            Node::Repeat(a) => write!(f, "repeat({a})"),
            Node::Child(i, a) => write!(f, "child {i} ({a})"),
            Node::Label(l, a) => write!(f, "label {l:?} ({a})"),
            Node::Fix(x, a) => write!(f, "fix x{x}. {a}"),
            Node::Var(x) => write!(f, "x{x}"),
        }
    }
}

/// `arg i n s`: apply `s` to the i-th (1-based) of `n` arguments.
///
/// Panics when `i` is outside `1..=n`.
pub fn arg(i: usize, n: usize, s: Strategy) -> Strategy {
    assert!(i >= 1 && i <= n, "arg {i} {n}: argument index out of range");
    if i == n {
        Strategy::child(1, s)
    } else {
        Strategy::child(0, arg(i, n - 1, s))
    }
}

/// Applies the strategies in sequence to the arguments of an application.
pub fn args(items: Vec<Strategy>) -> Strategy {
    let n = items.len();
    Strategy::sequence(items.into_iter().enumerate().map(|(i, s)| arg(i + 1, n, s)))
}

/// [`args`] with partial sequencing.
pub fn partial_args(items: Vec<Strategy>) -> Strategy {
    let n = items.len();
    Strategy::partial_sequence(items.into_iter().enumerate().map(|(i, s)| arg(i + 1, n, s)))
}

/// Applies `s` along the left spine of an application, bottom-up.
pub fn spinebu(s: Strategy) -> Strategy {
    Strategy::fix(|x| {
        Strategy::check(Predicate::IsApp)
            .seq(Strategy::child(0, x))
            .or_else(s)
    })
}

/// Applies `s` once at the left-most outermost position where it makes progress.
pub fn once_top_down(s: Strategy) -> Strategy {
    Strategy::fix(|x| s.or_else(Strategy::child(0, x.clone()).or_else(Strategy::child(1, x))))
}

/// Applies `s` once at the left-most innermost position where it makes progress.
pub fn once_bottom_up(s: Strategy) -> Strategy {
    Strategy::fix(|x| (Strategy::child(0, x.clone()).or_else(Strategy::child(1, x))).or_else(s))
}

/// Repeatedly applies `s` at the left-most outermost position, re-scanning
/// from the root after every step.
pub fn outermost(s: Strategy) -> Strategy {
    once_top_down(s).repeat()
}

/// Repeatedly applies `s` at the left-most innermost position.
pub fn innermost(s: Strategy) -> Strategy {
    once_bottom_up(s).repeat()
}

/// Left-most innermost that does not enter lambda bodies.
pub fn weak_innermost(s: Strategy) -> Strategy {
    Strategy::fix(|x| {
        Strategy::check(Predicate::IsApp)
            .seq(Strategy::child(0, x.clone()).or_else(Strategy::child(1, x)))
            .or_else(s)
    })
    .repeat()
}

/// One permitted next rewrite step.
#[derive(Clone, Debug)]
pub struct StepChoice {
    pub rule: Arc<Rule>,
    pub focus: Path,
    pub result: Expr,
    pub remainder: Strategy,
}

impl StepChoice {
    pub fn rule_id(&self) -> &RuleId {
        &self.rule.id
    }
}

struct Outcome {
    steps: Vec<StepChoice>,
    nullable: bool,
}

impl Outcome {
    fn fail() -> Outcome {
        Outcome { steps: Vec::new(), nullable: false }
    }

    fn done() -> Outcome {
        Outcome { steps: Vec::new(), nullable: true }
    }

    fn map(mut self, f: impl Fn(Strategy) -> Strategy) -> Outcome {
        for st in &mut self.steps {
            st.remainder = f(st.remainder.clone());
        }
        self
    }
}

struct Interp<'a> {
    root: &'a Expr,
    unfoldings: usize,
    active: Vec<(u32, usize)>,
}

impl Interp<'_> {
    fn run(&mut self, s: &Strategy, path: &mut Vec<u8>, here: &Expr) -> Result<Outcome, StrategyError> {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.run_node(s, path, here))
    }

    fn run_node(&mut self, s: &Strategy, path: &mut Vec<u8>, here: &Expr) -> Result<Outcome, StrategyError> {
        Ok(match s.kind() {
            Node::Succeed => Outcome::done(),
            Node::Fail => Outcome::fail(),
            Node::Check(p) => Outcome { steps: Vec::new(), nullable: p.holds(here) },
            Node::Rule(r) => match r.apply(here) {
                Some(new) => {
                    let result = self.root.replace_at(path, new).expect("path is valid");
                    Outcome {
                        steps: vec![StepChoice {
                            rule: r.clone(),
                            focus: Path(path.clone()),
                            result,
                            remainder: Strategy::succeed(),
                        }],
                        nullable: false,
                    }
                }
                None => Outcome::fail(),
            },
            Node::Seq(a, b) => {
                let oa = self.run(a, path, here)?.map(|r| r.seq(b.clone()));
                if oa.nullable {
                    let ob = self.run(b, path, here)?;
                    Outcome { steps: concat(oa.steps, ob.steps), nullable: ob.nullable }
                } else {
                    oa
                }
            }
            Node::PartialSeq(a, b) => {
                let oa = self.run(a, path, here)?.map(|r| r.partial_seq(b.clone()));
                if oa.nullable {
                    let ob = self.run(b, path, here)?;
                    if ob.steps.is_empty() {
                        Outcome { steps: oa.steps, nullable: true }
                    } else {
                        Outcome { steps: concat(oa.steps, ob.steps), nullable: ob.nullable }
                    }
                } else {
                    oa
                }
            }
            Node::Choice(a, b) => {
                let oa = self.run(a, path, here)?;
                let ob = self.run(b, path, here)?;
                Outcome { steps: concat(oa.steps, ob.steps), nullable: oa.nullable || ob.nullable }
            }
            Node::OrElse(a, b) => {
                let oa = self.run(a, path, here)?;
                if !oa.steps.is_empty() {
                    oa
                } else {
                    let ob = self.run(b, path, here)?;
                    Outcome { steps: ob.steps, nullable: oa.nullable || ob.nullable }
                }
            }
            Node::Repeat(a) => {
                let oa = self.run(a, path, here)?;
                let nullable = oa.steps.is_empty();
                let again = s.clone();
                Outcome { nullable, ..oa.map(|r| r.seq(again.clone())) }
            }
            Node::Child(i, a) => match here.child(*i) {
                None => Outcome::fail(),
                Some(sub) => {
                    path.push(*i as u8);
                    let out = self.run(a, path, sub);
                    path.pop();
                    out?.map(|r| Strategy::child(*i, r))
                }
            },
            Node::Label(l, a) => self.run(a, path, here)?.map(|r| Strategy::label(l.clone(), r)),
            Node::Fix(x, body) => {
                self.unfoldings += 1;
                if self.unfoldings > UNFOLD_LIMIT {
                    return Err(StrategyError::UnfoldLimit(UNFOLD_LIMIT));
                }
                // Paths only grow, so an active entry at the same depth is at the same node.
                if self.active.contains(&(*x, path.len())) {
                    return Err(StrategyError::Unguarded(Path(path.clone())));
                }
                let unfolded = body.subst(*x, s);
                self.active.push((*x, path.len()));
                let out = self.run(&unfolded, path, here);
                self.active.pop();
                out?
            }
            Node::Var(x) => return Err(StrategyError::UnboundVariable(*x)),
        })
    }
}

fn concat(mut a: Vec<StepChoice>, b: Vec<StepChoice>) -> Vec<StepChoice> {
    a.extend(b);
    a
}

fn dedup(steps: Vec<StepChoice>) -> Vec<StepChoice> {
    let mut seen: HashSet<(RuleId, Path, Expr)> = HashSet::new();
    steps
        .into_iter()
        .filter(|st| seen.insert((st.rule.id.clone(), st.focus.clone(), st.result.clone())))
        .collect()
}

/// Next-step analysis of a strategy at a context.
pub struct Analysis {
    /// Permitted next steps, duplicate-free, in enumeration order.
    pub steps: Vec<StepChoice>,
    /// Whether the strategy may finish here without another step.
    pub can_stop: bool,
}

pub fn analyse(s: &Strategy, c: &Context) -> Result<Analysis, StrategyError> {
    let mut interp = Interp { root: &c.term, unfoldings: 0, active: Vec::new() };
    let mut path = c.focus.0.clone();
    let out = interp.run(s, &mut path, c.current())?;
    Ok(Analysis { steps: dedup(out.steps), can_stop: out.nullable })
}

/// All single rewrite steps `s` permits next from `c`.
pub fn firsts(s: &Strategy, c: &Context) -> Result<Vec<StepChoice>, StrategyError> {
    Ok(analyse(s, c)?.steps)
}

/// All terminal terms reachable by running `s` to completion from `c`,
/// depth-first in enumeration order, without duplicates.
pub fn apply_all(s: &Strategy, c: &Context, budget: usize) -> Result<Vec<Context>, StrategyError> {
    let mut results: Vec<Context> = Vec::new();
    let mut expanded = 0usize;
    let mut stack: Vec<(Expr, Strategy)> = vec![(c.term.clone(), s.clone())];
    while let Some((term, strat)) = stack.pop() {
        let ctx = Context { term, focus: c.focus.clone() };
        let a = analyse(&strat, &ctx)?;
        if a.can_stop && !results.iter().any(|r| r.term == ctx.term) {
            results.push(ctx.clone());
        }
        for st in a.steps.into_iter().rev() {
            expanded += 1;
            if expanded > budget {
                return Err(StrategyError::BudgetExceeded(budget));
            }
            stack.push((st.result, st.remainder));
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::rules::{add_rule, builtin_rules, sum_rule};

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn builtin_alternatives() -> Strategy {
        Strategy::alternatives(builtin_rules().into_iter().map(Strategy::rule))
    }

    #[test]
    fn outermost_first_step_on_running_example() {
        let s = outermost(builtin_alternatives());
        let steps = firsts(&s, &Context::new(e("sum ([3,7] ++ [5])"))).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].rule_id().as_str(), "eval.sum.rule");
        assert_eq!(steps[0].focus, Path(vec![0]));
    }

    #[test]
    fn normal_form_has_no_steps() {
        let s = outermost(builtin_alternatives());
        assert!(firsts(&s, &Context::new(Expr::lit(15))).unwrap().is_empty());
    }

    #[test]
    fn left_biased_choice_falls_through() {
        let s = Strategy::rule(Arc::new(add_rule())).or_else(Strategy::rule(Arc::new(sum_rule())));
        let steps = firsts(&s, &Context::new(Expr::var("sum"))).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].rule_id().as_str(), "eval.sum.rule");
    }

    #[test]
    fn child_of_leaf_fails() {
        let s = Strategy::child(0, builtin_alternatives());
        let a = analyse(&s, &Context::new(Expr::lit(1))).unwrap();
        assert!(a.steps.is_empty());
        assert!(!a.can_stop);
    }

    #[test]
    fn outermost_prefers_left_redex() {
        let s = outermost(builtin_alternatives());
        let steps = firsts(&s, &Context::new(e("(0 + 3) + (4 + 5)"))).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].focus, Path(vec![0, 1]));
        assert_eq!(steps[0].result, e("3 + (4 + 5)"));
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn arg_beyond_arity_is_rejected() {
        arg(4, 3, Strategy::succeed());
    }

    #[test]
    fn arg_navigates_the_spine() {
        let s = arg(3, 3, builtin_alternatives());
        let steps = firsts(&s, &Context::new(e("foldl (+) 0 ([3,7] ++ [5])"))).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].focus, Path(vec![1]));
        assert_eq!(steps[0].result, e("foldl (+) 0 (3 : ([7] ++ [5]))"));
    }

    #[test]
    fn remainder_resumes_inside_the_child() {
        let add = Strategy::rule(Arc::new(add_rule()));
        let s = Strategy::child(1, add.clone().seq(add));
        let c = Context::new(e("f (1 + 2)"));
        let steps = firsts(&s, &c).unwrap();
        assert_eq!(steps.len(), 1);
        let next = Context::new(steps[0].result.clone());
        let a = analyse(&steps[0].remainder, &next).unwrap();
        assert!(a.steps.is_empty());
        assert!(!a.can_stop, "the second addition cannot apply to a literal");
    }

    #[test]
    fn unguarded_recursion_is_reported() {
        let s = Strategy::fix(|x| x.seq(Strategy::succeed()).or_else(Strategy::succeed()));
        let err = firsts(&s, &Context::new(Expr::lit(0))).unwrap_err();
        assert!(matches!(err, StrategyError::Unguarded(_)));
    }

    #[test]
    fn apply_all_budget() {
        let loop_rule = Arc::new(crate::rules::Rule::intensional(
            RuleId::new("eval.loop.rule"),
            "definition loop",
            vec![crate::rules::Alternative::new(&[], Expr::var("loop"), Expr::var("loop"))],
        ));
        let s = outermost(Strategy::rule(loop_rule));
        let err = apply_all(&s, &Context::new(Expr::var("loop")), 100).unwrap_err();
        assert_eq!(err, StrategyError::BudgetExceeded(100));
    }
}
