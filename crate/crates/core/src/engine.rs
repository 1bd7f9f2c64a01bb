//! Evaluation strategies assembled from rules and a prelude, derivations,
//! hints and diagnosis of student steps.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::expr::{is_constructor_name, parse, Expr, ParseError, Path};
use crate::prelude::{gen_eval_strategy, gen_rule, parse_prelude, PreludeError, PreludeFile};
use crate::rules::{
    add_rule, append_rule, beta_reduction, foldl_rule, mul_rule, sub_rule, sum_rule, Primitive, Rule,
};
use crate::strategy::{
    analyse, arg, firsts, spinebu, weak_innermost, Context, Predicate, StepChoice, Strategy, StrategyError,
    DEFAULT_STEP_BUDGET,
};

/// The prelude loaded when no other is given.
pub const DEFAULT_PRELUDE: &str = include_str!("../data/prelude.hs");

/// Textbook definitions of `sum`, `foldl` and `++` (plus `id` and `double`).
pub const STANDARD_PRELUDE: &str = include_str!("../data/standard.hs");

/// Search depth when deciding whether a submission is reachable at all.
const REACHABILITY_DEPTH: usize = 3;
const REACHABILITY_STATES: usize = 5_000;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum StrategyChoice {
    Innermost,
    Outermost,
}

/// How student steps are judged: against one strategy, or `Free` for any
/// rule applied anywhere.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Mode {
    Innermost,
    Outermost,
    Free,
}

impl Mode {
    /// The strategy used for derivations, hints and step counts.
    pub fn strategy(self) -> StrategyChoice {
        match self {
            Mode::Innermost => StrategyChoice::Innermost,
            Mode::Outermost | Mode::Free => StrategyChoice::Outermost,
        }
    }
}

impl From<StrategyChoice> for Mode {
    fn from(c: StrategyChoice) -> Mode {
        match c {
            StrategyChoice::Innermost => Mode::Innermost,
            StrategyChoice::Outermost => Mode::Outermost,
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        match s.to_ascii_lowercase().as_str() {
            "innermost" => Ok(Mode::Innermost),
            "outermost" => Ok(Mode::Outermost),
            "free" => Ok(Mode::Free),
            other => Err(format!("unknown strategy `{other}` (expected innermost, outermost or free)")),
        }
    }
}

impl FromStr for StrategyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<StrategyChoice, String> {
        match s.parse::<Mode>()? {
            Mode::Free => Err("`free` is a practice mode, not an evaluation strategy".to_string()),
            m => Ok(m.strategy()),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Innermost => "innermost",
            Mode::Outermost => "outermost",
            Mode::Free => "free",
        })
    }
}

impl fmt::Display for StrategyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Mode::from(*self).fmt(f)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DerivationStep {
    pub rule: Arc<Rule>,
    pub focus: Path,
    pub before: Expr,
    pub after: Expr,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Derivation {
    pub start: Expr,
    pub steps: Vec<DerivationStep>,
}

impl Derivation {
    pub fn result(&self) -> &Expr {
        self.steps.last().map_or(&self.start, |s| &s.after)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The start term followed by every intermediate term.
    pub fn terms(&self) -> impl Iterator<Item = &Expr> {
        std::iter::once(&self.start).chain(self.steps.iter().map(|s| &s.after))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Prelude(#[from] PreludeError),
    #[error("evaluation did not finish within {budget} steps")]
    BudgetExceeded { budget: usize, partial: Box<Derivation> },
    #[error("evaluation is stuck at `{}`: no rule applies but it is not a value", partial.result())]
    Stuck { partial: Box<Derivation> },
    #[error("`{0}` is fully evaluated; there is no next step")]
    NoStep(Expr),
    #[error(transparent)]
    Strategy(StrategyError),
}

impl EngineError {
    pub fn kind(&self) -> &'static str {
        match self {
            EngineError::Parse(_) => "parse",
            EngineError::Prelude(_) => "prelude",
            EngineError::BudgetExceeded { .. } => "budget",
            EngineError::Stuck { .. } => "stuck",
            EngineError::NoStep(_) => "nostep",
            EngineError::Strategy(_) => "strategy",
        }
    }

    /// The derivation up to the point of failure, if any.
    pub fn partial(&self) -> Option<&Derivation> {
        match self {
            EngineError::BudgetExceeded { partial, .. } | EngineError::Stuck { partial } => Some(partial),
            _ => None,
        }
    }
}

impl From<StrategyError> for EngineError {
    fn from(e: StrategyError) -> EngineError {
        EngineError::Strategy(e)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Diagnosis {
    /// A step permitted by the strategy.
    CorrectStep { rule: Arc<Rule>, remaining: Option<usize> },
    /// Same value, reachable by rewriting, but not a single permitted step.
    EquivalentButOffStrategy { expected: Vec<Expr> },
    /// Same value, but not reachable by rewriting the current term.
    CorrectResultWrongPath { expected: Vec<Expr> },
    Incorrect { expected: Vec<Expr>, note: Option<String> },
    ParseError { message: String },
}

impl Diagnosis {
    pub fn kind(&self) -> &'static str {
        match self {
            Diagnosis::CorrectStep { .. } => "CorrectStep",
            Diagnosis::EquivalentButOffStrategy { .. } => "EquivalentButOffStrategy",
            Diagnosis::CorrectResultWrongPath { .. } => "CorrectResultWrongPath",
            Diagnosis::Incorrect { .. } => "Incorrect",
            Diagnosis::ParseError { .. } => "ParseError",
        }
    }

    pub fn is_correct(&self) -> bool {
        matches!(self, Diagnosis::CorrectStep { .. })
    }

    pub fn expected(&self) -> &[Expr] {
        match self {
            Diagnosis::EquivalentButOffStrategy { expected }
            | Diagnosis::CorrectResultWrongPath { expected }
            | Diagnosis::Incorrect { expected, .. } => expected,
            _ => &[],
        }
    }
}

/// `sum = foldl (+) 0`: no argument needs evaluating.
pub fn sum_strategy(rule: Arc<Rule>) -> Strategy {
    Strategy::check(Predicate::is_fun("sum", 0)).seq(Strategy::rule(rule))
}

/// `foldl` inspects its third argument.
pub fn foldl_strategy(rule: Arc<Rule>, whnf: &Strategy) -> Strategy {
    Strategy::sequence([
        Strategy::check(Predicate::is_fun("foldl", 3)),
        arg(3, 3, whnf.clone()),
        Strategy::rule(rule),
    ])
}

/// `++` inspects its first argument.
pub fn append_strategy(rule: Arc<Rule>, whnf: &Strategy) -> Strategy {
    Strategy::sequence([
        Strategy::check(Predicate::is_fun("++", 2)),
        arg(1, 2, whnf.clone()),
        Strategy::rule(rule),
    ])
}

/// Binary arithmetic evaluates both operands first.
pub fn arithmetic_strategy(rule: Arc<Rule>, op: &str, whnf: &Strategy) -> Strategy {
    Strategy::sequence([
        Strategy::check(Predicate::is_fun(op, 2)),
        arg(1, 2, whnf.clone()),
        arg(2, 2, whnf.clone()),
        Strategy::rule(rule),
    ])
}

/// A definable function: its rule, arity and (recursive) evaluation strategy.
struct Function {
    name: String,
    arity: usize,
    rule: Arc<Rule>,
    make_strategy: Box<dyn Fn(&Strategy) -> Strategy>,
}

pub struct EngineBuilder {
    prelude: String,
    builtins: bool,
    budget: usize,
    primitives: Vec<Primitive>,
}

impl Default for EngineBuilder {
    fn default() -> EngineBuilder {
        EngineBuilder {
            prelude: DEFAULT_PRELUDE.to_string(),
            builtins: true,
            budget: DEFAULT_STEP_BUDGET,
            primitives: vec![Primitive::Add],
        }
    }
}

impl EngineBuilder {
    pub fn prelude(mut self, source: impl Into<String>) -> EngineBuilder {
        self.prelude = source.into();
        self
    }

    /// With `false`, `sum`, `foldl` and `++` exist only if the prelude defines them.
    pub fn builtins(mut self, enabled: bool) -> EngineBuilder {
        self.builtins = enabled;
        self
    }

    pub fn budget(mut self, steps: usize) -> EngineBuilder {
        self.budget = steps.max(1);
        self
    }

    /// Enables `-` or `*` as primitive operators.
    pub fn primitive(mut self, p: Primitive) -> EngineBuilder {
        if p != Primitive::Beta && !self.primitives.contains(&p) {
            self.primitives.push(p);
        }
        self
    }

    pub fn build(self) -> Result<Engine, EngineError> {
        let prelude = parse_prelude(&self.prelude)?;
        let mut warnings = prelude.warnings.clone();
        let mut functions: Vec<Function> = Vec::new();

        if self.builtins {
            let sum = Arc::new(sum_rule());
            let foldl = Arc::new(foldl_rule());
            let append = Arc::new(append_rule());
            let builtin: Vec<Function> = vec![
                Function {
                    name: "sum".into(),
                    arity: 0,
                    rule: sum.clone(),
                    make_strategy: Box::new(move |_| sum_strategy(sum.clone())),
                },
                Function {
                    name: "foldl".into(),
                    arity: 3,
                    rule: foldl.clone(),
                    make_strategy: Box::new(move |w| foldl_strategy(foldl.clone(), w)),
                },
                Function {
                    name: "++".into(),
                    arity: 2,
                    rule: append.clone(),
                    make_strategy: Box::new(move |w| append_strategy(append.clone(), w)),
                },
            ];
            for f in builtin {
                if prelude.group(&f.name).is_some() {
                    warnings.push(format!("prelude definition of `{}` replaces the built-in one", f.name));
                } else {
                    functions.push(f);
                }
            }
        }
        for group in &prelude.groups {
            let rule = Arc::new(gen_rule(group));
            let g = group.clone();
            let r = rule.clone();
            functions.push(Function {
                name: group.name.clone(),
                arity: group.arity(),
                rule,
                make_strategy: Box::new(move |w| gen_eval_strategy(&r, &g, w)),
            });
        }

        let mut primitives: Vec<(Arc<Rule>, &'static str)> = Vec::new();
        for p in [Primitive::Add, Primitive::Sub, Primitive::Mul] {
            if self.primitives.contains(&p) {
                let rule = match p {
                    Primitive::Add => add_rule(),
                    Primitive::Sub => sub_rule(),
                    _ => mul_rule(),
                };
                primitives.push((Arc::new(rule), p.operator().expect("arithmetic primitive")));
            }
        }
        let beta = Arc::new(beta_reduction());

        let mut arities: BTreeMap<String, usize> = functions.iter().map(|f| (f.name.clone(), f.arity)).collect();
        for (_, op) in &primitives {
            arities.insert(op.to_string(), 2);
        }

        for group in &prelude.groups {
            let mut unknown = BTreeSet::new();
            for d in &group.bindings {
                let bound: BTreeSet<&str> = d.pattern_vars().into_iter().collect();
                for v in d.rhs.free_vars() {
                    if !bound.contains(v.as_str()) && !arities.contains_key(&v) && !is_constructor_name(&v) {
                        unknown.insert(v);
                    }
                }
            }
            for v in unknown {
                warnings.push(format!("`{}` uses `{v}`, which is not defined", group.name));
            }
        }

        let whnf = Strategy::fix(|w| {
            let mut alts = vec![Strategy::rule(beta.clone())];
            alts.extend(functions.iter().map(|f| (f.make_strategy)(&w)));
            alts.extend(primitives.iter().map(|(r, op)| arithmetic_strategy(r.clone(), op, &w)));
            spinebu(Strategy::alternatives(alts)).repeat()
        });
        let outermost = Strategy::fix(|n| {
            let constructor_args = Strategy::fix(|a| {
                Strategy::check(Predicate::IsApp)
                    .seq(Strategy::child(0, a))
                    .seq(Strategy::child(1, n))
                    .or_else(Strategy::check(Predicate::IsConstructor))
            });
            whnf.clone().seq(constructor_args.or_else(Strategy::succeed()))
        });

        let mut rules: Vec<Arc<Rule>> = functions.iter().map(|f| f.rule.clone()).collect();
        rules.extend(primitives.iter().map(|(r, _)| r.clone()));
        rules.push(beta);
        let innermost = weak_innermost(Strategy::alternatives(rules.iter().cloned().map(Strategy::rule)));

        Ok(Engine { prelude, rules, arities, whnf, outermost, innermost, budget: self.budget, builtins: self.builtins, warnings })
    }
}

/// Immutable evaluation context; cheap to share between threads via `Arc`.
pub struct Engine {
    prelude: PreludeFile,
    rules: Vec<Arc<Rule>>,
    arities: BTreeMap<String, usize>,
    whnf: Strategy,
    outermost: Strategy,
    innermost: Strategy,
    budget: usize,
    builtins: bool,
    warnings: Vec<String>,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("functions", &self.arities)
            .field("budget", &self.budget)
            .field("builtins", &self.builtins)
            .finish()
    }
}

impl Engine {
    pub fn builder() -> EngineBuilder {
        EngineBuilder::default()
    }

    /// Built-in rules plus the default prelude.
    pub fn new() -> Engine {
        Engine::builder().build().expect("the default prelude is valid")
    }

    pub fn rules(&self) -> &[Arc<Rule>] {
        &self.rules
    }

    pub fn rule(&self, id: &str) -> Option<&Arc<Rule>> {
        self.rules.iter().find(|r| r.id.as_str() == id)
    }

    pub fn prelude(&self) -> &PreludeFile {
        &self.prelude
    }

    /// Known functions and their arities.
    pub fn functions(&self) -> &BTreeMap<String, usize> {
        &self.arities
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn has_builtins(&self) -> bool {
        self.builtins
    }

    pub fn whnf_strategy(&self) -> &Strategy {
        &self.whnf
    }

    pub fn strategy(&self, choice: StrategyChoice) -> &Strategy {
        match choice {
            StrategyChoice::Innermost => &self.innermost,
            StrategyChoice::Outermost => &self.outermost,
        }
    }

    pub fn parse(&self, text: &str) -> Result<Expr, EngineError> {
        Ok(parse(text)?)
    }

    /// Whether `e` is fully evaluated: literals, lambdas, constructors
    /// applied to values, partial applications of known functions to values,
    /// and unknown free variables.
    pub fn is_value(&self, e: &Expr) -> bool {
        match e {
            Expr::Lit(_) | Expr::Abs(..) => true,
            Expr::Var(x) => is_constructor_name(x) || self.arities.get(x).is_none_or(|&n| n > 0),
            Expr::App(..) => {
                let (head, args) = e.spine();
                let Expr::Var(h) = head else { return false };
                let head_ok = is_constructor_name(h) || self.arities.get(h).is_some_and(|&n| args.len() < n);
                head_ok && args.iter().all(|a| self.is_value(a))
            }
        }
    }

    /// Permitted next steps of `e` under `mode`.
    pub fn next_steps(&self, e: &Expr, mode: Mode) -> Result<Vec<StepChoice>, EngineError> {
        let ctx = Context::new(e.clone());
        let steps = match mode {
            Mode::Innermost => firsts(&self.innermost, &ctx)?,
            Mode::Outermost => firsts(&self.outermost, &ctx)?,
            Mode::Free => {
                let mut all = firsts(&self.outermost, &ctx)?;
                all.extend(firsts(&self.innermost, &ctx)?);
                all.extend(self.any_position_steps(e));
                let mut seen = HashSet::new();
                all.retain(|s| seen.insert((s.rule.id.clone(), s.focus.clone(), s.result.clone())));
                all
            }
        };
        Ok(steps)
    }

    /// Every rule applied at every position, in pre-order.
    pub fn any_position_steps(&self, e: &Expr) -> Vec<StepChoice> {
        let mut out = Vec::new();
        for path in e.paths() {
            let sub = e.at(&path).expect("path from paths()");
            for rule in &self.rules {
                if let Some(new) = rule.apply(sub) {
                    let result = e.replace_at(path.as_slice(), new).expect("valid path");
                    out.push(StepChoice { rule: rule.clone(), focus: path.clone(), result, remainder: Strategy::succeed() });
                }
            }
        }
        out
    }

    /// The next step of the strategy.
    pub fn hint(&self, e: &Expr, choice: StrategyChoice) -> Result<StepChoice, EngineError> {
        firsts(self.strategy(choice), &Context::new(e.clone()))?
            .into_iter()
            .next()
            .ok_or_else(|| EngineError::NoStep(e.clone()))
    }

    /// The maximal derivation of `e`, restarting the strategy from the root
    /// after every step.
    pub fn derive(&self, e: &Expr, choice: StrategyChoice) -> Result<Derivation, EngineError> {
        let strategy = self.strategy(choice);
        let mut d = Derivation { start: e.clone(), steps: Vec::new() };
        loop {
            let current = d.result().clone();
            let a = analyse(strategy, &Context::new(current.clone()))?;
            let Some(step) = a.steps.into_iter().next() else { break };
            if d.steps.len() == self.budget {
                return Err(EngineError::BudgetExceeded { budget: self.budget, partial: Box::new(d) });
            }
            d.steps.push(DerivationStep { rule: step.rule, focus: step.focus, before: current, after: step.result });
        }
        if !self.is_value(d.result()) {
            return Err(EngineError::Stuck { partial: Box::new(d) });
        }
        Ok(d)
    }

    pub fn derive_text(&self, text: &str, choice: StrategyChoice) -> Result<Derivation, EngineError> {
        self.derive(&self.parse(text)?, choice)
    }

    pub fn steps_remaining(&self, e: &Expr, choice: StrategyChoice) -> Result<usize, EngineError> {
        Ok(self.derive(e, choice)?.len())
    }

    /// The end of the outermost derivation, used to compare values. Stuck
    /// terms compare syntactically.
    pub fn normalize(&self, e: &Expr) -> Result<Expr, EngineError> {
        match self.derive(e, StrategyChoice::Outermost) {
            Ok(d) => Ok(d.result().clone()),
            Err(EngineError::Stuck { partial }) => Ok(partial.result().clone()),
            Err(other) => Err(other),
        }
    }

    /// Whether `target` can be obtained from `from` by rewriting: it occurs in
    /// either strategy's derivation or within a few steps of arbitrary rule
    /// applications.
    pub fn reachable(&self, from: &Expr, target: &Expr) -> bool {
        for choice in [StrategyChoice::Outermost, StrategyChoice::Innermost] {
            let d = match self.derive(from, choice) {
                Ok(d) => d,
                Err(e) => match e.partial() {
                    Some(p) => p.clone(),
                    None => continue,
                },
            };
            if d.terms().any(|t| t == target) {
                return true;
            }
        }
        let mut seen: HashSet<Expr> = HashSet::from([from.clone()]);
        let mut queue: VecDeque<(Expr, usize)> = VecDeque::from([(from.clone(), 0)]);
        while let Some((e, depth)) = queue.pop_front() {
            if depth == REACHABILITY_DEPTH {
                continue;
            }
            for step in self.any_position_steps(&e) {
                if &step.result == target {
                    return true;
                }
                if seen.len() < REACHABILITY_STATES && seen.insert(step.result.clone()) {
                    queue.push_back((step.result, depth + 1));
                }
            }
        }
        false
    }

    pub fn diagnose(&self, current: &Expr, submitted: &Expr, mode: Mode) -> Result<Diagnosis, EngineError> {
        let permitted = self.next_steps(current, mode)?;
        let expected: Vec<Expr> = permitted.iter().map(|s| s.result.clone()).collect();
        if submitted == current {
            return Ok(Diagnosis::Incorrect { expected, note: Some("no step was taken".to_string()) });
        }
        if let Some(step) = permitted.iter().find(|s| &s.result == submitted) {
            let remaining = self.steps_remaining(submitted, mode.strategy()).ok();
            return Ok(Diagnosis::CorrectStep { rule: step.rule.clone(), remaining });
        }
        let budget_note = |what: &str| Diagnosis::Incorrect {
            expected: expected.clone(),
            note: Some(format!("{what} does not finish evaluating within {} steps", self.budget)),
        };
        let submitted_value = match self.normalize(submitted) {
            Ok(v) => v,
            Err(EngineError::BudgetExceeded { .. }) => return Ok(budget_note("the submitted expression")),
            Err(e) => return Err(e),
        };
        let current_value = match self.normalize(current) {
            Ok(v) => v,
            Err(EngineError::BudgetExceeded { .. }) => return Ok(budget_note("the current expression")),
            Err(e) => return Err(e),
        };
        if submitted_value == current_value {
            if self.reachable(current, submitted) {
                Ok(Diagnosis::EquivalentButOffStrategy { expected })
            } else {
                Ok(Diagnosis::CorrectResultWrongPath { expected })
            }
        } else {
            Ok(Diagnosis::Incorrect { expected, note: None })
        }
    }

    /// Like [`Engine::diagnose`], reporting an unparsable submission as a diagnosis.
    pub fn diagnose_text(&self, current: &str, submitted: &str, mode: Mode) -> Result<Diagnosis, EngineError> {
        let current = self.parse(current)?;
        match parse(submitted) {
            Ok(s) => self.diagnose(&current, &s, mode),
            Err(e) => Ok(Diagnosis::ParseError { message: e.to_string() }),
        }
    }
}

impl Default for Engine {
    fn default() -> Engine {
        Engine::new()
    }
}
