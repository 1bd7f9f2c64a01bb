//! Rewrite rules: intensional `lhs ~> rhs` rules with meta-variables, and
//! primitive rules backed by a native transformation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::expr::{substitute, substitute_many, Expr};

/// Dotted rule identifier such as `eval.sum.rule`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct RuleId(String);

impl RuleId {
    pub fn new(id: impl Into<String>) -> RuleId {
        let id = id.into();
        assert!(!id.is_empty(), "rule identifiers must be non-empty");
        RuleId(id)
    }

    /// The identifier used for the definition of `function`.
    pub fn for_function(function: &str) -> RuleId {
        let stem = match function {
            "++" => "append".to_string(),
            "+" => "add".to_string(),
            "-" => "sub".to_string(),
            "*" => "mul".to_string(),
            other => other.to_string(),
        };
        RuleId(format!("eval.{stem}.rule"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One `lhs ~> rhs` case of an intensional rule.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Alternative {
    pub meta_vars: Vec<String>,
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Alternative {
    pub fn new(meta_vars: &[&str], lhs: Expr, rhs: Expr) -> Alternative {
        let alt = Alternative {
            meta_vars: meta_vars.iter().map(|s| s.to_string()).collect(),
            lhs,
            rhs,
        };
        debug_assert!(alt.rhs_vars_bound());
        alt
    }

    /// Every meta-variable used on the right also occurs on the left.
    pub fn rhs_vars_bound(&self) -> bool {
        let lhs = self.lhs.free_vars();
        let rhs = self.rhs.free_vars();
        self.meta_vars
            .iter()
            .filter(|m| rhs.contains(*m))
            .all(|m| lhs.contains(m))
    }

    pub fn matches(&self, e: &Expr) -> Option<Bindings> {
        let mut b = Bindings::new();
        match_into(&self.lhs, e, &self.meta_vars, &mut b).then_some(b)
    }

    pub fn instantiate(&self, bindings: &Bindings) -> Expr {
        substitute_many(bindings, &self.rhs)
    }
}

pub type Bindings = BTreeMap<String, Expr>;

fn match_into(pattern: &Expr, e: &Expr, metas: &[String], b: &mut Bindings) -> bool {
    match pattern {
        Expr::Var(v) if metas.contains(v) => match b.get(v) {
            Some(bound) => bound == e,
            None => {
                b.insert(v.clone(), e.clone());
                true
            }
        },
        Expr::Var(v) => matches!(e, Expr::Var(w) if v == w),
        Expr::Lit(n) => matches!(e, Expr::Lit(m) if n == m),
        Expr::App(pf, pa) => match e {
            Expr::App(f, a) => match_into(pf, f, metas, b) && match_into(pa, a, metas, b),
            _ => false,
        },
        Expr::Abs(..) => pattern == e,
    }
}

/// Natively implemented transformations.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Beta,
}

impl Primitive {
    pub fn operator(self) -> Option<&'static str> {
        match self {
            Primitive::Add => Some("+"),
            Primitive::Sub => Some("-"),
            Primitive::Mul => Some("*"),
            Primitive::Beta => None,
        }
    }

    pub fn apply(self, e: &Expr) -> Option<Expr> {
        match self {
            Primitive::Beta => match e {
                Expr::App(f, arg) => match f.as_ref() {
                    Expr::Abs(x, body) => Some(substitute(x, arg, body)),
                    _ => None,
                },
                _ => None,
            },
            arith => {
                let op = arith.operator()?;
                let (head, args) = e.spine();
                match (head, args.as_slice()) {
                    (Expr::Var(h), [Expr::Lit(x), Expr::Lit(y)]) if h == op => {
                        let v = match arith {
                            Primitive::Add => x.checked_add(*y),
                            Primitive::Sub => x.checked_sub(*y),
                            Primitive::Mul => x.checked_mul(*y),
                            Primitive::Beta => unreachable!(),
                        }?;
                        Some(Expr::lit(v))
                    }
                    _ => None,
                }
            }
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum RuleBody {
    /// Alternatives are tried in order; the first match wins.
    Intensional(Vec<Alternative>),
    Primitive(Primitive),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rule {
    pub id: RuleId,
    pub description: Option<String>,
    /// Derivation annotation, e.g. `definition foldl` or `applying +`.
    pub annotation: String,
    pub body: RuleBody,
}

impl Rule {
    pub fn intensional(id: RuleId, annotation: impl Into<String>, alternatives: Vec<Alternative>) -> Rule {
        Rule { id, description: None, annotation: annotation.into(), body: RuleBody::Intensional(alternatives) }
    }

    pub fn primitive(id: RuleId, annotation: impl Into<String>, primitive: Primitive) -> Rule {
        Rule { id, description: None, annotation: annotation.into(), body: RuleBody::Primitive(primitive) }
    }

    pub fn describe(mut self, description: impl Into<String>) -> Rule {
        self.description = Some(description.into());
        self
    }

    /// First-order match of the first applicable alternative.
    pub fn match_rule(&self, e: &Expr) -> Option<(usize, Bindings)> {
        match &self.body {
            RuleBody::Intensional(alts) => alts
                .iter()
                .enumerate()
                .find_map(|(i, alt)| alt.matches(e).map(|b| (i, b))),
            RuleBody::Primitive(_) => None,
        }
    }

    pub fn apply(&self, e: &Expr) -> Option<Expr> {
        match &self.body {
            RuleBody::Intensional(alts) => {
                let (i, b) = self.match_rule(e)?;
                Some(alts[i].instantiate(&b))
            }
            RuleBody::Primitive(p) => p.apply(e),
        }
    }

    /// A copy restricted to a single alternative (same id and texts).
    pub fn alternative(&self, index: usize) -> Option<Rule> {
        match &self.body {
            RuleBody::Intensional(alts) => alts.get(index).map(|alt| Rule {
                body: RuleBody::Intensional(vec![alt.clone()]),
                ..self.clone()
            }),
            RuleBody::Primitive(_) => None,
        }
    }
}

pub fn sum_rule() -> Rule {
    Rule::intensional(
        RuleId::new("eval.sum.rule"),
        "definition sum",
        vec![Alternative::new(
            &[],
            Expr::var("sum"),
            Expr::app_n(Expr::var("foldl"), [Expr::var("+"), Expr::lit(0)]),
        )],
    )
    .describe("Calculate the sum of a list of numbers")
}

pub fn foldl_rule() -> Rule {
    let foldl = |args: [Expr; 3]| Expr::app_n(Expr::var("foldl"), args);
    let (f, v, x, xs) = (Expr::var("f"), Expr::var("v"), Expr::var("x"), Expr::var("xs"));
    Rule::intensional(
        RuleId::new("eval.foldl.rule"),
        "definition foldl",
        vec![
            Alternative::new(&["f", "v", "x", "xs"], foldl([f.clone(), v.clone(), Expr::nil()]), v.clone()),
            Alternative::new(
                &["f", "v", "x", "xs"],
                foldl([f.clone(), v.clone(), Expr::cons(x.clone(), xs.clone())]),
                foldl([f.clone(), Expr::app_n(f, [v, x]), xs]),
            ),
        ],
    )
    .describe("Process a list using an operator that associates to the left")
}

/// `[] ++ ys = ys` and `(x:xs) ++ ys = x : (xs ++ ys)`.
pub fn append_rule() -> Rule {
    let (x, xs, ys) = (Expr::var("x"), Expr::var("xs"), Expr::var("ys"));
    Rule::intensional(
        RuleId::new("eval.append.rule"),
        "definition ++",
        vec![
            Alternative::new(&["x", "xs", "ys"], Expr::binop("++", Expr::nil(), ys.clone()), ys.clone()),
            Alternative::new(
                &["x", "xs", "ys"],
                Expr::binop("++", Expr::cons(x.clone(), xs.clone()), ys.clone()),
                Expr::cons(x, Expr::binop("++", xs, ys)),
            ),
        ],
    )
    .describe("Append two lists")
}

pub fn add_rule() -> Rule {
    Rule::primitive(RuleId::new("eval.add.rule"), "applying +", Primitive::Add).describe("Add two integers")
}

pub fn sub_rule() -> Rule {
    Rule::primitive(RuleId::new("eval.sub.rule"), "applying -", Primitive::Sub).describe("Subtract two integers")
}

pub fn mul_rule() -> Rule {
    Rule::primitive(RuleId::new("eval.mul.rule"), "applying *", Primitive::Mul).describe("Multiply two integers")
}

pub fn beta_reduction() -> Rule {
    Rule::primitive(RuleId::new("eval.beta.rule"), "beta reduction", Primitive::Beta)
        .describe("Substitute the argument for the parameter of a lambda abstraction")
}

/// The hand-written rule set: sum, foldl, append, addition and beta-reduction.
pub fn builtin_rules() -> Vec<Arc<Rule>> {
    vec![sum_rule(), foldl_rule(), append_rule(), add_rule(), beta_reduction()]
        .into_iter()
        .map(Arc::new)
        .collect()
}

pub fn find_rule<'a>(rules: &'a [Arc<Rule>], id: &str) -> Option<&'a Arc<Rule>> {
    rules.iter().find(|r| r.id.as_str() == id)
}
