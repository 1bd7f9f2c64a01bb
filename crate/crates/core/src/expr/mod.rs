//! The expression language: a small lazy functional subset with application,
//! lambda abstraction, named variables/constructors and integer literals.

mod parse;
mod pretty;
mod subst;

use std::collections::BTreeSet;
use std::fmt;

pub use parse::{parse, tokenize, ParseError, Token, TokenKind};
pub(crate) use parse::Parser;
pub use pretty::pretty;
pub use subst::{fresh_name, substitute, substitute_many};

pub const CONS: &str = ":";
pub const NIL: &str = "[]";

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Expr {
    App(Box<Expr>, Box<Expr>),
    Abs(String, Box<Expr>),
    /// Variables and constructor names (`:`, `[]`, capitalised names).
    Var(String),
    Lit(i64),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn lit(value: i64) -> Expr {
        Expr::Lit(value)
    }

    pub fn app(fun: Expr, arg: Expr) -> Expr {
        Expr::App(Box::new(fun), Box::new(arg))
    }

    pub fn abs(binder: impl Into<String>, body: Expr) -> Expr {
        Expr::Abs(binder.into(), Box::new(body))
    }

    /// n-ary application, `f a1 a2 ... an`.
    pub fn app_n(fun: Expr, args: impl IntoIterator<Item = Expr>) -> Expr {
        args.into_iter().fold(fun, Expr::app)
    }

    pub fn nil() -> Expr {
        Expr::Var(NIL.to_string())
    }

    pub fn cons(head: Expr, tail: Expr) -> Expr {
        Expr::app_n(Expr::var(CONS), [head, tail])
    }

    /// A nil-terminated list of the given elements.
    pub fn list(items: impl IntoIterator<Item = Expr>) -> Expr {
        let items: Vec<Expr> = items.into_iter().collect();
        items
            .into_iter()
            .rev()
            .fold(Expr::nil(), |tail, head| Expr::cons(head, tail))
    }

    /// Binary operator application `lhs op rhs`.
    pub fn binop(op: &str, lhs: Expr, rhs: Expr) -> Expr {
        Expr::app_n(Expr::var(op), [lhs, rhs])
    }

    pub fn is_app(&self) -> bool {
        matches!(self, Expr::App(..))
    }

    /// True iff the expression is `Var name` applied to exactly `arity` arguments.
    pub fn is_fun(&self, name: &str, arity: usize) -> bool {
        match (self, arity) {
            (Expr::Var(s), 0) => s == name,
            (Expr::App(f, _), n) if n > 0 => f.is_fun(name, n - 1),
            _ => false,
        }
    }

    /// Splits the left spine into head and arguments.
    pub fn spine(&self) -> (&Expr, Vec<&Expr>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Expr::App(f, a) = cur {
            args.push(a.as_ref());
            cur = f;
        }
        args.reverse();
        (cur, args)
    }

    /// The elements of a nil-terminated cons chain, if this is one.
    pub fn as_list(&self) -> Option<Vec<&Expr>> {
        let mut items = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Expr::Var(s) if s == NIL => return Some(items),
                _ => {
                    let (head, args) = cur.spine();
                    match (head, args.as_slice()) {
                        (Expr::Var(c), [h, t]) if c == CONS => {
                            items.push(*h);
                            cur = t;
                        }
                        _ => return None,
                    }
                }
            }
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::App(f, a) => vec![f, a],
            Expr::Abs(_, b) => vec![b],
            Expr::Var(_) | Expr::Lit(_) => vec![],
        }
    }

    pub fn child(&self, index: usize) -> Option<&Expr> {
        match (self, index) {
            (Expr::App(f, _), 0) => Some(f),
            (Expr::App(_, a), 1) => Some(a),
            (Expr::Abs(_, b), 0) => Some(b),
            _ => None,
        }
    }

    pub fn at(&self, path: &Path) -> Option<&Expr> {
        path.0
            .iter()
            .try_fold(self, |e, &i| e.child(usize::from(i)))
    }

    /// Returns a copy with the sub-expression at `path` replaced.
    pub fn replace_at(&self, path: &[u8], new: Expr) -> Option<Expr> {
        match path.split_first() {
            None => Some(new),
            Some((&i, rest)) => match (self, i) {
                (Expr::App(f, a), 0) => Some(Expr::App(Box::new(f.replace_at(rest, new)?), a.clone())),
                (Expr::App(f, a), 1) => Some(Expr::App(f.clone(), Box::new(a.replace_at(rest, new)?))),
                (Expr::Abs(x, b), 0) => Some(Expr::Abs(x.clone(), Box::new(b.replace_at(rest, new)?))),
                _ => None,
            },
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect_free(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn occurs_free(&self, name: &str) -> bool {
        match self {
            Expr::Var(s) => s == name,
            Expr::Lit(_) => false,
            Expr::App(f, a) => f.occurs_free(name) || a.occurs_free(name),
            Expr::Abs(x, b) => x != name && b.occurs_free(name),
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// All paths in pre-order (node before children, left before right).
    pub fn paths(&self) -> Vec<Path> {
        fn go(e: &Expr, cur: &mut Vec<u8>, out: &mut Vec<Path>) {
            out.push(Path(cur.clone()));
            for (i, c) in e.children().into_iter().enumerate() {
                cur.push(i as u8);
                go(c, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

fn collect_free(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match e {
        Expr::Var(s) => {
            if !bound.iter().any(|b| b == s) {
                out.insert(s.clone());
            }
        }
        Expr::Lit(_) => {}
        Expr::App(f, a) => {
            collect_free(f, bound, out);
            collect_free(a, bound, out);
        }
        Expr::Abs(x, b) => {
            bound.push(x.clone());
            collect_free(b, bound, out);
            bound.pop();
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty(self))
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// Location of a sub-expression: child indices from the root
/// (0 = function / lambda body, 1 = argument).
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default, PartialOrd, Ord)]
pub struct Path(pub Vec<u8>);

impl Path {
    pub fn root() -> Path {
        Path(Vec::new())
    }

    pub fn child(&self, index: u8) -> Path {
        let mut v = self.0.clone();
        v.push(index);
        Path(v)
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn is_prefix_of(&self, other: &Path) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

/// Whether a name denotes a data constructor rather than a function.
pub fn is_constructor_name(name: &str) -> bool {
    name == CONS || name == NIL || name.starts_with(|c: char| c.is_ascii_uppercase())
}

/// Whether a name is written as a symbolic operator.
pub fn is_operator_name(name: &str) -> bool {
    name != NIL && !name.is_empty() && !name.starts_with(|c: char| c.is_alphanumeric() || c == '_')
}
