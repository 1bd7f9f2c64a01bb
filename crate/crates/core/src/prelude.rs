//! Prelude files: annotated function definitions from which rewrite rules
//! and evaluation strategies are generated.
//!
//! ```text
//! {-# DESC double function to double a number. #-}
//! double x = x + x
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::expr::{
    fresh_name, is_constructor_name, tokenize, Expr, ParseError, Parser, Token, TokenKind, CONS, NIL,
};
use crate::rules::{Alternative, Rule, RuleId};
use crate::strategy::{partial_args, Predicate, Strategy};

/// Operators evaluated natively; they cannot be defined in a prelude.
pub const PRIMITIVE_OPERATORS: &[&str] = &["+", "-", "*"];

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Pat {
    Con(String, Vec<Pat>),
    Var(String),
    Lit(i64),
}

impl Pat {
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Pat::Var(x) => out.push(x),
            Pat::Lit(_) => {}
            Pat::Con(_, ps) => ps.iter().for_each(|p| p.collect_vars(out)),
        }
    }

    fn rename_wildcards(&mut self, taken: &mut BTreeSet<String>) {
        match self {
            Pat::Var(x) if x == "_" => {
                let fresh = fresh_name("_", taken);
                taken.insert(fresh.clone());
                *x = fresh;
            }
            Pat::Var(_) | Pat::Lit(_) => {}
            Pat::Con(_, ps) => ps.iter_mut().for_each(|p| p.rename_wildcards(taken)),
        }
    }
}

impl fmt::Display for Pat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", pat_to_expr(self))
    }
}

pub fn pat_to_expr(p: &Pat) -> Expr {
    match p {
        Pat::Con(s, ps) => Expr::app_n(Expr::var(s.clone()), ps.iter().map(pat_to_expr)),
        Pat::Var(s) => Expr::var(s.clone()),
        Pat::Lit(n) => Expr::lit(*n),
    }
}

/// One binding `f p1 .. pn = rhs`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Def {
    pub name: String,
    pub patterns: Vec<Pat>,
    pub rhs: Expr,
    pub line: usize,
}

impl Def {
    pub fn pattern_vars(&self) -> Vec<&str> {
        self.patterns.iter().flat_map(|p| p.vars()).collect()
    }

    pub fn lhs(&self) -> Expr {
        Expr::app_n(Expr::var(self.name.clone()), self.patterns.iter().map(pat_to_expr))
    }
}

/// The contiguous bindings of one function plus its description.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FunctionGroup {
    pub name: String,
    pub description: Option<String>,
    pub bindings: Vec<Def>,
}

impl FunctionGroup {
    pub fn arity(&self) -> usize {
        self.bindings[0].patterns.len()
    }

    pub fn rule_id(&self) -> RuleId {
        RuleId::for_function(&self.name)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct PreludeFile {
    pub groups: Vec<FunctionGroup>,
    pub warnings: Vec<String>,
}

impl PreludeFile {
    pub fn group(&self, name: &str) -> Option<&FunctionGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("prelude line {line}: {message}")]
pub struct PreludeError {
    pub line: usize,
    pub message: String,
}

impl From<ParseError> for PreludeError {
    fn from(e: ParseError) -> PreludeError {
        PreludeError { line: e.line, message: format!("column {}: {}", e.column, e.message) }
    }
}

fn err(line: usize, message: impl Into<String>) -> PreludeError {
    PreludeError { line, message: message.into() }
}

struct Desc {
    line: usize,
    text: String,
}

/// Blanks out comments and pragmas (keeping line structure) and collects
/// `DESC` annotations.
fn strip_comments(source: &str) -> Result<(String, Vec<Desc>), PreludeError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = String::with_capacity(source.len());
    let mut descs = Vec::new();
    let mut line = 1;
    let mut i = 0;
    let blank = |c: char, out: &mut String| out.push(if c == '\n' { '\n' } else { ' ' });
    while i < chars.len() {
        let rest = &chars[i..];
        if rest.starts_with(&['{', '-', '#']) {
            let start_line = line;
            let mut j = i + 3;
            while j < chars.len() && !chars[j..].starts_with(&['#', '-', '}']) {
                j += 1;
            }
            if j >= chars.len() {
                return Err(err(start_line, "unterminated pragma `{-#`"));
            }
            let body: String = chars[i + 3..j].iter().collect();
            let mut words = body.split_whitespace();
            if words.next() == Some("DESC") {
                let text = words.collect::<Vec<_>>().join(" ");
                descs.push(Desc { line: start_line, text });
            }
            for &c in &chars[i..j + 3] {
                if c == '\n' {
                    line += 1;
                }
                blank(c, &mut out);
            }
            i = j + 3;
        } else if rest.starts_with(&['{', '-']) {
            let start_line = line;
            let mut depth = 0usize;
            let mut j = i;
            loop {
                if j >= chars.len() {
                    return Err(err(start_line, "unterminated block comment `{-`"));
                }
                if chars[j..].starts_with(&['{', '-']) {
                    depth += 1;
                    j += 2;
                } else if chars[j..].starts_with(&['-', '}']) {
                    depth -= 1;
                    j += 2;
                    if depth == 0 {
                        break;
                    }
                } else {
                    j += 1;
                }
            }
            for &c in &chars[i..j] {
                if c == '\n' {
                    line += 1;
                }
                blank(c, &mut out);
            }
            i = j;
        } else if rest.starts_with(&['-', '-'])
            && rest.iter().find(|&&c| c != '-').is_none_or(|c| !"+*:<>=!.&|$/^%?~@#".contains(*c))
        {
            while i < chars.len() && chars[i] != '\n' {
                out.push(' ');
                i += 1;
            }
        } else {
            if chars[i] == '\n' {
                line += 1;
            }
            out.push(chars[i]);
            i += 1;
        }
    }
    Ok((out, descs))
}

/// A declaration: a line starting in column 1 plus its indented continuation lines.
struct Decl {
    line: usize,
    text: String,
}

fn split_decls(cleaned: &str) -> Result<Vec<Decl>, PreludeError> {
    let mut decls: Vec<Decl> = Vec::new();
    for (idx, raw) in cleaned.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            if let Some(d) = decls.last_mut() {
                d.text.push('\n');
            }
            continue;
        }
        if raw.starts_with(char::is_whitespace) {
            match decls.last_mut() {
                Some(d) => {
                    d.text.push('\n');
                    d.text.push_str(raw);
                }
                None => return Err(err(line, "indented line does not continue a definition")),
            }
        } else {
            decls.push(Decl { line, text: raw.to_string() });
        }
    }
    Ok(decls)
}

pub fn parse_prelude(source: &str) -> Result<PreludeFile, PreludeError> {
    let (cleaned, descs) = strip_comments(source)?;
    let decls = split_decls(&cleaned)?;
    let mut file = PreludeFile::default();
    let mut descs = descs.into_iter().peekable();
    let mut pending: Option<Desc> = None;
    let mut previous_name: Option<String> = None;

    for decl in decls {
        while let Some(d) = descs.next_if(|d| d.line < decl.line) {
            if let Some(old) = pending.replace(d) {
                file.warnings.push(format!("line {}: DESC annotation is not followed by a definition", old.line));
            }
        }
        let tokens = tokenize(&decl.text, decl.line - 1)?;
        if tokens.is_empty() {
            continue;
        }
        let is_signature = tokens
            .iter()
            .take_while(|t| t.kind != TokenKind::Equals)
            .any(|t| t.kind == TokenKind::DoubleColon);
        if is_signature {
            // A pending DESC carries over to the definition after the signature.
            continue;
        }
        let def = parse_binding(&tokens, decl.line)?;
        let description = pending.take().map(|d| d.text);

        if previous_name.as_deref() == Some(def.name.as_str()) {
            let group = file.groups.last_mut().expect("previous group exists");
            if group.arity() != def.patterns.len() {
                return Err(err(
                    def.line,
                    format!(
                        "`{}` has {} argument(s) here but {} in its binding at line {}",
                        def.name,
                        def.patterns.len(),
                        group.arity(),
                        group.bindings[0].line
                    ),
                ));
            }
            if let Some(text) = description {
                if group.description.is_none() {
                    group.description = Some(text);
                } else {
                    file.warnings.push(format!("line {}: extra DESC for `{}` ignored", def.line, def.name));
                }
            }
            group.bindings.push(def);
        } else {
            if let Some(pos) = file.groups.iter().position(|g| g.name == def.name) {
                let old = file.groups.remove(pos);
                file.warnings.push(format!(
                    "line {}: definition of `{}` shadows the earlier one at line {}",
                    def.line, def.name, old.bindings[0].line
                ));
            }
            previous_name = Some(def.name.clone());
            file.groups.push(FunctionGroup { name: def.name.clone(), description, bindings: vec![def] });
        }
    }
    for d in pending.into_iter().chain(descs) {
        file.warnings.push(format!("line {}: DESC annotation is not followed by a definition", d.line));
    }
    Ok(file)
}

/// Splits tokens at depth 0 on operators, for infix left-hand sides.
fn top_level_operator(tokens: &[Token]) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in tokens.iter().enumerate() {
        match &t.kind {
            TokenKind::LParen | TokenKind::LBracket => depth += 1,
            TokenKind::RParen | TokenKind::RBracket => depth -= 1,
            TokenKind::Op(_) if depth == 0 => return Some(i),
            _ => {}
        }
    }
    None
}

fn check_definable(name: &str, line: usize) -> Result<(), PreludeError> {
    if name == CONS || name == NIL || is_constructor_name(name) {
        return Err(err(line, format!("`{name}` is a constructor and cannot be defined")));
    }
    if PRIMITIVE_OPERATORS.contains(&name) {
        return Err(err(line, format!("`{name}` is a primitive operator and cannot be defined in the prelude")));
    }
    Ok(())
}

fn parse_binding(tokens: &[Token], line: usize) -> Result<Def, PreludeError> {
    let eq = tokens.iter().position(|t| t.kind == TokenKind::Equals).ok_or_else(|| {
        err(tokens[0].line, "expected `name patterns = expression`")
    })?;
    let (lhs, rhs_tokens) = (&tokens[..eq], &tokens[eq + 1..]);
    if lhs.is_empty() {
        return Err(err(tokens[eq].line, "missing function name before `=`"));
    }
    if rhs_tokens.iter().any(|t| t.kind == TokenKind::Equals) {
        return Err(err(line, "more than one `=` in a binding; where clauses and guards are not supported"));
    }

    let (name, mut patterns) = match top_level_operator(lhs) {
        Some(op_at) => {
            let TokenKind::Op(op) = &lhs[op_at].kind else { unreachable!() };
            check_definable(op, lhs[op_at].line)?;
            let left = PatParser::run(&lhs[..op_at], lhs[op_at].line)?;
            let right = PatParser::run(&lhs[op_at + 1..], lhs[op_at].line)?;
            (op.clone(), vec![left, right])
        }
        None => {
            let (name, rest) = match (&lhs[0].kind, lhs.get(1).map(|t| &t.kind), lhs.get(2).map(|t| &t.kind)) {
                (TokenKind::LParen, Some(TokenKind::Op(op)), Some(TokenKind::RParen)) => (op.clone(), &lhs[3..]),
                (TokenKind::Ident(f), _, _) => (f.clone(), &lhs[1..]),
                (k, _, _) => return Err(err(lhs[0].line, format!("expected a function name, found {k}"))),
            };
            check_definable(&name, lhs[0].line)?;
            let mut p = PatParser { tokens: rest, pos: 0, line };
            let mut pats = Vec::new();
            while p.pos < rest.len() {
                pats.push(p.apat()?);
            }
            (name, pats)
        }
    };

    let mut seen = BTreeSet::new();
    for v in patterns.iter().flat_map(|p| p.vars()) {
        if v != "_" && !seen.insert(v.to_string()) {
            return Err(err(line, format!("variable `{v}` occurs more than once in the patterns of `{name}`")));
        }
    }
    let mut taken = seen;
    taken.insert(name.clone());
    patterns.iter_mut().for_each(|p| p.rename_wildcards(&mut taken));

    if rhs_tokens.is_empty() {
        return Err(err(tokens[eq].line, "missing right-hand side after `=`"));
    }
    let mut parser = Parser::new(rhs_tokens, "");
    let rhs = parser.expr()?;
    parser.expect_end()?;
    Ok(Def { name, patterns, rhs, line })
}

struct PatParser<'a> {
    tokens: &'a [Token],
    pos: usize,
    line: usize,
}

impl PatParser<'_> {
    fn run(tokens: &[Token], line: usize) -> Result<Pat, PreludeError> {
        let mut p = PatParser { tokens, pos: 0, line };
        let pat = p.pattern()?;
        if p.pos < tokens.len() {
            return Err(p.unexpected("end of pattern"));
        }
        Ok(pat)
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn here_line(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.line, |t| t.line)
    }

    fn unexpected(&self, expected: &str) -> PreludeError {
        match self.tokens.get(self.pos) {
            Some(t) => err(t.line, format!("column {}: expected {expected} in pattern, found {}", t.column, t.kind)),
            None => err(self.line, format!("expected {expected} in pattern, found end of pattern")),
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), PreludeError> {
        if self.peek() == Some(&kind) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&kind.to_string()))
        }
    }

    /// `cpat (: cpat)*`, right-associative.
    fn pattern(&mut self) -> Result<Pat, PreludeError> {
        let head = self.con_pattern()?;
        match self.peek() {
            Some(TokenKind::Op(op)) if op == CONS => {
                self.pos += 1;
                let tail = self.pattern()?;
                Ok(Pat::Con(CONS.to_string(), vec![head, tail]))
            }
            Some(TokenKind::Op(op)) => Err(err(
                self.here_line(),
                format!("operator `{op}` cannot appear in a pattern"),
            )),
            _ => Ok(head),
        }
    }

    /// A constructor applied to argument patterns, or an atomic pattern.
    fn con_pattern(&mut self) -> Result<Pat, PreludeError> {
        if let Some(TokenKind::Ident(c)) = self.peek() {
            if is_constructor_name(c) {
                let c = c.clone();
                self.pos += 1;
                let mut args = Vec::new();
                while matches!(
                    self.peek(),
                    Some(TokenKind::Ident(_) | TokenKind::Int(_) | TokenKind::LParen | TokenKind::LBracket | TokenKind::Underscore)
                ) {
                    args.push(self.apat()?);
                }
                return Ok(Pat::Con(c, args));
            }
        }
        self.apat()
    }

    fn apat(&mut self) -> Result<Pat, PreludeError> {
        let Some(kind) = self.peek().cloned() else {
            return Err(self.unexpected("a pattern"));
        };
        self.pos += 1;
        match kind {
            TokenKind::Ident(x) if is_constructor_name(&x) => Ok(Pat::Con(x, Vec::new())),
            TokenKind::Ident(x) => Ok(Pat::Var(x)),
            TokenKind::Underscore => Ok(Pat::Var("_".to_string())),
            TokenKind::Int(n) => Ok(Pat::Lit(n)),
            TokenKind::LParen => {
                let p = self.pattern()?;
                if self.peek() == Some(&TokenKind::Comma) {
                    return Err(err(self.here_line(), "tuple patterns are not supported"));
                }
                self.expect(TokenKind::RParen)?;
                Ok(p)
            }
            TokenKind::LBracket => {
                let mut items = Vec::new();
                if self.peek() != Some(&TokenKind::RBracket) {
                    loop {
                        items.push(self.pattern()?);
                        if self.peek() == Some(&TokenKind::Comma) {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                self.expect(TokenKind::RBracket)?;
                Ok(items.into_iter().rev().fold(Pat::Con(NIL.to_string(), Vec::new()), |tail, head| {
                    Pat::Con(CONS.to_string(), vec![head, tail])
                }))
            }
            other => {
                self.pos -= 1;
                Err(self.unexpected(&format!("a pattern (not {other})")))
            }
        }
    }
}

/// One intensional rule per function; bindings become alternatives in source order.
pub fn gen_rule(group: &FunctionGroup) -> Rule {
    let alternatives = group
        .bindings
        .iter()
        .map(|d| Alternative {
            meta_vars: d.pattern_vars().into_iter().map(String::from).collect(),
            lhs: d.lhs(),
            rhs: d.rhs.clone(),
        })
        .collect();
    let rule = Rule::intensional(group.rule_id(), format!("definition {}", group.name), alternatives);
    match &group.description {
        Some(text) => rule.describe(text.clone()),
        None => rule,
    }
}

/// Evaluates an argument just far enough to decide whether it matches `p`.
pub fn pat_strategy(p: &Pat, whnf: &Strategy) -> Strategy {
    match p {
        Pat::Var(_) => Strategy::succeed(),
        Pat::Lit(n) => whnf.clone().partial_seq(Strategy::check(Predicate::Equals(Expr::lit(*n)))),
        Pat::Con(c, ps) => whnf.clone().partial_seq(pat_list_strategy(c, ps, whnf)),
    }
}

/// Checks the head `name` with `ps.len()` arguments, then matches each argument.
pub fn pat_list_strategy(name: &str, ps: &[Pat], whnf: &Strategy) -> Strategy {
    let check = Strategy::check(Predicate::is_fun(name, ps.len()));
    if ps.is_empty() {
        return check;
    }
    check.partial_seq(partial_args(ps.iter().map(|p| pat_strategy(p, whnf)).collect()))
}

/// The evaluation strategy of a function: per binding, match the patterns
/// and apply that binding's alternative; bindings are tried in order.
pub fn gen_eval_strategy(rule: &Arc<Rule>, group: &FunctionGroup, whnf: &Strategy) -> Strategy {
    let mut per_binding = group.bindings.iter().enumerate().map(|(i, d)| {
        let alt = Arc::new(rule.alternative(i).expect("one alternative per binding"));
        pat_list_strategy(&group.name, &d.patterns, whnf).partial_seq(Strategy::rule(alt))
    });
    let first = per_binding.next().expect("a group has at least one binding");
    let combined = per_binding.fold(first, |acc, s| acc.or_else(s));
    Strategy::label(group.name.clone(), combined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    const SAMPLE: &str = "\
{-# DESC sum defined with a foldr to sum up all elements of a list. #-}
sum' = foldr (+) 0

{-# DESC sum defined recursively to sum up all elements of a list. #-}
sum'' []       = 0
sum'' (x:xs)   = x + sum'' xs

{-# DESC double function to double a number. #-}
double x = x + x
";

    #[test]
    fn sample_file_groups() {
        let file = parse_prelude(SAMPLE).unwrap();
        let summary: Vec<(&str, usize)> = file.groups.iter().map(|g| (g.name.as_str(), g.bindings.len())).collect();
        assert_eq!(summary, vec![("sum'", 1), ("sum''", 2), ("double", 1)]);
        assert_eq!(
            file.group("double").unwrap().description.as_deref(),
            Some("double function to double a number.")
        );
        assert_eq!(
            file.group("sum'").unwrap().description.as_deref(),
            Some("sum defined with a foldr to sum up all elements of a list.")
        );
        assert!(file.warnings.is_empty());
    }

    #[test]
    fn empty_and_comment_only_files() {
        assert!(parse_prelude("").unwrap().groups.is_empty());
        assert!(parse_prelude("-- nothing\n{- block {- nested -} -}\n").unwrap().groups.is_empty());
    }

    #[test]
    fn arity_mismatch() {
        let e = parse_prelude("f [] = 0\nf x y = 1").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("argument"), "{e}");
    }

    #[test]
    fn operator_forms_agree() {
        let a = parse_prelude("(++) [] ys = ys").unwrap();
        let b = parse_prelude("[] ++ ys = ys").unwrap();
        assert_eq!(a.groups[0].bindings[0].lhs(), b.groups[0].bindings[0].lhs());
        assert_eq!(a.groups[0].name, "++");
    }

    #[test]
    fn rejected_definitions() {
        for src in [
            "x + y = 0",
            "(:) x y = x",
            "f x x = x",
            "f x = y where y = x",
            "f x | x = 1",
            "f (x, y) = x",
        ] {
            assert!(parse_prelude(src).is_err(), "{src} should be rejected");
        }
    }

    #[test]
    fn desc_spans_lines_and_skips_signatures() {
        let file = parse_prelude("{-# DESC first\n   second #-}\nf :: Int -> Int\nf x = x\n").unwrap();
        assert_eq!(file.groups[0].description.as_deref(), Some("first second"));
    }

    #[test]
    fn continuation_lines_and_wildcards() {
        let file = parse_prelude("const x _ =\n  x\nhd (x:_) = x").unwrap();
        let c = &file.groups[0].bindings[0];
        assert_eq!(c.patterns, vec![Pat::Var("x".into()), Pat::Var("_1".into())]);
        assert_eq!(c.rhs, Expr::var("x"));
    }

    #[test]
    fn shadowing_warns() {
        let file = parse_prelude("f x = 1\ng x = 2\nf x = 3").unwrap();
        assert_eq!(file.names(), vec!["g", "f"]);
        assert_eq!(file.warnings.len(), 1);
    }

    #[test]
    fn patterns_to_expressions() {
        let cons = Pat::Con(CONS.into(), vec![Pat::Var("x".into()), Pat::Var("xs".into())]);
        assert_eq!(pat_to_expr(&cons), Expr::cons(Expr::var("x"), Expr::var("xs")));
        assert_eq!(pat_to_expr(&Pat::Lit(0)), Expr::lit(0));
        assert_eq!(pat_to_expr(&Pat::Con(NIL.into(), vec![])), Expr::var("[]"));
        let file = parse_prelude("f [1, -2] (Just y) = y").unwrap();
        assert_eq!(file.groups[0].bindings[0].lhs(), parse("f [1,-2] (Just y)").unwrap());
    }

    #[test]
    fn generated_rules() {
        let file = parse_prelude(SAMPLE).unwrap();
        let double = gen_rule(file.group("double").unwrap());
        assert_eq!(double.id.as_str(), "eval.double.rule");
        assert_eq!(double.apply(&parse("double 3").unwrap()), Some(parse("3 + 3").unwrap()));
        let sum2 = gen_rule(file.group("sum''").unwrap());
        assert_eq!(sum2.apply(&parse("sum'' []").unwrap()), Some(Expr::lit(0)));
        assert_eq!(sum2.apply(&parse("sum'' [4]").unwrap()), Some(parse("4 + sum'' []").unwrap()));
    }
}
