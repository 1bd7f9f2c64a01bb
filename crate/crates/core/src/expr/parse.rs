use std::fmt;

use super::{Expr, CONS};

/// Infix operators understood by the parser.
const OPERATORS: &[&str] = &["+", "++", ":", "-", "*"];

const KEYWORDS: &[&str] = &[
    "let", "in", "case", "of", "if", "then", "else", "where", "do", "data", "type", "class",
    "instance", "module", "import", "newtype",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl ParseError {
    pub(crate) fn new(message: impl Into<String>, line: usize, column: usize) -> ParseError {
        ParseError { message: message.into(), line, column }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Op(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Backslash,
    Arrow,
    Equals,
    DoubleColon,
    Underscore,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) | TokenKind::Op(s) => write!(f, "`{s}`"),
            TokenKind::Int(n) => write!(f, "`{n}`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::LBracket => f.write_str("`[`"),
            TokenKind::RBracket => f.write_str("`]`"),
            TokenKind::Comma => f.write_str("`,`"),
            TokenKind::Backslash => f.write_str("`\\`"),
            TokenKind::Arrow => f.write_str("`->`"),
            TokenKind::Equals => f.write_str("`=`"),
            TokenKind::DoubleColon => f.write_str("`::`"),
            TokenKind::Underscore => f.write_str("`_`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

fn is_symbol_char(c: char) -> bool {
    "+-*:<>=!.&|$/^%?~@#".contains(c)
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

/// Splits source text into tokens. `line_offset` is added to reported lines.
pub fn tokenize(source: &str, line_offset: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens: Vec<Token> = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1 + line_offset, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let push = |tokens: &mut Vec<Token>, kind| tokens.push(Token { kind, line: tl, column: tc });
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let value = text
                .parse::<i64>()
                .map_err(|_| ParseError::new(format!("integer literal `{text}` out of range"), tl, tc))?;
            push(&mut tokens, TokenKind::Int(value));
        } else if is_ident_start(c) {
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            if text == "_" {
                push(&mut tokens, TokenKind::Underscore);
            } else if KEYWORDS.contains(&text.as_str()) {
                return Err(ParseError::new(format!("unsupported construct `{text}`"), tl, tc));
            } else {
                push(&mut tokens, TokenKind::Ident(text));
            }
        } else if is_symbol_char(c) {
            while i < chars.len() && is_symbol_char(chars[i]) {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let operand_before = matches!(
                tokens.last().map(|t| &t.kind),
                Some(TokenKind::Ident(_) | TokenKind::Int(_) | TokenKind::RParen | TokenKind::RBracket)
            );
            // `-` directly followed by a digit in operand position is a negative literal.
            if text == "-" && !operand_before && i < chars.len() && chars[i].is_ascii_digit() {
                let num_start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[num_start..i].iter().collect();
                let value = format!("-{digits}")
                    .parse::<i64>()
                    .map_err(|_| ParseError::new(format!("integer literal `-{digits}` out of range"), tl, tc))?;
                push(&mut tokens, TokenKind::Int(value));
            } else {
                let kind = match text.as_str() {
                    "->" => TokenKind::Arrow,
                    "=" => TokenKind::Equals,
                    "::" => TokenKind::DoubleColon,
                    "|" => return Err(ParseError::new("guards and list comprehensions are not supported", tl, tc)),
                    "<-" => return Err(ParseError::new("generators are not supported", tl, tc)),
                    op if OPERATORS.contains(&op) => TokenKind::Op(text.clone()),
                    _ => return Err(ParseError::new(format!("unsupported operator `{text}`"), tl, tc)),
                };
                push(&mut tokens, kind);
            }
        } else {
            i += 1;
            let kind = match c {
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                '[' => TokenKind::LBracket,
                ']' => TokenKind::RBracket,
                ',' => TokenKind::Comma,
                '\\' => TokenKind::Backslash,
                '`' => return Err(ParseError::new("backtick infix application is not supported", tl, tc)),
                '"' | '\'' => return Err(ParseError::new("character and string literals are not supported", tl, tc)),
                _ => return Err(ParseError::new(format!("unexpected character `{c}`"), tl, tc)),
            };
            push(&mut tokens, kind);
        }
        col += i - start;
    }
    Ok(tokens)
}

/// Parses an expression of the supported subset.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(source, 0)?;
    let mut p = Parser::new(&tokens, source);
    let e = p.expr()?;
    p.expect_end()?;
    Ok(e)
}

pub(crate) struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    end: (usize, usize),
}

impl<'a> Parser<'a> {
    pub(crate) fn new(tokens: &'a [Token], source: &str) -> Parser<'a> {
        let end = match tokens.last() {
            Some(t) => (t.line, t.column + 1),
            None => (1, source.chars().count() + 1),
        };
        Parser { tokens, pos: 0, end }
    }

    pub(crate) fn peek(&self) -> Option<&'a TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    pub(crate) fn peek_at(&self, offset: usize) -> Option<&'a TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    pub(crate) fn error_here(&self, message: impl Into<String>) -> ParseError {
        let (line, column) = match self.tokens.get(self.pos) {
            Some(t) => (t.line, t.column),
            None => self.end,
        };
        ParseError::new(message, line, column)
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        match self.peek() {
            Some(k) => self.error_here(format!("expected {expected}, found {k}")),
            None => self.error_here(format!("expected {expected}, found end of input")),
        }
    }

    pub(crate) fn expect(&mut self, kind: &TokenKind) -> Result<(), ParseError> {
        if self.peek() == Some(kind) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&kind.to_string()))
        }
    }

    pub(crate) fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(k) => Err(self.error_here(format!("unexpected {k}"))),
        }
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&TokenKind::Backslash) {
            return self.lambda();
        }
        self.op_chain()
    }

    fn lambda(&mut self) -> Result<Expr, ParseError> {
        self.expect(&TokenKind::Backslash)?;
        let mut binders = Vec::new();
        while let Some(TokenKind::Ident(name)) = self.peek() {
            binders.push(name.clone());
            self.pos += 1;
        }
        if binders.is_empty() {
            return Err(self.unexpected("a lambda binder"));
        }
        self.expect(&TokenKind::Arrow)?;
        let body = self.expr()?;
        Ok(binders.into_iter().rev().fold(body, |b, x| Expr::abs(x, b)))
    }

    /// `app (op app)*`. A chain of one operator follows its usual
    /// associativity; mixing different operators requires parentheses.
    fn op_chain(&mut self) -> Result<Expr, ParseError> {
        let first = self.application()?;
        let mut operands = vec![first];
        let mut op: Option<String> = None;
        while let Some(TokenKind::Op(o)) = self.peek() {
            if let Some(prev) = &op {
                if prev != o {
                    return Err(self.error_here(format!(
                        "ambiguous mix of `{prev}` and `{o}`; add parentheses"
                    )));
                }
            }
            op = Some(o.clone());
            self.pos += 1;
            let rhs = if self.peek() == Some(&TokenKind::Backslash) {
                self.lambda()?
            } else {
                self.application()?
            };
            let is_lambda = matches!(rhs, Expr::Abs(..));
            operands.push(rhs);
            if is_lambda {
                break;
            }
        }
        let Some(op) = op else {
            return Ok(operands.pop().unwrap());
        };
        let right_assoc = op == CONS || op == "++";
        let combined = if right_assoc {
            let mut it = operands.into_iter().rev();
            let last = it.next().unwrap();
            it.fold(last, |acc, lhs| Expr::binop(&op, lhs, acc))
        } else {
            let mut it = operands.into_iter();
            let first = it.next().unwrap();
            it.fold(first, |acc, rhs| Expr::binop(&op, acc, rhs))
        };
        Ok(combined)
    }

    fn application(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            e = Expr::app(e, arg);
        }
        Ok(e)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Some(TokenKind::Ident(_) | TokenKind::Int(_) | TokenKind::LParen | TokenKind::LBracket)
        )
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(TokenKind::Ident(name)) => {
                self.pos += 1;
                Ok(Expr::var(name.clone()))
            }
            Some(TokenKind::Int(n)) => {
                self.pos += 1;
                Ok(Expr::lit(*n))
            }
            Some(TokenKind::LParen) => {
                self.pos += 1;
                if let (Some(TokenKind::Op(op)), Some(TokenKind::RParen)) = (self.peek(), self.peek_at(1)) {
                    self.pos += 2;
                    return Ok(Expr::var(op.clone()));
                }
                if let Some(TokenKind::Op(op)) = self.peek() {
                    return Err(self.error_here(format!("operator sections like `({op} ...)` are not supported")));
                }
                if self.peek() == Some(&TokenKind::RParen) {
                    return Err(self.error_here("the unit value `()` is not supported"));
                }
                let e = self.expr()?;
                match self.peek() {
                    Some(TokenKind::RParen) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    Some(TokenKind::Comma) => Err(self.error_here("tuples are not supported")),
                    Some(TokenKind::Op(op)) => Err(self.error_here(format!(
                        "operator sections like `(... {op})` are not supported"
                    ))),
                    _ => Err(self.unexpected("`)`")),
                }
            }
            Some(TokenKind::LBracket) => {
                self.pos += 1;
                let mut items = Vec::new();
                if self.peek() == Some(&TokenKind::RBracket) {
                    self.pos += 1;
                    return Ok(Expr::nil());
                }
                loop {
                    items.push(self.expr()?);
                    match self.peek() {
                        Some(TokenKind::Comma) => self.pos += 1,
                        Some(TokenKind::RBracket) => {
                            self.pos += 1;
                            break;
                        }
                        Some(TokenKind::Op(op)) if op == "." => {
                            return Err(self.error_here("arithmetic sequences are not supported"))
                        }
                        _ => return Err(self.unexpected("`,` or `]`")),
                    }
                }
                Ok(Expr::list(items))
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_example() {
        let e = parse("sum ([3,7] ++ [5])").unwrap();
        let expected = Expr::app(
            Expr::var("sum"),
            Expr::binop(
                "++",
                Expr::cons(Expr::lit(3), Expr::cons(Expr::lit(7), Expr::nil())),
                Expr::cons(Expr::lit(5), Expr::nil()),
            ),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn literals_and_lambdas() {
        assert_eq!(parse("0").unwrap(), Expr::lit(0));
        assert_eq!(parse("-4").unwrap(), Expr::lit(-4));
        assert_eq!(parse("f (-4)").unwrap(), Expr::app(Expr::var("f"), Expr::lit(-4)));
        assert_eq!(
            parse("(\\x -> x) 3").unwrap(),
            Expr::app(Expr::abs("x", Expr::var("x")), Expr::lit(3))
        );
        assert_eq!(
            parse("\\x y -> x").unwrap(),
            Expr::abs("x", Expr::abs("y", Expr::var("x")))
        );
    }

    #[test]
    fn sections_and_primes() {
        assert_eq!(parse("(+)").unwrap(), Expr::var("+"));
        assert_eq!(parse("(:) 1").unwrap(), Expr::app(Expr::var(":"), Expr::lit(1)));
        assert_eq!(parse("sum'' []").unwrap(), Expr::app(Expr::var("sum''"), Expr::nil()));
    }

    #[test]
    fn operator_chains() {
        let l = parse("1 + 2 + 3").unwrap();
        assert_eq!(l, Expr::binop("+", Expr::binop("+", Expr::lit(1), Expr::lit(2)), Expr::lit(3)));
        let r = parse("1 : 2 : []").unwrap();
        assert_eq!(r, Expr::list([Expr::lit(1), Expr::lit(2)]));
        assert!(parse("1 : [2] ++ [3]").is_err());
        assert_eq!(parse("f 1 - 2").unwrap(), Expr::binop("-", Expr::app(Expr::var("f"), Expr::lit(1)), Expr::lit(2)));
    }

    #[test]
    fn rejects_constructs_outside_the_subset() {
        for src in [
            "let x = 1 in x",
            "case xs of [] -> 0",
            "[x | x <- xs]",
            "if b then 1 else 2",
            "(1, 2)",
            "(+ 1)",
            "f $ x",
            "",
            "(1",
        ] {
            let err = parse(src).unwrap_err();
            assert!(err.line >= 1 && err.column >= 1, "{src}: {err}");
        }
    }

    #[test]
    fn error_positions() {
        let err = parse("foo (let)").unwrap_err();
        assert_eq!((err.line, err.column), (1, 6));
        let err = parse("f x )").unwrap_err();
        assert_eq!(err.column, 5);
    }
}
