use super::{is_operator_name, Expr};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Position {
    Top,
    Operand,
    Function,
    Argument,
}

/// Renders an expression in textbook style: list notation for complete
/// lists, explicit parentheses around nested operators, sections for
/// unsaturated operators.
pub fn pretty(e: &Expr) -> String {
    let mut out = String::new();
    render(e, Position::Top, &mut out);
    out
}

fn binary_operator(e: &Expr) -> Option<(&str, &Expr, &Expr)> {
    let (head, args) = e.spine();
    match (head, args.as_slice()) {
        (Expr::Var(op), [l, r]) if is_operator_name(op) => Some((op.as_str(), l, r)),
        _ => None,
    }
}

fn render(e: &Expr, pos: Position, out: &mut String) {
    match e {
        Expr::Lit(n) => {
            if *n < 0 && matches!(pos, Position::Function | Position::Argument) {
                out.push_str(&format!("({n})"));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Expr::Var(name) => {
            if is_operator_name(name) {
                out.push('(');
                out.push_str(name);
                out.push(')');
            } else {
                out.push_str(name);
            }
        }
        Expr::Abs(..) => {
            let parens = pos != Position::Top;
            if parens {
                out.push('(');
            }
            let mut binders = Vec::new();
            let mut body = e;
            while let Expr::Abs(x, b) = body {
                binders.push(x.as_str());
                body = b;
            }
            out.push('\\');
            out.push_str(&binders.join(" "));
            out.push_str(" -> ");
            render(body, Position::Top, out);
            if parens {
                out.push(')');
            }
        }
        Expr::App(f, a) => {
            if let Some(items) = e.as_list() {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    render(item, Position::Top, out);
                }
                out.push(']');
                return;
            }
            if let Some((op, l, r)) = binary_operator(e) {
                let parens = pos != Position::Top;
                if parens {
                    out.push('(');
                }
                render(l, Position::Operand, out);
                out.push(' ');
                out.push_str(op);
                out.push(' ');
                render(r, Position::Operand, out);
                if parens {
                    out.push(')');
                }
                return;
            }
            let parens = pos == Position::Argument;
            if parens {
                out.push('(');
            }
            render(f, Position::Function, out);
            out.push(' ');
            render(a, Position::Argument, out);
            if parens {
                out.push(')');
            }
        }
    }
}
