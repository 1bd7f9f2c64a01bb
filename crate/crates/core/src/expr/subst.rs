use std::collections::{BTreeMap, BTreeSet};

use super::Expr;

/// Capture-avoiding substitution of `replacement` for the free occurrences
/// of `binder` in `body`.
pub fn substitute(binder: &str, replacement: &Expr, body: &Expr) -> Expr {
    let mut map = BTreeMap::new();
    map.insert(binder.to_string(), replacement.clone());
    substitute_many(&map, body)
}

/// Simultaneous capture-avoiding substitution.
pub fn substitute_many(map: &BTreeMap<String, Expr>, body: &Expr) -> Expr {
    if map.is_empty() {
        return body.clone();
    }
    let replacement_fvs: BTreeSet<String> = map.values().flat_map(|e| e.free_vars()).collect();
    go(map, &replacement_fvs, body)
}

fn go(map: &BTreeMap<String, Expr>, replacement_fvs: &BTreeSet<String>, e: &Expr) -> Expr {
    match e {
        Expr::Var(s) => map.get(s).cloned().unwrap_or_else(|| e.clone()),
        Expr::Lit(_) => e.clone(),
        Expr::App(f, a) => Expr::app(go(map, replacement_fvs, f), go(map, replacement_fvs, a)),
        Expr::Abs(x, b) => {
            let mut inner = map.clone();
            inner.remove(x);
            if inner.is_empty() {
                return e.clone();
            }
            // Only entries whose variable actually occurs free in the body matter.
            inner.retain(|k, _| b.occurs_free(k));
            if inner.is_empty() {
                return e.clone();
            }
            let captured = inner.values().any(|r| r.occurs_free(x));
            if captured {
                let mut avoid: BTreeSet<String> = replacement_fvs.clone();
                avoid.extend(b.free_vars());
                avoid.extend(inner.keys().cloned());
                let fresh = fresh_name(x, &avoid);
                let renamed = substitute(x, &Expr::var(fresh.clone()), b);
                let fvs: BTreeSet<String> = inner.values().flat_map(|e| e.free_vars()).collect();
                Expr::abs(fresh, go(&inner, &fvs, &renamed))
            } else {
                let fvs: BTreeSet<String> = inner.values().flat_map(|e| e.free_vars()).collect();
                Expr::abs(x.clone(), go(&inner, &fvs, b))
            }
        }
    }
}

/// `base` followed by the smallest positive integer suffix not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    (1u64..)
        .map(|n| format!("{base}{n}"))
        .find(|candidate| !avoid.contains(candidate))
        .expect("unbounded suffix space")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_binders() {
        let body = Expr::binop("+", Expr::var("x"), Expr::var("x"));
        assert_eq!(
            substitute("x", &Expr::lit(3), &body),
            Expr::binop("+", Expr::lit(3), Expr::lit(3))
        );
    }

    #[test]
    fn shadowed_binder_is_untouched() {
        let body = Expr::abs("x", Expr::var("x"));
        assert_eq!(substitute("x", &Expr::lit(1), &body), body);
    }

    #[test]
    fn capture_renames_with_smallest_suffix() {
        let body = Expr::abs("y", Expr::var("x"));
        let out = substitute("x", &Expr::var("y"), &body);
        assert_eq!(out, Expr::abs("y1", Expr::var("y")));
        assert_eq!(out.free_vars().into_iter().collect::<Vec<_>>(), vec!["y".to_string()]);

        let body = Expr::abs("y", Expr::app(Expr::var("x"), Expr::var("y1")));
        let out = substitute("x", &Expr::var("y"), &body);
        assert_eq!(out, Expr::abs("y2", Expr::app(Expr::var("y"), Expr::var("y1"))));
    }
}
