//! The split construction and the quasi-disjoint normal form.

use std::collections::BTreeSet;

use super::CoreExpr;
use crate::classify::check_subword_marked;
use crate::error::{Error, Result};
use crate::nfa::{Builder, Nfa, StateId, DEFAULT_MAX_STATES};
use crate::symbol::{Alphabet, ExtSymbol, VarId};

/// Names `x_1 … x_m` for the pieces of `x`, made distinct from the other
/// variables of `alphabet`.
pub fn piece_names(alphabet: &Alphabet, x: &str, m: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(m);
    for j in 1..=m {
        let name = alphabet.fresh_name(&format!("{x}_{j}"), &out);
        out.push(name);
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Phase {
    /// only foreign markers read in the current piece
    Lead,
    /// the piece started right after a terminal; a foreign marker must
    /// come before the next terminal
    Must,
    /// a terminal has been read
    Body,
    /// foreign markers after a terminal; the next terminal needs a new piece
    Trail,
}

/// Replaces every capture of `x` by `mcount` consecutive captures
/// `x_1 … x_mcount` whose contents are of the form `Γ* Σ* Γ*` over the
/// other variables. Cuts only fall on positions that carry a marker, so
/// splitting several variables in turn keeps every piece free of the
/// other pieces' boundaries. Returns the automaton and the piece names.
///
/// Fusing the pieces back gives the original relation as soon as
/// `mcount ≥ 2|X| − 1`: a capture of `x` has at most `2|X| − 2` foreign
/// marker blocks between letters. Fewer pieces drop the tuples whose
/// capture needs more cuts.
pub fn split(m: &Nfa, x: &str, mcount: usize) -> Result<(Nfa, Vec<String>)> {
    split_capped(m, x, mcount, DEFAULT_MAX_STATES)
}

pub fn split_capped(m: &Nfa, x: &str, mcount: usize, cap: usize) -> Result<(Nfa, Vec<String>)> {
    if mcount == 0 {
        return Err(Error::invalid("split needs at least one piece"));
    }
    let c = check_subword_marked(m)?;
    if !c.holds {
        return Err(Error::pre(format!(
            "split needs a subword-marked language: {}",
            c.describe(m.alphabet()).unwrap_or_default()
        )));
    }
    let a = m.alphabet();
    let xi = a.var_id(x)?;
    if m.transitions().iter().any(|t| t.label == Some(ExtSymbol::Ref(xi))) {
        return Err(Error::pre(format!("split variable {x} is referenced")));
    }
    let pieces = piece_names(a, x, mcount);
    let mut vars: Vec<String> = a.vars.iter().filter(|v| v.as_str() != x).cloned().collect();
    let base = vars.len();
    vars.extend(pieces.iter().cloned());
    let b = Alphabet::new(a.sigma.clone(), vars)?;
    let rename = |y: VarId| if y < xi { y } else { y - 1 };
    let piece = |j: usize| base + j;
    let map = |s: ExtSymbol| match s {
        ExtSymbol::Open(y) => ExtSymbol::Open(rename(y)),
        ExtSymbol::Close(y) => ExtSymbol::Close(rename(y)),
        ExtSymbol::Ref(y) => ExtSymbol::Ref(rename(y)),
        t => t,
    };
    let m = m.trim();
    type Key = (StateId, Option<(usize, Phase)>);
    let mut bld: Builder<Key> = Builder::new(b, (m.initial(), None), cap);
    while let Some((id, (q, inside))) = bld.next_key() {
        if m.is_final(q) && inside.is_none() {
            bld.nfa.set_final(id);
        }
        if let Some((j, ph)) = inside {
            if j + 1 < mcount {
                let next = if ph == Phase::Body || ph == Phase::Must { Phase::Must } else { Phase::Lead };
                let to = bld.state((q, Some((j + 1, next))))?;
                bld.chain(id, &[ExtSymbol::Close(piece(j)), ExtSymbol::Open(piece(j + 1))], to);
            }
        }
        for &(l, r) in m.out(q) {
            match (inside, l) {
                (_, None) => {
                    let to = bld.state((r, inside))?;
                    bld.nfa.add_transition(id, None, to);
                }
                (None, Some(ExtSymbol::Open(y))) if y == xi => {
                    let to = bld.state((r, Some((0, Phase::Lead))))?;
                    bld.nfa.add_transition(id, Some(ExtSymbol::Open(piece(0))), to);
                }
                (None, Some(s)) => {
                    let to = bld.state((r, None))?;
                    bld.nfa.add_transition(id, Some(map(s)), to);
                }
                (Some((j, _)), Some(ExtSymbol::Close(y))) if y == xi => {
                    let mut labels = vec![ExtSymbol::Close(piece(j))];
                    for k in j + 1..mcount {
                        labels.push(ExtSymbol::Open(piece(k)));
                        labels.push(ExtSymbol::Close(piece(k)));
                    }
                    let to = bld.state((r, None))?;
                    bld.chain(id, &labels, to);
                }
                (Some((j, ph)), Some(s)) => {
                    let next = if s.is_marker() {
                        match ph {
                            Phase::Lead | Phase::Must => Phase::Lead,
                            _ => Phase::Trail,
                        }
                    } else if ph == Phase::Trail || ph == Phase::Must {
                        continue;
                    } else {
                        Phase::Body
                    };
                    let to = bld.state((r, Some((j, next))))?;
                    bld.nfa.add_transition(id, Some(map(s)), to);
                }
            }
        }
    }
    Ok((bld.finish().trim(), pieces))
}

/// Splits every variable with the default width `|X|²`.
pub fn quasi_disjoint_normal_form(e: &CoreExpr) -> Result<CoreExpr> {
    let n = e.nfa.num_vars();
    quasi_disjoint_normal_form_with(e, (n * n).max(1))
}

/// Splits every variable into `width` pieces, rewrites each selection
/// class into one class per piece index and fuses the pieces back.
pub fn quasi_disjoint_normal_form_with(e: &CoreExpr, width: usize) -> Result<CoreExpr> {
    e.validate()?;
    if !e.fuse.is_empty() {
        return Err(Error::pre("quasi-disjoint normal form needs an expression without fusion"));
    }
    let mut nfa = e.nfa.clone();
    let mut fuse = Vec::new();
    let mut pieces_of = std::collections::BTreeMap::new();
    for x in e.nfa.vars() {
        let (next, pieces) = split(&nfa, x, width)?;
        nfa = next;
        fuse.push((pieces.iter().cloned().collect::<BTreeSet<String>>(), x.clone()));
        pieces_of.insert(x.clone(), pieces);
    }
    let mut select = Vec::new();
    for class in &e.select {
        for j in 0..width {
            select.push(class.iter().map(|x| pieces_of[x][j].clone()).collect());
        }
    }
    Ok(CoreExpr {
        nfa,
        select,
        fuse,
        project: e.project.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{eval_core, fuse_relation};
    use crate::eval::evaluate;
    use crate::refx::compile_str;

    fn words(sigma: &[char], max: usize) -> Vec<String> {
        let mut out = vec![String::new()];
        let mut layer = vec![String::new()];
        for _ in 0..max {
            layer = layer
                .iter()
                .flat_map(|w| sigma.iter().map(move |c| format!("{w}{c}")))
                .collect();
            out.extend(layer.iter().cloned());
        }
        out
    }

    fn check_split(m: &Nfa, x: &str, width: usize, max: usize) {
        let (s, pieces) = split(m, x, width).unwrap();
        let fusion = vec![(pieces.into_iter().collect(), x.to_string())];
        for w in words(&m.alphabet().sigma, max) {
            let want = evaluate(m, &w).unwrap();
            let got = fuse_relation(&evaluate(&s, &w).unwrap(), &fusion).unwrap();
            assert_eq!(want.tuples, got.tuples, "{w}");
        }
    }

    #[test]
    fn split_preserves_fused_semantics() {
        let m = compile_str("x{a* y{b} a*} b*", "ab").unwrap();
        check_split(&m, "x", 4, 4);
        check_split(&m, "y", 4, 4);
        check_split(&compile_str("x{a*} y{b}", "ab").unwrap(), "x", 1, 4);
        let m = compile_str("x{a y{a} a}|x{b}", "ab").unwrap();
        check_split(&m, "x", 3, 4);
    }

    #[test]
    fn split_without_variable_keeps_language() {
        let m = compile_str("x{a} b | b", "ab").unwrap();
        let (s, pieces) = split(&m, "x", 2).unwrap();
        assert_eq!(pieces, vec!["x_1", "x_2"]);
        // the cut between the two pieces may come before or after the a
        assert_eq!(s.enumerate_words(8).len(), 3);
        assert!(split(&m, "z", 2).is_err());
    }

    #[test]
    fn fusion_example_language() {
        // x{a*} y{b*} z{a*} fused by {x,y}→u and {y,z}→v
        let m = compile_str("x{a*} y{b*} z{a*}", "ab").unwrap();
        let e = CoreExpr {
            fuse: vec![
                (["x", "y"].iter().map(|s| s.to_string()).collect(), "u".into()),
                (["y", "z"].iter().map(|s| s.to_string()).collect(), "v".into()),
            ],
            project: vec!["u".into(), "v".into()],
            ..CoreExpr::regular(m)
        };
        let r = eval_core(&e, "aabaaa").unwrap();
        assert_eq!(r.render(), "(u ↦ [1,4⟩, v ↦ [3,7⟩)\n");
    }

    #[test]
    fn normal_form_semantics() {
        let m = compile_str("x{a*|b*} c y{a*|b*}", "abc").unwrap();
        let e = CoreExpr {
            select: vec![["x", "y"].iter().map(|s| s.to_string()).collect()],
            ..CoreExpr::regular(m)
        };
        let q = quasi_disjoint_normal_form(&e).unwrap();
        assert_eq!(q.select.len(), 4);
        for w in words(&['a', 'b', 'c'], 4) {
            assert_eq!(eval_core(&e, &w).unwrap().tuples, eval_core(&q, &w).unwrap().tuples, "{w}");
        }
    }
}
