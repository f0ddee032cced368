//! Compilers between core spanners and refl-spanners.

use std::collections::BTreeSet;

use super::split::piece_names;
use super::{CoreExpr, Fusion};
use crate::classify::{check_subword_marked, monitor_violation, structural_reference_bounds};
use crate::error::{Error, Result};
use crate::eval::require_ref_language;
use crate::nfa::{Builder, Nfa, StateId, DEFAULT_MAX_STATES};
use crate::span::SpanTuple;
use crate::symbol::{Alphabet, ExtSymbol, VarId};
use crate::word::{deref_tuple, raw_to_tuple};

/// Outcome of the overlap check of a core expression's selections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overlap {
    pub holds: bool,
    /// A document, a tuple of the regular spanner on it and two selection
    /// variables whose spans share a position.
    pub witness: Option<(String, SpanTuple, String, String)>,
}

/// Whether no two selection variables ever capture spans sharing a
/// position (spans read as position sets, so empty spans never overlap).
pub fn check_non_overlapping(e: &CoreExpr) -> Result<Overlap> {
    e.validate()?;
    let m = &e.nfa;
    let c = check_subword_marked(m)?;
    if !c.holds {
        return Err(Error::pre(format!(
            "overlap check needs a subword-marked language: {}",
            c.describe(m.alphabet()).unwrap_or_default()
        )));
    }
    if m.num_vars() > 64 {
        return Err(Error::resource("overlap check supports at most 64 variables"));
    }
    let mut sel = 0u64;
    for v in e.select.iter().flatten() {
        sel |= 1 << m.alphabet().var_id(v)?;
    }
    let names = m.vars().to_vec();
    let step = |open: &u64, s: ExtSymbol| -> std::result::Result<u64, String> {
        match s {
            ExtSymbol::Open(x) if sel & (1 << x) != 0 => Ok(open | (1 << x)),
            ExtSymbol::Close(x) => Ok(open & !(1 << x)),
            ExtSymbol::Term(_) if open.count_ones() >= 2 => {
                let a = open.trailing_zeros() as usize;
                let b = (open & !(1 << a)).trailing_zeros() as usize;
                Err(format!("{} {}", names[a], names[b]))
            }
            _ => Ok(*open),
        }
    };
    let found = monitor_violation(m, 0u64, step, |_| None, DEFAULT_MAX_STATES)?;
    Ok(match found {
        None => Overlap {
            holds: true,
            witness: None,
        },
        Some((w, pair)) => {
            let (doc, raw) = deref_tuple(&w, m.num_vars())?;
            let (a, b) = pair.split_once(' ').expect("pair");
            Overlap {
                holds: false,
                witness: Some((doc, raw_to_tuple(&raw, m.alphabet()), a.to_string(), b.to_string())),
            }
        }
    })
}

/// A refl-spanner with the fusion and projection that recover a core
/// spanner: `π_Y ⊔_Λ ⟦L(nfa)⟧`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReflForm {
    pub nfa: Nfa,
    pub fuse: Vec<Fusion>,
    pub project: Vec<String>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Flat {
    Run(StateId, u64),
    Done,
}

/// Rewrites `n` so that, inside every maximal marker factor, the markers of
/// `zs` come last and in the order: closings, empty captures, openings.
/// Every member capture then starts and ends right next to terminals.
fn flatten_members(n: &Nfa, zs: &[VarId], cap: usize) -> Result<Nfa> {
    let member = |v: VarId| zs.iter().position(|&z| z == v);
    let flush = |buf: u64| -> Vec<ExtSymbol> {
        let has = |i: usize, open: bool| buf & (1 << (2 * i + usize::from(!open))) != 0;
        let mut out = Vec::new();
        for (i, &z) in zs.iter().enumerate() {
            if has(i, false) && !has(i, true) {
                out.push(ExtSymbol::Close(z));
            }
        }
        for (i, &z) in zs.iter().enumerate() {
            if has(i, true) && has(i, false) {
                out.push(ExtSymbol::Open(z));
                out.push(ExtSymbol::Close(z));
            }
        }
        for (i, &z) in zs.iter().enumerate() {
            if has(i, true) && !has(i, false) {
                out.push(ExtSymbol::Open(z));
            }
        }
        out
    };
    let mut bld: Builder<Flat> = Builder::new(n.alphabet().clone(), Flat::Run(n.initial(), 0), cap);
    while let Some((id, key)) = bld.next_key() {
        let Flat::Run(q, buf) = key else {
            bld.nfa.set_final(id);
            continue;
        };
        if n.is_final(q) {
            let done = bld.state(Flat::Done)?;
            bld.chain(id, &flush(buf), done);
        }
        for &(l, r) in n.out(q) {
            match l {
                Some(ExtSymbol::Open(y)) if member(y).is_some() => {
                    let to = bld.state(Flat::Run(r, buf | 1 << (2 * member(y).expect("member"))))?;
                    bld.nfa.add_transition(id, None, to);
                }
                Some(ExtSymbol::Close(y)) if member(y).is_some() => {
                    let to = bld.state(Flat::Run(r, buf | 1 << (2 * member(y).expect("member") + 1)))?;
                    bld.nfa.add_transition(id, None, to);
                }
                Some(s @ (ExtSymbol::Term(_) | ExtSymbol::Ref(_))) => {
                    let to = bld.state(Flat::Run(r, 0))?;
                    let mut labels = flush(buf);
                    labels.push(s);
                    bld.chain(id, &labels, to);
                }
                _ => {
                    let to = bld.state(Flat::Run(r, buf))?;
                    bld.nfa.add_transition(id, l, to);
                }
            }
        }
    }
    Ok(bld.finish().trim())
}

/// Why the lock-step construction would lose tuples of `n` for `zs`: two
/// members sharing a position, or a reference inside a member.
fn class_obstacle(n: &Nfa, zs: &[VarId], cap: usize) -> Result<Option<String>> {
    let mask: u64 = zs.iter().map(|&z| 1u64 << z).sum();
    let names = n.vars().to_vec();
    let step = |open: &u64, s: ExtSymbol| -> std::result::Result<u64, String> {
        match s {
            ExtSymbol::Open(x) if mask & (1 << x) != 0 => Ok(open | (1 << x)),
            ExtSymbol::Close(x) => Ok(open & !(1 << x)),
            ExtSymbol::Term(_) if open.count_ones() >= 2 => Err("two members share a position".into()),
            ExtSymbol::Ref(y) if *open != 0 => Err(format!(
                "{} refers to {} inside a member",
                names[open.trailing_zeros() as usize], names[y]
            )),
            _ => Ok(*open),
        }
    };
    Ok(monitor_violation(n, 0u64, step, |_| None, cap)?.map(|(_, why)| why))
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Copy {
    d: usize,
    s: StateId,
    c: StateId,
    /// foreign markers read by the copy, tagged with the number of pieces
    /// before them
    tags: Vec<(usize, ExtSymbol)>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Pending {
    d: usize,
    s: StateId,
    t: StateId,
    tags: Vec<(usize, ExtSymbol)>,
    pieces: usize,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct AnchorState {
    q: StateId,
    a: usize,
    copies: Vec<Copy>,
    piece: usize,
    started: bool,
    cut: bool,
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum St {
    Pre(StateId),
    /// every defined member is empty; holds the member just opened
    Empty(StateId, Option<usize>),
    Anchor(Box<AnchorState>),
    /// after the anchor closed: pending copies and the anchor
    Post(StateId, Vec<Pending>, usize),
}

/// Incorporates the selection over `class` into `n` by references. Every
/// member is replaced by up to `width` pieces; the first member keeps its
/// content (cut wherever some member has a foreign marker) and every later
/// member refers to the corresponding pieces. Later members are verified by
/// copies of `n` running in lock-step with the first one.
fn incorporate(n: &Nfa, class: &[String], width: usize, cap: usize) -> Result<(Nfa, Vec<Vec<String>>)> {
    let a = n.alphabet();
    let zs: Vec<VarId> = class.iter().map(|z| a.var_id(z)).collect::<Result<_>>()?;
    if zs.len() > 32 {
        return Err(Error::resource("selection class too large"));
    }
    let n = flatten_members(n, &zs, cap)?;
    if let Some(why) = class_obstacle(&n, &zs, cap)? {
        return Err(Error::Overlap(format!("selection {{{}}}: {why}", class.join(","))));
    }
    let member = |v: VarId| zs.iter().position(|&z| z == v);
    let mut vars: Vec<String> = a.vars.iter().filter(|v| !class.contains(v)).cloned().collect();
    let keep: Vec<Option<VarId>> = a.vars.iter().map(|v| vars.iter().position(|w| w == v)).collect();
    let mut pieces = Vec::new();
    let mut taken: Vec<String> = Vec::new();
    for z in class {
        let mut names = piece_names(a, z, width);
        for nm in names.iter_mut() {
            *nm = a.fresh_name(nm, &taken);
            taken.push(nm.clone());
        }
        pieces.push(names);
    }
    let base = vars.len();
    for names in &pieces {
        vars.extend(names.iter().cloned());
    }
    let b = Alphabet::new(a.sigma.clone(), vars)?;
    let piece = |i: usize, j: usize| base + i * width + j;
    let map = |s: ExtSymbol| match s {
        ExtSymbol::Open(y) => ExtSymbol::Open(keep[y].expect("foreign variable")),
        ExtSymbol::Close(y) => ExtSymbol::Close(keep[y].expect("foreign variable")),
        ExtSymbol::Ref(y) => ExtSymbol::Ref(keep[y].expect("foreign variable")),
        t => t,
    };
    let is_member_marker = |s: ExtSymbol| match s {
        ExtSymbol::Open(y) | ExtSymbol::Close(y) => member(y).is_some(),
        _ => false,
    };
    let mut open_targets: Vec<Vec<StateId>> = vec![Vec::new(); zs.len()];
    for t in n.transitions() {
        if let Some(ExtSymbol::Open(y)) = t.label {
            if let Some(i) = member(y) {
                if !open_targets[i].contains(&t.to) {
                    open_targets[i].push(t.to);
                }
            }
        }
    }
    let closes = |q: StateId, i: usize| -> Vec<StateId> {
        n.out(q)
            .iter()
            .filter(|(l, _)| *l == Some(ExtSymbol::Close(zs[i])))
            .map(|&(_, r)| r)
            .collect()
    };
    let replay = |p: &Pending, anchor: usize| -> Vec<ExtSymbol> {
        let mut out = Vec::new();
        for k in 0..=p.pieces {
            out.extend(p.tags.iter().filter(|(t, _)| *t == k).map(|&(_, s)| s));
            if k < p.pieces {
                out.push(ExtSymbol::Open(piece(p.d, k)));
                out.push(ExtSymbol::Ref(piece(anchor, k)));
                out.push(ExtSymbol::Close(piece(p.d, k)));
            }
        }
        out
    };

    let mut bld: Builder<St> = Builder::new(b, St::Pre(n.initial()), cap);
    while let Some((id, st)) = bld.next_key() {
        match st {
            St::Pre(q) => {
                if n.is_final(q) {
                    bld.nfa.set_final(id);
                }
                for &(l, r) in n.out(q) {
                    match l {
                        Some(ExtSymbol::Open(y)) if member(y).is_some() => {
                            let ai = member(y).expect("member");
                            let to = bld.state(St::Empty(r, Some(ai)))?;
                            bld.nfa.add_transition(id, Some(ExtSymbol::Open(piece(ai, 0))), to);
                            let others: Vec<usize> = (0..zs.len()).filter(|&i| i != ai).collect();
                            for mask in 0u64..(1 << others.len()) {
                                // start states for every chosen member
                                let mut assigns: Vec<Vec<Copy>> = vec![Vec::new()];
                                for (k, &d) in others.iter().enumerate() {
                                    if mask & (1 << k) == 0 {
                                        continue;
                                    }
                                    let mut next = Vec::new();
                                    for v in &assigns {
                                        for &s in &open_targets[d] {
                                            let mut v = v.clone();
                                            v.push(Copy { d, s, c: s, tags: Vec::new() });
                                            next.push(v);
                                        }
                                    }
                                    assigns = next;
                                }
                                for copies in assigns {
                                    let to = bld.state(St::Anchor(Box::new(AnchorState {
                                        q: r,
                                        a: ai,
                                        copies,
                                        piece: 0,
                                        started: false,
                                        cut: false,
                                    })))?;
                                    bld.nfa.add_transition(id, Some(ExtSymbol::Open(piece(ai, 0))), to);
                                }
                            }
                        }
                        Some(s) if is_member_marker(s) => {}
                        _ => {
                            let to = bld.state(St::Pre(r))?;
                            bld.nfa.add_transition(id, l.map(map), to);
                        }
                    }
                }
            }
            St::Empty(q, open) => {
                if n.is_final(q) && open.is_none() {
                    bld.nfa.set_final(id);
                }
                for &(l, r) in n.out(q) {
                    let (next, label) = match (open, l) {
                        (_, None) => (open, None),
                        (Some(i), Some(ExtSymbol::Close(y))) if member(y) == Some(i) => {
                            (None, Some(ExtSymbol::Close(piece(i, 0))))
                        }
                        (Some(_), _) => continue,
                        (None, Some(ExtSymbol::Open(y))) if member(y).is_some() => {
                            let i = member(y).expect("member");
                            (Some(i), Some(ExtSymbol::Open(piece(i, 0))))
                        }
                        (None, Some(s)) if is_member_marker(s) => continue,
                        (None, Some(s)) => (None, Some(map(s))),
                    };
                    let to = bld.state(St::Empty(r, next))?;
                    bld.nfa.add_transition(id, label, to);
                }
            }
            St::Post(q, pend, anchor) => {
                if n.is_final(q) && pend.is_empty() {
                    bld.nfa.set_final(id);
                }
                for &(l, r) in n.out(q) {
                    match l {
                        Some(ExtSymbol::Open(y)) if member(y).is_some() => {
                            let d = member(y).expect("member");
                            let Some(k) = pend.iter().position(|p| p.d == d && p.s == r) else {
                                continue;
                            };
                            let p = &pend[k];
                            let labels = replay(p, anchor);
                            for r2 in closes(p.t, d) {
                                let mut rest = pend.clone();
                                rest.remove(k);
                                let to = bld.state(St::Post(r2, rest, anchor))?;
                                bld.chain(id, &labels, to);
                            }
                        }
                        Some(s) if is_member_marker(s) => {}
                        _ => {
                            let to = bld.state(St::Post(r, pend.clone(), anchor))?;
                            bld.nfa.add_transition(id, l.map(map), to);
                        }
                    }
                }
            }
            St::Anchor(st) => {
                let add = |bld: &mut Builder<St>, next: AnchorState, labels: &[ExtSymbol]| -> Result<()> {
                    let to = bld.state(St::Anchor(Box::new(next)))?;
                    bld.chain(id, labels, to);
                    Ok(())
                };
                for &(l, r) in n.out(st.q) {
                    match l {
                        None => add(&mut bld, AnchorState { q: r, ..(*st).clone() }, &[])?,
                        Some(ExtSymbol::Close(y)) if member(y) == Some(st.a) => {
                            if !st.started || st.copies.iter().any(|c| closes(c.c, c.d).is_empty()) {
                                continue;
                            }
                            let pend: Vec<Pending> = st
                                .copies
                                .iter()
                                .map(|c| Pending {
                                    d: c.d,
                                    s: c.s,
                                    t: c.c,
                                    tags: c.tags.clone(),
                                    pieces: st.piece + 1,
                                })
                                .collect();
                            let to = bld.state(St::Post(r, pend, st.a))?;
                            bld.nfa.add_transition(id, Some(ExtSymbol::Close(piece(st.a, st.piece))), to);
                        }
                        Some(s @ (ExtSymbol::Open(_) | ExtSymbol::Close(_))) if !is_member_marker(s) => {
                            let next = AnchorState {
                                q: r,
                                cut: st.cut || st.started,
                                ..(*st).clone()
                            };
                            add(&mut bld, next, &[map(s)])?;
                        }
                        _ => {}
                    }
                }
                for (k, c) in st.copies.iter().enumerate() {
                    for &(l, r) in n.out(c.c) {
                        let mut next = (*st).clone();
                        match l {
                            None => next.copies[k].c = r,
                            Some(s @ (ExtSymbol::Open(_) | ExtSymbol::Close(_))) if !is_member_marker(s) => {
                                next.copies[k].c = r;
                                let tag = if st.started { st.piece + 1 } else { 0 };
                                next.copies[k].tags.push((tag, map(s)));
                                next.cut = st.cut || st.started;
                            }
                            _ => continue,
                        }
                        add(&mut bld, next, &[])?;
                    }
                }
                // a terminal read by the main run and every copy at once
                let piece_idx = if st.cut { st.piece + 1 } else { st.piece };
                if piece_idx >= width {
                    continue;
                }
                for &sigma in &n.alphabet().sigma {
                    let step = |q: StateId| -> Vec<StateId> {
                        n.out(q)
                            .iter()
                            .filter(|(l, _)| *l == Some(ExtSymbol::Term(sigma)))
                            .map(|&(_, r)| r)
                            .collect()
                    };
                    let mains = step(st.q);
                    if mains.is_empty() {
                        continue;
                    }
                    let mut combos: Vec<Vec<StateId>> = vec![Vec::new()];
                    for c in &st.copies {
                        let succ = step(c.c);
                        combos = combos
                            .into_iter()
                            .flat_map(|v| {
                                succ.iter().map(move |&r| {
                                    let mut v = v.clone();
                                    v.push(r);
                                    v
                                })
                            })
                            .collect();
                    }
                    let mut labels = Vec::new();
                    if st.cut {
                        labels.push(ExtSymbol::Close(piece(st.a, st.piece)));
                        labels.push(ExtSymbol::Open(piece(st.a, piece_idx)));
                    }
                    labels.push(ExtSymbol::Term(sigma));
                    for &r in &mains {
                        for combo in &combos {
                            let mut next = (*st).clone();
                            next.q = r;
                            for (c, &cr) in next.copies.iter_mut().zip(combo) {
                                c.c = cr;
                            }
                            next.piece = piece_idx;
                            next.started = true;
                            next.cut = false;
                            add(&mut bld, next, &labels)?;
                        }
                    }
                }
            }
        }
    }
    Ok((bld.finish().trim(), pieces))
}

/// Removes variables that occur on no transition.
fn drop_unused_vars(m: &Nfa) -> Result<Nfa> {
    let a = m.alphabet();
    let mut used = vec![false; a.num_vars()];
    for t in m.transitions() {
        if let Some(x) = t.label.and_then(|s| s.var()) {
            used[x] = true;
        }
    }
    let vars: Vec<String> = a.vars.iter().zip(&used).filter(|(_, &u)| u).map(|(v, _)| v.clone()).collect();
    let b = Alphabet::new(a.sigma.clone(), vars)?;
    let map: Vec<Option<VarId>> = a.vars.iter().map(|v| b.var_index(v)).collect();
    Ok(m.relabel(b, |s| {
        Some(match s {
            ExtSymbol::Open(x) => ExtSymbol::Open(map[x].expect("used")),
            ExtSymbol::Close(x) => ExtSymbol::Close(map[x].expect("used")),
            ExtSymbol::Ref(x) => ExtSymbol::Ref(map[x].expect("used")),
            t => t,
        })
    }))
}

/// Compiles a core expression with non-overlapping selections into a
/// reference-bounded refl-spanner plus fusion and projection.
///
/// Selections that do overlap are still accepted when the classes can be
/// incorporated one after the other such that no class has two members
/// sharing a position or a reference inside a member.
pub fn core_to_refl(e: &CoreExpr) -> Result<ReflForm> {
    core_to_refl_with(e, DEFAULT_MAX_STATES)
}

pub fn core_to_refl_with(e: &CoreExpr, cap: usize) -> Result<ReflForm> {
    if !e.fuse.is_empty() {
        return Err(Error::pre("core_to_refl needs an expression without fusion"));
    }
    let ov = check_non_overlapping(e)?;
    let classes: Vec<Vec<String>> = e.select.iter().map(|c| c.iter().cloned().collect()).collect();
    let mut order: Vec<usize> = (0..classes.len()).collect();
    let mut last_err: String;
    loop {
        match incorporate_all(e, &classes, &order, cap) {
            Ok(f) => return Ok(f),
            Err(Error::Overlap(msg)) if !ov.holds && classes.len() <= 6 => last_err = msg,
            Err(err) => return Err(err),
        }
        if !next_permutation(&mut order) {
            break;
        }
    }
    let (doc, t, x, y) = ov.witness.expect("overlap witness");
    Err(Error::Overlap(format!(
        "{x} and {y} overlap on document {doc:?} with tuple {}; no order of the selections avoids it ({})",
        t.render(e.nfa.vars()),
        last_err
    )))
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("successor");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn incorporate_all(e: &CoreExpr, classes: &[Vec<String>], order: &[usize], cap: usize) -> Result<ReflForm> {
    // a member's content holds at most two marker positions of every other
    // variable, hence at most 2|X| - 1 pieces
    let width = (2 * e.nfa.num_vars()).saturating_sub(1).max(1);
    let mut n = e.nfa.trim();
    let mut fuse: Vec<Fusion> = Vec::new();
    for &i in order {
        let class = &classes[i];
        let (next, pieces) = incorporate(&n, class, width, cap)?;
        n = next;
        for (z, ps) in class.iter().zip(pieces) {
            fuse.push((ps.into_iter().collect(), z.clone()));
        }
    }
    let n = drop_unused_vars(&n)?;
    let fuse: Vec<Fusion> = fuse
        .into_iter()
        .filter_map(|(l, x)| {
            let l: BTreeSet<String> = l.into_iter().filter(|v| n.alphabet().var_index(v).is_some()).collect();
            (!l.is_empty()).then_some((l, x))
        })
        .collect();
    Ok(ReflForm {
        nfa: n,
        fuse,
        project: e.project.clone(),
    })
}

/// Compiles a reference-bounded refl-spanner into a core expression: the
/// `j`-th reference of `x` becomes a fresh capture `x_ref{j}` of any
/// terminal word, selected equal to `x`.
pub fn refl_to_core(m: &Nfa) -> Result<CoreExpr> {
    require_ref_language(m)?;
    let bounds = structural_reference_bounds(m)
        .ok_or_else(|| Error::pre("references are not bounded: a reference lies on a cycle"))?;
    let a = m.alphabet();
    let mut vars = a.vars.clone();
    let mut extra: Vec<Vec<VarId>> = Vec::new();
    let mut taken = Vec::new();
    for (x, &k) in bounds.iter().enumerate() {
        let mut ids = Vec::new();
        for j in 1..=k {
            let name = a.fresh_name(&format!("{}_ref{j}", a.vars[x]), &taken);
            taken.push(name.clone());
            vars.push(name);
            ids.push(vars.len() - 1);
        }
        extra.push(ids);
    }
    let b = Alphabet::new(a.sigma.clone(), vars)?;
    let m = m.trim();
    #[derive(Clone, PartialEq, Eq, Hash)]
    enum K {
        Run(StateId, Vec<u8>),
        Copying(StateId, Vec<u8>),
    }
    let mut bld: Builder<K> = Builder::new(b, K::Run(m.initial(), vec![0; a.num_vars()]), DEFAULT_MAX_STATES);
    while let Some((id, key)) = bld.next_key() {
        match key {
            K::Copying(r, cnt) => {
                for &c in &a.sigma {
                    bld.nfa.add_transition(id, Some(ExtSymbol::Term(c)), id);
                }
                let _ = (r, cnt);
            }
            K::Run(q, cnt) => {
                if m.is_final(q) {
                    bld.nfa.set_final(id);
                }
                for &(l, r) in m.out(q) {
                    match l {
                        Some(ExtSymbol::Ref(x)) => {
                            let j = cnt[x] as usize;
                            if j >= extra[x].len() {
                                continue;
                            }
                            let y = extra[x][j];
                            let mut next = cnt.clone();
                            next[x] += 1;
                            let mid = bld.state(K::Copying(r, next.clone()))?;
                            let to = bld.state(K::Run(r, next))?;
                            bld.nfa.add_transition(id, Some(ExtSymbol::Open(y)), mid);
                            bld.nfa.add_transition(mid, Some(ExtSymbol::Close(y)), to);
                        }
                        _ => {
                            let to = bld.state(K::Run(r, cnt.clone()))?;
                            bld.nfa.add_transition(id, l, to);
                        }
                    }
                }
            }
        }
    }
    let nfa = bld.finish().trim();
    let mut select = Vec::new();
    for (x, ids) in extra.iter().enumerate() {
        if !ids.is_empty() {
            let mut class: BTreeSet<String> = ids.iter().map(|&y| nfa.vars()[y].clone()).collect();
            class.insert(a.vars[x].clone());
            select.push(class);
        }
    }
    Ok(CoreExpr {
        project: a.vars.clone(),
        nfa,
        select,
        fuse: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{eval_core, fuse_relation, rel_project};
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

    fn set(vs: &[&str]) -> BTreeSet<String> {
        vs.iter().map(|s| s.to_string()).collect()
    }

    fn check_forward(e: &CoreExpr, max: usize) {
        let f = core_to_refl(e).unwrap();
        assert!(structural_reference_bounds(&f.nfa).is_some());
        for w in words(&e.nfa.alphabet().sigma, max) {
            let want = eval_core(e, &w).unwrap();
            let got = rel_project(&fuse_relation(&evaluate(&f.nfa, &w).unwrap(), &f.fuse).unwrap(), &f.project);
            assert_eq!(want.tuples, got.tuples, "{w}");
        }
    }

    #[test]
    fn overlap_detection() {
        let m = compile_str("x{a*} y{b*}", "ab").unwrap();
        let e = CoreExpr { select: vec![set(&["x", "y"])], ..CoreExpr::regular(m) };
        assert!(check_non_overlapping(&e).unwrap().holds);
        let m = compile_str("x{a y{a} a}", "a").unwrap();
        let e = CoreExpr { select: vec![set(&["x", "y"])], ..CoreExpr::regular(m.clone()) };
        let o = check_non_overlapping(&e).unwrap();
        assert!(!o.holds);
        let (doc, t, _, _) = o.witness.unwrap();
        assert_eq!(doc, "aaa");
        assert!(t.get("x").unwrap().intersects(&t.get("y").unwrap()));
        assert!(check_non_overlapping(&CoreExpr::regular(m)).unwrap().holds);
        // empty spans share no position
        let m = compile_str("x{a y{eps} a}", "a").unwrap();
        let e = CoreExpr { select: vec![set(&["x", "y"])], ..CoreExpr::regular(m) };
        assert!(check_non_overlapping(&e).unwrap().holds);
    }

    #[test]
    fn forward_compilation() {
        let m = compile_str("x{a*|b*} c y{a*|b*}", "abc").unwrap();
        check_forward(&CoreExpr { select: vec![set(&["x", "y"])], ..CoreExpr::regular(m.clone()) }, 5);
        check_forward(&CoreExpr::regular(m), 4);
        let m = compile_str("(x{a|b} | y{(a|b)(a|b)}) z{(a|b)*} (w{a} | v{b(a|b)})", "ab").unwrap();
        check_forward(&CoreExpr { select: vec![set(&["x", "z", "w"]), set(&["y", "v"])], ..CoreExpr::regular(m) }, 5);
        let m = compile_str("x{a u{b} a} b y{(a|b) (t{b}|a) a}", "ab").unwrap();
        check_forward(&CoreExpr { select: vec![set(&["x", "y"])], ..CoreExpr::regular(m) }, 7);
        let m = compile_str("x{eps} y{eps} a | y{a} x{a}", "a").unwrap();
        check_forward(&CoreExpr { select: vec![set(&["x", "y"])], ..CoreExpr::regular(m) }, 3);
    }

    /// A linear automaton from tokens: marked words, or `c*` for a loop.
    fn linear(a: &Alphabet, spec: &str) -> Nfa {
        let mut m = Nfa::new(a.clone());
        let mut q = m.initial();
        for tok in spec.split_whitespace() {
            if let Some(c) = tok.strip_suffix('*') {
                let c = c.chars().next().unwrap();
                m.add_transition(q, Some(ExtSymbol::Term(c)), q);
                continue;
            }
            for s in crate::word::parse_word(tok, a).unwrap() {
                let r = m.add_state();
                m.add_transition(q, Some(s), r);
                q = r;
            }
        }
        m.set_final(q);
        m
    }

    #[test]
    fn overlapping_classes_in_a_good_order() {
        let a = Alphabet::from_strs("abc", &["x", "y", "xp", "yp"]).unwrap();
        let alpha = linear(&a, "<x a* b <y c x> b* <xp a* b c xp> y> <yp c b* a* b c yp>");
        let e = CoreExpr {
            select: vec![set(&["x", "xp"]), set(&["y", "yp"])],
            project: vec!["x".into(), "y".into()],
            ..CoreExpr::regular(alpha)
        };
        assert!(!check_non_overlapping(&e).unwrap().holds);
        let f = core_to_refl(&e).unwrap();
        let b = Alphabet::from_strs("abc", &["x", "y"]).unwrap();
        let hand = linear(&b, "<x a* b <y c x> b* &x y> &y");
        // the shortest document with a tuple has length 7
        let mut docs: BTreeSet<String> = words(&['a', 'b', 'c'], 5).into_iter().collect();
        for v in e.nfa.enumerate_words(18) {
            let d = crate::word::terminal_string(&crate::word::wrd(&v)).unwrap();
            docs.insert(d.replacen('a', "b", 1));
            docs.insert(d.replacen("bc", "c", 1));
            docs.insert(d);
        }
        docs.insert("abcbabccbabc".into());
        docs.insert("aabcbbaabccbbaabc".into());
        let mut hits = 0;
        for w in &docs {
            let want = eval_core(&e, w).unwrap();
            let got = rel_project(&fuse_relation(&evaluate(&f.nfa, w).unwrap(), &f.fuse).unwrap(), &f.project);
            assert_eq!(want.tuples, got.tuples, "{w}");
            assert_eq!(want.tuples, evaluate(&hand, w).unwrap().tuples, "{w}");
            hits += usize::from(!want.tuples.is_empty());
        }
        assert!(hits >= 3, "{hits}");
        assert_eq!(eval_core(&e, "bcbccbc").unwrap().tuples.len(), 1);
    }

    #[test]
    fn adjacent_and_empty_members() {
        for (expr, max) in [
            ("x{a|b} y{a|b} z{b*}", 4),
            ("x{eps} y{eps} a z{a*}", 4),
            ("(x{a} | x{eps}) (y{a} | y{eps}) b", 4),
            ("x{a*} y{a*} z{a*}", 5),
        ] {
            let m = compile_str(expr, "ab").unwrap();
            let vars = m.vars().to_vec();
            let all: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
            check_forward(&CoreExpr { select: vec![set(&all)], ..CoreExpr::regular(m.clone()) }, max);
        }
    }

    #[test]
    fn overlapping_selection_is_rejected() {
        let m = compile_str("x{a y{a} a}", "a").unwrap();
        let e = CoreExpr { select: vec![set(&["x", "y"])], ..CoreExpr::regular(m) };
        assert!(matches!(core_to_refl(&e), Err(Error::Overlap(_))));
    }

    #[test]
    fn backward_compilation() {
        let m = compile_str("x{a*} b &x", "ab").unwrap();
        let e = refl_to_core(&m).unwrap();
        assert_eq!(e.select, vec![set(&["x", "x_ref1"])]);
        assert_eq!(eval_core(&e, "aabaa").unwrap(), evaluate(&m, "aabaa").unwrap());
        let m = compile_str("x{a} &x &x", "a").unwrap();
        let e = refl_to_core(&m).unwrap();
        assert_eq!(e.select, vec![set(&["x", "x_ref1", "x_ref2"])]);
        assert_eq!(eval_core(&e, "aaa").unwrap(), evaluate(&m, "aaa").unwrap());
        let m = compile_str("x{a*} y{b}", "ab").unwrap();
        assert!(refl_to_core(&m).unwrap().select.is_empty());
        let m = compile_str("x{a} (b &x)*", "ab").unwrap();
        assert!(matches!(refl_to_core(&m), Err(Error::Precondition(_))));
        let m = compile_str("x{(a|b)*} (y{&x a} &y | b) &x", "ab").unwrap();
        let e = refl_to_core(&m).unwrap();
        for w in words(&['a', 'b'], 6) {
            assert_eq!(eval_core(&e, &w).unwrap().tuples, evaluate(&m, &w).unwrap().tuples, "{w}");
        }
    }
}
