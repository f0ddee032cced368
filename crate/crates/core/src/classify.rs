//! Automaton-level classification of marked languages and ref-languages.
//!
//! Each negative property is detected by a small pattern automaton (per
//! variable or per pair of variables). The patterns are unioned and
//! intersected with the input; a shortest accepted word of the product is
//! the witness, attributed to the first pattern that accepts it.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::hash::Hash;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::nfa::{Label, Nfa, StateId, DEFAULT_MAX_STATES};
use crate::symbol::{Alphabet, ExtSymbol, Marker, ValidOrder, VarId};
use crate::transform::{DefStatus, LengthClass, LengthMonitor};
use crate::word::{render_word, MarkedWord};

/// Outcome of a single check: a verdict and, when it fails, an accepted
/// word violating the property with a description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub holds: bool,
    pub witness: Option<MarkedWord>,
    pub reason: Option<String>,
}

impl Check {
    pub(crate) fn ok() -> Check {
        Check {
            holds: true,
            witness: None,
            reason: None,
        }
    }

    pub(crate) fn fail(witness: MarkedWord, reason: String) -> Check {
        Check {
            holds: false,
            witness: Some(witness),
            reason: Some(reason),
        }
    }

    /// One-line description of a failure, including the rendered witness.
    pub fn describe(&self, alphabet: &Alphabet) -> Option<String> {
        if self.holds {
            return None;
        }
        let w = self
            .witness
            .as_ref()
            .map(|w| render_word(w, alphabet))
            .unwrap_or_default();
        Some(format!(
            "{}; witness: [{}]",
            self.reason.as_deref().unwrap_or("violation"),
            w
        ))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Letters {
    Any,
    AtLeastOne,
    None,
}

#[derive(Clone, Copy)]
struct Gap {
    letters: Letters,
    forbid: Option<ExtSymbol>,
}

const ANY: Gap = Gap {
    letters: Letters::Any,
    forbid: None,
};
const SOME: Gap = Gap {
    letters: Letters::AtLeastOne,
    forbid: None,
};
const NONE: Gap = Gap {
    letters: Letters::None,
    forbid: None,
};

fn without(s: ExtSymbol) -> Gap {
    Gap {
        letters: Letters::Any,
        forbid: Some(s),
    }
}

/// Accepts `g0 s0 g1 s1 … gk` where each gap `gi` is a factor satisfying its
/// constraint. Letters are terminals and references.
fn pattern(alphabet: &Alphabet, gaps: &[Gap], seps: &[ExtSymbol]) -> Nfa {
    assert_eq!(gaps.len(), seps.len() + 1);
    let symbols = alphabet.symbols();
    let mut m = Nfa::new(alphabet.clone());
    let mut start = 0;
    for (i, gap) in gaps.iter().enumerate() {
        let allowed = |s: &ExtSymbol| gap.forbid != Some(*s);
        let end = match gap.letters {
            Letters::Any => {
                for s in symbols.iter().filter(|s| allowed(s)) {
                    m.add_transition(start, Some(*s), start);
                }
                start
            }
            Letters::None => {
                for s in symbols.iter().filter(|s| allowed(s) && s.is_marker()) {
                    m.add_transition(start, Some(*s), start);
                }
                start
            }
            Letters::AtLeastOne => {
                let after = m.add_state();
                for s in symbols.iter().filter(|s| allowed(s)) {
                    if s.is_marker() {
                        m.add_transition(start, Some(*s), start);
                    } else {
                        m.add_transition(start, Some(*s), after);
                    }
                    m.add_transition(after, Some(*s), after);
                }
                after
            }
        };
        if i < seps.len() {
            let next = m.add_state();
            m.add_transition(end, Some(seps[i]), next);
            start = next;
        } else {
            m.set_final(end);
        }
    }
    m
}

struct Pattern {
    nfa: Nfa,
    reason: String,
}

/// Intersects `m` with the union of `patterns`; returns a shortest witness.
fn find_violation(m: &Nfa, patterns: &[Pattern]) -> Result<Check> {
    if patterns.is_empty() {
        return Ok(Check::ok());
    }
    let mut u = Nfa::new(m.alphabet().clone());
    for p in patterns {
        let off = u.num_states();
        for _ in 0..p.nfa.num_states() {
            u.add_state();
        }
        u.add_transition(0, None, off + p.nfa.initial());
        for t in p.nfa.transitions() {
            u.add_transition(off + t.from, t.label, off + t.to);
        }
        for &f in p.nfa.finals() {
            u.set_final(off + f);
        }
    }
    let prod = m.trim().product(&u)?;
    match prod.shortest_word() {
        None => Ok(Check::ok()),
        Some(w) => {
            let reason = patterns
                .iter()
                .find(|p| p.nfa.accepts(&w))
                .map(|p| p.reason.clone())
                .expect("witness is accepted by some pattern");
            Ok(Check::fail(w, reason))
        }
    }
}

/// L(m) is a subword-marked language: in every accepted word each
/// variable's markers form either nothing or `⊢x … ⊣x`.
pub fn check_subword_marked(m: &Nfa) -> Result<Check> {
    let a = m.alphabet();
    let mut pats = Vec::new();
    for (x, name) in a.vars.iter().enumerate() {
        let (o, c) = (ExtSymbol::Open(x), ExtSymbol::Close(x));
        pats.push(Pattern {
            nfa: pattern(a, &[without(o), ANY], &[c]),
            reason: format!("close marker of {name} without a preceding open marker"),
        });
        pats.push(Pattern {
            nfa: pattern(a, &[ANY, without(c)], &[o]),
            reason: format!("open marker of {name} is never closed"),
        });
        pats.push(Pattern {
            nfa: pattern(a, &[ANY, ANY, ANY], &[o, o]),
            reason: format!("{name} is opened twice"),
        });
        pats.push(Pattern {
            nfa: pattern(a, &[ANY, ANY, ANY], &[c, c]),
            reason: format!("{name} is closed twice"),
        });
    }
    find_violation(m, &pats)
}

fn require_subword_marked(m: &Nfa) -> Result<()> {
    let c = check_subword_marked(m)?;
    if !c.holds {
        return Err(Error::pre(format!(
            "language is not subword-marked: {}",
            c.describe(m.alphabet()).unwrap_or_default()
        )));
    }
    Ok(())
}

/// Flags of the tuple-level properties of a subword-marked language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleChecks {
    pub functional: Check,
    pub hierarchical: Check,
    pub quasi_disjoint: Check,
}

pub fn check_functional(m: &Nfa) -> Result<Check> {
    require_subword_marked(m)?;
    functional_unchecked(m)
}

fn functional_unchecked(m: &Nfa) -> Result<Check> {
    let a = m.alphabet();
    let pats: Vec<Pattern> = a
        .vars
        .iter()
        .enumerate()
        .map(|(x, name)| Pattern {
            nfa: pattern(a, &[without(ExtSymbol::Open(x))], &[]),
            reason: format!("{name} is not bound"),
        })
        .collect();
    find_violation(m, &pats)
}

pub fn check_hierarchical(m: &Nfa) -> Result<Check> {
    require_subword_marked(m)?;
    hierarchical_unchecked(m)
}

fn pairs(n: usize) -> impl Iterator<Item = (VarId, VarId)> {
    (0..n).flat_map(move |x| (0..n).filter(move |&y| y != x).map(move |y| (x, y)))
}

fn hierarchical_unchecked(m: &Nfa) -> Result<Check> {
    let a = m.alphabet();
    let pats: Vec<Pattern> = pairs(a.num_vars())
        .map(|(x, y)| {
            let seps = [
                ExtSymbol::Open(x),
                ExtSymbol::Open(y),
                ExtSymbol::Close(x),
                ExtSymbol::Close(y),
            ];
            Pattern {
                nfa: pattern(a, &[ANY, SOME, SOME, SOME, ANY], &seps),
                reason: format!("spans of {} and {} overlap without nesting", a.vars[x], a.vars[y]),
            }
        })
        .collect();
    find_violation(m, &pats)
}

pub fn check_quasi_disjoint(m: &Nfa) -> Result<Check> {
    require_subword_marked(m)?;
    quasi_disjoint_unchecked(m)
}

fn quasi_disjoint_unchecked(m: &Nfa) -> Result<Check> {
    let a = m.alphabet();
    let mut pats = Vec::new();
    for (x, y) in pairs(a.num_vars()) {
        let (ox, cx, oy, cy) = (
            ExtSymbol::Open(x),
            ExtSymbol::Close(x),
            ExtSymbol::Open(y),
            ExtSymbol::Close(y),
        );
        let (nx, ny) = (&a.vars[x], &a.vars[y]);
        let crossing = format!("spans of {nx} and {ny} cross");
        let nested = format!("span of {ny} lies strictly inside the span of {nx}");
        // ⊢x w2 ⊢y w3 ⊣x w4 ⊣y with w3 non-empty and w2 or w4 non-empty
        pats.push(Pattern {
            nfa: pattern(a, &[ANY, SOME, SOME, ANY, ANY], &[ox, oy, cx, cy]),
            reason: crossing.clone(),
        });
        pats.push(Pattern {
            nfa: pattern(a, &[ANY, ANY, SOME, SOME, ANY], &[ox, oy, cx, cy]),
            reason: crossing,
        });
        // ⊢x w2 ⊢y w3 ⊣y w4 ⊣x, not equal and not disjoint
        pats.push(Pattern {
            nfa: pattern(a, &[ANY, SOME, NONE, SOME, ANY], &[ox, oy, cy, cx]),
            reason: nested.clone(),
        });
        pats.push(Pattern {
            nfa: pattern(a, &[ANY, SOME, SOME, ANY, ANY], &[ox, oy, cy, cx]),
            reason: nested.clone(),
        });
        pats.push(Pattern {
            nfa: pattern(a, &[ANY, ANY, SOME, SOME, ANY], &[ox, oy, cy, cx]),
            reason: nested,
        });
    }
    find_violation(m, &pats)
}

/// Functional, hierarchical and quasi-disjoint checks together.
pub fn check_tuple_properties(m: &Nfa) -> Result<TupleChecks> {
    require_subword_marked(m)?;
    Ok(TupleChecks {
        functional: functional_unchecked(m)?,
        hierarchical: hierarchical_unchecked(m)?,
        quasi_disjoint: quasi_disjoint_unchecked(m)?,
    })
}

/// L(m) is a ref-language: additionally no reference to `x` occurs before `⊣x`.
pub fn check_ref_language(m: &Nfa) -> Result<Check> {
    require_subword_marked(m)?;
    ref_language_unchecked(m)
}

fn ref_language_unchecked(m: &Nfa) -> Result<Check> {
    let a = m.alphabet();
    let pats: Vec<Pattern> = a
        .vars
        .iter()
        .enumerate()
        .map(|(x, name)| Pattern {
            nfa: pattern(a, &[without(ExtSymbol::Close(x)), ANY], &[ExtSymbol::Ref(x)]),
            reason: format!("reference to {name} before its definition is closed"),
        })
        .collect();
    find_violation(m, &pats)
}

fn require_ref_language(m: &Nfa) -> Result<()> {
    let c = check_ref_language(m)?;
    if !c.holds {
        return Err(Error::pre(format!(
            "not a ref-language: {}",
            c.describe(m.alphabet()).unwrap_or_default()
        )));
    }
    Ok(())
}

/// Searches the product of the trimmed `m` with a deterministic monitor for
/// a violation. `step` rejects a symbol with a message; `at_end` may reject
/// at a final state. The witness is a shortest violating prefix completed
/// by a shortest accepted suffix.
pub(crate) fn monitor_violation<S: Clone + Eq + Hash>(
    m: &Nfa,
    init: S,
    step: impl Fn(&S, ExtSymbol) -> std::result::Result<S, String>,
    at_end: impl Fn(&S) -> Option<String>,
    cap: usize,
) -> Result<Option<(MarkedWord, String)>> {
    let m = m.trim();
    if m.finals().is_empty() {
        return Ok(None);
    }
    let mut index: HashMap<(StateId, S), usize> = HashMap::new();
    let mut nodes: Vec<(StateId, S, usize, Option<ExtSymbol>)> = Vec::new();
    let mut dq = VecDeque::new();
    nodes.push((m.initial(), init.clone(), usize::MAX, None));
    index.insert((m.initial(), init), 0);
    dq.push_back(0usize);
    let path = |nodes: &Vec<(StateId, S, usize, Option<ExtSymbol>)>, mut i: usize| {
        let mut w = Vec::new();
        while i != usize::MAX {
            if let Some(s) = nodes[i].3 {
                w.push(s);
            }
            i = nodes[i].2;
        }
        w.reverse();
        w
    };
    let completion = |q: StateId| {
        let mut c = m.clone();
        c.set_initial(q);
        c.shortest_word().expect("trimmed state reaches a final state")
    };
    while let Some(i) = dq.pop_front() {
        let (q, st) = (nodes[i].0, nodes[i].1.clone());
        if m.is_final(q) {
            if let Some(msg) = at_end(&st) {
                return Ok(Some((path(&nodes, i), msg)));
            }
        }
        for &(l, r) in m.out(q) {
            let next = match l {
                None => st.clone(),
                Some(s) => match step(&st, s) {
                    Ok(n) => n,
                    Err(msg) => {
                        let mut w = path(&nodes, i);
                        w.push(s);
                        w.extend(completion(r));
                        return Ok(Some((w, msg)));
                    }
                },
            };
            let key = (r, next.clone());
            if index.contains_key(&key) {
                continue;
            }
            if nodes.len() >= cap {
                return Err(Error::resource(format!("monitor product exceeded {cap} states")));
            }
            nodes.push((r, next, i, l));
            index.insert(key, nodes.len() - 1);
            if l.is_none() {
                dq.push_front(nodes.len() - 1);
            } else {
                dq.push_back(nodes.len() - 1);
            }
        }
    }
    Ok(None)
}

/// Split of the variables into reference variables and, per reference
/// variable, its extraction variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariablePartition {
    pub refs: BTreeSet<String>,
    pub extractors: BTreeMap<String, BTreeSet<String>>,
}

impl VariablePartition {
    /// Parses lines `ref x` and `extractor y of x`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<VariablePartition> {
        let mut p = VariablePartition::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.as_slice() {
                ["ref", x] => {
                    p.refs.insert(x.to_string());
                    p.extractors.entry(x.to_string()).or_default();
                }
                ["extractor", y, "of", x] => {
                    p.extractors
                        .entry(x.to_string())
                        .or_default()
                        .insert(y.to_string());
                }
                _ => {
                    return Err(Error::invalid(format!(
                        "partition line {}: expected 'ref x' or 'extractor y of x'",
                        n + 1
                    )))
                }
            }
        }
        Ok(p)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for x in &self.refs {
            let _ = writeln!(out, "ref {x}");
        }
        for (x, ys) in &self.extractors {
            for y in ys {
                let _ = writeln!(out, "extractor {y} of {x}");
            }
        }
        out
    }

    /// The first condition of strong reference extraction: the sets cover
    /// the variables and are pairwise disjoint.
    pub fn validate(&self, alphabet: &Alphabet) -> Result<()> {
        for x in self.extractors.keys() {
            if !self.refs.contains(x) {
                return Err(Error::invalid(format!("{x} has extractors but is not a reference variable")));
            }
        }
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let all = self
            .refs
            .iter()
            .chain(self.extractors.values().flatten());
        for v in all {
            alphabet.var_id(v)?;
            if !seen.insert(v) {
                return Err(Error::invalid(format!("{v} appears twice in the partition")));
            }
        }
        if let Some(v) = alphabet.vars.iter().find(|v| !seen.contains(v.as_str())) {
            return Err(Error::invalid(format!("{v} is not covered by the partition")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum ExtractorStatus {
    Unopened,
    AwaitingRef,
    GotRef,
    Done,
}

/// Decides whether every accepted word is strongly reference extracting
/// with respect to `p`.
pub fn check_strongly_ref_extracting(m: &Nfa, p: &VariablePartition) -> Result<Check> {
    check_strongly_ref_extracting_capped(m, p, DEFAULT_MAX_STATES)
}

pub fn check_strongly_ref_extracting_capped(
    m: &Nfa,
    p: &VariablePartition,
    cap: usize,
) -> Result<Check> {
    let a = m.alphabet();
    p.validate(a)?;
    require_ref_language(m)?;
    let n = a.num_vars();
    // for each extractor, the variable it extracts
    let mut target: Vec<Option<VarId>> = vec![None; n];
    for (x, ys) in &p.extractors {
        let xi = a.var_id(x)?;
        for y in ys {
            target[a.var_id(y)?] = Some(xi);
        }
    }
    let is_ref_var: Vec<bool> = (0..n).map(|x| p.refs.contains(&a.vars[x])).collect();
    let name = |x: VarId| a.vars[x].clone();
    let step = |st: &(LengthMonitor, Vec<ExtractorStatus>), s: ExtSymbol| {
        let (mon, ext) = st;
        let mut ext = ext.clone();
        match s {
            ExtSymbol::Open(y) if target[y].is_some() => ext[y] = ExtractorStatus::AwaitingRef,
            ExtSymbol::Close(y) if target[y].is_some() => {
                if ext[y] != ExtractorStatus::GotRef {
                    return Err(format!(
                        "definition of extractor {} contains no reference to {}",
                        name(y),
                        name(target[y].expect("extractor"))
                    ));
                }
                ext[y] = ExtractorStatus::Done;
            }
            ExtSymbol::Term(_) | ExtSymbol::Ref(_) => {
                if let ExtSymbol::Ref(x) = s {
                    if !is_ref_var[x] {
                        return Err(format!("extractor {} is referenced", name(x)));
                    }
                    if !ext
                        .iter()
                        .enumerate()
                        .any(|(y, st)| *st == ExtractorStatus::AwaitingRef && target[y] == Some(x))
                    {
                        return Err(format!(
                            "reference to {} is not the sole content of an extractor definition",
                            name(x)
                        ));
                    }
                    if let DefStatus::Closed(c) = mon.0[x] {
                        if c != LengthClass::TwoPlus {
                            return Err(format!(
                                "referenced variable {} has dereferenced length class {c}",
                                name(x)
                            ));
                        }
                    }
                }
                for (y, st) in ext.iter_mut().enumerate() {
                    match *st {
                        ExtractorStatus::AwaitingRef if s == ExtSymbol::Ref(target[y].expect("extractor")) => {
                            *st = ExtractorStatus::GotRef
                        }
                        ExtractorStatus::AwaitingRef | ExtractorStatus::GotRef => {
                            return Err(format!(
                                "definition of extractor {} has content other than one reference to {}",
                                name(y),
                                name(target[y].expect("extractor"))
                            ))
                        }
                        _ => {}
                    }
                }
            }
            _ => {}
        }
        let mon = mon.step(s)?;
        Ok((mon, ext))
    };
    let init = (LengthMonitor::new(n), vec![ExtractorStatus::Unopened; n]);
    Ok(
        match monitor_violation(m, init, step, |st| st.0.at_end(), cap)? {
            None => Check::ok(),
            Some((w, msg)) => Check::fail(w, msg),
        },
    )
}

/// Proposes a partition from the automaton's structure: reference variables
/// are those with reference transitions; `y` extracts `x` when an open
/// marker of `y` reaches a reference to `x` through markers and ε only.
/// Returns `None` when the choice is not unique or fails validation.
pub fn suggest_partition(m: &Nfa) -> Option<VariablePartition> {
    let m = m.trim();
    let a = m.alphabet();
    let mut refs = BTreeSet::new();
    for t in m.transitions() {
        if let Some(ExtSymbol::Ref(x)) = t.label {
            refs.insert(x);
        }
    }
    let mut extractor_of: BTreeMap<VarId, BTreeSet<VarId>> = BTreeMap::new();
    for t in m.transitions() {
        let Some(ExtSymbol::Open(y)) = t.label else { continue };
        // markers/ε-reachable references from the target
        let mut seen = vec![false; m.num_states()];
        let mut stack = vec![t.to];
        seen[t.to] = true;
        while let Some(q) = stack.pop() {
            for &(l, r) in m.out(q) {
                match l {
                    Some(ExtSymbol::Ref(x)) => {
                        extractor_of.entry(y).or_default().insert(x);
                    }
                    None | Some(ExtSymbol::Open(_)) | Some(ExtSymbol::Close(_)) => {
                        if !seen[r] {
                            seen[r] = true;
                            stack.push(r);
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    let mut p = VariablePartition::default();
    for &x in &refs {
        p.refs.insert(a.vars[x].clone());
        p.extractors.entry(a.vars[x].clone()).or_default();
    }
    for y in 0..a.num_vars() {
        if refs.contains(&y) {
            continue;
        }
        let targets = extractor_of.get(&y).cloned().unwrap_or_default();
        if targets.len() != 1 {
            return None;
        }
        let x = *targets.iter().next().expect("one target");
        p.extractors
            .entry(a.vars[x].clone())
            .or_default()
            .insert(a.vars[y].clone());
    }
    p.validate(a).ok()?;
    Some(p)
}

/// Structural reference bound of the trimmed automaton: `None` when a
/// reference transition lies on a cycle, otherwise the largest number of
/// references to a single variable along any path.
pub fn reference_bound(m: &Nfa) -> Result<Option<usize>> {
    require_ref_language(m)?;
    Ok(structural_reference_bound(m))
}

pub(crate) fn structural_reference_bound(m: &Nfa) -> Option<usize> {
    structural_reference_bounds(m).map(|b| b.into_iter().max().unwrap_or(0))
}

/// Per-variable maximum number of references along any accepting path, or
/// `None` when a reference sits on a cycle.
pub(crate) fn structural_reference_bounds(m: &Nfa) -> Option<Vec<usize>> {
    let m = m.trim();
    let mut g: DiGraph<(), ()> = DiGraph::new();
    let nodes: Vec<_> = (0..m.num_states()).map(|_| g.add_node(())).collect();
    for t in m.transitions() {
        g.add_edge(nodes[t.from], nodes[t.to], ());
    }
    // components come out in reverse topological order
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0usize; m.num_states()];
    for (c, members) in sccs.iter().enumerate() {
        for v in members {
            comp[v.index()] = c;
        }
    }
    let mut out_edges: Vec<Vec<(usize, Label)>> = vec![Vec::new(); sccs.len()];
    for t in m.transitions() {
        let (a, b) = (comp[t.from], comp[t.to]);
        if a == b {
            if matches!(t.label, Some(ExtSymbol::Ref(_))) {
                return None;
            }
        } else {
            out_edges[a].push((b, t.label));
        }
    }
    let mut best = Vec::with_capacity(m.num_vars());
    for x in 0..m.num_vars() {
        let mut dist = vec![0usize; sccs.len()];
        for c in (0..sccs.len()).rev() {
            for &(d, l) in &out_edges[c] {
                let w = usize::from(l == Some(ExtSymbol::Ref(x)));
                dist[d] = dist[d].max(dist[c] + w);
            }
        }
        best.push(dist.into_iter().max().unwrap_or(0));
    }
    Some(best)
}

/// Marker pairs `(σ, τ)` (as marker bits) that occur adjacently in some
/// accepted word.
fn adjacent_marker_pairs(m: &Nfa) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for t in m.transitions() {
        let Some(first) = t.label.and_then(|s| s.marker()) else { continue };
        for &q in m.eps_closure(t.to) {
            for &(l, _) in m.out(q) {
                if let Some(second) = l.and_then(|s| s.marker()) {
                    edges.insert((first.bit(), second.bit()));
                }
            }
        }
    }
    edges
}

/// Every accepted word is normalized for `ord`.
pub fn is_normalized_for(m: &Nfa, ord: &ValidOrder) -> bool {
    let m = m.trim();
    adjacent_marker_pairs(&m)
        .into_iter()
        .all(|(a, b)| ord.rank(Marker::from_bit(a)) < ord.rank(Marker::from_bit(b)))
}

/// No accepted word references a variable whose dereferenced value is empty.
pub fn check_non_eps_referencing(m: &Nfa) -> Result<Check> {
    require_ref_language(m)?;
    let name = |x: VarId| m.vars()[x].clone();
    let step = |mon: &LengthMonitor, s: ExtSymbol| {
        if let ExtSymbol::Ref(x) = s {
            if mon.0[x] == DefStatus::Closed(LengthClass::Zero) {
                return Err(format!("reference to {} whose value is empty", name(x)));
            }
        }
        mon.step(s)
    };
    Ok(
        match monitor_violation(m, LengthMonitor::new(m.num_vars()), step, |st| st.at_end(), DEFAULT_MAX_STATES)? {
            None => Check::ok(),
            Some((w, msg)) => Check::fail(w, msg),
        },
    )
}

/// A valid order for which L(m) is normalized, if one exists. Built from
/// the marker pairs that occur adjacently in accepted words.
pub fn normalized_order(m: &Nfa) -> Option<ValidOrder> {
    let m = m.trim();
    let n = m.num_vars();
    let mut edges = adjacent_marker_pairs(&m);
    for x in 0..n {
        edges.insert((2 * x, 2 * x + 1));
    }
    for &(a, b) in &edges {
        if a == b {
            return None;
        }
    }
    // Kahn's algorithm with smallest-index tie-breaking for determinism
    let mut indeg = vec![0usize; 2 * n];
    for &(_, b) in &edges {
        indeg[b] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..2 * n).filter(|&b| indeg[b] == 0).collect();
    let mut seq = Vec::new();
    while let Some(&b) = ready.iter().next() {
        ready.remove(&b);
        seq.push(Marker::from_bit(b));
        for &(u, v) in edges.range((b, 0)..(b + 1, 0)) {
            debug_assert_eq!(u, b);
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.insert(v);
            }
        }
    }
    if seq.len() != 2 * n {
        return None;
    }
    ValidOrder::new(seq, n).ok()
}

/// Outcome of all well-formedness and property checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassReport {
    pub vars: Vec<String>,
    pub is_subword_marked: bool,
    pub is_ref_language: bool,
    pub functional: bool,
    pub hierarchical: bool,
    pub quasi_disjoint: bool,
    pub normalized_order: Option<ValidOrder>,
    pub reference_bound: Option<usize>,
    pub violations: Vec<String>,
}

impl ClassReport {
    pub fn to_json(&self, alphabet: &Alphabet) -> Value {
        json!({
            "subword_marked": self.is_subword_marked,
            "ref_language": self.is_ref_language,
            "functional": self.functional,
            "hierarchical": self.hierarchical,
            "quasi_disjoint": self.quasi_disjoint,
            "normalized_order": self.normalized_order.as_ref().map(|o| o.render(alphabet)),
            "reference_bound": self.reference_bound,
            "violations": self.violations,
        })
    }

    pub fn render(&self, alphabet: &Alphabet) -> String {
        let yes = |b: bool| if b { "yes" } else { "no" };
        let mut out = String::new();
        let _ = writeln!(out, "subword-marked: {}", yes(self.is_subword_marked));
        let _ = writeln!(out, "ref-language:   {}", yes(self.is_ref_language));
        let _ = writeln!(out, "functional:     {}", yes(self.functional));
        let _ = writeln!(out, "hierarchical:   {}", yes(self.hierarchical));
        let _ = writeln!(out, "quasi-disjoint: {}", yes(self.quasi_disjoint));
        let _ = writeln!(
            out,
            "normalized for: {}",
            self.normalized_order
                .as_ref()
                .map_or("none".to_string(), |o| o.render(alphabet))
        );
        let _ = writeln!(
            out,
            "reference bound: {}",
            self.reference_bound
                .map_or("unbounded".to_string(), |k| k.to_string())
        );
        for v in &self.violations {
            let _ = writeln!(out, "violation: {v}");
        }
        out
    }

    /// Looks up a property by its CLI name.
    pub fn property(&self, name: &str) -> Option<bool> {
        Some(match name {
            "subword-marked" => self.is_subword_marked,
            "ref-language" => self.is_ref_language,
            "functional" => self.functional,
            "hierarchical" => self.hierarchical,
            "quasi-disjoint" => self.quasi_disjoint,
            "normalized" => self.normalized_order.is_some(),
            "reference-bounded" => self.reference_bound.is_some(),
            _ => return None,
        })
    }
}

pub fn classify(m: &Nfa) -> Result<ClassReport> {
    let a = m.alphabet();
    let mut violations = Vec::new();
    let mut note = |c: &Check| {
        if let Some(d) = c.describe(a) {
            violations.push(d);
        }
    };
    let sm = check_subword_marked(m)?;
    note(&sm);
    let mut report = ClassReport {
        vars: a.vars.clone(),
        is_subword_marked: sm.holds,
        is_ref_language: false,
        functional: false,
        hierarchical: false,
        quasi_disjoint: false,
        normalized_order: None,
        reference_bound: structural_reference_bound(m),
        violations: Vec::new(),
    };
    if sm.holds {
        let rl = ref_language_unchecked(m)?;
        note(&rl);
        let f = functional_unchecked(m)?;
        note(&f);
        let h = hierarchical_unchecked(m)?;
        note(&h);
        let q = quasi_disjoint_unchecked(m)?;
        note(&q);
        report.is_ref_language = rl.holds;
        report.functional = f.holds;
        report.hierarchical = h.holds;
        report.quasi_disjoint = q.holds;
        report.normalized_order = normalized_order(m);
    }
    report.violations = violations;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refx::compile_str;
    use crate::word::parse_word;

    fn single(sigma: &str, vars: &[&str], word: &str) -> Nfa {
        let a = Alphabet::from_strs(sigma, vars).unwrap();
        let w = parse_word(word, &a).unwrap();
        Nfa::from_words(a, &[w])
    }

    #[test]
    fn subword_marked_examples() {
        let m = single("abc", &["x", "y", "z"], "<x aa x> ab <y <z ca z> a y>");
        assert!(check_subword_marked(&m).unwrap().holds);
        let m = single("abc", &["x", "y"], "<x a <y ba x> c");
        let c = check_subword_marked(&m).unwrap();
        assert!(!c.holds);
        assert!(c.reason.unwrap().contains("y"));
        assert!(check_subword_marked(&compile_str("(a|b)*", "ab").unwrap()).unwrap().holds);
    }

    #[test]
    fn tuple_property_examples() {
        let m = compile_str("x{(a|b)*} y{b} z{(a|b)*}", "ab").unwrap();
        let t = check_tuple_properties(&m).unwrap();
        assert!(t.functional.holds && t.quasi_disjoint.holds && t.hierarchical.holds);
        let m = single("abc", &["x", "y", "z"], "b <x a <y aba <z a z> c x> ab y> c");
        let t = check_tuple_properties(&m).unwrap();
        assert!(t.functional.holds && !t.hierarchical.holds);
        let m = single("abc", &["x", "y", "z"], "<x a <y ba y> ca b x> caa");
        let t = check_tuple_properties(&m).unwrap();
        assert!(!t.functional.holds && t.hierarchical.holds && !t.quasi_disjoint.holds);
    }

    #[test]
    fn ref_language_examples() {
        let m = single("abc", &["x", "y"], "ab <x ab x> c <y &x aa y> &y");
        assert!(check_ref_language(&m).unwrap().holds);
        let m = single("ab", &["x"], "a &x b <x ab x>");
        assert!(!check_ref_language(&m).unwrap().holds);
    }

    #[test]
    fn strong_extraction_examples() {
        let p = VariablePartition::parse("ref x\nextractor y of x\n").unwrap();
        let m = single("ab", &["x", "y"], "<x aa x> <y &x y>");
        assert!(check_strongly_ref_extracting(&m, &p).unwrap().holds);
        let m = single("ab", &["x", "y"], "<x aa x> b &x");
        assert!(!check_strongly_ref_extracting(&m, &p).unwrap().holds);
        let m = single("ab", &["x", "y"], "<x a x> <y &x y>");
        let c = check_strongly_ref_extracting(&m, &p).unwrap();
        assert!(!c.holds);
        assert!(c.reason.unwrap().contains("length class"));
        assert_eq!(suggest_partition(&single("ab", &["x", "y"], "<x aa x> <y &x y>")), Some(p));
    }

    #[test]
    fn reference_bounds() {
        let m = compile_str("a+ x{b+} (a+ &x)* a+", "ab").unwrap();
        assert_eq!(reference_bound(&m).unwrap(), None);
        let m = compile_str("x{a} &x &x", "a").unwrap();
        assert_eq!(reference_bound(&m).unwrap(), Some(2));
        let m = compile_str("x{a*} b", "ab").unwrap();
        assert_eq!(reference_bound(&m).unwrap(), Some(0));
    }

    #[test]
    fn normalized_order_detection() {
        let m = compile_str("x{a} y{b}", "ab").unwrap();
        let o = normalized_order(&m).unwrap();
        assert_eq!(o.render(m.alphabet()), "<x,x>,<y,y>");
        let m = compile_str("x{y{a}}|y{x{a}}", "a").unwrap();
        assert!(normalized_order(&m).is_none());
    }
}
