//! Evaluation of refl-spanners on documents.

mod lce;

use std::collections::HashSet;

use crate::classify::check_ref_language;
use crate::error::{Error, Result};
use crate::nfa::{Nfa, StateId};
use crate::span::{Span, SpanRelation, SpanTuple};
use crate::symbol::{Alphabet, ExtSymbol};
use crate::transform::remove_eps_references;
use crate::word::{deref_tuple, is_ref_word, raw_to_tuple, MarkedWord};

pub use lce::Lce;
pub use test::{test_tuple, test_tuple_witness, TestMode, TupleTester};

/// Default cap on configurations visited by [`evaluate`] and [`nonempty`].
pub const DEFAULT_MAX_CONFIGS: usize = 5_000_000;

/// A document over a declared terminal alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    chars: Vec<char>,
}

impl Document {
    pub fn new(text: &str, alphabet: &Alphabet) -> Result<Document> {
        Ok(Document {
            chars: alphabet.check_document(text)?,
        })
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }
}

pub(crate) fn require_ref_language(m: &Nfa) -> Result<()> {
    let c = check_ref_language(m)?;
    if !c.holds {
        return Err(Error::pre(format!(
            "not a ref-language: {}",
            c.describe(m.alphabet()).unwrap_or_default()
        )));
    }
    Ok(())
}

// Per-variable capture state packed as (lo, hi): unset (0,0), open (lo,0),
// closed (lo,hi) with lo ≥ 1.
type Slot = (u32, u32);

const UNSET: Slot = (0, 0);

fn is_open(s: Slot) -> bool {
    s.0 != 0 && s.1 == 0
}

fn is_closed(s: Slot) -> bool {
    s.1 != 0
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Config {
    q: StateId,
    pos: u32,
    slots: Box<[Slot]>,
}

/// Successor configurations of `c` (0-based `pos` counts consumed letters).
fn successors(m: &Nfa, doc: &[char], c: &Config, out: &mut Vec<Config>) {
    let pos = c.pos as usize;
    for &(l, r) in m.out(c.q) {
        let mut next = Config {
            q: r,
            pos: c.pos,
            slots: c.slots.clone(),
        };
        match l {
            None => {}
            Some(ExtSymbol::Term(a)) => {
                if doc.get(pos) != Some(&a) {
                    continue;
                }
                next.pos += 1;
            }
            Some(ExtSymbol::Open(x)) => {
                if c.slots[x] != UNSET {
                    continue;
                }
                next.slots[x] = (c.pos + 1, 0);
            }
            Some(ExtSymbol::Close(x)) => {
                if !is_open(c.slots[x]) {
                    continue;
                }
                next.slots[x].1 = c.pos + 1;
            }
            Some(ExtSymbol::Ref(x)) => {
                let s = c.slots[x];
                if !is_closed(s) {
                    continue;
                }
                let (lo, hi) = (s.0 as usize - 1, s.1 as usize - 1);
                let len = hi - lo;
                if pos + len > doc.len() || doc[lo..hi] != doc[pos..pos + len] {
                    continue;
                }
                next.pos += len as u32;
            }
        }
        out.push(next);
    }
}

fn accepting(m: &Nfa, doc: &[char], c: &Config) -> bool {
    m.is_final(c.q) && c.pos as usize == doc.len() && !c.slots.iter().any(|&s| is_open(s))
}

fn slots_to_tuple(slots: &[Slot], alphabet: &Alphabet) -> SpanTuple {
    let raw: Vec<Option<Span>> = slots
        .iter()
        .map(|&s| {
            is_closed(s).then(|| Span {
                lo: s.0 as usize,
                hi: s.1 as usize,
            })
        })
        .collect();
    raw_to_tuple(&raw, alphabet)
}

/// The full relation `⟦L(m)⟧(w)`.
pub fn evaluate(m: &Nfa, w: &str) -> Result<SpanRelation> {
    evaluate_capped(m, w, DEFAULT_MAX_CONFIGS)
}

pub fn evaluate_capped(m: &Nfa, w: &str, max_configs: usize) -> Result<SpanRelation> {
    require_ref_language(m)?;
    evaluate_unchecked(m, w, max_configs)
}

/// Search over configurations memoized on the full key; assumes a
/// ref-language (paths that are not ref-word prefixes are dropped).
pub(crate) fn evaluate_unchecked(m: &Nfa, w: &str, max_configs: usize) -> Result<SpanRelation> {
    let doc = Document::new(w, m.alphabet())?;
    let doc = doc.chars();
    let mut rel = SpanRelation::new(m.vars().to_vec(), doc.len());
    let start = Config {
        q: m.initial(),
        pos: 0,
        slots: vec![UNSET; m.num_vars()].into_boxed_slice(),
    };
    let mut seen: HashSet<Config> = HashSet::new();
    seen.insert(start.clone());
    let mut stack = vec![start];
    let mut buf = Vec::new();
    while let Some(c) = stack.pop() {
        if accepting(m, doc, &c) {
            rel.insert(slots_to_tuple(&c.slots, m.alphabet()))?;
        }
        buf.clear();
        successors(m, doc, &c, &mut buf);
        for n in buf.drain(..) {
            if !seen.contains(&n) {
                if seen.len() >= max_configs {
                    return Err(Error::resource(format!(
                        "evaluation visited more than {max_configs} configurations"
                    )));
                }
                seen.insert(n.clone());
                stack.push(n);
            }
        }
    }
    Ok(rel)
}

/// Variables that may still be referenced from each state.
fn live_references(m: &Nfa) -> Vec<u64> {
    let mut live = vec![0u64; m.num_states()];
    for t in m.transitions() {
        if let Some(ExtSymbol::Ref(x)) = t.label {
            live[t.from] |= 1 << x;
        }
    }
    let mut changed = true;
    while changed {
        changed = false;
        for t in m.transitions() {
            let merged = live[t.from] | live[t.to];
            if merged != live[t.from] {
                live[t.from] = merged;
                changed = true;
            }
        }
    }
    live
}

/// Whether `⟦L(m)⟧(w)` is non-empty; the search stops at the first match.
pub fn nonempty(m: &Nfa, w: &str) -> Result<bool> {
    nonempty_capped(m, w, DEFAULT_MAX_CONFIGS)
}

pub fn nonempty_capped(m: &Nfa, w: &str, max_configs: usize) -> Result<bool> {
    require_ref_language(m)?;
    if m.num_vars() > 64 {
        return Err(Error::resource("too many variables"));
    }
    let doc = Document::new(w, m.alphabet())?;
    let doc = doc.chars();
    let live = live_references(m);
    // spans of variables that can no longer be referenced are irrelevant
    let reduce = |c: &Config| -> Config {
        let mut r = c.clone();
        for (x, s) in r.slots.iter_mut().enumerate() {
            if live[c.q] & (1 << x) == 0 && *s != UNSET {
                *s = if is_open(*s) { (1, 0) } else { (1, 1) };
            }
        }
        r
    };
    let start = Config {
        q: m.initial(),
        pos: 0,
        slots: vec![UNSET; m.num_vars()].into_boxed_slice(),
    };
    let mut seen: HashSet<Config> = HashSet::new();
    seen.insert(reduce(&start));
    let mut stack = vec![start];
    let mut buf = Vec::new();
    while let Some(c) = stack.pop() {
        if accepting(m, doc, &c) {
            return Ok(true);
        }
        buf.clear();
        successors(m, doc, &c, &mut buf);
        for n in buf.drain(..) {
            if seen.insert(reduce(&n)) {
                if seen.len() > max_configs {
                    return Err(Error::resource(format!(
                        "search visited more than {max_configs} configurations"
                    )));
                }
                stack.push(n);
            }
        }
    }
    Ok(false)
}

/// Limits for [`oracle_evaluate`].
pub const ORACLE_MAX_DOC: usize = 16;
pub const ORACLE_MAX_VARS: usize = 6;
pub const ORACLE_MAX_NODES: usize = 2_000_000;

#[derive(Clone)]
struct Expansion {
    out: Vec<char>,
    value: Vec<Option<Vec<char>>>,
    buffer: Vec<Option<Vec<char>>>,
    opened: Vec<bool>,
}

impl Expansion {
    fn push(&self, s: ExtSymbol, doc: &[char]) -> Option<Expansion> {
        let mut e = self.clone();
        let emitted = match s {
            ExtSymbol::Open(x) => {
                if e.opened[x] {
                    return None;
                }
                e.opened[x] = true;
                e.buffer[x] = Some(Vec::new());
                return Some(e);
            }
            ExtSymbol::Close(x) => {
                e.value[x] = Some(e.buffer[x].take()?);
                return Some(e);
            }
            ExtSymbol::Term(c) => vec![c],
            ExtSymbol::Ref(x) => e.value[x].clone()?,
        };
        for b in e.buffer.iter_mut().flatten() {
            b.extend_from_slice(&emitted);
        }
        e.out.extend(emitted);
        doc.starts_with(&e.out).then_some(e)
    }
}

/// Brute force: enumerate the words of `remove_eps_references(m)` up to
/// length `2|w| + 2|X|`, keeping those that dereference to `w`.
pub fn oracle_evaluate(m: &Nfa, w: &str) -> Result<SpanRelation> {
    let doc = Document::new(w, m.alphabet())?;
    let doc = doc.chars();
    if doc.len() > ORACLE_MAX_DOC || m.num_vars() > ORACLE_MAX_VARS {
        return Err(Error::resource("oracle limited to small documents and variable sets"));
    }
    let m2 = remove_eps_references(m)?;
    let bound = 2 * doc.len() + 2 * m.num_vars();
    let n = m.num_vars();
    let mut rel = SpanRelation::new(m.vars().to_vec(), doc.len());
    let start = Expansion {
        out: Vec::new(),
        value: vec![None; n],
        buffer: vec![None; n],
        opened: vec![false; n],
    };
    let mut nodes = 0usize;
    let mut word: MarkedWord = Vec::new();
    let init = m2.closure_of([m2.initial()]);
    oracle_rec(&m2, doc, &init, &start, bound, &mut word, &mut rel, &mut nodes)?;
    Ok(rel)
}

#[allow(clippy::too_many_arguments)]
fn oracle_rec(
    m: &Nfa,
    doc: &[char],
    set: &[StateId],
    exp: &Expansion,
    budget: usize,
    word: &mut MarkedWord,
    rel: &mut SpanRelation,
    nodes: &mut usize,
) -> Result<()> {
    *nodes += 1;
    if *nodes > ORACLE_MAX_NODES {
        return Err(Error::resource("oracle search too large"));
    }
    if set.iter().any(|&q| m.is_final(q)) && exp.out.len() == doc.len() && is_ref_word(word) {
        let (d, raw) = deref_tuple(word, m.num_vars())?;
        debug_assert_eq!(d.chars().collect::<Vec<_>>(), doc);
        rel.insert(raw_to_tuple(&raw, m.alphabet()))?;
    }
    if budget == 0 {
        return Ok(());
    }
    let mut succ: std::collections::BTreeMap<ExtSymbol, Vec<StateId>> = Default::default();
    for &q in set {
        for &(l, r) in m.out(q) {
            if let Some(s) = l {
                succ.entry(s).or_default().push(r);
            }
        }
    }
    for (s, targets) in succ {
        let Some(next) = exp.push(s, doc) else { continue };
        let set2 = m.closure_of(targets);
        word.push(s);
        oracle_rec(m, doc, &set2, &next, budget - 1, word, rel, nodes)?;
        word.pop();
    }
    Ok(())
}
