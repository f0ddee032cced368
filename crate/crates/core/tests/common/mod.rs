//! Generators and brute-force helpers shared by the property tests and the
//! acceptance harness.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use reflspan_core::algebra::CoreExpr;
use reflspan_core::word::parse_word;
use reflspan_core::{Alphabet, ExtSymbol, Nfa, Span, SpanTuple};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn var_names(n: usize) -> Vec<String> {
    ["x", "y", "z", "u"].iter().take(n).map(|s| s.to_string()).collect()
}

/// All words over `sigma` of length at most `max`, shortest first.
pub fn words(sigma: &[char], max: usize) -> Vec<String> {
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

/// Every partial tuple over `vars` with spans of a document of length `n`.
pub fn candidate_tuples(vars: &[String], n: usize) -> Vec<SpanTuple> {
    let mut spans: Vec<Option<Span>> = vec![None];
    for lo in 1..=n + 1 {
        for hi in lo..=n + 1 {
            spans.push(Some(Span::new(lo, hi).unwrap()));
        }
    }
    let mut out = vec![SpanTuple::new()];
    for v in vars {
        let mut next = Vec::with_capacity(out.len() * spans.len());
        for t in &out {
            for s in &spans {
                let mut t = t.clone();
                t.set(v, *s);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// Knobs for [`random_marked_nfa`].
#[derive(Clone, Copy)]
pub struct Shape {
    pub max_states: usize,
    pub num_vars: usize,
    pub refs: bool,
    pub eps: bool,
    /// accept only in states where every variable is closed
    pub functional: bool,
}

/// A random trimmed automaton whose language is a ref-language (a
/// subword-marked language when `refs` is false). Every state carries a
/// per-variable status (unopened, open, closed) and transitions only move
/// between compatible statuses, so well-formedness holds by construction.
/// A random accepting skeleton path through shuffled open and close
/// markers keeps the language non-empty; extra transitions add branching
/// and loops. Returns `None` when trimming leaves nothing.
pub fn random_marked_nfa(r: &mut ChaCha8Rng, sigma: &str, shape: Shape) -> Option<Nfa> {
    let k = shape.num_vars;
    let a = Alphabet::new(sigma.chars(), var_names(k)).unwrap();
    let n = r.gen_range(2..=shape.max_states.max(2));
    // marker events in a random valid interleaving
    let mut events: Vec<ExtSymbol> = Vec::new();
    for x in 0..k {
        if shape.functional || r.gen_bool(0.85) {
            let i = r.gen_range(0..=events.len());
            events.insert(i, ExtSymbol::Open(x));
            let j = r.gen_range(i + 1..=events.len());
            events.insert(j, ExtSymbol::Close(x));
        }
    }
    if events.len() > n - 1 {
        return None;
    }
    let mut slots: Vec<usize> = (0..n - 1).collect();
    slots.shuffle(r);
    let mut slots: Vec<usize> = slots[..events.len()].to_vec();
    slots.sort_unstable();
    let mut status: Vec<Vec<u8>> = vec![vec![0; k]];
    let mut path: Vec<Option<ExtSymbol>> = Vec::new();
    let mut next_event = 0;
    for i in 0..n - 1 {
        let mut s = status[i].clone();
        if next_event < events.len() && slots[next_event] == i {
            let e = events[next_event];
            next_event += 1;
            match e {
                ExtSymbol::Open(x) => s[x] = 1,
                ExtSymbol::Close(x) => s[x] = 2,
                _ => unreachable!(),
            }
            path.push(Some(e));
        } else {
            path.push(None);
        }
        status.push(s);
    }
    let sym_for = |r: &mut ChaCha8Rng, p: &[u8]| -> Option<ExtSymbol> {
        let refs: Vec<usize> = (0..k).filter(|&x| shape.refs && p[x] == 2).collect();
        if shape.eps && r.gen_bool(0.1) {
            return None;
        }
        if !refs.is_empty() && r.gen_bool(0.6) {
            return Some(ExtSymbol::Ref(*refs.choose(r).unwrap()));
        }
        Some(ExtSymbol::Term(*a.sigma.choose(r).unwrap()))
    };
    let mut m = Nfa::new(a.clone());
    for _ in 1..n {
        m.add_state();
    }
    for (i, l) in path.iter().enumerate() {
        let l = match l {
            Some(e) => Some(*e),
            None => sym_for(r, &status[i]),
        };
        m.add_transition(i, l, i + 1);
    }
    for q in 0..n {
        if r.gen_bool(0.3) {
            let l = sym_for(r, &status[q]);
            m.add_transition(q, l, q);
        }
    }
    for _ in 0..r.gen_range(0..=n) {
        let (p, q) = (r.gen_range(0..n), r.gen_range(0..n));
        let diff: Vec<usize> = (0..k).filter(|&x| status[p][x] != status[q][x]).collect();
        let l = match diff.as_slice() {
            [] => sym_for(r, &status[p]),
            [x] if status[p][*x] == 0 && status[q][*x] == 1 => Some(ExtSymbol::Open(*x)),
            [x] if status[p][*x] == 1 && status[q][*x] == 2 => Some(ExtSymbol::Close(*x)),
            _ => continue,
        };
        m.add_transition(p, l, q);
    }
    m.set_final(n - 1);
    for q in 0..n - 1 {
        let ok = if shape.functional {
            status[q].iter().all(|&s| s == 2)
        } else {
            status[q].iter().all(|&s| s != 1)
        };
        if ok && r.gen_bool(0.3) {
            m.set_final(q);
        }
    }
    let m = m.trim();
    (!m.is_empty()).then_some(m)
}

pub fn random_ref_nfa(r: &mut ChaCha8Rng, max_states: usize) -> Nfa {
    loop {
        let shape = Shape {
            max_states,
            num_vars: r.gen_range(0..=2),
            refs: true,
            eps: r.gen_bool(0.3),
            functional: r.gen_bool(0.3),
        };
        if let Some(m) = random_marked_nfa(r, "ab", shape) {
            if m.num_states() <= max_states {
                return m;
            }
        }
    }
}

/// An automaton that may violate well-formedness: a ref-language automaton
/// with a few arbitrary extra transitions.
pub fn random_any_nfa(r: &mut ChaCha8Rng, max_states: usize) -> Nfa {
    let m = random_ref_nfa(r, max_states);
    let syms = m.alphabet().symbols();
    let mut out = m.clone();
    let n = out.num_states();
    for _ in 0..r.gen_range(0..=2) {
        let (p, q) = (r.gen_range(0..n), r.gen_range(0..n));
        out.add_transition(p, Some(*syms.choose(r).unwrap()), q);
    }
    out
}

/// A random variable-free regular expression over `ab`.
pub fn random_regex(r: &mut ChaCha8Rng, depth: usize) -> String {
    if depth == 0 || r.gen_bool(0.3) {
        return ["a", "b", "a", "b", "eps"].choose(r).unwrap().to_string();
    }
    match r.gen_range(0..3) {
        0 => format!("{} {}", random_regex(r, depth - 1), random_regex(r, depth - 1)),
        1 => format!("({}|{})", random_regex(r, depth - 1), random_regex(r, depth - 1)),
        _ => format!("({})*", random_regex(r, depth - 1)),
    }
}

/// Builds an automaton that reads the whitespace-separated tokens of
/// `spec` in sequence; `c*` is a self-loop on `c`, other tokens are marked
/// words.
pub fn linear(a: &Alphabet, spec: &str) -> Nfa {
    let mut m = Nfa::new(a.clone());
    let mut q = m.initial();
    for tok in spec.split_whitespace() {
        if let Some(c) = tok.strip_suffix('*') {
            let c = c.chars().next().unwrap();
            m.add_transition(q, Some(ExtSymbol::Term(c)), q);
            continue;
        }
        for s in parse_word(tok, a).unwrap() {
            let r = m.add_state();
            m.add_transition(q, Some(s), r);
            q = r;
        }
    }
    m.set_final(q);
    m
}

pub fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// The worked core expression with two overlapping equality classes.
pub fn overlapping_example() -> (CoreExpr, Nfa) {
    let a = Alphabet::from_strs("abc", &["x", "y", "xp", "yp"]).unwrap();
    let alpha = linear(&a, "<x a* b <y c x> b* <xp a* b c xp> y> <yp c b* a* b c yp>");
    let e = CoreExpr {
        select: vec![set(&["x", "xp"]), set(&["y", "yp"])],
        project: vec!["x".into(), "y".into()],
        ..CoreExpr::regular(alpha)
    };
    let b = Alphabet::from_strs("abc", &["x", "y"]).unwrap();
    (e, linear(&b, "<x a* b <y c x> b* &x y> &y"))
}

/// Documents for the worked example: everything up to length 5 plus the
/// terminal strings of accepted words up to length 18 and near misses.
pub fn overlapping_example_docs(e: &CoreExpr) -> BTreeSet<String> {
    use reflspan_core::word::{terminal_string, wrd};
    let mut docs: BTreeSet<String> = words(&['a', 'b', 'c'], 5).into_iter().collect();
    for v in e.nfa.enumerate_words(18) {
        let d = terminal_string(&wrd(&v)).unwrap();
        docs.insert(d.replacen('a', "b", 1));
        docs.insert(d.replacen("bc", "c", 1));
        docs.insert(d);
    }
    docs.insert("abcbabccbabc".into());
    docs.insert("aabcbbaabccbbaabc".into());
    docs
}
