//! Word-level semantics of marked words and ref-words.
//!
//! Positions inside a marked word (as used in error messages) are 1-based
//! symbol indices of the marked word itself; spans are always positions of
//! the `wrd`-projection.

use crate::error::{Error, Result};
use crate::span::{Span, SpanTuple};
use crate::symbol::{unescape, Alphabet, ExtSymbol, ValidOrder, VarId};

pub type MarkedWord = Vec<ExtSymbol>;

/// A span tuple indexed by variable id.
pub type RawTuple = Vec<Option<Span>>;

pub fn raw_to_tuple(raw: &[Option<Span>], alphabet: &Alphabet) -> SpanTuple {
    let mut t = SpanTuple::new();
    for (x, s) in raw.iter().enumerate() {
        t.set(&alphabet.vars[x], *s);
    }
    t
}

pub fn tuple_to_raw(t: &SpanTuple, alphabet: &Alphabet) -> Result<RawTuple> {
    let mut raw = vec![None; alphabet.num_vars()];
    for (v, s) in &t.0 {
        raw[alphabet.var_id(v)?] = Some(*s);
    }
    Ok(raw)
}

enum Token {
    Open(String),
    Close(String),
    Ref(String),
    Term(char),
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let ident_end = |start: usize| {
        let mut j = start;
        if j < chars.len() && chars[j].is_ascii_alphabetic() {
            j += 1;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
        }
        j
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '<' || c == '&' {
            let j = ident_end(i + 1);
            if j == i + 1 {
                return Err(Error::Syntax {
                    offset: i,
                    msg: format!("expected a variable name after {c:?}"),
                });
            }
            let name: String = chars[i + 1..j].iter().collect();
            out.push(if c == '<' { Token::Open(name) } else { Token::Ref(name) });
            i = j;
        } else if c == '\\' {
            let Some(&e) = chars.get(i + 1) else {
                return Err(Error::Syntax {
                    offset: i,
                    msg: "dangling escape".into(),
                });
            };
            out.push(Token::Term(unescape(e)));
            i += 2;
        } else if c.is_ascii_alphabetic() {
            let j = ident_end(i);
            if chars.get(j) == Some(&'>') {
                out.push(Token::Close(chars[i..j].iter().collect()));
                i = j + 1;
            } else {
                out.extend(chars[i..j].iter().map(|&c| Token::Term(c)));
                i = j;
            }
        } else if c == '>' {
            return Err(Error::Syntax {
                offset: i,
                msg: "'>' must follow a variable name".into(),
            });
        } else {
            out.push(Token::Term(c));
            i += 1;
        }
    }
    Ok(out)
}

/// Parses the textual marked-word syntax (`<x`, `x>`, `&x`, terminals)
/// against a declared alphabet.
pub fn parse_word(text: &str, alphabet: &Alphabet) -> Result<MarkedWord> {
    tokenize(text)?
        .into_iter()
        .map(|t| match t {
            Token::Open(v) => Ok(ExtSymbol::Open(alphabet.var_id(&v)?)),
            Token::Close(v) => Ok(ExtSymbol::Close(alphabet.var_id(&v)?)),
            Token::Ref(v) => Ok(ExtSymbol::Ref(alphabet.var_id(&v)?)),
            Token::Term(c) if alphabet.has_term(c) => Ok(ExtSymbol::Term(c)),
            Token::Term(c) => Err(Error::UnknownTerminal(c)),
        })
        .collect()
}

/// Parses a marked word and infers its alphabet: terminals in order of first
/// occurrence, variables likewise.
pub fn parse_word_infer(text: &str) -> Result<(Alphabet, MarkedWord)> {
    let tokens = tokenize(text)?;
    let mut sigma: Vec<char> = Vec::new();
    let mut vars: Vec<String> = Vec::new();
    for t in &tokens {
        match t {
            Token::Term(c) if !sigma.contains(c) => sigma.push(*c),
            Token::Open(v) | Token::Close(v) | Token::Ref(v) if !vars.contains(v) => {
                vars.push(v.clone())
            }
            _ => {}
        }
    }
    let alphabet = Alphabet::new(sigma, vars)?;
    let word = parse_word(text, &alphabet)?;
    Ok((alphabet, word))
}

/// Renders a marked word; runs of terminals are written together and
/// separated from markers and references by single spaces.
pub fn render_word(word: &[ExtSymbol], alphabet: &Alphabet) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut run = String::new();
    for s in word {
        match s {
            ExtSymbol::Term(_) => run.push_str(&alphabet.render_symbol(s)),
            _ => {
                if !run.is_empty() {
                    parts.push(std::mem::take(&mut run));
                }
                parts.push(alphabet.render_symbol(s));
            }
        }
    }
    if !run.is_empty() {
        parts.push(run);
    }
    parts.join(" ")
}

/// Erases all markers; terminals and references stay in order.
pub fn wrd(v: &[ExtSymbol]) -> MarkedWord {
    v.iter().copied().filter(|s| s.is_letter()).collect()
}

/// Terminal content of a marker-free, reference-free word.
pub fn terminal_string(v: &[ExtSymbol]) -> Option<String> {
    v.iter()
        .map(|s| match s {
            ExtSymbol::Term(c) => Some(*c),
            _ => None,
        })
        .collect()
}

fn num_vars_in(v: &[ExtSymbol]) -> usize {
    v.iter().filter_map(|s| s.var()).map(|x| x + 1).max().unwrap_or(0)
}

/// Every variable's markers form either nothing or `⊢x … ⊣x`.
/// References count as ordinary letters.
pub fn is_subword_marked_word(v: &[ExtSymbol]) -> bool {
    let n = num_vars_in(v);
    let mut state = vec![0u8; n];
    for s in v {
        match *s {
            ExtSymbol::Open(x) => {
                if state[x] != 0 {
                    return false;
                }
                state[x] = 1;
            }
            ExtSymbol::Close(x) => {
                if state[x] != 1 {
                    return false;
                }
                state[x] = 2;
            }
            _ => {}
        }
    }
    state.iter().all(|&s| s != 1)
}

/// Subword-marked, and every reference to `x` occurs after `⊣x`.
pub fn is_ref_word(v: &[ExtSymbol]) -> bool {
    if !is_subword_marked_word(v) {
        return false;
    }
    let mut closed = vec![false; num_vars_in(v)];
    for s in v {
        match *s {
            ExtSymbol::Close(x) => closed[x] = true,
            ExtSymbol::Ref(x) if !closed[x] => return false,
            _ => {}
        }
    }
    true
}

/// The span tuple of a subword-marked word, over `num_vars` variables.
pub fn spt(v: &[ExtSymbol], num_vars: usize) -> Result<RawTuple> {
    if !is_subword_marked_word(v) {
        return Err(Error::pre("spt needs a subword-marked word"));
    }
    let mut raw = vec![None; num_vars.max(num_vars_in(v))];
    let mut open = vec![0usize; raw.len()];
    let mut pos = 1;
    for s in v {
        match *s {
            ExtSymbol::Open(x) => open[x] = pos,
            ExtSymbol::Close(x) => raw[x] = Some(Span { lo: open[x], hi: pos }),
            _ => pos += 1,
        }
    }
    raw.truncate(num_vars);
    raw.resize(num_vars, None);
    Ok(raw)
}

/// Dereferencing: every reference is replaced by the terminal content of
/// its variable's definition. Definitions are resolved in the order their
/// close markers appear, which is a valid dependency order because a
/// reference can only follow the close marker of its variable.
pub fn deref(v: &[ExtSymbol]) -> Result<MarkedWord> {
    if !is_ref_word(v) {
        return Err(Error::pre("deref needs a ref-word"));
    }
    let n = num_vars_in(v);
    let mut value: Vec<Option<Vec<char>>> = vec![None; n];
    let mut buffers: Vec<Option<Vec<char>>> = vec![None; n];
    let mut out = Vec::with_capacity(v.len());
    for s in v {
        let emitted: Vec<char> = match *s {
            ExtSymbol::Open(x) => {
                buffers[x] = Some(Vec::new());
                out.push(*s);
                continue;
            }
            ExtSymbol::Close(x) => {
                value[x] = buffers[x].take();
                out.push(*s);
                continue;
            }
            ExtSymbol::Term(c) => vec![c],
            ExtSymbol::Ref(x) => value[x]
                .clone()
                .ok_or_else(|| Error::pre("reference to an unresolved definition"))?,
        };
        for b in buffers.iter_mut().flatten() {
            b.extend_from_slice(&emitted);
        }
        out.extend(emitted.into_iter().map(ExtSymbol::Term));
    }
    Ok(out)
}

/// `spt(deref(v))` together with the dereferenced document.
pub fn deref_tuple(v: &[ExtSymbol], num_vars: usize) -> Result<(String, RawTuple)> {
    let d = deref(v)?;
    let doc = terminal_string(&wrd(&d)).expect("deref leaves only terminals");
    Ok((doc, spt(&d, num_vars)?))
}

/// Some referenced variable has an empty dereferenced span.
pub fn is_eps_referencing(v: &[ExtSymbol]) -> Result<bool> {
    let n = num_vars_in(v);
    let (_, t) = deref_tuple(v, n)?;
    Ok(v.iter().any(|s| match s {
        ExtSymbol::Ref(x) => t[*x].map_or(false, |sp| sp.is_empty()),
        _ => false,
    }))
}

/// Every maximal factor of markers is sorted by `ord`.
pub fn is_normalized(v: &[ExtSymbol], ord: &ValidOrder) -> bool {
    v.windows(2).all(|w| match (w[0].marker(), w[1].marker()) {
        (Some(a), Some(b)) => ord.rank(a) < ord.rank(b),
        _ => true,
    })
}

/// Number of references to `x` in `v`.
pub fn ref_count(v: &[ExtSymbol], x: VarId) -> usize {
    v.iter().filter(|s| **s == ExtSymbol::Ref(x)).count()
}
