//! The email extraction example: local parts of addresses that occur in two
//! different entries of a `#`-separated corpus, both times at a Berlin
//! university domain.

use std::collections::BTreeSet;

use crate::error::Result;
use crate::eval::evaluate;
use crate::nfa::Nfa;
use crate::refx::{parse_refx, RefxFile};

const LOWER: &str = "abcdefghijklmnopqrstuvwxyz";
const DIGITS: &str = "0123456789";
/// Punctuation allowed in documents besides letters and digits.
const PUNCT: &str = " .,:-@";

/// Document alphabet: lowercase letters, digits, `␣.,:-@` and the entry
/// separator `#`.
pub fn email_sigma() -> Vec<char> {
    LOWER.chars().chain(DIGITS.chars()).chain(PUNCT.chars()).chain(['#']).collect()
}

fn class(chars: impl Iterator<Item = char>) -> String {
    let alts: Vec<String> = chars
        .map(|c| match c {
            ' ' => "\\s".to_string(),
            c if c.is_ascii_alphanumeric() => c.to_string(),
            c => format!("\\{c}"),
        })
        .collect();
    format!("({})", alts.join("|"))
}

/// The spanner as `.refx` text.
pub fn email_refx() -> String {
    let any = class(email_sigma().into_iter());
    let inentry = class(email_sigma().into_iter().filter(|&c| c != '#'));
    let local = class(LOWER.chars().chain(DIGITS.chars()).chain(".-".chars()));
    let dom = "(hu|tu|fu)\\-berlin\\.de";
    let sigma: String = email_sigma()
        .into_iter()
        .map(|c| if c == ' ' { "\\s".to_string() } else { c.to_string() })
        .collect();
    format!(
        "sigma: {sigma}\nvars: x\n\
         {any}* \\# {inentry}* email\\: x{{{local}+}} \\@ {dom} {inentry}* \\# {any}*\n\
         email\\: &x \\@ {dom} {inentry}* \\# {any}*\n"
    )
}

pub fn email_spanner() -> Result<Nfa> {
    let f: RefxFile = parse_refx(&email_refx())?;
    f.compile()
}

/// Synthetic corpus of three entries. Only `alice` appears in two entries
/// with a Berlin address both times; `bob` moves to another domain and
/// `carol` is never in Berlin.
pub const SAMPLE_CORPUS: &str = "#title: spanners. author: alice email:alice@hu-berlin.de, \
author: bob email:bob@tu-berlin.de\
#title: references. author: carol email:carol@uni-potsdam.de, author: alice email:alice@hu-berlin.de\
#title: words. author: bob email:bob@mit.edu, author: carol email:carol@uni-potsdam.de#";

/// Local parts extracted from `doc`, sorted and without duplicates.
pub fn repeat_authors(doc: &str) -> Result<Vec<String>> {
    let m = email_spanner()?;
    let chars: Vec<char> = doc.chars().collect();
    let rel = evaluate(&m, doc)?;
    let mut out = BTreeSet::new();
    for t in &rel.tuples {
        if let Some(s) = t.get("x") {
            out.insert(chars[s.lo - 1..s.hi - 1].iter().collect::<String>());
        }
    }
    Ok(out.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_corpus() {
        assert_eq!(repeat_authors(SAMPLE_CORPUS).unwrap(), vec!["alice"]);
    }

    #[test]
    fn same_entry_does_not_count() {
        let doc = "#a email:dan@fu-berlin.de email:dan@fu-berlin.de#b#";
        assert!(repeat_authors(doc).unwrap().is_empty());
        let doc = "#a email:dan@fu-berlin.de#b email:dan@tu-berlin.de#";
        assert_eq!(repeat_authors(doc).unwrap(), vec!["dan"]);
    }
}
