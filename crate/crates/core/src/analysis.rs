//! Static analysis of refl-spanners.

use crate::classify::{check_functional, check_hierarchical, check_strongly_ref_extracting, Check, VariablePartition};
use crate::error::{Error, Result};
use crate::eval::require_ref_language;
use crate::nfa::{Nfa, DEFAULT_MAX_SUBSETS};
use crate::span::SpanTuple;
use crate::symbol::ValidOrder;
use crate::transform::normalize;
use crate::word::{deref_tuple, raw_to_tuple};

/// Whether some document has a non-empty relation; on success also returns
/// one such document with a tuple.
pub fn satisfiable_witness(m: &Nfa) -> Result<Option<(String, SpanTuple)>> {
    require_ref_language(m)?;
    let Some(v) = m.shortest_word() else {
        return Ok(None);
    };
    let (doc, raw) = deref_tuple(&v, m.num_vars())?;
    Ok(Some((doc, raw_to_tuple(&raw, m.alphabet()))))
}

/// Whether `⟦L(m)⟧(w) ≠ ∅` for some `w`, i.e. whether `L(m) ≠ ∅`.
pub fn satisfiable(m: &Nfa) -> Result<bool> {
    require_ref_language(m)?;
    Ok(!m.is_empty())
}

pub fn spanner_hierarchical(m: &Nfa) -> Result<Check> {
    require_ref_language(m)?;
    check_hierarchical(m)
}

pub fn spanner_functional(m: &Nfa) -> Result<Check> {
    require_ref_language(m)?;
    check_functional(m)
}

/// Outcome of a containment check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Containment {
    pub holds: bool,
    /// A document and a tuple produced by the left spanner but not by the
    /// right one.
    pub witness: Option<(String, SpanTuple)>,
}

fn prepare(m: &Nfa, p: &VariablePartition, ord: &ValidOrder, side: &str) -> Result<Nfa> {
    let c = check_strongly_ref_extracting(m, p)?;
    if !c.holds {
        return Err(Error::pre(format!(
            "{side} spanner is not strongly reference extracting: {}",
            c.describe(m.alphabet()).unwrap_or_default()
        )));
    }
    let n = normalize(m, ord)?;
    let c = check_strongly_ref_extracting(&n, p)?;
    if !c.holds {
        // normalization only reorders marker blocks; reaching this is a bug
        return Err(Error::invalid(format!(
            "normalization broke strong reference extraction of the {side} spanner: {}",
            c.describe(n.alphabet()).unwrap_or_default()
        )));
    }
    Ok(n)
}

/// Decides `⟦L(m1)⟧ ⊆ ⟦L(m2)⟧` for strongly reference extracting
/// languages by normalizing both with `ord` and testing `L ⊆ K`.
pub fn contains(m1: &Nfa, m2: &Nfa, p: &VariablePartition, ord: &ValidOrder) -> Result<Containment> {
    contains_capped(m1, m2, p, ord, DEFAULT_MAX_SUBSETS)
}

pub fn contains_capped(
    m1: &Nfa,
    m2: &Nfa,
    p: &VariablePartition,
    ord: &ValidOrder,
    cap: usize,
) -> Result<Containment> {
    let m2 = m2.align_to(m1.alphabet())?;
    let n1 = prepare(m1, p, ord, "left")?;
    let n2 = prepare(&m2, p, ord, "right")?;
    let inc = n1.inclusion_capped(&n2, cap)?;
    let witness = match inc.witness {
        Some(v) => {
            let (doc, raw) = deref_tuple(&v, n1.num_vars())?;
            Some((doc, raw_to_tuple(&raw, n1.alphabet())))
        }
        None => None,
    };
    Ok(Containment {
        holds: inc.included,
        witness,
    })
}

/// Containment in both directions; the first failing direction's witness
/// is reported, tagged with `true` when it comes from the left spanner.
pub fn equivalent(
    m1: &Nfa,
    m2: &Nfa,
    p: &VariablePartition,
    ord: &ValidOrder,
) -> Result<(bool, Option<(bool, String, SpanTuple)>)> {
    let a = contains(m1, m2, p, ord)?;
    if let Some((w, t)) = a.witness {
        return Ok((false, Some((true, w, t))));
    }
    let b = contains(m2, m1, p, ord)?;
    if let Some((w, t)) = b.witness {
        return Ok((false, Some((false, w, t))));
    }
    Ok((a.holds && b.holds, None))
}
