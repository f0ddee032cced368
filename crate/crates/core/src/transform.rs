//! Language-preserving automaton rewrites.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::nfa::{Builder, Nfa, StateId, DEFAULT_MAX_STATES};
use crate::symbol::{ExtSymbol, Marker, ValidOrder};

/// Largest variable count accepted by the marker-buffering constructions.
pub const MAX_BUFFERED_VARS: usize = 12;

/// Abstraction of a dereferenced length: 0, 1, or at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LengthClass {
    Zero,
    One,
    TwoPlus,
}

impl LengthClass {
    pub fn of_len(n: usize) -> Self {
        match n {
            0 => LengthClass::Zero,
            1 => LengthClass::One,
            _ => LengthClass::TwoPlus,
        }
    }

    pub fn add(self, other: LengthClass) -> LengthClass {
        match (self, other) {
            (LengthClass::Zero, c) | (c, LengthClass::Zero) => c,
            _ => LengthClass::TwoPlus,
        }
    }
}

impl fmt::Display for LengthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LengthClass::Zero => "zero",
            LengthClass::One => "one",
            LengthClass::TwoPlus => "two_plus",
        })
    }
}

/// Per-variable definition status with the length class of its content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum DefStatus {
    Unset,
    Open(LengthClass),
    Closed(LengthClass),
}

/// Deterministic scanner over a ref-word that threads length classes
/// through definitions. Fails on anything that is not a ref-word prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct LengthMonitor(pub Vec<DefStatus>);

impl LengthMonitor {
    pub fn new(num_vars: usize) -> Self {
        LengthMonitor(vec![DefStatus::Unset; num_vars])
    }

    pub fn step(&self, sym: ExtSymbol) -> std::result::Result<LengthMonitor, String> {
        let mut next = self.clone();
        let grow = |st: &mut Vec<DefStatus>, c: LengthClass| {
            for s in st.iter_mut() {
                if let DefStatus::Open(k) = s {
                    *k = k.add(c);
                }
            }
        };
        match sym {
            ExtSymbol::Open(x) => {
                if next.0[x] != DefStatus::Unset {
                    return Err(format!("variable #{x} opened twice"));
                }
                next.0[x] = DefStatus::Open(LengthClass::Zero);
            }
            ExtSymbol::Close(x) => match next.0[x] {
                DefStatus::Open(c) => next.0[x] = DefStatus::Closed(c),
                _ => return Err(format!("variable #{x} closed without being open")),
            },
            ExtSymbol::Term(_) => grow(&mut next.0, LengthClass::One),
            ExtSymbol::Ref(x) => match next.0[x] {
                DefStatus::Closed(c) => grow(&mut next.0, c),
                _ => return Err(format!("variable #{x} referenced before its definition closed")),
            },
        }
        Ok(next)
    }

    pub fn at_end(&self) -> Option<String> {
        self.0
            .iter()
            .position(|s| matches!(s, DefStatus::Open(_)))
            .map(|x| format!("variable #{x} never closed"))
    }
}

/// For every variable, the length classes its dereferenced definition can
/// take over the accepted words. Variables never defined map to the empty set.
pub fn length_class_analysis(m: &Nfa) -> Result<BTreeMap<String, BTreeSet<LengthClass>>> {
    let m = m.trim();
    let n = m.num_vars();
    let mut out: BTreeMap<String, BTreeSet<LengthClass>> =
        m.vars().iter().map(|v| (v.clone(), BTreeSet::new())).collect();
    let init = (m.initial(), LengthMonitor::new(n));
    let mut seen = HashSet::new();
    seen.insert(init.clone());
    let mut queue = VecDeque::from([init]);
    while let Some((q, mon)) = queue.pop_front() {
        if seen.len() > DEFAULT_MAX_STATES {
            return Err(Error::resource("length-class analysis state space too large"));
        }
        if m.is_final(q) {
            if let Some(msg) = mon.at_end() {
                return Err(Error::pre(format!("not a ref-language: {msg}")));
            }
            for (x, s) in mon.0.iter().enumerate() {
                if let DefStatus::Closed(c) = s {
                    out.get_mut(&m.vars()[x]).expect("known var").insert(*c);
                }
            }
        }
        for &(l, r) in m.out(q) {
            let next = match l {
                None => mon.clone(),
                Some(s) => mon
                    .step(s)
                    .map_err(|msg| Error::pre(format!("not a ref-language: {msg}")))?,
            };
            if seen.insert((r, next.clone())) {
                queue.push_back((r, next));
            }
        }
    }
    Ok(out)
}

/// Rewrites references to variables with an empty dereferenced value into
/// ε-transitions, so that no accepted word is ε-referencing.
///
/// States carry, per variable, one of ⊥, open, or ¬ε (non-empty so far).
pub fn remove_eps_references(m: &Nfa) -> Result<Nfa> {
    let n = m.num_vars();
    if n > 32 {
        return Err(Error::resource("too many variables for status tracking"));
    }
    // key: (state, open bits, non-empty bits)
    let mut b: Builder<(StateId, u32, u32)> =
        Builder::new(m.alphabet().clone(), (m.initial(), 0, 0), DEFAULT_MAX_STATES);
    while let Some((id, (q, open, ne))) = b.next_key() {
        if m.is_final(q) {
            b.nfa.set_final(id);
        }
        for &(l, r) in m.out(q) {
            let (label, key) = match l {
                None => (None, (r, open, ne)),
                Some(ExtSymbol::Open(x)) => (l, (r, open | 1 << x, ne & !(1 << x))),
                Some(ExtSymbol::Close(x)) => (l, (r, open & !(1 << x), ne)),
                Some(ExtSymbol::Term(_)) => (l, (r, 0, ne | open)),
                Some(ExtSymbol::Ref(x)) => {
                    if ne & (1 << x) != 0 && open & (1 << x) == 0 {
                        (l, (r, 0, ne | open))
                    } else {
                        (None, (r, open, ne))
                    }
                }
            };
            let t = b.state(key)?;
            b.nfa.add_transition(id, label, t);
        }
    }
    Ok(b.finish().trim())
}

fn guard_vars(m: &Nfa) -> Result<()> {
    if m.num_vars() > MAX_BUFFERED_VARS {
        return Err(Error::resource(format!(
            "{} variables exceed the limit of {MAX_BUFFERED_VARS} for marker buffering",
            m.num_vars()
        )));
    }
    Ok(())
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum BufKey {
    /// Original state with the pending marker set.
    Run(StateId, u32),
    /// Emitting the remaining pending markers, then `letter`, then `Run(to, ∅)`.
    Emit(u32, ExtSymbol, StateId),
    /// Emitting the remaining pending markers at the end of the word.
    End(u32),
}

/// Shared construction for normalization and permutation closure: every
/// maximal marker factor is buffered as a set and re-emitted either in
/// `order` or, when `order` is `None`, in every possible order.
fn buffer_markers(m: &Nfa, order: Option<&ValidOrder>, cap: usize) -> Result<Nfa> {
    guard_vars(m)?;
    // bit index of a marker inside the pending set
    let bit_of = |mk: Marker| -> u32 {
        match order {
            Some(o) => o.rank(mk) as u32,
            None => mk.bit() as u32,
        }
    };
    let marker_of_bit = |bit: u32| -> Marker {
        match order {
            Some(o) => o.markers()[bit as usize],
            None => Marker::from_bit(bit as usize),
        }
    };
    let choices = |set: u32| -> Vec<u32> {
        if set == 0 {
            Vec::new()
        } else if order.is_some() {
            vec![set.trailing_zeros()]
        } else {
            (0..32).filter(|i| set & (1 << i) != 0).collect()
        }
    };
    let mut b: Builder<BufKey> =
        Builder::new(m.alphabet().clone(), BufKey::Run(m.initial(), 0), cap);
    while let Some((id, key)) = b.next_key() {
        match key {
            BufKey::Run(q, set) => {
                if m.is_final(q) {
                    if set == 0 {
                        b.nfa.set_final(id);
                    } else {
                        let t = b.state(BufKey::End(set))?;
                        b.nfa.add_transition(id, None, t);
                    }
                }
                for &(l, r) in m.out(q) {
                    match l {
                        None => {
                            let t = b.state(BufKey::Run(r, set))?;
                            b.nfa.add_transition(id, None, t);
                        }
                        Some(s) if s.is_marker() => {
                            let bit = bit_of(s.marker().expect("marker"));
                            if set & (1 << bit) != 0 {
                                // repeated marker inside one factor: not subword-marked
                                continue;
                            }
                            let t = b.state(BufKey::Run(r, set | 1 << bit))?;
                            b.nfa.add_transition(id, None, t);
                        }
                        Some(s) => {
                            if set == 0 {
                                let t = b.state(BufKey::Run(r, 0))?;
                                b.nfa.add_transition(id, Some(s), t);
                            } else {
                                let t = b.state(BufKey::Emit(set, s, r))?;
                                b.nfa.add_transition(id, None, t);
                            }
                        }
                    }
                }
            }
            BufKey::Emit(set, letter, r) => {
                if set == 0 {
                    let t = b.state(BufKey::Run(r, 0))?;
                    b.nfa.add_transition(id, Some(letter), t);
                }
                for bit in choices(set) {
                    let t = b.state(BufKey::Emit(set & !(1 << bit), letter, r))?;
                    b.nfa.add_transition(id, Some(marker_of_bit(bit).symbol()), t);
                }
            }
            BufKey::End(set) => {
                if set == 0 {
                    b.nfa.set_final(id);
                }
                for bit in choices(set) {
                    let t = b.state(BufKey::End(set & !(1 << bit)))?;
                    b.nfa.add_transition(id, Some(marker_of_bit(bit).symbol()), t);
                }
            }
        }
    }
    Ok(b.finish().trim())
}

/// ⪯-normalization: every maximal marker factor is re-emitted sorted by
/// `ord`. References are treated as ordinary letters.
pub fn normalize(m: &Nfa, ord: &ValidOrder) -> Result<Nfa> {
    normalize_capped(m, ord, DEFAULT_MAX_STATES)
}

pub fn normalize_capped(m: &Nfa, ord: &ValidOrder, cap: usize) -> Result<Nfa> {
    if ord.markers().len() != 2 * m.num_vars() {
        return Err(Error::invalid("order does not match the automaton's variables"));
    }
    buffer_markers(m, Some(ord), cap)
}

/// Closure under reordering of every maximal marker factor.
pub fn permutation_closure(m: &Nfa) -> Result<Nfa> {
    permutation_closure_capped(m, DEFAULT_MAX_STATES)
}

pub fn permutation_closure_capped(m: &Nfa, cap: usize) -> Result<Nfa> {
    buffer_markers(m, None, cap)
}
