use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// A span `[lo,hi⟩` over a document: 1-based, `hi` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub lo: usize,
    pub hi: usize,
}

impl Span {
    pub fn new(lo: usize, hi: usize) -> Result<Span> {
        if lo == 0 || lo > hi {
            return Err(Error::invalid(format!("bad span [{lo},{hi}>")));
        }
        Ok(Span { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }

    /// The factor of `doc` covered by this span.
    pub fn slice<'a, T>(&self, doc: &'a [T]) -> &'a [T] {
        &doc[self.lo - 1..self.hi - 1]
    }

    /// Positions as a set: `[lo,hi⟩ ∩ [lo',hi'⟩ ≠ ∅`.
    pub fn intersects(&self, other: &Span) -> bool {
        self.lo.max(other.lo) < self.hi.min(other.hi)
    }

    /// Containment of position sets; an empty span is contained in anything.
    pub fn contains(&self, other: &Span) -> bool {
        other.is_empty() || (self.lo <= other.lo && other.hi <= self.hi)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}⟩", self.lo, self.hi)
    }
}

/// Span fusion; `None` is ⊥ and acts as the identity.
pub fn span_fuse(a: Option<Span>, b: Option<Span>) -> Option<Span> {
    match (a, b) {
        (Some(a), Some(b)) => Some(Span {
            lo: a.lo.min(b.lo),
            hi: a.hi.max(b.hi),
        }),
        (Some(a), None) => Some(a),
        (None, b) => b,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpanRelationKind {
    Equal,
    Disjoint,
    Nested,
    Overlapping,
}

/// Classify a pair of spans. Disjointness follows the interval reading
/// (`hi ≤ lo'` or `hi' ≤ lo`), so `[3,6⟩` and `[5,5⟩` come out nested.
pub fn spans_relation(a: Span, b: Span) -> SpanRelationKind {
    if a == b {
        SpanRelationKind::Equal
    } else if a.hi <= b.lo || b.hi <= a.lo {
        SpanRelationKind::Disjoint
    } else if (a.lo <= b.lo && b.hi <= a.hi) || (b.lo <= a.lo && a.hi <= b.hi) {
        SpanRelationKind::Nested
    } else {
        SpanRelationKind::Overlapping
    }
}

/// A partial map from variable names to spans; absence is ⊥.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpanTuple(pub BTreeMap<String, Span>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TupleProperties {
    pub functional: bool,
    pub hierarchical: bool,
    pub quasi_disjoint: bool,
}

impl SpanTuple {
    pub fn new() -> Self {
        SpanTuple(BTreeMap::new())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Span)>) -> Self {
        SpanTuple(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn get(&self, var: &str) -> Option<Span> {
        self.0.get(var).copied()
    }

    pub fn set(&mut self, var: &str, span: Option<Span>) {
        match span {
            Some(s) => {
                self.0.insert(var.to_string(), s);
            }
            None => {
                self.0.remove(var);
            }
        }
    }

    pub fn domain(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(|k| k.as_str())
    }

    /// JSON object over `vars`, with `null` for ⊥.
    pub fn to_json(&self, vars: &[String]) -> Value {
        let mut obj = Map::new();
        for v in vars {
            let val = match self.0.get(v) {
                Some(s) => Value::from(vec![s.lo, s.hi]),
                None => Value::Null,
            };
            obj.insert(v.clone(), val);
        }
        for (k, s) in &self.0 {
            if !obj.contains_key(k) {
                obj.insert(k.clone(), Value::from(vec![s.lo, s.hi]));
            }
        }
        Value::Object(obj)
    }

    pub fn from_json(value: &Value) -> Result<SpanTuple> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::invalid("span tuple must be a JSON object"))?;
        let mut t = SpanTuple::new();
        for (k, v) in obj {
            match v {
                Value::Null => {}
                Value::Array(a) if a.len() == 2 => {
                    let lo = a[0].as_u64().ok_or_else(|| Error::invalid("span bound"))?;
                    let hi = a[1].as_u64().ok_or_else(|| Error::invalid("span bound"))?;
                    t.0.insert(k.clone(), Span::new(lo as usize, hi as usize)?);
                }
                _ => return Err(Error::invalid(format!("bad span for {k}"))),
            }
        }
        Ok(t)
    }

    pub fn parse_json(text: &str) -> Result<SpanTuple> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        SpanTuple::from_json(&v)
    }

    /// Human form `(x ↦ [1,3⟩, y ↦ ⊥)` over the listed variables.
    pub fn render(&self, vars: &[String]) -> String {
        let parts: Vec<String> = vars
            .iter()
            .map(|v| match self.0.get(v) {
                Some(s) => format!("{v} ↦ {s}"),
                None => format!("{v} ↦ ⊥"),
            })
            .collect();
        format!("({})", parts.join(", "))
    }

    pub fn properties(&self, vars: &[String]) -> TupleProperties {
        tuple_properties(self, vars)
    }
}

/// Functionality is relative to `vars`; the other two flags look only at
/// defined spans.
pub fn tuple_properties(t: &SpanTuple, vars: &[String]) -> TupleProperties {
    let functional = vars.iter().all(|v| t.0.contains_key(v));
    let spans: Vec<Span> = t.0.values().copied().collect();
    let mut hierarchical = true;
    let mut quasi_disjoint = true;
    for i in 0..spans.len() {
        for j in i + 1..spans.len() {
            let (a, b) = (spans[i], spans[j]);
            if a.intersects(&b) && !a.contains(&b) && !b.contains(&a) {
                hierarchical = false;
            }
            if !matches!(
                spans_relation(a, b),
                SpanRelationKind::Equal | SpanRelationKind::Disjoint
            ) {
                quasi_disjoint = false;
            }
        }
    }
    TupleProperties {
        functional,
        hierarchical,
        quasi_disjoint,
    }
}

/// A set of span tuples over a document of known length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanRelation {
    pub vars: Vec<String>,
    pub doc_len: usize,
    pub tuples: BTreeSet<SpanTuple>,
}

impl SpanRelation {
    pub fn new(vars: Vec<String>, doc_len: usize) -> Self {
        SpanRelation {
            vars,
            doc_len,
            tuples: BTreeSet::new(),
        }
    }

    pub fn insert(&mut self, t: SpanTuple) -> Result<bool> {
        if let Some((v, s)) = t.0.iter().find(|(_, s)| s.hi > self.doc_len + 1) {
            return Err(Error::invalid(format!(
                "span {s} of {v} exceeds document length {}",
                self.doc_len
            )));
        }
        Ok(self.tuples.insert(t))
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, t: &SpanTuple) -> bool {
        self.tuples.contains(t)
    }

    /// One tuple per line, in the relation's canonical order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for t in &self.tuples {
            out.push_str(&t.render(&self.vars));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(self.tuples.iter().map(|t| t.to_json(&self.vars)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(lo: usize, hi: usize) -> Span {
        Span::new(lo, hi).unwrap()
    }

    #[test]
    fn fuse_examples() {
        assert_eq!(span_fuse(Some(sp(3, 6)), Some(sp(5, 9))), Some(sp(3, 9)));
        assert_eq!(span_fuse(Some(sp(1, 5)), None), Some(sp(1, 5)));
        assert_eq!(span_fuse(None, Some(sp(1, 5))), Some(sp(1, 5)));
        assert_eq!(span_fuse(None, None), None);
    }

    #[test]
    fn relation_examples() {
        assert_eq!(spans_relation(sp(3, 6), sp(5, 5)), SpanRelationKind::Nested);
        assert_eq!(spans_relation(sp(1, 4), sp(4, 7)), SpanRelationKind::Disjoint);
        assert_eq!(
            spans_relation(sp(1, 5), sp(3, 8)),
            SpanRelationKind::Overlapping
        );
        assert_eq!(spans_relation(sp(2, 2), sp(2, 2)), SpanRelationKind::Equal);
    }

    #[test]
    fn tuple_property_examples() {
        let vars: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let t = SpanTuple::from_pairs([("x", sp(2, 8)), ("y", sp(3, 10)), ("z", sp(6, 7))]);
        let p = tuple_properties(&t, &vars);
        assert!(p.functional && !p.hierarchical);
        let t = SpanTuple::from_pairs([("x", sp(1, 7)), ("y", sp(2, 4))]);
        let p = tuple_properties(&t, &vars);
        assert!(!p.functional && p.hierarchical);
        let t = SpanTuple::from_pairs([("x", sp(1, 2)), ("y", sp(2, 3)), ("z", sp(3, 8))]);
        let p = tuple_properties(&t, &vars);
        assert!(p.functional && p.quasi_disjoint && p.hierarchical);
    }

    #[test]
    fn json_round_trip() {
        let vars: Vec<String> = vec!["x".into(), "y".into()];
        let t = SpanTuple::from_pairs([("x", sp(1, 4))]);
        let j = t.to_json(&vars);
        assert_eq!(j.to_string(), r#"{"x":[1,4],"y":null}"#);
        assert_eq!(SpanTuple::from_json(&j).unwrap(), t);
    }

    #[test]
    fn relation_rejects_long_spans() {
        let mut r = SpanRelation::new(vec!["x".into()], 3);
        assert!(r.insert(SpanTuple::from_pairs([("x", sp(1, 4))])).is_ok());
        assert!(r.insert(SpanTuple::from_pairs([("x", sp(1, 5))])).is_err());
    }
}
