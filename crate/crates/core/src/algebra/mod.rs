//! Core spanners: relational operators, span fusion, the split
//! construction and the compilers between core spanners and refl-spanners.

mod compile;
mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::classify::check_subword_marked;
use crate::error::{Error, Result};
use crate::eval::evaluate_capped;
use crate::eval::DEFAULT_MAX_CONFIGS;
use crate::nfa::Nfa;
use crate::refx::parse_refx;
use crate::span::{span_fuse, SpanRelation, SpanTuple};
use crate::symbol::{Alphabet, ExtSymbol};

pub use compile::{check_non_overlapping, core_to_refl, core_to_refl_with, refl_to_core, Overlap, ReflForm};
pub use split::{piece_names, quasi_disjoint_normal_form, quasi_disjoint_normal_form_with, split};

/// A fusion `λ → x`: the sources and the target variable.
pub type Fusion = (BTreeSet<String>, String);

fn check_doc(a: &SpanRelation, b: &SpanRelation) -> Result<()> {
    if a.doc_len != b.doc_len {
        return Err(Error::invalid(format!(
            "relations over documents of length {} and {}",
            a.doc_len, b.doc_len
        )));
    }
    Ok(())
}

fn merged_vars(a: &[String], b: &[String]) -> Vec<String> {
    let mut vars = a.to_vec();
    vars.extend(b.iter().filter(|v| !a.contains(v)).cloned());
    vars
}

pub fn rel_union(a: &SpanRelation, b: &SpanRelation) -> Result<SpanRelation> {
    check_doc(a, b)?;
    let mut r = SpanRelation::new(merged_vars(&a.vars, &b.vars), a.doc_len);
    r.tuples = a.tuples.union(&b.tuples).cloned().collect();
    Ok(r)
}

/// Natural join: pairs of tuples agreeing on their common domain.
pub fn rel_join(a: &SpanRelation, b: &SpanRelation) -> Result<SpanRelation> {
    check_doc(a, b)?;
    let mut r = SpanRelation::new(merged_vars(&a.vars, &b.vars), a.doc_len);
    for s in &a.tuples {
        for t in &b.tuples {
            let compatible = s.0.iter().all(|(v, sp)| t.0.get(v).map_or(true, |o| o == sp));
            if compatible {
                let mut u = s.clone();
                u.0.extend(t.0.iter().map(|(v, sp)| (v.clone(), *sp)));
                r.tuples.insert(u);
            }
        }
    }
    Ok(r)
}

pub fn rel_project(r: &SpanRelation, keep: &[String]) -> SpanRelation {
    let vars: Vec<String> = keep.to_vec();
    let mut out = SpanRelation::new(vars, r.doc_len);
    out.tuples = r
        .tuples
        .iter()
        .map(|t| SpanTuple(t.0.iter().filter(|(v, _)| keep.contains(v)).map(|(v, s)| (v.clone(), *s)).collect()))
        .collect();
    out
}

/// String-equality selection: keeps tuples whose defined variables of `ys`
/// all carry the same factor of `w`.
pub fn rel_select_eq(r: &SpanRelation, ys: &BTreeSet<String>, w: &str) -> Result<SpanRelation> {
    let doc: Vec<char> = w.chars().collect();
    if doc.len() != r.doc_len {
        return Err(Error::invalid(format!(
            "document has length {} but the relation is over length {}",
            doc.len(),
            r.doc_len
        )));
    }
    let mut out = SpanRelation::new(r.vars.clone(), r.doc_len);
    out.tuples = r
        .tuples
        .iter()
        .filter(|t| {
            let mut vals = ys.iter().filter_map(|y| t.get(y)).map(|s| s.slice(&doc));
            match vals.next() {
                None => true,
                Some(first) => vals.all(|v| v == first),
            }
        })
        .cloned()
        .collect();
    Ok(out)
}

/// Applies every fusion to the original tuple at once: each target gets
/// the fusion of its sources, sources are dropped, other variables kept.
pub fn fuse_tuple(t: &SpanTuple, fusions: &[Fusion]) -> SpanTuple {
    let sources: BTreeSet<&String> = fusions.iter().flat_map(|(l, _)| l).collect();
    let mut out: BTreeMap<String, _> = t
        .0
        .iter()
        .filter(|(v, _)| !sources.contains(v))
        .map(|(v, s)| (v.clone(), *s))
        .collect();
    for (lambda, target) in fusions {
        let fused = lambda.iter().fold(None, |acc, y| span_fuse(acc, t.get(y)));
        match fused {
            Some(s) => {
                out.insert(target.clone(), s);
            }
            None => {
                out.remove(target);
            }
        }
    }
    SpanTuple(out)
}

/// Variables of a relation after fusing.
pub fn fused_vars(vars: &[String], fusions: &[Fusion]) -> Vec<String> {
    let sources: BTreeSet<&String> = fusions.iter().flat_map(|(l, _)| l).collect();
    let mut out: Vec<String> = vars.iter().filter(|v| !sources.contains(v)).cloned().collect();
    for (_, x) in fusions {
        if !out.contains(x) {
            out.push(x.clone());
        }
    }
    out
}

pub fn fuse_relation(r: &SpanRelation, fusions: &[Fusion]) -> Result<SpanRelation> {
    for (lambda, x) in fusions {
        if lambda.is_empty() {
            return Err(Error::invalid(format!("empty fusion source for {x}")));
        }
    }
    let mut out = SpanRelation::new(fused_vars(&r.vars, fusions), r.doc_len);
    out.tuples = r.tuples.iter().map(|t| fuse_tuple(t, fusions)).collect();
    Ok(out)
}

/// `π_Y ⊔_Λ ς=_E` applied to the regular spanner of `nfa`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreExpr {
    pub nfa: Nfa,
    pub select: Vec<BTreeSet<String>>,
    pub fuse: Vec<Fusion>,
    pub project: Vec<String>,
}

impl CoreExpr {
    /// The plain regular spanner of `nfa`.
    pub fn regular(nfa: Nfa) -> CoreExpr {
        let project = nfa.vars().to_vec();
        CoreExpr {
            nfa,
            select: Vec::new(),
            fuse: Vec::new(),
            project,
        }
    }

    pub fn output_vars(&self) -> &[String] {
        &self.project
    }

    /// Checks variable names and the pairwise disjointness of selections.
    pub fn validate(&self) -> Result<()> {
        let a = self.nfa.alphabet();
        let mut seen = BTreeSet::new();
        for class in &self.select {
            for v in class {
                a.var_id(v)?;
                if !seen.insert(v) {
                    return Err(Error::invalid(format!("{v} occurs in two selection classes")));
                }
            }
        }
        // sources may share variables: all targets are fused at once
        let mut targets = BTreeSet::new();
        for (lambda, x) in &self.fuse {
            if lambda.is_empty() {
                return Err(Error::invalid(format!("empty fusion source for {x}")));
            }
            if !targets.insert(x) {
                return Err(Error::invalid(format!("{x} is a fusion target twice")));
            }
            for v in lambda {
                a.var_id(v)?;
            }
        }
        let after = fused_vars(a.vars.as_slice(), &self.fuse);
        for y in &self.project {
            if !after.contains(y) {
                return Err(Error::UnknownVariable(y.clone()));
            }
        }
        Ok(())
    }

    /// Parses a configuration with lines `nfa=<path>`, `select=x,y;u,v`,
    /// `fuse=x,y->u;y,z->v` and `project=x,u`. The automaton path is
    /// resolved against `base`; `.refx` files are compiled, anything else
    /// is read in the automaton file format.
    pub fn from_config(text: &str, base: &Path) -> Result<CoreExpr> {
        let mut nfa = None;
        let mut select = Vec::new();
        let mut fuse = Vec::new();
        let mut project = None;
        let list = |s: &str| -> Vec<String> {
            s.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect()
        };
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("config line {}: expected key=value", n + 1)))?;
            let value = value.trim();
            match key.trim() {
                "nfa" => {
                    let path = base.join(value);
                    let body = std::fs::read_to_string(&path)
                        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
                    nfa = Some(if value.ends_with(".refx") {
                        parse_refx(&body)?.compile()?
                    } else {
                        Nfa::from_file_str(&body)?
                    });
                }
                "select" => {
                    for class in value.split(';').filter(|c| !c.trim().is_empty()) {
                        select.push(list(class).into_iter().collect());
                    }
                }
                "fuse" => fuse.extend(
                    parse_fusions(value).map_err(|e| Error::invalid(format!("config line {}: {e}", n + 1)))?,
                ),
                "project" => project = Some(list(value)),
                other => {
                    return Err(Error::invalid(format!("config line {}: unknown key {other:?}", n + 1)))
                }
            }
        }
        let nfa = nfa.ok_or_else(|| Error::invalid("config has no nfa= line"))?;
        let project = project.unwrap_or_else(|| fused_vars(nfa.vars(), &fuse));
        let e = CoreExpr {
            nfa,
            select,
            fuse,
            project,
        };
        e.validate()?;
        Ok(e)
    }

    /// The configuration lines for this expression with the given
    /// automaton path.
    pub fn render_config(&self, nfa_path: &str) -> String {
        let mut out = format!("nfa={nfa_path}\n");
        let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
        if !self.select.is_empty() {
            let classes: Vec<String> = self.select.iter().map(join).collect();
            let _ = writeln!(out, "select={}", classes.join(";"));
        }
        if !self.fuse.is_empty() {
            let _ = writeln!(out, "fuse={}", render_fusions(&self.fuse));
        }
        let _ = writeln!(out, "project={}", self.project.join(","));
        out
    }
}

/// Parses a fusion plan `x,y->u;y,z->v`.
pub fn parse_fusions(text: &str) -> Result<Vec<Fusion>> {
    let mut out = Vec::new();
    for f in text.split(';').filter(|c| !c.trim().is_empty()) {
        let (src, dst) = f
            .split_once("->")
            .ok_or_else(|| Error::invalid(format!("expected sources->target in {f:?}")))?;
        let src: BTreeSet<String> = src.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        out.push((src, dst.trim().to_string()));
    }
    Ok(out)
}

pub fn render_fusions(fusions: &[Fusion]) -> String {
    let fs: Vec<String> = fusions
        .iter()
        .map(|(l, x)| format!("{}->{x}", l.iter().cloned().collect::<Vec<_>>().join(",")))
        .collect();
    fs.join(";")
}

/// Evaluates a core expression: regular evaluation, then selections,
/// fusions and the projection.
pub fn eval_core(e: &CoreExpr, w: &str) -> Result<SpanRelation> {
    eval_core_capped(e, w, DEFAULT_MAX_CONFIGS)
}

pub fn eval_core_capped(e: &CoreExpr, w: &str, max_configs: usize) -> Result<SpanRelation> {
    e.validate()?;
    let c = check_subword_marked(&e.nfa)?;
    if !c.holds {
        return Err(Error::pre(format!(
            "core expression needs a subword-marked language: {}",
            c.describe(e.nfa.alphabet()).unwrap_or_default()
        )));
    }
    let mut r = evaluate_capped(&e.nfa, w, max_configs)?;
    for class in &e.select {
        r = rel_select_eq(&r, class, w)?;
    }
    r = fuse_relation(&r, &e.fuse)?;
    Ok(rel_project(&r, &e.project))
}

/// Union of two automata over the same terminals and variables.
pub fn nfa_union(m1: &Nfa, m2: &Nfa) -> Result<Nfa> {
    let m2 = m2.align_to(m1.alphabet())?;
    m1.union(&m2)
}

/// Erases the markers of variables outside `keep`.
pub fn nfa_project(m: &Nfa, keep: &[String]) -> Result<Nfa> {
    let a = m.alphabet();
    for y in keep {
        a.var_id(y)?;
    }
    let vars: Vec<String> = a.vars.iter().filter(|v| keep.contains(v)).cloned().collect();
    let b = Alphabet::new(a.sigma.clone(), vars.clone())?;
    let map: Vec<Option<usize>> = a.vars.iter().map(|v| b.var_index(v)).collect();
    if m
        .transitions()
        .iter()
        .any(|t| matches!(t.label, Some(ExtSymbol::Ref(x)) if map[x].is_none()))
    {
        return Err(Error::pre("projection would drop a referenced variable"));
    }
    Ok(m.relabel(b, |s| match s {
        ExtSymbol::Open(x) => map[x].map(ExtSymbol::Open),
        ExtSymbol::Close(x) => map[x].map(ExtSymbol::Close),
        ExtSymbol::Ref(x) => map[x].map(ExtSymbol::Ref),
        t => Some(t),
    }))
}
