use std::fmt;

use crate::error::{Error, Result};

pub type VarId = usize;

/// A letter of the extended alphabet Σ ∪ Γ_X ∪ X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtSymbol {
    Term(char),
    Open(VarId),
    Close(VarId),
    Ref(VarId),
}

impl ExtSymbol {
    pub fn is_marker(&self) -> bool {
        matches!(self, ExtSymbol::Open(_) | ExtSymbol::Close(_))
    }

    /// Terminals and references: the letters that survive `wrd`.
    pub fn is_letter(&self) -> bool {
        !self.is_marker()
    }

    pub fn marker(&self) -> Option<Marker> {
        match *self {
            ExtSymbol::Open(x) => Some(Marker::Open(x)),
            ExtSymbol::Close(x) => Some(Marker::Close(x)),
            _ => None,
        }
    }

    pub fn var(&self) -> Option<VarId> {
        match *self {
            ExtSymbol::Open(x) | ExtSymbol::Close(x) | ExtSymbol::Ref(x) => Some(x),
            ExtSymbol::Term(_) => None,
        }
    }
}

/// An element of Γ_X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Marker {
    Open(VarId),
    Close(VarId),
}

impl Marker {
    /// Index in a fixed enumeration of Γ_X: `⊢x ↦ 2x`, `⊣x ↦ 2x+1`.
    pub fn bit(&self) -> usize {
        match *self {
            Marker::Open(x) => 2 * x,
            Marker::Close(x) => 2 * x + 1,
        }
    }

    pub fn from_bit(bit: usize) -> Marker {
        if bit % 2 == 0 {
            Marker::Open(bit / 2)
        } else {
            Marker::Close(bit / 2)
        }
    }

    pub fn symbol(&self) -> ExtSymbol {
        match *self {
            Marker::Open(x) => ExtSymbol::Open(x),
            Marker::Close(x) => ExtSymbol::Close(x),
        }
    }

    pub fn var(&self) -> VarId {
        match *self {
            Marker::Open(x) | Marker::Close(x) => x,
        }
    }
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// The declared terminal alphabet Σ and variable set X.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    pub sigma: Vec<char>,
    pub vars: Vec<String>,
}

impl Alphabet {
    pub fn new(sigma: impl IntoIterator<Item = char>, vars: impl IntoIterator<Item = String>) -> Result<Self> {
        let sigma: Vec<char> = sigma.into_iter().collect();
        let vars: Vec<String> = vars.into_iter().collect();
        for (i, c) in sigma.iter().enumerate() {
            if sigma[..i].contains(c) {
                return Err(Error::invalid(format!("duplicate terminal {c:?} in sigma")));
            }
        }
        for (i, v) in vars.iter().enumerate() {
            if !is_identifier(v) {
                return Err(Error::invalid(format!("bad variable name {v:?}")));
            }
            if vars[..i].contains(v) {
                return Err(Error::invalid(format!("duplicate variable {v:?}")));
            }
        }
        Ok(Alphabet { sigma, vars })
    }

    pub fn from_strs(sigma: &str, vars: &[&str]) -> Result<Self> {
        Alphabet::new(sigma.chars(), vars.iter().map(|s| s.to_string()))
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn var_id(&self, name: &str) -> Result<VarId> {
        self.var_index(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn has_term(&self, c: char) -> bool {
        self.sigma.contains(&c)
    }

    pub fn check_symbol(&self, s: &ExtSymbol) -> Result<()> {
        match *s {
            ExtSymbol::Term(c) if !self.has_term(c) => Err(Error::UnknownTerminal(c)),
            ExtSymbol::Open(x) | ExtSymbol::Close(x) | ExtSymbol::Ref(x) if x >= self.vars.len() => {
                Err(Error::invalid(format!("variable index {x} out of range")))
            }
            _ => Ok(()),
        }
    }

    /// Every symbol of Σ ∪ Γ_X ∪ X.
    pub fn symbols(&self) -> Vec<ExtSymbol> {
        let mut out: Vec<ExtSymbol> = self.sigma.iter().map(|&c| ExtSymbol::Term(c)).collect();
        for x in 0..self.vars.len() {
            out.push(ExtSymbol::Open(x));
            out.push(ExtSymbol::Close(x));
            out.push(ExtSymbol::Ref(x));
        }
        out
    }

    pub fn check_document(&self, doc: &str) -> Result<Vec<char>> {
        doc.chars()
            .map(|c| if self.has_term(c) { Ok(c) } else { Err(Error::UnknownTerminal(c)) })
            .collect()
    }

    /// A variable name not yet in use, derived from `base`.
    pub fn fresh_name(&self, base: &str, taken: &[String]) -> String {
        let mut name = base.to_string();
        while self.vars.contains(&name) || taken.contains(&name) {
            name.push('_');
        }
        name
    }

    pub fn render_symbol(&self, s: &ExtSymbol) -> String {
        match *s {
            ExtSymbol::Term(c) => escape_term(c),
            ExtSymbol::Open(x) => format!("<{}", self.vars[x]),
            ExtSymbol::Close(x) => format!("{}>", self.vars[x]),
            ExtSymbol::Ref(x) => format!("&{}", self.vars[x]),
        }
    }

    pub fn render_marker(&self, m: &Marker) -> String {
        self.render_symbol(&m.symbol())
    }
}

pub(crate) fn escape_term(c: char) -> String {
    match c {
        ' ' => "\\s".into(),
        '\n' => "\\n".into(),
        '\t' => "\\t".into(),
        '<' | '>' | '&' | '\\' | '(' | ')' | '|' | '*' | '+' | '?' | '{' | '}' => format!("\\{c}"),
        c => c.to_string(),
    }
}

pub(crate) fn unescape(c: char) -> char {
    match c {
        's' => ' ',
        'n' => '\n',
        't' => '\t',
        c => c,
    }
}

/// A total order on Γ_X in which every `⊢x` precedes `⊣x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidOrder {
    seq: Vec<Marker>,
    rank: Vec<usize>,
}

impl ValidOrder {
    pub fn new(seq: Vec<Marker>, num_vars: usize) -> Result<Self> {
        if seq.len() != 2 * num_vars {
            return Err(Error::invalid(format!(
                "order lists {} markers, expected {}",
                seq.len(),
                2 * num_vars
            )));
        }
        let mut rank = vec![usize::MAX; 2 * num_vars];
        for (i, m) in seq.iter().enumerate() {
            if m.var() >= num_vars || rank[m.bit()] != usize::MAX {
                return Err(Error::invalid("order repeats or misnames a marker"));
            }
            rank[m.bit()] = i;
        }
        for x in 0..num_vars {
            if rank[2 * x] > rank[2 * x + 1] {
                return Err(Error::invalid(format!(
                    "order places the close marker of variable #{x} before its open marker"
                )));
            }
        }
        Ok(ValidOrder { seq, rank })
    }

    /// `⊢x1 ⪯ ⊣x1 ⪯ ⊢x2 ⪯ ⊣x2 ⪯ …` for the given variable sequence.
    pub fn from_var_sequence(vars: &[VarId], num_vars: usize) -> Result<Self> {
        let seq = vars
            .iter()
            .flat_map(|&x| [Marker::Open(x), Marker::Close(x)])
            .collect();
        ValidOrder::new(seq, num_vars)
    }

    pub fn default_for(num_vars: usize) -> Self {
        let vars: Vec<VarId> = (0..num_vars).collect();
        ValidOrder::from_var_sequence(&vars, num_vars).expect("identity order is valid")
    }

    /// Parses either `x,y,z` (a variable sequence) or an explicit list of
    /// all markers such as `<x,<y,x>,y>`.
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self> {
        let items: Vec<&str> = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let n = alphabet.num_vars();
        if items.iter().all(|s| is_identifier(s)) {
            let vars = items
                .iter()
                .map(|s| alphabet.var_id(s))
                .collect::<Result<Vec<_>>>()?;
            return ValidOrder::from_var_sequence(&vars, n);
        }
        let mut seq = Vec::new();
        for item in items {
            if let Some(name) = item.strip_prefix('<') {
                seq.push(Marker::Open(alphabet.var_id(name)?));
            } else if let Some(name) = item.strip_suffix('>') {
                seq.push(Marker::Close(alphabet.var_id(name)?));
            } else {
                return Err(Error::invalid(format!("bad marker {item:?} in order")));
            }
        }
        ValidOrder::new(seq, n)
    }

    pub fn markers(&self) -> &[Marker] {
        &self.seq
    }

    pub fn rank(&self, m: Marker) -> usize {
        self.rank[m.bit()]
    }

    pub fn render(&self, alphabet: &Alphabet) -> String {
        self.seq
            .iter()
            .map(|m| alphabet.render_marker(m))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Display for ExtSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtSymbol::Term(c) => write!(f, "{c}"),
            ExtSymbol::Open(x) => write!(f, "<#{x}"),
            ExtSymbol::Close(x) => write!(f, "#{x}>"),
            ExtSymbol::Ref(x) => write!(f, "&#{x}"),
        }
    }
}
