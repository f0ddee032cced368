use std::collections::{BTreeMap, HashMap, VecDeque};
use std::hash::Hash;
use std::sync::OnceLock;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::symbol::{Alphabet, ExtSymbol, VarId};

/// A transition label; `None` is ε.
pub type Label = Option<ExtSymbol>;

pub type StateId = usize;

/// Default cap on the number of states an on-the-fly construction may create.
pub const DEFAULT_MAX_STATES: usize = 2_000_000;

/// Default cap on subset-states explored by [`Nfa::inclusion`].
pub const DEFAULT_MAX_SUBSETS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub from: StateId,
    pub label: Label,
    pub to: StateId,
}

/// Nondeterministic automaton over Σ ∪ Γ_X ∪ X with ε-transitions.
///
/// Transitions are kept in insertion order so the file format round-trips
/// exactly. Adjacency lists and ε-closures are computed on first use.
#[derive(Debug, Clone)]
pub struct Nfa {
    alphabet: Alphabet,
    num_states: usize,
    initial: StateId,
    finals: Vec<StateId>,
    transitions: Vec<Transition>,
    adj: OnceLock<Vec<Vec<(Label, StateId)>>>,
    eps: OnceLock<Vec<Vec<StateId>>>,
    final_mask: OnceLock<Vec<bool>>,
}

impl PartialEq for Nfa {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet
            && self.num_states == other.num_states
            && self.initial == other.initial
            && self.finals == other.finals
            && self.transitions == other.transitions
    }
}

impl Eq for Nfa {}

/// Outcome of a language inclusion check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inclusion {
    pub included: bool,
    /// A word of `L(m1) \ L(m2)` when not included.
    pub witness: Option<Vec<ExtSymbol>>,
}

impl Nfa {
    /// A single non-final initial state and no transitions.
    pub fn new(alphabet: Alphabet) -> Nfa {
        Nfa {
            alphabet,
            num_states: 1,
            initial: 0,
            finals: Vec::new(),
            transitions: Vec::new(),
            adj: OnceLock::new(),
            eps: OnceLock::new(),
            final_mask: OnceLock::new(),
        }
    }

    fn invalidate(&mut self) {
        self.adj = OnceLock::new();
        self.eps = OnceLock::new();
        self.final_mask = OnceLock::new();
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn vars(&self) -> &[String] {
        &self.alphabet.vars
    }

    pub fn num_vars(&self) -> usize {
        self.alphabet.vars.len()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    /// |M| as states plus transitions.
    pub fn size(&self) -> usize {
        self.num_states + self.transitions.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn finals(&self) -> &[StateId] {
        &self.finals
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn add_state(&mut self) -> StateId {
        self.num_states += 1;
        self.invalidate();
        self.num_states - 1
    }

    pub fn set_initial(&mut self, q: StateId) {
        assert!(q < self.num_states);
        self.initial = q;
    }

    pub fn set_final(&mut self, q: StateId) {
        assert!(q < self.num_states);
        if !self.finals.contains(&q) {
            self.finals.push(q);
            self.final_mask = OnceLock::new();
        }
    }

    pub fn add_transition(&mut self, from: StateId, label: Label, to: StateId) {
        assert!(from < self.num_states && to < self.num_states, "state out of range");
        debug_assert!(label.map_or(true, |s| self.alphabet.check_symbol(&s).is_ok()));
        self.transitions.push(Transition { from, label, to });
        self.adj = OnceLock::new();
        self.eps = OnceLock::new();
    }

    pub fn with_alphabet(&self, alphabet: Alphabet) -> Nfa {
        let mut m = self.clone();
        m.alphabet = alphabet;
        m
    }

    /// Re-expresses the automaton over `alphabet`, which must declare the
    /// same terminals and variables, possibly in another order.
    pub fn align_to(&self, alphabet: &Alphabet) -> Result<Nfa> {
        let a = &self.alphabet;
        let same_sigma = a.sigma.len() == alphabet.sigma.len()
            && a.sigma.iter().all(|c| alphabet.sigma.contains(c));
        let map: Option<Vec<VarId>> = a.vars.iter().map(|v| alphabet.var_index(v)).collect();
        match map {
            Some(map) if same_sigma && a.vars.len() == alphabet.vars.len() => {
                Ok(self.relabel(alphabet.clone(), |s| {
                    Some(match s {
                        ExtSymbol::Open(x) => ExtSymbol::Open(map[x]),
                        ExtSymbol::Close(x) => ExtSymbol::Close(map[x]),
                        ExtSymbol::Ref(x) => ExtSymbol::Ref(map[x]),
                        t => t,
                    })
                }))
            }
            _ => Err(Error::AlphabetMismatch(format!(
                "sigma {:?}/{:?}, vars {:?}/{:?}",
                a.sigma, alphabet.sigma, a.vars, alphabet.vars
            ))),
        }
    }

    pub fn is_final(&self, q: StateId) -> bool {
        self.final_mask.get_or_init(|| {
            let mut mask = vec![false; self.num_states];
            for &f in &self.finals {
                mask[f] = true;
            }
            mask
        })[q]
    }

    pub fn out(&self, q: StateId) -> &[(Label, StateId)] {
        &self.adj.get_or_init(|| {
            let mut adj = vec![Vec::new(); self.num_states];
            for t in &self.transitions {
                adj[t.from].push((t.label, t.to));
            }
            adj
        })[q]
    }

    /// Sorted ε-closure of a single state, cached per automaton.
    pub fn eps_closure(&self, q: StateId) -> &[StateId] {
        &self.eps.get_or_init(|| {
            (0..self.num_states)
                .map(|s| {
                    let mut seen = vec![s];
                    let mut stack = vec![s];
                    while let Some(p) = stack.pop() {
                        for &(l, r) in self.out(p) {
                            if l.is_none() && !seen.contains(&r) {
                                seen.push(r);
                                stack.push(r);
                            }
                        }
                    }
                    seen.sort_unstable();
                    seen
                })
                .collect()
        })[q]
    }

    pub fn closure_of(&self, states: impl IntoIterator<Item = StateId>) -> Vec<StateId> {
        let mut out: Vec<StateId> = states
            .into_iter()
            .flat_map(|q| self.eps_closure(q).iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// ε-closed successor set after reading `sym` from the (closed) set `set`.
    pub fn step(&self, set: &[StateId], sym: ExtSymbol) -> Vec<StateId> {
        let targets = set.iter().flat_map(|&q| {
            self.out(q)
                .iter()
                .filter(move |(l, _)| *l == Some(sym))
                .map(|&(_, r)| r)
        });
        self.closure_of(targets.collect::<Vec<_>>())
    }

    pub fn accepts(&self, word: &[ExtSymbol]) -> bool {
        let mut cur = self.closure_of([self.initial]);
        for &s in word {
            if cur.is_empty() {
                return false;
            }
            cur = self.step(&cur, s);
        }
        cur.iter().any(|&q| self.is_final(q))
    }

    pub fn check_same_alphabet(&self, other: &Nfa) -> Result<()> {
        if self.alphabet != other.alphabet {
            return Err(Error::AlphabetMismatch(format!(
                "sigma {:?}/{:?}, vars {:?}/{:?}",
                self.alphabet.sigma, other.alphabet.sigma, self.alphabet.vars, other.alphabet.vars
            )));
        }
        Ok(())
    }

    /// Accepts every word over the full extended alphabet.
    pub fn universal(alphabet: Alphabet) -> Nfa {
        let mut m = Nfa::new(alphabet);
        m.set_final(0);
        for s in m.alphabet.symbols() {
            m.add_transition(0, Some(s), 0);
        }
        m
    }

    /// Accepts exactly the given words.
    pub fn from_words(alphabet: Alphabet, words: &[Vec<ExtSymbol>]) -> Nfa {
        let mut m = Nfa::new(alphabet);
        for w in words {
            let mut q = 0;
            for &s in w {
                let r = m.add_state();
                m.add_transition(q, Some(s), r);
                q = r;
            }
            m.set_final(q);
        }
        m
    }

    pub fn product(&self, other: &Nfa) -> Result<Nfa> {
        self.check_same_alphabet(other)?;
        let mut index = PairIndex::new(self.num_states, other.num_states);
        let mut m = Nfa::new(self.alphabet.clone());
        let mut keys = vec![(self.initial, other.initial)];
        index.insert((self.initial, other.initial), 0);
        let mut intern = |keys: &mut Vec<(StateId, StateId)>, m: &mut Nfa, key: (StateId, StateId)| {
            if let Some(id) = index.get(key) {
                return id;
            }
            let id = m.add_state_raw();
            index.insert(key, id);
            keys.push(key);
            id
        };
        let mut cursor = 0;
        while cursor < keys.len() {
            let id = cursor;
            let (p, q) = keys[cursor];
            cursor += 1;
            if self.is_final(p) && other.is_final(q) {
                m.finals.push(id);
            }
            for &(l, p2) in self.out(p) {
                if l.is_none() {
                    let t = intern(&mut keys, &mut m, (p2, q));
                    m.transitions.push(Transition { from: id, label: None, to: t });
                }
            }
            for &(l, q2) in other.out(q) {
                if l.is_none() {
                    let t = intern(&mut keys, &mut m, (p, q2));
                    m.transitions.push(Transition { from: id, label: None, to: t });
                }
            }
            for &(l1, p2) in self.out(p) {
                let Some(s) = l1 else { continue };
                for &(l2, q2) in other.out(q) {
                    if l2 == Some(s) {
                        let t = intern(&mut keys, &mut m, (p2, q2));
                        m.transitions.push(Transition { from: id, label: Some(s), to: t });
                    }
                }
            }
        }
        m.invalidate();
        Ok(m)
    }

    fn forward_reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states];
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        while let Some(q) = stack.pop() {
            for &(_, r) in self.out(q) {
                if !seen[r] {
                    seen[r] = true;
                    stack.push(r);
                }
            }
        }
        seen
    }

    fn backward_reachable(&self) -> Vec<bool> {
        let mut rev = vec![Vec::new(); self.num_states];
        for t in &self.transitions {
            rev[t.to].push(t.from);
        }
        let mut seen = vec![false; self.num_states];
        let mut stack: Vec<StateId> = self.finals.clone();
        for &f in &self.finals {
            seen[f] = true;
        }
        while let Some(q) = stack.pop() {
            for &p in &rev[q] {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        seen
    }

    /// True iff no final state is reachable; linear in |M|.
    pub fn is_empty(&self) -> bool {
        let fwd = self.forward_reachable();
        !self.finals.iter().any(|&f| fwd[f])
    }

    /// Removes states that are unreachable or cannot reach a final state.
    pub fn trim(&self) -> Nfa {
        let fwd = self.forward_reachable();
        let bwd = self.backward_reachable();
        let useful: Vec<bool> = (0..self.num_states).map(|q| fwd[q] && bwd[q]).collect();
        if !useful[self.initial] {
            return Nfa::new(self.alphabet.clone());
        }
        let mut map = vec![usize::MAX; self.num_states];
        let mut next = 0;
        // keep the initial state first, then preserve relative order
        map[self.initial] = 0;
        next += 1;
        for q in 0..self.num_states {
            if useful[q] && q != self.initial {
                map[q] = next;
                next += 1;
            }
        }
        let mut m = Nfa::new(self.alphabet.clone());
        m.num_states = next;
        for &f in &self.finals {
            if useful[f] {
                m.finals.push(map[f]);
            }
        }
        for t in &self.transitions {
            if useful[t.from] && useful[t.to] {
                m.transitions.push(Transition {
                    from: map[t.from],
                    label: t.label,
                    to: map[t.to],
                });
            }
        }
        m
    }

    /// A shortest accepted word (ε-steps cost nothing), via 0-1 BFS.
    pub fn shortest_word(&self) -> Option<Vec<ExtSymbol>> {
        let n = self.num_states;
        let mut dist = vec![usize::MAX; n];
        let mut parent: Vec<Option<(StateId, Label)>> = vec![None; n];
        let mut dq = VecDeque::new();
        dist[self.initial] = 0;
        dq.push_back(self.initial);
        while let Some(q) = dq.pop_front() {
            for &(l, r) in self.out(q) {
                let w = usize::from(l.is_some());
                if dist[q] + w < dist[r] {
                    dist[r] = dist[q] + w;
                    parent[r] = Some((q, l));
                    if w == 0 {
                        dq.push_front(r);
                    } else {
                        dq.push_back(r);
                    }
                }
            }
        }
        let f = self
            .finals
            .iter()
            .copied()
            .filter(|&f| dist[f] != usize::MAX)
            .min_by_key(|&f| dist[f])?;
        let mut word = Vec::new();
        let mut q = f;
        while let Some((p, l)) = parent[q] {
            if let Some(s) = l {
                word.push(s);
            }
            q = p;
        }
        word.reverse();
        Some(word)
    }

    /// Minimal number of non-ε steps from each state to a final state.
    fn distance_to_final(&self) -> Vec<usize> {
        let mut rev = vec![Vec::new(); self.num_states];
        for t in &self.transitions {
            rev[t.to].push((t.from, t.label.is_some()));
        }
        let mut dist = vec![usize::MAX; self.num_states];
        let mut dq = VecDeque::new();
        for &f in &self.finals {
            dist[f] = 0;
            dq.push_back(f);
        }
        while let Some(q) = dq.pop_front() {
            for &(p, sym) in &rev[q] {
                let d = dist[q] + usize::from(sym);
                if d < dist[p] {
                    dist[p] = d;
                    if sym {
                        dq.push_back(p);
                    } else {
                        dq.push_front(p);
                    }
                }
            }
        }
        dist
    }

    /// All accepted words of length at most `max_len`, without duplicates.
    pub fn enumerate_words(&self, max_len: usize) -> Vec<Vec<ExtSymbol>> {
        let dist = self.distance_to_final();
        let mut out = Vec::new();
        let start = self.closure_of([self.initial]);
        let mut word = Vec::new();
        self.enumerate_rec(&start, max_len, &dist, &mut word, &mut out);
        out
    }

    fn enumerate_rec(
        &self,
        set: &[StateId],
        budget: usize,
        dist: &[usize],
        word: &mut Vec<ExtSymbol>,
        out: &mut Vec<Vec<ExtSymbol>>,
    ) {
        if set.iter().any(|&q| self.is_final(q)) {
            out.push(word.clone());
        }
        if budget == 0 {
            return;
        }
        let mut succ: BTreeMap<ExtSymbol, Vec<StateId>> = BTreeMap::new();
        for &q in set {
            for &(l, r) in self.out(q) {
                if let Some(s) = l {
                    if dist[r] < budget {
                        succ.entry(s).or_default().push(r);
                    }
                }
            }
        }
        for (s, targets) in succ {
            let next = self.closure_of(targets);
            word.push(s);
            self.enumerate_rec(&next, budget - 1, dist, word, out);
            word.pop();
        }
    }

    /// Decides `L(self) ⊆ L(other)` by exploring pairs (state of `self`,
    /// subset of `other`) with antichain pruning.
    pub fn inclusion(&self, other: &Nfa) -> Result<Inclusion> {
        self.inclusion_capped(other, DEFAULT_MAX_SUBSETS)
    }

    pub fn inclusion_capped(&self, other: &Nfa, cap: usize) -> Result<Inclusion> {
        self.check_same_alphabet(other)?;
        struct Node {
            p: StateId,
            set: Vec<StateId>,
            parent: usize,
            label: Label,
            alive: bool,
        }
        let mut nodes: Vec<Node> = Vec::new();
        let mut antichain: HashMap<StateId, Vec<usize>> = HashMap::new();
        let mut queue = VecDeque::new();

        fn subset(a: &[StateId], b: &[StateId]) -> bool {
            let mut j = 0;
            for &x in a {
                while j < b.len() && b[j] < x {
                    j += 1;
                }
                if j == b.len() || b[j] != x {
                    return false;
                }
            }
            true
        }

        let push = |nodes: &mut Vec<Node>,
                        antichain: &mut HashMap<StateId, Vec<usize>>,
                        queue: &mut VecDeque<usize>,
                        p: StateId,
                        set: Vec<StateId>,
                        parent: usize,
                        label: Label|
         -> Result<()> {
            let entry = antichain.entry(p).or_default();
            if entry.iter().any(|&i| subset(&nodes[i].set, &set)) {
                return Ok(());
            }
            entry.retain(|&i| {
                if subset(&set, &nodes[i].set) {
                    nodes[i].alive = false;
                    false
                } else {
                    true
                }
            });
            if nodes.len() >= cap {
                return Err(Error::resource(format!(
                    "inclusion explored more than {cap} subset-states"
                )));
            }
            nodes.push(Node {
                p,
                set,
                parent,
                label,
                alive: true,
            });
            let id = nodes.len() - 1;
            antichain.get_mut(&p).expect("entry exists").push(id);
            queue.push_back(id);
            Ok(())
        };

        let start = other.closure_of([other.initial]);
        push(&mut nodes, &mut antichain, &mut queue, self.initial, start, usize::MAX, None)?;
        while let Some(id) = queue.pop_front() {
            if !nodes[id].alive {
                continue;
            }
            let p = nodes[id].p;
            if self.is_final(p) && !nodes[id].set.iter().any(|&q| other.is_final(q)) {
                let mut word = Vec::new();
                let mut cur = id;
                while cur != usize::MAX {
                    if let Some(s) = nodes[cur].label {
                        word.push(s);
                    }
                    cur = nodes[cur].parent;
                }
                word.reverse();
                return Ok(Inclusion {
                    included: false,
                    witness: Some(word),
                });
            }
            let set = nodes[id].set.clone();
            for &(l, p2) in self.out(p) {
                let next = match l {
                    None => set.clone(),
                    Some(s) => other.step(&set, s),
                };
                push(&mut nodes, &mut antichain, &mut queue, p2, next, id, l)?;
            }
        }
        Ok(Inclusion {
            included: true,
            witness: None,
        })
    }

    /// Serializes to the textual automaton format.
    pub fn to_file_string(&self) -> String {
        let q = |s: &str| serde_json::to_string(s).expect("string serialization");
        let mut out = String::from("{\n");
        out.push_str(&format!("  \"sigma\": {},\n", q(&self.alphabet.sigma.iter().collect::<String>())));
        let vars: Vec<String> = self.alphabet.vars.iter().map(|v| q(v)).collect();
        out.push_str(&format!("  \"vars\": [{}],\n", vars.join(", ")));
        out.push_str(&format!("  \"states\": {},\n", self.num_states));
        out.push_str(&format!("  \"initial\": {},\n", self.initial));
        let finals: Vec<String> = self.finals.iter().map(|f| f.to_string()).collect();
        out.push_str(&format!("  \"finals\": [{}],\n", finals.join(", ")));
        if self.transitions.is_empty() {
            out.push_str("  \"transitions\": []\n");
        } else {
            out.push_str("  \"transitions\": [\n");
            for (i, t) in self.transitions.iter().enumerate() {
                let (kind, value) = match t.label {
                    None => ("eps", String::new()),
                    Some(ExtSymbol::Term(c)) => ("term", c.to_string()),
                    Some(ExtSymbol::Open(x)) => ("open", self.alphabet.vars[x].clone()),
                    Some(ExtSymbol::Close(x)) => ("close", self.alphabet.vars[x].clone()),
                    Some(ExtSymbol::Ref(x)) => ("ref", self.alphabet.vars[x].clone()),
                };
                let sep = if i + 1 == self.transitions.len() { "" } else { "," };
                out.push_str(&format!(
                    "    [{}, {}, {}, {}]{}\n",
                    t.from,
                    q(kind),
                    q(&value),
                    t.to,
                    sep
                ));
            }
            out.push_str("  ]\n");
        }
        out.push_str("}\n");
        out
    }

    /// Parses the textual automaton format.
    pub fn from_file_str(text: &str) -> Result<Nfa> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        let bad = |what: &str| Error::invalid(format!("automaton file: bad or missing {what}"));
        let sigma = v["sigma"].as_str().ok_or_else(|| bad("sigma"))?;
        let vars = v["vars"]
            .as_array()
            .ok_or_else(|| bad("vars"))?
            .iter()
            .map(|x| x.as_str().map(str::to_string).ok_or_else(|| bad("vars")))
            .collect::<Result<Vec<_>>>()?;
        let alphabet = Alphabet::new(sigma.chars(), vars)?;
        let states = v["states"].as_u64().ok_or_else(|| bad("states"))? as usize;
        if states == 0 {
            return Err(bad("states (must be positive)"));
        }
        let initial = v["initial"].as_u64().ok_or_else(|| bad("initial"))? as usize;
        if initial >= states {
            return Err(bad("initial"));
        }
        let mut m = Nfa::new(alphabet);
        m.num_states = states;
        m.initial = initial;
        for f in v["finals"].as_array().ok_or_else(|| bad("finals"))? {
            let f = f.as_u64().ok_or_else(|| bad("finals"))? as usize;
            if f >= states || m.finals.contains(&f) {
                return Err(bad("finals"));
            }
            m.finals.push(f);
        }
        for t in v["transitions"].as_array().ok_or_else(|| bad("transitions"))? {
            let t = t.as_array().filter(|a| a.len() == 4).ok_or_else(|| bad("transition"))?;
            let from = t[0].as_u64().ok_or_else(|| bad("transition source"))? as usize;
            let to = t[3].as_u64().ok_or_else(|| bad("transition target"))? as usize;
            if from >= states || to >= states {
                return Err(bad("transition endpoint"));
            }
            let kind = t[1].as_str().ok_or_else(|| bad("transition kind"))?;
            let value = t[2].as_str().ok_or_else(|| bad("transition value"))?;
            let label = match kind {
                "eps" if value.is_empty() => None,
                "term" => {
                    let mut cs = value.chars();
                    match (cs.next(), cs.next()) {
                        (Some(c), None) if m.alphabet.has_term(c) => Some(ExtSymbol::Term(c)),
                        (Some(c), None) => return Err(Error::UnknownTerminal(c)),
                        _ => return Err(bad("terminal value")),
                    }
                }
                "open" => Some(ExtSymbol::Open(m.alphabet.var_id(value)?)),
                "close" => Some(ExtSymbol::Close(m.alphabet.var_id(value)?)),
                "ref" => Some(ExtSymbol::Ref(m.alphabet.var_id(value)?)),
                _ => return Err(bad("transition kind")),
            };
            m.transitions.push(Transition { from, label, to });
        }
        Ok(m)
    }

    /// Union by a fresh initial state with ε-edges.
    pub fn union(&self, other: &Nfa) -> Result<Nfa> {
        self.check_same_alphabet(other)?;
        let mut m = Nfa::new(self.alphabet.clone());
        let off1 = 1;
        let off2 = 1 + self.num_states;
        m.num_states = 1 + self.num_states + other.num_states;
        for (src, off) in [(self, off1), (other, off2)] {
            m.transitions.push(Transition {
                from: 0,
                label: None,
                to: src.initial + off,
            });
            for t in &src.transitions {
                m.transitions.push(Transition {
                    from: t.from + off,
                    label: t.label,
                    to: t.to + off,
                });
            }
            for &f in &src.finals {
                m.finals.push(f + off);
            }
        }
        Ok(m)
    }

    /// Renames labels through `f`; `None` results become ε.
    pub fn relabel(&self, alphabet: Alphabet, f: impl Fn(ExtSymbol) -> Option<ExtSymbol>) -> Nfa {
        let mut m = self.clone();
        m.alphabet = alphabet;
        for t in &mut m.transitions {
            t.label = t.label.and_then(&f);
        }
        m.invalidate();
        m
    }
}

/// Interning of state pairs: a flat table when the pair space is small,
/// a hash map otherwise.
enum PairIndex {
    Dense(usize, Vec<u32>),
    Sparse(HashMap<(StateId, StateId), StateId>),
}

/// Largest pair space indexed by a flat table.
const DENSE_PAIRS: usize = 1 << 24;

impl PairIndex {
    fn new(n1: usize, n2: usize) -> PairIndex {
        match n1.checked_mul(n2) {
            Some(n) if n <= DENSE_PAIRS => PairIndex::Dense(n2, vec![u32::MAX; n]),
            _ => PairIndex::Sparse(HashMap::new()),
        }
    }

    fn get(&self, (p, q): (StateId, StateId)) -> Option<StateId> {
        match self {
            PairIndex::Dense(w, v) => Some(v[p * w + q]).filter(|&i| i != u32::MAX).map(|i| i as StateId),
            PairIndex::Sparse(h) => h.get(&(p, q)).copied(),
        }
    }

    fn insert(&mut self, (p, q): (StateId, StateId), id: StateId) {
        match self {
            PairIndex::Dense(w, v) if id < u32::MAX as usize => v[p * *w + q] = id as u32,
            PairIndex::Dense(w, v) => {
                // ids beyond u32 cannot be stored densely; switch over
                let mut h: HashMap<(StateId, StateId), StateId> = v
                    .iter()
                    .enumerate()
                    .filter(|(_, &i)| i != u32::MAX)
                    .map(|(k, &i)| ((k / *w, k % *w), i as StateId))
                    .collect();
                h.insert((p, q), id);
                *self = PairIndex::Sparse(h);
            }
            PairIndex::Sparse(h) => {
                h.insert((p, q), id);
            }
        }
    }
}

/// On-the-fly state interning for automaton constructions. Keys are
/// explored in creation order, so `next_key` yields a BFS.
pub(crate) struct Builder<K> {
    pub nfa: Nfa,
    index: HashMap<K, StateId>,
    pub keys: Vec<K>,
    ids: Vec<StateId>,
    cursor: usize,
    cap: usize,
}

impl<K: Eq + Hash + Clone> Builder<K> {
    pub fn new(alphabet: Alphabet, init: K, cap: usize) -> Self {
        let mut index = HashMap::new();
        index.insert(init.clone(), 0);
        Builder {
            nfa: Nfa::new(alphabet),
            index,
            keys: vec![init],
            ids: vec![0],
            cursor: 0,
            cap,
        }
    }

    pub fn state(&mut self, key: K) -> Result<StateId> {
        if let Some(&id) = self.index.get(&key) {
            return Ok(id);
        }
        if self.keys.len() >= self.cap {
            return Err(Error::resource(format!(
                "construction exceeded {} states",
                self.cap
            )));
        }
        let id = self.nfa.add_state_raw();
        self.index.insert(key.clone(), id);
        self.keys.push(key);
        self.ids.push(id);
        Ok(id)
    }

    /// Adds a path `from -labels-> to` through fresh unkeyed states.
    pub fn chain(&mut self, from: StateId, labels: &[ExtSymbol], to: StateId) {
        if labels.is_empty() {
            self.nfa.add_transition(from, None, to);
            return;
        }
        let mut cur = from;
        for (i, &l) in labels.iter().enumerate() {
            let next = if i + 1 == labels.len() { to } else { self.nfa.add_state_raw() };
            self.nfa.add_transition(cur, Some(l), next);
            cur = next;
        }
    }

    pub fn next_key(&mut self) -> Option<(StateId, K)> {
        if self.cursor < self.keys.len() {
            self.cursor += 1;
            Some((self.ids[self.cursor - 1], self.keys[self.cursor - 1].clone()))
        } else {
            None
        }
    }

    pub fn finish(self) -> Nfa {
        let mut m = self.nfa;
        m.invalidate();
        m
    }
}

impl Nfa {
    fn add_state_raw(&mut self) -> StateId {
        self.num_states += 1;
        self.num_states - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExtSymbol::*;

    fn ab() -> Alphabet {
        Alphabet::from_strs("ab", &["x"]).unwrap()
    }

    fn words(ws: &[&str]) -> Vec<Vec<ExtSymbol>> {
        ws.iter().map(|w| w.chars().map(Term).collect()).collect()
    }

    fn star(c: char) -> Nfa {
        let mut m = Nfa::new(ab());
        m.set_final(0);
        m.add_transition(0, Some(Term(c)), 0);
        m
    }

    #[test]
    fn product_examples() {
        let m1 = Nfa::from_words(ab(), &words(&["a", "ab"]));
        let m2 = Nfa::from_words(ab(), &words(&["ab", "b"]));
        let p = m1.product(&m2).unwrap();
        assert_eq!(p.enumerate_words(5), words(&["ab"]));
        let u = Nfa::universal(ab());
        let mut l = m1.product(&u).unwrap().enumerate_words(5);
        l.sort();
        assert_eq!(l, words(&["a", "ab"]));
        assert_eq!(star('a').product(&star('b')).unwrap().enumerate_words(4), words(&[""]));
    }

    #[test]
    fn emptiness_and_trim() {
        let mut m = Nfa::new(ab());
        let f = m.add_state();
        m.set_final(f);
        assert!(m.is_empty());
        let dead = m.add_state();
        m.add_transition(0, Some(Term('a')), dead);
        let mut e = Nfa::new(ab());
        e.set_final(0);
        assert!(!e.is_empty());
        let mut n = Nfa::from_words(ab(), &words(&["ab"]));
        let d = n.add_state();
        n.add_transition(0, Some(Term('b')), d);
        let t = n.trim();
        assert_eq!(t.num_states(), 3);
        assert_eq!(t.enumerate_words(4), words(&["ab"]));
        assert_eq!(t.trim(), t);
        assert!(m.trim().finals().is_empty());
    }

    #[test]
    fn inclusion_examples() {
        let m1 = Nfa::from_words(ab(), &words(&["ab"]));
        let m2 = Nfa::from_words(ab(), &words(&["ab", "b"]));
        assert!(m1.inclusion(&m2).unwrap().included);
        let a2 = Nfa::from_words(ab(), &words(&["a", "aa"]));
        let r = star('a').inclusion(&a2).unwrap();
        assert!(!r.included);
        let w = r.witness.unwrap();
        assert!(star('a').accepts(&w) && !a2.accepts(&w));
        assert!(star('a').inclusion(&star('a')).unwrap().included);
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(star('a').enumerate_words(2), words(&["", "a", "aa"]));
        assert!(Nfa::new(ab()).enumerate_words(3).is_empty());
        let w = vec![Open(0), Term('a'), Close(0), Term('b'), Ref(0)];
        let m = Nfa::from_words(ab(), &[w.clone()]);
        assert_eq!(m.enumerate_words(10), vec![w]);
    }

    #[test]
    fn file_round_trip() {
        let mut m = Nfa::from_words(ab(), &[vec![Open(0), Term('a'), Close(0), Ref(0)]]);
        m.add_transition(2, None, 0);
        let text = m.to_file_string();
        let back = Nfa::from_file_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_file_string(), text);
    }

    #[test]
    fn file_rejects_garbage() {
        assert!(Nfa::from_file_str("{}").is_err());
        let bad = r#"{"sigma":"a","vars":[],"states":1,"initial":0,"finals":[],"transitions":[[0,"term","b",0]]}"#;
        assert!(Nfa::from_file_str(bad).is_err());
    }
}
