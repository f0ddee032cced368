//! Ref-regex front end: parser, printer, Thompson-style compiler, and the
//! `.refx` file format.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! alt     := concat ('|' concat)*
//! concat  := postfix+
//! postfix := atom ('*' | '+' | '?')*
//! atom    := '(' alt ')' | name '{' alt '}' | '&' name | 'eps' | 'empty'
//!          | terminal | '\' char
//! ```
//!
//! A run of identifier characters followed by `{` names a capture; any other
//! run is a sequence of single-character terminals.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nfa::{Nfa, StateId};
use crate::symbol::{escape_term, unescape, Alphabet, ExtSymbol};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ast {
    Empty,
    Epsilon,
    Term(char),
    Concat(Vec<Ast>),
    Alt(Vec<Ast>),
    Star(Box<Ast>),
    Plus(Box<Ast>),
    Capture(String, Box<Ast>),
    Ref(String),
}

const SPECIAL: &[char] = &['(', ')', '|', '*', '+', '?', '{', '}', '&', '\\'];

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    sigma: &'a [char],
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            offset: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn term(&self, c: char) -> Result<Ast> {
        if self.sigma.contains(&c) {
            Ok(Ast::Term(c))
        } else {
            Err(Error::UnknownTerminal(c))
        }
    }

    fn alt(&mut self) -> Result<Ast> {
        let mut branches = vec![self.concat()?];
        while self.peek() == Some('|') {
            self.pos += 1;
            branches.push(self.concat()?);
        }
        Ok(if branches.len() == 1 {
            branches.pop().expect("one branch")
        } else {
            Ast::Alt(branches)
        })
    }

    fn concat(&mut self) -> Result<Ast> {
        let mut items = Vec::new();
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' || c == '}' {
                break;
            }
            items.extend(self.postfix()?);
        }
        match items.len() {
            0 => self.err("expected an expression"),
            1 => Ok(items.pop().expect("one item")),
            _ => Ok(Ast::Concat(items)),
        }
    }

    /// An atom with its postfix operators. Identifier runs that are not
    /// captures expand to several terminals; the operators then bind to the
    /// last one.
    fn postfix(&mut self) -> Result<Vec<Ast>> {
        let mut atoms = self.atom()?;
        let mut last = atoms.pop().expect("atom yields at least one node");
        loop {
            match self.peek() {
                Some('*') => last = Ast::Star(Box::new(last)),
                Some('+') => last = Ast::Plus(Box::new(last)),
                Some('?') => last = Ast::Alt(vec![last, Ast::Epsilon]),
                _ => break,
            }
            self.pos += 1;
        }
        atoms.push(last);
        Ok(atoms)
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_ascii_alphanumeric() || self.chars[self.pos] == '_')
        {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn atom(&mut self) -> Result<Vec<Ast>> {
        let Some(c) = self.peek() else {
            return self.err("unexpected end of input");
        };
        match c {
            '(' => {
                self.pos += 1;
                let inner = self.alt()?;
                if self.peek() != Some(')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(vec![inner])
            }
            '&' => {
                self.pos += 1;
                if !self.chars.get(self.pos).map_or(false, |c| c.is_ascii_alphabetic()) {
                    return self.err("expected a variable name after '&'");
                }
                Ok(vec![Ast::Ref(self.ident())])
            }
            '\\' => {
                self.pos += 1;
                let Some(&e) = self.chars.get(self.pos) else {
                    return self.err("dangling escape");
                };
                self.pos += 1;
                Ok(vec![self.term(unescape(e))?])
            }
            c if c.is_ascii_alphabetic() => {
                let name = self.ident();
                if self.peek() == Some('{') {
                    self.pos += 1;
                    let body = self.alt()?;
                    if self.peek() != Some('}') {
                        return self.err("expected '}'");
                    }
                    self.pos += 1;
                    return Ok(vec![Ast::Capture(name, Box::new(body))]);
                }
                match name.as_str() {
                    "eps" => Ok(vec![Ast::Epsilon]),
                    "empty" => Ok(vec![Ast::Empty]),
                    _ => name.chars().map(|c| self.term(c)).collect(),
                }
            }
            c if SPECIAL.contains(&c) => self.err(format!("unexpected {c:?}")),
            c => {
                self.pos += 1;
                Ok(vec![self.term(c)?])
            }
        }
    }
}

/// Parses a ref-regex whose terminals must come from `sigma`.
pub fn parse_refregex(text: &str, sigma: &[char]) -> Result<Ast> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        sigma,
    };
    let ast = p.alt()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(ast)
}

fn print_into(ast: &Ast, out: &mut String) {
    let needs_parens_in_concat = |a: &Ast| matches!(a, Ast::Concat(_) | Ast::Alt(_));
    match ast {
        Ast::Empty => out.push_str("empty"),
        Ast::Epsilon => out.push_str("eps"),
        Ast::Term(c) => out.push_str(&escape_term(*c)),
        Ast::Ref(x) => {
            let _ = write!(out, "&{x}");
        }
        Ast::Capture(x, body) => {
            let _ = write!(out, "{x}{{");
            print_into(body, out);
            out.push('}');
        }
        Ast::Concat(items) => {
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                if needs_parens_in_concat(item) {
                    out.push('(');
                    print_into(item, out);
                    out.push(')');
                } else {
                    print_into(item, out);
                }
            }
        }
        Ast::Alt(items) => {
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push('|');
                }
                if matches!(item, Ast::Alt(_)) {
                    out.push('(');
                    print_into(item, out);
                    out.push(')');
                } else {
                    print_into(item, out);
                }
            }
        }
        Ast::Star(inner) | Ast::Plus(inner) => {
            if matches!(**inner, Ast::Concat(_) | Ast::Alt(_)) {
                out.push('(');
                print_into(inner, out);
                out.push(')');
            } else {
                print_into(inner, out);
            }
            out.push(if matches!(ast, Ast::Star(_)) { '*' } else { '+' });
        }
    }
}

/// Prints an AST in the concrete syntax; reparsing gives an equal AST.
pub fn print_refregex(ast: &Ast) -> String {
    let mut out = String::new();
    print_into(ast, &mut out);
    out
}

/// Variables in order of first occurrence.
pub fn ast_vars(ast: &Ast) -> Vec<String> {
    fn walk(a: &Ast, out: &mut Vec<String>) {
        match a {
            Ast::Capture(x, body) => {
                if !out.contains(x) {
                    out.push(x.clone());
                }
                walk(body, out);
            }
            Ast::Ref(x) => {
                if !out.contains(x) {
                    out.push(x.clone());
                }
            }
            Ast::Concat(items) | Ast::Alt(items) => items.iter().for_each(|i| walk(i, out)),
            Ast::Star(i) | Ast::Plus(i) => walk(i, out),
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(ast, &mut out);
    out
}

fn build(ast: &Ast, m: &mut Nfa, from: StateId, to: StateId) -> Result<()> {
    match ast {
        Ast::Empty => {}
        Ast::Epsilon => m.add_transition(from, None, to),
        Ast::Term(c) => {
            if !m.alphabet().has_term(*c) {
                return Err(Error::UnknownTerminal(*c));
            }
            m.add_transition(from, Some(ExtSymbol::Term(*c)), to)
        }
        Ast::Ref(x) => {
            let x = m.alphabet().var_id(x)?;
            m.add_transition(from, Some(ExtSymbol::Ref(x)), to)
        }
        Ast::Capture(x, body) => {
            let x = m.alphabet().var_id(x)?;
            let s1 = m.add_state();
            let s2 = m.add_state();
            m.add_transition(from, Some(ExtSymbol::Open(x)), s1);
            build(body, m, s1, s2)?;
            m.add_transition(s2, Some(ExtSymbol::Close(x)), to);
        }
        Ast::Concat(items) => {
            let mut cur = from;
            for (i, item) in items.iter().enumerate() {
                let next = if i + 1 == items.len() { to } else { m.add_state() };
                build(item, m, cur, next)?;
                cur = next;
            }
        }
        Ast::Alt(items) => {
            for item in items {
                let s1 = m.add_state();
                let s2 = m.add_state();
                m.add_transition(from, None, s1);
                build(item, m, s1, s2)?;
                m.add_transition(s2, None, to);
            }
        }
        Ast::Star(inner) => {
            let s = m.add_state();
            let e = m.add_state();
            m.add_transition(from, None, s);
            build(inner, m, s, e)?;
            m.add_transition(e, None, s);
            m.add_transition(s, None, to);
        }
        Ast::Plus(inner) => {
            let s = m.add_state();
            let e = m.add_state();
            m.add_transition(from, None, s);
            build(inner, m, s, e)?;
            m.add_transition(e, None, s);
            m.add_transition(e, None, to);
        }
    }
    Ok(())
}

/// Thompson-style compilation over a given alphabet.
pub fn compile(ast: &Ast, alphabet: &Alphabet) -> Result<Nfa> {
    let mut m = Nfa::new(alphabet.clone());
    let f = m.add_state();
    m.set_final(f);
    build(ast, &mut m, 0, f)?;
    Ok(m)
}

/// Parses and compiles; variables are taken in order of first occurrence.
pub fn compile_str(text: &str, sigma: &str) -> Result<Nfa> {
    let sigma: Vec<char> = sigma.chars().collect();
    let ast = parse_refregex(text, &sigma)?;
    let alphabet = Alphabet::new(sigma, ast_vars(&ast))?;
    compile(&ast, &alphabet)
}

/// Contents of a `.refx` file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefxFile {
    pub alphabet: Alphabet,
    pub ast: Ast,
}

impl RefxFile {
    pub fn compile(&self) -> Result<Nfa> {
        compile(&self.ast, &self.alphabet)
    }

    pub fn render(&self) -> String {
        let sigma: String = self.alphabet.sigma.iter().map(|&c| escape_sigma(c)).collect();
        let mut out = format!("sigma: {sigma}\n");
        if !self.alphabet.vars.is_empty() {
            let _ = writeln!(out, "vars: {}", self.alphabet.vars.join(","));
        }
        out.push_str(&print_refregex(&self.ast));
        out.push('\n');
        out
    }
}

fn escape_sigma(c: char) -> String {
    match c {
        ' ' => "\\s".into(),
        '\n' => "\\n".into(),
        '\t' => "\\t".into(),
        '\\' => "\\\\".into(),
        c => c.to_string(),
    }
}

fn parse_sigma(text: &str) -> Result<Vec<char>> {
    let mut out = Vec::new();
    let mut it = text.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            let e = it
                .next()
                .ok_or_else(|| Error::invalid("dangling escape in sigma"))?;
            out.push(unescape(e));
        } else if !c.is_whitespace() {
            out.push(c);
        }
    }
    Ok(out)
}

/// Parses a `.refx` file: `sigma: …`, optional `vars: x,y`, then the
/// expression on the remaining lines.
pub fn parse_refx(text: &str) -> Result<RefxFile> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or("");
    let sigma_text = first
        .trim_start()
        .strip_prefix("sigma:")
        .ok_or_else(|| Error::invalid("first line must be 'sigma: …'"))?;
    let sigma = parse_sigma(sigma_text)?;
    let rest: Vec<&str> = lines.collect();
    let (declared, body) = match rest.first() {
        Some(l) if l.trim_start().starts_with("vars:") => {
            let decl = l.trim_start()["vars:".len()..]
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>();
            (Some(decl), &rest[1..])
        }
        _ => (None, &rest[..]),
    };
    let expr = body.join("\n");
    let ast = parse_refregex(&expr, &sigma)?;
    let used = ast_vars(&ast);
    let vars = match declared {
        Some(d) => {
            if let Some(v) = used.iter().find(|v| !d.contains(v)) {
                return Err(Error::UnknownVariable(v.clone()));
            }
            d
        }
        None => used,
    };
    Ok(RefxFile {
        alphabet: Alphabet::new(sigma, vars)?,
        ast,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Ast {
        parse_refregex(s, &['a', 'b', 'c']).unwrap()
    }

    fn t(c: char) -> Ast {
        Ast::Term(c)
    }

    #[test]
    fn intro_expression_shape() {
        let ast = p("x{(a|b)*} y{a*|b*} c*");
        let expected = Ast::Concat(vec![
            Ast::Capture("x".into(), Box::new(Ast::Star(Box::new(Ast::Alt(vec![t('a'), t('b')]))))),
            Ast::Capture(
                "y".into(),
                Box::new(Ast::Alt(vec![Ast::Star(Box::new(t('a'))), Ast::Star(Box::new(t('b')))])),
            ),
            Ast::Star(Box::new(t('c'))),
        ]);
        assert_eq!(ast, expected);
    }

    #[test]
    fn reference_expression() {
        let ast = p("x{a*} b &x");
        assert_eq!(
            ast,
            Ast::Concat(vec![
                Ast::Capture("x".into(), Box::new(Ast::Star(Box::new(t('a'))))),
                t('b'),
                Ast::Ref("x".into()),
            ])
        );
    }

    #[test]
    fn syntax_errors() {
        let e = parse_refregex("x{", &['a']).unwrap_err();
        assert!(matches!(e, Error::Syntax { offset: 2, .. }), "{e:?}");
        assert!(matches!(parse_refregex("a|", &['a']), Err(Error::Syntax { .. })));
        assert!(matches!(parse_refregex("d", &['a']), Err(Error::UnknownTerminal('d'))));
        assert!(matches!(parse_refregex("(a", &['a']), Err(Error::Syntax { .. })));
    }

    #[test]
    fn eps_accepts_only_empty_word() {
        let m = compile_str("eps", "a").unwrap();
        assert_eq!(m.enumerate_words(3), vec![vec![]]);
    }

    #[test]
    fn print_round_trip() {
        for s in ["x{(a|b)*} y{a*|b*} c*", "(a b) c", "a (b|c)+ &x", "((a|b)|c)*", "a**", "x{eps}|empty"] {
            let ast = p(s);
            assert_eq!(p(&print_refregex(&ast)), ast, "{s}");
        }
    }

    #[test]
    fn refx_file() {
        let f = parse_refx("sigma: ab\\s\nvars: x,y\nx{a\\s} &x\n").unwrap();
        assert_eq!(f.alphabet.sigma, vec!['a', 'b', ' ']);
        assert_eq!(f.alphabet.vars, vec!["x".to_string(), "y".to_string()]);
        assert_eq!(parse_refx(&f.render()).unwrap(), f);
        assert!(parse_refx("sigma: a\nvars: y\nx{a}").is_err());
    }
}
