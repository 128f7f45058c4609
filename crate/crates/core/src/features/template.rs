//! Declarative feature templates.
//!
//! One template per line, tab-separated:
//!
//! ```text
//! name <TAB> property <TAB> slots [<TAB> conditions]
//! ```
//!
//! * `slots` is a comma-separated list of positions, one per lexical part.
//! * A position is a free variable (`i`, `j`, `k`) or a role (`@head`), with
//!   an optional integer offset (`i+1`, `@head-2`). Free variables range over
//!   all token positions; several variables enumerate strictly increasing
//!   tuples in alphabetical order (`i < j < k`). In ranking instances the role
//!   `@cand` is bound to each candidate in turn.
//! * `property` is literal text with placeholders: `{tok:P}` (token at P),
//!   `{NAME:P}` (per-token annotation), `{NAME:P,Q}` (per-pair annotation)
//!   and `{dist:P,Q}` (bucketed signed distance `Q - P`). `{{` and `}}`
//!   escape braces.
//! * `conditions` is a comma-separated list of comparisons `P<Q`, `P>Q`,
//!   `P<=Q`, `P>=Q`, `P=Q`, `P!=Q`.
//!
//! A binding fires only when every position is inside the sentence, every
//! condition holds and every pair annotation it reads is present.
//! Lines that are blank or start with `#` are ignored.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::io::instances::{AnnotatedInstance, Annotation};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Base {
    Var(char),
    Role(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Pos {
    base: Base,
    offset: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Part {
    Literal(String),
    Token(Pos),
    Dist(Pos, Pos),
    Annotation { name: String, at: Vec<Pos> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Cond {
    lhs: Pos,
    op: Op,
    rhs: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    name: String,
    property: Vec<Part>,
    slots: Vec<Pos>,
    conds: Vec<Cond>,
    vars: Vec<char>,
}

/// A feature before interning: property string and word strings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RawAtom {
    pub property: String,
    pub words: Vec<String>,
}

impl RawAtom {
    pub fn new(property: impl Into<String>, words: &[&str]) -> Self {
        RawAtom {
            property: property.into(),
            words: words.iter().map(|w| w.to_string()).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.words.len()
    }
}

fn template_err(name: &str, msg: impl Into<String>) -> Error {
    Error::Template {
        name: name.to_string(),
        msg: msg.into(),
    }
}

fn parse_pos(name: &str, s: &str) -> Result<Pos> {
    let s = s.trim();
    let split = s[1..]
        .find(['+', '-'])
        .map(|i| i + 1)
        .unwrap_or(s.len());
    let (head, tail) = s.split_at(split);
    let base = if let Some(role) = head.strip_prefix('@') {
        if role.is_empty() || !role.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(template_err(name, format!("bad role in position `{s}`")));
        }
        Base::Role(role.to_string())
    } else {
        match head {
            "i" => Base::Var('i'),
            "j" => Base::Var('j'),
            "k" => Base::Var('k'),
            _ => return Err(template_err(name, format!("bad position `{s}`"))),
        }
    };
    let offset = if tail.is_empty() {
        0
    } else {
        tail.parse::<i64>()
            .map_err(|_| template_err(name, format!("bad offset in position `{s}`")))?
    };
    Ok(Pos { base, offset })
}

fn parse_property(name: &str, s: &str) -> Result<Vec<Part>> {
    let mut parts = Vec::new();
    let mut lit = String::new();
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                lit.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                lit.push('}');
            }
            '{' => {
                let mut body = String::new();
                let mut closed = false;
                for c in chars.by_ref() {
                    if c == '}' {
                        closed = true;
                        break;
                    }
                    body.push(c);
                }
                if !closed {
                    return Err(template_err(name, "unclosed `{` in property"));
                }
                if !lit.is_empty() {
                    parts.push(Part::Literal(std::mem::take(&mut lit)));
                }
                let (key, args) = body
                    .split_once(':')
                    .ok_or_else(|| template_err(name, format!("placeholder `{{{body}}}` lacks `:`")))?;
                let at = args
                    .split(',')
                    .map(|p| parse_pos(name, p))
                    .collect::<Result<Vec<_>>>()?;
                let part = match (key, at.len()) {
                    ("tok", 1) => Part::Token(at[0].clone()),
                    ("dist", 2) => Part::Dist(at[0].clone(), at[1].clone()),
                    ("tok", _) | ("dist", _) => {
                        return Err(template_err(name, format!("wrong argument count in `{{{body}}}`")))
                    }
                    (k, 1 | 2) if !k.is_empty() => Part::Annotation {
                        name: k.to_string(),
                        at,
                    },
                    _ => return Err(template_err(name, format!("bad placeholder `{{{body}}}`"))),
                };
                parts.push(part);
            }
            '}' => return Err(template_err(name, "unmatched `}` in property")),
            c => lit.push(c),
        }
    }
    if !lit.is_empty() {
        parts.push(Part::Literal(lit));
    }
    if parts.is_empty() {
        return Err(template_err(name, "empty property"));
    }
    Ok(parts)
}

fn parse_cond(name: &str, s: &str) -> Result<Cond> {
    for (tok, op) in [
        ("!=", Op::Ne),
        ("<=", Op::Le),
        (">=", Op::Ge),
        ("<", Op::Lt),
        (">", Op::Gt),
        ("=", Op::Eq),
    ] {
        if let Some((l, r)) = s.split_once(tok) {
            return Ok(Cond {
                lhs: parse_pos(name, l)?,
                op,
                rhs: parse_pos(name, r)?,
            });
        }
    }
    Err(template_err(name, format!("bad condition `{s}`")))
}

impl Template {
    /// Parses one tab-separated template line.
    pub fn parse(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        let name = fields[0].trim().to_string();
        if name.is_empty() {
            return Err(template_err("<unnamed>", "missing template name"));
        }
        if !(3..=4).contains(&fields.len()) {
            return Err(template_err(
                &name,
                format!("expected 3 or 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let property = parse_property(&name, fields[1])?;
        let slots = fields[2]
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|p| parse_pos(&name, p))
            .collect::<Result<Vec<_>>>()?;
        if slots.is_empty() {
            return Err(template_err(&name, "a template needs at least one lexical slot"));
        }
        let conds = match fields.get(3) {
            Some(c) => c
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|c| parse_cond(&name, c.trim()))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let mut t = Template {
            name,
            property,
            slots,
            conds,
            vars: Vec::new(),
        };
        let mut vars: Vec<char> = t.positions().filter_map(|p| match p.base {
            Base::Var(v) => Some(v),
            Base::Role(_) => None,
        })
        .collect();
        vars.sort_unstable();
        vars.dedup();
        t.vars = vars;
        Ok(t)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.slots.len()
    }

    fn positions(&self) -> impl Iterator<Item = &Pos> {
        let from_parts = self.property.iter().flat_map(|p| match p {
            Part::Literal(_) => Vec::new(),
            Part::Token(a) => vec![a],
            Part::Dist(a, b) => vec![a, b],
            Part::Annotation { at, .. } => at.iter().collect(),
        });
        let from_conds = self.conds.iter().flat_map(|c| [&c.lhs, &c.rhs]);
        self.slots.iter().chain(from_parts).chain(from_conds)
    }

    /// Appends every atom this template fires on `inst` to `out`.
    pub fn apply(
        &self,
        inst: &AnnotatedInstance,
        cand: Option<usize>,
        out: &mut Vec<RawAtom>,
    ) -> Result<()> {
        let n = inst.tokens.len();
        let mut roles: BTreeMap<&str, usize> = BTreeMap::new();
        for p in self.positions() {
            if let Base::Role(r) = &p.base {
                let at = match (r.as_str(), cand) {
                    ("cand", Some(c)) => c,
                    _ => *inst.roles.get(r).ok_or_else(|| {
                        template_err(&self.name, format!("instance has no role `@{r}`"))
                    })?,
                };
                roles.insert(r.as_str(), at);
            }
        }
        for p in &self.property {
            if let Part::Annotation { name, at } = p {
                match inst.annotations.get(name) {
                    None => {
                        return Err(template_err(
                            &self.name,
                            format!("instance has no annotation `{name}`"),
                        ))
                    }
                    Some(Annotation::Tokens(_)) if at.len() != 1 => {
                        return Err(template_err(
                            &self.name,
                            format!("`{name}` is a per-token annotation"),
                        ))
                    }
                    Some(Annotation::Pairs(_)) if at.len() != 2 => {
                        return Err(template_err(
                            &self.name,
                            format!("`{name}` is a per-pair annotation"),
                        ))
                    }
                    _ => {}
                }
            }
        }

        let mut binding = vec![0usize; self.vars.len()];
        if self.vars.len() > n {
            return Ok(());
        }
        for (v, b) in binding.iter_mut().enumerate() {
            *b = v;
        }
        loop {
            self.fire(inst, &roles, &binding, out);
            if !next_combination(&mut binding, n) {
                break;
            }
        }
        Ok(())
    }

    fn fire(
        &self,
        inst: &AnnotatedInstance,
        roles: &BTreeMap<&str, usize>,
        binding: &[usize],
        out: &mut Vec<RawAtom>,
    ) {
        let n = inst.tokens.len() as i64;
        let resolve = |p: &Pos| -> Option<usize> {
            let base = match &p.base {
                Base::Var(v) => binding[self.vars.iter().position(|x| x == v)?] as i64,
                Base::Role(r) => *roles.get(r.as_str())? as i64,
            };
            let at = base + p.offset;
            (0..n).contains(&at).then_some(at as usize)
        };
        for c in &self.conds {
            let (Some(l), Some(r)) = (resolve(&c.lhs), resolve(&c.rhs)) else {
                return;
            };
            let ok = match c.op {
                Op::Lt => l < r,
                Op::Le => l <= r,
                Op::Gt => l > r,
                Op::Ge => l >= r,
                Op::Eq => l == r,
                Op::Ne => l != r,
            };
            if !ok {
                return;
            }
        }
        let mut words = Vec::with_capacity(self.slots.len());
        for s in &self.slots {
            let Some(at) = resolve(s) else { return };
            words.push(inst.tokens[at].clone());
        }
        let mut property = String::new();
        for part in &self.property {
            match part {
                Part::Literal(s) => property.push_str(s),
                Part::Token(p) => {
                    let Some(at) = resolve(p) else { return };
                    property.push_str(&inst.tokens[at]);
                }
                Part::Dist(a, b) => {
                    let (Some(a), Some(b)) = (resolve(a), resolve(b)) else {
                        return;
                    };
                    property.push_str(&distance_bucket(b as i64 - a as i64));
                }
                Part::Annotation { name, at } => {
                    let Some(ann) = inst.annotations.get(name) else { return };
                    match ann {
                        Annotation::Tokens(tags) => {
                            let Some(i) = resolve(&at[0]) else { return };
                            let Some(tag) = tags.get(i) else { return };
                            property.push_str(tag);
                        }
                        Annotation::Pairs(pairs) => {
                            let (Some(i), Some(j)) = (resolve(&at[0]), resolve(&at[1])) else {
                                return;
                            };
                            let Some(tag) = pairs.get(&format!("{i},{j}")) else {
                                return;
                            };
                            property.push_str(tag);
                        }
                    }
                }
            }
        }
        out.push(RawAtom { property, words });
    }
}

/// Advances a strictly increasing tuple over `0..n`.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Signed distance, exact up to 4 and bucketed beyond.
pub fn distance_bucket(d: i64) -> String {
    let sign = if d < 0 { "-" } else { "" };
    let bucket = match d.unsigned_abs() {
        a @ 0..=4 => a.to_string(),
        5..=9 => "5-9".to_string(),
        _ => "10+".to_string(),
    };
    format!("{sign}{bucket}")
}

/// Parses a template file's contents; errors carry 1-based line numbers.
pub fn parse_templates(text: &str, path: &str) -> Result<Vec<Template>> {
    let mut out: Vec<Template> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let t = Template::parse(trimmed).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if out.iter().any(|o| o.name == t.name) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("duplicate template name `{}`", t.name),
            ));
        }
        out.push(t);
    }
    Ok(out)
}
