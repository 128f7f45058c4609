use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque string annotations over a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Annotation {
    /// One string per token.
    Tokens(Vec<String>),
    /// Strings keyed by `"i,j"` token pairs (0-based).
    Pairs(BTreeMap<String, String>),
}

/// One line of an instance file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedInstance {
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<String, Annotation>,
    /// Named token positions (0-based).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub roles: BTreeMap<String, usize>,
    /// Gold label of a classification instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Candidate token positions of a ranking instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<usize>>,
    /// Index of the gold entry in `candidates`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<usize>,
}

impl AnnotatedInstance {
    pub fn is_ranking(&self) -> bool {
        self.candidates.is_some()
    }

    /// Checks internal consistency; the message names the first problem.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.tokens.len();
        if n == 0 {
            return Err("instance has no tokens".into());
        }
        for (name, ann) in &self.annotations {
            match ann {
                Annotation::Tokens(v) if v.len() != n => {
                    return Err(format!(
                        "annotation `{name}` has {} entries for {n} tokens",
                        v.len()
                    ))
                }
                Annotation::Tokens(_) => {}
                Annotation::Pairs(m) => {
                    for key in m.keys() {
                        let ok = key
                            .split_once(',')
                            .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)))
                            .is_some_and(|(a, b)| a < n && b < n && key == &format!("{a},{b}"));
                        if !ok {
                            return Err(format!("annotation `{name}` has bad pair key `{key}`"));
                        }
                    }
                }
            }
        }
        for (role, &at) in &self.roles {
            if at >= n {
                return Err(format!("role `{role}` at {at} is outside {n} tokens"));
            }
        }
        if self.roles.contains_key("cand") {
            return Err("role name `cand` is reserved".into());
        }
        match (&self.candidates, &self.label) {
            (Some(_), Some(_)) => return Err("instance has both `label` and `candidates`".into()),
            (None, _) if self.gold.is_some() => {
                return Err("`gold` needs a `candidates` list".into())
            }
            (Some(c), None) => {
                if c.is_empty() {
                    return Err("empty candidate list".into());
                }
                if let Some(&p) = c.iter().find(|&&p| p >= n) {
                    return Err(format!("candidate {p} is outside {n} tokens"));
                }
                if let Some(g) = self.gold {
                    if g >= c.len() {
                        return Err(format!("gold {g} outside {} candidates", c.len()));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Parses JSON-lines instances. Blank lines are skipped.
pub fn parse_instances(text: &str, path: &str) -> Result<Vec<AnnotatedInstance>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst: AnnotatedInstance =
            serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        inst.validate().map_err(|msg| Error::parse(path, i + 1, msg))?;
        out.push(inst);
    }
    Ok(out)
}

pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<AnnotatedInstance>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_instances(&text, &path.display().to_string())
}

/// Writes instances as JSON lines.
pub fn write_instances(path: impl AsRef<Path>, items: &[AnnotatedInstance]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for inst in items {
        text.push_str(&serde_json::to_string(inst).expect("instances serialize"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
