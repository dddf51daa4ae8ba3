//! AWS-style access policies.
//!
//! A request is allowed iff at least one `Allow` statement matches it and no
//! `Deny` statement does. `Condition` blocks are parsed and kept but never
//! evaluated, so a conditional statement matches as if its conditions held.

mod pattern;

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub use pattern::{has_wildcard, instantiate, match_pattern, WITNESS};

/// Principal used for canonical requests.
pub const CANONICAL_PRINCIPAL: &str = "Anyone";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("bad policy field {field}: {reason}")]
    Format { field: String, reason: String },
    #[error("cannot read policies: {0}")]
    Io(String),
}

impl PolicyError {
    fn format(field: &str, reason: impl Into<String>) -> Self {
        PolicyError::Format { field: field.to_string(), reason: reason.into() }
    }

    /// Field named by a format error.
    pub fn field(&self) -> Option<&str> {
        match self {
            PolicyError::Format { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Effect {
    Allow,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Principals {
    Any,
    Patterns(Vec<String>),
}

impl Principals {
    pub fn matches(&self, principal: &str) -> bool {
        match self {
            Principals::Any => true,
            Principals::Patterns(ps) => ps.iter().any(|p| match_pattern(p, principal)),
        }
    }

    /// True when every principal matches.
    pub fn is_universal(&self) -> bool {
        match self {
            Principals::Any => true,
            Principals::Patterns(ps) => ps.iter().any(|p| p == "*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStatement {
    pub sid: Option<String>,
    pub effect: Effect,
    pub actions: Vec<String>,
    pub resources: Vec<String>,
    pub principals: Principals,
    pub conditions: Map<String, Value>,
    /// Keys this parser does not interpret.
    pub metadata: BTreeMap<String, Value>,
}

impl PolicyStatement {
    pub fn matches(&self, req: &AccessRequest) -> bool {
        self.actions.iter().any(|p| match_pattern(p, &req.action))
            && self.resources.iter().any(|p| match_pattern(p, &req.resource))
            && self.principals.matches(&req.principal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub source_name: String,
    pub version: Option<String>,
    pub statements: Vec<PolicyStatement>,
    pub metadata: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccessRequest {
    pub action: String,
    pub resource: String,
    pub principal: String,
}

impl AccessRequest {
    pub fn new(action: &str, resource: &str, principal: &str) -> Self {
        AccessRequest {
            action: action.into(),
            resource: resource.into(),
            principal: principal.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Effect,
    pub matched_allow: Vec<usize>,
    pub matched_deny: Vec<usize>,
}

impl Decision {
    pub fn is_allow(&self) -> bool {
        self.outcome == Effect::Allow
    }
}

fn string_list(v: &Value, field: &str) -> Result<Vec<String>, PolicyError> {
    let items = match v {
        Value::String(s) => vec![s.clone()],
        Value::Array(xs) => xs
            .iter()
            .map(|x| {
                x.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| PolicyError::format(field, "expected strings"))
            })
            .collect::<Result<_, _>>()?,
        _ => return Err(PolicyError::format(field, "expected a string or a list of strings")),
    };
    if items.is_empty() {
        return Err(PolicyError::format(field, "empty list"));
    }
    Ok(items)
}

fn parse_principal(v: &Value) -> Result<Principals, PolicyError> {
    match v {
        Value::String(s) if s == "*" => Ok(Principals::Any),
        Value::Object(m) => {
            let mut out = Vec::new();
            for (_, ids) in m {
                out.extend(string_list(ids, "Principal")?);
            }
            if out.is_empty() {
                return Err(PolicyError::format("Principal", "no principals"));
            }
            Ok(Principals::Patterns(out))
        }
        other => Ok(Principals::Patterns(string_list(other, "Principal")?)),
    }
}

fn parse_statement(v: &Value) -> Result<PolicyStatement, PolicyError> {
    let obj = v
        .as_object()
        .ok_or_else(|| PolicyError::format("Statement", "expected an object"))?;
    let mut st = PolicyStatement {
        sid: None,
        effect: Effect::Allow,
        actions: Vec::new(),
        resources: Vec::new(),
        principals: Principals::Any,
        conditions: Map::new(),
        metadata: BTreeMap::new(),
    };
    let mut seen_effect = false;
    for (key, value) in obj {
        match key.as_str() {
            "Sid" => st.sid = value.as_str().map(str::to_string),
            "Effect" => {
                st.effect = match value.as_str() {
                    Some("Allow") => Effect::Allow,
                    Some("Deny") => Effect::Deny,
                    _ => return Err(PolicyError::format("Effect", "must be Allow or Deny")),
                };
                seen_effect = true;
            }
            "Action" => st.actions = string_list(value, "Action")?,
            "Resource" => st.resources = string_list(value, "Resource")?,
            "Principal" => st.principals = parse_principal(value)?,
            "Condition" => {
                st.conditions = value
                    .as_object()
                    .cloned()
                    .ok_or_else(|| PolicyError::format("Condition", "expected an object"))?
            }
            "NotAction" | "NotResource" | "NotPrincipal" => {
                return Err(PolicyError::format(key, "negated elements are not supported"))
            }
            _ => {
                st.metadata.insert(key.clone(), value.clone());
            }
        }
    }
    if !seen_effect {
        return Err(PolicyError::format("Effect", "missing"));
    }
    if st.actions.is_empty() {
        return Err(PolicyError::format("Action", "missing"));
    }
    if st.resources.is_empty() {
        return Err(PolicyError::format("Resource", "missing"));
    }
    Ok(st)
}

/// Parses a policy from a JSON value. Accepts a bare policy object or one
/// wrapped as `{"policy_json": ...}` (object or JSON-encoded string), with an
/// optional `problem_name` alongside.
pub fn parse_policy_value(v: &Value, source_name: &str) -> Result<PolicyDocument, PolicyError> {
    let mut name = source_name.to_string();
    let mut v = v;
    let unwrapped;
    if let Some(inner) = v.get("policy_json") {
        if let Some(n) = v.get("problem_name").and_then(Value::as_str) {
            name = n.to_string();
        }
        v = match inner {
            Value::String(s) => {
                unwrapped = serde_json::from_str::<Value>(s).map_err(|e| PolicyError::Json(e.to_string()))?;
                &unwrapped
            }
            other => other,
        };
    }
    let obj = v
        .as_object()
        .ok_or_else(|| PolicyError::format("Statement", "policy must be a JSON object"))?;
    let statements = match obj.get("Statement") {
        Some(Value::Array(xs)) => xs.iter().map(parse_statement).collect::<Result<Vec<_>, _>>()?,
        Some(single @ Value::Object(_)) => vec![parse_statement(single)?],
        Some(_) => return Err(PolicyError::format("Statement", "expected an object or a list")),
        None => return Err(PolicyError::format("Statement", "missing")),
    };
    if statements.is_empty() {
        return Err(PolicyError::format("Statement", "no statements"));
    }
    let metadata = obj
        .iter()
        .filter(|(k, _)| !matches!(k.as_str(), "Statement" | "Version"))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    Ok(PolicyDocument {
        source_name: name,
        version: obj.get("Version").and_then(Value::as_str).map(str::to_string),
        statements,
        metadata,
    })
}

pub fn parse_policy(text: &str) -> Result<PolicyDocument, PolicyError> {
    parse_named(text, "")
}

pub fn parse_named(text: &str, source_name: &str) -> Result<PolicyDocument, PolicyError> {
    let v: Value = serde_json::from_str(text).map_err(|e| PolicyError::Json(e.to_string()))?;
    parse_policy_value(&v, source_name)
}

pub fn evaluate(policy: &PolicyDocument, req: &AccessRequest) -> Decision {
    let mut matched_allow = Vec::new();
    let mut matched_deny = Vec::new();
    for (i, st) in policy.statements.iter().enumerate() {
        if st.matches(req) {
            match st.effect {
                Effect::Allow => matched_allow.push(i),
                Effect::Deny => matched_deny.push(i),
            }
        }
    }
    let outcome = if !matched_allow.is_empty() && matched_deny.is_empty() {
        Effect::Allow
    } else {
        Effect::Deny
    };
    Decision { outcome, matched_allow, matched_deny }
}

fn first_seen<'a>(items: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for it in items {
        if !out.contains(it) {
            out.push(it.clone());
        }
    }
    out
}

/// Distinct action patterns in order of first appearance.
pub fn action_patterns(policy: &PolicyDocument) -> Vec<String> {
    first_seen(policy.statements.iter().flat_map(|s| s.actions.iter()))
}

/// Distinct resource patterns in order of first appearance. Each is one
/// resource class of the universe.
pub fn resource_patterns(policy: &PolicyDocument) -> Vec<String> {
    first_seen(policy.statements.iter().flat_map(|s| s.resources.iter()))
}

/// Canonical requests: every action pattern crossed with every resource
/// pattern, wildcards instantiated, action-major, duplicates dropped.
pub fn enumerate_universe(policy: &PolicyDocument) -> Vec<AccessRequest> {
    let resources: Vec<String> = resource_patterns(policy).iter().map(|r| instantiate(r)).collect();
    let mut out: Vec<AccessRequest> = Vec::new();
    for a in action_patterns(policy) {
        let a = instantiate(&a);
        for r in &resources {
            let req = AccessRequest::new(&a, r, CANONICAL_PRINCIPAL);
            if !out.contains(&req) {
                out.push(req);
            }
        }
    }
    out
}

/// One row of a policy CSV, parsed or not.
#[derive(Debug, Clone)]
pub struct PolicyRow {
    pub problem_name: String,
    pub policy: Result<PolicyDocument, PolicyError>,
}

/// Reads a CSV with columns `problem_name, policy_json`. Malformed rows are
/// returned as errors so one bad row does not stop the batch.
pub fn load_csv(reader: impl Read) -> Result<Vec<PolicyRow>, PolicyError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| PolicyError::Io(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| PolicyError::format(name, "missing CSV column"))
    };
    let (name_col, json_col) = (col("problem_name")?, col("policy_json")?);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| PolicyError::Io(e.to_string()))?;
        let name = rec
            .get(name_col)
            .filter(|n| !n.is_empty())
            .map_or_else(|| format!("row_{}", i + 1), str::to_string);
        let policy = parse_named(rec.get(json_col).unwrap_or(""), &name);
        rows.push(PolicyRow { problem_name: name, policy });
    }
    Ok(rows)
}

/// Loads a `.csv` of policies or a single JSON policy named after the file stem.
pub fn load_path(path: &Path) -> Result<Vec<PolicyRow>, PolicyError> {
    let io = |e: std::io::Error| PolicyError::Io(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return load_csv(std::fs::File::open(path).map_err(io)?);
    }
    let text = std::fs::read_to_string(path).map_err(io)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("policy");
    let policy = parse_named(&text, stem);
    let problem_name = policy.as_ref().map_or(stem.to_string(), |p| p.source_name.clone());
    Ok(vec![PolicyRow { problem_name, policy }])
}
