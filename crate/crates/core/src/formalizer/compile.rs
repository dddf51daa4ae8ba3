use std::collections::HashSet;

use super::{DatatypeDef, EntryDef, FormalizeError, FunDef, RecordDef, TheoremDef, TheorySkeleton};
use crate::policy::{
    action_patterns, evaluate, has_wildcard, instantiate, match_pattern, resource_patterns, AccessRequest,
    Effect, PolicyDocument, CANONICAL_PRINCIPAL,
};

/// Service name of the first action, e.g. `ec2` for `ec2:RunInstances`.
pub fn service_prefix(policy: &PolicyDocument) -> String {
    let first = action_patterns(policy).into_iter().next().unwrap_or_default();
    let svc: String = first
        .split(':')
        .next()
        .unwrap_or("")
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    if svc.is_empty() || !first.contains(':') || svc.starts_with(|c: char| c.is_ascii_digit()) {
        "policy".into()
    } else {
        svc
    }
}

fn camel(s: &str) -> String {
    s.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|p| !p.is_empty())
        .map(|p| {
            let mut cs = p.chars();
            let first = cs.next().unwrap().to_ascii_uppercase();
            std::iter::once(first).chain(cs).collect::<String>()
        })
        .collect()
}

fn plural(s: &str) -> String {
    let ends = |suffix: &str| s.ends_with(suffix);
    if ends("s") || ends("x") || ends("sh") || ends("ch") {
        format!("{s}es")
    } else if ends("y") && !s[..s.len() - 1].ends_with(['a', 'e', 'i', 'o', 'u']) {
        format!("{}ies", &s[..s.len() - 1])
    } else {
        format!("{s}s")
    }
}

fn without_wildcards(s: &str) -> String {
    s.replace(['*', '?'], " ")
}

fn ident_or(name: String, fallback: &str) -> String {
    if name.is_empty() {
        fallback.into()
    } else if name.starts_with(|c: char| c.is_ascii_digit()) {
        format!("{fallback}{name}")
    } else {
        name
    }
}

fn action_name(pattern: &str) -> String {
    let op = pattern.split_once(':').map_or(pattern, |(_, op)| op);
    if op == "*" {
        return "AllActions".into();
    }
    ident_or(camel(&op.replace('*', " Any ").replace('?', " X ")), "Action")
}

/// Constructor name for a resource class. Account-wide wildcards become
/// `AllResources`; typed ARNs name the type in plural (`instance/*` gives
/// `Instances`); S3 ARNs name the bucket (`<Bucket>Bucket`, `<Bucket>Objects`).
fn resource_name(pattern: &str) -> String {
    if pattern == "*" {
        return "AllResources".into();
    }
    let parts: Vec<&str> = pattern.splitn(6, ':').collect();
    if parts.len() < 6 || parts[0] != "arn" {
        return ident_or(camel(&without_wildcards(pattern)), "Resource");
    }
    let (service, res) = (parts[2], parts[5]);
    if res == "*" {
        return "AllResources".into();
    }
    if service == "s3" {
        let (bucket, key) = match res.split_once('/') {
            Some((b, k)) => (b, Some(k)),
            None => (res, None),
        };
        let bucket = ident_or(camel(&without_wildcards(bucket)), "Any");
        return if key.is_some() { format!("{bucket}Objects") } else { format!("{bucket}Bucket") };
    }
    match res.split_once(['/', ':']) {
        Some((ty, _)) => ident_or(plural(&camel(&without_wildcards(ty))), "Resource"),
        None => ident_or(camel(&without_wildcards(res)), "Resource"),
    }
}

/// Appends numeric suffixes so every name is distinct from the others and
/// from anything already in `used`.
fn uniquify(names: Vec<String>, used: &mut HashSet<String>) -> Vec<String> {
    names
        .into_iter()
        .map(|base| {
            let mut name = base.clone();
            let mut n = 2;
            while used.contains(&name) {
                name = format!("{base}{n}");
                n += 1;
            }
            used.insert(name.clone());
            name
        })
        .collect()
}

fn check_fragment(policy: &PolicyDocument) -> Result<(), FormalizeError> {
    for (i, st) in policy.statements.iter().enumerate() {
        if st.effect == Effect::Deny {
            return Err(FormalizeError::UnsupportedPolicy(format!("statement {i} is a Deny")));
        }
        if !st.principals.is_universal() {
            return Err(FormalizeError::UnsupportedPolicy(format!(
                "statement {i} names specific principals"
            )));
        }
    }
    Ok(())
}

/// Compiles an allow-only policy into a theory skeleton. The theorem asserts
/// `policy_allows` for exactly the (action, resource class) pairs that
/// [`evaluate`] allows, in action-major universe order.
pub fn compile_policy(policy: &PolicyDocument) -> Result<TheorySkeleton, FormalizeError> {
    check_fragment(policy)?;
    let svc = service_prefix(policy);
    let act_ty = format!("{svc}_action");
    let res_ty = format!("{svc}_resource");
    let def_name = format!("{svc}_instance_policy");

    let actions = action_patterns(policy);
    let resources = resource_patterns(policy);
    let mut used: HashSet<String> = [CANONICAL_PRINCIPAL.to_string()].into();
    let act_names = uniquify(actions.iter().map(|a| action_name(a)).collect(), &mut used);
    let res_names = uniquify(resources.iter().map(|r| resource_name(r)).collect(), &mut used);

    let mut conjuncts = Vec::new();
    let mut all_allowed = true;
    for (a, an) in actions.iter().zip(&act_names) {
        for (r, rn) in resources.iter().zip(&res_names) {
            let req = AccessRequest::new(&instantiate(a), &instantiate(r), CANONICAL_PRINCIPAL);
            if evaluate(policy, &req).is_allow() {
                conjuncts.push(format!("policy_allows {def_name} {an} {rn}"));
            } else {
                all_allowed = false;
            }
        }
    }

    let datatypes = vec![
        DatatypeDef { name: act_ty.clone(), constructors: act_names.clone() },
        DatatypeDef { name: res_ty.clone(), constructors: res_names.clone() },
        DatatypeDef { name: "principal".into(), constructors: vec![CANONICAL_PRINCIPAL.into()] },
    ];
    let records = vec![RecordDef {
        name: "policy_entry".into(),
        fields: vec![
            ("act".into(), act_ty.clone()),
            ("res".into(), res_ty.clone()),
            ("prin".into(), "principal".into()),
        ],
    }];
    let entry = |a: &str, r: &str| {
        vec![
            ("act".to_string(), a.to_string()),
            ("res".to_string(), r.to_string()),
            ("prin".to_string(), CANONICAL_PRINCIPAL.to_string()),
        ]
    };

    // A single literal action, every class allowed and an account-wide class:
    // one entry on that class stands for the whole policy.
    let account_wide = resources.iter().position(|p| resource_name(p) == "AllResources");
    let (definitions, funs) = match account_wide {
        Some(c) if all_allowed && actions.len() == 1 && !has_wildcard(&actions[0]) => {
            let (an, all) = (&act_names[0], &res_names[c]);
            let def = EntryDef {
                name: def_name.clone(),
                record: "policy_entry".into(),
                list: false,
                entries: vec![entry(an, all)],
            };
            let fun = FunDef {
                name: "policy_allows".into(),
                signature: format!("policy_entry => {act_ty} => {res_ty} => bool"),
                clauses: vec![format!(
                    "policy_allows pe a r = (act pe = {an} ∧ (res pe = {all} \\/ res pe = r))"
                )],
            };
            (vec![def], vec![fun])
        }
        _ => {
            let mut entries: Vec<Vec<(String, String)>> = Vec::new();
            for st in &policy.statements {
                for a in &st.actions {
                    let an = &act_names[actions.iter().position(|x| x == a).unwrap()];
                    for r in &st.resources {
                        let rn = &res_names[resources.iter().position(|x| x == r).unwrap()];
                        let e = entry(an, rn);
                        if !entries.contains(&e) {
                            entries.push(e);
                        }
                    }
                }
            }
            let def = EntryDef { name: def_name.clone(), record: "policy_entry".into(), list: true, entries };
            let covers = |name: &str, ty: &str, pats: &[String], names: &[String]| {
                let mut clauses = Vec::new();
                for (p, pn) in pats.iter().zip(names) {
                    for (q, qn) in pats.iter().zip(names) {
                        if match_pattern(p, &instantiate(q)) {
                            clauses.push(format!("{name} {pn} {qn} = True"));
                        }
                    }
                }
                clauses.push(format!("{name} _ _ = False"));
                FunDef { name: name.into(), signature: format!("{ty} => {ty} => bool"), clauses }
            };
            let funs = vec![
                covers("act_covers", &act_ty, &actions, &act_names),
                covers("res_covers", &res_ty, &resources, &res_names),
                FunDef {
                    name: "policy_allows".into(),
                    signature: format!("policy_entry list => {act_ty} => {res_ty} => bool"),
                    clauses: vec![
                        "policy_allows [] a r = False".into(),
                        "policy_allows (pe # ps) a r = ((act_covers (act pe) a ∧ res_covers (res pe) r) \\/ policy_allows ps a r)".into(),
                    ],
                },
            ];
            (vec![def], funs)
        }
    };

    Ok(TheorySkeleton {
        datatypes,
        records,
        definitions,
        funs,
        theorem: TheoremDef { name: format!("{svc}_policy_correctness"), conjuncts },
    })
}
