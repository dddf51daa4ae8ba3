use super::{EntryDef, FunDef, TheorySkeleton};

fn record_literal(fields: &[(String, String)]) -> String {
    let inner: Vec<String> = fields.iter().map(|(f, v)| format!("{f} = {v}")).collect();
    format!("(| {} |)", inner.join(", "))
}

fn render_definition(d: &EntryDef) -> String {
    if d.list {
        let rows: Vec<String> = d.entries.iter().map(|e| format!("    {}", record_literal(e))).collect();
        format!(
            "definition {name} :: \"{rec} list\" where\n  \"{name} = [\n{rows}\n  ]\"",
            name = d.name,
            rec = d.record,
            rows = rows.join(",\n"),
        )
    } else {
        let fields: Vec<String> = d.entries[0].iter().map(|(f, v)| format!("    {f} = {v}")).collect();
        format!(
            "definition {name} :: {rec} where\n  \"{name} = (|\n{fields}\n  |)\"",
            name = d.name,
            rec = d.record,
            fields = fields.join(",\n"),
        )
    }
}

fn render_fun(f: &FunDef) -> String {
    let clauses: Vec<String> = f.clauses.iter().map(|c| format!("  \"{c}\"")).collect();
    format!("fun {} :: \"{}\" where\n{}", f.name, f.signature, clauses.join(" |\n"))
}

/// Theory content between `begin` and `end`: datatypes, records,
/// definitions, functions, then the theorem left open with `oops`.
pub fn render_body(s: &TheorySkeleton) -> String {
    let mut sections = Vec::new();
    for d in &s.datatypes {
        sections.push(format!("datatype {} = {}", d.name, d.constructors.join(" | ")));
    }
    for r in &s.records {
        let fields: Vec<String> = r.fields.iter().map(|(f, t)| format!("  {f} :: {t}")).collect();
        sections.push(format!("record {} =\n{}", r.name, fields.join("\n")));
    }
    sections.extend(s.definitions.iter().map(render_definition));
    sections.extend(s.funs.iter().map(render_fun));
    let goal = if s.theorem.conjuncts.is_empty() {
        "True".to_string()
    } else {
        s.theorem.conjuncts.join(" ∧\n         ")
    };
    sections.push(format!("theorem {}:\n  shows \"{goal}\"\n  oops", s.theorem.name));
    let mut out = sections.join("\n\n");
    out.push('\n');
    out
}

pub fn render_theory(s: &TheorySkeleton, name: &str) -> String {
    format!("theory {name}\n  imports Main\nbegin\n\n{}\nend\n", render_body(s))
}

/// Isabelle theory name for a problem: ASCII alphanumerics and underscores,
/// starting with a letter.
pub fn theory_name(problem_name: &str) -> String {
    let mut name: String = problem_name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if !name.starts_with(|c: char| c.is_ascii_alphabetic()) {
        name.insert_str(0, "T_");
    }
    name
}
