/// AWS-style wildcard match: `*` spans any run of characters (including
/// none), `?` exactly one. Comparison is case-sensitive.
pub fn match_pattern(pattern: &str, value: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let v: Vec<char> = value.chars().collect();
    let (mut pi, mut vi) = (0, 0);
    // Position of the last `*` and the value index it was tried against.
    let mut star: Option<(usize, usize)> = None;
    while vi < v.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == v[vi]) {
            pi += 1;
            vi += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, vi));
            pi += 1;
        } else if let Some((sp, sv)) = star {
            pi = sp + 1;
            vi = sv + 1;
            star = Some((sp, sv + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

pub fn has_wildcard(pattern: &str) -> bool {
    pattern.contains(['*', '?'])
}

pub const WITNESS: &str = "witness";

/// A concrete value matched by `pattern`: each `*` becomes [`WITNESS`] and
/// each `?` becomes `w`.
pub fn instantiate(pattern: &str) -> String {
    let mut out = String::with_capacity(pattern.len());
    for c in pattern.chars() {
        match c {
            '*' => out.push_str(WITNESS),
            '?' => out.push('w'),
            c => out.push(c),
        }
    }
    out
}
