//! Structural analysis of Isar proof scripts.
//!
//! A script is parsed into a tree of [`Block`]s whose leaves are [`Step`]s.
//! Only `proof`, `qed`, `oops` and `next` delimit blocks; chaining words such
//! as `moreover` and `then` stay inside the step they introduce. Steps are
//! addressed by their position in a depth-first walk that visits a block's
//! opener, then its children, then its closer.
//!
//! Parsing is purely structural: terms are never inspected, unknown commands
//! become [`StepKind::Other`], and unbalanced input still yields a tree with
//! the imbalance recorded.

mod edit;
pub use edit::Replacement;
pub mod lexer;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexer::{canonical_tokens, token_equivalent, tokenize, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsarError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("empty proof text")]
    EmptyInput,
    #[error("step index {index} out of range (script has {len} steps)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("block path {0:?} does not resolve")]
    BlockNotFound(Vec<usize>),
    #[error("block {path:?} does not contain step {index}")]
    BlockMismatch { path: Vec<usize>, index: usize },
    #[error("a block can only replace a child step, not an opener or closer")]
    InvalidReplacement,
    #[error("expected exactly one step, found {0}")]
    NotASingleStep(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Have,
    Show,
    Moreover,
    Ultimately,
    Then,
    Thus,
    Hence,
    By,
    Apply,
    Sorry,
    Let,
    Fix,
    Assume,
    Obtain,
    Using,
    Qed,
    Proof,
    Other,
}

impl StepKind {
    fn from_keyword(word: &str) -> StepKind {
        match word {
            "have" => StepKind::Have,
            "show" => StepKind::Show,
            "moreover" => StepKind::Moreover,
            "ultimately" => StepKind::Ultimately,
            "then" => StepKind::Then,
            "thus" => StepKind::Thus,
            "hence" => StepKind::Hence,
            "by" => StepKind::By,
            "apply" => StepKind::Apply,
            "sorry" => StepKind::Sorry,
            "let" => StepKind::Let,
            "fix" => StepKind::Fix,
            "assume" => StepKind::Assume,
            "obtain" => StepKind::Obtain,
            "using" => StepKind::Using,
            "qed" => StepKind::Qed,
            "proof" => StepKind::Proof,
            _ => StepKind::Other,
        }
    }
}

/// A proof method used as a terminal justification, e.g. `simp add: foo_def`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tactic {
    pub name: String,
    pub args: String,
}

impl Tactic {
    pub fn new(name: impl Into<String>, args: impl Into<String>) -> Tactic {
        let name = name.into();
        assert!(!name.trim().is_empty(), "tactic name must be non-empty");
        Tactic { name, args: args.into() }
    }

    /// Splits `"simp add: x"` into name `simp` and args `add: x`.
    pub fn parse(method: &str) -> Option<Tactic> {
        let method = method.trim();
        let method = method
            .strip_prefix('(')
            .and_then(|m| m.strip_suffix(')'))
            .map(str::trim)
            .unwrap_or(method);
        let mut parts = method.splitn(2, char::is_whitespace);
        let name = parts.next().filter(|n| !n.is_empty())?;
        Some(Tactic::new(name, parts.next().unwrap_or("").trim()))
    }

    /// The method as it appears after `by`.
    pub fn method_text(&self) -> String {
        if self.args.is_empty() {
            self.name.clone()
        } else {
            format!("({} {})", self.name, self.args)
        }
    }

    /// `by <method>`.
    pub fn justification(&self) -> String {
        format!("by {}", self.method_text())
    }
}

impl fmt::Display for Tactic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.method_text())
    }
}

/// One proof command together with its chaining prefix and justification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    kind: StepKind,
    tokens: Vec<Token>,
    /// Index in `tokens` of the terminal keyword (`by`, `sorry`, `.`, `..`).
    terminal: Option<usize>,
    span: Option<Range<usize>>,
}

const TERMINALS: &[&str] = &["by", "sorry", ".", ".."];
const STRUCTURAL: &[&str] = &["proof", "qed", "next", "oops", "done"];
const PREFIXES: &[&str] = &["moreover", "ultimately", "then", "from", "with", "also", "finally"];
const FACT_PREFIXES: &[&str] = &["using", "unfolding"];
const STATEMENTS: &[&str] = &[
    "have", "show", "hence", "thus", "obtain", "fix", "assume", "let", "define", "consider",
    "case", "presume", "note", "interpret",
];

impl Step {
    fn from_tokens(tokens: Vec<Token>, terminal: Option<usize>) -> Step {
        let first = tokens.iter().find(|t| !t.is_comment());
        let mut kind = first
            .filter(|t| t.kind == TokenKind::Word)
            .map_or(StepKind::Other, |t| StepKind::from_keyword(&t.text));
        if terminal.is_some_and(|i| tokens[i].text == "sorry") {
            kind = StepKind::Sorry;
        }
        let span = match (tokens.first(), tokens.last()) {
            (Some(a), Some(b)) => Some(a.start..b.end()),
            _ => None,
        };
        Step { kind, tokens, terminal, span }
    }

    /// Parses text that must consist of exactly one step.
    pub fn parse(text: &str) -> Result<Step, IsarError> {
        let script = parse_script(text)?;
        let n = script.len();
        if n != 1 {
            return Err(IsarError::NotASingleStep(n));
        }
        let mut step = script.step(0).cloned().ok_or(IsarError::NotASingleStep(0))?;
        step.span = None;
        Ok(step)
    }

    pub fn kind(&self) -> StepKind {
        self.kind
    }

    /// Source text with whitespace runs collapsed.
    pub fn text(&self) -> String {
        lexer::join_tokens(&self.tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Byte range in the text the step was parsed from; `None` for constructed steps.
    pub fn span(&self) -> Option<Range<usize>> {
        self.span.clone()
    }

    /// First non-comment word, e.g. `moreover` or `qed`.
    pub fn keyword(&self) -> &str {
        self.tokens
            .iter()
            .find(|t| !t.is_comment())
            .map_or("", |t| t.text.as_str())
    }

    pub fn is_placeholder(&self) -> bool {
        self.kind == StepKind::Sorry
    }

    /// Whether the step ends in a justification that can be swapped out.
    pub fn has_justification(&self) -> bool {
        self.terminal.is_some()
    }

    /// Text before the terminal justification (`have "A"` for `have "A" by simp`).
    pub fn head(&self) -> String {
        let end = self.terminal.unwrap_or(self.tokens.len());
        lexer::join_tokens(&self.tokens[..end])
    }

    /// The justification text, e.g. `by (simp add: x)` or `sorry`.
    pub fn justification(&self) -> Option<String> {
        self.terminal.map(|i| lexer::join_tokens(&self.tokens[i..]))
    }

    /// The method after `by`, when the step ends in one.
    pub fn terminal_tactic(&self) -> Option<Tactic> {
        let i = self.terminal?;
        if self.tokens[i].text != "by" {
            return None;
        }
        Tactic::parse(&lexer::join_tokens(&self.tokens[i + 1..]))
    }

    /// Same head with `justification` (e.g. `by auto` or `sorry`) as the terminal.
    pub fn with_justification(&self, justification: &str) -> Step {
        let head = self.head();
        let text = if head.trim().is_empty() {
            justification.to_string()
        } else {
            format!("{head} {justification}")
        };
        Step::parse(&text).unwrap_or_else(|_| {
            // Heads that swallow the justification (rare LLM output) keep the raw tokens.
            let mut tokens = lexer::tokenize(&text).unwrap_or_default();
            let terminal = tokens.iter().rposition(|t| t.kind == TokenKind::Word && TERMINALS.contains(&t.text.as_str()));
            for t in &mut tokens {
                t.start = 0;
            }
            let mut s = Step::from_tokens(tokens, terminal);
            s.span = None;
            s
        })
    }

    /// A bare `sorry` step.
    pub fn sorry() -> Step {
        Step::parse("sorry").expect("sorry parses")
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Step(Step),
    Block(Block),
}

/// A `proof ... qed` region, a `next`-separated sibling, or the virtual root.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Block {
    pub opener: Option<Step>,
    pub children: Vec<Node>,
    pub closer: Option<Step>,
}

impl Block {
    pub fn step_count(&self) -> usize {
        self.opener.iter().count()
            + self.closer.iter().count()
            + self
                .children
                .iter()
                .map(|c| match c {
                    Node::Step(_) => 1,
                    Node::Block(b) => b.step_count(),
                })
                .sum::<usize>()
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Step>) {
        out.extend(self.opener.iter());
        for c in &self.children {
            match c {
                Node::Step(s) => out.push(s),
                Node::Block(b) => b.collect(out),
            }
        }
        out.extend(self.closer.iter());
    }

    /// Maximum nesting depth below this block (0 when it holds no sub-block).
    pub fn depth(&self) -> usize {
        self.children
            .iter()
            .filter_map(|c| match c {
                Node::Block(b) => Some(1 + b.depth()),
                Node::Step(_) => None,
            })
            .max()
            .unwrap_or(0)
    }
}

/// Path of child indices from the root to a block; empty for the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BlockRef {
    pub path: Vec<usize>,
}

impl BlockRef {
    pub fn root() -> BlockRef {
        BlockRef { path: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Imbalance {
    /// A `proof` without matching `qed`/`oops`; carries the opener's step index.
    UnclosedBlock(usize),
    /// A `qed` or `next` with no open block.
    StrayCloser(usize),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Parse the body of a comment that wraps the entire proof, as in
    /// `(* Proof *) (* proof - ... qed *)`.
    pub unwrap_comment: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofScript {
    /// Comments (and unwrapped wrappers) that precede the first step.
    pub preamble: String,
    pub root: Block,
    pub source_span: Range<usize>,
    trailer: Vec<Token>,
    imbalances: Vec<Imbalance>,
}

pub fn parse_script(text: &str) -> Result<ProofScript, IsarError> {
    parse_script_with(text, ParseOptions::default())
}

pub fn parse_script_with(text: &str, opts: ParseOptions) -> Result<ProofScript, IsarError> {
    if text.trim().is_empty() {
        return Err(IsarError::EmptyInput);
    }
    let mut tokens = lexer::tokenize(text)?;
    let mut preamble_tokens = Vec::new();
    if opts.unwrap_comment && tokens.iter().all(Token::is_comment) {
        if let Some(pos) = tokens.iter().position(wraps_proof) {
            let comment = tokens[pos].clone();
            let inner = &comment.text[2..comment.text.len() - 2];
            let inner_tokens = lexer::tokenize_at(inner, comment.start + 2)?;
            let after: Vec<Token> = tokens.drain(pos..).skip(1).collect();
            preamble_tokens = std::mem::take(&mut tokens);
            tokens = inner_tokens;
            tokens.extend(after);
        }
    }
    let lead = tokens.iter().take_while(|t| t.is_comment()).count();
    if tokens.len() > lead {
        preamble_tokens.extend(tokens.drain(..lead));
    }
    let (steps, trailer) = split_steps(tokens);
    let (root, imbalances) = build_tree(steps);
    Ok(ProofScript {
        preamble: lexer::join_tokens(&preamble_tokens),
        root,
        source_span: 0..text.len(),
        trailer,
        imbalances,
    })
}

fn wraps_proof(t: &Token) -> bool {
    if !t.is_comment() {
        return false;
    }
    let inner = &t.text[2..t.text.len() - 2];
    lexer::tokenize(inner)
        .ok()
        .and_then(|ts| ts.into_iter().find(|t| !t.is_comment()))
        .is_some_and(|t| {
            t.kind == TokenKind::Word
                && (STRUCTURAL.contains(&t.text.as_str())
                    || TERMINALS.contains(&t.text.as_str())
                    || STATEMENTS.contains(&t.text.as_str())
                    || PREFIXES.contains(&t.text.as_str())
                    || FACT_PREFIXES.contains(&t.text.as_str())
                    || t.text == "apply")
        })
}

#[derive(Default)]
struct Pending {
    tokens: Vec<Token>,
    has_statement: bool,
    /// Started with a chaining word such as `moreover` or `using`.
    chained: bool,
    terminal: Option<usize>,
    /// Structural commands and `apply` take method arguments but nothing else.
    closed: bool,
}

impl Pending {
    fn words(&self) -> usize {
        self.tokens.iter().filter(|t| !t.is_comment()).count()
    }

    /// Only chaining words so far (`moreover`, `then`, `using facts`).
    fn prefix_only(&self) -> bool {
        self.chained && !self.has_statement && self.terminal.is_none() && !self.closed
    }
}

fn split_steps(tokens: Vec<Token>) -> (Vec<Step>, Vec<Token>) {
    let mut steps = Vec::new();
    let mut cur = Pending::default();
    let mut comments: Vec<Token> = Vec::new();

    fn flush(cur: &mut Pending, steps: &mut Vec<Step>) {
        if cur.words() > 0 {
            let p = std::mem::take(cur);
            steps.push(Step::from_tokens(p.tokens, p.terminal));
        }
    }

    for tok in tokens {
        if tok.is_comment() {
            comments.push(tok);
            continue;
        }
        let word = if tok.kind == TokenKind::Word { tok.text.as_str() } else { "" };
        if STRUCTURAL.contains(&word) {
            flush(&mut cur, &mut steps);
            cur.closed = true;
        } else if word == "apply" {
            if !cur.prefix_only() {
                flush(&mut cur, &mut steps);
            }
            cur.closed = true;
        } else if TERMINALS.contains(&word) {
            if cur.words() == 0 || cur.terminal.is_some() || cur.closed {
                flush(&mut cur, &mut steps);
            }
            cur.terminal = Some(cur.tokens.len() + comments.len());
        } else if FACT_PREFIXES.contains(&word) {
            if cur.words() == 0 || cur.terminal.is_some() || cur.closed {
                flush(&mut cur, &mut steps);
                cur.chained = true;
            }
        } else if PREFIXES.contains(&word) || STATEMENTS.contains(&word) {
            if !cur.prefix_only() {
                flush(&mut cur, &mut steps);
                cur.chained = PREFIXES.contains(&word);
            }
            cur.has_statement |= STATEMENTS.contains(&word);
        }
        cur.tokens.append(&mut comments);
        cur.tokens.push(tok);
    }
    flush(&mut cur, &mut steps);
    (steps, comments)
}

fn build_tree(steps: Vec<Step>) -> (Block, Vec<Imbalance>) {
    let mut stack: Vec<(Block, usize)> = vec![(Block::default(), 0)];
    let mut imbalances = Vec::new();
    let mut opener_index: Vec<usize> = Vec::new();
    for (index, step) in steps.into_iter().enumerate() {
        match step.keyword() {
            "proof" => {
                stack.push((Block { opener: Some(step), ..Block::default() }, 0));
                opener_index.push(index);
            }
            "qed" | "oops" if stack.len() > 1 => {
                let (mut block, _) = stack.pop().unwrap();
                opener_index.pop();
                block.closer = Some(step);
                stack.last_mut().unwrap().0.children.push(Node::Block(block));
            }
            "next" if stack.len() > 1 => {
                let (mut block, _) = stack.pop().unwrap();
                block.closer = Some(step);
                stack.last_mut().unwrap().0.children.push(Node::Block(block));
                stack.push((Block::default(), 0));
            }
            kw => {
                if matches!(kw, "qed" | "next") {
                    imbalances.push(Imbalance::StrayCloser(index));
                }
                stack.last_mut().unwrap().0.children.push(Node::Step(step));
            }
        }
    }
    while stack.len() > 1 {
        let (block, _) = stack.pop().unwrap();
        if let Some(i) = opener_index.pop() {
            imbalances.push(Imbalance::UnclosedBlock(i));
        }
        stack.last_mut().unwrap().0.children.push(Node::Block(block));
    }
    imbalances.sort_by_key(|i| match i {
        Imbalance::UnclosedBlock(n) | Imbalance::StrayCloser(n) => *n,
    });
    (stack.pop().unwrap().0, imbalances)
}

/// Where a step index lands in the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Slot {
    Opener,
    Child(usize),
    Closer,
}

impl ProofScript {
    /// Builds a script from an already-assembled tree.
    pub fn from_root(root: Block) -> ProofScript {
        let mut s = ProofScript {
            preamble: String::new(),
            root,
            source_span: 0..0,
            trailer: Vec::new(),
            imbalances: Vec::new(),
        };
        s.source_span = 0..s.render().len();
        s
    }

    pub fn len(&self) -> usize {
        self.root.step_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All steps in index order.
    pub fn steps(&self) -> Vec<&Step> {
        let mut out = Vec::with_capacity(self.len());
        self.root.collect(&mut out);
        out
    }

    pub fn step(&self, index: usize) -> Option<&Step> {
        self.steps().get(index).copied()
    }

    /// Nesting depth of the deepest block (root alone is 0).
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn imbalances(&self) -> &[Imbalance] {
        &self.imbalances
    }

    pub fn is_balanced(&self) -> bool {
        self.imbalances.is_empty()
    }

    pub fn block(&self, r: &BlockRef) -> Option<&Block> {
        let mut b = &self.root;
        for &i in &r.path {
            match b.children.get(i)? {
                Node::Block(inner) => b = inner,
                Node::Step(_) => return None,
            }
        }
        Some(b)
    }

    /// Index range `[first, last]` of the steps a block spans.
    pub fn block_range(&self, r: &BlockRef) -> Option<Range<usize>> {
        let target = self.block(r)?;
        let mut start = 0;
        let mut b = &self.root;
        for &i in &r.path {
            start += b.opener.iter().count();
            for c in &b.children[..i] {
                start += match c {
                    Node::Step(_) => 1,
                    Node::Block(x) => x.step_count(),
                };
            }
            match &b.children[i] {
                Node::Block(inner) => b = inner,
                Node::Step(_) => return None,
            }
        }
        Some(start..start + target.step_count())
    }

    /// Block path and slot of the step at `index`.
    pub(crate) fn locate(&self, index: usize) -> Result<(Vec<usize>, Slot), IsarError> {
        fn walk(b: &Block, mut index: usize, path: &mut Vec<usize>) -> Option<Slot> {
            if b.opener.is_some() {
                if index == 0 {
                    return Some(Slot::Opener);
                }
                index -= 1;
            }
            for (ci, c) in b.children.iter().enumerate() {
                match c {
                    Node::Step(_) => {
                        if index == 0 {
                            return Some(Slot::Child(ci));
                        }
                        index -= 1;
                    }
                    Node::Block(inner) => {
                        let n = inner.step_count();
                        if index < n {
                            path.push(ci);
                            return walk(inner, index, path);
                        }
                        index -= n;
                    }
                }
            }
            if b.closer.is_some() && index == 0 {
                return Some(Slot::Closer);
            }
            None
        }
        let mut path = Vec::new();
        walk(&self.root, index, &mut path)
            .map(|slot| (path, slot))
            .ok_or(IsarError::IndexOutOfRange { index, len: self.len() })
    }

    /// Indices of all `sorry` placeholders in source order.
    pub fn find_placeholders(&self) -> Vec<usize> {
        self.steps()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_placeholder())
            .map(|(i, _)| i)
            .collect()
    }

    /// Canonical text: one step per line, two spaces of indentation per block level.
    pub fn render(&self) -> String {
        let mut lines = Vec::new();
        if !self.preamble.is_empty() {
            lines.push(self.preamble.clone());
        }
        render_block(&self.root, 0, &mut lines);
        if !self.trailer.is_empty() {
            lines.push(lexer::join_tokens(&self.trailer));
        }
        lines.join("\n")
    }

    /// Text of the steps before `index`, in order. Open blocks stay open.
    pub fn render_prefix(&self, index: usize) -> String {
        let mut lines = Vec::new();
        render_block(&self.root, 0, &mut lines);
        lines.truncate(index);
        lines.join("\n")
    }
}

fn indent(depth: usize) -> String {
    "  ".repeat(depth)
}

fn render_block(b: &Block, depth: usize, lines: &mut Vec<String>) {
    let outer = depth.saturating_sub(1);
    if let Some(o) = &b.opener {
        lines.push(format!("{}{}", indent(outer), o.text()));
    }
    for c in &b.children {
        match c {
            Node::Step(s) => lines.push(format!("{}{}", indent(depth), s.text())),
            Node::Block(inner) => render_block(inner, depth + 1, lines),
        }
    }
    if let Some(c) = &b.closer {
        lines.push(format!("{}{}", indent(outer), c.text()));
    }
}

impl fmt::Display for ProofScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
