//! Tree edits: block lookup, splicing and truncation. Every edit returns a new
//! script and leaves its input untouched.

use std::ops::Range;

use super::{Block, BlockRef, Imbalance, IsarError, Node, ProofScript, Slot, Step};

/// What a step is replaced with by [`ProofScript::splice`].
#[derive(Debug, Clone)]
pub enum Replacement {
    Step(Step),
    Block(Block),
}

impl From<Step> for Replacement {
    fn from(s: Step) -> Self {
        Replacement::Step(s)
    }
}

impl From<Block> for Replacement {
    fn from(b: Block) -> Self {
        Replacement::Block(b)
    }
}

fn block_mut<'a>(root: &'a mut Block, path: &[usize]) -> &'a mut Block {
    let mut b = root;
    for &i in path {
        b = match &mut b.children[i] {
            Node::Block(inner) => inner,
            Node::Step(_) => unreachable!("path was produced by locate"),
        };
    }
    b
}

fn imbalances_of(root: &Block) -> Vec<Imbalance> {
    fn walk(b: &Block, index: &mut usize, out: &mut Vec<Imbalance>) {
        if let Some(o) = &b.opener {
            if o.keyword() == "proof" && b.closer.is_none() {
                out.push(Imbalance::UnclosedBlock(*index));
            }
            *index += 1;
        }
        for c in &b.children {
            match c {
                Node::Step(s) => {
                    if matches!(s.keyword(), "qed" | "next") {
                        out.push(Imbalance::StrayCloser(*index));
                    }
                    *index += 1;
                }
                Node::Block(inner) => walk(inner, index, out),
            }
        }
        if b.closer.is_some() {
            *index += 1;
        }
    }
    let mut out = Vec::new();
    walk(root, &mut 0, &mut out);
    out
}

/// Placeholder that re-closes a truncated block.
fn placeholder_for(path: &[usize]) -> Step {
    if path.is_empty() {
        Step::sorry()
    } else {
        Step::parse("show ?thesis sorry").expect("placeholder parses")
    }
}

impl ProofScript {
    fn with_root(&self, root: Block) -> ProofScript {
        let imbalances = imbalances_of(&root);
        ProofScript {
            preamble: self.preamble.clone(),
            root,
            source_span: self.source_span.clone(),
            trailer: self.trailer.clone(),
            imbalances,
        }
    }

    /// The deepest block whose span contains `index`. A `proof` opener belongs
    /// to the block it opens.
    pub fn innermost_block(&self, index: usize) -> Result<BlockRef, IsarError> {
        let (path, _) = self.locate(index)?;
        Ok(BlockRef { path })
    }

    /// Replaces the step at `index`. A block may only replace a child step.
    pub fn splice(
        &self,
        index: usize,
        replacement: impl Into<Replacement>,
    ) -> Result<ProofScript, IsarError> {
        let (path, slot) = self.locate(index)?;
        let mut root = self.root.clone();
        let block = block_mut(&mut root, &path);
        match (slot, replacement.into()) {
            (Slot::Opener, Replacement::Step(s)) => block.opener = Some(s),
            (Slot::Closer, Replacement::Step(s)) => block.closer = Some(s),
            (Slot::Child(i), Replacement::Step(s)) => block.children[i] = Node::Step(s),
            (Slot::Child(i), Replacement::Block(b)) => block.children[i] = Node::Block(b),
            (_, Replacement::Block(_)) => return Err(IsarError::InvalidReplacement),
        }
        Ok(self.with_root(root))
    }

    /// Keeps everything in `block` strictly before `index`, then a `sorry`
    /// placeholder and the block's closer. Truncating at a block's own opener
    /// replaces the whole block with the placeholder.
    pub fn truncate_to_block(&self, block: &BlockRef, index: usize) -> Result<ProofScript, IsarError> {
        let range = self
            .block_range(block)
            .ok_or_else(|| IsarError::BlockNotFound(block.path.clone()))?;
        if index >= self.len() {
            return Err(IsarError::IndexOutOfRange { index, len: self.len() });
        }
        if !range.contains(&index) {
            return Err(IsarError::BlockMismatch { path: block.path.clone(), index });
        }
        let mut root = self.root.clone();
        let target = block_mut(&mut root, &block.path);
        let mut cursor = range.start;
        if target.opener.is_some() {
            if index == cursor {
                let (last, parent_path) = block.path.split_last().expect("root has no opener");
                let parent = block_mut(&mut root, parent_path);
                parent.children[*last] = Node::Step(Step::sorry());
                return Ok(self.with_root(root));
            }
            cursor += 1;
        }
        let mut kept = Vec::new();
        for child in std::mem::take(&mut target.children) {
            let n = match &child {
                Node::Step(_) => 1,
                Node::Block(b) => b.step_count(),
            };
            if cursor + n > index {
                break;
            }
            cursor += n;
            kept.push(child);
        }
        kept.push(Node::Step(placeholder_for(&block.path)));
        target.children = kept;
        Ok(self.with_root(root))
    }

    /// Byte ranges of every step within [`ProofScript::render`]'s output.
    pub fn rendered_spans(&self) -> Vec<Range<usize>> {
        let rendered = self.render();
        let mut spans = Vec::with_capacity(self.len());
        let mut offset = if self.preamble.is_empty() { 0 } else { self.preamble.len() + 1 };
        for line in rendered[offset.min(rendered.len())..].split('\n') {
            if spans.len() == self.len() {
                break;
            }
            let trimmed = line.trim_start_matches(' ');
            let start = offset + (line.len() - trimmed.len());
            spans.push(start..start + trimmed.len());
            offset += line.len() + 1;
        }
        spans
    }
}
