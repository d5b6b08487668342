//! Online suffix tree over a single window block, built with Ukkonen's
//! algorithm.
//!
//! The tree is implicit: no terminator is appended, so suffixes that are
//! prefixes of longer suffixes stay inside edges rather than ending at leaves.
//! That is all a longest-prefix query needs.
//!
//! Every node records the smallest suffix start in its subtree. Leaves are
//! created in increasing suffix order, so a split node simply inherits the
//! value of the edge it splits, and queries can report the earliest
//! occurrence without walking the subtree.

const NONE: u32 = u32::MAX;
/// `end` marker for leaf edges, which always run to the current text end.
const OPEN: u32 = u32::MAX;
const ROOT: u32 = 0;

#[derive(Debug, Clone, Copy)]
struct Node {
    start: u32,
    end: u32,
    link: u32,
    first_child: u32,
    next_sibling: u32,
    min_suffix: u32,
}

impl Node {
    fn new(start: u32, end: u32, min_suffix: u32) -> Self {
        Node {
            start,
            end,
            link: ROOT,
            first_child: NONE,
            next_sibling: NONE,
            min_suffix,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuffixTree {
    text: Vec<u8>,
    nodes: Vec<Node>,
    // root fan-out is up to 256, so it gets a direct table
    root_children: Box<[u32; 256]>,
    active_node: u32,
    active_edge: usize,
    active_len: usize,
    remainder: usize,
    steps: u64,
}

impl Default for SuffixTree {
    fn default() -> Self {
        Self::new()
    }
}

impl SuffixTree {
    pub fn new() -> Self {
        Self::with_capacity(0)
    }

    pub fn with_capacity(bytes: usize) -> Self {
        let mut nodes = Vec::with_capacity(if bytes == 0 { 1 } else { 2 * bytes });
        nodes.push(Node::new(0, 0, 0));
        SuffixTree {
            text: Vec::with_capacity(bytes),
            nodes,
            root_children: Box::new([NONE; 256]),
            active_node: ROOT,
            active_edge: 0,
            active_len: 0,
            remainder: 0,
            steps: 0,
        }
    }

    pub fn text(&self) -> &[u8] {
        &self.text
    }

    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    /// Nodes allocated so far, root included.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Elementary active-point moves performed by all `extend` calls.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn edge_end(&self, n: u32) -> usize {
        let end = self.nodes[n as usize].end;
        if end == OPEN {
            self.text.len()
        } else {
            end as usize
        }
    }

    fn edge_len(&self, n: u32) -> usize {
        self.edge_end(n) - self.nodes[n as usize].start as usize
    }

    fn child(&self, parent: u32, byte: u8) -> Option<u32> {
        if parent == ROOT {
            let c = self.root_children[byte as usize];
            return (c != NONE).then_some(c);
        }
        let mut c = self.nodes[parent as usize].first_child;
        while c != NONE {
            let node = &self.nodes[c as usize];
            if self.text[node.start as usize] == byte {
                return Some(c);
            }
            c = node.next_sibling;
        }
        None
    }

    fn add_child(&mut self, parent: u32, child: u32) {
        if parent == ROOT {
            let byte = self.text[self.nodes[child as usize].start as usize];
            self.root_children[byte as usize] = child;
        } else {
            self.nodes[child as usize].next_sibling = self.nodes[parent as usize].first_child;
            self.nodes[parent as usize].first_child = child;
        }
    }

    fn replace_child(&mut self, parent: u32, old: u32, new: u32) {
        if parent == ROOT {
            let byte = self.text[self.nodes[old as usize].start as usize];
            self.root_children[byte as usize] = new;
            return;
        }
        let next = self.nodes[old as usize].next_sibling;
        self.nodes[new as usize].next_sibling = next;
        self.nodes[old as usize].next_sibling = NONE;
        if self.nodes[parent as usize].first_child == old {
            self.nodes[parent as usize].first_child = new;
            return;
        }
        let mut c = self.nodes[parent as usize].first_child;
        while c != NONE {
            if self.nodes[c as usize].next_sibling == old {
                self.nodes[c as usize].next_sibling = new;
                return;
            }
            c = self.nodes[c as usize].next_sibling;
        }
        unreachable!("replace_child: {old} is not a child of {parent}");
    }

    fn push_node(&mut self, node: Node) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(node);
        id
    }

    /// Indexes one more byte of the block.
    pub fn extend(&mut self, byte: u8) {
        assert!(self.text.len() < (u32::MAX - 1) as usize, "suffix tree text too long");
        self.text.push(byte);
        let pos = self.text.len() - 1;
        self.remainder += 1;
        let mut pending_link = NONE;

        while self.remainder > 0 {
            self.steps += 1;
            if self.active_len == 0 {
                self.active_edge = pos;
            }
            let edge_byte = self.text[self.active_edge];
            match self.child(self.active_node, edge_byte) {
                None => {
                    let suffix = (pos + 1 - self.remainder) as u32;
                    let leaf = self.push_node(Node::new(pos as u32, OPEN, suffix));
                    self.add_child(self.active_node, leaf);
                    if pending_link != NONE {
                        self.nodes[pending_link as usize].link = self.active_node;
                        pending_link = NONE;
                    }
                }
                Some(next) => {
                    let len = self.edge_len(next);
                    if self.active_len >= len {
                        // walk down (skip/count)
                        self.active_edge += len;
                        self.active_len -= len;
                        self.active_node = next;
                        continue;
                    }
                    let next_start = self.nodes[next as usize].start as usize;
                    if self.text[next_start + self.active_len] == byte {
                        if pending_link != NONE {
                            self.nodes[pending_link as usize].link = self.active_node;
                        }
                        self.active_len += 1;
                        break;
                    }
                    let split_end = (next_start + self.active_len) as u32;
                    let min_suffix = self.nodes[next as usize].min_suffix;
                    let split = self.push_node(Node::new(next_start as u32, split_end, min_suffix));
                    self.replace_child(self.active_node, next, split);
                    self.nodes[next as usize].start = split_end;
                    self.add_child(split, next);
                    let suffix = (pos + 1 - self.remainder) as u32;
                    let leaf = self.push_node(Node::new(pos as u32, OPEN, suffix));
                    self.add_child(split, leaf);
                    if pending_link != NONE {
                        self.nodes[pending_link as usize].link = split;
                    }
                    pending_link = split;
                }
            }
            self.remainder -= 1;
            if self.active_node == ROOT && self.active_len > 0 {
                self.active_len -= 1;
                self.active_edge = pos + 1 - self.remainder;
            } else if self.active_node != ROOT {
                self.active_node = self.nodes[self.active_node as usize].link;
            }
        }
    }

    pub fn extend_from_slice(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.extend(b);
        }
    }

    /// Longest prefix of `pattern` (at most `limit` bytes) occurring in the
    /// indexed text. Returns `(earliest_offset, length)`; `(0, 0)` when not
    /// even the first byte occurs.
    pub fn longest_prefix_match(&self, pattern: &[u8], limit: usize) -> (usize, usize) {
        let pattern = &pattern[..pattern.len().min(limit)];
        let mut node = ROOT;
        let mut locus = ROOT;
        let mut matched = 0;
        while matched < pattern.len() {
            let Some(child) = self.child(node, pattern[matched]) else {
                break;
            };
            locus = child;
            let start = self.nodes[child as usize].start as usize;
            let edge = &self.text[start..self.edge_end(child)];
            let common = edge
                .iter()
                .zip(&pattern[matched..])
                .take_while(|(a, b)| a == b)
                .count();
            matched += common;
            if common < edge.len() {
                break;
            }
            node = child;
        }
        if matched == 0 {
            (0, 0)
        } else {
            (self.nodes[locus as usize].min_suffix as usize, matched)
        }
    }

    pub fn contains(&self, needle: &[u8]) -> bool {
        needle.is_empty() || self.longest_prefix_match(needle, needle.len()).1 == needle.len()
    }

    /// Strings spelled by every root-to-leaf path.
    pub fn leaf_strings(&self) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let mut stack: Vec<(u32, Vec<u8>)> = Vec::new();
        for &c in self.root_children.iter().filter(|&&c| c != NONE) {
            stack.push((c, Vec::new()));
        }
        while let Some((n, mut prefix)) = stack.pop() {
            let start = self.nodes[n as usize].start as usize;
            prefix.extend_from_slice(&self.text[start..self.edge_end(n)]);
            let mut c = self.nodes[n as usize].first_child;
            if c == NONE {
                out.push(prefix);
                continue;
            }
            while c != NONE {
                stack.push((c, prefix.clone()));
                c = self.nodes[c as usize].next_sibling;
            }
        }
        out
    }

    /// Checks the structural invariants: every non-root internal node
    /// branches at least twice and the node count is at most `2 * len`.
    pub fn check_structure(&self) -> Result<(), String> {
        if self.nodes.len() > 2 * self.text.len().max(1) {
            return Err(format!(
                "{} nodes for {} bytes",
                self.nodes.len(),
                self.text.len()
            ));
        }
        for (id, node) in self.nodes.iter().enumerate().skip(1) {
            if node.end == OPEN {
                continue;
            }
            let mut children = 0;
            let mut c = node.first_child;
            while c != NONE {
                children += 1;
                c = self.nodes[c as usize].next_sibling;
            }
            if children < 2 {
                return Err(format!("internal node {id} has {children} children"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeSet;

    fn tree(text: &[u8]) -> SuffixTree {
        let mut t = SuffixTree::new();
        t.extend_from_slice(text);
        t
    }

    fn brute_longest(text: &[u8], pattern: &[u8], limit: usize) -> (usize, usize) {
        let pattern = &pattern[..pattern.len().min(limit)];
        let mut best = (0, 0);
        for start in 0..text.len() {
            let l = text[start..]
                .iter()
                .zip(pattern)
                .take_while(|(a, b)| a == b)
                .count();
            if l > best.1 {
                best = (start, l);
            }
        }
        best
    }

    #[test]
    fn banana_suffixes() {
        let t = tree(b"banana");
        let expected: BTreeSet<&[u8]> = [
            &b"banana"[..],
            b"anana",
            b"nana",
            b"ana",
            b"na",
            b"a",
        ]
        .into_iter()
        .collect();
        for s in &expected {
            assert!(t.contains(s), "missing {:?}", std::str::from_utf8(s));
        }
        // every root-to-leaf string is itself a suffix, and every suffix is
        // a prefix of one of them
        let leaves = t.leaf_strings();
        for l in &leaves {
            assert!(expected.contains(l.as_slice()));
        }
        for s in &expected {
            assert!(leaves.iter().any(|l| l.starts_with(s)));
        }
        assert!(!t.contains(b"nab"));
        assert!(!t.contains(b"bananas"));
        t.check_structure().unwrap();
    }

    #[test]
    fn single_byte_tree() {
        let t = tree(b"x");
        assert_eq!(t.node_count(), 2);
        assert_eq!(t.leaf_strings(), vec![b"x".to_vec()]);
    }

    #[test]
    fn node_bound_random_4096() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let data: Vec<u8> = (0..4096).map(|_| rng.gen()).collect();
        let t = tree(&data);
        assert!(t.node_count() <= 8192, "{}", t.node_count());
        t.check_structure().unwrap();
        assert!(t.steps() <= 20 * 4096);
    }

    #[test]
    fn prefix_match_examples() {
        assert_eq!(tree(b"abcabx").longest_prefix_match(b"abcd", 4), (0, 3));
        assert_eq!(tree(b"abcabx").longest_prefix_match(b"", 4), (0, 0));
        assert_eq!(tree(b"aaaa").longest_prefix_match(b"aaaaaa", 6), (0, 4));
        assert_eq!(tree(b"abc").longest_prefix_match(b"zz", 2), (0, 0));
        assert_eq!(tree(b"xyzabcab").longest_prefix_match(b"ab", 2), (3, 2));
        assert_eq!(tree(b"abcabc").longest_prefix_match(b"abcabc", 2), (0, 2));
    }

    #[test]
    fn matches_brute_force_on_small_alphabets() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(0..300);
            let sigma = rng.gen_range(1..5u8);
            let text: Vec<u8> = (0..n).map(|_| b'a' + rng.gen_range(0..sigma)).collect();
            let t = tree(&text);
            t.check_structure().unwrap();
            for _ in 0..20 {
                let m = rng.gen_range(0..40);
                let pat: Vec<u8> = (0..m).map(|_| b'a' + rng.gen_range(0..sigma)).collect();
                let limit = rng.gen_range(0..50);
                assert_eq!(
                    t.longest_prefix_match(&pat, limit),
                    brute_longest(&text, &pat, limit),
                    "text {:?} pat {:?}",
                    String::from_utf8_lossy(&text),
                    String::from_utf8_lossy(&pat)
                );
            }
        }
    }

    #[test]
    fn incremental_queries_see_every_prefix() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let text: Vec<u8> = (0..200).map(|_| b'a' + rng.gen_range(0..3u8)).collect();
        let mut t = SuffixTree::new();
        for (i, &b) in text.iter().enumerate() {
            t.extend(b);
            let pat = &text[rng.gen_range(0..=i)..];
            assert_eq!(
                t.longest_prefix_match(pat, 64),
                brute_longest(&text[..=i], pat, 64)
            );
        }
    }
}
