//! The LZ77 sliding window: a queue of fixed-size blocks, one suffix tree
//! each.
//!
//! Positions are byte offsets from the start of the oldest live block. When
//! a block is evicted every position shifts down by `block_size`; encoder and
//! decoder apply the same eviction at the same packet boundary, so positions
//! agree on both sides.

use std::collections::VecDeque;

use crate::suffix_tree::SuffixTree;

#[derive(Debug, Clone)]
pub struct Block {
    base_offset: usize,
    tree: SuffixTree,
}

impl Block {
    pub fn base_offset(&self) -> usize {
        self.base_offset
    }

    pub fn data(&self) -> &[u8] {
        self.tree.text()
    }

    pub fn tree(&self) -> &SuffixTree {
        &self.tree
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    pub position: usize,
    pub length: usize,
}

#[derive(Debug, Clone)]
pub struct Window {
    blocks: VecDeque<Block>,
    block_size: usize,
    max_blocks: usize,
    total_live: usize,
}

impl Window {
    pub fn new(block_size: usize, max_blocks: usize) -> Self {
        assert!(block_size > 0 && max_blocks > 0, "window dimensions must be positive");
        Window {
            blocks: VecDeque::with_capacity(max_blocks),
            block_size,
            max_blocks,
            total_live: 0,
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn max_blocks(&self) -> usize {
        self.max_blocks
    }

    /// Largest position span the window can ever address.
    pub fn capacity(&self) -> usize {
        self.block_size * self.max_blocks
    }

    pub fn total_live(&self) -> usize {
        self.total_live
    }

    pub fn blocks(&self) -> impl DoubleEndedIterator<Item = &Block> + ExactSizeIterator {
        self.blocks.iter()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Feeds `data` into the newest block, opening new blocks as they fill
    /// and evicting the oldest past `max_blocks`. Returns the eviction count.
    pub fn append(&mut self, mut data: &[u8]) -> usize {
        let mut evicted = 0;
        while !data.is_empty() {
            let needs_block = self
                .blocks
                .back()
                .is_none_or(|b| b.tree.len() == self.block_size);
            if needs_block {
                if self.blocks.len() == self.max_blocks {
                    let old = self.blocks.pop_front().expect("window is full");
                    self.total_live -= old.tree.len();
                    for b in self.blocks.iter_mut() {
                        b.base_offset -= self.block_size;
                    }
                    evicted += 1;
                }
                let base_offset = self.blocks.len() * self.block_size;
                self.blocks.push_back(Block {
                    base_offset,
                    tree: SuffixTree::with_capacity(self.block_size),
                });
            }
            let block = self.blocks.back_mut().expect("block opened above");
            let room = self.block_size - block.tree.len();
            let (now, rest) = data.split_at(room.min(data.len()));
            block.tree.extend_from_slice(now);
            self.total_live += now.len();
            data = rest;
        }
        evicted
    }

    /// Longest match for a prefix of `lookahead` within any single live block.
    ///
    /// Equal lengths resolve to the newest block, then the smallest offset in
    /// that block. `None` when nothing reaches `min_len`.
    pub fn find_match(&self, lookahead: &[u8], min_len: usize, max_len: usize) -> Option<Match> {
        let mut best: Option<Match> = None;
        for block in self.blocks.iter().rev() {
            let (offset, length) = block.tree.longest_prefix_match(lookahead, max_len);
            if length >= min_len.max(1) && best.is_none_or(|m| length > m.length) {
                best = Some(Match {
                    position: block.base_offset + offset,
                    length,
                });
                if length == max_len.min(lookahead.len()) {
                    break;
                }
            }
        }
        best
    }

    /// Appends `len` live bytes starting at `position` to `out`. Returns
    /// false, leaving `out` untouched, when the range is not fully live.
    pub fn copy_range(&self, position: usize, len: usize, out: &mut Vec<u8>) -> bool {
        let Some(end) = position.checked_add(len) else {
            return false;
        };
        if end > self.total_live {
            return false;
        }
        let mut pos = position;
        while pos < end {
            let block = &self.blocks[pos / self.block_size];
            let data = block.data();
            let local = pos - block.base_offset;
            let take = (data.len() - local).min(end - pos);
            out.extend_from_slice(&data[local..local + take]);
            pos += take;
        }
        true
    }

    /// Live bytes in position order.
    pub fn contents(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.total_live);
        for b in &self.blocks {
            out.extend_from_slice(b.data());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eviction_arithmetic() {
        let mut w = Window::new(16, 2);
        assert_eq!(w.append(&[7u8; 48]), 1);
        assert_eq!(w.total_live(), 32);
        assert_eq!(w.block_count(), 2);
        let bases: Vec<_> = w.blocks().map(|b| b.base_offset()).collect();
        assert_eq!(bases, vec![0, 16]);
    }

    #[test]
    fn empty_append_changes_nothing() {
        let mut w = Window::new(16, 2);
        assert_eq!(w.append(&[]), 0);
        assert_eq!(w.block_count(), 0);
        w.append(b"abc");
        assert_eq!(w.append(&[]), 0);
        assert_eq!(w.total_live(), 3);
    }

    #[test]
    fn partial_block() {
        let mut w = Window::new(64, 4);
        w.append(b"hello ");
        w.append(b"world");
        assert_eq!(w.total_live(), 11);
        assert_eq!(w.block_count(), 1);
        assert_eq!(w.contents(), b"hello world");
    }

    #[test]
    fn the_cat_the_dog() {
        let mut w = Window::new(64, 4);
        w.append(b"the cat");
        assert_eq!(
            w.find_match(b"the dog", 3, 258),
            Some(Match {
                position: 0,
                length: 4
            })
        );
        assert_eq!(w.find_match(b"the dog", 5, 258), None);
        assert_eq!(w.find_match(b"zebra", 1, 258), None);
        assert_eq!(Window::new(8, 2).find_match(b"abc", 1, 8), None);
    }

    #[test]
    fn tie_prefers_newest_block() {
        let mut w = Window::new(4, 3);
        w.append(b"abcdabcd");
        assert_eq!(
            w.find_match(b"abc", 3, 8),
            Some(Match {
                position: 4,
                length: 3
            })
        );
    }

    #[test]
    fn matches_do_not_span_blocks() {
        let mut w = Window::new(4, 3);
        w.append(b"xxabcdyy");
        // "abcd" straddles the block boundary at 4
        let m = w.find_match(b"abcd", 2, 8).unwrap();
        assert_eq!(m.length, 2);
    }

    #[test]
    fn positions_renumber_after_eviction() {
        let mut w = Window::new(4, 2);
        w.append(b"aaaabbbb");
        assert_eq!(w.find_match(b"bbb", 3, 4).unwrap().position, 4);
        w.append(b"cccc");
        assert_eq!(w.find_match(b"bbb", 3, 4).unwrap().position, 0);
        assert_eq!(w.find_match(b"aaa", 3, 4), None);
        let mut out = Vec::new();
        assert!(w.copy_range(2, 4, &mut out));
        assert_eq!(out, b"bbcc");
        assert!(!w.copy_range(6, 3, &mut out));
        assert!(!w.copy_range(usize::MAX, 2, &mut out));
    }
}
