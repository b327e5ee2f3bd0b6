//! Canonical Huffman coding over small symbol alphabets.
//!
//! Code lengths come from the usual greedy merge with deterministic
//! tie-breaking (insertion order), and codewords are then assigned in
//! canonical order, so identical frequency tables always produce identical
//! codes. Decoding walks a binary trie and never aborts: a stream that ends
//! mid-codeword yields the most frequent symbol for the hanging tail.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap, HashMap};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum TrieNode {
    /// Child indices for bits 0 and 1; `usize::MAX` marks an absent child.
    Branch([usize; 2]),
    Leaf(u16),
}

/// A canonical prefix code for a fixed symbol alphabet.
#[derive(Debug, Clone)]
pub struct HuffmanCode {
    /// Symbol -> (codeword in the low `len` bits, most significant first).
    codes: HashMap<u16, (u32, u8)>,
    /// Symbols in ascending order, for nearest-symbol lookups.
    symbols: Vec<u16>,
    trie: Vec<TrieNode>,
    most_frequent: u16,
}

/// Build a canonical prefix code from positive symbol frequencies.
pub fn huffman_code(frequencies: &BTreeMap<u16, u64>) -> Result<HuffmanCode> {
    if frequencies.is_empty() {
        return Err(Error::InvalidArgument("frequency table is empty".into()));
    }
    if frequencies.values().any(|&c| c == 0) {
        return Err(Error::InvalidArgument("frequency table contains zero counts".into()));
    }

    let most_frequent = frequencies
        .iter()
        .max_by_key(|&(&sym, &count)| (count, Reverse(sym)))
        .map(|(&sym, _)| sym)
        .expect("non-empty");

    let lengths: Vec<(u16, u8)> = if frequencies.len() == 1 {
        // Degenerate alphabet: a single one-bit codeword.
        vec![(most_frequent, 1)]
    } else {
        code_lengths(frequencies)
    };

    // Canonical assignment: shortest codes first, symbols ascending within
    // a length.
    let mut ordered = lengths;
    ordered.sort_unstable_by_key(|&(sym, len)| (len, sym));
    let mut codes = HashMap::with_capacity(ordered.len());
    let mut next_code: u32 = 0;
    let mut prev_len: u8 = ordered[0].1;
    for &(sym, len) in &ordered {
        next_code <<= len - prev_len;
        codes.insert(sym, (next_code, len));
        next_code += 1;
        prev_len = len;
    }

    // Decode trie.
    let mut trie = vec![TrieNode::Branch([usize::MAX; 2])];
    for (&sym, &(code, len)) in &codes {
        let mut node = 0;
        for bit_pos in (0..len).rev() {
            let bit = ((code >> bit_pos) & 1) as usize;
            let next = match trie[node] {
                TrieNode::Branch(children) => children[bit],
                TrieNode::Leaf(_) => unreachable!("prefix property violated"),
            };
            let child = if next == usize::MAX {
                let idx = trie.len();
                trie.push(if bit_pos == 0 {
                    TrieNode::Leaf(sym)
                } else {
                    TrieNode::Branch([usize::MAX; 2])
                });
                if let TrieNode::Branch(children) = &mut trie[node] {
                    children[bit] = idx;
                }
                idx
            } else {
                next
            };
            node = child;
        }
    }

    Ok(HuffmanCode {
        codes,
        symbols: frequencies.keys().copied().collect(),
        trie,
        most_frequent,
    })
}

/// Greedy merge producing code lengths, deterministic under count ties.
fn code_lengths(frequencies: &BTreeMap<u16, u64>) -> Vec<(u16, u8)> {
    // Internal forest: leaves first, then merge nodes.
    struct Node {
        weight: u64,
        children: Option<(usize, usize)>,
        symbol: u16,
    }
    let mut nodes: Vec<Node> = frequencies
        .iter()
        .map(|(&symbol, &weight)| Node { weight, children: None, symbol })
        .collect();

    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        nodes.iter().enumerate().map(|(i, n)| Reverse((n.weight, i))).collect();
    while heap.len() > 1 {
        let Reverse((wa, a)) = heap.pop().expect("len > 1");
        let Reverse((wb, b)) = heap.pop().expect("len > 1");
        let idx = nodes.len();
        nodes.push(Node { weight: wa + wb, children: Some((a, b)), symbol: 0 });
        heap.push(Reverse((wa + wb, idx)));
    }

    let root = heap.pop().expect("one root").0 .1;
    let mut lengths = Vec::with_capacity(frequencies.len());
    let mut stack = vec![(root, 0u8)];
    while let Some((idx, depth)) = stack.pop() {
        match nodes[idx].children {
            Some((a, b)) => {
                stack.push((a, depth + 1));
                stack.push((b, depth + 1));
            }
            None => lengths.push((nodes[idx].symbol, depth)),
        }
    }
    lengths
}

impl HuffmanCode {
    /// Codeword length in bits for `symbol`, if it is in the alphabet.
    pub fn code_length(&self, symbol: u16) -> Option<u8> {
        self.codes.get(&symbol).map(|&(_, len)| len)
    }

    pub fn alphabet(&self) -> &[u16] {
        &self.symbols
    }

    pub fn most_frequent(&self) -> u16 {
        self.most_frequent
    }

    /// The alphabet symbol numerically closest to `symbol` (ties toward the
    /// smaller symbol).
    pub fn nearest_symbol(&self, symbol: u16) -> u16 {
        match self.symbols.binary_search(&symbol) {
            Ok(i) => self.symbols[i],
            Err(i) => {
                let lower = i.checked_sub(1).map(|j| self.symbols[j]);
                let upper = self.symbols.get(i).copied();
                match (lower, upper) {
                    (Some(lo), Some(hi)) => {
                        if symbol - lo <= hi - symbol {
                            lo
                        } else {
                            hi
                        }
                    }
                    (Some(lo), None) => lo,
                    (None, Some(hi)) => hi,
                    (None, None) => unreachable!("alphabet is non-empty"),
                }
            }
        }
    }

    /// Expected codeword length in bits under the given frequencies.
    pub fn expected_length(&self, frequencies: &BTreeMap<u16, u64>) -> f64 {
        let total: u64 = frequencies.values().sum();
        frequencies
            .iter()
            .map(|(&sym, &count)| {
                let len = self.codes.get(&sym).map_or(0, |&(_, l)| l);
                count as f64 * len as f64 / total as f64
            })
            .sum()
    }

    /// Encode a symbol stream as bits (one byte per bit, values 0/1).
    pub fn encode(&self, symbols: &[u16]) -> Result<Vec<u8>> {
        let mut bits = Vec::new();
        for &sym in symbols {
            let &(code, len) = self.codes.get(&sym).ok_or_else(|| {
                Error::InvalidArgument(format!("symbol {sym} is not in the code alphabet"))
            })?;
            for bit_pos in (0..len).rev() {
                bits.push(((code >> bit_pos) & 1) as u8);
            }
        }
        Ok(bits)
    }

    /// Decode up to `max_symbols` symbols from a bit stream.
    ///
    /// Decoding never fails: an unresolvable tail (end of stream inside a
    /// codeword, or a dead branch) emits the most frequent symbol and
    /// resynchronizes at the next bit.
    pub fn decode(&self, bits: &[u8], max_symbols: usize) -> Vec<u16> {
        let mut out = Vec::with_capacity(max_symbols);
        let mut node = 0usize;
        let mut mid_codeword = false;
        for &bit in bits {
            if out.len() >= max_symbols {
                break;
            }
            let next = match self.trie[node] {
                TrieNode::Branch(children) => children[(bit & 1) as usize],
                TrieNode::Leaf(_) => unreachable!("walk never rests on a leaf"),
            };
            if next == usize::MAX {
                // Dead branch (only possible for the degenerate one-symbol
                // code): emit the fallback and restart at the root.
                out.push(self.most_frequent);
                node = 0;
                mid_codeword = false;
                continue;
            }
            match self.trie[next] {
                TrieNode::Leaf(sym) => {
                    out.push(sym);
                    node = 0;
                    mid_codeword = false;
                }
                TrieNode::Branch(_) => {
                    node = next;
                    mid_codeword = true;
                }
            }
        }
        if mid_codeword && out.len() < max_symbols {
            out.push(self.most_frequent);
        }
        out
    }
}
