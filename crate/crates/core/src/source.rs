//! Character-level source coders used by the baseline systems, and per-message
//! bit accounting against the semantic scheme.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use crate::align::Aligner;
use crate::bits::BitVec;
use crate::codebook::Codebook;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SourceError {
    #[error("character {0:?} is not 7-bit ASCII")]
    NonAscii(char),
    #[error("bit length {0} is not a multiple of 7")]
    Fixed7Length(usize),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("symbol {0:?} has no Huffman code")]
    UnknownSymbol(char),
    #[error("{0} trailing bits do not form a codeword")]
    DanglingBits(usize),
}

pub fn fixed7_encode(text: &str) -> Result<BitVec, SourceError> {
    let mut bits = BitVec::with_capacity(7 * text.len());
    for c in text.chars() {
        if !c.is_ascii() {
            return Err(SourceError::NonAscii(c));
        }
        bits.push_uint(c as u64, 7);
    }
    Ok(bits)
}

pub fn fixed7_decode(bits: &BitVec) -> Result<String, SourceError> {
    if !bits.len().is_multiple_of(7) {
        return Err(SourceError::Fixed7Length(bits.len()));
    }
    Ok((0..bits.len() / 7)
        .map(|i| char::from(bits.read_uint(7 * i, 7) as u8))
        .collect())
}

#[derive(Clone, Copy, Debug)]
enum TrieNode {
    Leaf(char),
    Branch([Option<usize>; 2]),
}

/// Canonical Huffman code over characters.
#[derive(Clone, Debug)]
pub struct HuffmanTable {
    codes: BTreeMap<char, BitVec>,
    trie: Vec<TrieNode>,
}

impl HuffmanTable {
    /// Builds a table from the character frequencies of `corpus`.
    ///
    /// Merges always take the lowest frequency first and break ties by the
    /// smallest symbol in each subtree, so the table depends only on the
    /// frequency table. A single-symbol corpus gets a 1-bit code.
    pub fn build(corpus: &str) -> Result<Self, SourceError> {
        let mut freq: BTreeMap<char, u64> = BTreeMap::new();
        for c in corpus.chars() {
            *freq.entry(c).or_default() += 1;
        }
        Self::from_frequencies(&freq)
    }

    pub fn from_frequencies(freq: &BTreeMap<char, u64>) -> Result<Self, SourceError> {
        if freq.is_empty() {
            return Err(SourceError::EmptyCorpus);
        }
        let lengths = code_lengths(freq);
        let mut by_len: Vec<(usize, char)> = lengths.iter().map(|(&c, &l)| (l, c)).collect();
        by_len.sort_unstable();

        let mut codes = BTreeMap::new();
        let mut code: u64 = 0;
        let mut prev_len = by_len[0].0;
        for (i, &(len, sym)) in by_len.iter().enumerate() {
            if i > 0 {
                code = (code + 1) << (len - prev_len);
            }
            prev_len = len;
            let mut bits = BitVec::with_capacity(len);
            bits.push_uint(code, len);
            codes.insert(sym, bits);
        }

        let mut trie = vec![TrieNode::Branch([None, None])];
        for (&sym, bits) in &codes {
            let mut node = 0;
            for b in bits.iter() {
                let TrieNode::Branch(children) = trie[node] else {
                    unreachable!("canonical codes are prefix-free");
                };
                node = match children[usize::from(b)] {
                    Some(next) => next,
                    None => {
                        trie.push(TrieNode::Branch([None, None]));
                        let next = trie.len() - 1;
                        if let TrieNode::Branch(ch) = &mut trie[node] {
                            ch[usize::from(b)] = Some(next);
                        }
                        next
                    }
                };
            }
            trie[node] = TrieNode::Leaf(sym);
        }
        Ok(Self { codes, trie })
    }

    pub fn code(&self, sym: char) -> Option<&BitVec> {
        self.codes.get(&sym)
    }

    pub fn codes(&self) -> &BTreeMap<char, BitVec> {
        &self.codes
    }

    /// Σ 2^-len over all codewords.
    pub fn kraft_sum(&self) -> f64 {
        self.codes
            .values()
            .map(|c| (-(c.len() as f64)).exp2())
            .sum()
    }

    /// Encoded length without materializing the bits.
    pub fn encoded_len(&self, text: &str) -> Result<usize, SourceError> {
        text.chars()
            .map(|c| {
                self.codes
                    .get(&c)
                    .map(BitVec::len)
                    .ok_or(SourceError::UnknownSymbol(c))
            })
            .sum()
    }

    pub fn encode(&self, text: &str) -> Result<BitVec, SourceError> {
        let mut out = BitVec::new();
        for c in text.chars() {
            out.extend_from(self.codes.get(&c).ok_or(SourceError::UnknownSymbol(c))?);
        }
        Ok(out)
    }

    pub fn decode(&self, bits: &BitVec) -> Result<String, SourceError> {
        let mut out = String::new();
        let mut node = 0;
        let mut pending = 0;
        for b in bits.iter() {
            let TrieNode::Branch(children) = self.trie[node] else {
                unreachable!("walk restarts at the root after each leaf");
            };
            pending += 1;
            match children[usize::from(b)] {
                Some(next) => node = next,
                None => return Err(SourceError::DanglingBits(pending)),
            }
            if let TrieNode::Leaf(sym) = self.trie[node] {
                out.push(sym);
                node = 0;
                pending = 0;
            }
        }
        if pending > 0 {
            return Err(SourceError::DanglingBits(pending));
        }
        Ok(out)
    }
}

/// Huffman tree node: children and leaf symbol.
type Node = (Option<(usize, usize)>, Option<char>);

fn code_lengths(freq: &BTreeMap<char, u64>) -> BTreeMap<char, usize> {
    if freq.len() == 1 {
        return freq.keys().map(|&c| (c, 1)).collect();
    }
    let mut nodes: Vec<Node> = Vec::new();
    let mut heap = BinaryHeap::new();
    for (&c, &f) in freq {
        nodes.push((None, Some(c)));
        heap.push(Reverse((f, c, nodes.len() - 1)));
    }
    while heap.len() > 1 {
        let Reverse((fa, ca, a)) = heap.pop().unwrap();
        let Reverse((fb, cb, b)) = heap.pop().unwrap();
        nodes.push((Some((a, b)), None));
        heap.push(Reverse((fa + fb, ca.min(cb), nodes.len() - 1)));
    }
    let Reverse((_, _, root)) = heap.pop().unwrap();
    let mut lengths = BTreeMap::new();
    let mut stack = vec![(root, 0usize)];
    while let Some((n, depth)) = stack.pop() {
        match nodes[n] {
            (Some((a, b)), _) => {
                stack.push((a, depth + 1));
                stack.push((b, depth + 1));
            }
            (None, Some(c)) => {
                lengths.insert(c, depth);
            }
            (None, None) => unreachable!(),
        }
    }
    lengths
}

/// Source bits a message costs under each scheme, before channel coding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompressionReport {
    pub chars: usize,
    pub triplets: usize,
    pub semantic_bits: usize,
    pub fixed7_bits: usize,
    /// `None` when the message uses a character outside the Huffman table.
    pub huffman_bits: Option<usize>,
}

impl CompressionReport {
    /// A message with no aligned triplet cannot be sent semantically.
    pub fn transmittable(&self) -> bool {
        self.triplets > 0
    }
}

pub fn compression_report(
    text: &str,
    aligner: &Aligner<'_>,
    table: &HuffmanTable,
    cb: &Codebook,
) -> CompressionReport {
    let triplets = aligner.align_message(text).len();
    let chars = text.chars().count();
    CompressionReport {
        chars,
        triplets,
        semantic_bits: triplets * cb.symbol_len(),
        fixed7_bits: 7 * chars,
        huffman_bits: table.encoded_len(text).ok(),
    }
}
