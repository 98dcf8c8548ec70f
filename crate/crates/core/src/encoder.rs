//! Systematic encoding by back-substitution through the accumulator.

use bitvec::prelude::*;

use crate::codebook::QcRaCode;
use crate::error::{Error, Result};

/// Packed bit storage shared by message and codeword types.
pub type Bits = BitVec<u64, Lsb0>;

/// The `K` systematic bits of one block.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MessageBits(pub Bits);

/// A length-`N` word laid out as `[message | parity]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Codeword(pub Bits);

impl MessageBits {
    pub fn zeros(k: usize) -> Self {
        MessageBits(bitvec![u64, Lsb0; 0; k])
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        MessageBits(bits.iter().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &BitSlice<u64, Lsb0> {
        &self.0
    }
}

impl Codeword {
    pub fn zeros(n: usize) -> Self {
        Codeword(bitvec![u64, Lsb0; 0; n])
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Codeword(bits.iter().copied().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &BitSlice<u64, Lsb0> {
        &self.0
    }

    /// The leading `k` systematic bits.
    pub fn message(&self, k: usize) -> MessageBits {
        MessageBits(self.0[..k].to_bitvec())
    }
}

/// Encodes `msg` with `p_0 = <row 0 of H1, u>` and
/// `p_i = p_{i-1} ^ <row i of H1, u>`.
pub fn encode(code: &QcRaCode, msg: &MessageBits) -> Result<Codeword> {
    if msg.len() != code.k() {
        return Err(Error::Length {
            expected: code.k(),
            actual: msg.len(),
        });
    }
    let mut word = msg.0.clone();
    word.reserve(code.m());
    let mut acc = false;
    for i in 0..code.m() {
        for &j in code.h1_row(i) {
            acc ^= msg.0[j as usize];
        }
        word.push(acc);
    }
    Ok(Codeword(word))
}

/// Number of unsatisfied checks of `[H1 | A]`.
pub fn syndrome_weight(code: &QcRaCode, word: &Codeword) -> Result<usize> {
    if word.len() != code.n() {
        return Err(Error::Length {
            expected: code.n(),
            actual: word.len(),
        });
    }
    let bits = &word.0;
    let k = code.k();
    let mut unsatisfied = 0;
    for i in 0..code.m() {
        let mut parity = bits[k + i];
        if i > 0 {
            parity ^= bits[k + i - 1];
        }
        for &j in code.h1_row(i) {
            parity ^= bits[j as usize];
        }
        unsatisfied += parity as usize;
    }
    Ok(unsatisfied)
}
