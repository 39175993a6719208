//! State vectors over a finite per-coordinate alphabet, plus a packed
//! representation used by the engine's history buffers.

use serde::{Deserialize, Serialize};

/// A point of the state space: `n` coordinates, each a symbol in
/// `{0, ..., q-1}`. Spin models map symbol `s` to spin `2s - 1` at
/// evaluation time.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateVector {
    coords: Vec<u8>,
}

impl StateVector {
    pub fn new(coords: Vec<u8>) -> Self {
        StateVector { coords }
    }

    /// All-`symbol` state of length `n`.
    pub fn constant(n: usize, symbol: u8) -> Self {
        StateVector {
            coords: vec![symbol; n],
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[u8] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [u8] {
        &mut self.coords
    }

    pub fn get(&self, i: usize) -> u8 {
        self.coords[i]
    }

    pub fn set(&mut self, i: usize, symbol: u8) {
        self.coords[i] = symbol;
    }

    /// True iff every symbol is `< q`.
    pub fn in_alphabet(&self, q: u8) -> bool {
        self.coords.iter().all(|&c| c < q)
    }

    /// Mixed-radix index of this state in the enumeration of `q^n` states,
    /// coordinate 0 most significant.
    pub fn index(&self, q: u8) -> usize {
        let q = q as usize;
        self.coords
            .iter()
            .fold(0usize, |acc, &c| acc * q + c as usize)
    }

    /// Inverse of [`StateVector::index`].
    pub fn from_index(mut idx: usize, n: usize, q: u8) -> Self {
        let q = q as usize;
        let mut coords = vec![0u8; n];
        for i in (0..n).rev() {
            coords[i] = (idx % q) as u8;
            idx /= q;
        }
        StateVector { coords }
    }

    /// Bit-pack into `ceil(n * bits_per_symbol / 8)` bytes, where
    /// `bits_per_symbol = ceil(log2 q)`.
    pub fn pack(&self, q: u8) -> PackedState {
        let bits = bits_per_symbol(q);
        let nbits = self.coords.len() * bits as usize;
        let mut bytes = vec![0u8; nbits.div_ceil(8)];
        for (i, &c) in self.coords.iter().enumerate() {
            let base = i * bits as usize;
            for b in 0..bits as usize {
                if c >> b & 1 == 1 {
                    let pos = base + b;
                    bytes[pos / 8] |= 1 << (pos % 8);
                }
            }
        }
        PackedState { bytes }
    }
}

/// Bit-packed state, one `bits_per_symbol(q)`-bit field per coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedState {
    bytes: Vec<u8>,
}

impl PackedState {
    pub fn unpack(&self, n: usize, q: u8) -> StateVector {
        let bits = bits_per_symbol(q);
        let mut coords = vec![0u8; n];
        for (i, c) in coords.iter_mut().enumerate() {
            let base = i * bits as usize;
            for b in 0..bits as usize {
                let pos = base + b;
                if self.bytes[pos / 8] >> (pos % 8) & 1 == 1 {
                    *c |= 1 << b;
                }
            }
        }
        StateVector { coords }
    }
}

pub fn bits_per_symbol(q: u8) -> u32 {
    debug_assert!(q >= 1);
    (q as u32).next_power_of_two().trailing_zeros().max(1)
}
