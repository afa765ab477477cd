//! Zero-tail binary convolutional code and Viterbi decoder.

use thiserror::Error;

use crate::bits::BitVec;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConvError {
    #[error("constraint length must be in 2..=16, got {0}")]
    ConstraintLength(usize),
    #[error("need at least one generator, each nonzero and below 2^K")]
    Generators,
    #[error("observation length {len} must be a multiple of {rate_inv} and at least {min}")]
    ObservationLength {
        len: usize,
        rate_inv: usize,
        min: usize,
    },
}

/// Received channel observations.
#[derive(Clone, Copy, Debug)]
pub enum Observation<'a> {
    /// Hard decisions, scored with the Hamming metric.
    Hard(&'a BitVec),
    /// BPSK soft values (0 ↦ +1, 1 ↦ −1), scored with squared Euclidean distance.
    Soft(&'a [f64]),
}

impl Observation<'_> {
    fn len(&self) -> usize {
        match self {
            Observation::Hard(b) => b.len(),
            Observation::Soft(s) => s.len(),
        }
    }

    fn cost(&self, i: usize, bit: bool) -> f64 {
        match self {
            Observation::Hard(b) => f64::from(u8::from(b.as_slice()[i] != bit)),
            Observation::Soft(s) => {
                let x = if bit { -1.0 } else { 1.0 };
                let d = s[i] - x;
                d * d
            }
        }
    }
}

/// Rate 1/n feed-forward convolutional code, terminated with K−1 zero bits.
///
/// Generators are given with the tap on the current input as the most
/// significant of K bits, e.g. `0o7` = 111 and `0o5` = 101.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvCode {
    k: usize,
    generators: Vec<u32>,
}

impl Default for ConvCode {
    /// Rate 1/2, K = 3, generators (7, 5) octal.
    fn default() -> Self {
        Self {
            k: 3,
            generators: vec![0o7, 0o5],
        }
    }
}

impl ConvCode {
    pub fn new(constraint_length: usize, generators: Vec<u32>) -> Result<Self, ConvError> {
        if !(2..=16).contains(&constraint_length) {
            return Err(ConvError::ConstraintLength(constraint_length));
        }
        if generators.is_empty()
            || generators
                .iter()
                .any(|&g| g == 0 || g >= 1 << constraint_length)
        {
            return Err(ConvError::Generators);
        }
        Ok(Self {
            k: constraint_length,
            generators,
        })
    }

    pub fn constraint_length(&self) -> usize {
        self.k
    }

    /// Output bits per input bit.
    pub fn rate_inv(&self) -> usize {
        self.generators.len()
    }

    pub fn rate(&self) -> f64 {
        1.0 / self.generators.len() as f64
    }

    pub fn encoded_len(&self, input_len: usize) -> usize {
        self.rate_inv() * (input_len + self.k - 1)
    }

    fn num_states(&self) -> usize {
        1 << (self.k - 1)
    }

    /// Output bits for feeding `input` while the register holds `state`
    /// (most recent past input in the state's top bit).
    fn outputs(&self, state: usize, input: bool) -> impl Iterator<Item = bool> + '_ {
        let reg = (usize::from(input) << (self.k - 1)) | state;
        self.generators
            .iter()
            .map(move |&g| (reg as u32 & g).count_ones() % 2 == 1)
    }

    fn next_state(&self, state: usize, input: bool) -> usize {
        (usize::from(input) << (self.k - 2)) | (state >> 1)
    }

    pub fn encode(&self, bits: &BitVec) -> BitVec {
        let mut out = BitVec::with_capacity(self.encoded_len(bits.len()));
        let mut state = 0;
        let tail = std::iter::repeat_n(false, self.k - 1);
        for b in bits.iter().chain(tail) {
            for o in self.outputs(state, b) {
                out.push(o);
            }
            state = self.next_state(state, b);
        }
        out
    }

    /// Maximum-likelihood decode over the terminated trellis.
    ///
    /// Equal path metrics keep the survivor from the lower-indexed predecessor.
    pub fn decode(&self, obs: Observation<'_>) -> Result<BitVec, ConvError> {
        let n = self.rate_inv();
        let min = n * (self.k - 1);
        if !obs.len().is_multiple_of(n) || obs.len() < min {
            return Err(ConvError::ObservationLength {
                len: obs.len(),
                rate_inv: n,
                min,
            });
        }
        let steps = obs.len() / n;
        let states = self.num_states();

        // Branch cost table per (state, input) for the current step.
        let mut metric = vec![f64::INFINITY; states];
        metric[0] = 0.0;
        let mut next = vec![f64::INFINITY; states];
        // survivors[step][state] = (predecessor, input bit)
        let mut survivors: Vec<Vec<(u32, bool)>> = Vec::with_capacity(steps);
        let outputs: Vec<Vec<bool>> = (0..states * 2)
            .map(|i| self.outputs(i >> 1, i & 1 == 1).collect())
            .collect();

        for step in 0..steps {
            next.fill(f64::INFINITY);
            let mut surv = vec![(0u32, false); states];
            let mut set = vec![false; states];
            // Predecessors of each state ascend in index when visited in this order.
            for s in 0..states {
                if metric[s] == f64::INFINITY {
                    continue;
                }
                for input in [false, true] {
                    let ns = self.next_state(s, input);
                    let cost: f64 = outputs[(s << 1) | usize::from(input)]
                        .iter()
                        .enumerate()
                        .map(|(j, &bit)| obs.cost(step * n + j, bit))
                        .sum();
                    let m = metric[s] + cost;
                    // NaN observations compare false and never replace a survivor.
                    if !set[ns] || m < next[ns] {
                        next[ns] = m;
                        surv[ns] = (s as u32, input);
                        set[ns] = true;
                    }
                }
            }
            survivors.push(surv);
            std::mem::swap(&mut metric, &mut next);
        }

        let mut state = 0usize;
        let mut decoded = vec![false; steps];
        for step in (0..steps).rev() {
            let (prev, input) = survivors[step][state];
            decoded[step] = input;
            state = prev as usize;
        }
        decoded.truncate(steps - (self.k - 1));
        Ok(decoded.into())
    }

    pub fn decode_hard(&self, bits: &BitVec) -> Result<BitVec, ConvError> {
        self.decode(Observation::Hard(bits))
    }

    pub fn decode_soft(&self, values: &[f64]) -> Result<BitVec, ConvError> {
        self.decode(Observation::Soft(values))
    }
}
