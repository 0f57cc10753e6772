use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid choice stream hex: {0}")]
pub struct StreamHexError(String);

/// Recorded random choices, replayed left to right.
///
/// Reading past the end draws fresh bytes from a filler generator and
/// appends them, so after any decode [`bytes`](Self::bytes) holds a complete
/// replayable input.
#[derive(Debug, Clone)]
pub struct ChoiceStream {
    bytes: Vec<u8>,
    cursor: usize,
    appended: usize,
    filler: ChaCha8Rng,
}

impl PartialEq for ChoiceStream {
    fn eq(&self, other: &Self) -> bool {
        self.bytes == other.bytes
    }
}

impl Eq for ChoiceStream {}

/// Bytes needed to pick uniformly-ish from `bound` outcomes.
pub fn bytes_for_bound(bound: u64) -> usize {
    if bound <= 1 {
        return 0;
    }
    let bits = 64 - (bound - 1).leading_zeros() as usize;
    bits.div_ceil(8)
}

impl ChoiceStream {
    /// A stream over `bytes`; exhaustion is filled from a generator seeded with 0.
    pub fn new(bytes: Vec<u8>) -> ChoiceStream {
        ChoiceStream::with_filler(bytes, 0)
    }

    pub fn with_filler(bytes: Vec<u8>, filler_seed: u64) -> ChoiceStream {
        ChoiceStream {
            bytes,
            cursor: 0,
            appended: 0,
            filler: ChaCha8Rng::seed_from_u64(filler_seed),
        }
    }

    pub fn from_hex(text: &str) -> Result<ChoiceStream, StreamHexError> {
        hex::decode(text.trim())
            .map(ChoiceStream::new)
            .map_err(|e| StreamHexError(e.to_string()))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    /// An integer in `[0, bound)`. `bound` 0 is treated as 1.
    pub fn next_choice(&mut self, bound: u64) -> u64 {
        let width = bytes_for_bound(bound);
        if width == 0 {
            return 0;
        }
        let mut value = 0u64;
        for _ in 0..width {
            value = (value << 8) | u64::from(self.next_byte());
        }
        value % bound
    }

    /// Convenience for indexing into collections.
    pub fn next_index(&mut self, len: usize) -> usize {
        self.next_choice(len as u64) as usize
    }

    pub fn next_byte(&mut self) -> u8 {
        if self.cursor == self.bytes.len() {
            // Same byte a one-byte fill_bytes would give, without its overhead.
            self.bytes.push(self.filler.next_u32() as u8);
            self.appended += 1;
        }
        let b = self.bytes[self.cursor];
        self.cursor += 1;
        b
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Bytes appended on exhaustion since creation or the last rewind.
    pub fn appended(&self) -> usize {
        self.appended
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    /// Restarts decoding from the first byte; appended bytes stay.
    pub fn rewind(&mut self) {
        self.cursor = 0;
        self.appended = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn widths() {
        assert_eq!(bytes_for_bound(1), 0);
        assert_eq!(bytes_for_bound(2), 1);
        assert_eq!(bytes_for_bound(256), 1);
        assert_eq!(bytes_for_bound(257), 2);
        assert_eq!(bytes_for_bound(65536), 2);
        assert_eq!(bytes_for_bound(u64::MAX), 8);
    }

    #[test]
    fn bound_one_reads_nothing() {
        let mut s = ChoiceStream::new(vec![9]);
        assert_eq!(s.next_choice(1), 0);
        assert_eq!(s.cursor(), 0);
    }

    #[test]
    fn modulo_reduction() {
        let mut s = ChoiceStream::new(vec![0x05]);
        assert_eq!(s.next_choice(4), 1);
        let mut s = ChoiceStream::new(vec![0x01, 0x02]);
        assert_eq!(s.next_choice(1000), 258);
    }

    #[test]
    fn exhaustion_appends_and_replays() {
        let mut s = ChoiceStream::with_filler(Vec::new(), 42);
        let v = s.next_choice(256);
        assert_eq!(s.appended(), 1);
        assert_eq!(u64::from(s.bytes()[0]), v);
        let mut again = ChoiceStream::new(s.clone().into_bytes());
        assert_eq!(again.next_choice(256), v);
        assert_eq!(again.appended(), 0);
    }

    #[test]
    fn hex_round_trip() {
        let s = ChoiceStream::new(vec![0, 0xab, 0xff]);
        assert_eq!(s.to_hex(), "00abff");
        assert_eq!(ChoiceStream::from_hex("00abff").unwrap(), s);
        assert!(ChoiceStream::from_hex("0g").is_err());
    }

    proptest! {
        #[test]
        fn choices_stay_in_bounds(bytes in proptest::collection::vec(any::<u8>(), 0..64),
                                  bounds in proptest::collection::vec(1u64..100_000, 1..32)) {
            let mut s = ChoiceStream::with_filler(bytes, 3);
            for &b in &bounds {
                prop_assert!(s.next_choice(b) < b);
            }
        }

        #[test]
        fn replay_after_fill_is_identical(seed in any::<u64>(),
                                          bounds in proptest::collection::vec(1u64..100_000, 1..32)) {
            let mut first = ChoiceStream::with_filler(Vec::new(), seed);
            let a: Vec<u64> = bounds.iter().map(|&b| first.next_choice(b)).collect();
            let mut second = ChoiceStream::with_filler(first.into_bytes(), seed.wrapping_add(1));
            let b: Vec<u64> = bounds.iter().map(|&b| second.next_choice(b)).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(second.appended(), 0);
        }
    }
}
