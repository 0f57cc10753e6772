use rand::Rng;

/// Largest block touched by one duplication, deletion or extension.
pub const MAX_BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    BitFlip,
    Overwrite,
    Duplicate,
    Delete,
    Truncate,
    Extend,
}

const OPS: [Op; 6] = [
    Op::BitFlip,
    Op::Overwrite,
    Op::Duplicate,
    Op::Delete,
    Op::Truncate,
    Op::Extend,
];

/// Applies 1, 2, 4, 8 or 16 stacked byte-level edits. The result is never
/// empty and never equal to the input.
pub fn mutate<R: Rng + ?Sized>(bytes: &[u8], rng: &mut R) -> Vec<u8> {
    let mut out = bytes.to_vec();
    let rounds = 1usize << rng.gen_range(0..=4);
    for _ in 0..rounds {
        apply(&mut out, OPS[rng.gen_range(0..OPS.len())], rng);
    }
    if out.is_empty() {
        out.push(rng.gen());
    }
    if out == bytes {
        let i = rng.gen_range(0..out.len());
        out[i] ^= 1 << rng.gen_range(0..8);
    }
    out
}

fn block_len<R: Rng + ?Sized>(available: usize, rng: &mut R) -> usize {
    rng.gen_range(1..=available.clamp(1, MAX_BLOCK))
}

fn apply<R: Rng + ?Sized>(out: &mut Vec<u8>, op: Op, rng: &mut R) {
    let len = out.len();
    match op {
        Op::Extend => {
            let n = block_len(MAX_BLOCK, rng);
            out.extend((0..n).map(|_| rng.gen::<u8>()));
        }
        _ if len == 0 => out.push(rng.gen()),
        Op::BitFlip => {
            let i = rng.gen_range(0..len);
            out[i] ^= 1 << rng.gen_range(0..8);
        }
        Op::Overwrite => {
            let i = rng.gen_range(0..len);
            out[i] = rng.gen();
        }
        Op::Duplicate => {
            let n = block_len(len, rng);
            let from = rng.gen_range(0..=len - n);
            let to = rng.gen_range(0..=len);
            let block = out[from..from + n].to_vec();
            out.splice(to..to, block);
        }
        Op::Delete => {
            let n = block_len(len, rng);
            let from = rng.gen_range(0..=len - n);
            out.drain(from..from + n);
        }
        Op::Truncate => {
            out.truncate(rng.gen_range(0..len));
        }
    }
}
