//! Counter-based Gaussian noise.
//!
//! Every variate is a pure function of `(seed, stream, index, step, coordinate)`
//! through the Philox4x32-10 bijection, so results do not depend on thread
//! count or evaluation order, and two ensembles share noise simply by using
//! the same keys.

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

/// The Philox4x32 block function with 10 rounds.
pub fn philox4x32_10(mut ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let p0 = u64::from(M0) * u64::from(ctr[0]);
        let p1 = u64::from(M1) * u64::from(ctr[2]);
        let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
        let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream tags separating independent uses of one seed.
pub mod stream {
    pub const DYNAMICS: u32 = 0;
    pub const INITIAL: u32 = 1;
    pub const SUBSAMPLE: u32 = 2;
    pub const DIRECTIONS: u32 = 3;
    pub const JITTER: u32 = 4;
    pub const RESAMPLE: u32 = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoisePolicy {
    pub seed: u64,
    silent: bool,
}

impl NoisePolicy {
    pub fn new(seed: u64) -> Self {
        NoisePolicy { seed, silent: false }
    }

    /// All Gaussian increments are zero (uniforms are unaffected).
    pub fn silent() -> Self {
        NoisePolicy { seed: 0, silent: true }
    }

    pub fn is_silent(&self) -> bool {
        self.silent
    }

    /// An independent policy for a named purpose.
    pub fn derive(&self, tag: u64) -> Self {
        NoisePolicy {
            seed: splitmix64(self.seed ^ splitmix64(tag)),
            silent: self.silent,
        }
    }

    fn block(&self, stream: u32, index: u32, step: u64, block: u16) -> [u32; 4] {
        let ctr = [
            index,
            stream,
            step as u32,
            (((step >> 32) as u32 & 0xFFFF) << 16) | u32::from(block),
        ];
        philox4x32_10(ctr, [self.seed as u32, (self.seed >> 32) as u32])
    }

    /// Two uniforms on `(0, 1]` with 53-bit resolution.
    fn uniform_pair(&self, stream: u32, index: u32, step: u64, block: u16) -> (f64, f64) {
        let r = self.block(stream, index, step, block);
        let a = (u64::from(r[0]) << 32) | u64::from(r[1]);
        let b = (u64::from(r[2]) << 32) | u64::from(r[3]);
        let scale = 1.0 / (1u64 << 53) as f64;
        (((a >> 11) + 1) as f64 * scale, ((b >> 11) + 1) as f64 * scale)
    }

    /// Fills `out` with standard normals for `(stream, index, step)`.
    ///
    /// Ziggurat sampling over the Philox blocks of that key, so the values
    /// depend on the key alone and not on evaluation order.
    pub fn normals(&self, stream: u32, index: u32, step: u64, out: &mut [f64]) {
        if self.silent {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let mut rng = BlockRng {
            policy: self,
            stream,
            index,
            step,
            block: 0,
            buf: [0; 4],
            used: 4,
        };
        for v in out.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }

    /// Fills `out` with uniforms on `(0, 1]`.
    pub fn uniforms(&self, stream: u32, index: u32, step: u64, out: &mut [f64]) {
        for (b, chunk) in out.chunks_mut(2).enumerate() {
            let (u1, u2) = self.uniform_pair(stream, index, step, b as u16);
            chunk[0] = u1;
            if chunk.len() > 1 {
                chunk[1] = u2;
            }
        }
    }

    pub fn uniform(&self, stream: u32, index: u32, step: u64) -> f64 {
        self.uniform_pair(stream, index, step, 0).0
    }
}

/// The Philox blocks of one `(stream, index, step)` key as a word stream.
struct BlockRng<'a> {
    policy: &'a NoisePolicy,
    stream: u32,
    index: u32,
    step: u64,
    block: u16,
    buf: [u32; 4],
    used: usize,
}

impl RngCore for BlockRng<'_> {
    fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            self.buf = self.policy.block(self.stream, self.index, self.step, self.block);
            self.block = self.block.wrapping_add(1);
            self.used = 0;
        }
        self.used += 1;
        self.buf[self.used - 1]
    }

    fn next_u64(&mut self) -> u64 {
        (u64::from(self.next_u32()) << 32) | u64::from(self.next_u32())
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand_core::impls::fill_bytes_via_next(self, dst)
    }
}
