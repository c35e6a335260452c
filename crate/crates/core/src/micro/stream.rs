//! Deterministic randomness.
//!
//! Every variate is a pure function of `(seed, index)`: the normal and the
//! uniform sub-streams are separate ChaCha8 streams keyed by the same seed,
//! and each normal consumes exactly two raw words (Box–Muller, cosine branch).
//! Replaying a seed therefore replays the same noise no matter what the
//! chain does with it.

use std::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

const NORMAL_STREAM: u64 = 0;
const UNIFORM_STREAM: u64 = 1;

/// Word folded into realization seeds so they never coincide with step seeds.
pub const REALIZATION_TAG: u64 = 0x7265_616c_697a_6174; // "realizat"

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Avalanche hash of a word sequence.
pub fn mix(words: &[u64]) -> u64 {
    let mut h = 0x243F_6A88_85A3_08D3_u64 ^ words.len() as u64;
    for &w in words {
        h = splitmix64(h ^ splitmix64(w));
    }
    h
}

/// Per-step seeds of one realization: `ω_n = mix(master, n)` and, for the
/// replicas of an averaged (re)initialization at step `n`,
/// `ω_{n,s} = mix(master, −1 − n, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSchedule {
    pub master_seed: u64,
}

impl SeedSchedule {
    pub fn new(master_seed: u64) -> Self {
        SeedSchedule { master_seed }
    }

    /// Schedule of realization `j` of an ensemble rooted at `master_seed`.
    pub fn for_realization(master_seed: u64, j: u64) -> Self {
        SeedSchedule::new(mix(&[master_seed, REALIZATION_TAG, j]))
    }

    pub fn step(&self, n: u64) -> u64 {
        mix(&[self.master_seed, n])
    }

    pub fn replica(&self, n: u64, s: u64) -> u64 {
        let tag = (-1_i64 - n as i64) as u64;
        mix(&[self.master_seed, tag, s])
    }
}

/// Source of standard normals and uniforms consumed by the micro chains.
pub trait Noise {
    fn next_normal(&mut self) -> f64;
    fn next_uniform(&mut self) -> f64;
}

/// Counter-based Gaussian stream with a separate uniform sub-stream.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    seed: u64,
    normals: ChaCha8Rng,
    uniforms: ChaCha8Rng,
    normal_count: u64,
    uniform_count: u64,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        let mut normals = ChaCha8Rng::seed_from_u64(seed);
        normals.set_stream(NORMAL_STREAM);
        let mut uniforms = ChaCha8Rng::seed_from_u64(seed);
        uniforms.set_stream(UNIFORM_STREAM);
        GaussianStream {
            seed,
            normals,
            uniforms,
            normal_count: 0,
            uniform_count: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of normals drawn so far.
    pub fn normals_consumed(&self) -> u64 {
        self.normal_count
    }

    pub fn uniforms_consumed(&self) -> u64 {
        self.uniform_count
    }
}

#[inline]
fn unit_interval(word: u64) -> f64 {
    // 53 random bits in [0, 1)
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl Noise for GaussianStream {
    fn next_normal(&mut self) -> f64 {
        self.normal_count += 1;
        let u1 = 1.0 - unit_interval(self.normals.next_u64()); // (0, 1]
        let u2 = unit_interval(self.normals.next_u64());
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    fn next_uniform(&mut self) -> f64 {
        self.uniform_count += 1;
        unit_interval(self.uniforms.next_u64())
    }
}

/// Replays a fixed list of normals; uniforms come from a wrapped stream.
/// Used to drive chains with hand-picked increments.
#[derive(Debug, Clone)]
pub struct ScriptedNoise {
    normals: Vec<f64>,
    uniforms: Vec<f64>,
    next_normal: usize,
    next_uniform: usize,
}

impl ScriptedNoise {
    pub fn new(normals: Vec<f64>, uniforms: Vec<f64>) -> Self {
        ScriptedNoise {
            normals,
            uniforms,
            next_normal: 0,
            next_uniform: 0,
        }
    }
}

impl Noise for ScriptedNoise {
    fn next_normal(&mut self) -> f64 {
        let v = self.normals[self.next_normal % self.normals.len()];
        self.next_normal += 1;
        v
    }

    fn next_uniform(&mut self) -> f64 {
        let v = self.uniforms[self.next_uniform % self.uniforms.len()];
        self.next_uniform += 1;
        v
    }
}
