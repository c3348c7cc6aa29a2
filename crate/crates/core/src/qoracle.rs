//! Classical simulation of the quantum related-key oracles and the
//! Bernstein-Vazirani measurement distribution.
//!
//! A BV run on a Boolean function returns a vector y with probability equal
//! to the squared normalized Walsh coefficient of y; simulating the run at
//! the distribution level is therefore exact, and avoids amplitude-level
//! state vectors entirely. Sampling uses exact cumulative integer weights
//! (the squared unnormalized coefficients, summing to 4^k) against a uniform
//! integer draw, so results are bit-identical across platforms.
//!
//! The oracle seals the hidden key: attack code can query encryptions under
//! masked keys and draw BV samples from derived components, but nothing
//! outside this module reads the key itself.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::boolfn::{BooleanFunction, Frac, VectorFunction};
use crate::cipher::{derived_f, derived_g, BlockCipher};
use crate::gf2::BitVec;
use crate::{Error, Result};

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic pseudorandom stream addressed by a derivation path.
///
/// Streams form a tree: `child(label)` derives an independent stream whose
/// output depends only on the labels from the master seed down, never on how
/// much the parent has been consumed. Experiments derive one child per
/// (trial, purpose, component, sample), which makes parallel execution
/// bit-identical to serial. Not cryptographic.
pub struct RngStream {
    key: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn from_seed(master: u64) -> Self {
        Self::from_key(splitmix64(master ^ 0x42565246)) // "BVRF" domain
    }

    fn from_key(key: u64) -> Self {
        let mut seed = [0u8; 32];
        let mut state = key;
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        RngStream {
            key,
            rng: ChaCha12Rng::from_seed(seed),
        }
    }

    /// Independent child stream; siblings with distinct labels are
    /// decorrelated and unaffected by draws from this stream.
    pub fn child(&self, label: u64) -> RngStream {
        Self::from_key(splitmix64(self.key ^ splitmix64(label ^ 0x5ec7)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random()
    }

    /// Uniform draw in [0, bound).
    pub fn range(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "range: empty bound");
        self.rng.random_range(0..bound)
    }

    /// Uniform bit vector of the given width.
    pub fn bitvec(&mut self, width: u32) -> BitVec {
        let bits = if width == 64 {
            self.next_u64()
        } else {
            self.next_u64() & ((1u64 << width) - 1)
        };
        BitVec::new(width, bits)
    }

    /// Uniform nonzero bit vector (rejection sampled).
    pub fn nonzero_bitvec(&mut self, width: u32) -> BitVec {
        loop {
            let v = self.bitvec(width);
            if !v.is_zero() {
                return v;
            }
        }
    }
}

/// Exact BV measurement distribution of one Boolean function: outcome y has
/// weight `coeff(y)^2` out of 4^k.
#[derive(Clone, Debug)]
pub struct BvDistribution {
    k: u32,
    /// Cumulative squared coefficients; final entry is 4^k.
    cum: Vec<u64>,
}

impl BvDistribution {
    pub fn from_function(f: &BooleanFunction) -> Self {
        let spectrum = f.walsh_spectrum();
        let mut cum = Vec::with_capacity(spectrum.coeffs().len());
        let mut acc = 0u64;
        for &c in spectrum.coeffs() {
            acc += (c * c) as u64;
            cum.push(acc);
        }
        debug_assert_eq!(acc, 1u64 << (2 * f.input_width()), "Parseval violated");
        BvDistribution {
            k: f.input_width(),
            cum,
        }
    }

    pub fn input_width(&self) -> u32 {
        self.k
    }

    fn weight(&self, y: u64) -> u64 {
        let prev = if y == 0 { 0 } else { self.cum[y as usize - 1] };
        self.cum[y as usize] - prev
    }

    /// Exact outcome probabilities, denominators 4^k; they sum to 1.
    pub fn probabilities(&self) -> Vec<Frac> {
        let total = 1u64 << (2 * self.k);
        (0..self.cum.len() as u64)
            .map(|y| Frac::new(self.weight(y), total))
            .collect()
    }

    pub fn in_support(&self, y: &BitVec) -> bool {
        self.weight(y.bits()) != 0
    }

    /// Draws one measurement outcome. Zero-weight outcomes are never
    /// produced, so every sample lies in the spectral support.
    pub fn sample(&self, rng: &mut RngStream) -> BitVec {
        let total = 1u64 << (2 * self.k);
        let u = rng.range(total);
        let y = self.cum.partition_point(|&c| c <= u);
        BitVec::new(self.k, y as u64)
    }
}

/// Exact BV outcome law for `f`; see [`BvDistribution`].
pub fn bv_exact_distribution(f: &BooleanFunction) -> BvDistribution {
    BvDistribution::from_function(f)
}

/// Anything that can serve BV samples per output component.
pub trait BvSource: Sync {
    fn input_width(&self) -> u32;
    fn component_count(&self) -> u32;
    /// One BV run on component j: a spectral-support vector of F_j.
    fn bv_sample(&self, j: u32, rng: &mut RngStream) -> BitVec;
}

/// BV source over a plain truth table (test and analysis path). Counts runs.
pub struct FunctionSource<'a> {
    vf: &'a VectorFunction,
    dists: Vec<OnceLock<BvDistribution>>,
    runs: AtomicU64,
}

impl<'a> FunctionSource<'a> {
    pub fn new(vf: &'a VectorFunction) -> Self {
        FunctionSource {
            vf,
            dists: (0..vf.output_width()).map(|_| OnceLock::new()).collect(),
            runs: AtomicU64::new(0),
        }
    }

    pub fn runs(&self) -> u64 {
        self.runs.load(Ordering::Relaxed)
    }

    fn dist(&self, j: u32) -> &BvDistribution {
        self.dists[j as usize].get_or_init(|| BvDistribution::from_function(&self.vf.component(j)))
    }
}

impl BvSource for FunctionSource<'_> {
    fn input_width(&self) -> u32 {
        self.vf.input_width()
    }

    fn component_count(&self) -> u32 {
        self.vf.output_width()
    }

    fn bv_sample(&self, j: u32, rng: &mut RngStream) -> BitVec {
        self.runs.fetch_add(1, Ordering::Relaxed);
        self.dist(j).sample(rng)
    }
}

/// Query counters of a related-key oracle. Monotone, internally synchronized.
#[derive(Default)]
pub struct OracleCounters {
    related_key: AtomicU64,
    component: AtomicU64,
    target: AtomicU64,
}

/// Point-in-time snapshot of [`OracleCounters`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCounterSnapshot {
    /// Full-block related-key queries (masked-key encryptions).
    pub related_key_queries: u64,
    /// Single-bit related-key queries; one per BV run on a derived component.
    pub component_queries: u64,
    /// Queries to the target-key encryption itself.
    pub target_queries: u64,
}

/// Encryption oracle holding a sealed hidden key.
///
/// A query with mask x returns the encryption under `hidden ^ x`; the bit
/// variant returns one ciphertext bit. The hidden key is private to this
/// module: recovering it through the public surface is the attack's job.
pub struct RelatedKeyOracle {
    cipher: Arc<dyn BlockCipher>,
    hidden_s: BitVec,
    counters: OracleCounters,
}

impl RelatedKeyOracle {
    pub fn new(cipher: Arc<dyn BlockCipher>, hidden_s: BitVec) -> Self {
        assert_eq!(
            hidden_s.width(),
            cipher.key_width(),
            "oracle key width mismatch"
        );
        RelatedKeyOracle {
            cipher,
            hidden_s,
            counters: OracleCounters::default(),
        }
    }

    pub fn key_width(&self) -> u32 {
        self.cipher.key_width()
    }

    pub fn block_width(&self) -> u32 {
        self.cipher.block_width()
    }

    /// The public cipher circuit; the attacker may evaluate it under any key
    /// of their choosing.
    pub fn cipher(&self) -> &Arc<dyn BlockCipher> {
        &self.cipher
    }

    /// E_{hidden ^ x}(m).
    pub fn classical_query(&self, x: BitVec, m: BitVec) -> BitVec {
        self.counters.related_key.fetch_add(1, Ordering::Relaxed);
        self.cipher.encrypt(self.hidden_s.xor(&x), m)
    }

    /// Bit j of E_{hidden ^ x}(m).
    pub fn bit_query(&self, x: BitVec, m: BitVec, j: u32) -> u8 {
        self.counters.component.fetch_add(1, Ordering::Relaxed);
        self.cipher.encrypt(self.hidden_s.xor(&x), m).bit(j)
    }

    /// E_hidden(m): the masked oracle queried with the zero mask.
    pub fn target_query(&self, m: BitVec) -> BitVec {
        self.counters.target.fetch_add(1, Ordering::Relaxed);
        self.cipher.encrypt(self.hidden_s, m)
    }

    pub fn counters(&self) -> OracleCounterSnapshot {
        OracleCounterSnapshot {
            related_key_queries: self.counters.related_key.load(Ordering::Relaxed),
            component_queries: self.counters.component.load(Ordering::Relaxed),
            target_queries: self.counters.target.load(Ordering::Relaxed),
        }
    }

    /// Binds the derived function F(x) = E_x(m) ^ E_{hidden^x}(m) as a BV
    /// source. Each sample charges one component query; the truth table is
    /// materialized once inside the simulation as a shortcut with identical
    /// output law.
    pub fn bind_f(&self, m: BitVec) -> Result<DerivedOracleSource<'_>> {
        DerivedOracleSource::new(self, m, DerivedKind::Periodic)
    }

    /// Binds G(x) = E_{x^hidden}(m) ^ E_x(m) ^ x (square key space only).
    pub fn bind_g(&self, m: BitVec) -> Result<DerivedOracleSource<'_>> {
        if self.key_width() != self.block_width() {
            return Err(Error::InvalidParameter(format!(
                "the G construction needs k = n, got k={}, n={}",
                self.key_width(),
                self.block_width()
            )));
        }
        DerivedOracleSource::new(self, m, DerivedKind::Shifted)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivedKind {
    /// F(x) = E_x(m) ^ E_{s^x}(m).
    Periodic,
    /// G(x) = E_{x^s}(m) ^ E_x(m) ^ x.
    Shifted,
}

/// Oracle-bound derived function serving BV samples per component.
pub struct DerivedOracleSource<'a> {
    oracle: &'a RelatedKeyOracle,
    m: BitVec,
    kind: DerivedKind,
    table: OnceLock<VectorFunction>,
    dists: Vec<OnceLock<BvDistribution>>,
}

impl<'a> DerivedOracleSource<'a> {
    fn new(oracle: &'a RelatedKeyOracle, m: BitVec, kind: DerivedKind) -> Result<Self> {
        let k = oracle.key_width();
        if k > crate::boolfn::MAX_TABLE_WIDTH {
            return Err(Error::TableTooLarge {
                k,
                max: crate::boolfn::MAX_TABLE_WIDTH,
            });
        }
        assert_eq!(m.width(), oracle.block_width(), "plaintext width mismatch");
        Ok(DerivedOracleSource {
            oracle,
            m,
            kind,
            table: OnceLock::new(),
            dists: (0..oracle.block_width()).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn kind(&self) -> DerivedKind {
        self.kind
    }

    pub fn plaintext(&self) -> BitVec {
        self.m
    }

    fn table(&self) -> &VectorFunction {
        self.table.get_or_init(|| {
            let cipher = self.oracle.cipher.as_ref();
            match self.kind {
                DerivedKind::Periodic => derived_f(cipher, self.oracle.hidden_s, self.m),
                DerivedKind::Shifted => derived_g(cipher, self.oracle.hidden_s, self.m),
            }
            .expect("widths validated at bind time")
        })
    }

    /// Truth table of component j, exactly what the sampler draws from.
    /// Simulation introspection: equivalent information is available through
    /// exhaustive bit queries.
    pub fn component_function(&self, j: u32) -> BooleanFunction {
        self.table().component(j)
    }

    fn dist(&self, j: u32) -> &BvDistribution {
        self.dists[j as usize]
            .get_or_init(|| BvDistribution::from_function(&self.table().component(j)))
    }
}

impl BvSource for DerivedOracleSource<'_> {
    fn input_width(&self) -> u32 {
        self.oracle.key_width()
    }

    fn component_count(&self) -> u32 {
        self.oracle.block_width()
    }

    fn bv_sample(&self, j: u32, rng: &mut RngStream) -> BitVec {
        // One superposition query to the bit oracle per run.
        self.oracle
            .counters
            .component
            .fetch_add(1, Ordering::Relaxed);
        self.dist(j).sample(rng)
    }
}

/// Uniformly random truth table, deterministic in the stream.
pub fn random_boolean_function(k: u32, rng: &mut RngStream) -> Result<BooleanFunction> {
    BooleanFunction::from_fn(k, |_| rng.next_u64() & 1 == 1)
}

/// Uniformly random vector function, deterministic in the stream.
pub fn random_vector_function(k: u32, n: u32, rng: &mut RngStream) -> Result<VectorFunction> {
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    VectorFunction::from_fn(k, n, |_| rng.next_u64() & mask)
}
