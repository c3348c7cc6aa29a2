//! Toy block-cipher families and the derived attack functions.
//!
//! Every cipher is a keyed permutation family: for each fixed key the
//! encryption map is a bijection on F_2^n. The gate cost attached to a cipher
//! is a configured symbolic weight (the gate count of a reversible circuit
//! for the cipher), used only by the cost model; nothing here synthesizes
//! circuits.
//!
//! The derived functions are the attack surfaces:
//!
//! * `derived_f(E, s, m)(x) = E_x(m) ^ E_{s^x}(m)` — has the key `s` as a
//!   period, so `s` is a 0-tagged linear structure.
//! * `derived_g(E, s, m)(x) = E_{x^s}(m) ^ E_x(m) ^ x` (square key space
//!   only) — satisfies `G(x^s) ^ G(x) = s`, so `s` is an `s`-tagged linear
//!   structure.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::boolfn::VectorFunction;
use crate::gf2::BitVec;
use crate::qoracle::RngStream;
use crate::{Error, Result};

/// Default symbolic gate cost when a catalog entry does not configure one.
pub const DEFAULT_GATE_COST: u64 = 1000;

/// The PRESENT S-box, the default nonlinear layer for the SPN family.
pub const PRESENT_SBOX: [u8; 16] = [
    0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD, 0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2,
];

/// The identity S-box; with the permutation layer disabled it turns the SPN
/// into the linear reference cipher E_x(m) = m ^ x at one round.
pub const IDENTITY_SBOX: [u8; 16] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15];

/// A keyed permutation family with key width k and block width n.
///
/// `encrypt` must be a deterministic, stateless bijection of the block for
/// every fixed key.
pub trait BlockCipher: Send + Sync {
    fn key_width(&self) -> u32;
    fn block_width(&self) -> u32;
    /// Symbolic universal-gate count of one encryption circuit.
    fn gate_cost(&self) -> u64;
    fn encrypt(&self, key: BitVec, m: BitVec) -> BitVec;
    fn family(&self) -> &'static str;
}

/// One-round Even-Mansour over a seeded public permutation:
/// `E_x(m) = P(m ^ x) ^ x`, with k = n.
pub struct ToyEvenMansour {
    n: u32,
    perm: Vec<u32>,
    gate_cost: u64,
}

impl ToyEvenMansour {
    /// Builds the public permutation by a seeded Fisher-Yates shuffle.
    pub fn new(n: u32, seed: u64) -> Result<Self> {
        check_block_width(n)?;
        let mut perm: Vec<u32> = (0..1u32 << n).collect();
        let mut rng = RngStream::from_seed(seed).child(0x454d); // "EM"
                                                                // Fisher-Yates, descending.
        for i in (1..perm.len()).rev() {
            let j = rng.range(i as u64 + 1) as usize;
            perm.swap(i, j);
        }
        Ok(ToyEvenMansour {
            n,
            perm,
            gate_cost: DEFAULT_GATE_COST,
        })
    }

    /// Wraps an explicit permutation table (used for pathological cases such
    /// as the identity permutation, under which every key is equivalent).
    pub fn from_permutation(perm: Vec<u32>) -> Result<Self> {
        let n = perm.len().trailing_zeros();
        if perm.len() < 2 || !perm.len().is_power_of_two() {
            return Err(Error::InvalidParameter(
                "permutation length must be a power of two >= 2".into(),
            ));
        }
        check_block_width(n)?;
        let mut seen = vec![false; perm.len()];
        for &v in &perm {
            if v as usize >= perm.len() || seen[v as usize] {
                return Err(Error::InvalidParameter("table is not a permutation".into()));
            }
            seen[v as usize] = true;
        }
        Ok(ToyEvenMansour {
            n,
            perm,
            gate_cost: DEFAULT_GATE_COST,
        })
    }

    pub fn identity(n: u32) -> Result<Self> {
        Self::from_permutation((0..1u32 << n).collect())
    }

    pub fn with_gate_cost(mut self, gate_cost: u64) -> Self {
        self.gate_cost = gate_cost;
        self
    }

    pub fn public_permutation(&self, x: u64) -> u64 {
        self.perm[x as usize] as u64
    }
}

impl BlockCipher for ToyEvenMansour {
    fn key_width(&self) -> u32 {
        self.n
    }

    fn block_width(&self) -> u32 {
        self.n
    }

    fn gate_cost(&self) -> u64 {
        self.gate_cost
    }

    fn encrypt(&self, key: BitVec, m: BitVec) -> BitVec {
        check_io(self, &key, &m);
        let inner = m.bits() ^ key.bits();
        BitVec::new(self.n, self.perm[inner as usize] as u64 ^ key.bits())
    }

    fn family(&self) -> &'static str {
        "toy_em"
    }
}

/// Small substitution-permutation network with k = n and a rotation key
/// schedule: round r mixes `rotl(key, r)`, applies the 4-bit S-box to every
/// nibble, then (unless disabled) transposes bit i to `(i % 4) * n/4 + i/4`.
/// There is no final whitening, so one identity-S-box round with the
/// permutation layer disabled degenerates to E_x(m) = m ^ x.
pub struct ToySpn {
    n: u32,
    rounds: u32,
    sbox: [u8; 16],
    permute: bool,
    gate_cost: u64,
}

impl ToySpn {
    pub fn new(rounds: u32, sbox: [u8; 16], n: u32, permute: bool) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(4) || n > 64 {
            return Err(Error::InvalidParameter(format!(
                "SPN block width must be a positive multiple of 4 up to 64, got {n}"
            )));
        }
        if rounds == 0 {
            return Err(Error::InvalidParameter(
                "SPN needs at least one round".into(),
            ));
        }
        let mut seen = [false; 16];
        for &v in &sbox {
            if v >= 16 || seen[v as usize] {
                return Err(Error::NonBijectiveSbox);
            }
            seen[v as usize] = true;
        }
        Ok(ToySpn {
            n,
            rounds,
            sbox,
            permute,
            // Per-round estimate: one reversible S-box pass plus key mix.
            gate_cost: 40 * (n as u64 / 4) * rounds as u64,
        })
    }

    pub fn with_gate_cost(mut self, gate_cost: u64) -> Self {
        self.gate_cost = gate_cost;
        self
    }

    fn sbox_layer(&self, state: u64) -> u64 {
        let mut out = 0u64;
        for nib in 0..self.n / 4 {
            let v = (state >> (4 * nib)) & 0xf;
            out |= (self.sbox[v as usize] as u64) << (4 * nib);
        }
        out
    }

    fn perm_layer(&self, state: u64) -> u64 {
        let cols = self.n / 4;
        let mut out = 0u64;
        for i in 0..self.n {
            if (state >> i) & 1 == 1 {
                out |= 1 << ((i % 4) * cols + i / 4);
            }
        }
        out
    }

    fn rotl_key(&self, key: u64, r: u32) -> u64 {
        let r = r % self.n;
        if r == 0 {
            return key;
        }
        let mask = block_mask(self.n);
        ((key << r) | (key >> (self.n - r))) & mask
    }
}

impl BlockCipher for ToySpn {
    fn key_width(&self) -> u32 {
        self.n
    }

    fn block_width(&self) -> u32 {
        self.n
    }

    fn gate_cost(&self) -> u64 {
        self.gate_cost
    }

    fn encrypt(&self, key: BitVec, m: BitVec) -> BitVec {
        check_io(self, &key, &m);
        let mut state = m.bits();
        for r in 0..self.rounds {
            state ^= self.rotl_key(key.bits(), r);
            state = self.sbox_layer(state);
            if self.permute {
                state = self.perm_layer(state);
            }
        }
        BitVec::new(self.n, state)
    }

    fn family(&self) -> &'static str {
        "toy_spn"
    }
}

/// Ideal-cipher baseline: an independent seeded random permutation per key,
/// lazily materialized and cached. Deterministic in (seed, key).
pub struct RandomCipher {
    k: u32,
    n: u32,
    seed: u64,
    gate_cost: u64,
    cache: RwLock<HashMap<u64, Arc<Vec<u32>>>>,
}

/// Memory cap for the per-key permutation tables.
pub const RANDOM_CIPHER_MAX_WIDTH: u32 = 12;

impl RandomCipher {
    pub fn new(k: u32, n: u32, seed: u64) -> Result<Self> {
        for (label, w) in [("key", k), ("block", n)] {
            if w == 0 || w > RANDOM_CIPHER_MAX_WIDTH {
                return Err(Error::InvalidParameter(format!(
                    "random cipher {label} width must be 1..={RANDOM_CIPHER_MAX_WIDTH}, got {w}"
                )));
            }
        }
        Ok(RandomCipher {
            k,
            n,
            seed,
            gate_cost: DEFAULT_GATE_COST,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn with_gate_cost(mut self, gate_cost: u64) -> Self {
        self.gate_cost = gate_cost;
        self
    }

    fn permutation_for(&self, key: u64) -> Arc<Vec<u32>> {
        if let Some(p) = self.cache.read().expect("cache poisoned").get(&key) {
            return p.clone();
        }
        let mut perm: Vec<u32> = (0..1u32 << self.n).collect();
        let mut rng = RngStream::from_seed(self.seed).child(0x5250).child(key); // "RP"
        for i in (1..perm.len()).rev() {
            let j = rng.range(i as u64 + 1) as usize;
            perm.swap(i, j);
        }
        let arc = Arc::new(perm);
        // A racing builder inserts an identical table; either copy is fine.
        self.cache
            .write()
            .expect("cache poisoned")
            .entry(key)
            .or_insert_with(|| arc.clone())
            .clone()
    }
}

impl BlockCipher for RandomCipher {
    fn key_width(&self) -> u32 {
        self.k
    }

    fn block_width(&self) -> u32 {
        self.n
    }

    fn gate_cost(&self) -> u64 {
        self.gate_cost
    }

    fn encrypt(&self, key: BitVec, m: BitVec) -> BitVec {
        check_io(self, &key, &m);
        let perm = self.permutation_for(key.bits());
        BitVec::new(self.n, perm[m.bits() as usize] as u64)
    }

    fn family(&self) -> &'static str {
        "random"
    }
}

/// Catalog entry: every experiment cipher is reconstructible from this
/// serialized description.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CipherSpec {
    ToyEm {
        n: u32,
        #[serde(default)]
        seed: u64,
        /// Replace the seeded permutation by the identity (every key becomes
        /// equivalent; pathological verification test bed).
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        identity_perm: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gate_cost: Option<u64>,
    },
    ToySpn {
        n: u32,
        rounds: u32,
        /// 16 hex digits, position i = S(i); defaults to the PRESENT S-box.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sbox_hex: Option<String>,
        /// Permutation layer switch, on by default.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        permute: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gate_cost: Option<u64>,
    },
    Random {
        k: u32,
        n: u32,
        #[serde(default)]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gate_cost: Option<u64>,
    },
}

impl CipherSpec {
    pub fn build(&self) -> Result<Arc<dyn BlockCipher>> {
        match self {
            CipherSpec::ToyEm {
                n,
                seed,
                identity_perm,
                gate_cost,
            } => {
                let base = if *identity_perm {
                    ToyEvenMansour::identity(*n)?
                } else {
                    ToyEvenMansour::new(*n, *seed)?
                };
                Ok(Arc::new(
                    base.with_gate_cost(gate_cost.unwrap_or(DEFAULT_GATE_COST)),
                ))
            }
            CipherSpec::ToySpn {
                n,
                rounds,
                sbox_hex,
                permute,
                gate_cost,
            } => {
                let sbox = match sbox_hex {
                    None => PRESENT_SBOX,
                    Some(text) => parse_sbox_hex(text)?,
                };
                let mut spn = ToySpn::new(*rounds, sbox, *n, permute.unwrap_or(true))?;
                if let Some(gc) = gate_cost {
                    spn = spn.with_gate_cost(*gc);
                }
                Ok(Arc::new(spn))
            }
            CipherSpec::Random {
                k,
                n,
                seed,
                gate_cost,
            } => Ok(Arc::new(
                RandomCipher::new(*k, *n, *seed)?
                    .with_gate_cost(gate_cost.unwrap_or(DEFAULT_GATE_COST)),
            )),
        }
    }
}

/// Parses "c56b90ad3ef84712"-style S-box descriptions.
pub fn parse_sbox_hex(text: &str) -> Result<[u8; 16]> {
    let text = text.trim();
    if text.len() != 16 {
        return Err(Error::Parse(format!(
            "S-box needs exactly 16 hex digits, got {}",
            text.len()
        )));
    }
    let mut sbox = [0u8; 16];
    for (i, c) in text.chars().enumerate() {
        sbox[i] = c
            .to_digit(16)
            .ok_or_else(|| Error::Parse(format!("bad hex digit {c:?} in S-box")))?
            as u8;
    }
    Ok(sbox)
}

/// The derived function F(x) = E_x(m) ^ E_{x^s}(m), materialized as a full
/// truth table over the key space. F(x ^ s) = F(x) for every x, so both 0
/// and s are 0-tagged linear structures.
pub fn derived_f(cipher: &dyn BlockCipher, s: BitVec, m: BitVec) -> Result<VectorFunction> {
    let k = cipher.key_width();
    assert_eq!(s.width(), k, "derived_f: key width mismatch");
    assert_eq!(
        m.width(),
        cipher.block_width(),
        "derived_f: block width mismatch"
    );
    if k > crate::boolfn::MAX_TABLE_WIDTH {
        return Err(Error::TableTooLarge {
            k,
            max: crate::boolfn::MAX_TABLE_WIDTH,
        });
    }
    VectorFunction::from_fn(k, cipher.block_width(), |x| {
        let xv = BitVec::new(k, x);
        cipher.encrypt(xv, m).bits() ^ cipher.encrypt(xv.xor(&s), m).bits()
    })
}

/// The shifted variant G(x) = E_{x^s}(m) ^ E_x(m) ^ x, defined only for
/// square key spaces (k = n). G(x ^ s) ^ G(x) = s for every x.
pub fn derived_g(cipher: &dyn BlockCipher, s: BitVec, m: BitVec) -> Result<VectorFunction> {
    let k = cipher.key_width();
    let n = cipher.block_width();
    if k != n {
        return Err(Error::InvalidParameter(format!(
            "the G construction needs k = n, got k={k}, n={n}"
        )));
    }
    let f = derived_f(cipher, s, m)?;
    VectorFunction::from_fn(k, n, |x| f.eval(x) ^ x)
}

fn check_block_width(n: u32) -> Result<()> {
    if n == 0 || n > crate::boolfn::MAX_TABLE_WIDTH {
        return Err(Error::InvalidParameter(format!(
            "block width must be 1..={}, got {n}",
            crate::boolfn::MAX_TABLE_WIDTH
        )));
    }
    Ok(())
}

fn check_io(cipher: &dyn BlockCipher, key: &BitVec, m: &BitVec) {
    assert_eq!(
        key.width(),
        cipher.key_width(),
        "encrypt: key width mismatch"
    );
    assert_eq!(
        m.width(),
        cipher.block_width(),
        "encrypt: block width mismatch"
    );
}

fn block_mask(n: u32) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Exhaustive bijectivity check, for tests and catalog validation (n <= 16).
pub fn is_permutation_for_key(cipher: &dyn BlockCipher, key: BitVec) -> bool {
    let n = cipher.block_width();
    assert!(n <= 16, "exhaustive permutation check capped at n = 16");
    let mut seen = vec![false; 1 << n];
    for m in 0..1u64 << n {
        let c = cipher.encrypt(key, BitVec::new(n, m)).bits() as usize;
        if seen[c] {
            return false;
        }
        seen[c] = true;
    }
    true
}
