//! Truth-table Boolean and vector functions with spectral and structural
//! analysis: Walsh spectra, spectral support, linear structures, sigma-close
//! structures and the worst-case differential bias.
//!
//! All spectral quantities are exact integers. A Walsh coefficient is the
//! unnormalized correlation `sum_x (-1)^(f(x) + w.x)`; dividing by 2^k gives
//! the normalized spectrum. Keeping integers makes the support set exact and
//! every probability an exact rational with denominator a power of two.
//!
//! Truth tables are bit-packed, 64 points per word, and capped at k <= 24
//! (a 2^24-point table with 64-bit spectrum entries is ~128 MB).

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::gf2::{self, BitVec};
use crate::{Error, Result};

/// Hard cap on truth-table input width.
pub const MAX_TABLE_WIDTH: u32 = 24;

/// Exact non-negative rational. Comparisons are value-based (cross
/// multiplication in 128 bits); the representation is never reduced, so a
/// fraction with denominator 2^k stays readable as `count / 2^k`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Frac {
    pub num: u64,
    pub den: u64,
}

impl Frac {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "Frac: zero denominator");
        Frac { num, den }
    }

    pub fn zero() -> Self {
        Frac { num: 0, den: 1 }
    }

    pub fn one() -> Self {
        Frac { num: 1, den: 1 }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Frac {
    fn eq(&self, other: &Self) -> bool {
        self.num as u128 * other.den as u128 == other.num as u128 * self.den as u128
    }
}

impl Eq for Frac {}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frac {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl std::fmt::Display for Frac {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// A Boolean function f: F_2^k -> F_2 as a bit-packed truth table.
/// Bit x of the table is f(x).
#[derive(Clone, PartialEq, Eq)]
pub struct BooleanFunction {
    k: u32,
    table: Vec<u64>,
}

impl BooleanFunction {
    pub fn new(k: u32, table: Vec<u64>) -> Result<Self> {
        check_width(k)?;
        let words = table_words(k);
        if table.len() != words {
            return Err(Error::InvalidParameter(format!(
                "truth table needs {words} words for k={k}, got {}",
                table.len()
            )));
        }
        let mut f = BooleanFunction { k, table };
        f.mask_tail();
        Ok(f)
    }

    pub fn from_fn(k: u32, mut f: impl FnMut(u64) -> bool) -> Result<Self> {
        check_width(k)?;
        let mut table = vec![0u64; table_words(k)];
        for x in 0..domain_size(k) {
            if f(x) {
                table[(x >> 6) as usize] |= 1 << (x & 63);
            }
        }
        Ok(BooleanFunction { k, table })
    }

    /// The linear function x -> <a, x>.
    pub fn linear(a: BitVec) -> Self {
        Self::from_fn(a.width(), |x| (x & a.bits()).count_ones() & 1 == 1)
            .expect("width already validated by BitVec")
    }

    pub fn constant(k: u32, value: bool) -> Result<Self> {
        Self::from_fn(k, |_| value)
    }

    #[inline]
    pub fn input_width(&self) -> u32 {
        self.k
    }

    #[inline]
    pub fn domain_size(&self) -> u64 {
        domain_size(self.k)
    }

    #[inline]
    pub fn eval(&self, x: u64) -> u8 {
        debug_assert!(x < self.domain_size());
        ((self.table[(x >> 6) as usize] >> (x & 63)) & 1) as u8
    }

    pub fn table_words(&self) -> &[u64] {
        &self.table
    }

    fn mask_tail(&mut self) {
        let points = self.domain_size();
        if !points.is_multiple_of(64) {
            let last = self.table.len() - 1;
            self.table[last] &= (1u64 << (points % 64)) - 1;
        }
    }

    /// Exact Walsh spectrum via the fast Walsh-Hadamard transform,
    /// O(k 2^k) word operations.
    pub fn walsh_spectrum(&self) -> WalshSpectrum {
        let mut v: Vec<i64> = (0..self.domain_size())
            .map(|x| 1 - 2 * self.eval(x) as i64)
            .collect();
        fwht_inplace(&mut v);
        WalshSpectrum {
            k: self.k,
            coeffs: v,
        }
    }

    /// Signed autocorrelation `sum_x (-1)^(f(x) + f(x ^ a))` for every shift
    /// a, computed as the transform of the squared spectrum divided by 2^k
    /// (exact). Entry a is 2^k exactly when a is a 0-structure, -2^k for a
    /// 1-structure.
    pub fn autocorrelation(&self) -> Vec<i64> {
        let spectrum = self.walsh_spectrum();
        let mut sq: Vec<i64> = spectrum.coeffs.iter().map(|c| c * c).collect();
        fwht_inplace(&mut sq);
        let scale = self.domain_size() as i64;
        for v in &mut sq {
            debug_assert_eq!(*v % scale, 0);
            *v /= scale;
        }
        sq
    }

    /// Spectral support N_f = { w : spectrum(w) != 0 }, exact.
    pub fn support(&self) -> Vec<BitVec> {
        self.walsh_spectrum().support()
    }

    /// Exact linear structures via the spectral route: solve
    /// `{a . w = i for all w in N_f}` for i = 0, 1.
    pub fn linear_structures(&self) -> StructureSets {
        let support = self.support();
        let eqs0: Vec<gf2::Equation> = support.iter().map(|w| (*w, 0u8)).collect();
        let eqs1: Vec<gf2::Equation> = support.iter().map(|w| (*w, 1u8)).collect();
        let u0 = gf2::solve_affine_system(&eqs0, self.k);
        let u1 = gf2::solve_affine_system(&eqs1, self.k);
        // Structure sets of a k <= 24 function always fit in memory.
        let cap = 1u64 << self.k.max(1);
        StructureSets {
            k: self.k,
            u0: gf2::enumerate_solutions(&u0, cap).map(sorted).unwrap(),
            u1: gf2::enumerate_solutions(&u1, cap).map(sorted).unwrap(),
        }
    }

    /// Exact linear structures by the defining scan: a is an i-structure iff
    /// f(x) ^ f(x ^ a) = i for every x. O(4^k); the spectral route is the
    /// fast path and the two must agree.
    pub fn linear_structures_scan(&self) -> StructureSets {
        let mut u0 = Vec::new();
        let mut u1 = Vec::new();
        'shift: for a in 0..self.domain_size() {
            let first = self.eval(0) ^ self.eval(a);
            for x in 1..self.domain_size() {
                if self.eval(x) ^ self.eval(x ^ a) != first {
                    continue 'shift;
                }
            }
            if first == 0 {
                u0.push(BitVec::new(self.k, a));
            } else {
                u1.push(BitVec::new(self.k, a));
            }
        }
        StructureSets { k: self.k, u0, u1 }
    }

    /// All (a, i, fraction) with `|{x : f(x) ^ f(x^a) = i}| / 2^k > 1 - sigma`,
    /// the fraction exact with denominator 2^k. Requires 0 < sigma <= 1.
    pub fn sigma_close_structures(&self, sigma: Frac) -> Result<Vec<(BitVec, u8, Frac)>> {
        if sigma.num == 0 || sigma > Frac::one() {
            return Err(Error::InvalidParameter(format!(
                "sigma must satisfy 0 < sigma <= 1, got {sigma}"
            )));
        }
        let points = self.domain_size();
        let acorr = self.autocorrelation();
        let mut out = Vec::new();
        for (a, &r) in acorr.iter().enumerate() {
            let count0 = ((points as i64 + r) / 2) as u64;
            for (i, count) in [(0u8, count0), (1u8, points - count0)] {
                // count/2^k > 1 - sigma  <=>  count * den > (den - num) * 2^k
                if count as u128 * sigma.den as u128
                    > (sigma.den - sigma.num) as u128 * points as u128
                {
                    out.push((BitVec::new(self.k, a as u64), i, Frac::new(count, points)));
                }
            }
        }
        Ok(out)
    }

    /// Worst-case differential bias: the largest fraction of inputs on which
    /// some non-structure shift keeps f(x) ^ f(x^a) constant. Zero by
    /// convention when every shift is a structure.
    pub fn delta(&self) -> Frac {
        let points = self.domain_size() as i64;
        let best = self
            .autocorrelation()
            .iter()
            .filter(|r| r.abs() != points)
            .map(|r| r.abs())
            .max();
        match best {
            None => Frac::zero(),
            Some(r) => Frac::new(((points + r) / 2) as u64, points as u64),
        }
    }
}

impl std::fmt::Debug for BooleanFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BooleanFunction(k={})", self.k)
    }
}

/// A vector function F: F_2^k -> F_2^n stored as one output word per input.
/// Output bit j of F(x) is the component function F_j(x).
#[derive(Clone, PartialEq, Eq)]
pub struct VectorFunction {
    k: u32,
    n: u32,
    outputs: Vec<u64>,
}

impl VectorFunction {
    pub fn new(k: u32, n: u32, outputs: Vec<u64>) -> Result<Self> {
        check_width(k)?;
        if n == 0 || n > 64 {
            return Err(Error::InvalidWidth { width: n, max: 64 });
        }
        if outputs.len() as u64 != domain_size(k) {
            return Err(Error::InvalidParameter(format!(
                "output table needs {} entries for k={k}, got {}",
                domain_size(k),
                outputs.len()
            )));
        }
        if n < 64 {
            if let Some(bad) = outputs.iter().find(|y| **y >> n != 0) {
                return Err(Error::ValueOutOfRange {
                    bits: *bad,
                    width: n,
                });
            }
        }
        Ok(VectorFunction { k, n, outputs })
    }

    pub fn from_fn(k: u32, n: u32, f: impl FnMut(u64) -> u64) -> Result<Self> {
        check_width(k)?;
        let outputs: Vec<u64> = (0..domain_size(k)).map(f).collect();
        Self::new(k, n, outputs)
    }

    #[inline]
    pub fn input_width(&self) -> u32 {
        self.k
    }

    #[inline]
    pub fn output_width(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn domain_size(&self) -> u64 {
        domain_size(self.k)
    }

    #[inline]
    pub fn eval(&self, x: u64) -> u64 {
        self.outputs[x as usize]
    }

    pub fn outputs(&self) -> &[u64] {
        &self.outputs
    }

    /// Component F_j (output bit j) as a standalone Boolean function.
    pub fn component(&self, j: u32) -> BooleanFunction {
        assert!(j < self.n, "component {j} out of output width {}", self.n);
        BooleanFunction::from_fn(self.k, |x| (self.outputs[x as usize] >> j) & 1 == 1)
            .expect("component width equals the validated input width")
    }

    /// Linear structures with their output tags: intersects the
    /// per-component structure sets, tagging each survivor with the vector
    /// alpha of per-component constants.
    pub fn linear_structures(&self) -> VectorStructureSets {
        let first = self.component(0).linear_structures();
        let mut candidates: Vec<(BitVec, u64)> = first
            .u0
            .iter()
            .map(|a| (*a, 0u64))
            .chain(first.u1.iter().map(|a| (*a, 1u64)))
            .collect();
        for j in 1..self.n {
            let sets = self.component(j).linear_structures();
            let in0: HashSet<u64> = sets.u0.iter().map(|v| v.bits()).collect();
            let in1: HashSet<u64> = sets.u1.iter().map(|v| v.bits()).collect();
            candidates.retain_mut(|(a, alpha)| {
                if in0.contains(&a.bits()) {
                    true
                } else if in1.contains(&a.bits()) {
                    *alpha |= 1 << j;
                    true
                } else {
                    false
                }
            });
            if candidates.is_empty() {
                break;
            }
        }
        let mut by_alpha: BTreeMap<u64, Vec<BitVec>> = BTreeMap::new();
        for (a, alpha) in candidates {
            by_alpha.entry(alpha).or_default().push(a);
        }
        for list in by_alpha.values_mut() {
            list.sort_unstable_by_key(|v| v.bits());
        }
        VectorStructureSets {
            k: self.k,
            n: self.n,
            by_alpha,
        }
    }

    /// Worst-case differential bias, the maximum over components.
    pub fn delta(&self) -> Frac {
        (0..self.n)
            .map(|j| self.component(j).delta())
            .max()
            .unwrap_or_else(Frac::zero)
    }
}

impl std::fmt::Debug for VectorFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "VectorFunction(k={}, n={})", self.k, self.n)
    }
}

/// Unnormalized Walsh spectrum: entry w is `sum_x (-1)^(f(x) + w.x)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalshSpectrum {
    k: u32,
    coeffs: Vec<i64>,
}

impl WalshSpectrum {
    pub fn input_width(&self) -> u32 {
        self.k
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeff(&self, w: u64) -> i64 {
        self.coeffs[w as usize]
    }

    /// Parseval: the squared coefficients sum to 4^k exactly.
    pub fn parseval_holds(&self) -> bool {
        let sum: u128 = self.coeffs.iter().map(|c| (c * c) as u128).sum();
        sum == (1u128 << (2 * self.k))
    }

    pub fn support(&self) -> Vec<BitVec> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0)
            .map(|(w, _)| BitVec::new(self.k, w as u64))
            .collect()
    }
}

/// The structure sets U^0 and U^1 of a Boolean function, sorted.
/// U^0 is a subspace containing 0; U^1 is empty or a coset of U^0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureSets {
    pub k: u32,
    pub u0: Vec<BitVec>,
    pub u1: Vec<BitVec>,
}

impl StructureSets {
    pub fn contains(&self, a: &BitVec, i: u8) -> bool {
        let list = if i == 0 { &self.u0 } else { &self.u1 };
        list.binary_search_by_key(&a.bits(), |v| v.bits()).is_ok()
    }

    /// Total number of structures |U^0| + |U^1|.
    pub fn len(&self) -> usize {
        self.u0.len() + self.u1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Linear structures of a vector function, grouped by output tag alpha
/// (encoded as an integer with component j at bit j).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorStructureSets {
    pub k: u32,
    pub n: u32,
    pub by_alpha: BTreeMap<u64, Vec<BitVec>>,
}

impl VectorStructureSets {
    pub fn contains(&self, a: &BitVec, alpha: &BitVec) -> bool {
        self.by_alpha
            .get(&alpha.bits())
            .is_some_and(|list| list.binary_search_by_key(&a.bits(), |v| v.bits()).is_ok())
    }

    /// All (a, alpha) pairs, sorted by (a, alpha).
    pub fn pairs(&self) -> Vec<(BitVec, BitVec)> {
        let mut out: Vec<(BitVec, BitVec)> = self
            .by_alpha
            .iter()
            .flat_map(|(alpha, list)| list.iter().map(move |a| (*a, BitVec::new(self.n, *alpha))))
            .collect();
        out.sort_unstable_by_key(|(a, alpha)| (a.bits(), alpha.bits()));
        out
    }

    pub fn total(&self) -> usize {
        self.by_alpha.values().map(Vec::len).sum()
    }
}

/// In-place Walsh-Hadamard butterfly: v[w] <- sum_x v[x] (-1)^(w.x).
/// Applying it twice multiplies the input by len().
pub fn fwht_inplace(v: &mut [i64]) {
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        let mut start = 0;
        while start < n {
            for i in start..start + h {
                let a = v[i];
                let b = v[i + h];
                v[i] = a + b;
                v[i + h] = a - b;
            }
            start += h * 2;
        }
        h *= 2;
    }
}

fn check_width(k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidWidth {
            width: 0,
            max: MAX_TABLE_WIDTH,
        });
    }
    if k > MAX_TABLE_WIDTH {
        return Err(Error::TableTooLarge {
            k,
            max: MAX_TABLE_WIDTH,
        });
    }
    Ok(())
}

#[inline]
fn domain_size(k: u32) -> u64 {
    1u64 << k
}

fn table_words(k: u32) -> usize {
    (domain_size(k) as usize).div_ceil(64)
}

fn sorted(mut v: Vec<BitVec>) -> Vec<BitVec> {
    v.sort_unstable_by_key(|x| x.bits());
    v
}

pub mod io {
    //! Bit-exact truth-table file format.
    //!
    //! A vector function is stored as `{"k": int, "n": int, "table_hex": str}`
    //! where the hex string encodes the outputs F(0), F(1), ... as n-bit
    //! little-endian fields packed contiguously: bit j of F(x) sits at stream
    //! position x*n + j, and stream bit i lives in byte i/8 at bit i%8. Bytes
    //! are hex-encoded lowercase in order.

    use serde::{Deserialize, Serialize};

    use super::VectorFunction;
    use crate::{Error, Result};

    #[derive(Serialize, Deserialize)]
    struct TableFile {
        k: u32,
        n: u32,
        table_hex: String,
    }

    pub fn to_json(vf: &VectorFunction) -> String {
        let n = vf.output_width() as u64;
        let total_bits = vf.domain_size() * n;
        let mut bytes = vec![0u8; (total_bits as usize).div_ceil(8)];
        for (x, &y) in vf.outputs().iter().enumerate() {
            for j in 0..n {
                if (y >> j) & 1 == 1 {
                    let pos = x as u64 * n + j;
                    bytes[(pos / 8) as usize] |= 1 << (pos % 8);
                }
            }
        }
        serde_json::to_string(&TableFile {
            k: vf.input_width(),
            n: vf.output_width(),
            table_hex: hex::encode(bytes),
        })
        .expect("table file serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<VectorFunction> {
        let file: TableFile = serde_json::from_str(text)?;
        let bytes = hex::decode(file.table_hex.trim())
            .map_err(|e| Error::Parse(format!("table_hex: {e}")))?;
        if file.k == 0 || file.k > super::MAX_TABLE_WIDTH {
            return Err(Error::TableTooLarge {
                k: file.k,
                max: super::MAX_TABLE_WIDTH,
            });
        }
        if file.n == 0 || file.n > 64 {
            return Err(Error::InvalidWidth {
                width: file.n,
                max: 64,
            });
        }
        let points = 1u64 << file.k;
        let total_bits = points * file.n as u64;
        if (bytes.len() as u64) < total_bits.div_ceil(8) {
            return Err(Error::Parse(format!(
                "table_hex too short: {} bytes for {} bits",
                bytes.len(),
                total_bits
            )));
        }
        let read_bit = |pos: u64| (bytes[(pos / 8) as usize] >> (pos % 8)) & 1;
        let outputs: Vec<u64> = (0..points)
            .map(|x| {
                (0..file.n as u64)
                    .map(|j| (read_bit(x * file.n as u64 + j) as u64) << j)
                    .sum()
            })
            .collect();
        VectorFunction::new(file.k, file.n, outputs)
    }
}
