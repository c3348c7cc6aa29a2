//! Bit-vector arithmetic over F_2 and affine linear-system machinery.
//!
//! Vectors live in F_2^k for k <= 64 and are packed into a single `u64`:
//! coordinate `j` of a vector is bit `j` of the canonical integer encoding
//! (bit 0 = least significant). Every file format and spectrum index in the
//! crate uses this encoding.
//!
//! Affine systems `{x . w = rhs}` are solved by incremental bit-packed
//! Gaussian elimination. A solution space is stored as one particular
//! solution plus an independent basis of the homogeneous part, so a set of
//! size 2^b costs O(b) words until it is enumerated.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default cap on materializing a solution set: 2^20 elements.
pub const DEFAULT_ENUM_CAP: u64 = 1 << 20;

/// An element of F_2^k, k <= 64. Coordinate `j` is bit `j` of `bits`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitVec {
    width: u32,
    bits: u64,
}

impl BitVec {
    /// Maximum supported width.
    pub const MAX_WIDTH: u32 = 64;

    /// Builds a vector, panicking if `width` is out of 1..=64 or `bits` does
    /// not fit. Use [`BitVec::try_new`] for unvalidated input.
    pub fn new(width: u32, bits: u64) -> Self {
        Self::try_new(width, bits).expect("BitVec::new: invalid width or bits")
    }

    pub fn try_new(width: u32, bits: u64) -> Result<Self> {
        if width == 0 || width > Self::MAX_WIDTH {
            return Err(Error::InvalidWidth {
                width,
                max: Self::MAX_WIDTH,
            });
        }
        if width < 64 && bits >> width != 0 {
            return Err(Error::ValueOutOfRange { bits, width });
        }
        Ok(Self { width, bits })
    }

    pub fn zero(width: u32) -> Self {
        Self::new(width, 0)
    }

    /// Unit vector e_j.
    pub fn unit(width: u32, j: u32) -> Self {
        assert!(j < width, "unit coordinate {j} out of width {width}");
        Self::new(width, 1 << j)
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    /// Coordinate `j` as 0/1.
    #[inline]
    pub fn bit(&self, j: u32) -> u8 {
        assert!(j < self.width, "bit index {j} out of width {}", self.width);
        ((self.bits >> j) & 1) as u8
    }

    /// Coordinatewise sum over F_2. Panics on width mismatch.
    #[inline]
    pub fn xor(&self, other: &BitVec) -> BitVec {
        assert_eq!(self.width, other.width, "xor: width mismatch");
        BitVec {
            width: self.width,
            bits: self.bits ^ other.bits,
        }
    }

    /// Inner product <x, w> over F_2: the parity of the bitwise AND.
    /// Panics on width mismatch.
    #[inline]
    pub fn dot(&self, other: &BitVec) -> u8 {
        assert_eq!(self.width, other.width, "dot: width mismatch");
        ((self.bits & other.bits).count_ones() & 1) as u8
    }

    /// All 2^width vectors in increasing integer order. Caller keeps the
    /// width small; this is a test/oracle convenience.
    pub fn all(width: u32) -> impl Iterator<Item = BitVec> {
        assert!(width <= 24, "exhaustive iteration capped at width 24");
        (0u64..1 << width).map(move |bits| BitVec { width, bits })
    }
}

impl std::fmt::Debug for BitVec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:0width$b}", self.bits, width = self.width as usize)
    }
}

impl std::fmt::Display for BitVec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:0width$b}", self.bits, width = self.width as usize)
    }
}

/// One linear constraint `x . mask = rhs`.
pub type Equation = (BitVec, u8);

/// Solution space of an affine system over F_2^width.
///
/// `particular` is absent exactly when the system is inconsistent. `basis`
/// spans the homogeneous solutions; the vectors are independent and each
/// carries a distinct marker coordinate (its free column), which makes
/// membership tests O(|basis|) word operations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineSolutionSet {
    width: u32,
    particular: Option<BitVec>,
    basis: Vec<BitVec>,
    /// Free column marking each basis vector, ascending.
    free_cols: Vec<u32>,
    /// Output tag attached by the caller (the per-component i_j).
    pub tag: Option<u8>,
}

impl AffineSolutionSet {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn is_consistent(&self) -> bool {
        self.particular.is_some()
    }

    pub fn particular(&self) -> Option<BitVec> {
        self.particular
    }

    pub fn basis(&self) -> &[BitVec] {
        &self.basis
    }

    /// Dimension of the homogeneous solution space.
    pub fn nullity(&self) -> u32 {
        self.basis.len() as u32
    }

    /// Rank of the eliminated system.
    pub fn rank(&self) -> u32 {
        self.width - self.nullity()
    }

    /// Number of solutions: 2^nullity when consistent, 0 otherwise.
    pub fn solution_count(&self) -> u128 {
        if self.is_consistent() {
            1u128 << self.nullity()
        } else {
            0
        }
    }

    /// Inconsistent (empty) set of the given width.
    pub fn empty(width: u32) -> Self {
        AffineSolutionSet {
            width,
            particular: None,
            basis: Vec::new(),
            free_cols: Vec::new(),
            tag: None,
        }
    }

    /// The full space F_2^width.
    pub fn full(width: u32) -> Self {
        solve_affine_system(&[], width)
    }

    /// Membership test: reduces `x - particular` against the basis markers.
    pub fn contains(&self, x: &BitVec) -> bool {
        assert_eq!(x.width(), self.width, "contains: width mismatch");
        let Some(p) = self.particular else {
            return false;
        };
        let mut rem = x.bits() ^ p.bits();
        for (v, &c) in self.basis.iter().zip(&self.free_cols) {
            if (rem >> c) & 1 == 1 {
                rem ^= v.bits();
            }
        }
        rem == 0
    }

    pub fn with_tag(mut self, tag: u8) -> Self {
        self.tag = Some(tag);
        self
    }
}

/// Row of the incremental eliminator: `x . mask = rhs`, pivot = highest set
/// bit of `mask`.
#[derive(Clone, Copy)]
struct Row {
    mask: u64,
    rhs: u8,
}

/// Incremental Gaussian elimination over F_2 with one u64 word per row.
///
/// Rows are kept fully reduced (each pivot column appears in exactly one
/// row), so inserting an equation costs O(k) word operations and the whole
/// system O(p k) for p equations. Duplicate equations reduce to zero and are
/// dropped.
#[derive(Clone)]
pub struct Eliminator {
    width: u32,
    /// Reduced rows indexed by pivot column; `None` = no pivot there.
    rows: Vec<Option<Row>>,
    inconsistent: bool,
    /// Count of row-XOR reduction steps, for the cost ledger.
    ops: u64,
}

impl Eliminator {
    pub fn new(width: u32) -> Self {
        assert!(
            (1..=BitVec::MAX_WIDTH).contains(&width),
            "eliminator width out of range"
        );
        Eliminator {
            width,
            rows: vec![None; width as usize],
            inconsistent: false,
            ops: 0,
        }
    }

    pub fn is_inconsistent(&self) -> bool {
        self.inconsistent
    }

    pub fn rank(&self) -> u32 {
        self.rows.iter().flatten().count() as u32
    }

    pub fn ops(&self) -> u64 {
        self.ops
    }

    /// Inserts `x . mask = rhs`, reducing it against the current rows and, if
    /// a new pivot appears, back-substituting it into the rest.
    ///
    /// Invariant: every stored row's mask consists of its pivot column plus
    /// free columns only, so reducing a row means clearing every pivot
    /// column it touches.
    pub fn insert(&mut self, mask: &BitVec, rhs: u8) {
        assert_eq!(mask.width(), self.width, "insert: width mismatch");
        let mut row = Row {
            mask: mask.bits(),
            rhs: rhs & 1,
        };
        // Clear every pivot column present in the row. Each reduction
        // toggles free columns only, so one pass over the set bits (redone
        // from the top after each hit) terminates.
        let mut scan = row.mask;
        while scan != 0 {
            let col = 63 - scan.leading_zeros();
            if let Some(existing) = self.rows[col as usize] {
                row.mask ^= existing.mask;
                row.rhs ^= existing.rhs;
                self.ops += 1;
                scan = row.mask;
            } else {
                scan &= !(1 << col);
            }
        }
        if row.mask == 0 {
            if row.rhs == 1 {
                self.inconsistent = true;
            }
            return;
        }
        // New pivot: eliminate its column from every other row.
        let pivot = 63 - row.mask.leading_zeros();
        for other in self.rows.iter_mut().flatten() {
            if (other.mask >> pivot) & 1 == 1 {
                other.mask ^= row.mask;
                other.rhs ^= row.rhs;
                self.ops += 1;
            }
        }
        self.rows[pivot as usize] = Some(row);
    }

    /// Extracts the solution space.
    ///
    /// Basis vectors are emitted per free column in ascending order: the
    /// vector for free column `c` has coordinate `c` set plus the pivot
    /// coordinates of every row whose mask contains `c`.
    pub fn solution_set(&self) -> AffineSolutionSet {
        if self.inconsistent {
            return AffineSolutionSet::empty(self.width);
        }
        let mut particular = 0u64;
        for (pivot, row) in self.rows.iter().enumerate() {
            if let Some(r) = row {
                if r.rhs == 1 {
                    particular |= 1 << pivot;
                }
            }
        }
        let mut basis = Vec::new();
        let mut free_cols = Vec::new();
        for c in 0..self.width {
            if self.rows[c as usize].is_some() {
                continue;
            }
            let mut v = 1u64 << c;
            for (pivot, row) in self.rows.iter().enumerate() {
                if let Some(r) = row {
                    if (r.mask >> c) & 1 == 1 {
                        v |= 1 << pivot;
                    }
                }
            }
            basis.push(BitVec::new(self.width, v));
            free_cols.push(c);
        }
        AffineSolutionSet {
            width: self.width,
            particular: Some(BitVec::new(self.width, particular)),
            basis,
            free_cols,
            tag: None,
        }
    }
}

/// Solves `{x . w = rhs | (w, rhs) in equations}` over F_2^width.
///
/// Duplicate equations are permitted and harmless. Cost is O(p k) word
/// operations for p equations.
pub fn solve_affine_system(equations: &[Equation], width: u32) -> AffineSolutionSet {
    solve_affine_system_counted(equations, width).0
}

/// As [`solve_affine_system`], also returning the number of row-reduction
/// steps performed (for the cost ledger).
pub fn solve_affine_system_counted(equations: &[Equation], width: u32) -> (AffineSolutionSet, u64) {
    let mut elim = Eliminator::new(width);
    for (mask, rhs) in equations {
        elim.insert(mask, *rhs);
    }
    (elim.solution_set(), elim.ops())
}

/// Materializes every solution of `set`, in Gray-code order starting from the
/// particular solution (element i differs from element i-1 by the basis
/// vector indexed by the lowest set bit of i). The elements are distinct by
/// construction. An inconsistent set yields an empty list.
///
/// Fails with [`Error::EnumerationCap`] when 2^nullity exceeds `cap`.
pub fn enumerate_solutions(set: &AffineSolutionSet, cap: u64) -> Result<Vec<BitVec>> {
    let Some(p) = set.particular() else {
        return Ok(Vec::new());
    };
    let b = set.nullity();
    if b >= 64 || (1u64 << b) > cap {
        return Err(Error::EnumerationCap { nullity: b, cap });
    }
    let count = 1u64 << b;
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = p;
    out.push(cur);
    for i in 1..count {
        cur = cur.xor(&set.basis()[i.trailing_zeros() as usize]);
        out.push(cur);
    }
    Ok(out)
}

/// A pair of tagged solution sets for one output component: the solutions of
/// the rhs=0 and rhs=1 systems over the same sampled masks.
#[derive(Clone, Debug)]
pub struct TaggedFamily {
    pub zero: AffineSolutionSet,
    pub one: AffineSolutionSet,
}

/// Work counters for an intersection pass.
#[derive(Clone, Copy, Debug, Default)]
pub struct IntersectStats {
    /// Elements enumerated and hashed across all families.
    pub elements_processed: u64,
}

/// Tagged n-way intersection: returns every `(a, tags)` with
/// `a` in `family[j].{tag_j}` for all j, where coordinate j of `tags` is the
/// tag chosen for family j.
///
/// Implemented as a single hashed n-way intersection over the enumerated
/// sets; the per-family tag of a vector is tracked as it is joined, so no
/// per-tag-combination pass is ever needed. When a vector satisfies both of
/// a family's systems (possible only for degenerate sampled systems), both
/// tag tuples are emitted.
///
/// The result is sorted by `(a, tags)`.
pub fn intersect_tagged(families: &[TaggedFamily], cap: u64) -> Result<Vec<(BitVec, BitVec)>> {
    intersect_tagged_counted(families, cap).map(|(v, _)| v)
}

pub fn intersect_tagged_counted(
    families: &[TaggedFamily],
    cap: u64,
) -> Result<(Vec<(BitVec, BitVec)>, IntersectStats)> {
    assert!(!families.is_empty(), "intersect_tagged: no families");
    let width = families[0].zero.width();
    let n = families.len() as u32;
    assert!(n <= 64, "intersect_tagged: more than 64 components");
    let mut stats = IntersectStats::default();

    // Per family: vector -> bitmask of admissible tags (bit0 = tag 0).
    let mut maps: Vec<HashMap<u64, u8>> = Vec::with_capacity(families.len());
    for fam in families {
        assert_eq!(fam.zero.width(), width, "intersect_tagged: width mismatch");
        assert_eq!(fam.one.width(), width, "intersect_tagged: width mismatch");
        let mut map = HashMap::new();
        for (set, tag_bit) in [(&fam.zero, 1u8), (&fam.one, 2u8)] {
            for v in enumerate_solutions(set, cap)? {
                *map.entry(v.bits()).or_insert(0) |= tag_bit;
                stats.elements_processed += 1;
            }
        }
        maps.push(map);
    }

    // Drive the join from the smallest family.
    let smallest = maps
        .iter()
        .enumerate()
        .min_by_key(|(_, m)| m.len())
        .map(|(i, _)| i)
        .unwrap();

    let mut out = Vec::new();
    'candidates: for &a_bits in maps[smallest].keys() {
        let mut tag_options: Vec<u8> = Vec::with_capacity(maps.len());
        for map in &maps {
            match map.get(&a_bits) {
                Some(&mask) => tag_options.push(mask),
                None => continue 'candidates,
            }
        }
        let a = BitVec::new(width, a_bits);
        // Expand tag choices; almost always exactly one per family.
        let mut tags = vec![0u64];
        for (j, &mask) in tag_options.iter().enumerate() {
            match mask {
                1 => {}
                2 => tags.iter_mut().for_each(|t| *t |= 1 << j),
                3 => {
                    let with_one: Vec<u64> = tags.iter().map(|t| t | 1 << j).collect();
                    tags.extend(with_one);
                }
                _ => unreachable!("empty tag mask survived the join"),
            }
        }
        for t in tags {
            out.push((a, BitVec::new(n, t)));
        }
    }
    out.sort_unstable_by_key(|(a, t)| (a.bits(), t.bits()));
    Ok((out, stats))
}

/// Plain hashed intersection of enumerated solution sets (no tags).
/// The result is sorted.
pub fn intersect_all(sets: &[&AffineSolutionSet], cap: u64) -> Result<Vec<BitVec>> {
    intersect_all_counted(sets, cap).map(|(v, _)| v)
}

pub fn intersect_all_counted(
    sets: &[&AffineSolutionSet],
    cap: u64,
) -> Result<(Vec<BitVec>, IntersectStats)> {
    assert!(!sets.is_empty(), "intersect_all: no sets");
    let mut stats = IntersectStats::default();
    let mut enumerated: Vec<Vec<BitVec>> = Vec::with_capacity(sets.len());
    for set in sets {
        let e = enumerate_solutions(set, cap)?;
        stats.elements_processed += e.len() as u64;
        enumerated.push(e);
    }
    enumerated.sort_by_key(|e| e.len());
    let mut current: Vec<BitVec> = enumerated[0].clone();
    for other in &enumerated[1..] {
        let lookup: std::collections::HashSet<u64> = other.iter().map(|v| v.bits()).collect();
        stats.elements_processed += other.len() as u64;
        current.retain(|v| lookup.contains(&v.bits()));
        if current.is_empty() {
            break;
        }
    }
    current.sort_unstable_by_key(|v| v.bits());
    Ok((current, stats))
}

/// Intersection of affine subspaces without enumeration: each coset is
/// converted back to a stacked equation system (the orthogonal complement of
/// its homogeneous part, with right-hand sides read off the particular
/// solution) and the union of all systems is solved once.
///
/// This is the cheap path when every family is a single consistent coset; it
/// costs O(k^3) words independent of the coset sizes.
pub fn intersect_cosets(sets: &[&AffineSolutionSet]) -> AffineSolutionSet {
    assert!(!sets.is_empty(), "intersect_cosets: no sets");
    let width = sets[0].width();
    let mut elim = Eliminator::new(width);
    for set in sets {
        assert_eq!(set.width(), width, "intersect_cosets: width mismatch");
        let Some(p) = set.particular() else {
            return AffineSolutionSet::empty(width);
        };
        // Orthogonal complement of span(basis): all w with b . w = 0.
        let homogeneous: Vec<Equation> = set.basis().iter().map(|b| (*b, 0u8)).collect();
        let complement = solve_affine_system(&homogeneous, width);
        for w in complement.basis() {
            elim.insert(w, w.dot(&p));
            if elim.is_inconsistent() {
                return AffineSolutionSet::empty(width);
            }
        }
    }
    elim.solution_set()
}
