//! Structure search and key recovery.
//!
//! `find_struct` samples BV outcomes per output component, solves the tagged
//! affine systems over the sampled masks and intersects the solution sets
//! once, tags attached. Every true linear structure of the target function
//! survives into the output set by construction (sampled masks lie in the
//! spectral support, and a structure satisfies every support equation), so
//! misses are impossible; the interesting question is how fast false
//! positives die off as the sample count grows.
//!
//! `recover_key` runs the same machinery on the derived periodic function of
//! a related-key oracle, solving only the rhs=0 systems, then verifies the
//! surviving candidates against the target-key oracle on fresh random
//! plaintexts.

use serde::{Deserialize, Serialize};

use crate::boolfn::Frac;
use crate::cipher::{derived_f, BlockCipher};
use crate::costmodel::{CostLedger, CostSnapshot};
use crate::gf2::{self, AffineSolutionSet, BitVec, TaggedFamily};
use crate::qoracle::{BvSource, OracleCounterSnapshot, RelatedKeyOracle, RngStream};
use crate::{Error, Result};

/// Width cap for the exhaustive bias and closeness diagnostics.
pub const DIAGNOSTIC_MAX_K: u32 = 12;

/// Candidate lists longer than this are truncated in reports.
pub const REPORT_LIST_LIMIT: usize = 512;

/// Tunable attack parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AttackConfig {
    /// BV runs per component (the sample budget p).
    pub samples_per_component: u32,
    /// Closeness parameter l; sigma = 1/l in closeness diagnostics.
    pub closeness_l: Option<u32>,
    /// Assumed bias constant for soundness-rate bookkeeping.
    pub p0: Option<f64>,
    /// Slack used when evaluating the closeness bound.
    pub epsilon: f64,
    /// Verification plaintexts; defaults to ceil((k+40)/n), which drives the
    /// wrong-key survival chance below 2^-40 under a random-permutation
    /// heuristic.
    pub verify_plaintexts: Option<u32>,
    /// Cap on materializing any per-component solution set.
    pub enum_cap: u64,
    /// How many times key recovery may double p after hitting the cap.
    pub retry_limit: u32,
}

impl AttackConfig {
    pub fn new(samples_per_component: u32) -> Self {
        AttackConfig {
            samples_per_component,
            closeness_l: None,
            p0: None,
            epsilon: 0.125,
            verify_plaintexts: None,
            enum_cap: gf2::DEFAULT_ENUM_CAP,
            retry_limit: 4,
        }
    }

    /// Bounded-bias preset: p = 4n.
    pub fn linear_samples(n: u32) -> Self {
        AttackConfig::new(4 * n)
    }

    /// Closeness preset: p = n l^2, epsilon = 1/l.
    pub fn closeness_samples(n: u32, l: u32) -> Self {
        let mut cfg = AttackConfig::new(n * l * l);
        cfg.closeness_l = Some(l);
        cfg.epsilon = 1.0 / l as f64;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_component == 0 {
            return Err(Error::InvalidParameter("p must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if let Some(p0) = self.p0 {
            if !(p0 > 0.0 && p0 < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "p0 must lie in (0, 1), got {p0}"
                )));
            }
        }
        if let Some(l) = self.closeness_l {
            if l == 0 {
                return Err(Error::InvalidParameter("l must be at least 1".into()));
            }
        }
        if self.enum_cap == 0 {
            return Err(Error::InvalidParameter(
                "enumeration cap must be positive".into(),
            ));
        }
        if let Some(r) = self.verify_plaintexts {
            if r == 0 {
                return Err(Error::InvalidParameter(
                    "verification needs at least one plaintext".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn effective_verify_plaintexts(&self, k: u32, n: u32) -> u32 {
        self.verify_plaintexts
            .unwrap_or((k + 40).div_ceil(n).max(1))
    }
}

/// Per-component statistics of one structure search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentReport {
    pub samples: u32,
    pub distinct_masks: u32,
    /// Rank of the homogeneous system over the sampled masks.
    pub rank: u32,
    /// |A_j^0| (the rhs=0 coset; always consistent).
    pub size_zero: u64,
    /// |A_j^1|; zero when that system is inconsistent.
    pub size_one: u64,
}

/// Output of the tagged structure search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructResult {
    pub input_width: u32,
    pub component_count: u32,
    pub samples_per_component: u32,
    /// The tagged set A, sorted by (vector, tag).
    pub pairs: Vec<(BitVec, BitVec)>,
    pub components: Vec<ComponentReport>,
    /// max_j |A_j^0 u A_j^1| over the enumerated sets.
    pub t: u64,
}

impl StructResult {
    pub fn contains(&self, a: &BitVec, tag: &BitVec) -> bool {
        self.pairs
            .binary_search_by_key(&(a.bits(), tag.bits()), |(x, t)| (x.bits(), t.bits()))
            .is_ok()
    }
}

/// Samples W_j for components `j` over sample indices `[from, to)`, charging
/// the ledger one BV run each. Stream path: root -> component j -> sample i.
fn extend_samples(
    src: &dyn BvSource,
    sampling_root: &RngStream,
    w: &mut [Vec<BitVec>],
    from: u32,
    to: u32,
    ledger: &CostLedger,
) {
    let k = src.input_width();
    for (j, w_j) in w.iter_mut().enumerate() {
        let comp_stream = sampling_root.child(j as u64);
        for i in from..to {
            let mut sample_stream = comp_stream.child(i as u64);
            w_j.push(src.bv_sample(j as u32, &mut sample_stream));
            ledger.charge_bv_run(k);
        }
    }
}

fn solve_component(w_j: &[BitVec], width: u32, rhs: u8, ledger: &CostLedger) -> AffineSolutionSet {
    let eqs: Vec<gf2::Equation> = w_j.iter().map(|mask| (*mask, rhs)).collect();
    let (set, ops) = gf2::solve_affine_system_counted(&eqs, width);
    ledger.add_gf2_ops(ops);
    set.with_tag(rhs)
}

fn distinct_count(w_j: &[BitVec]) -> u32 {
    let mut seen: Vec<u64> = w_j.iter().map(|v| v.bits()).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len() as u32
}

/// Tagged structure search over an oracle-bound vector function.
///
/// Draws `p` BV samples per component, solves both tagged systems and
/// intersects once. Every linear structure of the target appears in the
/// output with its tag. Fails with [`Error::AttackCap`] when some solution
/// set is too large to materialize; the caller can raise p and try again.
pub fn find_struct(
    src: &dyn BvSource,
    cfg: &AttackConfig,
    sampling_root: &RngStream,
    ledger: &CostLedger,
) -> Result<StructResult> {
    cfg.validate()?;
    let k = src.input_width();
    let n = src.component_count();
    let p = cfg.samples_per_component;

    let mut w: Vec<Vec<BitVec>> = vec![Vec::with_capacity(p as usize); n as usize];
    extend_samples(src, sampling_root, &mut w, 0, p, ledger);

    let mut families = Vec::with_capacity(n as usize);
    for w_j in &w {
        let zero = solve_component(w_j, k, 0, ledger);
        let one = solve_component(w_j, k, 1, ledger);
        families.push(TaggedFamily { zero, one });
    }

    let nullity: Vec<u32> = families.iter().map(|f| f.zero.nullity()).collect();
    if nullity.iter().any(|&b| b >= 64 || 1u64 << b > cfg.enum_cap) {
        return Err(Error::AttackCap {
            cap: cfg.enum_cap,
            retries: 0,
            p_final: p,
            component_nullity: nullity,
        });
    }

    let (pairs, stats) = gf2::intersect_tagged_counted(&families, cfg.enum_cap)?;
    ledger.add_intersection_ops(stats.elements_processed);

    let components: Vec<ComponentReport> = w
        .iter()
        .zip(&families)
        .map(|(w_j, fam)| ComponentReport {
            samples: p,
            distinct_masks: distinct_count(w_j),
            rank: fam.zero.rank(),
            size_zero: fam.zero.solution_count() as u64,
            size_one: fam.one.solution_count() as u64,
        })
        .collect();
    let t = components
        .iter()
        .map(|c| c.size_zero + c.size_one)
        .max()
        .unwrap_or(0);

    let result = StructResult {
        input_width: k,
        component_count: n,
        samples_per_component: p,
        pairs,
        components,
        t,
    };
    debug_assert!(
        result.contains(&BitVec::zero(k), &BitVec::zero(n)),
        "the trivial structure must always survive"
    );
    Ok(result)
}

/// Verification outcome of a key-recovery run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outcome {
    Recovered {
        key: BitVec,
    },
    /// Several keys encrypt all verification plaintexts identically.
    Ambiguous {
        survivors: Vec<BitVec>,
    },
}

impl Outcome {
    pub fn recovered_key(&self) -> Option<BitVec> {
        match self {
            Outcome::Recovered { key } => Some(*key),
            Outcome::Ambiguous { .. } => None,
        }
    }
}

/// Keeps the candidates that encrypt `r` fresh random plaintexts exactly like
/// the target-key oracle. The attacker evaluates its own cipher circuit per
/// candidate; only the reference ciphertexts come from the oracle.
pub fn verify_candidates(
    candidates: &[BitVec],
    oracle: &RelatedKeyOracle,
    r: u32,
    rng: &mut RngStream,
) -> Result<Outcome> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let n = oracle.block_width();
    let plaintexts: Vec<BitVec> = (0..r).map(|_| rng.bitvec(n)).collect();
    let references: Vec<BitVec> = plaintexts.iter().map(|m| oracle.target_query(*m)).collect();
    let cipher = oracle.cipher();
    let mut survivors: Vec<BitVec> = candidates
        .iter()
        .filter(|a| {
            plaintexts
                .iter()
                .zip(&references)
                .all(|(m, c)| cipher.encrypt(**a, *m) == *c)
        })
        .copied()
        .collect();
    assert!(
        !survivors.is_empty(),
        "honest oracle: the hidden key itself must survive verification"
    );
    survivors.sort_unstable_by_key(|v| v.bits());
    if survivors.len() == 1 {
        Ok(Outcome::Recovered { key: survivors[0] })
    } else {
        Ok(Outcome::Ambiguous { survivors })
    }
}

/// Which derived function a recovery run attacked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    RecoverKey,
    RecoverKeyG,
}

/// Full record of one key-recovery run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackReport {
    pub mode: AttackMode,
    pub outcome: Outcome,
    /// |A| before verification.
    pub candidate_count: u64,
    /// The candidate set, truncated to [`REPORT_LIST_LIMIT`] entries.
    pub candidates: Vec<BitVec>,
    pub candidates_truncated: bool,
    /// For the G mode: the tagged pairs of the full structure search,
    /// truncated like `candidates`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub struct_pairs: Option<Vec<(BitVec, BitVec)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub struct_pairs_count: Option<u64>,
    /// max_j of the enumerated per-component set sizes.
    pub t: u64,
    /// Final sample budget per component (after any doubling).
    pub samples_per_component: u32,
    pub retries: u32,
    pub verify_plaintexts: u32,
    pub component_ranks: Vec<u32>,
    pub ledger: CostSnapshot,
    pub oracle_queries: OracleCounterSnapshot,
}

impl AttackReport {
    pub fn recovered_key(&self) -> Option<BitVec> {
        self.outcome.recovered_key()
    }
}

/// A finished recovery run: the serializable report plus the full
/// (untruncated) candidate data for in-process consumers.
#[derive(Clone, Debug)]
pub struct AttackRun {
    pub report: AttackReport,
    /// Complete sorted candidate set A.
    pub candidates: Vec<BitVec>,
    /// Complete tagged pair set of the structure search (G mode only).
    pub struct_pairs: Option<Vec<(BitVec, BitVec)>>,
}

impl AttackRun {
    pub fn recovered_key(&self) -> Option<BitVec> {
        self.report.recovered_key()
    }

    pub fn candidates_contain(&self, key: &BitVec) -> bool {
        self.candidates
            .binary_search_by_key(&key.bits(), |v| v.bits())
            .is_ok()
    }
}

fn truncated(list: &[BitVec]) -> (Vec<BitVec>, bool) {
    if list.len() > REPORT_LIST_LIMIT {
        (list[..REPORT_LIST_LIMIT].to_vec(), true)
    } else {
        (list.to_vec(), false)
    }
}

/// Samples with cap-driven retries: whenever some rhs=0 solution set exceeds
/// the enumeration cap, the sample budget doubles (appending fresh samples,
/// so earlier draws are reused) until the sets shrink or the retry limit is
/// hit.
struct SampledSystems {
    w: Vec<Vec<BitVec>>,
    zero_sets: Vec<AffineSolutionSet>,
    p_final: u32,
    retries: u32,
}

fn sample_until_under_cap(
    src: &dyn BvSource,
    cfg: &AttackConfig,
    sampling_root: &RngStream,
    ledger: &CostLedger,
) -> Result<SampledSystems> {
    let k = src.input_width();
    let n = src.component_count();
    let mut w: Vec<Vec<BitVec>> = vec![Vec::new(); n as usize];
    let mut p_current = cfg.samples_per_component;
    let mut sampled = 0u32;
    let mut retries = 0u32;
    loop {
        extend_samples(src, sampling_root, &mut w, sampled, p_current, ledger);
        sampled = p_current;
        let zero_sets: Vec<AffineSolutionSet> = w
            .iter()
            .map(|w_j| solve_component(w_j, k, 0, ledger))
            .collect();
        let nullity: Vec<u32> = zero_sets.iter().map(|s| s.nullity()).collect();
        let over_cap = nullity.iter().any(|&b| b >= 64 || 1u64 << b > cfg.enum_cap);
        if !over_cap {
            return Ok(SampledSystems {
                w,
                zero_sets,
                p_final: p_current,
                retries,
            });
        }
        if retries >= cfg.retry_limit {
            return Err(Error::AttackCap {
                cap: cfg.enum_cap,
                retries,
                p_final: p_current,
                component_nullity: nullity,
            });
        }
        retries += 1;
        p_current = p_current.saturating_mul(2);
    }
}

/// Recovers the hidden key of a related-key oracle through the periodic
/// derived function of an arbitrary plaintext `m`.
///
/// Only the rhs=0 systems are solved: the key is a 0-tagged structure of the
/// derived function, so it lies in every rhs=0 solution set and therefore in
/// their intersection. Verification then isolates it (or reports the full
/// set of equivalent keys).
///
/// Stream layout: `rng.child(0)` drives sampling, `rng.child(1)` the
/// verification plaintexts.
pub fn recover_key(
    oracle: &RelatedKeyOracle,
    m: BitVec,
    cfg: &AttackConfig,
    rng: &RngStream,
    ledger: &CostLedger,
) -> Result<AttackRun> {
    cfg.validate()?;
    let src = oracle.bind_f(m)?;
    let k = oracle.key_width();
    let n = oracle.block_width();
    let sampled = sample_until_under_cap(&src, cfg, &rng.child(0), ledger)?;

    let set_refs: Vec<&AffineSolutionSet> = sampled.zero_sets.iter().collect();
    let (candidates, stats) = gf2::intersect_all_counted(&set_refs, cfg.enum_cap)?;
    ledger.add_intersection_ops(stats.elements_processed);
    let t = sampled
        .zero_sets
        .iter()
        .map(|s| s.solution_count() as u64)
        .max()
        .unwrap_or(0);

    let r = cfg.effective_verify_plaintexts(k, n);
    let outcome = verify_candidates(&candidates, oracle, r, &mut rng.child(1))?;

    let (listed, truncated_flag) = truncated(&candidates);
    let report = AttackReport {
        mode: AttackMode::RecoverKey,
        outcome,
        candidate_count: candidates.len() as u64,
        candidates: listed,
        candidates_truncated: truncated_flag,
        struct_pairs: None,
        struct_pairs_count: None,
        t,
        samples_per_component: sampled.p_final,
        retries: sampled.retries,
        verify_plaintexts: r,
        component_ranks: sampled.zero_sets.iter().map(|s| s.rank()).collect(),
        ledger: ledger.snapshot(),
        oracle_queries: oracle.counters(),
    };
    Ok(AttackRun {
        report,
        candidates,
        struct_pairs: None,
    })
}

/// Key recovery through the shifted derived function (square key spaces).
///
/// Runs the full tagged structure search, then applies the bit filter: a
/// vector in a component's tag-i set is kept only when its own bit j equals
/// i. A candidate key tags itself, so the filter can never remove it; it
/// only strips mismatched survivors before the intersection.
pub fn recover_key_gvariant(
    oracle: &RelatedKeyOracle,
    m: BitVec,
    cfg: &AttackConfig,
    rng: &RngStream,
    ledger: &CostLedger,
) -> Result<AttackRun> {
    cfg.validate()?;
    let src = oracle.bind_g(m)?;
    let k = oracle.key_width();
    let n = oracle.block_width();
    let sampled = sample_until_under_cap(&src, cfg, &rng.child(0), ledger)?;

    // Both tagged systems per component, from the same samples. A consistent
    // rhs=1 set shares the homogeneous part of its rhs=0 sibling, so the cap
    // check on the zero sets already covers it.
    let families: Vec<TaggedFamily> = sampled
        .w
        .iter()
        .zip(&sampled.zero_sets)
        .map(|(w_j, zero)| TaggedFamily {
            zero: zero.clone(),
            one: solve_component(w_j, k, 1, ledger),
        })
        .collect();

    let (pairs, stats) = gf2::intersect_tagged_counted(&families, cfg.enum_cap)?;
    ledger.add_intersection_ops(stats.elements_processed);

    // Bit filter: keep vectors that are their own tag.
    let candidates: Vec<BitVec> = pairs
        .iter()
        .filter(|(a, tag)| a.bits() == tag.bits())
        .map(|(a, _)| *a)
        .collect();
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let t = families
        .iter()
        .map(|f| (f.zero.solution_count() + f.one.solution_count()) as u64)
        .max()
        .unwrap_or(0);

    let r = cfg.effective_verify_plaintexts(k, n);
    let outcome = verify_candidates(&candidates, oracle, r, &mut rng.child(1))?;

    let (listed, truncated_flag) = truncated(&candidates);
    let listed_pairs: Vec<(BitVec, BitVec)> =
        pairs.iter().take(REPORT_LIST_LIMIT).copied().collect();
    let report = AttackReport {
        mode: AttackMode::RecoverKeyG,
        outcome,
        candidate_count: candidates.len() as u64,
        candidates: listed,
        candidates_truncated: truncated_flag,
        struct_pairs: Some(listed_pairs),
        struct_pairs_count: Some(pairs.len() as u64),
        t,
        samples_per_component: sampled.p_final,
        retries: sampled.retries,
        verify_plaintexts: r,
        component_ranks: families.iter().map(|f| f.zero.rank()).collect(),
        ledger: ledger.snapshot(),
        oracle_queries: oracle.counters(),
    };
    Ok(AttackRun {
        report,
        candidates,
        struct_pairs: Some(pairs),
    })
}

/// Exhaustive bias diagnostic of the derived periodic function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BiasReport {
    /// Exact worst-case differential bias of the derived function.
    pub delta: Frac,
    pub delta_f64: f64,
    /// The smallest admissible bias constant: any assumed bound must be at
    /// least this value.
    pub minimal_p0: Frac,
    /// Every shift is a structure (the derived function is degenerate; the
    /// bias is 0 by convention but the candidate set is the full space).
    pub all_shifts_are_structures: bool,
}

/// Measures the exact worst-case bias of the derived function for (s, m).
/// Exhaustive over the key space; capped at k <= 12.
pub fn measure_bias(cipher: &dyn BlockCipher, s: BitVec, m: BitVec) -> Result<BiasReport> {
    let k = cipher.key_width();
    if k > DIAGNOSTIC_MAX_K {
        return Err(Error::TableTooLarge {
            k,
            max: DIAGNOSTIC_MAX_K,
        });
    }
    let f = derived_f(cipher, s, m)?;
    let delta = f.delta();
    let all_structures = f.linear_structures().total() as u64 == f.domain_size();
    Ok(BiasReport {
        delta,
        delta_f64: delta.to_f64(),
        minimal_p0: delta,
        all_shifts_are_structures: all_structures,
    })
}

/// Per-component census of approximate structures of the derived function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CloseStructureCensus {
    pub l: u32,
    pub sigma: Frac,
    /// Number of distinct shifts per component that are (1/l)-close
    /// structures.
    pub per_component: Vec<u64>,
    pub max_count: u64,
}

/// Counts (1/l)-close structures of every derived component. Exhaustive;
/// capped at k <= 12.
pub fn census_close_structures(
    cipher: &dyn BlockCipher,
    s: BitVec,
    m: BitVec,
    l: u32,
) -> Result<CloseStructureCensus> {
    let k = cipher.key_width();
    if k > DIAGNOSTIC_MAX_K {
        return Err(Error::TableTooLarge {
            k,
            max: DIAGNOSTIC_MAX_K,
        });
    }
    if l == 0 {
        return Err(Error::InvalidParameter("l must be at least 1".into()));
    }
    let sigma = Frac::new(1, l as u64);
    let f = derived_f(cipher, s, m)?;
    let mut per_component = Vec::with_capacity(f.output_width() as usize);
    for j in 0..f.output_width() {
        let close = f.component(j).sigma_close_structures(sigma)?;
        let mut shifts: Vec<u64> = close.iter().map(|(a, _, _)| a.bits()).collect();
        shifts.sort_unstable();
        shifts.dedup();
        per_component.push(shifts.len() as u64);
    }
    let max_count = per_component.iter().copied().max().unwrap_or(0);
    Ok(CloseStructureCensus {
        l,
        sigma,
        per_component,
        max_count,
    })
}

/// Probability that every vector in the output set is simultaneously
/// epsilon-close on all n components: `(1 - e^(-2 p eps^2))^n`.
pub fn closeness_success_bound(p: u32, epsilon: f64, n: u32) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidParameter("p must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok((1.0 - (-2.0 * p as f64 * epsilon * epsilon).exp()).powi(n as i32))
}

/// Probability that a set member is a true structure when the bias is
/// bounded by p0: `1 - p0^p`.
pub fn structure_soundness_bound(p0: f64, p: u32) -> Result<f64> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "p0 must lie in (0, 1), got {p0}"
        )));
    }
    if p == 0 {
        return Err(Error::InvalidParameter("p must be at least 1".into()));
    }
    Ok(1.0 - p0.powi(p as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::VectorFunction;
    use crate::cipher::{RandomCipher, ToyEvenMansour, ToySpn, IDENTITY_SBOX, PRESENT_SBOX};
    use crate::qoracle::FunctionSource;
    use std::sync::Arc;

    fn run_find_struct(vf: &VectorFunction, p: u32, seed: u64) -> StructResult {
        let src = FunctionSource::new(vf);
        let cfg = AttackConfig::new(p);
        let ledger = CostLedger::new();
        find_struct(&src, &cfg, &RngStream::from_seed(seed), &ledger).unwrap()
    }

    #[test]
    fn find_struct_on_identity_tags_every_vector_with_itself() {
        let id = VectorFunction::from_fn(2, 2, |x| x).unwrap();
        let result = run_find_struct(&id, 3, 1);
        let expect: Vec<(BitVec, BitVec)> = (0..4u64)
            .map(|a| (BitVec::new(2, a), BitVec::new(2, a)))
            .collect();
        assert_eq!(result.pairs, expect);
    }

    #[test]
    fn find_struct_on_constant_tags_everything_zero() {
        let c = VectorFunction::from_fn(3, 2, |_| 0b01).unwrap();
        let result = run_find_struct(&c, 4, 2);
        assert_eq!(result.pairs.len(), 8);
        for (i, (a, tag)) in result.pairs.iter().enumerate() {
            assert_eq!(a.bits(), i as u64);
            assert!(tag.is_zero());
        }
    }

    #[test]
    fn find_struct_queries_and_ledger_are_exact() {
        let mut rng = RngStream::from_seed(77);
        let vf = crate::qoracle::random_vector_function(6, 4, &mut rng).unwrap();
        let src = FunctionSource::new(&vf);
        let cfg = AttackConfig::new(10);
        let ledger = CostLedger::new();
        find_struct(&src, &cfg, &RngStream::from_seed(3), &ledger).unwrap();
        assert_eq!(src.runs(), 40);
        let snap = ledger.snapshot();
        assert_eq!(snap.quantum_queries, 40);
        assert_eq!(snap.hadamard_gates, 13 * 40);
        assert_eq!(snap.qubits_peak, 7);
    }

    #[test]
    fn find_struct_contains_all_true_structures() {
        let mut rng = RngStream::from_seed(1234);
        for trial in 0..30u64 {
            let k = 2 + (trial % 5) as u32;
            let n = 1 + (trial % 3) as u32;
            let vf = crate::qoracle::random_vector_function(k, n, &mut rng).unwrap();
            let result = run_find_struct(&vf, 4 * n, 1000 + trial);
            for (a, alpha) in vf.linear_structures().pairs() {
                assert!(
                    result.contains(&a, &alpha),
                    "missing structure ({a}, {alpha}) at trial {trial}"
                );
            }
        }
    }

    #[test]
    fn find_struct_cap_error_reports_nullity() {
        let c = VectorFunction::from_fn(6, 2, |_| 0).unwrap();
        let src = FunctionSource::new(&c);
        let mut cfg = AttackConfig::new(4);
        cfg.enum_cap = 8; // full space is 64 > 8
        let err =
            find_struct(&src, &cfg, &RngStream::from_seed(0), &CostLedger::new()).unwrap_err();
        match err {
            Error::AttackCap {
                component_nullity, ..
            } => assert_eq!(component_nullity, vec![6, 6]),
            other => panic!("expected AttackCap, got {other}"),
        }
    }

    fn em_oracle(n: u32, seed: u64, key: u64) -> RelatedKeyOracle {
        let em = Arc::new(ToyEvenMansour::new(n, seed).unwrap());
        RelatedKeyOracle::new(em, BitVec::new(n, key))
    }

    #[test]
    fn recover_key_finds_the_hidden_key() {
        for trial in 0..20u64 {
            let s = 1 + (trial * 37 % 255);
            let oracle = em_oracle(8, trial, s);
            let cfg = AttackConfig::new(32);
            let ledger = CostLedger::new();
            let run = recover_key(
                &oracle,
                BitVec::new(8, trial & 0xff),
                &cfg,
                &RngStream::from_seed(5000 + trial),
                &ledger,
            )
            .unwrap();
            assert_eq!(
                run.recovered_key(),
                Some(BitVec::new(8, s)),
                "trial {trial}"
            );
            assert!(run.candidates_contain(&BitVec::new(8, s)));
            assert_eq!(run.report.retries, 0);
            assert_eq!(run.report.ledger.quantum_queries, 8 * 32);
        }
    }

    #[test]
    fn recover_key_on_linear_cipher_degenerates_but_still_verifies() {
        let spn = Arc::new(ToySpn::new(1, IDENTITY_SBOX, 8, false).unwrap());
        let s = BitVec::new(8, 0x7c);
        let oracle = RelatedKeyOracle::new(spn, s);
        let cfg = AttackConfig::new(16);
        let run = recover_key(
            &oracle,
            BitVec::new(8, 0x11),
            &cfg,
            &RngStream::from_seed(9),
            &CostLedger::new(),
        )
        .unwrap();
        // Derived function is constant: every mask samples to zero and the
        // candidate set is the full key space.
        assert_eq!(run.report.candidate_count, 256);
        assert_eq!(run.recovered_key(), Some(s));
    }

    #[test]
    fn recover_key_retries_double_p_and_keep_query_count_consistent() {
        let oracle = em_oracle(8, 3, 0x4d);
        let mut cfg = AttackConfig::new(2);
        cfg.enum_cap = 4; // rank must reach 6 before sets fit
        cfg.retry_limit = 5;
        let ledger = CostLedger::new();
        let run = recover_key(
            &oracle,
            BitVec::new(8, 0),
            &cfg,
            &RngStream::from_seed(21),
            &ledger,
        )
        .unwrap();
        assert!(run.report.retries > 0);
        assert_eq!(run.report.samples_per_component, 2 << run.report.retries);
        assert_eq!(
            run.report.ledger.quantum_queries,
            8 * run.report.samples_per_component as u64
        );
        assert_eq!(run.recovered_key(), Some(BitVec::new(8, 0x4d)));
    }

    #[test]
    fn recover_key_cap_error_after_retry_limit() {
        // Linear cipher: the derived function is constant, so sampled masks
        // are all zero and no amount of extra sampling shrinks the sets.
        let spn = Arc::new(ToySpn::new(1, IDENTITY_SBOX, 8, false).unwrap());
        let oracle = RelatedKeyOracle::new(spn, BitVec::new(8, 0x2a));
        let mut cfg = AttackConfig::new(4);
        cfg.enum_cap = 64;
        cfg.retry_limit = 2;
        let err = recover_key(
            &oracle,
            BitVec::new(8, 0),
            &cfg,
            &RngStream::from_seed(4),
            &CostLedger::new(),
        )
        .unwrap_err();
        match err {
            Error::AttackCap {
                retries, p_final, ..
            } => {
                assert_eq!(retries, 2);
                assert_eq!(p_final, 16);
            }
            other => panic!("expected AttackCap, got {other}"),
        }
    }

    #[test]
    fn verify_single_candidate_uses_r_target_queries() {
        let oracle = em_oracle(8, 6, 0x33);
        let s = BitVec::new(8, 0x33);
        let before = oracle.counters().target_queries;
        let out = verify_candidates(&[s], &oracle, 5, &mut RngStream::from_seed(1)).unwrap();
        assert_eq!(out, Outcome::Recovered { key: s });
        assert_eq!(oracle.counters().target_queries - before, 5);
    }

    #[test]
    fn verify_rejects_wrong_key_on_random_cipher() {
        let cipher = Arc::new(RandomCipher::new(8, 8, 50).unwrap());
        let s = BitVec::new(8, 0x61);
        let oracle = RelatedKeyOracle::new(cipher, s);
        let wrong = BitVec::new(8, 0x62);
        let out = verify_candidates(&[s, wrong], &oracle, 2, &mut RngStream::from_seed(2)).unwrap();
        assert_eq!(out, Outcome::Recovered { key: s });
    }

    #[test]
    fn equivalent_keys_produce_an_ambiguity_report() {
        let em = Arc::new(ToyEvenMansour::identity(4).unwrap());
        let s = BitVec::new(4, 0b1010);
        let oracle = RelatedKeyOracle::new(em, s);
        let other = BitVec::new(4, 0b0101);
        let out = verify_candidates(&[s, other], &oracle, 3, &mut RngStream::from_seed(3)).unwrap();
        assert_eq!(
            out,
            Outcome::Ambiguous {
                survivors: vec![other, s]
            }
        );
    }

    #[test]
    fn empty_candidate_set_is_a_contract_violation() {
        let oracle = em_oracle(4, 0, 1);
        assert!(matches!(
            verify_candidates(&[], &oracle, 1, &mut RngStream::from_seed(0)),
            Err(Error::EmptyCandidates)
        ));
    }

    #[test]
    fn gvariant_recovers_and_reports_self_tagged_pair() {
        for trial in 0..10u64 {
            let s = 1 + (trial * 53 % 255);
            let oracle = em_oracle(8, 100 + trial, s);
            let cfg = AttackConfig::new(32);
            let run = recover_key_gvariant(
                &oracle,
                BitVec::new(8, 0x0f),
                &cfg,
                &RngStream::from_seed(7000 + trial),
                &CostLedger::new(),
            )
            .unwrap();
            let key = BitVec::new(8, s);
            assert_eq!(run.recovered_key(), Some(key), "trial {trial}");
            let pairs = run.struct_pairs.as_ref().unwrap();
            assert!(
                pairs.contains(&(key, key)),
                "self-tagged pair missing at trial {trial}"
            );
            assert!(run.candidates_contain(&key));
        }
    }

    #[test]
    fn bias_of_linear_cipher_is_flagged_degenerate() {
        let spn = ToySpn::new(1, IDENTITY_SBOX, 8, false).unwrap();
        let report = measure_bias(&spn, BitVec::new(8, 0x44), BitVec::new(8, 0x00)).unwrap();
        assert!(report.all_shifts_are_structures);
        assert_eq!(report.delta, Frac::zero());
    }

    #[test]
    fn bias_of_toy_em_is_strictly_below_one() {
        let em = ToyEvenMansour::new(8, 8).unwrap();
        let report = measure_bias(&em, BitVec::new(8, 0x99), BitVec::new(8, 0x01)).unwrap();
        assert!(report.delta < Frac::one());
        assert!(!report.all_shifts_are_structures);
        assert_eq!(report.minimal_p0, report.delta);
    }

    #[test]
    fn bias_of_ideal_cipher_concentrates_above_half() {
        // Observed range over these seeds: 0.6875..=0.75. The paired values
        // of the periodic derived function double the binomial variance, so
        // the worst count sits a few sigma above half.
        for seed in 0..10u64 {
            let c = RandomCipher::new(8, 8, seed).unwrap();
            let report = measure_bias(&c, BitVec::new(8, 0x3d), BitVec::new(8, 0x11)).unwrap();
            assert!(
                report.delta > Frac::new(1, 2),
                "seed {seed}: {}",
                report.delta
            );
            assert!(
                report.delta <= Frac::new(4, 5),
                "seed {seed}: {}",
                report.delta
            );
        }
    }

    #[test]
    fn bias_measurement_respects_the_size_cap() {
        let spn = ToySpn::new(2, PRESENT_SBOX, 16, true).unwrap();
        assert!(matches!(
            measure_bias(&spn, BitVec::zero(16), BitVec::zero(16)),
            Err(Error::TableTooLarge { .. })
        ));
    }

    #[test]
    fn close_structure_census_linear_cipher_is_maximal() {
        let spn = ToySpn::new(1, IDENTITY_SBOX, 8, false).unwrap();
        let report =
            census_close_structures(&spn, BitVec::new(8, 0x10), BitVec::new(8, 0x00), 16).unwrap();
        assert!(report.per_component.iter().all(|&c| c == 256));
    }

    #[test]
    fn close_structure_census_spn_counts_stay_small() {
        let spn = ToySpn::new(3, PRESENT_SBOX, 8, true).unwrap();
        let report =
            census_close_structures(&spn, BitVec::new(8, 0x35), BitVec::new(8, 0x02), 16).unwrap();
        // Exact structures {0, s} are always counted.
        assert!(report.per_component.iter().all(|&c| c >= 2));
        assert!(report.max_count <= 8, "counts {:?}", report.per_component);
    }

    #[test]
    fn probability_bounds_match_hand_arithmetic() {
        let t3 = structure_soundness_bound(0.5, 30).unwrap();
        assert!((t3 - (1.0 - 2f64.powi(-30))).abs() < 1e-15);
        let t2 = closeness_success_bound(100, 0.1, 8).unwrap();
        let expect = (1.0 - (-2.0f64).exp()).powi(8);
        assert!((t2 - expect).abs() < 1e-12);
        assert!((t2 - 0.3128).abs() < 1e-3);
    }

    #[test]
    fn closeness_success_bound_is_monotone_in_p() {
        let mut last = 0.0;
        for p in [1u32, 2, 5, 10, 50, 200, 1000] {
            let v = closeness_success_bound(p, 0.2, 6).unwrap();
            assert!(v >= last);
            last = v;
        }
        assert!(last > 0.999);
    }

    #[test]
    fn probability_bounds_reject_bad_domains() {
        assert!(closeness_success_bound(0, 0.1, 3).is_err());
        assert!(closeness_success_bound(5, 0.0, 3).is_err());
        assert!(closeness_success_bound(5, 1.0, 3).is_err());
        assert!(structure_soundness_bound(0.0, 5).is_err());
        assert!(structure_soundness_bound(1.0, 5).is_err());
    }

    #[test]
    fn more_samples_never_grow_the_candidate_sets() {
        // Same stream: the smaller budget's samples are a prefix of the
        // larger's, so the solution sets shrink pointwise.
        for trial in 0..20u64 {
            let oracle = em_oracle(8, 300 + trial, 1 + (trial % 255));
            let m = BitVec::new(8, 0x5a);
            let rng = RngStream::from_seed(31_000 + trial);
            let mut t_by_p = Vec::new();
            for p in [4u32, 8, 16] {
                let cfg = AttackConfig::new(p);
                let run = recover_key(&oracle, m, &cfg, &rng, &CostLedger::new()).unwrap();
                t_by_p.push(run.report.t);
            }
            assert!(
                t_by_p[0] >= t_by_p[1] && t_by_p[1] >= t_by_p[2],
                "{t_by_p:?}"
            );
        }
    }
}
