//! Symbolic resource accounting: gates, quantum queries, qubits and
//! classical work.
//!
//! The ledger records raw counts with all big-O constants fixed at 1, so a
//! user can re-weight terms afterwards. One BV run on k input bits costs
//! 2k+1 Hadamard gates, one quantum query, one attacker-side cipher circuit
//! (counted in units of the cipher's symbolic gate cost) and peaks at k+1
//! qubits, regardless of any simulation shortcut taken to produce the
//! outcome.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Closed-form cost of a single BV run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BvRunCost {
    pub hadamard_gates: u64,
    pub quantum_queries: u64,
    pub qubits: u64,
    pub cipher_gate_units: u64,
}

/// 2k+1 Hadamards, one query, k+1 qubits, one cipher application.
pub fn bv_run_cost(k: u32) -> BvRunCost {
    BvRunCost {
        hadamard_gates: 2 * k as u64 + 1,
        quantum_queries: 1,
        qubits: k as u64 + 1,
        cipher_gate_units: 1,
    }
}

/// Mutable run ledger. Counters only grow; `qubits_peak` is a running max.
/// Updates are atomic and merging snapshots is associative and commutative.
#[derive(Debug, Default)]
pub struct CostLedger {
    hadamard_gates: AtomicU64,
    cipher_gate_units: AtomicU64,
    quantum_queries: AtomicU64,
    qubits_peak: AtomicU64,
    gf2_ops: AtomicU64,
    intersection_ops: AtomicU64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Charges one BV run on k input bits.
    pub fn charge_bv_run(&self, k: u32) {
        let cost = bv_run_cost(k);
        self.hadamard_gates
            .fetch_add(cost.hadamard_gates, Ordering::Relaxed);
        self.cipher_gate_units
            .fetch_add(cost.cipher_gate_units, Ordering::Relaxed);
        self.quantum_queries
            .fetch_add(cost.quantum_queries, Ordering::Relaxed);
        self.qubits_peak.fetch_max(cost.qubits, Ordering::Relaxed);
    }

    pub fn add_gf2_ops(&self, ops: u64) {
        self.gf2_ops.fetch_add(ops, Ordering::Relaxed);
    }

    pub fn add_intersection_ops(&self, ops: u64) {
        self.intersection_ops.fetch_add(ops, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CostSnapshot {
        CostSnapshot {
            hadamard_gates: self.hadamard_gates.load(Ordering::Relaxed),
            cipher_gate_units: self.cipher_gate_units.load(Ordering::Relaxed),
            quantum_queries: self.quantum_queries.load(Ordering::Relaxed),
            qubits_peak: self.qubits_peak.load(Ordering::Relaxed),
            gf2_ops: self.gf2_ops.load(Ordering::Relaxed),
            intersection_ops: self.intersection_ops.load(Ordering::Relaxed),
        }
    }
}

/// Immutable ledger totals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostSnapshot {
    pub hadamard_gates: u64,
    pub cipher_gate_units: u64,
    pub quantum_queries: u64,
    pub qubits_peak: u64,
    pub gf2_ops: u64,
    pub intersection_ops: u64,
}

impl CostSnapshot {
    /// Componentwise merge; peaks combine by max.
    pub fn merged(self, other: CostSnapshot) -> CostSnapshot {
        CostSnapshot {
            hadamard_gates: self.hadamard_gates + other.hadamard_gates,
            cipher_gate_units: self.cipher_gate_units + other.cipher_gate_units,
            quantum_queries: self.quantum_queries + other.quantum_queries,
            qubits_peak: self.qubits_peak.max(other.qubits_peak),
            gf2_ops: self.gf2_ops + other.gf2_ops,
            intersection_ops: self.intersection_ops + other.intersection_ops,
        }
    }
}

/// Closed-form cost estimate of a full key-recovery run, split into the
/// sampling part, the elimination part and the intersection part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostEstimate {
    /// (2k+1) n p.
    pub hadamard_gates: u64,
    /// n p cipher applications, in gate-cost units.
    pub cipher_gate_units: u64,
    /// gate_cost * n p, expanded.
    pub cipher_gates_total: u64,
    /// n p.
    pub quantum_queries: u64,
    /// k + 1.
    pub qubits_peak: u64,
    /// p n k^2 elimination work (unit constant).
    pub gf2_ops: u64,
    /// n t ceil(log2 t) intersection work; zero when t <= 1.
    pub intersection_ops: u64,
    /// (2k+1+gate_cost) n p: total universal gates of the sampling part.
    pub sampling_gates_total: u64,
}

/// Evaluates the closed-form cost terms for key recovery with parameters
/// (k, n, p), a cipher of the given symbolic gate cost, and a maximum
/// per-component solution-set size t.
pub fn attack_cost_estimate(k: u32, n: u32, p: u32, gate_cost: u64, t: u64) -> CostEstimate {
    let runs = n as u64 * p as u64;
    let log_t = if t <= 1 {
        0
    } else {
        u64::from(64 - (t - 1).leading_zeros()) // ceil(log2 t)
    };
    CostEstimate {
        hadamard_gates: (2 * k as u64 + 1) * runs,
        cipher_gate_units: runs,
        cipher_gates_total: gate_cost * runs,
        quantum_queries: runs,
        qubits_peak: k as u64 + 1,
        gf2_ops: p as u64 * n as u64 * (k as u64 * k as u64),
        intersection_ops: n as u64 * t * log_t,
        sampling_gates_total: (2 * k as u64 + 1 + gate_cost) * runs,
    }
}
