//! Independent oracles for the integration suites.
//!
//! Everything here recomputes results from definitions (direct summation,
//! exhaustive double loops, full enumeration) and deliberately avoids the
//! fast paths under test.

#![allow(dead_code)]

use bvrk::boolfn::{BooleanFunction, Frac, VectorFunction};
use bvrk::gf2::{BitVec, Equation};

/// Walsh spectrum by direct summation over all (w, x) pairs, O(4^k).
pub fn direct_walsh_spectrum(f: &BooleanFunction) -> Vec<i64> {
    let points = f.domain_size();
    (0..points)
        .map(|w| {
            (0..points)
                .map(|x| {
                    let sign = f.eval(x) as u32 + (x & w).count_ones();
                    if sign.is_multiple_of(2) {
                        1i64
                    } else {
                        -1i64
                    }
                })
                .sum()
        })
        .collect()
}

/// Tagged linear structures of a vector function by the defining scan:
/// (a, alpha) is emitted iff F(x) ^ F(x ^ a) = alpha for every x. Sorted.
pub fn scan_structure_pairs(vf: &VectorFunction) -> Vec<(BitVec, BitVec)> {
    let k = vf.input_width();
    let n = vf.output_width();
    let points = vf.domain_size();
    let mut out = Vec::new();
    'shift: for a in 0..points {
        let alpha = vf.eval(0) ^ vf.eval(a);
        for x in 1..points {
            if vf.eval(x) ^ vf.eval(x ^ a) != alpha {
                continue 'shift;
            }
        }
        out.push((BitVec::new(k, a), BitVec::new(n, alpha)));
    }
    out.sort_unstable_by_key(|(a, t)| (a.bits(), t.bits()));
    out
}

/// Affine-system solutions by scanning all 2^k vectors.
pub fn brute_force_solutions(equations: &[Equation], width: u32) -> Vec<BitVec> {
    BitVec::all(width)
        .filter(|x| equations.iter().all(|(w, rhs)| x.dot(w) == *rhs))
        .collect()
}

/// Worst-case differential bias by the definitional double loop, O(4^k).
pub fn delta_double_loop(f: &BooleanFunction) -> Frac {
    let points = f.domain_size();
    let mut best: Option<u64> = None;
    'shift: for a in 0..points {
        let first = f.eval(0) ^ f.eval(a);
        let mut counts = [0u64; 2];
        for x in 0..points {
            counts[(f.eval(x) ^ f.eval(x ^ a)) as usize] += 1;
        }
        if counts[first as usize] == points {
            continue 'shift; // a is an exact structure
        }
        let local = counts[0].max(counts[1]);
        best = Some(best.map_or(local, |b| b.max(local)));
    }
    match best {
        None => Frac::zero(),
        Some(count) => Frac::new(count, points),
    }
}

/// Fraction of inputs where F_j(x ^ a) ^ F_j(x) equals the given bit.
pub fn component_agreement(f: &BooleanFunction, a: u64, bit: u8) -> Frac {
    let points = f.domain_size();
    let count = (0..points)
        .filter(|&x| f.eval(x) ^ f.eval(x ^ a) == bit)
        .count() as u64;
    Frac::new(count, points)
}

pub mod schema {
    //! Minimal structural validator for the JSON-schema subset used by the
    //! shipped report schemas: `type`, `required`, `properties`, `items`,
    //! `enum` (strings) and `$ref` into `#/definitions/...`.

    use serde_json::Value;

    pub fn validate(instance: &Value, schema: &Value) -> Result<(), String> {
        let root = schema;
        validate_at(instance, schema, root, "$")
    }

    fn resolve<'a>(reference: &str, root: &'a Value) -> Result<&'a Value, String> {
        let path = reference
            .strip_prefix("#/")
            .ok_or_else(|| format!("unsupported $ref {reference}"))?;
        let mut node = root;
        for part in path.split('/') {
            node = node
                .get(part)
                .ok_or_else(|| format!("dangling $ref {reference}"))?;
        }
        Ok(node)
    }

    fn type_matches(instance: &Value, ty: &str) -> bool {
        match ty {
            "object" => instance.is_object(),
            "array" => instance.is_array(),
            "string" => instance.is_string(),
            "integer" => instance.as_i64().is_some() || instance.as_u64().is_some(),
            "number" => instance.is_number(),
            "boolean" => instance.is_boolean(),
            "null" => instance.is_null(),
            _ => false,
        }
    }

    fn validate_at(
        instance: &Value,
        schema: &Value,
        root: &Value,
        path: &str,
    ) -> Result<(), String> {
        if let Some(reference) = schema.get("$ref").and_then(Value::as_str) {
            return validate_at(instance, resolve(reference, root)?, root, path);
        }
        if let Some(ty) = schema.get("type") {
            let allowed: Vec<&str> = match ty {
                Value::String(s) => vec![s.as_str()],
                Value::Array(list) => list.iter().filter_map(Value::as_str).collect(),
                _ => return Err(format!("{path}: malformed type keyword")),
            };
            if !allowed.iter().any(|t| type_matches(instance, t)) {
                return Err(format!("{path}: expected type {allowed:?}, got {instance}"));
            }
        }
        if let Some(options) = schema.get("enum").and_then(Value::as_array) {
            if !options.contains(instance) {
                return Err(format!("{path}: {instance} not in enum {options:?}"));
            }
        }
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if instance.get(key).is_none() {
                    return Err(format!("{path}: missing required field {key:?}"));
                }
            }
        }
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            for (key, sub) in props {
                if let Some(value) = instance.get(key) {
                    validate_at(value, sub, root, &format!("{path}.{key}"))?;
                }
            }
        }
        if let Some(items) = schema.get("items") {
            if let Some(list) = instance.as_array() {
                for (i, value) in list.iter().enumerate() {
                    validate_at(value, items, root, &format!("{path}[{i}]"))?;
                }
            }
        }
        Ok(())
    }
}
