//! Exhaustive enumeration of all machine programs up to a length budget,
//! aggregated into an output trie that answers mixture-over-programs queries.
//!
//! Each valid program of `l` opcodes carries weight `2^{-3l}`. A program
//! contributes its weight to an output string `x` only if it is a *minimal*
//! achiever of `x` on its own program-prefix chain: no valid proper prefix of
//! it already printed `x`. Because a valid prefix's run is replayed
//! verbatim by every valid extension, outputs along a chain of valid
//! prefixes only ever grow, so for each program the newly achieved strings
//! are exactly the output prefixes longer than anything a valid ancestor
//! printed. Summing minimal-achiever weights makes the per-string mass a
//! semimeasure: `mass(x) >= mass(x0) + mass(x1)` and `mass(x) <= 1`, both
//! checked exactly in scaled integer arithmetic.
//!
//! The same sweep records, per output string, the fewest program bits that
//! print it (possibly running on) and the fewest bits that print exactly it
//! and halt, plus a Kraft sum over minimal halting programs.

use std::path::Path;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{Predictor, PredictorCursor};
use crate::error::{Error, Result};
use crate::numeric::Rat;

use super::vm::{run_opcodes, Opcode, RunStatus, VmScratch, BITS_PER_OPCODE, OPCODE_COUNT};

/// Bumped whenever machine semantics change; cached tables from other
/// versions are rejected.
pub const MACHINE_VERSION: &str = "toy8-v1";

/// Hard ceiling on the enumeration depth: 8^10 programs is already far past
/// desk scale, and scaled weights stay comfortably inside u64 below it.
pub const L_MAX_CEILING: u32 = 10;

const NO_CHILD: u32 = u32::MAX;
/// "No program found" sentinel for bit-length minima.
const INF_BITS: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerateOptions {
    /// Maximum program length in opcodes (1..=10).
    pub l_max: u32,
    /// Step budget per program run.
    pub t_max: u64,
    /// Output bits stored per program; longer outputs are truncated but the
    /// true emitted count is still tracked.
    pub max_output: usize,
    /// Also keep one record per program (all `8^1 + .. + 8^l_max` of them)
    /// for CSV export. Aggregates are always produced.
    pub keep_programs: bool,
}

impl EnumerateOptions {
    pub fn new(l_max: u32, t_max: u64) -> EnumerateOptions {
        EnumerateOptions {
            l_max,
            t_max,
            max_output: 256,
            keep_programs: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrieNode {
    children: [u32; 2],
    /// Sum of minimal-achiever weights, scaled by `2^{3 l_max}`.
    mass: u64,
    /// Fewest bits of any valid program whose output starts with this string.
    km_bits: u32,
    /// Fewest bits of any halting program whose output is exactly this string.
    k_bits: u32,
}

impl TrieNode {
    fn empty() -> TrieNode {
        TrieNode {
            children: [NO_CHILD; 2],
            mass: 0,
            km_bits: INF_BITS,
            k_bits: INF_BITS,
        }
    }
}

/// One enumerated program, in depth-first (prefix-before-extension) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramRecord {
    pub octal: String,
    pub bit_len: u32,
    pub status: RunStatus,
    pub steps: u64,
    pub emitted: u64,
    /// Stored output bits (possibly truncated), rendered as '0'/'1' chars.
    pub output: String,
}

/// Aggregated enumeration results over all programs up to `l_max` opcodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnumerationTable {
    pub machine_version: String,
    pub l_max: u32,
    pub t_max: u64,
    pub max_output: usize,
    pub valid_programs: u64,
    pub invalid_programs: u64,
    pub halted_programs: u64,
    /// Valid programs with at least one stored output bit.
    pub nonempty_output_programs: u64,
    /// Kraft sum over minimal halting programs, scaled by `2^{3 l_max}`.
    pub kraft_halting_scaled: u64,
    nodes: Vec<TrieNode>,
    #[serde(skip)]
    records: Option<Vec<ProgramRecord>>,
}

/// Predictive distribution read off the output trie at one string.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `p[a] = mass(xa) / mass(x)`; may sum to less than one.
    pub p: Vec<f64>,
    /// Weight at `x` that never extends to either successor.
    pub deficit: f64,
}

/// One output string with its aggregates, as exported to CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StringRow {
    pub x: Vec<u8>,
    pub mass_scaled: u64,
    pub km_bits: Option<u32>,
    pub k_bits: Option<u32>,
}

/// Summary of the exact structural checks over the whole table.
#[derive(Debug, Clone, Copy)]
pub struct TableInvariantReport {
    pub nodes: u64,
    /// Largest `(mass(x0)+mass(x1)) / mass(x)` seen, at most 1.
    pub max_child_ratio: f64,
}

/// Summary of the cumulative one-step error check along every trie path.
#[derive(Debug, Clone, Copy)]
pub struct KmBoundReport {
    pub nodes: u64,
    /// Smallest `km_bits * ln 2 - sum_t (1 - ratio_t)` over all strings.
    pub min_margin_nats: f64,
}

struct ShardAcc {
    nodes: Vec<TrieNode>,
    valid: u64,
    invalid: u64,
    halted: u64,
    nonempty: u64,
    kraft_scaled: u64,
    records: Option<Vec<ProgramRecord>>,
}

impl ShardAcc {
    fn new(keep: bool) -> ShardAcc {
        ShardAcc {
            nodes: vec![TrieNode::empty()],
            valid: 0,
            invalid: 0,
            halted: 0,
            nonempty: 0,
            kraft_scaled: 0,
            records: keep.then(Vec::new),
        }
    }

    fn child_or_create(&mut self, node: u32, bit: u8) -> u32 {
        let c = self.nodes[node as usize].children[bit as usize];
        if c != NO_CHILD {
            return c;
        }
        let idx = self.nodes.len() as u32;
        self.nodes.push(TrieNode::empty());
        self.nodes[node as usize].children[bit as usize] = idx;
        idx
    }

    /// Credit one valid program: weight `w` and bit count `bits` at every
    /// output prefix strictly longer than `anc_max_out` (the longest output
    /// of any valid proper prefix, -1 when there is none), and optionally an
    /// exact-output halting bit count at the full output node.
    fn add_valid(&mut self, out: &[u8], anc_max_out: i64, w: u64, bits: u32, k_bits: Option<u32>) {
        if anc_max_out < 0 {
            self.nodes[0].mass += w;
            self.nodes[0].km_bits = self.nodes[0].km_bits.min(bits);
        }
        let mut node = 0u32;
        for (i, &b) in out.iter().enumerate() {
            node = self.child_or_create(node, b);
            if i as i64 >= anc_max_out {
                let n = &mut self.nodes[node as usize];
                n.mass += w;
                n.km_bits = n.km_bits.min(bits);
            }
        }
        if let Some(kb) = k_bits {
            let n = &mut self.nodes[node as usize];
            n.k_bits = n.k_bits.min(kb);
        }
    }
}

fn visit(
    ops: &mut Vec<Opcode>,
    anc_max_out: i64,
    anc_halted: bool,
    opt: &EnumerateOptions,
    acc: &mut ShardAcc,
    scratch: &mut VmScratch,
) {
    let depth = ops.len() as u32;
    let st = run_opcodes(ops, opt.t_max, opt.max_output, scratch);
    let mut child_max_out = anc_max_out;
    let mut child_halted = anc_halted;
    if st.status == RunStatus::Invalid {
        acc.invalid += 1;
    } else {
        acc.valid += 1;
        if !st.output.is_empty() {
            acc.nonempty += 1;
        }
        let w = 1u64 << (BITS_PER_OPCODE * (opt.l_max - depth));
        let bits = BITS_PER_OPCODE * depth;
        // Exact-output halting requires that nothing was truncated away.
        let k_bits = (st.status == RunStatus::Halted && st.emitted == st.output.len() as u64)
            .then_some(bits);
        acc.add_valid(&st.output, anc_max_out, w, bits, k_bits);
        if st.status == RunStatus::Halted {
            acc.halted += 1;
            // A halting extension of a halting valid prefix replays the
            // prefix's halt, so counting only ancestor-free halts makes the
            // counted set prefix-free and its Kraft sum at most one.
            if !anc_halted {
                acc.kraft_scaled += w;
            }
            child_halted = true;
        }
        child_max_out = child_max_out.max(st.output.len() as i64);
    }
    if let Some(recs) = &mut acc.records {
        recs.push(ProgramRecord {
            octal: ops.iter().map(|o| char::from(b'0' + o.digit())).collect(),
            bit_len: BITS_PER_OPCODE * depth,
            status: st.status,
            steps: st.steps,
            emitted: st.emitted,
            output: st.output.iter().map(|&b| char::from(b'0' + b)).collect(),
        });
    }
    if depth < opt.l_max {
        for d in 0..OPCODE_COUNT {
            ops.push(Opcode::from_digit(d).unwrap());
            visit(ops, child_max_out, child_halted, opt, acc, scratch);
            ops.pop();
        }
    }
}

fn merge_node(dst: &mut Vec<TrieNode>, di: u32, src: &[TrieNode], si: u32) {
    dst[di as usize].mass += src[si as usize].mass;
    dst[di as usize].km_bits = dst[di as usize].km_bits.min(src[si as usize].km_bits);
    dst[di as usize].k_bits = dst[di as usize].k_bits.min(src[si as usize].k_bits);
    for bit in 0..2 {
        let sc = src[si as usize].children[bit];
        if sc == NO_CHILD {
            continue;
        }
        let dc = match dst[di as usize].children[bit] {
            NO_CHILD => {
                let idx = dst.len() as u32;
                dst.push(TrieNode::empty());
                dst[di as usize].children[bit] = idx;
                idx
            }
            c => c,
        };
        merge_node(dst, dc, src, sc);
    }
}

/// Run every program of 1..=`l_max` opcodes and aggregate. Work is sharded
/// by leading opcode across threads; shards are merged in a fixed order so
/// the result is byte-identical regardless of worker count.
pub fn enumerate(opt: &EnumerateOptions) -> Result<EnumerationTable> {
    if opt.l_max == 0 {
        return Err(Error::Domain("enumeration needs l_max >= 1".into()));
    }
    if opt.l_max > L_MAX_CEILING {
        return Err(Error::Resource(format!(
            "enumeration over 8^{} programs exceeds the supported budget (l_max <= {})",
            opt.l_max, L_MAX_CEILING
        )));
    }
    if opt.max_output == 0 {
        return Err(Error::Domain("max_output must be at least 1".into()));
    }
    let shards: Vec<ShardAcc> = (0..OPCODE_COUNT)
        .into_par_iter()
        .map(|first| {
            let mut acc = ShardAcc::new(opt.keep_programs);
            let mut scratch = VmScratch::new();
            let mut ops = vec![Opcode::from_digit(first).unwrap()];
            visit(&mut ops, -1, false, opt, &mut acc, &mut scratch);
            acc
        })
        .collect();

    let mut table = EnumerationTable {
        machine_version: MACHINE_VERSION.to_string(),
        l_max: opt.l_max,
        t_max: opt.t_max,
        max_output: opt.max_output,
        valid_programs: 0,
        invalid_programs: 0,
        halted_programs: 0,
        nonempty_output_programs: 0,
        kraft_halting_scaled: 0,
        nodes: vec![TrieNode::empty()],
        records: opt.keep_programs.then(Vec::new),
    };
    for acc in shards {
        table.valid_programs += acc.valid;
        table.invalid_programs += acc.invalid;
        table.halted_programs += acc.halted;
        table.nonempty_output_programs += acc.nonempty;
        table.kraft_halting_scaled += acc.kraft_scaled;
        merge_node(&mut table.nodes, 0, &acc.nodes, 0);
        if let (Some(all), Some(part)) = (&mut table.records, acc.records) {
            all.extend(part);
        }
    }
    Ok(table)
}

impl EnumerationTable {
    /// log2 of the integer scale applied to all stored weights.
    pub fn scale_log2(&self) -> u32 {
        BITS_PER_OPCODE * self.l_max
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn node_at(&self, x: &[u8]) -> Option<u32> {
        let mut node = 0u32;
        for &b in x {
            if b > 1 {
                return None;
            }
            match self.nodes[node as usize].children[b as usize] {
                NO_CHILD => return None,
                c => node = c,
            }
        }
        Some(node)
    }

    /// Mixture weight reaching `x`, scaled by `2^{3 l_max}`; 0 if no valid
    /// program prints `x`.
    pub fn mass_scaled(&self, x: &[u8]) -> u64 {
        self.node_at(x).map_or(0, |n| self.nodes[n as usize].mass)
    }

    pub fn mass(&self, x: &[u8]) -> Rat {
        Rat::new(
            self.mass_scaled(x).into(),
            BigInt::from(1u8) << (self.scale_log2() as usize),
        )
    }

    pub fn mass_f64(&self, x: &[u8]) -> f64 {
        self.mass_scaled(x) as f64 / (self.scale_log2() as f64).exp2()
    }

    /// Fewest program bits printing a string starting with `x`, if any.
    pub fn km_bits(&self, x: &[u8]) -> Option<u32> {
        let b = self.nodes[self.node_at(x)? as usize].km_bits;
        (b != INF_BITS).then_some(b)
    }

    /// Fewest program bits printing exactly `x` and halting, if any.
    pub fn k_bits(&self, x: &[u8]) -> Option<u32> {
        let b = self.nodes[self.node_at(x)? as usize].k_bits;
        (b != INF_BITS).then_some(b)
    }

    /// Kraft sum over minimal halting programs, exact.
    pub fn kraft_halting(&self) -> Rat {
        Rat::new(
            self.kraft_halting_scaled.into(),
            BigInt::from(1u8) << (self.scale_log2() as usize),
        )
    }

    pub fn records(&self) -> Result<&[ProgramRecord]> {
        self.records.as_deref().ok_or_else(|| {
            Error::Domain(
                "enumeration ran without per-program records; rerun with keep_programs".into(),
            )
        })
    }

    /// Per-program CSV: `program,length_bits,halted,output_prefix`.
    pub fn records_csv(&self) -> Result<String> {
        let mut out = String::from("program,length_bits,halted,output_prefix\n");
        for r in self.records()? {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.octal,
                r.bit_len,
                r.status == RunStatus::Halted,
                r.output
            ));
        }
        Ok(out)
    }

    /// One-step predictive distribution at `x`, with the weight that stops
    /// dead at `x` reported as a deficit.
    pub fn predict(&self, x: &[u8]) -> Result<Prediction> {
        let node = self
            .node_at(x)
            .filter(|&n| self.nodes[n as usize].mass > 0)
            .ok_or_else(|| {
                Error::ZeroProbability(format!(
                    "no program of {} or fewer opcodes prints {:?}",
                    self.l_max,
                    x.iter().map(|b| b.to_string()).collect::<String>()
                ))
            })?;
        let mass = self.nodes[node as usize].mass as f64;
        let p: Vec<f64> = (0..2u8)
            .map(|b| match self.nodes[node as usize].children[b as usize] {
                NO_CHILD => 0.0,
                c => self.nodes[c as usize].mass as f64 / mass,
            })
            .collect();
        let deficit = (1.0 - p[0] - p[1]).max(0.0);
        Ok(Prediction { p, deficit })
    }

    /// Exact structural checks over every stored string: child masses never
    /// exceed the parent's, per-string mass stays within Kraft scale, every
    /// reachable node carries positive mass and a finite shortest-program
    /// length consistent with its mass, and exact-halting lengths are never
    /// shorter than running ones.
    pub fn check_invariants(&self) -> Result<TableInvariantReport> {
        let scale = 1u64 << self.scale_log2();
        if self.kraft_halting_scaled > scale {
            return Err(Error::Invariant("halting Kraft sum exceeds one".into()));
        }
        let mut stack: Vec<(u32, u32)> = vec![(0, 0)];
        let mut nodes = 0u64;
        let mut max_ratio = 0.0f64;
        while let Some((i, parent_km)) = stack.pop() {
            nodes += 1;
            let n = &self.nodes[i as usize];
            // Extending a string can only lengthen its shortest achiever.
            if n.km_bits < parent_km {
                return Err(Error::Invariant(
                    "shortest-achiever length dropped along an extension".into(),
                ));
            }
            if n.mass == 0 || n.mass > scale {
                return Err(Error::Invariant(format!(
                    "string mass {} outside (0, {scale}]",
                    n.mass
                )));
            }
            if n.km_bits == INF_BITS || n.km_bits > self.scale_log2() {
                return Err(Error::Invariant(
                    "reachable string lacks a witness program".into(),
                ));
            }
            // A weight-2^{-km} minimal achiever contributes to this node.
            if n.mass < 1u64 << (self.scale_log2() - n.km_bits) {
                return Err(Error::Invariant(
                    "string mass below its shortest witness's weight".into(),
                ));
            }
            if n.k_bits < n.km_bits {
                return Err(Error::Invariant(
                    "exact-halting program shorter than shortest achiever".into(),
                ));
            }
            let mut child_sum = 0u64;
            for bit in 0..2 {
                if n.children[bit] != NO_CHILD {
                    stack.push((n.children[bit], n.km_bits));
                    child_sum += self.nodes[n.children[bit] as usize].mass;
                }
            }
            if child_sum > n.mass {
                return Err(Error::Invariant(format!(
                    "children mass {child_sum} exceeds parent mass {}",
                    n.mass
                )));
            }
            max_ratio = max_ratio.max(child_sum as f64 / n.mass as f64);
        }
        Ok(TableInvariantReport {
            nodes,
            max_child_ratio: max_ratio,
        })
    }

    /// Check, along every root-to-node path, that the accumulated one-step
    /// prediction error `sum_t (1 - mass(x_{1:t})/mass(x_{1:t-1}))` stays
    /// below `km_bits * ln 2` for the path's endpoint.
    pub fn km_bound_check(&self) -> Result<KmBoundReport> {
        let mut report = KmBoundReport {
            nodes: 0,
            min_margin_nats: f64::INFINITY,
        };
        let mut stack: Vec<(u32, f64)> = vec![(0, 0.0)];
        while let Some((i, err_sum)) = stack.pop() {
            report.nodes += 1;
            let n = &self.nodes[i as usize];
            let bound = n.km_bits as f64 * std::f64::consts::LN_2;
            let margin = bound - err_sum;
            if margin < -1e-9 {
                return Err(Error::Invariant(format!(
                    "cumulative prediction error {err_sum} exceeds shortest-program bound {bound}"
                )));
            }
            report.min_margin_nats = report.min_margin_nats.min(margin);
            for bit in 0..2 {
                if n.children[bit] != NO_CHILD {
                    let c = n.children[bit] as usize;
                    let ratio = self.nodes[c].mass as f64 / n.mass as f64;
                    stack.push((n.children[bit], err_sum + (1.0 - ratio)));
                }
            }
        }
        Ok(report)
    }

    /// Every stored string of length at most `max_len` in depth-first order
    /// (zeros before ones), with its aggregates.
    pub fn string_rows(&self, max_len: usize) -> Vec<StringRow> {
        let mut out = Vec::new();
        let mut stack: Vec<(u32, Vec<u8>)> = vec![(0, Vec::new())];
        while let Some((i, x)) = stack.pop() {
            let n = &self.nodes[i as usize];
            out.push(StringRow {
                x: x.clone(),
                mass_scaled: n.mass,
                km_bits: (n.km_bits != INF_BITS).then_some(n.km_bits),
                k_bits: (n.k_bits != INF_BITS).then_some(n.k_bits),
            });
            if x.len() < max_len {
                for bit in (0..2u8).rev() {
                    let c = n.children[bit as usize];
                    if c != NO_CHILD {
                        let mut xs = x.clone();
                        xs.push(bit);
                        stack.push((c, xs));
                    }
                }
            }
        }
        out
    }

    pub fn matches(&self, opt: &EnumerateOptions) -> bool {
        self.machine_version == MACHINE_VERSION
            && self.l_max == opt.l_max
            && self.t_max == opt.t_max
            && self.max_output == opt.max_output
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)?;
        crate::fsio::write_atomic(path, &bytes)
    }

    /// Load a cached table, rejecting files from other machine versions or
    /// budgets (stale caches are recomputed, not trusted).
    pub fn load(path: &Path, opt: &EnumerateOptions) -> Result<EnumerationTable> {
        let bytes = std::fs::read(path)?;
        let table: EnumerationTable = serde_json::from_slice(&bytes)?;
        if !table.matches(opt) {
            return Err(Error::Resource(format!(
                "cached table {} (version {}, l_max {}, t_max {}, max_output {}) does not match \
                 the requested budget",
                path.display(),
                table.machine_version,
                table.l_max,
                table.t_max,
                table.max_output
            )));
        }
        if table.nodes.is_empty() {
            return Err(Error::Invariant("cached table has no root node".into()));
        }
        for n in &table.nodes {
            for c in n.children {
                if c != NO_CHILD && c as usize >= table.nodes.len() {
                    return Err(Error::Invariant(
                        "cached table has a dangling child index".into(),
                    ));
                }
            }
        }
        Ok(table)
    }
}

/// Conventional cache file name for a budget.
pub fn cache_file_name(opt: &EnumerateOptions) -> String {
    format!(
        "enum_v1_L{}_T{}_O{}.json",
        opt.l_max, opt.t_max, opt.max_output
    )
}

/// Load the table from `dir` if a fresh cache exists, else enumerate and
/// cache. Note per-program records are never cached.
pub fn enumerate_cached(opt: &EnumerateOptions, dir: &Path) -> Result<EnumerationTable> {
    let path = dir.join(cache_file_name(opt));
    if !opt.keep_programs && path.is_file() {
        if let Ok(table) = EnumerationTable::load(&path, opt) {
            return Ok(table);
        }
    }
    let table = enumerate(opt)?;
    if !opt.keep_programs {
        std::fs::create_dir_all(dir)?;
        table.save(&path)?;
    }
    Ok(table)
}

/// The enumeration table as a one-step predictor over bits.
pub struct MachinePredictor<'a> {
    table: &'a EnumerationTable,
}

impl<'a> MachinePredictor<'a> {
    pub fn new(table: &'a EnumerationTable) -> MachinePredictor<'a> {
        MachinePredictor { table }
    }
}

struct MachineCursor<'a> {
    table: &'a EnumerationTable,
    node: u32,
}

impl PredictorCursor for MachineCursor<'_> {
    fn dist_into(&mut self, out: &mut [f64]) -> Result<()> {
        let n = &self.table.nodes[self.node as usize];
        if n.mass == 0 {
            return Err(Error::ZeroProbability(
                "predictor reached a massless string".into(),
            ));
        }
        for (slot, &child) in out.iter_mut().zip(&n.children) {
            *slot = match child {
                NO_CHILD => 0.0,
                c => self.table.nodes[c as usize].mass as f64 / n.mass as f64,
            };
        }
        Ok(())
    }

    fn advance(&mut self, a: u8) -> Result<()> {
        match self.table.nodes[self.node as usize].children[a as usize] {
            NO_CHILD => Err(Error::ZeroProbability(
                "observed a continuation no enumerated program prints".into(),
            )),
            c => {
                self.node = c;
                Ok(())
            }
        }
    }
}

impl Predictor for MachinePredictor<'_> {
    fn alphabet_size(&self) -> usize {
        2
    }

    fn start(&self) -> Result<Box<dyn PredictorCursor + '_>> {
        Ok(Box::new(MachineCursor {
            table: self.table,
            node: 0,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn table(l_max: u32, t_max: u64) -> EnumerationTable {
        enumerate(&EnumerateOptions::new(l_max, t_max)).unwrap()
    }

    #[test]
    fn single_opcode_census() {
        let t = table(1, 100);
        // Of the 8 one-opcode programs only the two brackets are unbalanced.
        assert_eq!(t.valid_programs, 6);
        assert_eq!(t.invalid_programs, 2);
        assert_eq!(t.halted_programs, 1);
        assert_eq!(t.nonempty_output_programs, 1);
        assert_eq!(t.mass(&[]), Rat::new(3.into(), 4.into()));
        assert_eq!(t.mass_scaled(&[0]), 1); // only `o`, weight 1/8 scaled by 8
        assert_eq!(t.mass_scaled(&[1]), 0);
        assert_eq!(t.km_bits(&[]), Some(3));
        assert_eq!(t.k_bits(&[]), Some(3)); // `h`
        assert_eq!(t.k_bits(&[0]), None); // `o` never halts
        assert_eq!(t.kraft_halting(), Rat::new(1.into(), 8.into()));
    }

    #[test]
    fn shortest_printers_of_one() {
        let t = table(2, 100);
        assert_eq!(t.k_bits(&[1]), None); // two opcodes cannot print 1 and halt
        assert_eq!(t.k_bits(&[0]), Some(6)); // `oh`
        let t = table(3, 100);
        assert_eq!(t.k_bits(&[1]), Some(9)); // `^oh`
        assert_eq!(t.km_bits(&[1]), Some(6)); // `^o` runs on
    }

    #[test]
    fn looping_printer_reaches_long_runs_of_ones() {
        let t = table(4, 500);
        let ones = vec![1u8; 32];
        let km = t.km_bits(&ones).unwrap();
        assert_eq!(km, 12); // ^[o]
        assert!(t.mass_scaled(&ones) >= 1u64 << (t.scale_log2() - km));
        assert_eq!(t.km_bits(&[1u8; 166]).unwrap(), 12);
        assert_eq!(t.node_at(&[1u8; 167]), None); // budget 500 stops at 166
    }

    #[test]
    fn structural_invariants_hold_exhaustively() {
        for (l, tm) in [(1, 50), (2, 50), (3, 100), (4, 500)] {
            let t = table(l, tm);
            let rep = t.check_invariants().unwrap();
            assert!(rep.nodes >= 1);
            assert!(rep.max_child_ratio <= 1.0);
            let bound = t.km_bound_check().unwrap();
            assert!(bound.min_margin_nats >= 0.0);
            assert_eq!(bound.nodes, rep.nodes);
        }
    }

    #[test]
    fn budget_growth_is_monotone() {
        // More steps never shrink output or un-halt a program; exhaustive
        // over all programs of up to 3 opcodes.
        let mut scratch = VmScratch::new();
        let mut ops: Vec<Opcode> = Vec::new();
        fn walk(ops: &mut Vec<Opcode>, scratch: &mut VmScratch) {
            if !ops.is_empty() {
                let short = run_opcodes(ops, 10, 256, scratch);
                let long = run_opcodes(ops, 50, 256, scratch);
                assert_eq!(
                    short.status == RunStatus::Invalid,
                    long.status == RunStatus::Invalid
                );
                if short.status != RunStatus::Invalid {
                    assert!(long.output.starts_with(&short.output));
                    assert!(long.emitted >= short.emitted);
                    match short.status {
                        RunStatus::Halted | RunStatus::Running => {
                            assert_eq!(short.status, long.status);
                            assert_eq!(short.output, long.output);
                            assert_eq!(short.steps, long.steps);
                        }
                        RunStatus::BudgetExhausted => assert!(long.steps >= short.steps),
                        RunStatus::Invalid => unreachable!(),
                    }
                }
            }
            if ops.len() < 3 {
                for d in 0..OPCODE_COUNT {
                    ops.push(Opcode::from_digit(d).unwrap());
                    walk(ops, scratch);
                    ops.pop();
                }
            }
        }
        walk(&mut ops, &mut scratch);
    }

    #[test]
    fn sharded_run_matches_single_threaded() {
        // Same table regardless of worker count.
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let opt = EnumerateOptions {
            keep_programs: true,
            ..EnumerateOptions::new(3, 100)
        };
        let a = pool1.install(|| enumerate(&opt)).unwrap();
        let b = pool4.install(|| enumerate(&opt)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.records_csv().unwrap(), b.records_csv().unwrap());
    }

    #[test]
    fn records_cover_every_program_in_prefix_order() {
        let opt = EnumerateOptions {
            keep_programs: true,
            ..EnumerateOptions::new(2, 50)
        };
        let t = enumerate(&opt).unwrap();
        let recs = t.records().unwrap();
        assert_eq!(recs.len(), 8 + 64);
        assert_eq!(recs[0].octal, "0");
        assert_eq!(recs[1].octal, "00");
        let csv = t.records_csv().unwrap();
        assert!(csv.starts_with("program,length_bits,halted,output_prefix\n"));
        assert!(csv.contains("36,6,true,0\n")); // `oh`
        let no_recs = table(2, 50);
        assert!(no_recs.records_csv().is_err());
    }

    #[test]
    fn prediction_reads_mass_ratios() {
        let t = table(4, 500);
        let pred = t.predict(&[1, 1]).unwrap();
        let m = t.mass_scaled(&[1, 1]) as f64;
        assert_eq!(pred.p[1], t.mass_scaled(&[1, 1, 1]) as f64 / m);
        assert_eq!(pred.p[0], t.mass_scaled(&[1, 1, 0]) as f64 / m);
        assert!((pred.deficit - (1.0 - pred.p[0] - pred.p[1])).abs() < 1e-15);
        assert!(t.predict(&[0u8; 200]).is_err());
    }

    #[test]
    fn predictor_cursor_matches_table_lookups() {
        let t = table(4, 500);
        let pred = MachinePredictor::new(&t);
        let mut cur = pred.start().unwrap();
        let mut buf = [0.0f64; 2];
        let mut x = Vec::new();
        for bit in [1u8, 1, 1] {
            cur.dist_into(&mut buf).unwrap();
            let direct = t.predict(&x).unwrap();
            assert_eq!(buf.to_vec(), direct.p);
            cur.advance(bit).unwrap();
            x.push(bit);
        }
        // Walking off the trie is a zero-probability event.
        let mut cur = pred.start().unwrap();
        for _ in 0..200 {
            if cur.advance(0).is_err() {
                return;
            }
        }
        panic!("expected the all-zeros path to die within 200 steps");
    }

    #[test]
    fn cache_round_trip_and_stale_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let opt = EnumerateOptions::new(2, 60);
        let t = enumerate(&opt).unwrap();
        let path = dir.path().join(cache_file_name(&opt));
        t.save(&path).unwrap();
        let loaded = EnumerationTable::load(&path, &opt).unwrap();
        assert_eq!(
            serde_json::to_string(&t).unwrap(),
            serde_json::to_string(&loaded).unwrap()
        );
        let stale = EnumerateOptions::new(2, 61);
        assert!(matches!(
            EnumerationTable::load(&path, &stale),
            Err(Error::Resource(_))
        ));

        let cached = enumerate_cached(&opt, dir.path()).unwrap();
        assert_eq!(cached.valid_programs, t.valid_programs);
        let fresh_budget = EnumerateOptions::new(2, 61);
        let recomputed = enumerate_cached(&fresh_budget, dir.path()).unwrap();
        assert_eq!(recomputed.t_max, 61);
    }

    #[test]
    fn growing_the_budget_is_monotone_on_the_table() {
        // More opcodes or more steps: mass never shrinks, shortest-program
        // lengths never grow, for every string of the smaller table.
        let pairs = [((2u32, 50u64), (3u32, 50u64)), ((3, 10), (3, 50))];
        for ((l_a, t_a), (l_b, t_b)) in pairs {
            let small = table(l_a, t_a);
            let big = table(l_b, t_b);
            for row in small.string_rows(usize::MAX) {
                assert!(big.mass(&row.x) >= small.mass(&row.x), "{:?}", row.x);
                let le = |a: Option<u32>, b: Option<u32>| match (a, b) {
                    (None, _) => true,
                    (Some(_), None) => false,
                    (Some(a), Some(b)) => b <= a,
                };
                assert!(le(row.km_bits, big.km_bits(&row.x)), "{:?}", row.x);
                assert!(le(row.k_bits, big.k_bits(&row.x)), "{:?}", row.x);
            }
        }
    }

    #[test]
    fn string_rows_cover_depths_in_order() {
        let t = table(2, 50);
        let rows = t.string_rows(1);
        assert_eq!(rows[0].x, Vec::<u8>::new());
        assert!(rows.iter().all(|r| r.x.len() <= 1));
        assert!(rows.iter().all(|r| r.mass_scaled > 0));
        let deep = t.string_rows(usize::MAX);
        assert!(deep.len() >= rows.len());
    }

    #[test]
    fn budget_guards() {
        assert!(matches!(
            enumerate(&EnumerateOptions::new(11, 10)),
            Err(Error::Resource(_))
        ));
        assert!(matches!(
            enumerate(&EnumerateOptions::new(0, 10)),
            Err(Error::Domain(_))
        ));
        let bad = EnumerateOptions {
            max_output: 0,
            ..EnumerateOptions::new(1, 10)
        };
        assert!(matches!(enumerate(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn mass_accessors_agree() {
        let t = table(3, 100);
        let x = [0u8];
        let exact = t.mass(&x);
        let approx = t.mass_f64(&x);
        assert!((exact.to_f64().unwrap() - approx).abs() < 1e-15);
        assert_eq!(
            t.mass(&[1, 1, 1, 1, 1, 1, 1, 1, 1]),
            Rat::new(0.into(), 1.into())
        );
    }
}
