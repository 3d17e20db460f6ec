//! Experiment runner: wires configs to the library, writes CSV artifacts and
//! a JSON manifest, and compares runs against golden files.
//!
//! Determinism contract: with `exact` arithmetic the CSV bytes are a pure
//! function of (config, seed, code version). Monte-Carlo paths are seeded
//! and block-deterministic, so float CSVs are reproducible too; only the
//! manifest's timing fields vary between runs.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use num_traits::One;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{
    BoundsConfig, ConfirmConfig, ContinuousConfig, ExperimentConfig, InvarianceConfig,
    PredictConfig, UniversalConfig,
};
use crate::conjugate::{
    laplace_predict, uniform_confirm_all_ones, uniform_confirm_eps, Counts, MixedPrior,
};
use crate::divergence::{
    continuous_bound_check, exact_divergence_iid, mc_divergence, IidMixtureEvidence,
    MixturePredictor,
};
use crate::error::{Error, Result};
use crate::fsio::{sha256_hex, write_atomic};
use crate::machine::{
    enumerate, enumerate_cached, invariance_report, EnumerateOptions, EnumerationTable,
};
use crate::numeric::{format_rational, ln_rat, rat_to_f64, rat_u, Rat};

/// Run-level knobs from the command line, applied on top of the config.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub exact: bool,
    /// Directory for enumeration-table caches; no caching when absent.
    pub cache_dir: Option<PathBuf>,
    pub l_max_override: Option<u32>,
    pub t_max_override: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> RunOptions {
        RunOptions {
            out_dir: PathBuf::from("out"),
            seed: 0,
            exact: true,
            cache_dir: None,
            l_max_override: None,
            t_max_override: None,
        }
    }
}

/// Provenance record written next to the artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub arithmetic: String,
    pub seed: u64,
    pub config_sha256: String,
    pub code_version: String,
    pub machine_version: String,
    pub budgets: serde_json::Value,
    /// File names (relative to the manifest's directory) of the artifacts.
    pub outputs: Vec<String>,
    pub invariants_passed: bool,
    pub started_unix_s: u64,
    pub elapsed_ms: u64,
    pub summary: serde_json::Value,
}

struct Emitter<'a> {
    dir: &'a Path,
    exact: bool,
    outputs: Vec<String>,
}

impl Emitter<'_> {
    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut text = String::new();
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            text.push_str(&row.join(","));
            text.push('\n');
        }
        write_atomic(&self.dir.join(name), text.as_bytes())?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Render an exact rational either verbatim or as a float, per mode.
    fn num(&self, r: &Rat) -> String {
        if self.exact {
            format_rational(r)
        } else {
            format!("{}", rat_to_f64(r))
        }
    }
}

fn f(v: f64) -> String {
    format!("{v}")
}

fn opt_u32(v: Option<u32>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

/// Run one experiment, write its artifacts plus `manifest.json` into
/// `opts.out_dir`, and return the manifest. Violated assertions surface as
/// `Error::Invariant` carrying the inequality and the offending values.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    config_text: &str,
    opts: &RunOptions,
) -> Result<RunManifest> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
        .as_secs();
    let clock = Instant::now();
    let mut emitter = Emitter {
        dir: &opts.out_dir,
        exact: opts.exact,
        outputs: Vec::new(),
    };
    let (budgets, summary) = match cfg {
        ExperimentConfig::Confirm(c) => run_confirm(c, &mut emitter)?,
        ExperimentConfig::Bounds(c) => run_bounds(c, opts, &mut emitter)?,
        ExperimentConfig::Continuous(c) => run_continuous(c, &mut emitter)?,
        ExperimentConfig::Universal(c) => run_universal(c, opts, &mut emitter)?,
        ExperimentConfig::Invariance(c) => run_invariance(c, &mut emitter)?,
        ExperimentConfig::Predict(c) => run_predict(c, opts, &mut emitter)?,
    };
    let manifest = RunManifest {
        experiment: cfg.kind().name().to_string(),
        arithmetic: if opts.exact { "exact" } else { "float" }.to_string(),
        seed: opts.seed,
        config_sha256: sha256_hex(config_text.as_bytes()),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        machine_version: crate::machine::MACHINE_VERSION.to_string(),
        budgets,
        outputs: emitter.outputs,
        invariants_passed: true,
        started_unix_s: started,
        elapsed_ms: clock.elapsed().as_millis() as u64,
        summary,
    };
    write_atomic(
        &opts.out_dir.join("manifest.json"),
        &serde_json::to_vec_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

type ExperimentOutput = (serde_json::Value, serde_json::Value);

/// Posterior-confirmation table after observing `1^n`, n = 0..=n_max.
///
/// Columns: the tail hypothesis "bias > 1-eps", next-symbol predictions
/// under the uniform and the atom-carrying prior, the probability that all
/// future symbols are one under both priors, and the mixed prior's
/// probability of a zero next.
fn run_confirm(c: &ConfirmConfig, em: &mut Emitter) -> Result<ExperimentOutput> {
    let mixed = MixedPrior::new(Rat::one(), c.atom_mass.clone())?;
    let one_minus_eps = Rat::one() - &c.eps;
    // The tail posterior is 1 - (1-eps)^{n+1}. The power is advanced row by
    // row as a pair of coprime integers (a rational type would re-reduce a
    // growing gcd per row), and its cells are formatted directly: both parts
    // stay coprime, so the string is already canonical.
    let (base_n, base_d) = (one_minus_eps.numer().clone(), one_minus_eps.denom().clone());
    let (mut tail_n, mut tail_d) = (base_n.clone(), base_d.clone());
    let base_f = rat_to_f64(&one_minus_eps);
    let mut tail_f = base_f;
    let mut rows = Vec::with_capacity(c.n_max as usize + 1);
    for n in 0..=c.n_max {
        let p_eps_cell = if em.exact {
            format!("{}/{}", &tail_d - &tail_n, tail_d)
        } else {
            format!("{}", 1.0 - tail_f)
        };
        let counts = Counts::binary(0, n);
        let next_uniform = laplace_predict(&counts)?;
        let next_mixed = mixed.predict(&counts)?;
        let all_uniform = uniform_confirm_all_ones(n);
        let all_mixed = mixed.confirm_all_ones(n)?;
        if n < 16 || (n.is_power_of_two() && n <= 1024) || (n == c.n_max && c.n_max <= 2048) {
            // Spot-check the running power against the closed form; larger
            // horizons are skipped because the closed-form call reduces a
            // huge rational. The running value is the same exact integer
            // power either way.
            let direct = uniform_confirm_eps(n, &c.eps)?;
            if direct.numer() != &(&tail_d - &tail_n) || direct.denom() != &tail_d {
                return Err(Error::Invariant(format!(
                    "tail posterior mismatch at n={n}: running {p_eps_cell} vs closed form {direct}"
                )));
            }
        }
        if &next_mixed[0] + &next_mixed[1] != Rat::one() {
            return Err(Error::Invariant(format!(
                "mixed next-symbol probabilities do not sum to one at n={n}"
            )));
        }
        let expected_zero = Rat::one() / (rat_u(n + 2) * rat_u(n + 2));
        if c.atom_mass == crate::numeric::rat(1, 2) && next_mixed[0] != expected_zero {
            return Err(Error::Invariant(format!(
                "mixed zero-prediction at n={n} is {} but the half-atom closed form gives {}",
                next_mixed[0], expected_zero
            )));
        }
        if n == 999 && c.atom_mass == crate::numeric::rat(1, 2) {
            let threshold = crate::numeric::rat(999, 1000);
            if all_mixed <= threshold {
                return Err(Error::Invariant(format!(
                    "all-ones posterior {} at n=999 does not exceed 999/1000",
                    all_mixed
                )));
            }
        }
        rows.push(vec![
            n.to_string(),
            p_eps_cell,
            em.num(&next_uniform[1]),
            em.num(&next_mixed[1]),
            em.num(&all_uniform),
            em.num(&all_mixed),
            em.num(&next_mixed[0]),
        ]);
        tail_n *= &base_n;
        tail_d *= &base_d;
        tail_f *= base_f;
    }
    em.csv(
        "confirm.csv",
        &[
            "n",
            "p_eps_tail",
            "p_next_one_uniform",
            "p_next_one_mixed",
            "p_all_ones_uniform",
            "p_all_ones_mixed",
            "p_next_zero_mixed",
        ],
        &rows,
    )?;
    Ok((
        json!({"n_max": c.n_max, "eps": format_rational(&c.eps), "atom_mass": format_rational(&c.atom_mass)}),
        json!({"rows": rows.len()}),
    ))
}

/// Cumulative divergence of a finite i.i.d. mixture versus one component as
/// truth: exact count-vector dynamic program in exact mode (every n), seeded
/// Monte-Carlo on the grid of horizons in float mode.
fn run_bounds(c: &BoundsConfig, opts: &RunOptions, em: &mut Emitter) -> Result<ExperimentOutput> {
    let truth = &c.mixture.components()[c.truth_index];
    let bound_nats = -ln_rat(&c.mixture.weights()[c.truth_index]);
    let header = [
        "n",
        "D_n",
        "sum_e",
        "sum_h",
        "sum_a2",
        "sum_k",
        "bound",
        "satisfied",
    ];
    let budgets = json!({
        "mixture": c.mixture.spec_string(),
        "truth_index": c.truth_index,
        "n_max": c.n_max,
        "samples": if opts.exact { 0 } else { c.samples },
        "grid": c.grid,
    });
    if opts.exact {
        let evidence = IidMixtureEvidence::from_mixture(&c.mixture, c.n_max as u64).map_err(
            |e| Error::Domain(format!(
                "exact bounds need an i.i.d. mixture over a shared alphabet ({e}); rerun with --float"
            )),
        )?;
        let curve = exact_divergence_iid(truth, &evidence, c.n_max, bound_nats)?;
        curve.check_all_rows(1e-9, 1e-9)?;
        let rows: Vec<Vec<String>> = (0..curve.n_grid.len())
            .map(|i| {
                vec![
                    curve.n_grid[i].to_string(),
                    f(curve.d_n[i]),
                    f(curve.sum_e[i]),
                    f(curve.sum_h[i]),
                    f(curve.sum_a2[i]),
                    f(curve.sum_k[i]),
                    f(curve.bound[i]),
                    curve.row_satisfied(i, 1e-9, 1e-9).to_string(),
                ]
            })
            .collect();
        em.csv("bounds.csv", &header, &rows)?;
        let final_i = curve.n_grid.len() - 1;
        Ok((
            budgets,
            json!({
                "bound_nats": bound_nats,
                "final_d_n": curve.d_n[final_i],
                "final_sum_h": curve.sum_h[final_i],
            }),
        ))
    } else {
        let predictor = MixturePredictor::new(&c.mixture);
        let mc = mc_divergence(truth, &predictor, &c.grid, c.samples, opts.seed, bound_nats)?;
        let rows: Vec<Vec<String>> = (0..mc.curve.n_grid.len())
            .map(|i| {
                let within = mc.curve.d_n[i] <= mc.curve.bound[i] + 3.0 * mc.stderr_d[i];
                vec![
                    mc.curve.n_grid[i].to_string(),
                    f(mc.curve.d_n[i]),
                    f(mc.curve.sum_e[i]),
                    f(mc.curve.sum_h[i]),
                    f(mc.curve.sum_a2[i]),
                    f(mc.curve.sum_k[i]),
                    f(mc.curve.bound[i]),
                    within.to_string(),
                ]
            })
            .collect();
        em.csv("bounds.csv", &header, &rows)?;
        Ok((
            budgets,
            json!({
                "bound_nats": bound_nats,
                "stderr_d": mc.stderr_d,
                "samples_used": mc.used,
                "samples_excluded": mc.excluded,
            }),
        ))
    }
}

/// Divergence against the mixture over the whole Bernoulli family, with the
/// curvature-based bound and the growth slope.
fn run_continuous(c: &ContinuousConfig, em: &mut Emitter) -> Result<ExperimentOutput> {
    let report = continuous_bound_check(&c.theta0, c.prior, &c.grid, c.slack_nats)?;
    for (i, &ok) in report.satisfied.iter().enumerate() {
        if !ok {
            return Err(Error::Invariant(format!(
                "divergence {} exceeds the curvature bound {} at n={}",
                report.d_n[i], report.bound[i], report.n_grid[i]
            )));
        }
    }
    let rows: Vec<Vec<String>> = (0..report.n_grid.len())
        .map(|i| {
            vec![
                report.n_grid[i].to_string(),
                f(report.d_n[i]),
                f(report.bound[i]),
                report.satisfied[i].to_string(),
            ]
        })
        .collect();
    em.csv("continuous.csv", &["n", "D_n", "bound", "satisfied"], &rows)?;
    Ok((
        json!({
            "theta0": format_rational(&c.theta0),
            "prior": format!("{:?}", c.prior).to_lowercase(),
            "grid": c.grid,
            "slack_nats": c.slack_nats,
        }),
        json!({"slope_vs_ln_n": report.slope}),
    ))
}

fn resolve_table(
    l_max: u32,
    t_max: u64,
    max_output: usize,
    keep_programs: bool,
    opts: &RunOptions,
) -> Result<(EnumerateOptions, EnumerationTable)> {
    let eopt = EnumerateOptions {
        l_max: opts.l_max_override.unwrap_or(l_max),
        t_max: opts.t_max_override.unwrap_or(t_max),
        max_output,
        keep_programs,
    };
    // Cached tables drop per-program records, so exports always re-enumerate.
    let table = match &opts.cache_dir {
        Some(dir) if !eopt.keep_programs => enumerate_cached(&eopt, dir)?,
        _ => enumerate(&eopt)?,
    };
    Ok((eopt, table))
}

/// Enumeration census, exact table invariants, per-string aggregates, and
/// the shortest-exact-printer trend for small integers.
fn run_universal(
    c: &UniversalConfig,
    opts: &RunOptions,
    em: &mut Emitter,
) -> Result<ExperimentOutput> {
    let (eopt, table) = resolve_table(c.l_max, c.t_max, c.max_output, c.export_programs, opts)?;
    let invariants = table.check_invariants()?;
    let km_report = table.km_bound_check()?;

    em.csv(
        "census.csv",
        &[
            "l_max",
            "t_max",
            "max_output",
            "programs",
            "valid",
            "invalid",
            "halted",
            "nonempty_output",
            "strings",
            "kraft_halting",
        ],
        &[vec![
            eopt.l_max.to_string(),
            eopt.t_max.to_string(),
            eopt.max_output.to_string(),
            (table.valid_programs + table.invalid_programs).to_string(),
            table.valid_programs.to_string(),
            table.invalid_programs.to_string(),
            table.halted_programs.to_string(),
            table.nonempty_output_programs.to_string(),
            table.node_count().to_string(),
            format_rational(&table.kraft_halting()),
        ]],
    )?;

    let string_rows: Vec<Vec<String>> = table
        .string_rows(c.strings_depth)
        .into_iter()
        .map(|r| {
            vec![
                r.x.len().to_string(),
                r.x.iter().map(|&b| char::from(b'0' + b)).collect(),
                r.mass_scaled.to_string(),
                opt_u32(r.km_bits),
                opt_u32(r.k_bits),
            ]
        })
        .collect();
    em.csv(
        "strings.csv",
        &["len", "x", "mass_scaled", "km_bits", "k_bits"],
        &string_rows,
    )?;

    // Shortest halting printers of binary expansions, next to the classical
    // log2 n + 2 log2 log2 n growth reference; a trend exhibit, no assertion
    // (the toy machine's constants are its own).
    let trend_rows: Vec<Vec<String>> = (1..=c.k_trend_max)
        .map(|n| {
            let bits: Vec<u8> = format!("{n:b}").bytes().map(|b| b - b'0').collect();
            let reference = if n >= 2 {
                f((n as f64).log2() + 2.0 * (n as f64).log2().log2())
            } else {
                String::new()
            };
            vec![
                n.to_string(),
                format!("{n:b}"),
                opt_u32(table.k_bits(&bits)),
                reference,
            ]
        })
        .collect();
    em.csv(
        "k_trend.csv",
        &["n", "binary", "k_bits", "reference_bits"],
        &trend_rows,
    )?;

    if c.export_programs {
        let csv = table.records_csv()?;
        write_atomic(&em.dir.join("programs.csv"), csv.as_bytes())?;
        em.outputs.push("programs.csv".to_string());
    }

    let ones16 = vec![1u8; 16];
    let p_one_after_16 = table.predict(&ones16).ok().map(|p| p.p[1]);
    Ok((
        json!({
            "l_max": eopt.l_max,
            "t_max": eopt.t_max,
            "max_output": eopt.max_output,
        }),
        json!({
            "strings": invariants.nodes,
            "max_child_mass_ratio": invariants.max_child_ratio,
            "km_bound_min_margin_nats": km_report.min_margin_nats,
            "kraft_halting": format_rational(&table.kraft_halting()),
            "p_one_after_16_ones": p_one_after_16,
        }),
    ))
}

/// Pushforward of the grid prior under a built-in reparameterization.
fn run_invariance(c: &InvarianceConfig, em: &mut Emitter) -> Result<ExperimentOutput> {
    let report = invariance_report(c.b_max, c.map)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                format_rational(&r.theta),
                format_rational(&r.pushforward),
                format_rational(&r.direct),
                f(r.ratio),
            ]
        })
        .collect();
    em.csv(
        "invariance.csv",
        &["theta", "pushforward", "direct", "ratio"],
        &rows,
    )?;
    Ok((
        json!({"b_max": c.b_max, "map": c.map.name()}),
        json!({
            "rows": report.rows.len(),
            "min_ratio": report.min_ratio,
            "max_ratio": report.max_ratio,
            "median_ratio": report.median_ratio,
            "skipped_out_of_grid": report.skipped_out_of_grid,
        }),
    ))
}

/// Step-by-step predictions of the enumeration mixture along a fixed bit
/// string, with the running one-step error checked against the
/// shortest-achiever bound at every prefix.
fn run_predict(c: &PredictConfig, opts: &RunOptions, em: &mut Emitter) -> Result<ExperimentOutput> {
    let (eopt, table) = resolve_table(c.l_max, c.t_max, c.max_output, false, opts)?;
    if c.x.len() > eopt.max_output {
        return Err(Error::Domain(format!(
            "sequence of {} bits exceeds the stored output length {}",
            c.x.len(),
            eopt.max_output
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    let mut rows = Vec::with_capacity(c.x.len());
    let mut cum = 0.0f64;
    for t in 1..=c.x.len() {
        let prefix = &c.x[..t - 1];
        let pred = table.predict(prefix).map_err(|e| {
            Error::ZeroProbability(format!("prefix of length {} has no mass: {e}", t - 1))
        })?;
        let sym = c.x[t - 1];
        let p_sym = pred.p[sym as usize];
        if p_sym <= 0.0 {
            return Err(Error::ZeroProbability(format!(
                "no enumerated program continues {:?} with {sym} at step {t}",
                prefix.iter().map(|b| b.to_string()).collect::<String>()
            )));
        }
        cum += 1.0 - p_sym;
        let km = table
            .km_bits(&c.x[..t])
            .expect("positive-probability continuation has a witness");
        let bound = km as f64 * ln2;
        if cum > bound + 1e-9 {
            return Err(Error::Invariant(format!(
                "cumulative one-step error {cum} exceeds the {km}-bit bound {bound} at step {t}"
            )));
        }
        rows.push(vec![
            t.to_string(),
            sym.to_string(),
            f(pred.p[0]),
            f(pred.p[1]),
            f(pred.deficit),
            f(p_sym),
            f(cum),
            km.to_string(),
            f(bound),
        ]);
    }
    em.csv(
        "predict.csv",
        &[
            "t",
            "symbol",
            "p_next_0",
            "p_next_1",
            "deficit",
            "p_of_symbol",
            "cum_one_minus_p",
            "km_bits",
            "km_bound_nats",
        ],
        &rows,
    )?;
    Ok((
        json!({"l_max": eopt.l_max, "t_max": eopt.t_max, "max_output": eopt.max_output}),
        json!({"steps": c.x.len(), "final_cum_one_minus_p": cum}),
    ))
}

/// Outcome of a golden comparison.
#[derive(Debug, Clone, Copy)]
pub struct CompareReport {
    pub files: usize,
    pub cells: u64,
}

enum CompareMode {
    Bytes,
    Tolerance(f64),
}

/// Compare a run's artifacts against a golden directory: byte-for-byte in
/// exact mode, per-cell with a numeric tolerance in float mode (or when a
/// tolerance is passed explicitly). The first differing cell is reported
/// with its file, row, and column.
pub fn compare_golden(
    manifest_path: &Path,
    golden_dir: &Path,
    tol_override: Option<f64>,
) -> Result<CompareReport> {
    let bytes = std::fs::read(manifest_path).map_err(|e| {
        Error::Domain(format!(
            "cannot read manifest {}: {e}",
            manifest_path.display()
        ))
    })?;
    let manifest: RunManifest = serde_json::from_slice(&bytes)?;
    let produced_dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mode = match tol_override {
        Some(t) => CompareMode::Tolerance(t),
        None if manifest.arithmetic == "exact" => CompareMode::Bytes,
        None => CompareMode::Tolerance(1e-9),
    };
    let mut cells = 0u64;
    for name in &manifest.outputs {
        let produced = std::fs::read_to_string(produced_dir.join(name))
            .map_err(|e| Error::Domain(format!("missing produced file {name}: {e}")))?;
        let golden = std::fs::read_to_string(golden_dir.join(name))
            .map_err(|e| Error::Domain(format!("missing golden file {name}: {e}")))?;
        if matches!(mode, CompareMode::Bytes) && produced == golden {
            cells += produced
                .lines()
                .map(|l| l.split(',').count() as u64)
                .sum::<u64>();
            continue;
        }
        cells += compare_csv(name, &produced, &golden, &mode)?;
    }
    Ok(CompareReport {
        files: manifest.outputs.len(),
        cells,
    })
}

/// Compare two CSV texts cell by cell without touching the filesystem:
/// byte equality when `tol` is `None`, otherwise numeric cells match within
/// `tol` relative to magnitude (floored at 1.0) and other cells must match
/// exactly. Returns the number of cells compared.
pub fn compare_csv_text(produced: &str, golden: &str, tol: Option<f64>) -> Result<u64> {
    let mode = match tol {
        Some(t) => CompareMode::Tolerance(t),
        None => CompareMode::Bytes,
    };
    compare_csv("csv", produced, golden, &mode)
}

fn compare_csv(name: &str, produced: &str, golden: &str, mode: &CompareMode) -> Result<u64> {
    let p_lines: Vec<&str> = produced.lines().collect();
    let g_lines: Vec<&str> = golden.lines().collect();
    let header: Vec<&str> = p_lines
        .first()
        .map(|h| h.split(',').collect())
        .unwrap_or_default();
    let mut cells = 0u64;
    for row in 0..p_lines.len().max(g_lines.len()) {
        let (p_line, g_line) = match (p_lines.get(row), g_lines.get(row)) {
            (Some(p), Some(g)) => (*p, *g),
            _ => {
                return Err(Error::Invariant(format!(
                    "{name}: produced has {} rows, golden has {} rows",
                    p_lines.len(),
                    g_lines.len()
                )))
            }
        };
        let p_cells: Vec<&str> = p_line.split(',').collect();
        let g_cells: Vec<&str> = g_line.split(',').collect();
        if p_cells.len() != g_cells.len() {
            return Err(Error::Invariant(format!(
                "{name} row {row}: produced has {} columns, golden has {}",
                p_cells.len(),
                g_cells.len()
            )));
        }
        for (col, (p, g)) in p_cells.iter().zip(&g_cells).enumerate() {
            cells += 1;
            // Byte-identical cells always match; the tolerance path only
            // decides cells that differ textually (and would otherwise trip
            // over inf - inf = NaN on equal infinities).
            let equal = p == g
                || match mode {
                    CompareMode::Bytes => false,
                    CompareMode::Tolerance(tol) => match (p.parse::<f64>(), g.parse::<f64>()) {
                        (Ok(a), Ok(b)) => {
                            (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
                                || (a.is_nan() && b.is_nan())
                        }
                        _ => false,
                    },
                };
            if !equal {
                let col_name = header.get(col).copied().unwrap_or("?");
                return Err(Error::Invariant(format!(
                    "{name} row {row}, column {col_name}: produced {p:?}, golden {g:?}"
                )));
            }
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, ExperimentKind};

    fn run_str(text: &str, kind: ExperimentKind, opts: &RunOptions) -> Result<RunManifest> {
        let cfg = parse_config(text, kind)?;
        run_experiment(&cfg, text, opts)
    }

    fn opts(dir: &Path) -> RunOptions {
        RunOptions {
            out_dir: dir.to_path_buf(),
            ..RunOptions::default()
        }
    }

    #[test]
    fn confirm_golden_tail_values() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[confirm]\nn_max = 10\n";
        let m = run_str(text, ExperimentKind::Confirm, &opts(dir.path())).unwrap();
        assert!(m.invariants_passed);
        let csv = std::fs::read_to_string(dir.path().join("confirm.csv")).unwrap();
        let last = csv.lines().last().unwrap();
        // At n=10: tail = 1 - (99/100)^11, next-one uniform 11/12, all-ones
        // mixed 11/12, zero-next 1/144.
        assert_eq!(
            last,
            "10,1046617457412835548901/10000000000000000000000,11/12,143/144,0,11/12,1/144"
        );
    }

    #[test]
    fn confirm_rerun_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let text = "[confirm]\nn_max = 25\neps = 1/7\n";
        run_str(text, ExperimentKind::Confirm, &opts(a.path())).unwrap();
        run_str(text, ExperimentKind::Confirm, &opts(b.path())).unwrap();
        let fa = std::fs::read(a.path().join("confirm.csv")).unwrap();
        let fb = std::fs::read(b.path().join("confirm.csv")).unwrap();
        assert_eq!(fa, fb);
    }

    #[test]
    fn bounds_exact_rows_all_satisfied() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[bounds]\nmixture = mix:[(bernoulli:3/10, 1/2), (bernoulli:7/10, 1/2)]\ntruth = bernoulli:3/10\nn_max = 40\n";
        let m = run_str(text, ExperimentKind::Bounds, &opts(dir.path())).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
        assert_eq!(csv.lines().count(), 41); // header + 40 rows
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")), "{csv}");
        assert_eq!(
            m.summary["bound_nats"].as_f64().unwrap(),
            std::f64::consts::LN_2
        );
    }

    #[test]
    fn bounds_float_mode_runs_mc() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[bounds]\nmixture = mix:[(bernoulli:3/10, 1/2), (bernoulli:7/10, 1/2)]\ntruth = bernoulli:3/10\nn_max = 30\nsamples = 3000\ngrid = [10, 30]\n";
        let o = RunOptions {
            exact: false,
            ..opts(dir.path())
        };
        let m = run_str(text, ExperimentKind::Bounds, &o).unwrap();
        assert_eq!(m.summary["samples_used"].as_u64().unwrap(), 3000);
        let csv = std::fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn bounds_exact_rejects_non_iid_with_hint() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[bounds]\nmixture = mix:[(markov:[[1/2,1/2],[1/2,1/2]], 1/2), (bernoulli:1/2, 1/2)]\ntruth = bernoulli:1/2\nn_max = 10\n";
        let err = run_str(text, ExperimentKind::Bounds, &opts(dir.path())).unwrap_err();
        assert!(err.to_string().contains("--float"), "{err}");
    }

    #[test]
    fn universal_artifacts_and_census() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[universal]\nlmax = 4\ntmax = 100\nexport_programs = true\nk_trend_max = 8\n";
        let m = run_str(text, ExperimentKind::Universal, &opts(dir.path())).unwrap();
        assert_eq!(
            m.outputs,
            vec!["census.csv", "strings.csv", "k_trend.csv", "programs.csv"]
        );
        let census = std::fs::read_to_string(dir.path().join("census.csv")).unwrap();
        let row = census.lines().nth(1).unwrap();
        assert!(
            row.starts_with("4,100,256,4680,1791,2889,821,651,"),
            "{row}"
        );
        let programs = std::fs::read_to_string(dir.path().join("programs.csv")).unwrap();
        assert_eq!(programs.lines().count(), 1 + 8 + 64 + 512 + 4096);
    }

    #[test]
    fn predict_walks_the_ones_path() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[predict]\nx = ones:20\nlmax = 5\ntmax = 200\n";
        let m = run_str(text, ExperimentKind::Predict, &opts(dir.path())).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("predict.csv")).unwrap();
        assert_eq!(csv.lines().count(), 21);
        let cum = m.summary["final_cum_one_minus_p"].as_f64().unwrap();
        assert!((0.0..=12.0 * std::f64::consts::LN_2).contains(&cum));
        // A sequence no program prints dies with a zero-probability error.
        let text = "[predict]\nx = bits:0000000000\nlmax = 3\ntmax = 50\n";
        let err = run_str(text, ExperimentKind::Predict, &opts(dir.path())).unwrap_err();
        assert!(matches!(err, Error::ZeroProbability(_)), "{err}");
    }

    #[test]
    fn compare_golden_self_and_perturbed() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[confirm]\nn_max = 5\n";
        run_str(text, ExperimentKind::Confirm, &opts(dir.path())).unwrap();
        let manifest = dir.path().join("manifest.json");

        // Self-comparison passes.
        let rep = compare_golden(&manifest, dir.path(), None).unwrap();
        assert_eq!(rep.files, 1);
        assert!(rep.cells > 0);

        // A perturbed cell is reported with row and column.
        let golden = tempfile::tempdir().unwrap();
        let original = std::fs::read_to_string(dir.path().join("confirm.csv")).unwrap();
        let perturbed = original.replace("6/7", "5/7");
        assert_ne!(perturbed, original);
        std::fs::write(golden.path().join("confirm.csv"), &perturbed).unwrap();
        let err = compare_golden(&manifest, golden.path(), None).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("confirm.csv") && msg.contains("column"),
            "{msg}"
        );

        // Tolerance mode treats equal-valued floats as matching.
        let golden2 = tempfile::tempdir().unwrap();
        std::fs::write(golden2.path().join("confirm.csv"), &original).unwrap();
        compare_golden(&manifest, golden2.path(), Some(1e-9)).unwrap();
    }

    #[test]
    fn continuous_short_run() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[continuous]\ntheta0 = 3/10\ngrid = [50, 100]\n";
        let m = run_str(text, ExperimentKind::Continuous, &opts(dir.path())).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("continuous.csv")).unwrap();
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
        assert!(m.summary["slope_vs_ln_n"].as_f64().unwrap().is_finite());
    }

    #[test]
    fn invariance_identity_run() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[invariance]\nmap = identity\nb_max = 8\n";
        let m = run_str(text, ExperimentKind::Invariance, &opts(dir.path())).unwrap();
        assert_eq!(m.summary["min_ratio"].as_f64().unwrap(), 1.0);
        assert_eq!(m.summary["max_ratio"].as_f64().unwrap(), 1.0);
    }
}
