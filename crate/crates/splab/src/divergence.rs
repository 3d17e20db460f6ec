//! Relative-entropy experiments: per-step distances between predictive
//! distributions, exact and Monte-Carlo estimates of the cumulative
//! divergence D_n(mu||xi) = E[ln mu(x_{1:n})/xi(x_{1:n})], and the
//! parametric-family bound with the Fisher information term.
//!
//! The exact path exploits exchangeability: when mu is i.i.d. and xi depends
//! on symbol counts only, expectations reduce to sums over count vectors
//! whose probabilities are carried as exact rationals (the transcendental
//! ln/sqrt steps are f64; every margin asserted downstream is macroscopic
//! relative to that precision). The Monte-Carlo path handles general
//! measures; samples are split into fixed blocks whose partial sums are
//! combined in block order, so results are independent of the worker count.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conjugate::{CountEvidence, Counts};
use crate::env::{DetGenerator, Environment};
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;
use crate::numeric::{ln_rat, log_sum_exp, ls_slope, rat_to_f64, substream_seed, Rat};

/// Distances between two one-step predictive distributions p and q:
/// squared Euclidean, Hellinger, absolute (total variation), and KL.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDistances {
    /// sum_a (p_a - q_a)^2, at most 2.
    pub e: f64,
    /// sum_a (sqrt(p_a) - sqrt(q_a))^2, at most 2.
    pub h: f64,
    /// (1/2) sum_a |p_a - q_a|, at most 1.
    pub a: f64,
    /// sum_a p_a ln(p_a/q_a) with 0 ln 0 = 0; +inf when q_a = 0 < p_a.
    pub k: f64,
    /// True when some p_a > 0 has q_a = 0, making k infinite.
    pub k_infinite: bool,
}

/// Compute the four distances. `p` must be a probability distribution; `q`
/// may be deficient (sum up to 1), as predictive slices of semimeasures are.
pub fn step_distances(p: &[f64], q: &[f64]) -> Result<StepDistances> {
    if p.len() != q.len() || p.len() < 2 {
        return Err(Error::Domain(format!(
            "distance between slices of lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    const TOL: f64 = 1e-9;
    if p.iter().any(|&v| !(0.0..=1.0 + TOL).contains(&v))
        || q.iter().any(|&v| !(0.0..=1.0 + TOL).contains(&v))
    {
        return Err(Error::Domain("distance arguments must lie in [0,1]".into()));
    }
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    if (sp - 1.0).abs() > TOL || sq > 1.0 + TOL {
        return Err(Error::Domain(format!(
            "first argument must sum to 1 (got {sp}); second may not exceed 1 (got {sq})"
        )));
    }
    let mut e = 0.0;
    let mut h = 0.0;
    let mut a = 0.0;
    let mut k = 0.0;
    let mut k_infinite = false;
    for (&pa, &qa) in p.iter().zip(q) {
        let diff = pa - qa;
        e += diff * diff;
        let sdiff = pa.sqrt() - qa.sqrt();
        h += sdiff * sdiff;
        a += 0.5 * diff.abs();
        if pa > 0.0 {
            if qa > 0.0 {
                k += pa * (pa / qa).ln();
            } else {
                k_infinite = true;
            }
        }
    }
    if k_infinite {
        k = f64::INFINITY;
    }
    debug_assert!((0.0..=2.0 + 1e-12).contains(&e));
    debug_assert!((0.0..=2.0 + 1e-12).contains(&h));
    debug_assert!((0.0..=1.0 + 1e-12).contains(&a));
    Ok(StepDistances {
        e,
        h,
        a,
        k,
        k_infinite,
    })
}

/// Divergence curve on a grid of horizons: D_n, cumulative expected step
/// distances, and the bound each row is compared against. `sum_a2`
/// accumulates 2 a_t^2 (the chain-compatible form of the absolute distance).
#[derive(Debug, Clone)]
pub struct DivergenceCurve {
    pub n_grid: Vec<usize>,
    pub d_n: Vec<f64>,
    pub sum_e: Vec<f64>,
    pub sum_h: Vec<f64>,
    pub sum_a2: Vec<f64>,
    pub sum_k: Vec<f64>,
    pub bound: Vec<f64>,
}

impl DivergenceCurve {
    /// Row check used by the exact path: cumulative e, h, 2a^2 sums lie
    /// below D_n, sum of KL steps reproduces D_n (chain rule), and D_n
    /// respects the bound when it is finite. `tol` absorbs f64 roundoff of
    /// exactly-weighted sums; the chain-rule equality gets `k_tol`.
    pub fn row_satisfied(&self, i: usize, tol: f64, k_tol: f64) -> bool {
        let d = self.d_n[i];
        let lower =
            self.sum_e[i] <= d + tol && self.sum_h[i] <= d + tol && self.sum_a2[i] <= d + tol;
        let chain = (self.sum_k[i] - d).abs() <= k_tol * d.abs().max(1.0);
        let upper = !self.bound[i].is_finite() || d <= self.bound[i] + tol;
        lower && chain && upper
    }

    /// Assert `row_satisfied` on every row, reporting the first violation.
    pub fn check_all_rows(&self, tol: f64, k_tol: f64) -> Result<()> {
        for i in 0..self.n_grid.len() {
            if !self.row_satisfied(i, tol, k_tol) {
                return Err(Error::Invariant(format!(
                    "divergence bound violated at n={}: D_n={}, sum_e={}, sum_h={}, \
                     sum_a2={}, sum_k={}, bound={}",
                    self.n_grid[i],
                    self.d_n[i],
                    self.sum_e[i],
                    self.sum_h[i],
                    self.sum_a2[i],
                    self.sum_k[i],
                    self.bound[i]
                )));
            }
        }
        Ok(())
    }
}

/// One-step predictor advanced symbol by symbol along a sequence.
pub trait PredictorCursor {
    /// Write the predictive distribution over the next symbol into `out`
    /// (length = alphabet size). May be deficient for semimeasures.
    fn dist_into(&mut self, out: &mut [f64]) -> Result<()>;
    fn advance(&mut self, a: u8) -> Result<()>;
}

/// Factory for predictor cursors; `Sync` so Monte-Carlo workers can share it.
pub trait Predictor: Sync {
    fn alphabet_size(&self) -> usize;
    fn start(&self) -> Result<Box<dyn PredictorCursor + '_>>;
}

/// Snapshot of an environment's conditional structure in f64, so sampling
/// loops avoid per-step rational work. Unlike the exact cursor this carries
/// no off-sequence flag for deterministic sources: callers either feed it
/// its own samples (always on-sequence) or let a zeroed posterior record the
/// mismatch permanently.
enum FloatEnv<'a> {
    Iid(Vec<f64>),
    Markov(Vec<Vec<f64>>),
    Det { gen: &'a DetGenerator },
}

impl<'a> FloatEnv<'a> {
    fn new(env: &'a Environment) -> FloatEnv<'a> {
        match env {
            Environment::Bernoulli { p1 } => {
                let p = rat_to_f64(p1);
                FloatEnv::Iid(vec![1.0 - p, p])
            }
            Environment::Multinomial { probs } => {
                FloatEnv::Iid(probs.iter().map(rat_to_f64).collect())
            }
            Environment::Markov { rows } => FloatEnv::Markov(
                rows.iter()
                    .map(|r| r.iter().map(rat_to_f64).collect())
                    .collect(),
            ),
            Environment::Deterministic { gen, .. } => FloatEnv::Det { gen },
        }
    }

    fn dist_into(&self, t: u64, last: Option<u8>, out: &mut [f64]) {
        match self {
            FloatEnv::Iid(p) => out.copy_from_slice(p),
            FloatEnv::Markov(rows) => match last {
                None => out.fill(1.0 / rows.len() as f64),
                Some(s) => out.copy_from_slice(&rows[s as usize]),
            },
            FloatEnv::Det { gen, .. } => {
                out.fill(0.0);
                out[gen.symbol_at(t) as usize] = 1.0;
            }
        }
    }
}

/// Bayes mixture as a predictor, tracking normalized posterior weights in
/// f64. The predictive slice is sum_i post_i nu_i(a|x), which is exact for
/// deficient priors too (the missing mass cancels in the ratio).
pub struct MixturePredictor<'a> {
    model: &'a MixtureModel,
}

impl<'a> MixturePredictor<'a> {
    pub fn new(model: &'a MixtureModel) -> MixturePredictor<'a> {
        MixturePredictor { model }
    }
}

struct MixtureFloatCursor<'a> {
    envs: Vec<FloatEnv<'a>>,
    post: Vec<f64>,
    t: u64,
    last: Option<u8>,
    buf: Vec<f64>,
}

impl PredictorCursor for MixtureFloatCursor<'_> {
    fn dist_into(&mut self, out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        for (i, env) in self.envs.iter().enumerate() {
            if self.post[i] == 0.0 {
                continue;
            }
            env.dist_into(self.t, self.last, &mut self.buf);
            for (o, &b) in out.iter_mut().zip(&self.buf) {
                *o += self.post[i] * b;
            }
        }
        Ok(())
    }

    fn advance(&mut self, a: u8) -> Result<()> {
        let mut total = 0.0;
        for (i, env) in self.envs.iter().enumerate() {
            if self.post[i] > 0.0 {
                env.dist_into(self.t, self.last, &mut self.buf);
                self.post[i] *= self.buf[a as usize];
            }
            total += self.post[i];
        }
        if total <= 0.0 {
            return Err(Error::ZeroProbability(
                "mixture posterior vanished on the observed prefix".into(),
            ));
        }
        for p in &mut self.post {
            *p /= total;
        }
        self.t += 1;
        self.last = Some(a);
        Ok(())
    }
}

impl Predictor for MixturePredictor<'_> {
    fn alphabet_size(&self) -> usize {
        self.model.alphabet().size() as usize
    }

    fn start(&self) -> Result<Box<dyn PredictorCursor + '_>> {
        let weights: Vec<f64> = self.model.weights().iter().map(rat_to_f64).collect();
        let total: f64 = weights.iter().sum();
        let d = self.alphabet_size();
        Ok(Box::new(MixtureFloatCursor {
            envs: self.model.components().iter().map(FloatEnv::new).collect(),
            post: weights.iter().map(|w| w / total).collect(),
            t: 0,
            last: None,
            buf: vec![0.0; d],
        }))
    }
}

/// Count-based predictor: predictive mass of `a` is the evidence ratio
/// E(c + e_a) / E(c). Exchangeable by construction.
pub struct CountPredictor<'a> {
    evidence: &'a (dyn CountEvidence + Sync),
}

impl<'a> CountPredictor<'a> {
    pub fn new(evidence: &'a (dyn CountEvidence + Sync)) -> CountPredictor<'a> {
        CountPredictor { evidence }
    }
}

struct CountCursor<'a> {
    evidence: &'a (dyn CountEvidence + Sync),
    counts: Vec<u64>,
    log_cur: f64,
}

impl PredictorCursor for CountCursor<'_> {
    fn dist_into(&mut self, out: &mut [f64]) -> Result<()> {
        if self.log_cur == f64::NEG_INFINITY {
            return Err(Error::ZeroProbability(
                "count predictor conditioned on zero-evidence counts".into(),
            ));
        }
        for (a, o) in out.iter_mut().enumerate() {
            self.counts[a] += 1;
            let le = self
                .evidence
                .log_evidence(&Counts::new(self.counts.clone()));
            self.counts[a] -= 1;
            *o = (le - self.log_cur).exp();
        }
        Ok(())
    }

    fn advance(&mut self, a: u8) -> Result<()> {
        self.counts[a as usize] += 1;
        self.log_cur = self
            .evidence
            .log_evidence(&Counts::new(self.counts.clone()));
        Ok(())
    }
}

impl Predictor for CountPredictor<'_> {
    fn alphabet_size(&self) -> usize {
        self.evidence.alphabet_size()
    }

    fn start(&self) -> Result<Box<dyn PredictorCursor + '_>> {
        let d = self.evidence.alphabet_size();
        let log_cur = self.evidence.log_evidence(&Counts::new(vec![0; d]));
        Ok(Box::new(CountCursor {
            evidence: self.evidence,
            counts: vec![0; d],
            log_cur,
        }))
    }
}

/// An environment used directly as a predictor (the xi = mu case).
pub struct EnvPredictor<'a> {
    env: &'a Environment,
}

impl<'a> EnvPredictor<'a> {
    pub fn new(env: &'a Environment) -> EnvPredictor<'a> {
        EnvPredictor { env }
    }
}

struct EnvPredictorCursor<'a> {
    cursor: crate::env::EnvCursor<'a>,
}

impl PredictorCursor for EnvPredictorCursor<'_> {
    fn dist_into(&mut self, out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.cursor.cond_f64());
        Ok(())
    }

    fn advance(&mut self, a: u8) -> Result<()> {
        self.cursor.advance(a);
        Ok(())
    }
}

impl Predictor for EnvPredictor<'_> {
    fn alphabet_size(&self) -> usize {
        self.env.alphabet().size() as usize
    }

    fn start(&self) -> Result<Box<dyn PredictorCursor + '_>> {
        Ok(Box::new(EnvPredictorCursor {
            cursor: self.env.cursor(),
        }))
    }
}

/// The per-symbol distribution of an i.i.d. environment, or an error
/// directing the caller to the Monte-Carlo path.
pub fn iid_probs(env: &Environment) -> Result<Vec<Rat>> {
    match env {
        Environment::Bernoulli { p1 } => Ok(vec![Rat::one() - p1, p1.clone()]),
        Environment::Multinomial { probs } => Ok(probs.clone()),
        Environment::Deterministic {
            gen: DetGenerator::Pattern(p),
            alphabet,
        } if p.len() == 1 => {
            let mut v = vec![Rat::zero(); *alphabet as usize];
            v[p[0] as usize] = Rat::one();
            Ok(v)
        }
        _ => Err(Error::Domain(
            "environment is not i.i.d.; use the Monte-Carlo estimator".into(),
        )),
    }
}

/// Finite mixture of i.i.d. sources as an exchangeable evidence function:
/// E(c) = sum_i w_i prod_a p_{i,a}^{c_a}. Exact powers are tabulated up to
/// `table_n` at construction so evaluation is allocation-light and the type
/// stays shareable across threads; counts beyond the table fall back to the
/// log-domain form.
pub struct IidMixtureEvidence {
    weights: Vec<Rat>,
    log_weights: Vec<f64>,
    comp_log_probs: Vec<Vec<f64>>,
    powers: Vec<Vec<Vec<Rat>>>,
    table_n: u64,
}

impl IidMixtureEvidence {
    pub fn new(
        components: Vec<Vec<Rat>>,
        weights: Vec<Rat>,
        table_n: u64,
    ) -> Result<IidMixtureEvidence> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::Domain(
                "components and weights must match and be nonempty".into(),
            ));
        }
        let d = components[0].len();
        if d < 2 || components.iter().any(|c| c.len() != d) {
            return Err(Error::Domain(
                "components must share an alphabet of size >= 2".into(),
            ));
        }
        for c in &components {
            let sum: Rat = c.iter().cloned().sum();
            if !sum.is_one() || c.iter().any(|p| p < &Rat::zero()) {
                return Err(Error::Domain(
                    "each component must be a distribution".into(),
                ));
            }
        }
        let wsum: Rat = weights.iter().cloned().sum();
        if weights.iter().any(|w| w <= &Rat::zero()) || wsum > Rat::one() {
            return Err(Error::Domain(
                "weights must be positive with sum at most 1".into(),
            ));
        }
        let log_weights = weights.iter().map(ln_rat).collect();
        let comp_log_probs = components
            .iter()
            .map(|c| {
                c.iter()
                    .map(|p| {
                        if p.is_zero() {
                            f64::NEG_INFINITY
                        } else {
                            ln_rat(p)
                        }
                    })
                    .collect()
            })
            .collect();
        let powers = components
            .iter()
            .map(|c| {
                c.iter()
                    .map(|p| {
                        let mut col = Vec::with_capacity(table_n as usize + 1);
                        col.push(Rat::one());
                        for j in 0..table_n as usize {
                            let next = &col[j] * p;
                            col.push(next);
                        }
                        col
                    })
                    .collect()
            })
            .collect();
        Ok(IidMixtureEvidence {
            weights,
            log_weights,
            comp_log_probs,
            powers,
            table_n,
        })
    }

    /// Build from a mixture model whose components are all i.i.d.
    pub fn from_mixture(model: &MixtureModel, table_n: u64) -> Result<IidMixtureEvidence> {
        let components = model
            .components()
            .iter()
            .map(iid_probs)
            .collect::<Result<Vec<_>>>()?;
        IidMixtureEvidence::new(components, model.weights().to_vec(), table_n)
    }

    pub fn weights(&self) -> &[Rat] {
        &self.weights
    }
}

impl CountEvidence for IidMixtureEvidence {
    fn alphabet_size(&self) -> usize {
        self.comp_log_probs[0].len()
    }

    fn log_evidence(&self, counts: &Counts) -> f64 {
        let terms: Vec<f64> = self
            .log_weights
            .iter()
            .zip(&self.comp_log_probs)
            .map(|(lw, lps)| {
                let mut s = *lw;
                for (lp, &c) in lps.iter().zip(&counts.per_symbol) {
                    if c > 0 {
                        s += c as f64 * lp;
                    }
                }
                s
            })
            .collect();
        log_sum_exp(&terms)
    }

    fn exact_evidence(&self, counts: &Counts) -> Option<Rat> {
        if counts.per_symbol.iter().any(|&c| c > self.table_n) {
            return None;
        }
        let mut total = Rat::zero();
        for (w, pows) in self.weights.iter().zip(&self.powers) {
            let mut term = w.clone();
            for (col, &c) in pows.iter().zip(&counts.per_symbol) {
                term *= &col[c as usize];
            }
            total += term;
        }
        Some(total)
    }
}

fn evidence_ln(xi: &dyn CountEvidence, counts: &Counts) -> Result<(f64, Option<Rat>)> {
    if let Some(e) = xi.exact_evidence(counts) {
        if e.is_zero() {
            return Err(Error::ZeroProbability(format!(
                "predictor assigns zero evidence to counts {:?}",
                counts.per_symbol
            )));
        }
        let l = ln_rat(&e);
        return Ok((l, Some(e)));
    }
    let l = xi.log_evidence(counts);
    if l == f64::NEG_INFINITY {
        return Err(Error::ZeroProbability(format!(
            "predictor assigns zero evidence to counts {:?}",
            counts.per_symbol
        )));
    }
    Ok((l, None))
}

/// Exact divergence curve for i.i.d. mu against an exchangeable predictor,
/// for every horizon 1..=n_max. Count-class probabilities are exact
/// rationals; D_n is evaluated directly at each horizon (not as a running
/// sum), so the chain-rule identity D_n = sum E[k_t] is an independent
/// cross-check on both computations. `bound_nats` is the upper bound each
/// row carries (ln of the inverse prior weight of mu, +inf if none).
pub fn exact_divergence_iid(
    mu: &Environment,
    xi: &dyn CountEvidence,
    n_max: usize,
    bound_nats: f64,
) -> Result<DivergenceCurve> {
    let mu_probs = iid_probs(mu)?;
    let d = mu_probs.len();
    if xi.alphabet_size() != d {
        return Err(Error::Domain(format!(
            "predictor alphabet {} does not match environment alphabet {d}",
            xi.alphabet_size()
        )));
    }
    let mu_f: Vec<f64> = mu_probs.iter().map(rat_to_f64).collect();
    let mu_ln: Vec<f64> = mu_probs
        .iter()
        .map(|p| {
            if p.is_zero() {
                f64::NEG_INFINITY
            } else {
                ln_rat(p)
            }
        })
        .collect();

    let mut level: BTreeMap<Vec<u64>, Rat> = BTreeMap::new();
    level.insert(vec![0; d], Rat::one());

    let mut curve = DivergenceCurve {
        n_grid: (1..=n_max).collect(),
        d_n: Vec::with_capacity(n_max),
        sum_e: Vec::with_capacity(n_max),
        sum_h: Vec::with_capacity(n_max),
        sum_a2: Vec::with_capacity(n_max),
        sum_k: Vec::with_capacity(n_max),
        bound: vec![bound_nats; n_max],
    };
    let (mut cum_e, mut cum_h, mut cum_a2, mut cum_k) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut q = vec![0.0f64; d];

    for _t in 0..n_max {
        // Expected step distances at this time: weight each count class by
        // its exact probability and compare mu with the evidence-ratio
        // predictive.
        for (c, pc) in &level {
            let pc_f = rat_to_f64(pc);
            if pc_f == 0.0 {
                continue;
            }
            let counts = Counts::new(c.clone());
            let (ln_cur, exact_cur) = evidence_ln(xi, &counts)?;
            for (a, qa) in q.iter_mut().enumerate() {
                let mut c2 = c.clone();
                c2[a] += 1;
                let ca = Counts::new(c2);
                *qa = match (&exact_cur, xi.exact_evidence(&ca)) {
                    (Some(cur), Some(num)) => rat_to_f64(&(num / cur)),
                    _ => (xi.log_evidence(&ca) - ln_cur).exp(),
                };
            }
            let s = step_distances(&mu_f, &q)?;
            cum_e += pc_f * s.e;
            cum_h += pc_f * s.h;
            cum_a2 += pc_f * 2.0 * s.a * s.a;
            cum_k += pc_f * s.k;
        }

        // Advance the count-class distribution one symbol.
        let mut next: BTreeMap<Vec<u64>, Rat> = BTreeMap::new();
        for (c, pc) in &level {
            for (a, pa) in mu_probs.iter().enumerate() {
                if pa.is_zero() {
                    continue;
                }
                let mut c2 = c.clone();
                c2[a] += 1;
                let w = pc * pa;
                let slot = next.entry(c2).or_insert_with(Rat::zero);
                *slot += w;
            }
        }
        level = next;

        // Direct D_n at the new horizon.
        let mut dn = 0.0;
        for (c, pc) in &level {
            let pc_f = rat_to_f64(pc);
            if pc_f == 0.0 {
                continue;
            }
            let counts = Counts::new(c.clone());
            let (ln_xi, _) = evidence_ln(xi, &counts)?;
            let ln_mu: f64 = c
                .iter()
                .zip(&mu_ln)
                .filter(|(&ci, _)| ci > 0)
                .map(|(&ci, &lp)| ci as f64 * lp)
                .sum();
            dn += pc_f * (ln_mu - ln_xi);
        }
        curve.d_n.push(dn);
        curve.sum_e.push(cum_e);
        curve.sum_h.push(cum_h);
        curve.sum_a2.push(cum_a2);
        curve.sum_k.push(cum_k);
    }
    Ok(curve)
}

/// Monte-Carlo divergence curve with standard errors for D_n.
#[derive(Debug, Clone)]
pub struct McDivergence {
    pub curve: DivergenceCurve,
    /// Standard error of the D_n estimate per grid point.
    pub stderr_d: Vec<f64>,
    /// Samples contributing to the estimates.
    pub used: u64,
    /// Samples discarded because the predictor assigned zero mass to an
    /// observed symbol.
    pub excluded: u64,
}

const MC_BLOCK: u64 = 1024;

struct McPartial {
    used: u64,
    excluded: u64,
    sum_d: Vec<f64>,
    sumsq_d: Vec<f64>,
    sum_e: Vec<f64>,
    sum_h: Vec<f64>,
    sum_a2: Vec<f64>,
    sum_k: Vec<f64>,
}

impl McPartial {
    fn new(g: usize) -> McPartial {
        McPartial {
            used: 0,
            excluded: 0,
            sum_d: vec![0.0; g],
            sumsq_d: vec![0.0; g],
            sum_e: vec![0.0; g],
            sum_h: vec![0.0; g],
            sum_a2: vec![0.0; g],
            sum_k: vec![0.0; g],
        }
    }

    fn merge(&mut self, o: &McPartial) {
        self.used += o.used;
        self.excluded += o.excluded;
        for i in 0..self.sum_d.len() {
            self.sum_d[i] += o.sum_d[i];
            self.sumsq_d[i] += o.sumsq_d[i];
            self.sum_e[i] += o.sum_e[i];
            self.sum_h[i] += o.sum_h[i];
            self.sum_a2[i] += o.sum_a2[i];
            self.sum_k[i] += o.sum_k[i];
        }
    }
}

fn check_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "horizon grid must be nonempty, positive, strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Sample one path of length `n_max` from mu, walking the predictor cursor
/// alongside and snapshotting cumulants at the grid points. Returns `None`
/// when the predictor zeroes out an observed symbol (the sample is then
/// excluded from all grid points).
#[allow(clippy::too_many_arguments)]
fn mc_walk(
    fenv: &FloatEnv,
    predictor: &dyn Predictor,
    n_grid: &[usize],
    rng: &mut ChaCha8Rng,
    p_buf: &mut [f64],
    q_buf: &mut [f64],
    snap: &mut [[f64; 5]],
) -> Result<Option<()>> {
    let mut cursor = predictor.start()?;
    let n_max = *n_grid.last().expect("grid checked nonempty");
    let (mut cum_e, mut cum_h, mut cum_a2, mut cum_k, mut cum_d) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut gi = 0usize;
    let mut last: Option<u8> = None;
    for t in 0..n_max {
        fenv.dist_into(t as u64, last, p_buf);
        if cursor.dist_into(q_buf).is_err() {
            return Ok(None);
        }
        let s = step_distances(p_buf, q_buf)?;
        cum_e += s.e;
        cum_h += s.h;
        cum_a2 += 2.0 * s.a * s.a;
        cum_k += s.k;
        // Inverse-CDF draw; the final bucket absorbs rounding slack.
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut a = p_buf.len() - 1;
        for (i, &pi) in p_buf.iter().enumerate() {
            acc += pi;
            if u < acc {
                a = i;
                break;
            }
        }
        if q_buf[a] <= 0.0 {
            return Ok(None);
        }
        cum_d += p_buf[a].ln() - q_buf[a].ln();
        if cursor.advance(a as u8).is_err() {
            return Ok(None);
        }
        last = Some(a as u8);
        if t + 1 == n_grid[gi] {
            snap[gi] = [cum_d, cum_e, cum_h, cum_a2, cum_k];
            gi += 1;
        }
    }
    Ok(Some(()))
}

/// Monte-Carlo estimate of the divergence curve for a general measure mu
/// against any predictor. Per-sample RNG streams are derived from the seed
/// and the sample index, samples are processed in fixed blocks, and block
/// partials are merged in index order: the result is bit-identical for any
/// worker count.
pub fn mc_divergence(
    mu: &Environment,
    predictor: &dyn Predictor,
    n_grid: &[usize],
    samples: u64,
    seed: u64,
    bound_nats: f64,
) -> Result<McDivergence> {
    check_grid(n_grid)?;
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let d = mu.alphabet().size() as usize;
    if predictor.alphabet_size() != d {
        return Err(Error::Domain(format!(
            "predictor alphabet {} does not match environment alphabet {d}",
            predictor.alphabet_size()
        )));
    }
    let g = n_grid.len();
    let blocks = samples.div_ceil(MC_BLOCK);
    let partials: Vec<Result<McPartial>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let fenv = FloatEnv::new(mu);
            let mut part = McPartial::new(g);
            let mut p_buf = vec![0.0f64; d];
            let mut q_buf = vec![0.0f64; d];
            let mut snap = vec![[0.0f64; 5]; g];
            let lo = b * MC_BLOCK;
            let hi = (lo + MC_BLOCK).min(samples);
            for i in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, i));
                match mc_walk(
                    &fenv, predictor, n_grid, &mut rng, &mut p_buf, &mut q_buf, &mut snap,
                )? {
                    None => part.excluded += 1,
                    Some(()) => {
                        part.used += 1;
                        for (gi, s) in snap.iter().enumerate() {
                            part.sum_d[gi] += s[0];
                            part.sumsq_d[gi] += s[0] * s[0];
                            part.sum_e[gi] += s[1];
                            part.sum_h[gi] += s[2];
                            part.sum_a2[gi] += s[3];
                            part.sum_k[gi] += s[4];
                        }
                    }
                }
            }
            Ok(part)
        })
        .collect();

    let mut total = McPartial::new(g);
    for p in partials {
        total.merge(&p?);
    }
    if total.used == 0 {
        return Err(Error::ZeroProbability(
            "every sample was excluded: predictor has no mass on observed data".into(),
        ));
    }
    let n = total.used as f64;
    let mut curve = DivergenceCurve {
        n_grid: n_grid.to_vec(),
        d_n: Vec::with_capacity(g),
        sum_e: Vec::with_capacity(g),
        sum_h: Vec::with_capacity(g),
        sum_a2: Vec::with_capacity(g),
        sum_k: Vec::with_capacity(g),
        bound: vec![bound_nats; g],
    };
    let mut stderr_d = Vec::with_capacity(g);
    for i in 0..g {
        let mean = total.sum_d[i] / n;
        curve.d_n.push(mean);
        curve.sum_e.push(total.sum_e[i] / n);
        curve.sum_h.push(total.sum_h[i] / n);
        curve.sum_a2.push(total.sum_a2[i] / n);
        curve.sum_k.push(total.sum_k[i] / n);
        let se = if total.used > 1 {
            let var = (total.sumsq_d[i] - total.sum_d[i] * total.sum_d[i] / n) / (n - 1.0);
            (var.max(0.0) / n).sqrt()
        } else {
            0.0
        };
        stderr_d.push(se);
    }
    Ok(McDivergence {
        curve,
        stderr_d,
        used: total.used,
        excluded: total.excluded,
    })
}

/// Choice of prior density on the Bernoulli parameter for the parametric
/// bound check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamPrior {
    Uniform,
    Jeffreys,
}

impl ParamPrior {
    fn log_evidence(self, n0: u64, n1: u64) -> f64 {
        match self {
            ParamPrior::Uniform => crate::conjugate::uniform_log_evidence(n0, n1),
            ParamPrior::Jeffreys => crate::conjugate::jeffreys_log_evidence(n0, n1),
        }
    }

    /// ln of the prior density at theta0 (the w(theta0) of the bound).
    fn ln_density(self, theta0: f64) -> Result<f64> {
        match self {
            ParamPrior::Uniform => Ok(0.0),
            ParamPrior::Jeffreys => Ok(crate::conjugate::jeffreys_density(theta0)?.ln()),
        }
    }
}

/// Result of the parametric-family bound check for Bernoulli(theta0).
#[derive(Debug, Clone)]
pub struct ContinuousReport {
    pub theta0: Rat,
    pub prior: ParamPrior,
    pub slack_nats: f64,
    pub n_grid: Vec<usize>,
    pub d_n: Vec<f64>,
    /// ln w(theta0)^{-1} + (1/2) ln(n / 2 pi) + (1/2) ln(1/(theta0(1-theta0)))
    /// + slack, per grid point.
    pub bound: Vec<f64>,
    pub satisfied: Vec<bool>,
    /// Least-squares slope of D_n against ln n over the grid; the family has
    /// one parameter, so the expected slope is 1/2.
    pub slope: f64,
}

/// Exact D_n (expectation over counts, log-gamma evidence) for Bernoulli
/// truth against the mixture over the whole parameter family, compared with
/// the Fisher-information bound. The o(1) remainder of the bound is
/// replaced by a fixed configurable slack, recorded in the result.
pub fn continuous_bound_check(
    theta0: &Rat,
    prior: ParamPrior,
    n_grid: &[usize],
    slack_nats: f64,
) -> Result<ContinuousReport> {
    check_grid(n_grid)?;
    if theta0 <= &Rat::zero() || theta0 >= &Rat::one() {
        return Err(Error::Domain(
            "parametric bound needs theta0 strictly inside (0,1)".into(),
        ));
    }
    let th = rat_to_f64(theta0);
    let (ln_th, ln_1mth) = (th.ln(), (1.0 - th).ln());
    let ln_w_inv = -prior.ln_density(th)?;
    let fisher = 1.0 / (th * (1.0 - th));

    let mut d_n = Vec::with_capacity(n_grid.len());
    let mut bound = Vec::with_capacity(n_grid.len());
    let mut satisfied = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        // D_n = sum over n1 of P[n1 ones] * (ln mu(x) - ln xi(x)); both
        // factors depend on the counts only.
        let mut dn = 0.0;
        let mut ln_binom = 0.0; // ln C(n, n1), updated via the ratio recurrence
        for n1 in 0..=n as u64 {
            let n0 = n as u64 - n1;
            if n1 > 0 {
                ln_binom += ((n as u64 - n1 + 1) as f64).ln() - (n1 as f64).ln();
            }
            let ln_mu = n1 as f64 * ln_th + n0 as f64 * ln_1mth;
            let weight = (ln_binom + ln_mu).exp();
            dn += weight * (ln_mu - prior.log_evidence(n0, n1));
        }
        let b = ln_w_inv
            + 0.5 * ((n as f64) / (2.0 * std::f64::consts::PI)).ln()
            + 0.5 * fisher.ln()
            + slack_nats;
        d_n.push(dn);
        bound.push(b);
        satisfied.push(dn <= b);
    }
    let ln_n: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    // A slope needs at least two horizons; single-point grids get NaN.
    let slope = if n_grid.len() >= 2 {
        ls_slope(&ln_n, &d_n)
    } else {
        f64::NAN
    };
    Ok(ContinuousReport {
        theta0: theta0.clone(),
        prior,
        slack_nats,
        n_grid: n_grid.to_vec(),
        d_n,
        bound,
        satisfied,
        slope,
    })
}

/// Paired comparison of two predictors against the same sampled paths:
/// the continuous (or otherwise dominant) mixture and the enumeration-based
/// one. No inequality between them is asserted; the gap is reported.
#[derive(Debug, Clone)]
pub struct UniversalGapCurve {
    pub n_grid: Vec<usize>,
    pub d_xi: Vec<f64>,
    pub stderr_xi: Vec<f64>,
    pub d_m: Vec<f64>,
    pub stderr_m: Vec<f64>,
    /// d_m - d_xi per grid point (means over each predictor's valid samples).
    pub gap: Vec<f64>,
    pub samples: u64,
    pub excluded_xi: u64,
    pub excluded_m: u64,
}

/// Estimate D_n(mu||xi) and D_n(mu||M) on shared sample paths. A sample is
/// excluded for a predictor (and counted) when that predictor assigns zero
/// mass to an observed symbol anywhere up to the largest horizon; the other
/// predictor keeps the sample.
pub fn universal_vs_continuous(
    mu: &Environment,
    xi_pred: &dyn Predictor,
    m_pred: &dyn Predictor,
    n_grid: &[usize],
    samples: u64,
    seed: u64,
) -> Result<UniversalGapCurve> {
    check_grid(n_grid)?;
    if samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let d = mu.alphabet().size() as usize;
    for (name, pred) in [("first", xi_pred), ("second", m_pred)] {
        if pred.alphabet_size() != d {
            return Err(Error::Domain(format!(
                "{name} predictor alphabet {} does not match environment alphabet {d}",
                pred.alphabet_size()
            )));
        }
    }
    let n_max = *n_grid.last().expect("grid checked nonempty");
    let g = n_grid.len();
    let fenv = FloatEnv::new(mu);

    let mut stats = [PairStats::new(g), PairStats::new(g)];
    let mut xs = vec![0u8; n_max];
    let mut ln_mu_cum = vec![0.0f64; n_max];
    let mut p_buf = vec![0.0f64; d];
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, i));
        // Draw the path once; both predictors then replay it.
        let mut last: Option<u8> = None;
        let mut cum = 0.0;
        for t in 0..n_max {
            fenv.dist_into(t as u64, last, &mut p_buf);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut a = d - 1;
            for (j, &pj) in p_buf.iter().enumerate() {
                acc += pj;
                if u < acc {
                    a = j;
                    break;
                }
            }
            cum += p_buf[a].ln();
            xs[t] = a as u8;
            ln_mu_cum[t] = cum;
            last = Some(a as u8);
        }
        for (pred, st) in [xi_pred, m_pred].into_iter().zip(stats.iter_mut()) {
            st.accumulate(pred, &xs, &ln_mu_cum, n_grid, d)?;
        }
    }
    let [xi_stats, m_stats] = stats;
    let (d_xi, stderr_xi) = xi_stats.finish()?;
    let (d_m, stderr_m) = m_stats.finish()?;
    let gap = d_m.iter().zip(&d_xi).map(|(m, x)| m - x).collect();
    Ok(UniversalGapCurve {
        n_grid: n_grid.to_vec(),
        d_xi,
        stderr_xi,
        d_m,
        stderr_m,
        gap,
        samples,
        excluded_xi: samples - xi_stats.used,
        excluded_m: samples - m_stats.used,
    })
}

struct PairStats {
    used: u64,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl PairStats {
    fn new(g: usize) -> PairStats {
        PairStats {
            used: 0,
            sum: vec![0.0; g],
            sumsq: vec![0.0; g],
        }
    }

    /// Replay the path through the predictor, snapshotting ln mu - ln rho at
    /// the grid points; on zero mass the sample is dropped for this
    /// predictor only.
    fn accumulate(
        &mut self,
        pred: &dyn Predictor,
        xs: &[u8],
        ln_mu_cum: &[f64],
        n_grid: &[usize],
        d: usize,
    ) -> Result<()> {
        let mut cursor = pred.start()?;
        let mut q_buf = vec![0.0f64; d];
        let mut cum_q = 0.0f64;
        let mut snaps = vec![0.0f64; n_grid.len()];
        let mut gi = 0usize;
        for (t, &a) in xs.iter().enumerate() {
            if cursor.dist_into(&mut q_buf).is_err() {
                return Ok(()); // excluded
            }
            let qa = q_buf[a as usize];
            if qa <= 0.0 {
                return Ok(()); // excluded
            }
            cum_q += qa.ln();
            if cursor.advance(a).is_err() {
                return Ok(()); // excluded
            }
            if t + 1 == n_grid[gi] {
                snaps[gi] = ln_mu_cum[t] - cum_q;
                gi += 1;
            }
        }
        self.used += 1;
        for (i, s) in snaps.iter().enumerate() {
            self.sum[i] += s;
            self.sumsq[i] += s * s;
        }
        Ok(())
    }

    fn finish(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.used == 0 {
            return Err(Error::ZeroProbability(
                "every sample was excluded for one predictor".into(),
            ));
        }
        let n = self.used as f64;
        let mut means = Vec::with_capacity(self.sum.len());
        let mut errs = Vec::with_capacity(self.sum.len());
        for i in 0..self.sum.len() {
            let mean = self.sum[i] / n;
            means.push(mean);
            let se = if self.used > 1 {
                let var = (self.sumsq[i] - self.sum[i] * self.sum[i] / n) / (n - 1.0);
                (var.max(0.0) / n).sqrt()
            } else {
                0.0
            };
            errs.push(se);
        }
        Ok((means, errs))
    }
}
