//! Weighted mixtures over a finite class of environments.
//!
//! xi(x) = sum_i w_i nu_i(x) with w_i > 0 and sum_i w_i <= 1. The weight sum
//! is deliberately not normalised: a deficient prior (sum < 1) is legal and
//! xi is then a semimeasure. Dominance xi(x) >= w_i nu_i(x) holds by
//! construction and is still checked, exactly, on demand.
//!
//! For a deterministic truth sequence alpha that is in the class with weight
//! w, the prediction errors obey
//!     sum_{t<=n} (1 - xi(alpha_t | alpha_{<t})) <= -ln xi(alpha_{1:n})
//!                                               <= ln(1/w),
//! which `deterministic_bound_run` evaluates step by step.
//!
//! Mixture spec strings: `mix: [ (det:pattern=1, 1/2), (bernoulli:1/2, 1/2) ]`.

use num_traits::{One, Zero};

use crate::alphabet::Alphabet;
use crate::env::{parse_env_spec, split_top_level, EnvCursor, Environment};
use crate::error::{Error, Result};
use crate::numeric::{format_rational, ln_rat, log_sum_exp, parse_rational, rat_to_f64, Rat};

#[derive(Debug, Clone)]
pub struct MixtureModel {
    components: Vec<Environment>,
    weights: Vec<Rat>,
}

impl MixtureModel {
    pub fn new(components: Vec<Environment>, weights: Vec<Rat>) -> Result<MixtureModel> {
        if components.is_empty() {
            return Err(Error::Domain("mixture needs at least one component".into()));
        }
        if components.len() != weights.len() {
            return Err(Error::Domain(format!(
                "{} components but {} weights",
                components.len(),
                weights.len()
            )));
        }
        let d = components[0].alphabet().size();
        if components.iter().any(|c| c.alphabet().size() != d) {
            return Err(Error::Domain(
                "mixture components disagree on alphabet size".into(),
            ));
        }
        let mut sum = Rat::zero();
        for w in &weights {
            if w <= &Rat::zero() {
                return Err(Error::Domain(
                    "mixture weights must be strictly positive".into(),
                ));
            }
            sum += w;
        }
        if sum > Rat::one() {
            return Err(Error::Domain(format!(
                "mixture weight sum {} exceeds 1",
                format_rational(&sum)
            )));
        }
        Ok(MixtureModel {
            components,
            weights,
        })
    }

    /// Equal weights 1/k over the given components.
    pub fn uniform(components: Vec<Environment>) -> Result<MixtureModel> {
        let k = components.len() as i64;
        if k == 0 {
            return Err(Error::Domain("mixture needs at least one component".into()));
        }
        let w = Rat::new(1.into(), k.into());
        let weights = vec![w; components.len()];
        MixtureModel::new(components, weights)
    }

    pub fn components(&self) -> &[Environment] {
        &self.components
    }

    pub fn weights(&self) -> &[Rat] {
        &self.weights
    }

    pub fn alphabet(&self) -> Alphabet {
        self.components[0].alphabet()
    }

    /// Exact prior mass of the class; <= 1, and < 1 for a deficient prior.
    pub fn weight_sum(&self) -> Rat {
        self.weights.iter().cloned().sum()
    }

    pub fn cursor(&self) -> MixtureCursor<'_> {
        self.make_cursor(true)
    }

    /// Cursor restricted to the f64 log domain; exact accessors are
    /// unavailable but long runs over large classes stay cheap.
    pub fn cursor_float(&self) -> MixtureCursor<'_> {
        self.make_cursor(false)
    }

    fn make_cursor(&self, track_exact: bool) -> MixtureCursor<'_> {
        MixtureCursor {
            mix: self,
            env_cursors: self.components.iter().map(|c| c.cursor()).collect(),
            exact_lik: vec![Rat::one(); self.components.len()],
            log_lik: vec![0.0; self.components.len()],
            log_w: self.weights.iter().map(ln_rat).collect(),
            track_exact,
        }
    }

    pub fn exact_prob(&self, xs: &[u8]) -> Rat {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.exact_prob(xs))
            .sum()
    }

    /// ln xi(x) via log-sum-exp over component log-likelihoods.
    pub fn logprob(&self, xs: &[u8]) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| ln_rat(w) + c.logprob(xs))
            .collect();
        log_sum_exp(&terms)
    }

    /// Exact one-step predictive distribution xi(.|xs), renormalised by
    /// xi(xs); errors on a zero-probability prefix.
    pub fn exact_conditional(&self, xs: &[u8]) -> Result<Vec<Rat>> {
        let cur = self.cursor_at(xs)?;
        Ok(cur.exact_conditional())
    }

    pub fn conditional(&self, xs: &[u8]) -> Result<Vec<f64>> {
        Ok(self.exact_conditional(xs)?.iter().map(rat_to_f64).collect())
    }

    /// Exact posterior weights w_i nu_i(x) / xi(x). Sums to exactly 1
    /// whenever xi(x) > 0, including for deficient priors.
    pub fn posterior_exact(&self, xs: &[u8]) -> Result<Vec<Rat>> {
        let cur = self.cursor_at(xs)?;
        Ok(cur.posterior_exact())
    }

    /// Exact k-step lookahead xi(cont | prefix) for a fixed continuation.
    pub fn multistep_predict(&self, prefix: &[u8], continuation: &[u8]) -> Result<Rat> {
        let base = self.exact_prob(prefix);
        if base.is_zero() {
            return Err(Error::ZeroProbability(
                "multistep prediction conditioned on zero-probability prefix".into(),
            ));
        }
        let mut full = prefix.to_vec();
        full.extend_from_slice(continuation);
        Ok(self.exact_prob(&full) / base)
    }

    fn cursor_at(&self, xs: &[u8]) -> Result<MixtureCursor<'_>> {
        let mut cur = self.cursor();
        for &a in xs {
            if cur.exact_xi().is_zero() {
                break;
            }
            cur.advance(a);
        }
        if cur.exact_xi().is_zero() {
            return Err(Error::ZeroProbability(
                "prefix has probability zero under the mixture".into(),
            ));
        }
        Ok(cur)
    }

    /// Verify dominance xi(y) >= w_i nu_i(y), exactly, on every prefix of `xs`.
    pub fn check_dominance_prefixes(&self, xs: &[u8]) -> Result<()> {
        for end in 0..=xs.len() {
            self.check_dominance_at(&xs[..end])?;
        }
        Ok(())
    }

    /// Verify dominance exhaustively on all strings of length <= max_len.
    pub fn check_dominance_exhaustive(&self, max_len: usize) -> Result<()> {
        let d = self.alphabet().size();
        let mut stack = vec![Vec::new()];
        while let Some(xs) = stack.pop() {
            self.check_dominance_at(&xs)?;
            if xs.len() < max_len {
                for a in 0..d {
                    let mut next = xs.clone();
                    next.push(a);
                    stack.push(next);
                }
            }
        }
        Ok(())
    }

    fn check_dominance_at(&self, xs: &[u8]) -> Result<()> {
        let xi = self.exact_prob(xs);
        for (i, (w, c)) in self.weights.iter().zip(&self.components).enumerate() {
            if xi < w * c.exact_prob(xs) {
                return Err(Error::Invariant(format!(
                    "dominance violated at component {i} on {:?}",
                    crate::alphabet::format_symbols(xs)
                )));
            }
        }
        Ok(())
    }

    /// Run the deterministic-sequence error bound for the class member at
    /// `truth_index`, which must emit one sure sequence (a deterministic
    /// environment, or an i.i.d. one concentrated on a single symbol).
    /// Records |1 - xi(alpha_t | alpha_{<t})| for t = 1..=horizon, its
    /// running sum, and the bound ln(1/w).
    ///
    /// `exact` keeps per-component likelihoods as rationals (the per-step
    /// terms are then exact before the f64 rendering); otherwise everything
    /// runs in the f64 log domain, which is the practical choice for large
    /// classes at long horizons.
    pub fn deterministic_bound_run(
        &self,
        truth_index: usize,
        horizon: usize,
        exact: bool,
    ) -> Result<BoundRun> {
        let truth = self
            .components
            .get(truth_index)
            .ok_or_else(|| Error::Domain(format!("no component {truth_index}")))?;
        let alpha = sure_prefix(truth, horizon).ok_or_else(|| {
            Error::Domain(
                "bound run requires an almost-surely deterministic truth component".into(),
            )
        })?;
        let bound_nats = -ln_rat(&self.weights[truth_index]);

        let mut cur = if exact {
            self.cursor()
        } else {
            self.cursor_float()
        };
        let mut terms = Vec::with_capacity(horizon);
        let mut cumulative = Vec::with_capacity(horizon);
        let mut cum_exact = Rat::zero();
        let mut cum_f64 = 0.0;
        let mut satisfied = true;
        for &a in &alpha {
            let term = if exact {
                let dist = cur.exact_conditional();
                let t = Rat::one() - dist[a as usize].clone();
                cum_exact += &t;
                rat_to_f64(&t)
            } else {
                let r = cur.cond_f64(a);
                1.0 - r
            };
            cum_f64 += term;
            let cum = if exact {
                rat_to_f64(&cum_exact)
            } else {
                cum_f64
            };
            terms.push(term);
            cumulative.push(cum);
            if cum > bound_nats {
                satisfied = false;
            }
            cur.advance(a);
        }
        let neg_ln_xi_final = -cur.log_xi();
        Ok(BoundRun {
            horizon,
            terms,
            cumulative,
            cumulative_exact_final: if exact { Some(cum_exact) } else { None },
            bound_nats,
            neg_ln_xi_final,
            satisfied,
        })
    }

    pub fn spec_string(&self) -> String {
        let entries: Vec<String> = self
            .components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| format!("({}, {})", c.spec_string(), format_rational(w)))
            .collect();
        format!("mix: [ {} ]", entries.join(", "))
    }
}

/// Streaming mixture evaluator carrying both exact and log-domain
/// per-component likelihoods.
#[derive(Debug, Clone)]
pub struct MixtureCursor<'a> {
    mix: &'a MixtureModel,
    env_cursors: Vec<EnvCursor<'a>>,
    /// nu_i(x_{<t}), exact; updated only when the cursor tracks exact state.
    exact_lik: Vec<Rat>,
    /// ln nu_i(x_{<t}).
    log_lik: Vec<f64>,
    /// ln w_i, cached once.
    log_w: Vec<f64>,
    track_exact: bool,
}

impl MixtureCursor<'_> {
    pub fn exact_xi(&self) -> Rat {
        assert!(self.track_exact, "exact query on a float-only cursor");
        self.mix
            .weights
            .iter()
            .zip(&self.exact_lik)
            .map(|(w, l)| w * l)
            .sum()
    }

    /// ln xi(x_{<t}) from the log-domain state.
    pub fn log_xi(&self) -> f64 {
        let terms: Vec<f64> = self
            .log_w
            .iter()
            .zip(&self.log_lik)
            .map(|(w, l)| w + l)
            .collect();
        log_sum_exp(&terms)
    }

    /// Exact xi(.|x_{<t}); caller must ensure xi(x_{<t}) > 0.
    pub fn exact_conditional(&self) -> Vec<Rat> {
        let d = self.mix.alphabet().size() as usize;
        let xi = self.exact_xi();
        assert!(!xi.is_zero(), "conditional at zero-probability prefix");
        let mut out = vec![Rat::zero(); d];
        for ((w, l), cur) in self
            .mix
            .weights
            .iter()
            .zip(&self.exact_lik)
            .zip(&self.env_cursors)
        {
            if l.is_zero() {
                continue;
            }
            let cond = cur.exact_conditional();
            let scale = w * l;
            for (o, c) in out.iter_mut().zip(cond) {
                *o += &scale * c;
            }
        }
        for o in out.iter_mut() {
            *o /= &xi;
        }
        out
    }

    /// xi(a | x_{<t}) in plain f64 from the log-domain state.
    pub fn cond_f64(&self, a: u8) -> f64 {
        let mut num = Vec::with_capacity(self.mix.weights.len());
        let mut den = Vec::with_capacity(self.mix.weights.len());
        for ((w, l), cur) in self.log_w.iter().zip(&self.log_lik).zip(&self.env_cursors) {
            if *l == f64::NEG_INFINITY {
                continue;
            }
            let lw = w + l;
            den.push(lw);
            let step = cur.cond_ln(a);
            if step != f64::NEG_INFINITY {
                num.push(lw + step);
            }
        }
        if den.is_empty() {
            return f64::NAN;
        }
        (log_sum_exp(&num) - log_sum_exp(&den)).exp()
    }

    /// Full predictive distribution in f64.
    pub fn cond_dist_f64(&self) -> Vec<f64> {
        (0..self.mix.alphabet().size())
            .map(|a| self.cond_f64(a))
            .collect()
    }

    pub fn posterior_exact(&self) -> Vec<Rat> {
        let xi = self.exact_xi();
        assert!(!xi.is_zero(), "posterior at zero-probability prefix");
        self.mix
            .weights
            .iter()
            .zip(&self.exact_lik)
            .map(|(w, l)| w * l / &xi)
            .collect()
    }

    /// Posterior weights from the log-domain state; sums to 1 up to
    /// floating-point rounding.
    pub fn posterior_f64(&self) -> Vec<f64> {
        let terms: Vec<f64> = self
            .log_w
            .iter()
            .zip(&self.log_lik)
            .map(|(w, l)| w + l)
            .collect();
        let z = log_sum_exp(&terms);
        terms.iter().map(|t| (t - z).exp()).collect()
    }

    pub fn advance(&mut self, a: u8) {
        for ((cur, lik), log) in self
            .env_cursors
            .iter_mut()
            .zip(&mut self.exact_lik)
            .zip(&mut self.log_lik)
        {
            if self.track_exact && !lik.is_zero() {
                let cond = cur.exact_conditional();
                *lik *= cond[a as usize].clone();
            }
            if *log != f64::NEG_INFINITY {
                *log += cur.cond_ln(a);
            }
            cur.advance(a);
        }
    }
}

/// The sequence an environment emits with probability one, when there is
/// one: deterministic generators, and i.i.d. sources whose distribution is a
/// point mass.
fn sure_prefix(env: &Environment, horizon: usize) -> Option<Vec<u8>> {
    match env {
        Environment::Deterministic { gen, .. } => Some(gen.prefix(horizon)),
        Environment::Bernoulli { p1 } => {
            if p1.is_zero() {
                Some(vec![0; horizon])
            } else if p1.is_one() {
                Some(vec![1; horizon])
            } else {
                None
            }
        }
        Environment::Multinomial { probs } => {
            let a = probs.iter().position(|p| p.is_one())?;
            Some(vec![a as u8; horizon])
        }
        Environment::Markov { .. } => None,
    }
}

/// Per-step record of a deterministic-sequence bound run.
#[derive(Debug, Clone)]
pub struct BoundRun {
    pub horizon: usize,
    /// |1 - xi(alpha_t | alpha_{<t})| for t = 1..=horizon.
    pub terms: Vec<f64>,
    /// Running sums of `terms`.
    pub cumulative: Vec<f64>,
    /// Exact final cumulative sum when the run was exact.
    pub cumulative_exact_final: Option<Rat>,
    /// ln(1/w) for the truth component.
    pub bound_nats: f64,
    /// -ln xi(alpha_{1:horizon}); the telescoped upper bound on the sum.
    pub neg_ln_xi_final: f64,
    /// Whether cumulative <= bound held at every recorded step.
    pub satisfied: bool,
}

/// Parse `mix: [ (env_spec, weight), ... ]`.
pub fn parse_mixture_spec(s: &str) -> Result<MixtureModel> {
    let s = s.trim();
    let body = s
        .strip_prefix("mix:")
        .ok_or_else(|| Error::parse(format!("mixture spec must start with 'mix:', got {s:?}")))?
        .trim();
    if !body.starts_with('[') || !body.ends_with(']') {
        return Err(Error::parse(
            "mixture spec needs a [...] list of (env, weight) pairs",
        ));
    }
    let entries = split_top_level(&body[1..body.len() - 1])?;
    if entries.is_empty() {
        return Err(Error::parse("empty mixture"));
    }
    let mut components = Vec::new();
    let mut weights = Vec::new();
    for entry in entries {
        let inner = entry
            .strip_prefix('(')
            .and_then(|e| e.strip_suffix(')'))
            .ok_or_else(|| {
                Error::parse(format!("mixture entry {entry:?} must be (env, weight)"))
            })?;
        let parts = split_top_level(inner)?;
        if parts.len() != 2 {
            return Err(Error::parse(format!(
                "mixture entry {entry:?} must have exactly an environment and a weight"
            )));
        }
        components.push(parse_env_spec(&parts[0])?);
        weights.push(parse_rational(&parts[1])?);
    }
    MixtureModel::new(components, weights)
}
