//! Closed-form Bayesian predictors for i.i.d. sources: the uniform prior on
//! the Bernoulli parameter, a point-mass + uniform mixed prior, general
//! Dirichlet priors over finite alphabets, and the Jeffreys prior.
//!
//! All probabilities and predictive ratios are exact rationals. The key
//! identities, with n_1 ones and n_0 zeros in n = n_1 + n_0 observations:
//!
//!   uniform prior evidence     xi(x) = n_1! n_0! / (n+1)!
//!   rule of succession         xi(1|x) = (n_1 + 1) / (n + 2)
//!   multistep on a run         xi(1^k | 1^n) = (n+1) / (n+k+1)
//!   eps-tail hypothesis        P[theta >= eps | 1^n] = 1 - (1-eps)^{n+1}
//!   finite population          P[all N sunrises | n seen] = (n+1) / (N+1)
//!   Dirichlet(alpha)           xi(a|x) = (n_a + alpha_a) / (n + sum alpha)
//!
//! The mixed prior puts mass m on a point theta* and (1-m) on the uniform
//! density; with the default (m = 1/2, theta* = 1) the evidence for 1^n is
//! (n+2)/(2(n+1)), the posterior of the point hypothesis is (n+1)/(n+2), and
//! the probability of a 0 after 1^n is 1/(n+2)^2.
//!
//! Densities (Jeffreys, induced Dirichlet marginals) are f64; the marginal is
//! computed by deterministic quadrature so grouping and marginalisation can
//! be cross-checked against closed forms.

use num_bigint::BigInt;
use num_traits::{One, Pow, Signed, Zero};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numeric::{rat, rat_u, simpson, Rat};

/// Symbol counts: `per_symbol[a]` occurrences of symbol `a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts {
    pub per_symbol: Vec<u64>,
}

impl Counts {
    pub fn new(per_symbol: Vec<u64>) -> Counts {
        Counts { per_symbol }
    }

    pub fn binary(n0: u64, n1: u64) -> Counts {
        Counts {
            per_symbol: vec![n0, n1],
        }
    }

    pub fn from_symbols(d: u8, xs: &[u8]) -> Counts {
        let mut per_symbol = vec![0u64; d as usize];
        for &a in xs {
            per_symbol[a as usize] += 1;
        }
        Counts { per_symbol }
    }

    pub fn total(&self) -> u64 {
        self.per_symbol.iter().sum()
    }

    pub fn alphabet_size(&self) -> usize {
        self.per_symbol.len()
    }
}

fn require_binary(counts: &Counts) -> Result<(u64, u64)> {
    if counts.alphabet_size() != 2 {
        return Err(Error::Domain(format!(
            "binary closed form applied to alphabet of size {}",
            counts.alphabet_size()
        )));
    }
    Ok((counts.per_symbol[0], counts.per_symbol[1]))
}

/// Evidence of a specific binary string with counts (n0, n1) under the
/// uniform prior: n1! n0! / (n+1)!.
pub fn uniform_evidence(counts: &Counts) -> Result<Rat> {
    let (n0, n1) = require_binary(counts)?;
    // n1! n0! / (n+1)! = 1 / ((n+1) * C(n, n1)).
    let n = n0 + n1;
    let c = num_integer::binomial(BigInt::from(n), BigInt::from(n1));
    Ok(Rat::new(BigInt::one(), BigInt::from(n + 1) * c))
}

/// Rule of succession: next-symbol distribution under the uniform prior,
/// [(n0+1)/(n+2), (n1+1)/(n+2)].
pub fn laplace_predict(counts: &Counts) -> Result<Vec<Rat>> {
    let (n0, n1) = require_binary(counts)?;
    let n = n0 + n1;
    Ok(vec![
        Rat::new((n0 + 1).into(), (n + 2).into()),
        Rat::new((n1 + 1).into(), (n + 2).into()),
    ])
}

/// P[theta >= 1-eps | 1^n] = 1 - (1-eps)^{n+1} under the uniform prior,
/// for eps in (0,1).
pub fn uniform_confirm_eps(n: u64, eps: &Rat) -> Result<Rat> {
    if eps <= &Rat::zero() || eps >= &Rat::one() {
        return Err(Error::Domain(
            "epsilon must lie strictly inside (0,1)".into(),
        ));
    }
    let base = Rat::one() - eps;
    Ok(Rat::one() - base.pow(n as i32 + 1))
}

/// Multistep run prediction under the uniform prior:
/// xi(1^k | 1^n) = (n+1)/(n+k+1).
pub fn uniform_multistep(n: u64, k: u64) -> Rat {
    Rat::new((n + 1).into(), (n + k + 1).into())
}

/// k -> infinity limit of `uniform_multistep`: the posterior probability
/// that *all* future symbols are ones. Exactly zero for every n under the
/// uniform prior.
pub fn uniform_confirm_all_ones(_n: u64) -> Rat {
    Rat::zero()
}

/// Finite-population analogue: having seen n of N possible ones, the
/// probability the remaining N-n are all ones is (n+1)/(N+1).
pub fn finite_population_confirm(n: u64, population: u64) -> Result<Rat> {
    if n > population {
        return Err(Error::Domain(format!(
            "observed {n} exceeds population size {population}"
        )));
    }
    Ok(Rat::new((n + 1).into(), (population + 1).into()))
}

/// Prior with an atom of mass `atom_mass` at `atom_at` plus (1 - atom_mass)
/// times the uniform density on [0,1].
#[derive(Debug, Clone)]
pub struct MixedPrior {
    atom_at: Rat,
    atom_mass: Rat,
}

impl MixedPrior {
    pub fn new(atom_at: Rat, atom_mass: Rat) -> Result<MixedPrior> {
        if atom_at < Rat::zero() || atom_at > Rat::one() {
            return Err(Error::Domain("atom location must lie in [0,1]".into()));
        }
        if atom_mass <= Rat::zero() || atom_mass >= Rat::one() {
            return Err(Error::Domain(
                "atom mass must lie strictly inside (0,1)".into(),
            ));
        }
        Ok(MixedPrior { atom_at, atom_mass })
    }

    /// The default prior: mass 1/2 on theta = 1, mass 1/2 on the uniform
    /// density.
    pub fn half_on_one() -> MixedPrior {
        MixedPrior {
            atom_at: rat(1, 1),
            atom_mass: rat(1, 2),
        }
    }

    /// Evidence of a specific binary string with the given counts.
    pub fn evidence(&self, counts: &Counts) -> Result<Rat> {
        let (n0, n1) = require_binary(counts)?;
        let cont = (Rat::one() - &self.atom_mass) * uniform_evidence(counts)?;
        let atom = &self.atom_mass
            * self.atom_at.clone().pow(n1 as i32)
            * (Rat::one() - &self.atom_at).pow(n0 as i32);
        Ok(cont + atom)
    }

    /// Next-symbol distribution given counts.
    pub fn predict(&self, counts: &Counts) -> Result<Vec<Rat>> {
        let (n0, n1) = require_binary(counts)?;
        let base = self.evidence(counts)?;
        if base.is_zero() {
            return Err(Error::ZeroProbability(
                "mixed-prior prediction on zero-probability counts".into(),
            ));
        }
        let after0 = self.evidence(&Counts::binary(n0 + 1, n1))?;
        let after1 = self.evidence(&Counts::binary(n0, n1 + 1))?;
        Ok(vec![after0 / &base, after1 / &base])
    }

    /// Posterior mass of the atom hypothesis after observing 1^n. With the
    /// default prior this is (n+1)/(n+2): the pure-induction posterior.
    /// Requires the atom at theta = 1, otherwise the event {1^infinity}
    /// keeps probability zero and the question answered would be different.
    pub fn confirm_all_ones(&self, n: u64) -> Result<Rat> {
        if !self.atom_at.is_one() {
            return Err(Error::Domain(
                "all-ones confirmation requires the atom at theta = 1".into(),
            ));
        }
        let ones = Counts::binary(0, n);
        let atom_evidence = &self.atom_mass * Rat::one();
        Ok(atom_evidence / self.evidence(&ones)?)
    }

    /// Multistep run prediction xi(1^k | 1^n). With the default prior this
    /// is [(n+k+2)/(n+k+1)] * [(n+1)/(n+2)], which tends to (n+1)/(n+2)
    /// rather than to zero as k grows.
    pub fn multistep_all_ones(&self, n: u64, k: u64) -> Result<Rat> {
        let num = self.evidence(&Counts::binary(0, n + k))?;
        let den = self.evidence(&Counts::binary(0, n))?;
        if den.is_zero() {
            return Err(Error::ZeroProbability(
                "conditioning on impossible run".into(),
            ));
        }
        Ok(num / den)
    }
}

/// Dirichlet prior parameters over a finite alphabet. All-zero parameters
/// (the improper "count ratio" prior) are representable; operations that
/// would divide by zero report a domain error instead.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<Rat>,
}

impl DirichletParams {
    pub fn new(alpha: Vec<Rat>) -> Result<DirichletParams> {
        if alpha.len() < 2 {
            return Err(Error::Domain("need at least two categories".into()));
        }
        if alpha.iter().any(|a| a.is_negative()) {
            return Err(Error::Domain(
                "Dirichlet parameters must be nonnegative".into(),
            ));
        }
        Ok(DirichletParams { alpha })
    }

    pub fn symmetric(d: usize, a: Rat) -> Result<DirichletParams> {
        DirichletParams::new(vec![a; d])
    }

    /// Laplace / uniform prior: alpha = 1.
    pub fn uniform(d: usize) -> DirichletParams {
        DirichletParams::symmetric(d, Rat::one()).expect("d >= 2 checked by caller")
    }

    /// Jeffreys prior: alpha = 1/2.
    pub fn jeffreys(d: usize) -> Result<DirichletParams> {
        DirichletParams::symmetric(d, rat(1, 2))
    }

    /// Haldane prior: alpha = 0. Predictions reduce to empirical ratios and
    /// are undefined before the first observation.
    pub fn haldane(d: usize) -> Result<DirichletParams> {
        DirichletParams::symmetric(d, Rat::zero())
    }

    pub fn alpha(&self) -> &[Rat] {
        &self.alpha
    }

    pub fn alphabet_size(&self) -> usize {
        self.alpha.len()
    }

    pub fn total(&self) -> Rat {
        self.alpha.iter().cloned().sum()
    }

    /// Predictive rule xi(a|x) = (n_a + alpha_a) / (n + sum alpha).
    pub fn predict(&self, counts: &Counts) -> Result<Vec<Rat>> {
        self.check_len(counts)?;
        let den = rat_u(counts.total()) + self.total();
        if den.is_zero() {
            return Err(Error::Domain(
                "predictive ratio undefined: no observations and zero prior mass".into(),
            ));
        }
        Ok(self
            .alpha
            .iter()
            .zip(&counts.per_symbol)
            .map(|(a, &n)| (a + rat_u(n)) / &den)
            .collect())
    }

    /// Evidence of a specific string with the given counts: a ratio of
    /// rising factorials, prod_a alpha_a^{(n_a)} / A^{(n)} with A = sum alpha.
    pub fn evidence(&self, counts: &Counts) -> Result<Rat> {
        self.check_len(counts)?;
        let n = counts.total();
        if n == 0 {
            return Ok(Rat::one());
        }
        let total = self.total();
        if total.is_zero() {
            return Err(Error::Domain(
                "evidence undefined under the all-zero prior".into(),
            ));
        }
        let mut num = Rat::one();
        for (a, &c) in self.alpha.iter().zip(&counts.per_symbol) {
            num *= rising(a, c);
        }
        Ok(num / rising(&total, n))
    }

    /// Merge categories: `groups` partitions 0..d, the grouped prior adds
    /// the parameters inside each group. Predictions then commute with
    /// grouping: grouped predictive mass equals the sum of member masses.
    pub fn group(&self, groups: &[Vec<usize>]) -> Result<DirichletParams> {
        check_partition(groups, self.alpha.len())?;
        let alpha = groups
            .iter()
            .map(|g| g.iter().map(|&i| self.alpha[i].clone()).sum())
            .collect();
        DirichletParams::new(alpha)
    }

    fn check_len(&self, counts: &Counts) -> Result<()> {
        if counts.alphabet_size() != self.alpha.len() {
            return Err(Error::Domain(format!(
                "counts over {} symbols, prior over {}",
                counts.alphabet_size(),
                self.alpha.len()
            )));
        }
        Ok(())
    }
}

/// Group counts with the same partition used for `DirichletParams::group`.
pub fn group_counts(counts: &Counts, groups: &[Vec<usize>]) -> Result<Counts> {
    check_partition(groups, counts.alphabet_size())?;
    Ok(Counts::new(
        groups
            .iter()
            .map(|g| g.iter().map(|&i| counts.per_symbol[i]).sum())
            .collect(),
    ))
}

fn check_partition(groups: &[Vec<usize>], d: usize) -> Result<()> {
    if groups.len() < 2 {
        return Err(Error::Domain(
            "grouping must keep at least two categories".into(),
        ));
    }
    let mut seen = vec![false; d];
    for g in groups {
        if g.is_empty() {
            return Err(Error::Domain("empty group in partition".into()));
        }
        for &i in g {
            if i >= d {
                return Err(Error::Domain(format!("group index {i} out of range")));
            }
            if seen[i] {
                return Err(Error::Domain(format!("index {i} appears in two groups")));
            }
            seen[i] = true;
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::Domain("grouping must cover every category".into()));
    }
    Ok(())
}

/// Rising factorial a (a+1) ... (a+n-1) as an exact rational.
fn rising(a: &Rat, n: u64) -> Rat {
    let mut acc = Rat::one();
    let mut term = a.clone();
    for _ in 0..n {
        acc *= &term;
        term += Rat::one();
    }
    acc
}

/// Jeffreys prior density on the Bernoulli parameter,
/// w(theta) = (1/pi) [theta(1-theta)]^{-1/2}, for theta strictly in (0,1).
pub fn jeffreys_density(theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) || theta == 0.0 || theta == 1.0 {
        return Err(Error::Domain(format!(
            "Jeffreys density defined on open (0,1), got {theta}"
        )));
    }
    Ok(1.0 / (std::f64::consts::PI * (theta * (1.0 - theta)).sqrt()))
}

/// ln of the uniform-prior evidence: ln[n1! n0! / (n+1)!].
pub fn uniform_log_evidence(n0: u64, n1: u64) -> f64 {
    ln_gamma(n1 as f64 + 1.0) + ln_gamma(n0 as f64 + 1.0) - ln_gamma((n0 + n1) as f64 + 2.0)
}

/// ln of the Jeffreys-prior evidence: ln[B(n1+1/2, n0+1/2) / B(1/2, 1/2)].
pub fn jeffreys_log_evidence(n0: u64, n1: u64) -> f64 {
    ln_gamma(n1 as f64 + 0.5) + ln_gamma(n0 as f64 + 0.5)
        - ln_gamma((n0 + n1) as f64 + 1.0)
        - std::f64::consts::PI.ln()
}

/// Density of one simplex coordinate under Dirichlet(alpha), evaluated on a
/// theta grid by marginalising the remaining coordinates numerically.
///
/// d = 2 needs no integration; d = 3 integrates the second coordinate with a
/// composite Simpson rule on a sine-squared substitution (4096 panels, 4097
/// nodes), which keeps endpoint behaviour integrable for alpha >= 1/2.
/// Larger d is not supported. Closed-form cross-check: the marginal of
/// coordinate i is Beta(alpha_i, sum(alpha) - alpha_i); for d = 3 and
/// alpha = (1,1,1) that is 2(1 - theta).
pub fn induced_marginal_density(
    params: &DirichletParams,
    component: usize,
    thetas: &[f64],
) -> Result<Vec<f64>> {
    let d = params.alphabet_size();
    if component >= d {
        return Err(Error::Domain(format!(
            "component {component} out of range for d={d}"
        )));
    }
    let alpha: Vec<f64> = params
        .alpha
        .iter()
        .map(crate::numeric::rat_to_f64)
        .collect();
    if alpha.iter().any(|&a| a < 0.5) {
        return Err(Error::Domain(
            "numeric marginalisation supports alpha >= 1/2 per coordinate".into(),
        ));
    }
    if thetas.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Domain("theta grid must lie inside [0,1]".into()));
    }
    match d {
        2 => {
            // The marginal is the Beta(alpha_c, alpha_other) density itself.
            let (a1, a2) = (alpha[component], alpha[1 - component]);
            let ln_norm = ln_gamma(a1 + a2) - ln_gamma(a1) - ln_gamma(a2);
            Ok(thetas
                .iter()
                .map(|&t| beta_like(t, a1, a2, ln_norm))
                .collect())
        }
        3 => {
            let a1 = alpha[component];
            let rest: Vec<f64> = (0..3)
                .filter(|&i| i != component)
                .map(|i| alpha[i])
                .collect();
            let (a2, a3) = (rest[0], rest[1]);
            // Normaliser of the Dirichlet density over the 2-simplex.
            let ln_norm = ln_gamma(a1 + a2 + a3) - ln_gamma(a1) - ln_gamma(a2) - ln_gamma(a3);
            const PANELS: usize = 4096;
            Ok(thetas
                .iter()
                .map(|&t| {
                    if t == 1.0 {
                        // Zero-length slice: the marginal vanishes unless the
                        // density diverges there, which alpha >= 1/2 forbids
                        // for d = 3 (a2 + a3 >= 1).
                        return 0.0;
                    }
                    let width = 1.0 - t;
                    // Second coordinate u = width * sin^2(pi v / 2).
                    let f = |v: f64| {
                        let s = (std::f64::consts::FRAC_PI_2 * v).sin();
                        let c = (std::f64::consts::FRAC_PI_2 * v).cos();
                        let u = width * s * s;
                        let w3 = width - u;
                        let du = width * std::f64::consts::PI * s * c;
                        pow_like(t, a1 - 1.0) * pow_like(u, a2 - 1.0) * pow_like(w3, a3 - 1.0) * du
                    };
                    ln_norm.exp() * simpson(f, 0.0, 1.0, PANELS)
                })
                .collect())
        }
        _ => Err(Error::Domain(format!(
            "numeric marginalisation implemented for d in {{2,3}}, got d={d}"
        ))),
    }
}

/// t^p with the 0^0 = 1 convention and +inf clamped to a finite overflow
/// guard never reached for the supported alpha range.
fn pow_like(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        if p > 0.0 {
            0.0
        } else if p == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        t.powf(p)
    }
}

fn beta_like(t: f64, a1: f64, a2: f64, ln_norm: f64) -> f64 {
    if (t == 0.0 && a1 < 1.0) || (t == 1.0 && a2 < 1.0) {
        return f64::INFINITY;
    }
    ln_norm.exp() * pow_like(t, a1 - 1.0) * pow_like(1.0 - t, a2 - 1.0)
}

/// Exchangeable evidence evaluated from symbol counts; the interface the
/// divergence module uses for exact expectation sweeps.
pub trait CountEvidence {
    fn alphabet_size(&self) -> usize;
    /// ln of the evidence assigned to one specific string with these counts.
    fn log_evidence(&self, counts: &Counts) -> f64;
    /// Exact evidence when the evaluator supports it.
    fn exact_evidence(&self, counts: &Counts) -> Option<Rat>;
}

/// Uniform prior on the Bernoulli parameter as a `CountEvidence`.
#[derive(Debug, Clone, Copy)]
pub struct UniformBetaEvidence;

impl CountEvidence for UniformBetaEvidence {
    fn alphabet_size(&self) -> usize {
        2
    }

    fn log_evidence(&self, counts: &Counts) -> f64 {
        uniform_log_evidence(counts.per_symbol[0], counts.per_symbol[1])
    }

    fn exact_evidence(&self, counts: &Counts) -> Option<Rat> {
        uniform_evidence(counts).ok()
    }
}

/// Jeffreys prior on the Bernoulli parameter as a `CountEvidence`.
#[derive(Debug, Clone, Copy)]
pub struct JeffreysEvidence;

impl CountEvidence for JeffreysEvidence {
    fn alphabet_size(&self) -> usize {
        2
    }

    fn log_evidence(&self, counts: &Counts) -> f64 {
        jeffreys_log_evidence(counts.per_symbol[0], counts.per_symbol[1])
    }

    fn exact_evidence(&self, _counts: &Counts) -> Option<Rat> {
        None
    }
}

impl CountEvidence for DirichletParams {
    fn alphabet_size(&self) -> usize {
        self.alpha.len()
    }

    fn log_evidence(&self, counts: &Counts) -> f64 {
        match self.evidence(counts) {
            Ok(e) if !e.is_zero() => crate::numeric::ln_rat(&e),
            _ => f64::NEG_INFINITY,
        }
    }

    fn exact_evidence(&self, counts: &Counts) -> Option<Rat> {
        self.evidence(counts).ok()
    }
}

impl CountEvidence for MixedPrior {
    fn alphabet_size(&self) -> usize {
        2
    }

    fn log_evidence(&self, counts: &Counts) -> f64 {
        match self.evidence(counts) {
            Ok(e) if !e.is_zero() => crate::numeric::ln_rat(&e),
            _ => f64::NEG_INFINITY,
        }
    }

    fn exact_evidence(&self, counts: &Counts) -> Option<Rat> {
        self.evidence(counts).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat_to_f64;

    #[test]
    fn rule_of_succession_and_sunrise() {
        // 1826213 consecutive sunrises: probability of failure tomorrow.
        let counts = Counts::binary(0, 1_826_213);
        let pred = laplace_predict(&counts).unwrap();
        assert_eq!(pred[0], rat(1, 1_826_215));
        assert_eq!(pred[1], rat(1_826_214, 1_826_215));
        // Predictive mass always sums to one.
        assert_eq!(pred[0].clone() + pred[1].clone(), Rat::one());
    }

    #[test]
    fn uniform_evidence_pinned() {
        assert_eq!(uniform_evidence(&Counts::binary(1, 1)).unwrap(), rat(1, 6));
        assert_eq!(uniform_evidence(&Counts::binary(0, 0)).unwrap(), rat(1, 1));
        // On all-ones strings: 1/(n+1).
        for n in [1u64, 2, 5, 10] {
            assert_eq!(
                uniform_evidence(&Counts::binary(0, n)).unwrap(),
                Rat::new(1.into(), (n + 1).into())
            );
        }
    }

    #[test]
    fn evidence_is_prediction_consistent() {
        // xi(x1) = xi(x)*xi(1|x): the closed forms agree with each other.
        for (n0, n1) in [(0u64, 0u64), (2, 3), (5, 0), (4, 4)] {
            let e = uniform_evidence(&Counts::binary(n0, n1)).unwrap();
            let p = laplace_predict(&Counts::binary(n0, n1)).unwrap();
            let e1 = uniform_evidence(&Counts::binary(n0, n1 + 1)).unwrap();
            assert_eq!(e * &p[1], e1);
        }
    }

    #[test]
    fn eps_confirmation() {
        // 1 - (1-eps)^{n+1}, exact.
        let eps = rat(1, 10);
        assert_eq!(
            uniform_confirm_eps(1, &eps).unwrap(),
            Rat::one() - rat(81, 100)
        );
        // Monotone in n, approaching 1.
        let p5 = uniform_confirm_eps(5, &eps).unwrap();
        let p50 = uniform_confirm_eps(50, &eps).unwrap();
        assert!(p5 < p50 && p50 < Rat::one());
        assert!(uniform_confirm_eps(3, &rat(0, 1)).is_err());
        assert!(uniform_confirm_eps(3, &rat(1, 1)).is_err());
    }

    #[test]
    fn multistep_and_its_limit() {
        assert_eq!(uniform_multistep(10, 1), rat(11, 12));
        assert_eq!(uniform_multistep(10, 100), rat(11, 111));
        assert_eq!(uniform_confirm_all_ones(1_000_000), Rat::zero());
    }

    #[test]
    fn finite_population() {
        assert_eq!(finite_population_confirm(9, 99).unwrap(), rat(10, 100));
        assert_eq!(finite_population_confirm(99, 99).unwrap(), Rat::one());
        assert!(finite_population_confirm(100, 99).is_err());
    }

    #[test]
    fn mixed_prior_pinned_values() {
        let m = MixedPrior::half_on_one();
        // Evidence of 1^n: (n+2) / (2(n+1)).
        for n in [0u64, 1, 2, 10] {
            assert_eq!(
                m.evidence(&Counts::binary(0, n)).unwrap(),
                Rat::new((n + 2).into(), (2 * (n + 1)).into())
            );
        }
        // Posterior of the point hypothesis after 1^n: (n+1)/(n+2).
        assert_eq!(m.confirm_all_ones(10).unwrap(), rat(11, 12));
        // Probability of a zero after 1^n: 1/(n+2)^2.
        for n in [0u64, 3, 17] {
            let pred = m.predict(&Counts::binary(0, n)).unwrap();
            assert_eq!(pred[0], Rat::new(1.into(), ((n + 2) * (n + 2)).into()));
        }
        // Multistep: [(n+k+2)/(n+k+1)] * [(n+1)/(n+2)].
        let (n, k) = (4u64, 7u64);
        assert_eq!(
            m.multistep_all_ones(n, k).unwrap(),
            Rat::new((n + k + 2).into(), (n + k + 1).into())
                * Rat::new((n + 1).into(), (n + 2).into())
        );
        // The k -> infinity limit is (n+1)/(n+2), not zero: check monotone
        // approach from above.
        let lim = rat(5, 6);
        let v10 = m.multistep_all_ones(4, 10).unwrap();
        let v100 = m.multistep_all_ones(4, 100).unwrap();
        assert!(v10 > v100 && v100 > lim);
    }

    #[test]
    fn mixed_prior_off_one_atom() {
        let m = MixedPrior::new(rat(1, 2), rat(1, 3)).unwrap();
        // Evidence blends the uniform term and the atom term.
        let e = m.evidence(&Counts::binary(1, 1)).unwrap();
        assert_eq!(e, rat(2, 3) * rat(1, 6) + rat(1, 3) * rat(1, 4));
        assert!(m.confirm_all_ones(3).is_err());
        assert!(MixedPrior::new(rat(1, 2), rat(0, 1)).is_err());
        assert!(MixedPrior::new(rat(3, 2), rat(1, 2)).is_err());
    }

    #[test]
    fn dirichlet_predictive_rule() {
        // Symmetric alpha = 1/2 over three symbols, counts (2,0,1):
        // xi(0|x) = (2 + 1/2) / (3 + 3/2) = 5/9.
        let p = DirichletParams::jeffreys(3).unwrap();
        let pred = p.predict(&Counts::new(vec![2, 0, 1])).unwrap();
        assert_eq!(pred[0], rat(5, 9));
        assert_eq!(pred[1], rat(1, 9));
        assert_eq!(pred[2], rat(3, 9));
        let total: Rat = pred.into_iter().sum();
        assert_eq!(total, Rat::one());
        // Binary Jeffreys after a single 1: (1 + 1/2) / (1 + 1) = 3/4.
        let b = DirichletParams::jeffreys(2).unwrap();
        assert_eq!(b.predict(&Counts::binary(0, 1)).unwrap()[1], rat(3, 4));
    }

    #[test]
    fn haldane_prior_edges() {
        let h = DirichletParams::haldane(2).unwrap();
        // Undefined before any observation.
        assert!(h.predict(&Counts::binary(0, 0)).is_err());
        // After 1^n predicts 1 with certainty.
        for n in [1u64, 4, 9] {
            let pred = h.predict(&Counts::binary(0, n)).unwrap();
            assert_eq!(pred[1], Rat::one());
            assert_eq!(pred[0], Rat::zero());
        }
        assert!(h.evidence(&Counts::binary(1, 2)).is_err());
    }

    #[test]
    fn uniform_dirichlet_matches_laplace() {
        let u = DirichletParams::uniform(2);
        for (n0, n1) in [(0u64, 0u64), (3, 1), (0, 9)] {
            assert_eq!(
                u.predict(&Counts::binary(n0, n1)).unwrap(),
                laplace_predict(&Counts::binary(n0, n1)).unwrap()
            );
        }
        // And the evidence agrees with the factorial closed form.
        assert_eq!(
            u.evidence(&Counts::binary(2, 3)).unwrap(),
            uniform_evidence(&Counts::binary(2, 3)).unwrap()
        );
    }

    #[test]
    fn grouping_commutes_with_prediction() {
        // Merge categories 1 and 2 of a 3-symbol Dirichlet: predictive mass
        // of the merged category equals the sum of its members', exactly.
        let p = DirichletParams::new(vec![rat(1, 2), rat(1, 3), rat(2, 1)]).unwrap();
        let counts = Counts::new(vec![4, 1, 3]);
        let groups = vec![vec![0], vec![1, 2]];
        let grouped = p.group(&groups).unwrap();
        let gcounts = group_counts(&counts, &groups).unwrap();
        let fine = p.predict(&counts).unwrap();
        let coarse = grouped.predict(&gcounts).unwrap();
        assert_eq!(coarse[0], fine[0]);
        assert_eq!(coarse[1], fine[1].clone() + fine[2].clone());
        // Grouped evidence of a string equals... (not an identity: evidence
        // depends on within-group order). Only the predictive identity is
        // claimed.
        assert!(p.group(&[vec![0], vec![1]]).is_err());
        assert!(p.group(&[vec![0, 1, 2], vec![]]).is_err());
        assert!(p.group(&[vec![0, 1], vec![1, 2]]).is_err());
    }

    #[test]
    fn jeffreys_density_values() {
        assert!((jeffreys_density(0.5).unwrap() - 2.0 / std::f64::consts::PI).abs() < 1e-15);
        // Symmetry.
        assert!((jeffreys_density(0.1).unwrap() - jeffreys_density(0.9).unwrap()).abs() < 1e-12);
        assert!(jeffreys_density(0.0).is_err());
        assert!(jeffreys_density(1.0).is_err());
        // Integrates to 1: substitute theta = sin^2(pi v / 2), which makes
        // the integrand exactly 1 when the density is correct; Simpson then
        // verifies the function values rather than the substitution.
        let integral = simpson(
            |v| {
                let s = (std::f64::consts::FRAC_PI_2 * v).sin();
                let c = (std::f64::consts::FRAC_PI_2 * v).cos();
                let theta = s * s;
                if theta == 0.0 || theta == 1.0 {
                    return 1.0; // limit of the substituted integrand
                }
                jeffreys_density(theta).unwrap() * std::f64::consts::PI * s * c
            },
            0.0,
            1.0,
            512,
        );
        assert!((integral - 1.0).abs() < 1e-6, "got {integral}");
    }

    #[test]
    fn jeffreys_log_evidence_consistent_with_predictive() {
        // exp(log E(n0, n1+1) - log E(n0, n1)) = (n1 + 1/2)/(n + 1).
        for (n0, n1) in [(0u64, 0u64), (2, 3), (7, 1)] {
            let step = (jeffreys_log_evidence(n0, n1 + 1) - jeffreys_log_evidence(n0, n1)).exp();
            let want = (n1 as f64 + 0.5) / ((n0 + n1) as f64 + 1.0);
            assert!((step - want).abs() < 1e-12);
        }
        // And the uniform variant matches its exact counterpart.
        let exact = rat_to_f64(&uniform_evidence(&Counts::binary(3, 4)).unwrap());
        assert!((uniform_log_evidence(3, 4).exp() - exact).abs() < 1e-15);
    }

    #[test]
    fn marginal_density_d2_is_the_beta_density() {
        let p = DirichletParams::uniform(2);
        let grid = [0.0, 0.25, 0.5, 1.0];
        let vals = induced_marginal_density(&p, 0, &grid).unwrap();
        for v in vals {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_density_d3_uniform_is_two_one_minus_theta() {
        let p = DirichletParams::uniform(3);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        for component in 0..3 {
            let vals = induced_marginal_density(&p, component, &grid).unwrap();
            for (t, v) in grid.iter().zip(&vals) {
                let want = 2.0 * (1.0 - t);
                assert!((v - want).abs() < 1e-6, "theta={t}: got {v}, want {want}");
            }
        }
    }

    #[test]
    fn marginal_density_d3_integrates_to_one() {
        // Asymmetric parameters: marginal of coordinate 0 under (2,1,1) is
        // Beta(2,2); quadrature should reproduce 6 theta (1-theta).
        let p = DirichletParams::new(vec![rat(2, 1), rat(1, 1), rat(1, 1)]).unwrap();
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let vals = induced_marginal_density(&p, 0, &grid).unwrap();
        for (t, v) in grid.iter().zip(&vals) {
            let want = 6.0 * t * (1.0 - t);
            assert!((v - want).abs() < 1e-6, "theta={t}: got {v}, want {want}");
        }
    }

    #[test]
    fn marginal_density_guards() {
        let p = DirichletParams::uniform(3);
        assert!(induced_marginal_density(&p, 3, &[0.5]).is_err());
        assert!(induced_marginal_density(&p, 0, &[1.5]).is_err());
        let q = DirichletParams::symmetric(4, Rat::one()).unwrap();
        assert!(induced_marginal_density(&q, 0, &[0.5]).is_err());
        let thin = DirichletParams::symmetric(3, rat(1, 4)).unwrap();
        assert!(induced_marginal_density(&thin, 0, &[0.5]).is_err());
    }
}
