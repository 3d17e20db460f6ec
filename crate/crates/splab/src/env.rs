//! Generating environments over a finite alphabet: i.i.d. (Bernoulli and
//! multinomial), first-order Markov chains, and deterministic sequences.
//!
//! Every environment here is a proper measure: sum_a nu(xa) = nu(x) exactly.
//! Parameters are exact rationals; each environment evaluates either exactly
//! (`exact_prob`) or in the f64 log domain (`logprob`). Deterministic
//! environments are point masses, so their probabilities are 0 or 1 and the
//! class plays the role of "computable sequences" in bound experiments.
//!
//! Spec strings:
//!   bernoulli:3/10
//!   multinomial:[1/2,1/4,1/4]
//!   markov:[[9/10,1/10],[1/2,1/2]]      (initial state distribution: uniform)
//!   det:pattern=01
//!   det:champernowne

use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::numeric::{format_rational, ln_rat, parse_rational, rat_to_f64, Rat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DetGenerator {
    /// Cyclic repetition of a fixed nonempty pattern.
    Pattern(Vec<u8>),
    /// Binary Champernowne sequence: concatenated binary expansions of
    /// 1, 2, 3, ... (1 10 11 100 ...). Computable and aperiodic.
    Champernowne,
}

impl DetGenerator {
    /// Symbol at position `t` (0-based).
    pub fn symbol_at(&self, t: u64) -> u8 {
        match self {
            DetGenerator::Pattern(p) => p[(t % p.len() as u64) as usize],
            DetGenerator::Champernowne => champernowne_bit(t),
        }
    }

    pub fn prefix(&self, n: usize) -> Vec<u8> {
        (0..n as u64).map(|t| self.symbol_at(t)).collect()
    }
}

/// Bit `t` of the binary Champernowne sequence.
fn champernowne_bit(t: u64) -> u8 {
    // Walk the blocks "1", "10", "11", "100", ...; block for integer k has
    // bit_length(k) bits. Fast enough for the horizons used here.
    let mut k = 1u64;
    let mut pos = t;
    loop {
        let len = 64 - k.leading_zeros() as u64;
        if pos < len {
            return ((k >> (len - 1 - pos)) & 1) as u8;
        }
        pos -= len;
        k += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    /// i.i.d. binary source; `p1` is the probability of symbol 1.
    Bernoulli { p1: Rat },
    /// i.i.d. source over an alphabet of `probs.len()` symbols.
    Multinomial { probs: Vec<Rat> },
    /// First-order chain; `rows[s]` is the distribution of the next symbol
    /// after `s`. The initial symbol is drawn uniformly (a convention; the
    /// spec string carries only the transition matrix).
    Markov { rows: Vec<Vec<Rat>> },
    /// Point mass on one infinite sequence.
    Deterministic { gen: DetGenerator, alphabet: u8 },
}

impl Environment {
    pub fn bernoulli(p1: Rat) -> Result<Environment> {
        check_unit_interval(&p1, "bernoulli parameter")?;
        Ok(Environment::Bernoulli { p1 })
    }

    pub fn multinomial(probs: Vec<Rat>) -> Result<Environment> {
        Alphabet::new(probs.len() as u8)?;
        check_distribution(&probs, "multinomial distribution")?;
        Ok(Environment::Multinomial { probs })
    }

    pub fn markov(rows: Vec<Vec<Rat>>) -> Result<Environment> {
        let d = rows.len();
        Alphabet::new(d as u8)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Domain(format!(
                    "markov row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            check_distribution(row, &format!("markov row {i}"))?;
        }
        Ok(Environment::Markov { rows })
    }

    pub fn deterministic(gen: DetGenerator, alphabet: u8) -> Result<Environment> {
        let a = Alphabet::new(alphabet)?;
        if let DetGenerator::Pattern(p) = &gen {
            if p.is_empty() {
                return Err(Error::Domain("empty deterministic pattern".into()));
            }
            if let Some(&bad) = p.iter().find(|&&s| !a.contains(s)) {
                return Err(Error::Domain(format!(
                    "pattern symbol {bad} outside alphabet of size {alphabet}"
                )));
            }
        }
        Ok(Environment::Deterministic { gen, alphabet })
    }

    pub fn alphabet(&self) -> Alphabet {
        let size = match self {
            Environment::Bernoulli { .. } => 2,
            Environment::Multinomial { probs } => probs.len() as u8,
            Environment::Markov { rows } => rows.len() as u8,
            Environment::Deterministic { alphabet, .. } => *alphabet,
        };
        Alphabet::new(size).expect("validated at construction")
    }

    /// Exact probability nu(x) of the finite prefix `xs`.
    pub fn exact_prob(&self, xs: &[u8]) -> Rat {
        let mut cur = self.cursor();
        let mut acc = Rat::one();
        for &a in xs {
            acc *= cur.exact_conditional()[a as usize].clone();
            if acc.is_zero() {
                return acc;
            }
            cur.advance(a);
        }
        acc
    }

    /// ln nu(x); `-inf` when the prefix has probability zero.
    pub fn logprob(&self, xs: &[u8]) -> f64 {
        let mut cur = self.cursor();
        let mut acc = 0.0;
        for &a in xs {
            let step = cur.cond_ln(a);
            if step == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            acc += step;
            cur.advance(a);
        }
        acc
    }

    /// Exact one-step predictive distribution nu(.|xs).
    /// Errors when nu(xs) = 0: conditioning on an impossible prefix.
    pub fn exact_conditional(&self, xs: &[u8]) -> Result<Vec<Rat>> {
        let mut cur = self.cursor();
        for &a in xs {
            if cur.exact_conditional()[a as usize].is_zero() {
                return Err(Error::ZeroProbability(format!(
                    "prefix has probability zero under this environment at symbol {a}"
                )));
            }
            cur.advance(a);
        }
        Ok(cur.exact_conditional())
    }

    pub fn conditional(&self, xs: &[u8]) -> Result<Vec<f64>> {
        Ok(self.exact_conditional(xs)?.iter().map(rat_to_f64).collect())
    }

    /// Streaming evaluator positioned at the empty prefix.
    pub fn cursor(&self) -> EnvCursor<'_> {
        let ln = |p: &Rat| {
            if p.is_zero() {
                f64::NEG_INFINITY
            } else {
                ln_rat(p)
            }
        };
        // Conditional-row logs cached once so per-step queries stay in f64:
        // i.i.d. sources get one row; chains get their rows plus the uniform
        // initial row appended at index d.
        let ln_rows: Vec<Vec<f64>> = match self {
            Environment::Bernoulli { p1 } => vec![vec![ln(&(Rat::one() - p1)), ln(p1)]],
            Environment::Multinomial { probs } => vec![probs.iter().map(ln).collect()],
            Environment::Markov { rows } => {
                let d = rows.len();
                let mut v: Vec<Vec<f64>> =
                    rows.iter().map(|r| r.iter().map(ln).collect()).collect();
                v.push(vec![-(d as f64).ln(); d]);
                v
            }
            Environment::Deterministic { .. } => Vec::new(),
        };
        EnvCursor {
            env: self,
            t: 0,
            last: None,
            dead: false,
            ln_rows,
        }
    }

    /// Draw `n` symbols with a deterministic ChaCha8 stream.
    pub fn sample_sequence(&self, n: usize, seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cur = self.cursor();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let probs = cur.cond_f64();
            let a = sample_index(&mut rng, &probs);
            out.push(a);
            cur.advance(a);
        }
        out
    }

    pub fn spec_string(&self) -> String {
        match self {
            Environment::Bernoulli { p1 } => format!("bernoulli:{}", format_rational(p1)),
            Environment::Multinomial { probs } => {
                format!("multinomial:[{}]", join_rationals(probs))
            }
            Environment::Markov { rows } => {
                let body: Vec<String> = rows
                    .iter()
                    .map(|r| format!("[{}]", join_rationals(r)))
                    .collect();
                format!("markov:[{}]", body.join(","))
            }
            Environment::Deterministic { gen, .. } => match gen {
                DetGenerator::Pattern(p) => {
                    format!("det:pattern={}", crate::alphabet::format_symbols(p))
                }
                DetGenerator::Champernowne => "det:champernowne".into(),
            },
        }
    }
}

fn join_rationals(rs: &[Rat]) -> String {
    rs.iter().map(format_rational).collect::<Vec<_>>().join(",")
}

fn check_unit_interval(r: &Rat, what: &str) -> Result<()> {
    if *r < Rat::zero() || *r > Rat::one() {
        return Err(Error::Domain(format!("{what} must lie in [0,1]")));
    }
    Ok(())
}

fn check_distribution(probs: &[Rat], what: &str) -> Result<()> {
    let mut sum = Rat::zero();
    for p in probs {
        if p < &Rat::zero() {
            return Err(Error::Domain(format!("{what} has a negative entry")));
        }
        sum += p;
    }
    if !sum.is_one() {
        return Err(Error::Domain(format!("{what} must sum to exactly 1")));
    }
    Ok(())
}

fn sample_index(rng: &mut impl Rng, probs: &[f64]) -> u8 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u8;
        }
    }
    (probs.len() - 1) as u8
}

/// Incremental evaluator: O(1) state per step, so million-sample Monte Carlo
/// runs do not re-scan prefixes.
#[derive(Debug, Clone)]
pub struct EnvCursor<'a> {
    env: &'a Environment,
    t: u64,
    last: Option<u8>,
    /// Set once a deterministic environment has seen an off-sequence symbol.
    dead: bool,
    /// ln of the conditional rows (see `Environment::cursor`); empty for
    /// deterministic sources.
    ln_rows: Vec<Vec<f64>>,
}

impl EnvCursor<'_> {
    pub fn exact_conditional(&self) -> Vec<Rat> {
        let d = self.env.alphabet().size() as usize;
        match self.env {
            Environment::Bernoulli { p1 } => vec![Rat::one() - p1.clone(), p1.clone()],
            Environment::Multinomial { probs } => probs.clone(),
            Environment::Markov { rows } => match self.last {
                None => {
                    let u = Rat::new(1.into(), (d as i64).into());
                    vec![u; d]
                }
                Some(s) => rows[s as usize].clone(),
            },
            Environment::Deterministic { gen, .. } => {
                let mut v = vec![Rat::zero(); d];
                if !self.dead {
                    v[gen.symbol_at(self.t) as usize] = Rat::one();
                }
                v
            }
        }
    }

    pub fn cond_f64(&self) -> Vec<f64> {
        self.exact_conditional().iter().map(rat_to_f64).collect()
    }

    /// ln of the conditional probability of one symbol; cheaper than
    /// materialising the whole distribution (table lookup, no allocation).
    pub fn cond_ln(&self, a: u8) -> f64 {
        match self.env {
            Environment::Bernoulli { .. } | Environment::Multinomial { .. } => {
                self.ln_rows[0][a as usize]
            }
            Environment::Markov { rows } => match self.last {
                None => self.ln_rows[rows.len()][a as usize],
                Some(s) => self.ln_rows[s as usize][a as usize],
            },
            Environment::Deterministic { gen, .. } => {
                if !self.dead && gen.symbol_at(self.t) == a {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn advance(&mut self, a: u8) {
        if let Environment::Deterministic { gen, .. } = self.env {
            if gen.symbol_at(self.t) != a {
                self.dead = true;
            }
        }
        self.last = Some(a);
        self.t += 1;
    }
}

/// Parse an environment spec string (grammar at the top of this module).
pub fn parse_env_spec(s: &str) -> Result<Environment> {
    let s = s.trim();
    let (kind, rest) = match s.find(':') {
        Some(i) => (&s[..i], s[i + 1..].trim()),
        None => (s, ""),
    };
    match kind.trim() {
        "bernoulli" => Environment::bernoulli(parse_rational(rest)?),
        "multinomial" => {
            let items = parse_bracket_list(rest)?;
            let probs = items
                .iter()
                .map(|t| parse_rational(t))
                .collect::<Result<Vec<_>>>()?;
            Environment::multinomial(probs)
        }
        "markov" => {
            let rows_text = parse_bracket_list(rest)?;
            let rows = rows_text
                .iter()
                .map(|row| {
                    let cells = parse_bracket_list(row)?;
                    cells
                        .iter()
                        .map(|t| parse_rational(t))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Environment::markov(rows)
        }
        "det" => {
            if rest == "champernowne" {
                Environment::deterministic(DetGenerator::Champernowne, 2)
            } else if let Some(p) = rest.strip_prefix("pattern=") {
                let digits = p
                    .trim()
                    .chars()
                    .map(|c| {
                        c.to_digit(10)
                            .map(|d| d as u8)
                            .ok_or_else(|| Error::parse(format!("bad pattern digit {c:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if digits.is_empty() {
                    return Err(Error::parse("empty deterministic pattern"));
                }
                let alphabet = digits.iter().max().unwrap().max(&1) + 1;
                Environment::deterministic(DetGenerator::Pattern(digits), alphabet.max(2))
            } else {
                Err(Error::parse(format!(
                    "unknown deterministic generator {rest:?}; expected pattern=... or champernowne"
                )))
            }
        }
        other => Err(Error::parse(format!(
            "unknown environment kind {other:?}; expected bernoulli, multinomial, markov, or det"
        ))),
    }
}

/// Split a `[a,b,...]` list at top nesting level. Elements may themselves
/// contain brackets or parentheses (Markov rows, mixture entries).
pub fn parse_bracket_list(s: &str) -> Result<Vec<String>> {
    let s = s.trim();
    if !s.starts_with('[') || !s.ends_with(']') {
        return Err(Error::parse(format!("expected a [...] list, found {s:?}")));
    }
    split_top_level(&s[1..s.len() - 1])
}

/// Split on commas that are not nested inside brackets or parentheses.
pub fn split_top_level(s: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut depth: i32 = 0;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '[' | '(' => {
                depth += 1;
                cur.push(c);
            }
            ']' | ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(Error::parse("unbalanced brackets in list"));
                }
                cur.push(c);
            }
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
            }
            _ => cur.push(c),
        }
    }
    if depth != 0 {
        return Err(Error::parse("unbalanced brackets in list"));
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur.trim().to_string());
    }
    if out.iter().any(|e| e.is_empty()) {
        return Err(Error::parse("empty element in list"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;

    #[test]
    fn fair_coin_prefix_logprob() {
        let env = parse_env_spec("bernoulli:1/2").unwrap();
        let xs = [0u8, 1, 1];
        assert_eq!(env.exact_prob(&xs), rat(1, 8));
        let got = env.logprob(&xs);
        assert!((got - (1f64 / 8.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn multinomial_iid_product() {
        let env = parse_env_spec("multinomial:[1/2,1/4,1/4]").unwrap();
        // P(021) = 1/2 * 1/4 * 1/4 = 1/32.
        assert_eq!(env.exact_prob(&[0, 2, 1]), rat(1, 32));
    }

    #[test]
    fn markov_uses_uniform_initial_state() {
        let env = parse_env_spec("markov:[[9/10,1/10],[1/2,1/2]]").unwrap();
        // P(01) = 1/2 * 1/10.
        assert_eq!(env.exact_prob(&[0, 1]), rat(1, 20));
        // Conditional after "0" is row 0.
        assert_eq!(
            env.exact_conditional(&[0]).unwrap(),
            vec![rat(9, 10), rat(1, 10)]
        );
    }

    #[test]
    fn deterministic_point_mass() {
        let env = parse_env_spec("det:pattern=01").unwrap();
        assert_eq!(env.exact_prob(&[0, 1, 0, 1]), rat(1, 1));
        assert_eq!(env.exact_prob(&[0, 0]), rat(0, 1));
        // Conditioning on an off-sequence prefix is an error.
        assert!(matches!(
            env.exact_conditional(&[1]),
            Err(Error::ZeroProbability(_))
        ));
        // On-sequence conditional is a point mass on the next pattern symbol.
        assert_eq!(
            env.exact_conditional(&[0]).unwrap(),
            vec![rat(0, 1), rat(1, 1)]
        );
    }

    #[test]
    fn champernowne_prefix() {
        // Blocks: 1,10,11,100,101 -> 1 10 11 100 101.
        let env = parse_env_spec("det:champernowne").unwrap();
        let Environment::Deterministic { gen, .. } = &env else {
            panic!()
        };
        assert_eq!(gen.prefix(11), vec![1, 1, 0, 1, 1, 1, 0, 0, 1, 0, 1]);
    }

    #[test]
    fn measures_never_leak_mass() {
        // sum_a nu(xa) = nu(x) exactly, for several envs and prefixes.
        let specs = [
            "bernoulli:3/10",
            "multinomial:[1/2,1/4,1/4]",
            "markov:[[9/10,1/10],[1/2,1/2]]",
            "det:pattern=010",
        ];
        for spec in specs {
            let env = parse_env_spec(spec).unwrap();
            let d = env.alphabet().size();
            for xs in [vec![], vec![0u8], vec![0, 1], vec![1, 1, 0]] {
                if xs.iter().any(|&s| s >= d) {
                    continue;
                }
                let base = env.exact_prob(&xs);
                let mut total = Rat::zero();
                for a in 0..d {
                    let mut ext = xs.clone();
                    ext.push(a);
                    total += env.exact_prob(&ext);
                }
                assert_eq!(total, base, "mass leak for {spec} at {xs:?}");
            }
        }
    }

    #[test]
    fn sampling_matches_frequencies() {
        let env = parse_env_spec("bernoulli:3/10").unwrap();
        let xs = env.sample_sequence(100_000, 7);
        let ones = xs.iter().filter(|&&x| x == 1).count() as f64 / 100_000.0;
        assert!((ones - 0.3).abs() < 0.01, "empirical frequency {ones}");
        // Degenerate environment samples its own sequence.
        let det = parse_env_spec("det:pattern=01").unwrap();
        assert_eq!(det.sample_sequence(6, 1), vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let env = parse_env_spec("markov:[[9/10,1/10],[1/2,1/2]]").unwrap();
        assert_eq!(env.sample_sequence(64, 5), env.sample_sequence(64, 5));
        assert_ne!(env.sample_sequence(64, 5), env.sample_sequence(64, 6));
    }

    #[test]
    fn spec_parse_errors() {
        assert!(parse_env_spec("bernoulli:3/0").is_err());
        assert!(parse_env_spec("bernoulli:7/5").is_err());
        assert!(parse_env_spec("multinomial:[1/2,1/4]").is_err());
        assert!(parse_env_spec("markov:[[1/2,1/2],[1/2]]").is_err());
        assert!(parse_env_spec("det:pattern=").is_err());
        assert!(parse_env_spec("warp:9").is_err());
        assert!(parse_env_spec("multinomial:[1/2,[1/4,1/4]").is_err());
    }

    #[test]
    fn spec_string_roundtrip() {
        for spec in [
            "bernoulli:3/10",
            "multinomial:[1/2,1/4,1/4]",
            "markov:[[9/10,1/10],[1/2,1/2]]",
            "det:pattern=01",
            "det:champernowne",
        ] {
            let env = parse_env_spec(spec).unwrap();
            assert_eq!(env, parse_env_spec(&env.spec_string()).unwrap());
        }
    }
}
