//! Numeric helpers shared across modules: exact rationals, logs of big
//! rationals, log-sum-exp, deterministic seed derivation, and a composite
//! Simpson rule for the few quadratures the crate needs.
//!
//! Two arithmetic regimes coexist. Closed forms and short-horizon bound runs
//! use `BigRational` so equalities and inequalities are exact; long horizons
//! and anything involving ln or sqrt use f64 in the log domain.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

/// Rational from a signed numerator/denominator pair. Panics on zero
/// denominator; use `parse_rational` for untrusted input.
pub fn rat(num: i64, den: i64) -> Rat {
    assert!(den != 0, "zero denominator");
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_u(n: u64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parse `a`, `a/b`, or `-a/b` into an exact rational. Decimal points are
/// rejected on purpose: the exact pipeline never sees a float literal.
pub fn parse_rational(s: &str) -> Result<Rat> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::parse("empty rational"));
    }
    if s.contains('.') {
        return Err(Error::parse(format!(
            "decimal literal {s:?} not allowed; use an exact fraction like 3/10"
        )));
    }
    let mut parts = s.splitn(2, '/');
    let num_str = parts.next().unwrap().trim();
    let num: BigInt = num_str
        .parse()
        .map_err(|_| Error::parse(format!("bad numerator in rational {s:?}")))?;
    match parts.next() {
        None => Ok(Rat::from_integer(num)),
        Some(den_str) => {
            let den: BigInt = den_str
                .trim()
                .parse()
                .map_err(|_| Error::parse(format!("bad denominator in rational {s:?}")))?;
            if den.is_zero() {
                return Err(Error::parse(format!("zero denominator in rational {s:?}")));
            }
            Ok(Rat::new(num, den))
        }
    }
}

/// Render a rational as `a/b` (or `a` when integral). Stable across runs, so
/// exact-mode CSV output is byte-reproducible.
pub fn format_rational(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    // `BigRational::to_f64` handles magnitude scaling internally.
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Natural log of a positive big integer, accurate even far beyond f64 range.
pub fn ln_biguint(n: &BigUint) -> f64 {
    debug_assert!(!n.is_zero());
    let bits = n.bits();
    if bits <= 64 {
        return n.to_f64().unwrap().ln();
    }
    // Keep the top 64 bits and account for the shifted-away magnitude.
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a positive rational.
pub fn ln_rat(r: &Rat) -> f64 {
    assert!(r.is_positive(), "ln of non-positive rational");
    ln_biguint(r.numer().magnitude()) - ln_biguint(r.denom().magnitude())
}

pub fn log_sum_exp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    let sum: f64 = xs.iter().map(|x| (x - hi).exp()).sum();
    hi + sum.ln()
}

/// SplitMix64 step; used to derive independent per-stream seeds from a user
/// seed so parallel sampling is reproducible regardless of worker count.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed for substream `index` of a run seeded with `seed`.
pub fn substream_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x51ed_270b)))
}

/// Composite Simpson rule with a fixed, even panel count. Deterministic by
/// construction; callers document the node count they rely on.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    assert!(
        panels >= 2 && panels.is_multiple_of(2),
        "panel count must be even"
    );
    let h = (b - a) / panels as f64;
    let mut sum = f(a) + f(b);
    for i in 1..panels {
        let x = a + h * i as f64;
        sum += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// ceil(log2(n)) for n >= 1.
pub fn ceil_log2(n: u64) -> u32 {
    assert!(n >= 1);
    64 - (n - 1).leading_zeros().min(64)
}

/// floor(log2(n)) for n >= 1.
pub fn floor_log2(n: u64) -> u32 {
    assert!(n >= 1);
    63 - n.leading_zeros()
}
