//! A countable grid of rational coin biases with explicit code lengths,
//! giving a mixture prior whose per-component weight is exactly
//! `2^{-code_len}`. Code lengths are representation-based (shorter fractions
//! get shorter codes), so grid mixtures connect prediction bounds to the
//! description length of the true parameter.
//!
//! The code for a reduced fraction `a/b` in [0,1] is the Elias-gamma code of
//! `b` followed by a fixed-width index of `a` among `0..=b`, and the weights
//! form an exact sub-unit Kraft sum over any finite grid.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;
use crate::numeric::{ceil_log2, floor_log2, rat_to_f64, Rat};

/// Denominator ceiling past which the grid (quadratic in `b_max`) stops
/// being a desk-scale object.
pub const B_MAX_CEILING: u64 = 1000;

/// Code length in bits of a reduced fraction in [0,1]:
/// `2*floor(log2 b) + 1` gamma bits for the denominator plus
/// `ceil(log2 (b+1))` index bits for the numerator.
pub fn code_len_bits(theta: &Rat) -> Result<u32> {
    if theta.is_negative() || theta > &Rat::one() {
        return Err(Error::Domain(format!(
            "grid parameter {theta} outside [0,1]"
        )));
    }
    let b = theta.denom().to_u64().ok_or_else(|| {
        Error::Domain(format!("denominator of {theta} too large for a grid code"))
    })?;
    Ok(2 * floor_log2(b) + 1 + ceil_log2(b + 1))
}

/// The dyadic prior weight `2^{-code_len}` of a grid parameter.
pub fn code_weight(theta: &Rat) -> Result<Rat> {
    let bits = code_len_bits(theta)?;
    Ok(Rat::new(BigInt::one(), BigInt::one() << (bits as usize)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub theta: Rat,
    pub code_bits: u32,
    pub weight: Rat,
}

/// All reduced fractions `a/b` in [0,1] with `b <= b_max`, ordered by
/// denominator then numerator. Both endpoints live at `b = 1` and get the
/// 2-bit minimum code.
pub fn rational_grid(b_max: u64) -> Result<Vec<GridPoint>> {
    if b_max == 0 {
        return Err(Error::Domain("grid needs b_max >= 1".into()));
    }
    if b_max > B_MAX_CEILING {
        return Err(Error::Resource(format!(
            "grid with b_max {b_max} exceeds the supported ceiling {B_MAX_CEILING}"
        )));
    }
    let mut points = Vec::new();
    for b in 1..=b_max {
        for a in 0..=b {
            if a.gcd(&b) != 1 {
                continue;
            }
            let theta = Rat::new(a.into(), b.into());
            let code_bits = code_len_bits(&theta)?;
            let weight = code_weight(&theta)?;
            points.push(GridPoint {
                theta,
                code_bits,
                weight,
            });
        }
    }
    Ok(points)
}

/// Exact Kraft sum of the grid weights; always strictly below one on a
/// finite grid.
pub fn kraft_sum(points: &[GridPoint]) -> Rat {
    points.iter().fold(Rat::zero(), |acc, p| acc + &p.weight)
}

/// A grid of coin biases packaged as a (deliberately deficient) mixture of
/// Bernoulli environments.
pub struct GridMixture {
    pub model: MixtureModel,
    pub points: Vec<GridPoint>,
}

pub fn grid_mixture(b_max: u64) -> Result<GridMixture> {
    let points = rational_grid(b_max)?;
    let components: Vec<Environment> = points
        .iter()
        .map(|p| Environment::Bernoulli {
            p1: p.theta.clone(),
        })
        .collect();
    let weights: Vec<Rat> = points.iter().map(|p| p.weight.clone()).collect();
    let model = MixtureModel::new(components, weights)?;
    Ok(GridMixture { model, points })
}

impl GridMixture {
    /// Index of an exact grid parameter, if present.
    pub fn index_of(&self, theta: &Rat) -> Option<usize> {
        self.points.iter().position(|p| &p.theta == theta)
    }
}

/// Built-in reparameterizations of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMap {
    /// Every parameter to itself.
    Identity,
    /// `theta -> theta^2`; squares with large denominators fall off the grid
    /// and are skipped (counted in the report).
    Square,
    /// `theta -> sqrt(theta)`, rounded to the nearest grid parameter (ties
    /// to the earlier point in denominator-then-numerator order).
    SqrtRounded,
}

impl GridMap {
    pub fn name(self) -> &'static str {
        match self {
            GridMap::Identity => "identity",
            GridMap::Square => "square",
            GridMap::SqrtRounded => "sqrt-rounded",
        }
    }
}

#[derive(Debug, Clone)]
pub struct InvarianceRow {
    /// A parameter in the image of the map.
    pub theta: Rat,
    /// Total prior weight of its preimages.
    pub pushforward: Rat,
    /// The parameter's own prior weight `2^{-code_len}`.
    pub direct: Rat,
    pub ratio: f64,
}

/// How far the pushforward of the grid prior under a reparameterization
/// drifts from the prior of the image points. Representation-based codes are
/// not reparameterization-invariant in general; identity is the exact
/// baseline and is asserted to give ratio one everywhere.
#[derive(Debug, Clone)]
pub struct InvarianceReport {
    pub b_max: u64,
    pub map: GridMap,
    pub rows: Vec<InvarianceRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub median_ratio: f64,
    /// Points whose image left the grid (only possible for `Square`).
    pub skipped_out_of_grid: u64,
}

fn apply_map(map: GridMap, theta: &Rat, points: &[GridPoint], b_max: u64) -> Option<Rat> {
    match map {
        GridMap::Identity => Some(theta.clone()),
        GridMap::Square => {
            let sq = theta * theta;
            // a/b reduced keeps a^2/b^2 reduced, so membership is a
            // denominator test.
            (sq.denom() <= &BigInt::from(b_max)).then_some(sq)
        }
        GridMap::SqrtRounded => {
            let target = rat_to_f64(theta).sqrt();
            let mut best: Option<(f64, &Rat)> = None;
            for p in points {
                let dist = (rat_to_f64(&p.theta) - target).abs();
                if best.is_none_or(|(d, _)| dist < d) {
                    best = Some((dist, &p.theta));
                }
            }
            best.map(|(_, t)| t.clone())
        }
    }
}

pub fn invariance_report(b_max: u64, map: GridMap) -> Result<InvarianceReport> {
    let points = rational_grid(b_max)?;
    let mut pushforward: BTreeMap<Rat, Rat> = BTreeMap::new();
    let mut skipped = 0u64;
    for p in &points {
        match apply_map(map, &p.theta, &points, b_max) {
            Some(image) => {
                let slot = pushforward.entry(image).or_insert_with(Rat::zero);
                *slot += &p.weight;
            }
            None => skipped += 1,
        }
    }
    let mut rows = Vec::with_capacity(pushforward.len());
    for (theta, mass) in pushforward {
        let direct = code_weight(&theta)?;
        let ratio_exact = &mass / &direct;
        if map == GridMap::Identity && !ratio_exact.is_one() {
            return Err(Error::Invariant(format!(
                "identity map changed the weight of {theta}: ratio {ratio_exact}"
            )));
        }
        rows.push(InvarianceRow {
            theta,
            pushforward: mass,
            direct,
            ratio: rat_to_f64(&ratio_exact),
        });
    }
    let mut ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if ratios.is_empty() {
        f64::NAN
    } else if ratios.len() % 2 == 1 {
        ratios[ratios.len() / 2]
    } else {
        (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2]) / 2.0
    };
    Ok(InvarianceReport {
        b_max,
        map,
        min_ratio: ratios.first().copied().unwrap_or(f64::NAN),
        max_ratio: ratios.last().copied().unwrap_or(f64::NAN),
        median_ratio: median,
        rows,
        skipped_out_of_grid: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;

    #[test]
    fn endpoint_codes_are_two_bits() {
        assert_eq!(code_len_bits(&rat(0, 1)).unwrap(), 2);
        assert_eq!(code_len_bits(&rat(1, 1)).unwrap(), 2);
        assert_eq!(code_len_bits(&rat(1, 2)).unwrap(), 5);
        assert_eq!(code_len_bits(&rat(2, 4)).unwrap(), 5); // reduced on construction
        assert_eq!(code_weight(&rat(1, 1)).unwrap(), rat(1, 4));
        assert!(code_len_bits(&rat(3, 2)).is_err());
        assert!(code_len_bits(&rat(-1, 2)).is_err());
    }

    #[test]
    fn grid_size_and_kraft() {
        // 2 endpoints at b=1 plus totient(b) interior points for b >= 2.
        let g50 = rational_grid(50).unwrap();
        assert_eq!(g50.len(), 775);
        let s = kraft_sum(&g50);
        assert!(s < Rat::one());
        assert!(s > rat(1, 2));
        let g1 = rational_grid(1).unwrap();
        assert_eq!(g1.len(), 2);
        assert_eq!(kraft_sum(&g1), rat(1, 2));
        assert!(rational_grid(0).is_err());
        assert!(matches!(
            rational_grid(B_MAX_CEILING + 1),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn grid_is_reduced_sorted_and_unique() {
        let g = rational_grid(12).unwrap();
        for w in g.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let key = |p: &GridPoint| (p.theta.denom().clone(), p.theta.numer().clone());
            assert!(key(a) < key(b));
        }
        let mut thetas: Vec<Rat> = g.iter().map(|p| p.theta.clone()).collect();
        thetas.sort();
        thetas.dedup();
        assert_eq!(thetas.len(), g.len());
    }

    #[test]
    fn mixture_wraps_grid_with_exact_weights() {
        let gm = grid_mixture(10).unwrap();
        assert_eq!(gm.model.components().len(), gm.points.len());
        let i = gm.index_of(&rat(1, 1)).unwrap();
        assert_eq!(gm.model.weights()[i], rat(1, 4));
        assert!(gm.index_of(&rat(1, 11)).is_none());
    }

    #[test]
    fn identity_map_is_exactly_invariant() {
        let rep = invariance_report(20, GridMap::Identity).unwrap();
        assert_eq!(rep.skipped_out_of_grid, 0);
        assert_eq!(rep.min_ratio, 1.0);
        assert_eq!(rep.max_ratio, 1.0);
        assert_eq!(rep.median_ratio, 1.0);
        assert_eq!(rep.rows.len(), rational_grid(20).unwrap().len());
    }

    #[test]
    fn squaring_shifts_weight() {
        let rep = invariance_report(20, GridMap::Square).unwrap();
        // Only parameters with b <= 4 keep their squares on the grid.
        assert!(rep.skipped_out_of_grid > 0);
        assert!(!rep.rows.is_empty());
        // 0 and 1 are fixed points, so their images also collect the weight
        // of nothing else (squares of other on-grid points differ), keeping
        // ratio 1; interior images see genuine drift.
        let row_quarter = rep.rows.iter().find(|r| r.theta == rat(1, 4)).unwrap();
        // 1/4 receives the weight of 1/2 (5 bits -> 1/32) plus its own
        // preimage... none: sqrt(1/4)=1/2 is the only preimage.
        assert_eq!(row_quarter.pushforward, rat(1, 32));
        assert!(
            (row_quarter.ratio - rat_to_f64(&(rat(1, 32) / code_weight(&rat(1, 4)).unwrap())))
                .abs()
                < 1e-12
        );
        assert!(rep.min_ratio < 1.0 || rep.max_ratio > 1.0);
    }

    #[test]
    fn sqrt_rounding_stays_on_grid() {
        let rep = invariance_report(12, GridMap::SqrtRounded).unwrap();
        assert_eq!(rep.skipped_out_of_grid, 0);
        let total: Rat = rep
            .rows
            .iter()
            .fold(Rat::zero(), |acc, r| acc + &r.pushforward);
        assert_eq!(total, kraft_sum(&rational_grid(12).unwrap()));
        // sqrt(1) = 1 exactly, and nothing else rounds to 1's neighborhood
        // more closely than to nearer fractions, so 1 keeps at least its own
        // weight.
        let row_one = rep.rows.iter().find(|r| r.theta == rat(1, 1)).unwrap();
        assert!(row_one.pushforward >= code_weight(&rat(1, 1)).unwrap());
    }
}
