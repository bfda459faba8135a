//! Relation-conditioned attention over constituent queries, their convex
//! combination, and the Euclidean / Poincare-ball scores built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, BallPoint, DistancePrefactor};
use crate::query::QueryRepresentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionVariant {
    /// `alpha = softmax(s)`.
    #[default]
    Alpha,
    /// `alpha_i^2 / sum_j alpha_j^2`, which equals `softmax(2 s)`.
    AlphaSquared,
}

/// Exponent applied to the distance inside the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum DistancePower {
    Plain,
    #[default]
    Squared,
}

impl TryFrom<u8> for DistancePower {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(DistancePower::Plain),
            2 => Ok(DistancePower::Squared),
            other => Err(format!("distance_power must be 1 or 2, got {other}")),
        }
    }
}

impl From<DistancePower> for u8 {
    fn from(p: DistancePower) -> u8 {
        match p {
            DistancePower::Plain => 1,
            DistancePower::Squared => 2,
        }
    }
}

impl DistancePower {
    #[inline]
    pub fn apply(self, dist: f64) -> f64 {
        match self {
            DistancePower::Plain => dist,
            DistancePower::Squared => dist * dist,
        }
    }

    /// d(dist^p)/d(dist).
    #[inline]
    pub fn derivative(self, dist: f64) -> f64 {
        match self {
            DistancePower::Plain => 1.0,
            DistancePower::Squared => 2.0 * dist,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w: Vec<f64>,
    pub variant: AttentionVariant,
    pub enabled: bool,
}

/// `s_i = <w, q_i>`.
pub fn attention_scores(queries: &[&[f64]], w: &[f64]) -> Vec<f64> {
    queries.iter().map(|q| geometry::dot(w, q)).collect()
}

/// Max-shifted softmax of `scores`, squared and renormalised for
/// [`AttentionVariant::AlphaSquared`].
pub fn weights_from_scores(scores: &[f64], variant: AttentionVariant) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut alphas: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = alphas.iter().sum();
    alphas.iter_mut().for_each(|a| *a /= total);
    if variant == AttentionVariant::AlphaSquared {
        alphas.iter_mut().for_each(|a| *a *= *a);
        let total: f64 = alphas.iter().sum();
        alphas.iter_mut().for_each(|a| *a /= total);
    }
    alphas
}

/// Gradient with respect to the scores given the gradient with respect to
/// the weights.
pub fn weights_backward(alphas: &[f64], variant: AttentionVariant, g_alpha: &[f64]) -> Vec<f64> {
    let mean: f64 = alphas.iter().zip(g_alpha).map(|(a, g)| a * g).sum();
    let scale = match variant {
        AttentionVariant::Alpha => 1.0,
        AttentionVariant::AlphaSquared => 2.0,
    };
    alphas
        .iter()
        .zip(g_alpha)
        .map(|(a, g)| scale * a * (g - mean))
        .collect()
}

pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

pub fn attention_weights(
    queries: &[QueryRepresentation],
    w: &[f64],
    variant: AttentionVariant,
    enabled: bool,
) -> Result<Vec<f64>> {
    if queries.is_empty() {
        return Err(Error::InvalidConfig("attention over zero queries".into()));
    }
    if !enabled {
        return Ok(uniform_weights(queries.len()));
    }
    for q in queries {
        if q.vector.len() != w.len() {
            return Err(Error::DimensionMismatch { expected: w.len(), found: q.vector.len() });
        }
    }
    let views: Vec<&[f64]> = queries.iter().map(|q| q.vector.as_slice()).collect();
    Ok(weights_from_scores(&attention_scores(&views, w), variant))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedQuery {
    pub alphas: Vec<f64>,
    pub q_e: Vec<f64>,
    pub q_e_ball: Option<BallPoint>,
}

pub(crate) fn combine_into(queries: &[&[f64]], alphas: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (q, a) in queries.iter().zip(alphas) {
        for (o, x) in out.iter_mut().zip(q.iter()) {
            *o += a * x;
        }
    }
}

/// `q_E = sum_i alpha_i q_i`.
pub fn combine_euclidean(queries: &[QueryRepresentation], alphas: &[f64]) -> Result<CombinedQuery> {
    if queries.len() != alphas.len() || queries.is_empty() {
        return Err(Error::DimensionMismatch { expected: queries.len(), found: alphas.len() });
    }
    let d = queries[0].vector.len();
    if let Some(q) = queries.iter().find(|q| q.vector.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: q.vector.len() });
    }
    let views: Vec<&[f64]> = queries.iter().map(|q| q.vector.as_slice()).collect();
    let mut q_e = vec![0.0; d];
    combine_into(&views, alphas, &mut q_e);
    Ok(CombinedQuery { alphas: alphas.to_vec(), q_e, q_e_ball: None })
}

/// Lifts the combined query onto the ball.
pub fn combine_on_ball(combined: &mut CombinedQuery, c: f64) {
    let mut p = geometry::exp_map_zero(&combined.q_e, c);
    geometry::project_in_place(&mut p.data, c);
    combined.q_e_ball = Some(p);
}

/// `-|tail - q_E|^p + delta_h + delta_t`; higher is more plausible.
pub fn score_sea(q_e: &[f64], tail: &[f64], delta_h: f64, delta_t: f64, power: DistancePower) -> f64 {
    let dist2: f64 = q_e.iter().zip(tail).map(|(q, t)| (t - q) * (t - q)).sum();
    let term = match power {
        DistancePower::Squared => dist2,
        DistancePower::Plain => dist2.sqrt(),
    };
    -term + delta_h + delta_t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SepaScore {
    pub score: f64,
    /// Boundary projections or `artanh` clamps hit while scoring.
    pub clamp_events: u32,
}

fn lift(v: &[f64], c: f64, events: &mut u32) -> Vec<f64> {
    let mut p = geometry::exp_map_zero(v, c).data;
    if geometry::project_in_place(&mut p, c) {
        *events += 1;
    }
    p
}

/// `-d^c(exp_0(q_E) + exp_0(r_hyp), exp_0(tail))^p + delta_h + delta_t`,
/// where `+` is Mobius addition.
#[allow(clippy::too_many_arguments)]
pub fn score_sepa(
    q_e: &[f64],
    r_hyp: &[f64],
    tail: &[f64],
    c: f64,
    delta_h: f64,
    delta_t: f64,
    power: DistancePower,
    prefactor: DistancePrefactor,
) -> SepaScore {
    let mut events = 0;
    let qm = lift(q_e, c, &mut events);
    let rh = lift(r_hyp, c, &mut events);
    let mut x = vec![0.0; qm.len()];
    geometry::mobius_into(&qm, &rh, c, &mut x);
    if geometry::project_in_place(&mut x, c) {
        events += 1;
    }
    let y = lift(tail, c, &mut events);
    let mut scratch = vec![0.0; x.len()];
    let dist = geometry::distance_raw(&x, &y, c, prefactor, &mut scratch);
    if dist.clamped {
        events += 1;
    }
    SepaScore { score: -power.apply(dist.value) + delta_h + delta_t, clamp_events: events }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereRadius {
    pub radius: f64,
    /// Set when the implied radius is negative, i.e. no point can be an answer.
    pub empty_answer_space: bool,
}

/// Implied answer-sphere radius `delta_h + delta_t - margin`.
pub fn sphere_radius(delta_h: f64, delta_t: f64, margin: f64) -> SphereRadius {
    let radius = delta_h + delta_t - margin;
    SphereRadius { radius, empty_answer_space: radius < 0.0 }
}

/// `sum_i alpha_i eps_i`.
pub fn combined_radius(alphas: &[f64], radii: &[f64]) -> f64 {
    alphas.iter().zip(radii).map(|(a, r)| a * r).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::ModelKind;

    fn q(v: &[f64]) -> QueryRepresentation {
        QueryRepresentation { vector: v.to_vec(), source: ModelKind::TransE }
    }

    #[test]
    fn attention_examples() {
        let w = [1.0, 0.0];
        let a = attention_weights(&[q(&[3.0, 1.0])], &w, AttentionVariant::Alpha, true).unwrap();
        assert_eq!(a, vec![1.0]);
        let a = attention_weights(&[q(&[2.0, 1.0]), q(&[2.0, -5.0])], &w, AttentionVariant::Alpha, true)
            .unwrap();
        assert_eq!(a, vec![0.5, 0.5]);
        let a = weights_from_scores(&[0.0, 3f64.ln()], AttentionVariant::Alpha);
        assert!((a[0] - 0.25).abs() < 1e-15 && (a[1] - 0.75).abs() < 1e-15);
        let a = attention_weights(&[q(&[9.0, 0.0]), q(&[0.0, 0.0]), q(&[1.0, 1.0])], &w, AttentionVariant::Alpha, false)
            .unwrap();
        assert!(a.iter().all(|&x| x == 1.0 / 3.0));
    }

    #[test]
    fn squared_variant_matches_doubled_scores() {
        let s = [0.3, -1.2, 2.5];
        let a = weights_from_scores(&s, AttentionVariant::AlphaSquared);
        let b = weights_from_scores(&[0.6, -2.4, 5.0], AttentionVariant::Alpha);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn combine_examples() {
        let p = [0.4, -0.1];
        let c = combine_euclidean(&[q(&p), q(&p), q(&p)], &uniform_weights(3)).unwrap();
        assert!(c.q_e.iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-15));
        let c = combine_euclidean(&[q(&[1.0, 2.0]), q(&[5.0, 7.0])], &[1.0, 0.0]).unwrap();
        assert_eq!(c.q_e, vec![1.0, 2.0]);
        let c = combine_euclidean(&[q(&[0.0, 0.0]), q(&[2.0, 0.0])], &[0.5, 0.5]).unwrap();
        assert_eq!(c.q_e, vec![1.0, 0.0]);
        assert!(combine_euclidean(&[q(&[0.0, 0.0])], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn sea_score_examples() {
        assert_eq!(score_sea(&[0.2, 0.3], &[0.2, 0.3], 0.0, 0.0, DistancePower::Squared), 0.0);
        assert_eq!(score_sea(&[0.0, 0.0], &[3.0, 4.0], 1.0, 2.0, DistancePower::Squared), -22.0);
        assert_eq!(score_sea(&[0.0, 0.0], &[3.0, 4.0], 1.0, 2.0, DistancePower::Plain), -2.0);
    }

    #[test]
    fn sepa_coincident_points_score_biases() {
        let z = [0.0; 4];
        let s = score_sepa(&z, &z, &z, 1.0, 0.7, -0.2, DistancePower::Squared, DistancePrefactor::TwoOverC);
        assert!((s.score - 0.5).abs() < 1e-15);
        assert_eq!(s.clamp_events, 0);
    }

    #[test]
    fn radius_examples() {
        let r = sphere_radius(3.0, 2.0, 1.0);
        assert_eq!(r.radius, 4.0);
        assert!(!r.empty_answer_space);
        assert!(sphere_radius(0.5, 0.2, 1.0).empty_answer_space);
        assert!((combined_radius(&[0.25, 0.75], &[2.0, 4.0]) - 3.5).abs() < 1e-15);
    }

    #[test]
    fn distance_power_parses_from_json() {
        assert_eq!(serde_json::from_str::<DistancePower>("1").unwrap(), DistancePower::Plain);
        assert!(serde_json::from_str::<DistancePower>("3").is_err());
    }
}
