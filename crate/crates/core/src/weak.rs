//! Weak learners: decision stumps trained by exhaustive weighted-edge
//! maximization and perceptrons trained by smoothed gradient ascent.
//!
//! Every task reduces its weak-learner subproblem to a set of feature rows
//! with signed weights `d`, so training here maximizes `sum_i phi(x_i) * d_i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputRange {
    PmOne,
    ZeroOne,
}

impl OutputRange {
    #[inline]
    fn map(self, s: f64) -> f64 {
        match self {
            OutputRange::PmOne => s,
            OutputRange::ZeroOne => {
                if s > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `sign` with the convention `sign(0) = +1`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    #[serde(with = "ext_f64")]
    pub threshold: f64,
    pub polarity: i8,
    pub output_range: OutputRange,
}

impl Stump {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let s = f64::from(self.polarity) * sign(x[self.feature] - self.threshold);
        self.output_range.map(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perceptron {
    pub v: Vec<f64>,
    pub b: f64,
    pub sharpness: f64,
}

impl Perceptron {
    #[inline]
    pub fn activation(&self, x: &[f64]) -> f64 {
        self.v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        sign(self.activation(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeakLearner {
    Stump(Stump),
    Perceptron(Perceptron),
}

impl WeakLearner {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            WeakLearner::Stump(s) => s.eval(x),
            WeakLearner::Perceptron(p) => p.eval(x),
        }
    }

    /// Feature dimension the learner needs (a lower bound for stumps).
    pub fn min_dim(&self) -> usize {
        match self {
            WeakLearner::Stump(s) => s.feature + 1,
            WeakLearner::Perceptron(p) => p.v.len(),
        }
    }

    pub fn output_range(&self) -> OutputRange {
        match self {
            WeakLearner::Stump(s) => s.output_range,
            WeakLearner::Perceptron(_) => OutputRange::PmOne,
        }
    }
}

pub fn eval_weak(learner: &WeakLearner, x: &[f64]) -> f64 {
    learner.eval(x)
}

/// Which learner family a task trains per boosting iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakKind {
    Stump,
    Perceptron,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakConfig {
    pub kind: WeakKind,
    pub sharpness: f64,
    pub max_steps: usize,
}

impl Default for WeakConfig {
    fn default() -> Self {
        WeakConfig {
            kind: WeakKind::Stump,
            sharpness: 5.0,
            max_steps: 200,
        }
    }
}

impl WeakConfig {
    pub fn stumps() -> Self {
        Self::default()
    }

    pub fn perceptrons() -> Self {
        WeakConfig {
            kind: WeakKind::Perceptron,
            ..Self::default()
        }
    }
}

/// Weighted edge `sum_i phi(x_i) d_i`, accumulated in index order.
pub fn weighted_edge(learner: &WeakLearner, rows: &[Vec<f64>], weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, &d) in rows.iter().zip(weights) {
        acc += learner.eval(x) * d;
    }
    acc
}

fn check_inputs(rows: &[Vec<f64>], weights: &[f64]) -> Result<usize> {
    if rows.len() != weights.len() {
        return invalid(format!("{} feature rows but {} weights", rows.len(), weights.len()));
    }
    if rows.is_empty() {
        return invalid("no training rows");
    }
    let dim = rows[0].len();
    if dim == 0 {
        return invalid("zero-dimensional features");
    }
    if rows.iter().any(|r| r.len() != dim) {
        return invalid("ragged feature matrix");
    }
    if weights.iter().any(|w| !w.is_finite()) || rows.iter().flatten().any(|v| !v.is_finite()) {
        return invalid("non-finite feature or weight");
    }
    if weights.iter().all(|&w| w == 0.0) {
        return invalid("all signed weights are zero");
    }
    Ok(dim)
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    polarity: i8,
    approx: f64,
}

/// Candidate thresholds and approximate edges for one feature.
fn scan_feature(rows: &[Vec<f64>], weights: &[f64], feature: usize, range: OutputRange) -> Vec<Candidate> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[a][feature].total_cmp(&rows[b][feature]).then(a.cmp(&b)));
    let total: f64 = weights.iter().sum();

    let mut out = Vec::with_capacity(2 * rows.len() + 4);
    let mut push = |threshold: f64, below: f64| {
        let above = total - below;
        for polarity in [1i8, -1] {
            let approx = match (range, polarity) {
                (OutputRange::PmOne, 1) => above - below,
                (OutputRange::PmOne, _) => below - above,
                (OutputRange::ZeroOne, 1) => above,
                (OutputRange::ZeroOne, _) => below,
            };
            out.push(Candidate {
                feature,
                threshold,
                polarity,
                approx,
            });
        }
    };

    push(f64::NEG_INFINITY, 0.0);
    let mut below = 0.0;
    let mut k = 0;
    while k < order.len() {
        let value = rows[order[k]][feature];
        while k < order.len() && rows[order[k]][feature] == value {
            below += weights[order[k]];
            k += 1;
        }
        if k < order.len() {
            let next = rows[order[k]][feature];
            push(0.5 * (value + next), below);
        }
    }
    push(f64::INFINITY, total);
    out
}

/// Exhaustive stump search: all features, every midpoint between sorted
/// distinct values plus both infinite thresholds, both polarities.
///
/// Ties resolve to the lowest feature, then the lowest threshold, then
/// polarity +1. The returned edge is recomputed by direct summation.
pub fn train_stump(rows: &[Vec<f64>], weights: &[f64], range: OutputRange) -> Result<(Stump, f64)> {
    let dim = check_inputs(rows, weights)?;

    let per_feature: Vec<Vec<Candidate>> = (0..dim)
        .into_par_iter()
        .map(|f| scan_feature(rows, weights, f, range))
        .collect();

    let best_approx = per_feature
        .iter()
        .flatten()
        .map(|c| c.approx)
        .fold(f64::NEG_INFINITY, f64::max);
    let scale: f64 = weights.iter().map(|w| w.abs()).sum();
    let window = 1e-9 * scale.max(f64::MIN_POSITIVE);

    let exact: Vec<(Stump, f64)> = per_feature
        .iter()
        .flatten()
        .filter(|c| c.approx >= best_approx - window)
        .map(|c| {
            let stump = Stump {
                feature: c.feature,
                threshold: c.threshold,
                polarity: c.polarity,
                output_range: range,
            };
            let mut edge = 0.0;
            for (x, &d) in rows.iter().zip(weights) {
                edge += stump.eval(x) * d;
            }
            (stump, edge)
        })
        .collect();
    let top = exact.iter().map(|(_, e)| *e).fold(f64::NEG_INFINITY, f64::max);
    // Candidates come out ordered by (feature, threshold, polarity +1 first);
    // edges within rounding of the best count as ties and the earliest wins.
    let tie = 1e-12 * scale;
    let best = exact.into_iter().find(|(_, e)| *e >= top - tie);
    Ok(best.expect("at least the infinite thresholds are candidates"))
}

/// `sum_i d_i tanh(k (v.x_i + b))`.
pub fn smoothed_edge(v: &[f64], b: f64, rows: &[Vec<f64>], weights: &[f64], sharpness: f64) -> f64 {
    rows.iter()
        .zip(weights)
        .map(|(x, &d)| {
            let a: f64 = v.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + b;
            d * (sharpness * a).tanh()
        })
        .sum()
}

/// Gradient of [`smoothed_edge`] with respect to `(v, b)`; the last entry is
/// the bias component.
pub fn smoothed_edge_grad(v: &[f64], b: f64, rows: &[Vec<f64>], weights: &[f64], sharpness: f64) -> Vec<f64> {
    let mut g = vec![0.0; v.len() + 1];
    for (x, &d) in rows.iter().zip(weights) {
        let a: f64 = v.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + b;
        let t = (sharpness * a).tanh();
        let s = d * sharpness * (1.0 - t * t);
        for (gk, xk) in g.iter_mut().zip(x) {
            *gk += s * xk;
        }
        g[v.len()] += s;
    }
    g
}

fn hard_edge(p: &Perceptron, rows: &[Vec<f64>], weights: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, &d) in rows.iter().zip(weights) {
        acc += p.eval(x) * d;
    }
    acc
}

/// Perceptron `sign(v.x + b)` trained by backtracking gradient ascent on the
/// tanh-smoothed edge, started from a stump. Features are standardized
/// internally; the returned perceptron acts on raw features.
///
/// Never returns a learner whose hard edge is below the initializing stump:
/// if ascent does not beat it, the stump itself comes back.
pub fn train_perceptron(
    rows: &[Vec<f64>],
    weights: &[f64],
    init: Option<Stump>,
    config: &WeakConfig,
) -> Result<(WeakLearner, f64)> {
    let dim = check_inputs(rows, weights)?;
    let (stump, stump_edge) = match init {
        Some(s) => {
            let e = weighted_edge(&WeakLearner::Stump(s.clone()), rows, weights);
            (s, e)
        }
        None => train_stump(rows, weights, OutputRange::PmOne)?,
    };
    if stump.output_range != OutputRange::PmOne {
        return invalid("perceptrons start from a +/-1 stump");
    }

    let m = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in rows {
        for (mk, xk) in mean.iter_mut().zip(x) {
            *mk += xk / m;
        }
    }
    let mut scale = vec![0.0; dim];
    for x in rows {
        for k in 0..dim {
            scale[k] += (x[k] - mean[k]).powi(2) / m;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|x| (0..dim).map(|k| (x[k] - mean[k]) / scale[k]).collect())
        .collect();

    let to_raw = |v: &[f64], b: f64| -> Perceptron {
        let raw_v: Vec<f64> = (0..dim).map(|k| v[k] / scale[k]).collect();
        let raw_b = b - (0..dim).map(|k| v[k] * mean[k] / scale[k]).sum::<f64>();
        Perceptron {
            v: raw_v,
            b: raw_b,
            sharpness: config.sharpness,
        }
    };

    let pol = f64::from(stump.polarity);
    let (mut v, mut b) = if stump.threshold.is_finite() {
        let mut v = vec![0.0; dim];
        v[stump.feature] = pol;
        (v, -pol * (stump.threshold - mean[stump.feature]) / scale[stump.feature])
    } else {
        let constant = if stump.threshold < 0.0 { pol } else { -pol };
        (vec![0.0; dim], constant)
    };

    let kappa = config.sharpness;
    let mut best = to_raw(&v, b);
    let mut best_edge = hard_edge(&best, rows, weights);
    let mut value = smoothed_edge(&v, b, &z, weights, kappa);
    let mut step = 1.0;

    for _ in 0..config.max_steps {
        let g = smoothed_edge_grad(&v, b, &z, weights, kappa);
        let gnorm2: f64 = g.iter().map(|x| x * x).sum();
        if gnorm2 < 1e-24 {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let cand_v: Vec<f64> = v.iter().zip(&g).map(|(a, gk)| a + step * gk).collect();
            let cand_b = b + step * g[dim];
            let cand_value = smoothed_edge(&cand_v, cand_b, &z, weights, kappa);
            if cand_value >= value + 1e-4 * step * gnorm2 {
                v = cand_v;
                b = cand_b;
                value = cand_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 2.0;
        let p = to_raw(&v, b);
        let e = hard_edge(&p, rows, weights);
        if e > best_edge {
            best = p;
            best_edge = e;
        }
    }

    if best_edge < stump_edge {
        Ok((WeakLearner::Stump(stump), stump_edge))
    } else {
        Ok((WeakLearner::Perceptron(best), best_edge))
    }
}

/// Serde helper for reals that may be infinite (stump thresholds). Finite
/// values stay JSON numbers; infinities become the strings "inf"/"-inf".
pub(crate) mod ext_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            Err(serde::ser::Error::custom("NaN threshold"))
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(de::Error::custom(format!("bad real '{s}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stump(feature: usize, threshold: f64, polarity: i8, range: OutputRange) -> Stump {
        Stump {
            feature,
            threshold,
            polarity,
            output_range: range,
        }
    }

    #[test]
    fn eval_conventions() {
        let s = stump(0, 0.5, 1, OutputRange::PmOne);
        assert_eq!(s.eval(&[1.0]), 1.0);
        assert_eq!(s.eval(&[0.5]), 1.0);
        assert_eq!(s.eval(&[0.0]), -1.0);
        let z = stump(0, 0.5, 1, OutputRange::ZeroOne);
        assert_eq!(z.eval(&[0.0]), 0.0);
        assert_eq!(z.eval(&[0.7]), 1.0);
    }

    #[test]
    fn two_point_stump() {
        // candidates: -inf, 0.5, +inf; both polarities
        let rows = vec![vec![0.0], vec![1.0]];
        let (s, edge) = train_stump(&rows, &[1.0, -1.0], OutputRange::PmOne).unwrap();
        assert_eq!(s.threshold, 0.5);
        assert_eq!(s.polarity, -1);
        assert_eq!(edge, 2.0);
    }

    #[test]
    fn constant_feature_uses_infinite_threshold() {
        let rows = vec![vec![3.0]; 4];
        let (s, edge) = train_stump(&rows, &[0.5; 4], OutputRange::PmOne).unwrap();
        assert!(s.threshold.is_infinite());
        assert_eq!(edge, 2.0);
    }

    #[test]
    fn zero_weights_rejected() {
        let rows = vec![vec![0.0], vec![1.0]];
        assert!(train_stump(&rows, &[0.0, 0.0], OutputRange::PmOne).is_err());
    }

    #[test]
    fn scaling_weights_keeps_stump() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let d: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (s1, e1) = train_stump(&rows, &d, OutputRange::PmOne).unwrap();
        let d2: Vec<f64> = d.iter().map(|x| x * 4.0).collect();
        let (s2, e2) = train_stump(&rows, &d2, OutputRange::PmOne).unwrap();
        assert_eq!(s1, s2);
        assert!((e2 - 4.0 * e1).abs() < 1e-12);
    }

    #[test]
    fn smoothed_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let d: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..10 {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = rng.random_range(-0.5..0.5);
            let g = smoothed_edge_grad(&v, b, &rows, &d, 2.0);
            let h = 1e-6;
            for k in 0..4 {
                let (mut vp, mut vm) = (v.clone(), v.clone());
                let (mut bp, mut bm) = (b, b);
                if k < 3 {
                    vp[k] += h;
                    vm[k] -= h;
                } else {
                    bp += h;
                    bm -= h;
                }
                let fd = (smoothed_edge(&vp, bp, &rows, &d, 2.0) - smoothed_edge(&vm, bm, &rows, &d, 2.0)) / (2.0 * h);
                assert!(
                    (fd - g[k]).abs() <= 1e-5 * (1.0 + g[k].abs()),
                    "component {k}: fd {fd} vs analytic {}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn perceptron_beats_stump_on_diagonal_data() {
        // label = sign(x0 + x1): no axis-aligned split gets it right
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let d: Vec<f64> = rows.iter().map(|x| sign(x[0] + x[1]) / 200.0).collect();
        let (_, stump_edge) = train_stump(&rows, &d, OutputRange::PmOne).unwrap();
        let (learner, edge) = train_perceptron(&rows, &d, None, &WeakConfig::perceptrons()).unwrap();
        assert!(matches!(learner, WeakLearner::Perceptron(_)));
        assert!(edge > stump_edge + 0.05, "{edge} vs {stump_edge}");
        assert!((weighted_edge(&learner, &rows, &d) - edge).abs() < 1e-12);
    }

    #[test]
    fn perceptron_recovers_stump_boundary_in_1d() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let d: Vec<f64> = (0..20).map(|i| if i < 7 { -1.0 } else { 1.0 }).collect();
        let (s, se) = train_stump(&rows, &d, OutputRange::PmOne).unwrap();
        assert_eq!(se, 20.0);
        let (p, pe) = train_perceptron(&rows, &d, Some(s), &WeakConfig::perceptrons()).unwrap();
        assert_eq!(pe, 20.0);
        for x in &rows {
            assert_eq!(p.eval(x), sign(x[0] - 6.5));
        }
    }

    #[test]
    fn infinite_threshold_round_trips_through_json() {
        let w = WeakLearner::Stump(stump(2, f64::NEG_INFINITY, -1, OutputRange::ZeroOne));
        let s = serde_json::to_string(&w).unwrap();
        let back: WeakLearner = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
    }
}
