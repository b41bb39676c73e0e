//! Learners for the circle task: the midpoint ERM, local-majority
//! smoothing, and the interval-booster built on top of a base learner.

use rand_chacha::ChaCha12Rng;

use crate::domain::{Budget, Label, LabeledSample, Sign, TaskView};
use crate::players::{PlayerError, Predictor};
use crate::tasks::circle::{CirclePoint, HalfplaneHypothesis, QUARTER, TURN};

const MASK: u64 = TURN - 1;

impl Predictor<CirclePoint> for HalfplaneHypothesis {
    fn predict(&self, x: &CirclePoint) -> Label {
        Label::Clear(self.label(*x))
    }
}

/// Consistent halfplane from labeled circle samples, deterministic via the
/// midpoint rule: the version space of consistent normals is an arc, and the
/// returned hypothesis sits at its middle.
///
/// A sample `(x, +1)` constrains the normal to the arc `(x − ¼, x + ¼]`, a
/// negative one to the opposite arc; the version space is the running
/// intersection, which stays a single arc because every constraint is a
/// half circle.
pub fn erm_halfplane(
    samples: &[(CirclePoint, Sign)],
) -> Result<HalfplaneHypothesis, PlayerError> {
    if samples.is_empty() {
        return Err(PlayerError::EmptySampleSet);
    }
    let constraint = |(x, sign): (CirclePoint, Sign)| -> u64 {
        match sign {
            Sign::Plus => x.raw().wrapping_sub(QUARTER) & MASK,
            Sign::Minus => x.raw().wrapping_add(QUARTER) & MASK,
        }
    };
    const HALF: u64 = TURN / 2;
    // arc as (start, start + len], wrap-around, in raw turns; every
    // constraint is a half circle so len stays ≤ HALF and every
    // intersection below is a single arc
    let mut start = constraint(samples[0]);
    let mut len = HALF;
    for &(x, sign) in &samples[1..] {
        let c_start = constraint((x, sign));
        let delta = c_start.wrapping_sub(start) & MASK;
        if delta < len {
            // constraint start lies inside the current arc
            start = c_start;
            len -= delta;
        } else {
            // current start lies inside the constraint, or they are disjoint
            let back = start.wrapping_sub(c_start) & MASK;
            if back < HALF {
                len = len.min(HALF - back);
            } else {
                return Err(PlayerError::InconsistentSamples);
            }
        }
        if len == 0 {
            return Err(PlayerError::InconsistentSamples);
        }
    }
    let w = CirclePoint::from_raw(start.wrapping_add(len.div_ceil(2)) & MASK);
    let h = HalfplaneHypothesis::new(w);
    debug_assert!(samples.iter().all(|&(x, s)| h.label(x) == s));
    Ok(h)
}

/// Extract the clear-labeled circle points from generic samples.
pub fn clear_circle_samples<X, G>(
    samples: &[LabeledSample<X>],
    project: G,
) -> Vec<(CirclePoint, Sign)>
where
    G: Fn(&X) -> Option<CirclePoint>,
{
    samples
        .iter()
        .filter_map(|s| {
            let x = project(&s.x)?;
            let y = s.y.clear()?;
            Some((x, y))
        })
        .collect()
}

/// Draw `n` samples from a circle task and fit the midpoint ERM.
pub fn erm_halfplane_from_task(
    view: TaskView<'_, CirclePoint>,
    n: u64,
    budget: &mut Budget,
    rng: &mut ChaCha12Rng,
) -> Result<HalfplaneHypothesis, PlayerError> {
    let samples = view.draw_many(n, budget, rng)?;
    let pairs = clear_circle_samples(&samples, |x| Some(*x));
    erm_halfplane(&pairs)
}

/// Local-majority smoothing of an arbitrary circle classifier.
///
/// `f_eta(x)` is the majority label of `f` over the arc of half-width `eta`
/// (turns) centered at `x`, estimated on a deterministic grid of `probes`
/// points (odd, so there is never a tie).
pub struct SmoothedClassifier<F> {
    inner: F,
    eta: f64,
    probes: u32,
}

/// Default probe count for [`smooth_classifier`].
pub const DEFAULT_SMOOTHING_PROBES: u32 = 257;

pub fn smooth_classifier<F>(inner: F, eta: f64) -> Result<SmoothedClassifier<F>, PlayerError>
where
    F: Predictor<CirclePoint>,
{
    smooth_classifier_with_probes(inner, eta, DEFAULT_SMOOTHING_PROBES)
}

pub fn smooth_classifier_with_probes<F>(
    inner: F,
    eta: f64,
    probes: u32,
) -> Result<SmoothedClassifier<F>, PlayerError>
where
    F: Predictor<CirclePoint>,
{
    if !(eta > 0.0 && eta < 0.25) {
        return Err(PlayerError::ParamOutOfRange {
            name: "eta",
            value: eta,
        });
    }
    let probes = if probes.is_multiple_of(2) { probes + 1 } else { probes };
    Ok(SmoothedClassifier { inner, eta, probes })
}

impl<F: Predictor<CirclePoint>> SmoothedClassifier<F> {
    pub fn probes(&self) -> u32 {
        self.probes
    }
}

impl<F: Predictor<CirclePoint>> Predictor<CirclePoint> for SmoothedClassifier<F> {
    fn predict(&self, x: &CirclePoint) -> Label {
        let radius = (self.eta * TURN as f64) as u64;
        let step = (2 * radius) / (self.probes as u64 - 1).max(1);
        let mut plus = 0i64;
        let mut probe = x.raw().wrapping_sub(radius) & MASK;
        for _ in 0..self.probes {
            match self.inner.predict(&CirclePoint::from_raw(probe)) {
                Label::Clear(Sign::Plus) => plus += 1,
                _ => plus -= 1,
            }
            probe = probe.wrapping_add(step) & MASK;
        }
        Label::Clear(Sign::from_bool(plus > 0))
    }

    fn op_cost(&self) -> u64 {
        self.probes as u64
    }
}

/// Output of the interval booster: correct-by-construction intervals from a
/// fresh sample pass, base classifier elsewhere.
pub struct BoostedClassifier<F> {
    /// Arc mapped to +1: smallest arc containing all positive samples.
    plus_arc: Option<(u64, u64)>,
    /// Arc mapped to −1.
    minus_arc: Option<(u64, u64)>,
    fallback: F,
}

impl<F: Predictor<CirclePoint>> BoostedClassifier<F> {
    fn in_arc(arc: Option<(u64, u64)>, x: CirclePoint) -> bool {
        match arc {
            None => false,
            Some((start, len)) => x.raw().wrapping_sub(start) & MASK <= len,
        }
    }

    /// Where the interval part abstains and the fallback answers.
    pub fn uses_fallback_at(&self, x: CirclePoint) -> bool {
        !Self::in_arc(self.plus_arc, x) && !Self::in_arc(self.minus_arc, x)
    }

    /// The arc answered +1, as `(start, len)` raw turns.
    pub fn plus_arc(&self) -> Option<(u64, u64)> {
        self.plus_arc
    }

    /// The arc answered −1, as `(start, len)` raw turns.
    pub fn minus_arc(&self) -> Option<(u64, u64)> {
        self.minus_arc
    }

    /// The base classifier answering in the uncovered gaps.
    pub fn fallback(&self) -> &F {
        &self.fallback
    }
}

impl<F: Predictor<CirclePoint>> Predictor<CirclePoint> for BoostedClassifier<F> {
    fn predict(&self, x: &CirclePoint) -> Label {
        if Self::in_arc(self.plus_arc, *x) {
            Label::PLUS
        } else if Self::in_arc(self.minus_arc, *x) {
            Label::MINUS
        } else {
            self.fallback.predict(x)
        }
    }
}

/// Smallest arc `(start, len)` containing all the given points: the
/// complement of the largest gap between consecutive points.
fn smallest_covering_arc(points: &mut [u64]) -> Option<(u64, u64)> {
    if points.is_empty() {
        return None;
    }
    points.sort_unstable();
    let m = points.len();
    if m == 1 {
        return Some((points[0], 0));
    }
    let mut best_gap = points[0].wrapping_sub(points[m - 1]) & MASK;
    let mut gap_end = points[0];
    for w in points.windows(2) {
        let gap = w[1] - w[0];
        if gap > best_gap {
            best_gap = gap;
            gap_end = w[1];
        }
    }
    Some((gap_end, TURN - best_gap))
}

/// Interval booster: draw `max(base_samples, ceil(9/eta))` fresh samples,
/// map the smallest arc containing each label's samples to that label, and
/// fall back to the base learner's classifier in the uncovered end gaps.
///
/// `base` is trained on the first `base_samples` of the same draw.
pub fn boosted_learner<F, L>(
    base_samples: u64,
    eta: f64,
    base: L,
    view: TaskView<'_, CirclePoint>,
    budget: &mut Budget,
    rng: &mut ChaCha12Rng,
) -> Result<BoostedClassifier<F>, PlayerError>
where
    L: FnOnce(&[(CirclePoint, Sign)]) -> Result<F, PlayerError>,
    F: Predictor<CirclePoint>,
{
    if !(eta > 0.0 && eta < 0.25) {
        return Err(PlayerError::ParamOutOfRange {
            name: "eta",
            value: eta,
        });
    }
    let n = base_samples.max((9.0 / eta).ceil() as u64);
    let samples = view.draw_many(n, budget, rng)?;
    let pairs = clear_circle_samples(&samples, |x| Some(*x));

    let mut plus: Vec<u64> = pairs
        .iter()
        .filter(|(_, s)| s.is_plus())
        .map(|(x, _)| x.raw())
        .collect();
    let mut minus: Vec<u64> = pairs
        .iter()
        .filter(|(_, s)| !s.is_plus())
        .map(|(x, _)| x.raw())
        .collect();

    let base_pairs: Vec<(CirclePoint, Sign)> =
        pairs.iter().take(base_samples as usize).copied().collect();
    let fallback = base(&base_pairs)?;

    Ok(BoostedClassifier {
        plus_arc: smallest_covering_arc(&mut plus),
        minus_arc: smallest_covering_arc(&mut minus),
        fallback,
    })
}
