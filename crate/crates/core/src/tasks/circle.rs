//! Halfplanes on the unit circle.
//!
//! Angles are fixed-point fractions of a full turn with [`FRACTIONAL_BITS`]
//! bits, so wrap-around arithmetic is exact and both the halfplane label and
//! band membership reduce to integer comparisons — no trigonometry anywhere.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Label, LabeledSample, LearningTask, OracleVerdict, Sign, TaskDescriptor};

/// Fractional bits of a turn. 62 bits leave headroom for u64 arithmetic.
pub const FRACTIONAL_BITS: u32 = 62;

/// One full turn.
pub const TURN: u64 = 1 << FRACTIONAL_BITS;

/// A quarter turn, the offset from a halfplane's normal direction to its
/// decision boundary.
pub const QUARTER: u64 = TURN >> 2;

const MASK: u64 = TURN - 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircleError {
    #[error("band half-width must be positive and below a quarter turn")]
    BandWidthOutOfRange,
}

/// Point on the circle: an angle in `[0, 1)` turns, fixed-point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CirclePoint(u64);

impl CirclePoint {
    pub fn from_raw(raw: u64) -> Self {
        CirclePoint(raw & MASK)
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    /// Nearest representable point to `turns` ∈ [0, 1).
    pub fn from_turns(turns: f64) -> Self {
        let t = turns.rem_euclid(1.0);
        CirclePoint(((t * TURN as f64) as u64) & MASK)
    }

    pub fn to_turns(self) -> f64 {
        self.0 as f64 / TURN as f64
    }

    pub fn uniform(rng: &mut ChaCha12Rng) -> Self {
        CirclePoint(rng.random::<u64>() & MASK)
    }

    /// Rotation by `offset` turns (mod 1).
    pub fn rotate(self, offset: CirclePoint) -> Self {
        CirclePoint((self.0.wrapping_add(offset.0)) & MASK)
    }

    /// Signed difference `self − other` as a point on the circle.
    /// Not `Sub::sub`: the result wraps mod one turn instead of subtracting.
    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: CirclePoint) -> Self {
        CirclePoint((self.0.wrapping_sub(other.0)) & MASK)
    }

    /// Minimal angular distance to `other`, in raw fixed-point turns.
    pub fn dist(self, other: CirclePoint) -> u64 {
        let d = self.sub(other).0;
        d.min(TURN - d)
    }

    pub fn antipode(self) -> Self {
        CirclePoint((self.0 ^ (TURN >> 1)) & MASK)
    }

    pub fn to_hex(self) -> String {
        format!("{:016x}", self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        u64::from_str_radix(s, 16).ok().map(CirclePoint::from_raw)
    }

    /// The angle as label bits for encryption, least-significant first.
    pub fn to_bits(self) -> Vec<bool> {
        (0..FRACTIONAL_BITS).map(|i| (self.0 >> i) & 1 == 1).collect()
    }

    pub fn from_bits(bits: &[bool]) -> Option<Self> {
        if bits.len() != FRACTIONAL_BITS as usize {
            return None;
        }
        let mut raw = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            raw |= (b as u64) << i;
        }
        Some(CirclePoint(raw))
    }
}

/// Halfplane hypothesis `h_w`: positive exactly on the half circle
/// `(x − w) mod 1 ∈ [−¼, ¼)`. The boundary grid point at `w + ¼` breaks the
/// tie toward −1, so predictions are deterministic everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HalfplaneHypothesis {
    pub w: CirclePoint,
}

impl HalfplaneHypothesis {
    pub fn new(w: CirclePoint) -> Self {
        HalfplaneHypothesis { w }
    }

    pub fn label(&self, x: CirclePoint) -> Sign {
        // (x − w + ¼) mod 1 < ½  ⟺  (x − w) mod 1 ∈ [−¼, ¼)
        let t = x.sub(self.w).0.wrapping_add(QUARTER) & MASK;
        Sign::from_bool(t < TURN >> 1)
    }

    /// The two boundary points `w ± ¼`.
    pub fn boundaries(&self) -> [CirclePoint; 2] {
        [
            CirclePoint((self.w.0.wrapping_add(QUARTER)) & MASK),
            CirclePoint((self.w.0.wrapping_sub(QUARTER)) & MASK),
        ]
    }

    /// Exact risk against another halfplane: the disagreement region is two
    /// arcs of width `|w − w'|` each.
    pub fn risk_against(&self, truth: &HalfplaneHypothesis) -> f64 {
        2.0 * self.w.dist(truth.w) as f64 / TURN as f64
    }
}

/// Band around a halfplane's decision boundary: the two arcs of angular
/// half-width `alpha` (turns, fixed-point) centered at `w ± ¼`. Its uniform
/// measure is `4·alpha` as a fraction of the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcBand {
    pub w: CirclePoint,
    alpha: u64,
}

impl ArcBand {
    /// `alpha_turns` is the angular half-width of each arc in turns.
    pub fn new(w: CirclePoint, alpha_turns: f64) -> Result<Self, CircleError> {
        if !(alpha_turns > 0.0 && alpha_turns < 0.25) {
            return Err(CircleError::BandWidthOutOfRange);
        }
        let alpha = (alpha_turns * TURN as f64) as u64;
        if alpha == 0 || alpha >= QUARTER {
            return Err(CircleError::BandWidthOutOfRange);
        }
        Ok(ArcBand { w, alpha })
    }

    pub fn alpha_turns(&self) -> f64 {
        self.alpha as f64 / TURN as f64
    }

    /// Uniform measure of the band as a fraction of the circle.
    pub fn measure(&self) -> f64 {
        4.0 * self.alpha_turns()
    }

    pub fn contains(&self, x: CirclePoint) -> bool {
        let h = HalfplaneHypothesis::new(self.w);
        h.boundaries().iter().any(|b| x.dist(*b) <= self.alpha)
    }

    /// Uniform draw from the band: fair choice between the two arcs, then a
    /// uniform offset within the arc.
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> CirclePoint {
        let h = HalfplaneHypothesis::new(self.w);
        let center = h.boundaries()[rng.random_range(0..2usize)];
        let offset = rng.random_range(0..=2 * self.alpha);
        CirclePoint((center.0.wrapping_add(offset).wrapping_sub(self.alpha)) & MASK)
    }
}

/// Uniform sampler over a band, as a standalone closure.
pub fn band_sampler(band: ArcBand) -> impl Fn(&mut ChaCha12Rng) -> CirclePoint {
    move |rng| band.sample(rng)
}

/// The lines-on-circle task for ground truth `h_w`: uniform inputs, labels
/// from `h_w`, oracle comparing answers with `h_w`.
pub fn circle_task(w: CirclePoint) -> LearningTask<CirclePoint> {
    let h = HalfplaneHypothesis::new(w);
    let sampler = Arc::new(move |rng: &mut ChaCha12Rng| {
        let x = CirclePoint::uniform(rng);
        LabeledSample {
            x,
            y: Label::Clear(h.label(x)),
        }
    });
    let oracle = Arc::new(move |x: &CirclePoint, y: &Label| match y {
        Label::Clear(s) if *s == h.label(*x) => OracleVerdict::Correct,
        _ => OracleVerdict::Error,
    });
    LearningTask::new(
        "lines-on-circle",
        TaskDescriptor::Circle { w_hex: w.to_hex() },
        sampler,
        oracle,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use proptest::prelude::*;

    #[test]
    fn interior_point_is_positive_and_boundary_breaks_to_minus() {
        let w = CirclePoint::from_turns(0.3);
        let h = HalfplaneHypothesis::new(w);
        // x at angular distance ¼ − δ from w, small δ: interior of the
        // positive half.
        let x = CirclePoint::from_raw(w.raw() + QUARTER - 1024);
        assert_eq!(h.label(x), Sign::Plus);
        // exactly at the boundary grid point w + ¼: −1 by convention.
        let b = CirclePoint::from_raw(w.raw().wrapping_add(QUARTER));
        assert_eq!(h.label(b), Sign::Minus);
        // w itself is +1, its antipode −1.
        assert_eq!(h.label(w), Sign::Plus);
        assert_eq!(h.label(w.antipode()), Sign::Minus);
    }

    #[test]
    fn mean_label_is_centered() {
        // Symmetry of the half circle: empirical mean label over 1e5 draws
        // is 0 up to Monte-Carlo noise (3 standard errors ≈ 0.0095).
        let task = circle_task(CirclePoint::from_turns(0.77));
        let mut rng = Seed(21).stream("circle", 0);
        let n = 100_000;
        let mut sum = 0i64;
        for _ in 0..n {
            let s = task.sample(&mut rng);
            sum += s.y.clear().unwrap().as_i8() as i64;
        }
        let mean = sum as f64 / n as f64;
        assert!(mean.abs() < 0.0095, "mean = {mean}");
    }

    proptest! {
        /// Rotating both w and every query by the same offset leaves all
        /// labels invariant.
        #[test]
        fn labels_are_rotation_invariant(w in 0u64..TURN, x in 0u64..TURN, off in 0u64..TURN) {
            let w = CirclePoint::from_raw(w);
            let x = CirclePoint::from_raw(x);
            let off = CirclePoint::from_raw(off);
            let h = HalfplaneHypothesis::new(w);
            let h_rot = HalfplaneHypothesis::new(w.rotate(off));
            prop_assert_eq!(h.label(x), h_rot.label(x.rotate(off)));
        }

        /// dist is symmetric and at most half a turn.
        #[test]
        fn dist_is_a_metric_on_the_circle(a in 0u64..TURN, b in 0u64..TURN) {
            let a = CirclePoint::from_raw(a);
            let b = CirclePoint::from_raw(b);
            prop_assert_eq!(a.dist(b), b.dist(a));
            prop_assert!(a.dist(b) <= TURN / 2);
        }
    }

    #[test]
    fn band_membership_and_measure() {
        let w = CirclePoint::from_turns(0.1);
        for eta in [0.01f64, 0.05, 0.1] {
            let band = ArcBand::new(w, eta).unwrap();
            let mut rng = Seed(22).stream("band", (eta * 1000.0) as u64);
            // every band draw is a member
            for _ in 0..2_000 {
                assert!(band.contains(band.sample(&mut rng)));
            }
            // uniform-circle hit rate = 4·eta within 3 standard errors
            let n = 100_000u64;
            let hits = (0..n)
                .filter(|_| band.contains(CirclePoint::uniform(&mut rng)))
                .count() as f64;
            let rate = hits / n as f64;
            let expect = 4.0 * eta;
            let se = (expect * (1.0 - expect) / n as f64).sqrt();
            assert!(
                (rate - expect).abs() < 3.0 * se + 1e-9,
                "eta {eta}: rate {rate} vs {expect}"
            );
        }
    }

    #[test]
    fn band_quarters_receive_equal_mass() {
        // The two arcs, each split at the boundary point, give 4 quarter
        // arcs; a chi-square over 1e5 draws must stay under the 0.999
        // quantile of chi2(3) ≈ 16.27.
        let w = CirclePoint::from_turns(0.42);
        let band = ArcBand::new(w, 0.05).unwrap();
        let h = HalfplaneHypothesis::new(w);
        let [b0, b1] = h.boundaries();
        let mut rng = Seed(23).stream("band-quarters", 0);
        let mut counts = [0u64; 4];
        let n = 100_000u64;
        for _ in 0..n {
            let x = band.sample(&mut rng);
            let (near, base) = if x.dist(b0) <= x.dist(b1) { (b0, 0) } else { (b1, 2) };
            let fwd = x.sub(near).raw() < TURN / 2;
            counts[base + fwd as usize] += 1;
        }
        let e = n as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e) * (c as f64 - e) / e).sum();
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn band_rejects_bad_alpha() {
        let w = CirclePoint::from_turns(0.0);
        assert!(ArcBand::new(w, 0.25).is_err());
        assert!(ArcBand::new(w, 0.0).is_err());
        assert!(ArcBand::new(w, -0.1).is_err());
        assert!(ArcBand::new(w, 0.3).is_err());
    }

    #[test]
    fn task_oracle_flags_cipher_answers_as_errors() {
        // the circle task is all-clear; any non-sign answer is wrong
        let task = circle_task(CirclePoint::from_turns(0.5));
        let mut rng = Seed(24).stream("circle", 1);
        let s = task.sample(&mut rng);
        assert_eq!(task.oracle(&s.x, &s.y), OracleVerdict::Correct);
        let flipped = Label::Clear(s.y.clear().unwrap().flip());
        assert_eq!(task.oracle(&s.x, &flipped), OracleVerdict::Error);
    }

    #[test]
    fn hex_roundtrip() {
        let w = CirclePoint::from_turns(0.123456789);
        assert_eq!(CirclePoint::from_hex(&w.to_hex()), Some(w));
    }

    #[test]
    fn bits_roundtrip() {
        let x = CirclePoint::from_turns(0.9999);
        assert_eq!(CirclePoint::from_bits(&x.to_bits()), Some(x));
        assert_eq!(CirclePoint::from_bits(&[true, false]), None);
    }
}
