//! Transductive selective classification and the defense built on it.
//!
//! The procedure fits a consistent classifier `f` on the training set, then
//! repeatedly searches the hypothesis class for a competitor that disagrees
//! with `f` on a lot of still-accepted test mass while fitting the training
//! set almost as well. Every such competitor marks its disagreement region
//! for rejection; after at most `⌈1/ε*⌉` rounds no competitor clears the
//! bar and the selective classifier is returned. On accepted points it
//! always answers exactly as `f` does.
//!
//! The competitor search is exact per task family: a boundary sweep over
//! the event angles for halfplanes, a separable top-d selection for the
//! exactly-d-ones class.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha12Rng;

use crate::domain::{Budget, Decision, Label, Sign, TaskView};
use crate::players::halfplane::erm_halfplane;
use crate::players::{PlayerError, Predictor};
use crate::tasks::circle::{CirclePoint, HalfplaneHypothesis, QUARTER, TURN};

/// Hypothesis class with the two oracles Rejectron needs: a consistent ERM
/// and an exact maximizer of the weighted disagreement score.
pub trait RejectronClass<X> {
    type Hypothesis: Predictor<X> + Clone + Send + Sync;

    /// Consistent hypothesis for a realizable labeled set.
    fn erm(&self, samples: &[(X, Sign)]) -> Result<Self::Hypothesis, PlayerError>;

    /// Maximize `disagreement(c, f | accepted test) / |test| −
    /// lambda · training_error(c) / |train|` over the class; returns the
    /// maximizer and its score.
    fn best_competitor(
        &self,
        f: &Self::Hypothesis,
        train: &[(X, Sign)],
        test_accepted: &[X],
        test_total: usize,
        lambda: f64,
    ) -> Result<(Self::Hypothesis, f64), PlayerError>;
}

/// Selective classifier: the base hypothesis plus the competitors whose
/// disagreement regions are rejected.
pub struct SelectiveClassifier<X, H> {
    base: H,
    rejectors: Vec<H>,
    _marker: std::marker::PhantomData<fn(&X)>,
}

impl<X, H: Predictor<X>> SelectiveClassifier<X, H> {
    pub fn base(&self) -> &H {
        &self.base
    }

    pub fn rounds(&self) -> usize {
        self.rejectors.len()
    }

    pub fn classify(&self, x: &X) -> Decision {
        let fx = self.base.predict(x);
        for c in &self.rejectors {
            if c.predict(x) != fx {
                return Decision::Reject;
            }
        }
        Decision::Label(fx)
    }

    pub fn classify_all(&self, xs: &[X]) -> Vec<Decision> {
        xs.iter().map(|x| self.classify(x)).collect()
    }
}

/// Run Rejectron from its second step: `f` is already fitted on `train`,
/// `test` is the received query set.
pub fn rejectron_from_fitted<X: Clone, C: RejectronClass<X>>(
    class: &C,
    f: C::Hypothesis,
    train: &[(X, Sign)],
    test: &[X],
    eps_star: f64,
) -> Result<SelectiveClassifier<X, C::Hypothesis>, PlayerError> {
    if !(eps_star > 0.0 && eps_star < 1.0) {
        return Err(PlayerError::ParamOutOfRange {
            name: "eps_star",
            value: eps_star,
        });
    }
    let lambda = 1.0 + 1.0 / eps_star;
    let max_rounds = (1.0 / eps_star).ceil() as usize + 1;
    let mut rejectors: Vec<C::Hypothesis> = Vec::new();
    let mut accepted: Vec<X> = test.to_vec();

    for _ in 0..max_rounds {
        if accepted.is_empty() {
            break;
        }
        let (candidate, score) =
            class.best_competitor(&f, train, &accepted, test.len(), lambda)?;
        if score <= eps_star {
            break;
        }
        accepted.retain(|x| candidate.predict(x) == f.predict(x));
        rejectors.push(candidate);
    }

    Ok(SelectiveClassifier {
        base: f,
        rejectors,
        _marker: std::marker::PhantomData,
    })
}

/// Full Rejectron call: consistent ERM on the training set, then the
/// iterative competitor search.
pub fn rejectron<X: Clone, C: RejectronClass<X>>(
    class: &C,
    train: &[(X, Sign)],
    test: &[X],
    eps_star: f64,
) -> Result<SelectiveClassifier<X, C::Hypothesis>, PlayerError> {
    let f = class.erm(train)?;
    rejectron_from_fitted(class, f, train, test, eps_star)
}

// ---------------------------------------------------------------------------
// Halfplane class search: boundary sweep
// ---------------------------------------------------------------------------

/// The halfplane class over the circle.
pub struct HalfplaneClass;

impl RejectronClass<CirclePoint> for HalfplaneClass {
    type Hypothesis = HalfplaneHypothesis;

    fn erm(&self, samples: &[(CirclePoint, Sign)]) -> Result<HalfplaneHypothesis, PlayerError> {
        erm_halfplane(samples)
    }

    fn best_competitor(
        &self,
        f: &HalfplaneHypothesis,
        train: &[(CirclePoint, Sign)],
        test_accepted: &[CirclePoint],
        test_total: usize,
        lambda: f64,
    ) -> Result<(HalfplaneHypothesis, f64), PlayerError> {
        // Weighted points: a test point contributes +1/|test| while
        // classified differently from f, a train point −lambda/|train| while
        // misclassified. The candidate label of a point x flips exactly when
        // the normal crosses x − ¼ or x + ¼, so the score is piecewise
        // constant between consecutive event angles and one circular sweep
        // with incremental updates visits every value it takes.
        #[derive(Clone, Copy)]
        struct Pt {
            x: u64,
            // score delta while the candidate labels this point +1
            plus_weight: f64,
            minus_weight: f64,
        }
        let test_w = 1.0 / test_total.max(1) as f64;
        let train_w = lambda / train.len().max(1) as f64;
        let mut pts: Vec<Pt> = Vec::with_capacity(train.len() + test_accepted.len());
        for &(x, y) in train {
            pts.push(Pt {
                x: x.raw(),
                plus_weight: if y.is_plus() { 0.0 } else { -train_w },
                minus_weight: if y.is_plus() { -train_w } else { 0.0 },
            });
        }
        for &x in test_accepted {
            let fx = f.label(x);
            pts.push(Pt {
                x: x.raw(),
                plus_weight: if fx.is_plus() { 0.0 } else { test_w },
                minus_weight: if fx.is_plus() { test_w } else { 0.0 },
            });
        }
        if pts.is_empty() {
            return Ok((*f, 0.0));
        }

        const MASK: u64 = TURN - 1;
        // events where some point's candidate label flips as w sweeps
        #[derive(Clone, Copy)]
        struct Event {
            w: u64,
            delta: f64,
        }
        let mut events: Vec<Event> = Vec::with_capacity(2 * pts.len());
        // candidate with normal w labels x as + iff w ∈ (x − ¼, x + ¼]
        for p in &pts {
            let enter_plus = p.x.wrapping_sub(QUARTER) & MASK; // exclusive
            let leave_plus = p.x.wrapping_add(QUARTER) & MASK; // inclusive end
            // at w just past enter_plus the point turns +
            events.push(Event {
                w: enter_plus,
                delta: p.plus_weight - p.minus_weight,
            });
            events.push(Event {
                w: leave_plus,
                delta: p.minus_weight - p.plus_weight,
            });
        }
        events.sort_by_key(|e| e.w);

        // initial score at w0 = events[0].w (inclusive end of sweep step):
        // evaluate directly
        let score_at = |w: u64| -> f64 {
            let h = HalfplaneHypothesis::new(CirclePoint::from_raw(w));
            let mut s = 0.0;
            for p in &pts {
                if h.label(CirclePoint::from_raw(p.x)).is_plus() {
                    s += p.plus_weight;
                } else {
                    s += p.minus_weight;
                }
            }
            s
        };

        // sweep: just after event e.w the score changes by e.delta; the
        // plateau between event i and i+1 is any normal in (w_i, w_{i+1}];
        // we score the plateau and remember the best
        let mut best_w = events[0].w;
        let mut best_score = score_at(events[0].w);
        let mut score = best_score;
        for i in 0..events.len() {
            // crossing event i: candidate normals strictly beyond w_i
            score += events[i].delta;
            let next_w = events[(i + 1) % events.len()].w;
            // representative normal inside the plateau (w_i, next_w]
            let width = next_w.wrapping_sub(events[i].w) & MASK;
            let rep = if width == 0 {
                continue;
            } else {
                next_w
            };
            if score > best_score + 1e-15 {
                best_score = score;
                best_w = rep;
            }
        }
        // the sweep accumulates float error over 2·|pts| updates; rescore
        // the winner exactly
        let h = HalfplaneHypothesis::new(CirclePoint::from_raw(best_w));
        Ok((h, score_at(best_w)))
    }
}

// ---------------------------------------------------------------------------
// Exactly-d-ones class search: separable top-d selection
// ---------------------------------------------------------------------------

/// The exactly-d-ones class over `[N]`.
pub struct DOnesClass {
    pub d: u64,
    pub domain_size: u64,
}

/// Hypothesis of [`DOnesClass`]: the positive index set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DOnesPredictor {
    pub positives: BTreeSet<u64>,
}

impl Predictor<u64> for DOnesPredictor {
    fn predict(&self, x: &u64) -> Label {
        Label::Clear(Sign::from_bool(self.positives.contains(x)))
    }
}

impl DOnesClass {
    /// Pad a positive set up to exactly `d` indices, avoiding `avoid`.
    fn pad(
        &self,
        mut positives: BTreeSet<u64>,
        avoid: &dyn Fn(u64) -> bool,
    ) -> BTreeSet<u64> {
        // deterministic scan padding is fine here: only class membership
        // matters for the search
        let mut x = 0u64;
        while (positives.len() as u64) < self.d && x < self.domain_size {
            if !positives.contains(&x) && !avoid(x) {
                positives.insert(x);
            }
            x += 1;
        }
        positives
    }
}

impl RejectronClass<u64> for DOnesClass {
    type Hypothesis = DOnesPredictor;

    fn erm(&self, samples: &[(u64, Sign)]) -> Result<DOnesPredictor, PlayerError> {
        let mut positives = BTreeSet::new();
        let mut negatives = BTreeSet::new();
        for &(x, y) in samples {
            if y.is_plus() {
                positives.insert(x);
            } else {
                negatives.insert(x);
            }
        }
        if positives.intersection(&negatives).next().is_some() {
            return Err(PlayerError::InconsistentSamples);
        }
        if positives.len() as u64 > self.d {
            return Err(PlayerError::InconsistentSamples);
        }
        let negs = negatives.clone();
        let positives = self.pad(positives, &move |x| negs.contains(&x));
        Ok(DOnesPredictor { positives })
    }

    fn best_competitor(
        &self,
        f: &DOnesPredictor,
        train: &[(u64, Sign)],
        test_accepted: &[u64],
        test_total: usize,
        lambda: f64,
    ) -> Result<(DOnesPredictor, f64), PlayerError> {
        // The score is a sum of independent per-index contributions, so the
        // exact maximizer under |positives| = d is: take the d indices with
        // the largest gain of being positive rather than negative, breaking
        // ties toward f's own positives (gain 0 padding).
        let test_w = 1.0 / test_total.max(1) as f64;
        let train_w = lambda / train.len().max(1) as f64;
        let mut gain: BTreeMap<u64, f64> = BTreeMap::new();
        let mut baseline = 0.0; // score with all-negative c before the swap gains
        for &(x, y) in train {
            let g = gain.entry(x).or_insert(0.0);
            if y.is_plus() {
                // c(x) = −1 costs a training error
                baseline += -train_w;
                *g += train_w; // making it positive removes that error
            } else {
                *g -= train_w; // making it positive adds an error
            }
        }
        for &x in test_accepted {
            let fx = f.predict(&x) == Label::PLUS;
            let g = gain.entry(x).or_insert(0.0);
            if fx {
                // c(x) = −1 disagrees with f: contributes test weight
                baseline += test_w;
                *g -= test_w;
            } else {
                *g += test_w;
            }
        }
        // the d best swap gains; indices outside `gain` have gain 0 — they
        // can absorb any remaining positive slots, preferring f's positives
        // so the competitor stays close to f elsewhere
        let mut ranked: Vec<(f64, u64)> = gain.iter().map(|(&x, &g)| (g, x)).collect();
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut positives = BTreeSet::new();
        let mut score = baseline;
        for (g, x) in ranked {
            if positives.len() as u64 == self.d {
                break;
            }
            if g > 0.0 {
                positives.insert(x);
                score += g;
            } else {
                break;
            }
        }
        let mentioned: BTreeSet<u64> = gain.keys().copied().collect();
        if (positives.len() as u64) < self.d {
            // zero-gain padding from f's positives first
            for &x in f.positives.iter() {
                if positives.len() as u64 == self.d {
                    break;
                }
                if !mentioned.contains(&x) {
                    positives.insert(x);
                }
            }
        }
        let positives = self.pad(positives, &|x| mentioned.contains(&x));
        Ok((DOnesPredictor { positives }, score))
    }
}

// ---------------------------------------------------------------------------
// The defense
// ---------------------------------------------------------------------------

/// Threshold formula `ε* = sqrt(2d/N · ln(2N) + ln(1/ε)/N)`.
pub fn rejectron_eps_star(vc_dim: u64, train_size: u64, eps: f64) -> f64 {
    let n = train_size as f64;
    (2.0 * vc_dim as f64 / n * (2.0 * n).ln() + (1.0 / eps).ln() / n).sqrt()
}

/// Training-set size `N = d·log2(d)²/ε³` used by the defense (for the
/// halfplane family, d = 2, this is `2/ε³`).
pub fn defense_train_size(vc_dim: u64, eps: f64) -> u64 {
    let d = vc_dim as f64;
    let log2d = d.log2().max(1.0);
    (d * log2d * log2d / (eps * eps * eps)).ceil() as u64
}

/// A fitted defense: the published classifier plus the retained training
/// set it reuses when detecting.
pub struct FittedDefense<X, H> {
    pub classifier: H,
    train: Vec<(X, Sign)>,
    eps: f64,
    eps_star: f64,
}

impl<X: Clone, H> FittedDefense<X, H> {
    pub fn eps_star(&self) -> f64 {
        self.eps_star
    }

    /// Receive queries, run the selective step, output the detection bit:
    /// `b = 1` iff the rejection rate exceeds `⅔·ε`.
    pub fn detect<C>(&self, class: &C, queries: &[X]) -> Result<DefenseRound, PlayerError>
    where
        C: RejectronClass<X, Hypothesis = H>,
        H: Predictor<X> + Clone + Send + Sync,
    {
        let selective = rejectron_from_fitted(
            class,
            self.classifier.clone(),
            &self.train,
            queries,
            self.eps_star,
        )?;
        let decisions = selective.classify_all(queries);
        let rejection = crate::domain::rejection_rate(&decisions)
            .expect("queries are nonempty");
        Ok(DefenseRound {
            detected: rejection > 2.0 / 3.0 * self.eps,
            rejection_rate: rejection,
            decisions,
        })
    }
}

/// Outcome of one defense round.
pub struct DefenseRound {
    pub detected: bool,
    pub rejection_rate: f64,
    pub decisions: Vec<Decision>,
}

/// Fit the defense: draw `train_size` samples, publish the consistent ERM.
pub fn fit_defense<X: Clone, C: RejectronClass<X>>(
    class: &C,
    view: TaskView<'_, X>,
    train_size: u64,
    eps: f64,
    vc_dim: u64,
    budget: &mut Budget,
    rng: &mut ChaCha12Rng,
) -> Result<FittedDefense<X, C::Hypothesis>, PlayerError> {
    if !(eps > 0.0 && eps < 0.125) {
        return Err(PlayerError::ParamOutOfRange {
            name: "eps",
            value: eps,
        });
    }
    let samples = view.draw_many(train_size, budget, rng)?;
    let train: Vec<(X, Sign)> = samples
        .into_iter()
        .filter_map(|s| Some((s.x, s.y.clear()?)))
        .collect();
    let classifier = class.erm(&train)?;
    Ok(FittedDefense {
        classifier,
        train,
        eps,
        eps_star: rejectron_eps_star(vc_dim, train_size, eps),
    })
}

/// Nash-construction defense wrapper: flag if the inner player already
/// flagged, or if the answers stray from the published classifier on more
/// than `3εq` positions.
pub fn defense_nash_wrapper(
    classifier_answers: &[Label],
    answers: &[Label],
    inner_bit: bool,
    eps: f64,
    q: usize,
) -> Result<bool, PlayerError> {
    if classifier_answers.len() != answers.len() {
        return Err(PlayerError::ParamOutOfRange {
            name: "answers_len",
            value: answers.len() as f64,
        });
    }
    if inner_bit {
        return Ok(true);
    }
    let hamming = classifier_answers
        .iter()
        .zip(answers)
        .filter(|(a, b)| a != b)
        .count();
    Ok(hamming as f64 > 3.0 * eps * q as f64)
}
