use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DropletEvent, SorterError, TargetRule};
use crate::cnn::{combine_and, decide, CnnError, Decision, Network, Prediction};
use crate::imgproc::preprocess;
use crate::seed::derive_seed;
use crate::synth::Labeling;

/// Image (or ground-truth) to class probabilities.
pub trait Classifier {
    fn n_classes(&self) -> usize;
    fn classify(&mut self, event: &DropletEvent) -> Result<Prediction, SorterError>;
}

/// Accept/reject for one droplet.
pub trait Decider {
    fn decide(&mut self, event: &DropletEvent) -> Result<Verdict, SorterError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub prediction: Prediction,
    pub decision: Decision,
}

fn peaked(n_classes: usize, class: usize, confidence: f64) -> Prediction {
    let rest = if n_classes > 1 {
        (1.0 - confidence) / (n_classes - 1) as f64
    } else {
        0.0
    };
    let probs = (0..n_classes)
        .map(|c| if c == class { confidence } else { rest })
        .collect();
    Prediction::from_probs(probs)
}

/// Predicts the true label with certainty.
#[derive(Debug, Clone)]
pub struct OracleClassifier {
    pub labeling: Labeling,
    pub n_classes: usize,
}

impl Classifier for OracleClassifier {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn classify(&mut self, event: &DropletEvent) -> Result<Prediction, SorterError> {
        Ok(peaked(self.n_classes, self.labeling.label(&event.ground_truth), 1.0))
    }
}

/// Label-driven classifier with injected errors: a true target is called
/// `target_class` with probability `sensitivity`, anything else with
/// probability `false_accept`. Draws depend only on `(seed, id)`.
#[derive(Debug, Clone)]
pub struct ErrorStub {
    pub rule: TargetRule,
    pub target_class: usize,
    pub n_classes: usize,
    pub sensitivity: f64,
    pub false_accept: f64,
    pub confidence: f64,
    pub seed: u64,
}

impl ErrorStub {
    pub fn new(
        rule: TargetRule,
        target_class: usize,
        n_classes: usize,
        sensitivity: f64,
        false_accept: f64,
        seed: u64,
    ) -> Result<Self, SorterError> {
        if n_classes < 2 || target_class >= n_classes {
            return Err(SorterError::Config(format!(
                "target {target_class} with {n_classes} classes"
            )));
        }
        for (name, v) in [("sensitivity", sensitivity), ("false_accept", false_accept)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SorterError::Config(format!("{name} {v} outside [0, 1]")));
            }
        }
        Ok(Self {
            rule,
            target_class,
            n_classes,
            sensitivity,
            false_accept,
            confidence: 0.99,
            seed,
        })
    }
}

impl Classifier for ErrorStub {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn classify(&mut self, event: &DropletEvent) -> Result<Prediction, SorterError> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, event.id));
        let is_target = self.rule.is_target(&event.ground_truth);
        let p = if is_target { self.sensitivity } else { self.false_accept };
        let class = if rng.gen::<f64>() < p {
            self.target_class
        } else if event.label != self.target_class && event.label < self.n_classes {
            event.label
        } else {
            (self.target_class + 1) % self.n_classes
        };
        Ok(peaked(self.n_classes, class, self.confidence))
    }
}

/// Trained network applied to the droplet frame.
#[derive(Debug, Clone)]
pub struct CnnClassifier {
    pub net: Network<f32>,
    pub droplet_diameter_um: f64,
}

impl Classifier for CnnClassifier {
    fn n_classes(&self) -> usize {
        self.net.config().n_classes
    }

    fn classify(&mut self, event: &DropletEvent) -> Result<Prediction, SorterError> {
        let frame = event.frame.as_ref().ok_or(SorterError::MissingFrame(event.id))?;
        let img = preprocess(frame, self.net.config().input_px, self.droplet_diameter_um)?;
        Ok(self.net.predict(&img)?)
    }
}

/// Argmax must be `target` with confidence at least `theta`.
pub struct ThresholdDecider {
    classifier: Box<dyn Classifier>,
    target: usize,
    theta: f64,
}

impl ThresholdDecider {
    pub fn new(classifier: Box<dyn Classifier>, target: usize, theta: f64) -> Result<Self, SorterError> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(SorterError::Config(format!("threshold {theta} outside [0, 1]")));
        }
        let n = classifier.n_classes();
        if target >= n {
            return Err(CnnError::Label {
                label: target,
                n_classes: n,
            }
            .into());
        }
        Ok(Self {
            classifier,
            target,
            theta,
        })
    }
}

impl Decider for ThresholdDecider {
    fn decide(&mut self, event: &DropletEvent) -> Result<Verdict, SorterError> {
        let prediction = self.classifier.classify(event)?;
        Ok(Verdict {
            decision: decide(&prediction, self.target, self.theta),
            prediction,
        })
    }
}

/// Accepts only when both inner deciders accept. The reported prediction is the first one's.
pub struct AndDecider {
    pub first: Box<dyn Decider>,
    pub second: Box<dyn Decider>,
}

impl Decider for AndDecider {
    fn decide(&mut self, event: &DropletEvent) -> Result<Verdict, SorterError> {
        let a = self.first.decide(event)?;
        let b = self.second.decide(event)?;
        Ok(Verdict {
            decision: combine_and(a.decision, b.decision),
            prediction: a.prediction,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{GroundTruth, ObjectKind, ObjectSpec};

    fn event(id: u64, pa: usize) -> DropletEvent {
        let objects: Vec<ObjectSpec> = (0..pa)
            .map(|i| ObjectSpec {
                kind: ObjectKind::PaBead,
                diameter_um: 65.0,
                center_um: (i as f64, 0.0),
                focus_offset_um: 0.0,
            })
            .collect();
        let gt = GroundTruth::from_objects(&objects);
        DropletEvent {
            id,
            t_trigger_ms: id as f64,
            label: Labeling::TargetCount(ObjectKind::PaBead).label(&gt),
            ground_truth: gt,
            frame: None,
        }
    }

    #[test]
    fn oracle_is_exact() {
        let mut o = OracleClassifier {
            labeling: Labeling::TargetCount(ObjectKind::PaBead),
            n_classes: 3,
        };
        for k in 0..4 {
            let p = o.classify(&event(0, k)).unwrap();
            assert_eq!(p.class, k.min(2));
            assert_eq!(p.confidence, 1.0);
        }
    }

    #[test]
    fn stub_rates_and_determinism() {
        let rule = TargetRule::Class {
            labeling: Labeling::TargetCount(ObjectKind::PaBead),
            class: 1,
        };
        let mut stub = ErrorStub::new(rule, 1, 3, 0.8, 0.1, 5).unwrap();
        let n = 20_000;
        let hits = (0..n)
            .filter(|&i| stub.classify(&event(i, 1)).unwrap().class == 1)
            .count();
        let fas = (0..n)
            .filter(|&i| stub.classify(&event(i, 0)).unwrap().class == 1)
            .count();
        assert!((hits as f64 / n as f64 - 0.8).abs() < 0.015);
        assert!((fas as f64 / n as f64 - 0.1).abs() < 0.01);
        let again = stub.classify(&event(77, 1)).unwrap();
        assert_eq!(again, stub.classify(&event(77, 1)).unwrap());
        // a non-accepted non-target keeps its own label
        let perfect = ErrorStub::new(stub.rule.clone(), 1, 3, 1.0, 0.0, 0).unwrap();
        let mut perfect = perfect;
        assert_eq!(perfect.classify(&event(3, 2)).unwrap().class, 2);
    }

    #[test]
    fn threshold_decider_validates() {
        let o = || {
            Box::new(OracleClassifier {
                labeling: Labeling::Spheroid,
                n_classes: 3,
            }) as Box<dyn Classifier>
        };
        assert!(ThresholdDecider::new(o(), 1, 1.5).is_err());
        assert!(ThresholdDecider::new(o(), 3, 0.5).is_err());
        assert!(ThresholdDecider::new(o(), 2, 0.9).is_ok());
    }
}
