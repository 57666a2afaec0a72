use super::network::{Network, Prediction};
use super::{CnnError, Real};
use crate::imgproc::NormalizedFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn is_accept(self) -> bool {
        self == Decision::Accept
    }

    pub fn from_bool(accept: bool) -> Self {
        if accept {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

/// Accept iff the winning class is `target` and its probability reaches `theta`.
pub fn decide(pred: &Prediction, target: usize, theta: f64) -> Decision {
    Decision::from_bool(pred.class == target && pred.confidence >= theta)
}

pub fn predict_with_threshold<T: Real>(
    net: &Network<T>,
    image: &NormalizedFrame,
    target: usize,
    theta: f64,
) -> Result<(Decision, Prediction), CnnError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(CnnError::Config(format!("threshold {theta} outside [0, 1]")));
    }
    if target >= net.config().n_classes {
        return Err(CnnError::Label {
            label: target,
            n_classes: net.config().n_classes,
        });
    }
    let pred = net.predict(image)?;
    Ok((decide(&pred, target, theta), pred))
}

/// Both models must accept the same droplet.
pub fn combine_and(a: Decision, b: Decision) -> Decision {
    Decision::from_bool(a.is_accept() && b.is_accept())
}
