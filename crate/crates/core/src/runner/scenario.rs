use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::RunnerError;
use crate::imgproc::AugmentPlan;
use crate::sorter::TargetRule;
use crate::synth::{ClassRecipe, CountRule, Labeling, ObjectKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    PaSingle,
    PsSingle,
    Mcf7Single,
    MixtureMcf7Pa,
    MixtureMcf7Ps,
    DoublePoisson,
    Spheroid,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::PaSingle,
        Scenario::PsSingle,
        Scenario::Mcf7Single,
        Scenario::MixtureMcf7Pa,
        Scenario::MixtureMcf7Ps,
        Scenario::DoublePoisson,
        Scenario::Spheroid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::PaSingle => "pa_single",
            Scenario::PsSingle => "ps_single",
            Scenario::Mcf7Single => "mcf7_single",
            Scenario::MixtureMcf7Pa => "mixture_mcf7_pa",
            Scenario::MixtureMcf7Ps => "mixture_mcf7_ps",
            Scenario::DoublePoisson => "double_poisson",
            Scenario::Spheroid => "spheroid",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = RunnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
            RunnerError::Usage(format!("unknown scenario `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// One classifier: its labeling and the recipe for each class.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    /// Used for the dataset sub-directory.
    pub name: &'static str,
    pub target: ObjectKind,
    pub labeling: Labeling,
    pub recipes: Vec<ClassRecipe>,
}

/// How droplet contents are drawn for a sort stream.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamModel {
    /// Independent count per kind.
    Counts(Vec<(ObjectKind, CountRule)>),
    /// Pick a class of the first model by weight, then use its recipe.
    ClassMix(Vec<f64>),
}

impl StreamModel {
    pub fn draw_counts<R: Rng>(&self, models: &[ModelSpec], rng: &mut R) -> [u32; 4] {
        match self {
            StreamModel::Counts(rules) => ClassRecipe::new("stream", rules.clone()).draw_counts(rng),
            StreamModel::ClassMix(weights) => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                let mut class = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        class = i;
                        break;
                    }
                    u -= w;
                }
                models[0].recipes[class].draw_counts(rng)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub models: Vec<ModelSpec>,
    pub droplet_diameter_um: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub augment: AugmentPlan,
    pub theta: f64,
    pub target_class: usize,
    pub stream: StreamModel,
    pub stream_length: usize,
    pub rule: TargetRule,
}

/// Poisson(1) loading, capped where the droplet physically runs out of room.
fn poisson_capped(kind: ObjectKind, max: u32) -> CountRule {
    CountRule::Truncated {
        lambda: 1.0,
        min: 0,
        max: max.min(kind.max_multiple()),
    }
}

/// empty / single / multiple recipes for `target`, each with `others` mixed in.
fn counting_model(name: &'static str, target: ObjectKind, others: &[(ObjectKind, CountRule)]) -> ModelSpec {
    let class = |label: &str, rule: CountRule| {
        let mut c = vec![(target, rule)];
        c.extend_from_slice(others);
        ClassRecipe::new(label, c)
    };
    ModelSpec {
        name,
        target,
        labeling: Labeling::TargetCount(target),
        recipes: vec![
            class("empty", CountRule::Exactly(0)),
            class("single", CountRule::Exactly(1)),
            class(
                "multiple",
                CountRule::Truncated {
                    lambda: 1.0,
                    min: 2,
                    max: target.max_multiple(),
                },
            ),
        ],
    }
}

impl ScenarioSpec {
    pub fn preset(scenario: Scenario) -> ScenarioSpec {
        use ObjectKind::*;
        let single = |name, kind: ObjectKind, droplet, n_train, plan: &str| ScenarioSpec {
            scenario,
            models: vec![counting_model(name, kind, &[])],
            droplet_diameter_um: droplet,
            n_train,
            n_val: 20,
            augment: plan.parse().expect("preset plan"),
            theta: 0.5,
            target_class: 1,
            stream: StreamModel::Counts(vec![(kind, poisson_capped(kind, kind.max_multiple()))]),
            stream_length: 1000,
            rule: TargetRule::Class {
                labeling: Labeling::TargetCount(kind),
                class: 1,
            },
        };
        let mixture = |name, other: ObjectKind, droplet| {
            let others = [(other, poisson_capped(other, 2))];
            ScenarioSpec {
                models: vec![counting_model(name, Mcf7Cell, &others)],
                stream: StreamModel::Counts(vec![(Mcf7Cell, poisson_capped(Mcf7Cell, 5)), others[0]]),
                n_train: 200,
                ..single(name, Mcf7Cell, droplet, 200, "none")
            }
        };
        match scenario {
            Scenario::PaSingle => single("pa", PaBead, 150.0, 125, "none"),
            Scenario::PsSingle => single("ps", PsSphere, 100.0, 100, "rot20"),
            Scenario::Mcf7Single => single("mcf7", Mcf7Cell, 100.0, 100, "mirror+rot1"),
            Scenario::MixtureMcf7Pa => mixture("mcf7_with_pa", PaBead, 150.0),
            Scenario::MixtureMcf7Ps => mixture("mcf7_with_ps", PsSphere, 100.0),
            Scenario::DoublePoisson => {
                let cells = poisson_capped(Mcf7Cell, 3);
                let beads = poisson_capped(PaBead, 2);
                ScenarioSpec {
                    models: vec![
                        counting_model("mcf7_with_pa", Mcf7Cell, &[(PaBead, beads)]),
                        counting_model("pa_with_mcf7", PaBead, &[(Mcf7Cell, cells)]),
                    ],
                    stream: StreamModel::Counts(vec![(Mcf7Cell, cells), (PaBead, beads)]),
                    rule: TargetRule::Singles(vec![Mcf7Cell, PaBead]),
                    ..single("double", Mcf7Cell, 150.0, 200, "none")
                }
            }
            Scenario::Spheroid => ScenarioSpec {
                models: vec![ModelSpec {
                    name: "spheroid",
                    target: Spheroid,
                    labeling: Labeling::Spheroid,
                    recipes: vec![
                        ClassRecipe::new("empty", vec![]),
                        ClassRecipe::new("single_cell", vec![(Mcf7Cell, CountRule::Exactly(1))]),
                        ClassRecipe::new("spheroid", vec![(Spheroid, CountRule::Exactly(1))]),
                    ],
                }],
                theta: 0.9,
                target_class: 2,
                stream: StreamModel::ClassMix(vec![0.4, 0.4, 0.2]),
                stream_length: 5500,
                rule: TargetRule::Class {
                    labeling: Labeling::Spheroid,
                    class: 2,
                },
                ..single("spheroid", Spheroid, 150.0, 100, "none")
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{place_objects, GroundTruth, SceneStyle};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn names_roundtrip_and_unknown_is_rejected() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert!("pa".parse::<Scenario>().is_err());
    }

    #[test]
    fn every_recipe_yields_its_own_class_and_fits() {
        for s in Scenario::ALL {
            let spec = ScenarioSpec::preset(s);
            let style = SceneStyle {
                droplet_diameter_um: spec.droplet_diameter_um,
                ..SceneStyle::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            for m in &spec.models {
                assert_eq!(m.recipes.len(), 3, "{s}");
                for (class, recipe) in m.recipes.iter().enumerate() {
                    for _ in 0..40 {
                        let counts = recipe.draw_counts(&mut rng);
                        let objects = place_objects(counts, &style, &mut rng).unwrap();
                        assert_eq!(
                            m.labeling.label(&GroundTruth::from_objects(&objects)),
                            class,
                            "{s} {}",
                            recipe.name
                        );
                    }
                }
            }
            for _ in 0..200 {
                let counts = spec.stream.draw_counts(&spec.models, &mut rng);
                place_objects(counts, &style, &mut rng).unwrap();
            }
        }
    }

    #[test]
    fn spheroid_stream_prevalence() {
        let spec = ScenarioSpec::preset(Scenario::Spheroid);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let hits = (0..n)
            .filter(|_| spec.stream.draw_counts(&spec.models, &mut rng)[ObjectKind::Spheroid.index()] == 1)
            .count();
        assert!((hits as f64 / n as f64 - 0.2).abs() < 0.01);
        assert_eq!(spec.stream_length, 5500);
        assert_eq!(spec.theta, 0.9);
    }
}
