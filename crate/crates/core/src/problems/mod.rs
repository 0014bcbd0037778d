//! Benchmark objectives, constraint predicates, and the affine map between a
//! problem's native box and the optimizer's `[-1, 1]^n` working box.

pub mod cec;
pub mod circles;
pub mod fractal;
pub mod lp;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cec::{f1_2017, f4_2017, Rotation};
pub use circles::{circle_packing_fitness, optimal_radii};
pub use fractal::{fourier_partial_objective, fractal_objective, multimodal_fractal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Objective value oriented for maximization, or the infeasible marker
/// (weight zero in the fitness transform).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fitness {
    Feasible(f64),
    Infeasible,
}

impl Fitness {
    pub fn value(self) -> Option<f64> {
        match self {
            Fitness::Feasible(v) => Some(v),
            Fitness::Infeasible => None,
        }
    }

    pub fn is_feasible(self) -> bool {
        matches!(self, Fitness::Feasible(_))
    }

    /// Feasible values rank above the marker; the marker maps to `-inf`.
    pub fn or_neg_inf(self) -> f64 {
        self.value().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Per-dimension map `x_norm = (x - shift) / scale`, where `shift` is the box
/// center and `scale` its half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

impl AffineMap {
    pub fn from_bounds(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
            return Err(Error::invalid("box bounds must satisfy lower < upper"));
        }
        Ok(Self {
            scale: lower.iter().zip(upper).map(|(l, u)| 0.5 * (u - l)).collect(),
            shift: lower.iter().zip(upper).map(|(l, u)| 0.5 * (u + l)).collect(),
        })
    }

    pub fn normalize(&self, x_native: &[f64]) -> Vec<f64> {
        x_native
            .iter()
            .zip(self.scale.iter().zip(&self.shift))
            .map(|(x, (s, c))| (x - c) / s)
            .collect()
    }

    pub fn denormalize(&self, x_norm: &[f64]) -> Vec<f64> {
        x_norm
            .iter()
            .zip(self.scale.iter().zip(&self.shift))
            .map(|(z, (s, c))| c + s * z)
            .collect()
    }
}

pub type ObjectiveFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type ConstraintFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A box-bounded optimization problem in native coordinates.
#[derive(Clone)]
pub struct Problem {
    pub id: String,
    pub sense: Sense,
    lower: Vec<f64>,
    upper: Vec<f64>,
    map: AffineMap,
    objective: Arc<ObjectiveFn>,
    constraint: Option<Arc<ConstraintFn>>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("id", &self.id)
            .field("sense", &self.sense)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("constrained", &self.constraint.is_some())
            .finish()
    }
}

impl Problem {
    pub fn new(
        id: impl Into<String>,
        sense: Sense,
        lower: Vec<f64>,
        upper: Vec<f64>,
        objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let map = AffineMap::from_bounds(&lower, &upper)?;
        if lower.is_empty() {
            return Err(Error::invalid("problem dimension must be at least 1"));
        }
        Ok(Self {
            id: id.into(),
            sense,
            lower,
            upper,
            map,
            objective: Arc::new(objective),
            constraint: None,
        })
    }

    /// Adds the membership predicate for the feasible set (native coordinates).
    pub fn with_constraint(mut self, constraint: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.constraint = Some(Arc::new(constraint));
        self
    }

    /// Same objective and constraint on a different box (restart refinement).
    pub fn with_bounds(&self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: lower.len(),
            });
        }
        let map = AffineMap::from_bounds(&lower, &upper)?;
        Ok(Self {
            lower,
            upper,
            map,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn affine(&self) -> &AffineMap {
        &self.map
    }

    pub fn is_constrained(&self) -> bool {
        self.constraint.is_some()
    }

    /// Raw objective in native coordinates (not oriented).
    pub fn objective(&self, x_native: &[f64]) -> f64 {
        (self.objective)(x_native)
    }

    pub fn is_feasible(&self, x_native: &[f64]) -> bool {
        self.constraint.as_ref().map_or(true, |c| c(x_native))
    }

    pub fn normalize(&self, x_native: &[f64]) -> Vec<f64> {
        self.map.normalize(x_native)
    }

    pub fn denormalize(&self, x_norm: &[f64]) -> Vec<f64> {
        self.map.denormalize(x_norm)
    }

    /// Objective oriented for maximization at a working-box point. Constraint
    /// violations and non-finite objective values yield [`Fitness::Infeasible`].
    pub fn raw_fitness(&self, x_norm: &[f64]) -> Fitness {
        let x = self.denormalize(x_norm);
        if !self.is_feasible(&x) {
            return Fitness::Infeasible;
        }
        let v = self.objective(&x);
        if !v.is_finite() {
            return Fitness::Infeasible;
        }
        Fitness::Feasible(match self.sense {
            Sense::Maximize => v,
            Sense::Minimize => -v,
        })
    }
}

/// Problem selection plus its parameters, as written in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub id: String,
    /// Dimension for the CEC functions (default 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Retained series terms for the fractal objectives (default 21).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Seed of the random rotation for the CEC functions; none means identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_seed: Option<u64>,
    /// Shift vector for the CEC functions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
    /// Native box override (both bounds required together).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            dim: None,
            depth: None,
            rotation_seed: None,
            shift: None,
            lower: None,
            upper: None,
        }
    }

    pub fn build(&self) -> Result<Problem> {
        let problem = build_base(self)?;
        match (&self.lower, &self.upper) {
            (Some(l), Some(u)) => problem.with_bounds(l.clone(), u.clone()),
            (None, None) => Ok(problem),
            _ => Err(Error::Config("problem.lower and problem.upper must be given together".into())),
        }
    }
}

/// Registered problem ids with a one-line description.
pub const REGISTRY: &[(&str, &str)] = &[
    ("fractal", "Fourier fractal objective on [0,1] (minimize)"),
    ("fractal-mm", "mirrored fractal (F(x)+F(1-x))/2 on [0,1], two global minima (minimize)"),
    ("f1-2017", "CEC2017 F1 on [-100,100]^n, optional rotation/shift (minimize)"),
    ("f4-2017", "CEC2017 F4 (Rastrigin) on [-100,100]^n, optional rotation/shift (minimize)"),
    ("circles-n<k>", "k circle centers in the unit square, sum of LP-optimal radii (maximize)"),
];

fn build_base(spec: &ProblemSpec) -> Result<Problem> {
    let depth = spec.depth.unwrap_or(fractal::DEFAULT_DEPTH);
    if depth == 0 {
        return Err(Error::Config("problem.depth must be at least 1".into()));
    }
    match spec.id.as_str() {
        "fractal" => Problem::new("fractal", Sense::Minimize, vec![0.0], vec![1.0], move |x| {
            fractal_objective(x[0], depth)
        }),
        "fractal-mm" => Problem::new("fractal-mm", Sense::Minimize, vec![0.0], vec![1.0], move |x| {
            multimodal_fractal(x[0], depth)
        }),
        "f1-2017" | "f4-2017" => {
            let n = spec.dim.unwrap_or(2);
            if n == 0 {
                return Err(Error::Config("problem.dim must be at least 1".into()));
            }
            let rotation = spec.rotation_seed.map(|s| Rotation::random(n, s));
            let shift = spec.shift.clone();
            if let Some(s) = &shift {
                if s.len() != n {
                    return Err(Error::Config(format!("problem.shift has {} entries, expected {n}", s.len())));
                }
            }
            let f4 = spec.id == "f4-2017";
            Problem::new(spec.id.clone(), Sense::Minimize, vec![-100.0; n], vec![100.0; n], move |x| {
                if f4 {
                    f4_2017(x, rotation.as_ref(), shift.as_deref())
                } else {
                    f1_2017(x, rotation.as_ref(), shift.as_deref())
                }
            })
        }
        id if id.starts_with("circles-n") => {
            let k: usize = id["circles-n".len()..]
                .parse()
                .map_err(|_| Error::UnknownProblem(id.to_string()))?;
            if k == 0 {
                return Err(Error::UnknownProblem(id.to_string()));
            }
            let problem = Problem::new(id, Sense::Maximize, vec![0.0; 2 * k], vec![1.0; 2 * k], |x| {
                circle_packing_fitness(&circles::centers_from_flat(x))
            })?;
            Ok(problem.with_constraint(|x| x.iter().all(|v| (0.0..=1.0).contains(v))))
        }
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn affine_examples() {
        let m = AffineMap::from_bounds(&[0.0], &[1.0]).unwrap();
        assert_eq!(m.normalize(&[0.5]), vec![0.0]);
        assert_eq!(m.normalize(&[0.0]), vec![-1.0]);
        assert_eq!(m.normalize(&[1.0]), vec![1.0]);
        let m = AffineMap::from_bounds(&[-100.0], &[100.0]).unwrap();
        assert_eq!(m.denormalize(&[1.0]), vec![100.0]);
        assert_eq!(m.denormalize(&[-1.0]), vec![-100.0]);
    }

    #[test]
    fn affine_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let n = rng.gen_range(1..6);
            let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..0.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.1..100.0)).collect();
            let m = AffineMap::from_bounds(&lower, &upper).unwrap();
            let x: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| rng.gen_range(*l..*u)).collect();
            let back = m.denormalize(&m.normalize(&x));
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bad_bounds_rejected() {
        assert!(AffineMap::from_bounds(&[1.0], &[1.0]).is_err());
        assert!(AffineMap::from_bounds(&[0.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn raw_fitness_orientation_and_constraints() {
        let p = Problem::new("q", Sense::Minimize, vec![-2.0], vec![2.0], |x| (x[0] - 0.5).powi(2))
            .unwrap()
            .with_constraint(|x| x[0] > 0.0);
        assert_eq!(p.raw_fitness(&[-0.5]), Fitness::Infeasible);
        assert!(p.raw_fitness(&[0.5]).value().unwrap().is_finite());
        // argmax of raw fitness equals argmin of the objective on a grid.
        let grid: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 / 200.0).collect();
        let arg_fit = grid
            .iter()
            .copied()
            .max_by(|a, b| p.raw_fitness(&[*a]).or_neg_inf().total_cmp(&p.raw_fitness(&[*b]).or_neg_inf()))
            .unwrap();
        let arg_obj = grid
            .iter()
            .copied()
            .filter(|z| p.is_feasible(&p.denormalize(&[*z])))
            .min_by(|a, b| p.objective(&p.denormalize(&[*a])).total_cmp(&p.objective(&p.denormalize(&[*b]))))
            .unwrap();
        assert_eq!(arg_fit, arg_obj);
        assert!((p.denormalize(&[arg_fit])[0] - 0.5).abs() < 0.011);
    }

    #[test]
    fn registry_builds_every_id() {
        for id in ["fractal", "fractal-mm", "f1-2017", "f4-2017", "circles-n3"] {
            let p = ProblemSpec::new(id).build().unwrap();
            assert_eq!(p.id, id);
        }
        assert_eq!(ProblemSpec::new("circles-n3").build().unwrap().dim(), 6);
        assert!(matches!(ProblemSpec::new("nope").build(), Err(Error::UnknownProblem(_))));
        assert!(ProblemSpec::new("circles-nx").build().is_err());
        assert!(ProblemSpec::new("circles-n0").build().is_err());
    }

    #[test]
    fn circles_constraint_marks_outside_points() {
        let p = ProblemSpec::new("circles-n1").build().unwrap();
        // Working box maps exactly onto the unit square, so push outside it.
        assert_eq!(p.raw_fitness(&[1.5, 0.0]), Fitness::Infeasible);
        assert!((p.raw_fitness(&[0.0, 0.0]).value().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn box_override_applies() {
        let mut spec = ProblemSpec::new("f4-2017");
        spec.lower = Some(vec![-1.0, -1.0]);
        spec.upper = Some(vec![1.0, 1.0]);
        let p = spec.build().unwrap();
        assert_eq!(p.denormalize(&[1.0, -1.0]), vec![1.0, -1.0]);
        spec.upper = None;
        assert!(spec.build().is_err());
    }
}
