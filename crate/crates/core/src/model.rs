//! Problem data: plant, cost weights, initial belief and the quadratic cost.

use alloc::format;
use alloc::vec::Vec;

use crate::error::Violation;
use crate::linalg::{self, MODEL_PIVOT_TOLERANCE};
use crate::{Error, Matrix, Result, Vector};

/// Asymmetry (relative) above which a covariance or weight is rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// `x(k+1) = A x(k) + B u(k) + w(k)`, `y(k) = C x(k)`, with
/// `w(k) ~ N(0, sigma_w)` and `x(0) ~ N(x_ini, sigma_ini)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub sigma_w: Matrix,
    pub x_ini: Vector,
    pub sigma_ini: Matrix,
    /// Number of control steps `N`; states run over `0..=N`.
    pub horizon: usize,
}

impl PlantModel {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Length of the stacked measurement noise `v_{0:N}`, i.e. `p (N + 1)`.
    pub fn stacked_noise_len(&self) -> usize {
        self.output_dim() * (self.horizon + 1)
    }
}

/// Weights of `J = ½ x_Nᵀ Q_N x_N + ½ Σ_k (x_kᵀ Q x_k + u_kᵀ R u_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub q: Matrix,
    pub q_n: Matrix,
    pub r: Matrix,
}

/// Plant and weights that passed [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub plant: PlantModel,
    pub weights: CostWeights,
}

/// One closed-loop realization. `outputs` holds the privatized outputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub outputs: Vec<Vector>,
}

fn check_shape(
    out: &mut Vec<Violation>,
    name: &'static str,
    m: &Matrix,
    rows: usize,
    cols: usize,
) -> bool {
    if m.nrows() != rows || m.ncols() != cols {
        out.push(Violation::DimensionMismatch(format!(
            "`{name}` is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
        return false;
    }
    if m.iter().any(|x| !x.is_finite()) {
        out.push(Violation::NonFinite(name));
        return false;
    }
    true
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Definiteness {
    Positive,
    Semi,
}

fn check_symmetric(
    out: &mut Vec<Violation>,
    name: &'static str,
    m: &Matrix,
    kind: Definiteness,
) -> Matrix {
    if linalg::relative_asymmetry(m) > SYMMETRY_TOLERANCE {
        out.push(Violation::NotSymmetric(name));
        return m.clone();
    }
    let s = linalg::symmetrize(m);
    match kind {
        Definiteness::Positive => {
            if !linalg::is_positive_definite(&s, MODEL_PIVOT_TOLERANCE) {
                out.push(Violation::NotPositiveDefinite(name));
            }
        }
        Definiteness::Semi => {
            if !linalg::is_positive_semidefinite(&s, MODEL_PIVOT_TOLERANCE) {
                out.push(Violation::NotPositiveSemidefinite(name));
            }
        }
    }
    s
}

/// Checks every invariant of the plant and weights. Symmetric inputs whose
/// asymmetry is below [`SYMMETRY_TOLERANCE`] are returned symmetrized.
pub fn validate_model(plant: PlantModel, weights: CostWeights) -> Result<Problem> {
    let mut v = Vec::new();
    let n = plant.a.nrows();
    let m = plant.b.ncols();
    let p = plant.c.nrows();
    if n == 0 || m == 0 || p == 0 {
        v.push(Violation::DimensionMismatch(format!(
            "state, input and output dimensions must be >= 1 (n={n}, m={m}, p={p})"
        )));
        return Err(Error::InvalidModel(v));
    }
    if plant.horizon == 0 {
        v.push(Violation::DimensionMismatch(
            "horizon N must be >= 1".into(),
        ));
    }
    check_shape(&mut v, "A", &plant.a, n, n);
    check_shape(&mut v, "B", &plant.b, n, m);
    check_shape(&mut v, "C", &plant.c, p, n);
    if plant.x_ini.len() != n {
        v.push(Violation::DimensionMismatch(format!(
            "`x_ini` has length {}, expected {n}",
            plant.x_ini.len()
        )));
    } else if plant.x_ini.iter().any(|x| !x.is_finite()) {
        v.push(Violation::NonFinite("x_ini"));
    }

    let mut plant = plant;
    let mut weights = weights;
    if check_shape(&mut v, "Sigma_w", &plant.sigma_w, n, n) {
        plant.sigma_w = check_symmetric(&mut v, "Sigma_w", &plant.sigma_w, Definiteness::Positive);
    }
    if check_shape(&mut v, "Sigma_ini", &plant.sigma_ini, n, n) {
        plant.sigma_ini = check_symmetric(
            &mut v,
            "Sigma_ini",
            &plant.sigma_ini,
            Definiteness::Positive,
        );
    }
    if check_shape(&mut v, "Q", &weights.q, n, n) {
        weights.q = check_symmetric(&mut v, "Q", &weights.q, Definiteness::Semi);
    }
    if check_shape(&mut v, "Q_N", &weights.q_n, n, n) {
        weights.q_n = check_symmetric(&mut v, "Q_N", &weights.q_n, Definiteness::Semi);
    }
    if check_shape(&mut v, "R", &weights.r, m, m) {
        weights.r = check_symmetric(&mut v, "R", &weights.r, Definiteness::Positive);
    }

    if v.is_empty() {
        Ok(Problem { plant, weights })
    } else {
        Err(Error::InvalidModel(v))
    }
}

fn quad(x: &Vector, w: &Matrix) -> f64 {
    (x.transpose() * w * x)[(0, 0)]
}

/// Evaluates the finite-horizon cost of a trajectory.
pub fn stage_cost(trajectory: &Trajectory, weights: &CostWeights) -> Result<f64> {
    let n_steps = trajectory.inputs.len();
    if trajectory.states.len() != n_steps + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} states for {} inputs, expected N+1 = {}",
            trajectory.states.len(),
            n_steps,
            n_steps + 1
        )));
    }
    let n = weights.q.nrows();
    let m = weights.r.nrows();
    if trajectory.states.iter().any(|x| x.len() != n)
        || trajectory.inputs.iter().any(|u| u.len() != m)
    {
        return Err(Error::DimensionMismatch(
            "trajectory vectors do not match the weight dimensions".into(),
        ));
    }
    let mut running = 0.0;
    for (x, u) in trajectory.states.iter().zip(&trajectory.inputs) {
        running += quad(x, &weights.q) + quad(u, &weights.r);
    }
    let terminal = quad(&trajectory.states[n_steps], &weights.q_n);
    Ok(0.5 * terminal + 0.5 * running)
}

/// The numerical example plant: two states, one input, one output, `N = 20`.
pub fn example_plant() -> PlantModel {
    PlantModel {
        a: Matrix::from_row_slice(2, 2, &[1.15, 0.1, 0.0, 1.05]),
        b: Matrix::from_row_slice(2, 1, &[1.0, 0.5]),
        c: Matrix::from_row_slice(1, 2, &[1.0, 0.5]),
        sigma_w: Matrix::identity(2, 2) * 0.05,
        x_ini: Vector::from_vec(alloc::vec![1.0, -1.0]),
        sigma_ini: Matrix::identity(2, 2) * 0.2,
        horizon: 20,
    }
}

/// `Q = Q_N = I`, `R = 0.3`.
pub fn example_weights() -> CostWeights {
    CostWeights {
        q: Matrix::identity(2, 2),
        q_n: Matrix::identity(2, 2),
        r: Matrix::from_element(1, 1, 0.3),
    }
}
