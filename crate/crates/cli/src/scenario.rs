//! Scenario files: orbit, chaser, initial state, weights, disturbance and
//! simulation settings, with units in the key names.

use std::path::Path;

use anyhow::{bail, Context};
use nalgebra::{DMatrix, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use rendezvous_core::dynamics::{ChaserConfig, OrbitConfig, RelativeState};
use rendezvous_core::simulator::{
    CostWeights, DisturbanceSpec, Integrator, PlantMode, SaturationMode, SimConfig, SineTerm,
};

pub const BUNDLED: &str = include_str!("../data/reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub orbit: OrbitSection,
    pub chaser: ChaserSection,
    pub initial_state: InitialState,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub disturbance: Vec<DisturbanceTerm>,
    #[serde(default)]
    pub simulation: Simulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSection {
    #[serde(default = "default_mu")]
    pub mu_m3_s2: f64,
    pub a_km: f64,
    pub e: f64,
    #[serde(default)]
    pub t_p_s: f64,
}

fn default_mu() -> f64 {
    rendezvous_core::dynamics::EARTH_MU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ChaserSection {
    pub m_kg: f64,
    pub u_px_max_N: f64,
    pub u_py_max_N: f64,
    pub u_q_max_N: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub position_m: [f64; 3],
    pub velocity_m_s: [f64; 3],
}

/// A weight given as `"identity"`, a scalar multiple of the identity, or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Named(String),
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Default for Weight {
    fn default() -> Self {
        Weight::Named("identity".into())
    }
}

impl Weight {
    pub fn to_matrix(&self, n: usize, name: &str) -> anyhow::Result<DMatrix<f64>> {
        let m = match self {
            Weight::Named(s) if s == "identity" => DMatrix::identity(n, n),
            Weight::Named(s) => bail!("weight `{name}`: unknown value `{s}` (expected \"identity\", a number or a matrix)"),
            Weight::Scalar(v) => DMatrix::identity(n, n) * *v,
            Weight::Matrix(rows) => matrix_from_rows(rows, n, n).with_context(|| format!("weight `{name}`"))?,
        };
        let sym = (&m - m.transpose()).amax();
        if sym > 1e-12 * m.amax().max(1.0) {
            bail!("weight `{name}` is not symmetric");
        }
        if m.clone().symmetric_eigenvalues().min() <= 0.0 {
            bail!("weight `{name}` is not positive definite");
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    #[serde(default)]
    pub q_p: Weight,
    #[serde(default)]
    pub r_p: Weight,
    #[serde(default)]
    pub q_q: Weight,
    #[serde(default)]
    pub r_q: Weight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct DisturbanceTerm {
    pub amplitude_N: f64,
    pub omega_rad_s: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    pub duration_s: f64,
    pub step_s: f64,
    #[serde(default = "one")]
    pub record_interval_s: f64,
    #[serde(default = "default_integrator")]
    pub integrator: String,
    #[serde(default = "default_plant")]
    pub plant: String,
    #[serde(default = "default_saturation")]
    pub saturation: String,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
}

fn one() -> f64 {
    1.0
}

fn default_integrator() -> String {
    "radau".into()
}

fn default_plant() -> String {
    "nonlinear-two-body".into()
}

fn default_saturation() -> String {
    "clamp".into()
}

fn default_rtol() -> f64 {
    1e-10
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            duration_s: 10_000.0,
            step_s: 0.1,
            record_interval_s: one(),
            integrator: default_integrator(),
            plant: default_plant(),
            saturation: default_saturation(),
            rtol: default_rtol(),
        }
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> anyhow::Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        bail!(
            "expected a {nrows}x{ncols} matrix, got {} rows of lengths {:?}",
            rows.len(),
            rows.iter().map(Vec::len).collect::<Vec<_>>()
        );
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        bail!("matrix has non-finite entries");
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Validated inputs derived from a scenario file.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub orbit: OrbitConfig<f64>,
    pub chaser: ChaserConfig<f64>,
    pub x0: RelativeState<f64>,
    pub q_p: DMatrix<f64>,
    pub r_p: DMatrix<f64>,
    pub q_q: DMatrix<f64>,
    pub r_q: f64,
    pub disturbance: DisturbanceSpec<f64>,
    pub sim: SimConfig<f64>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn resolve(self) -> anyhow::Result<Scenario> {
        let o = &self.orbit;
        let orbit = OrbitConfig::new(o.mu_m3_s2, o.a_km * 1e3, o.e, o.t_p_s)?;
        let c = &self.chaser;
        let chaser = ChaserConfig::new(c.m_kg, c.u_px_max_N, c.u_py_max_N, c.u_q_max_N)?;
        let [x, y, z] = self.initial_state.position_m;
        let [vx, vy, vz] = self.initial_state.velocity_m_s;
        let x0 = RelativeState::from_array([x, y, z, vx, vy, vz]);
        if !x0.is_finite() {
            bail!("initial state must be finite");
        }
        let q_p = self.weights.q_p.to_matrix(4, "q_p")?;
        let r_p = self.weights.r_p.to_matrix(2, "r_p")?;
        let q_q = self.weights.q_q.to_matrix(2, "q_q")?;
        let r_q = self.weights.r_q.to_matrix(1, "r_q")?[(0, 0)];
        let disturbance = DisturbanceSpec {
            terms: self
                .disturbance
                .iter()
                .map(|d| SineTerm { amplitude: d.amplitude_N, omega: d.omega_rad_s, phase: d.phase_rad })
                .collect(),
        };
        disturbance.validate()?;
        let s = &self.simulation;
        let mut sim = SimConfig::new(x0, s.duration_s);
        sim.step = s.step_s;
        sim.record_interval = s.record_interval_s;
        sim.rtol = s.rtol;
        sim.integrator = match s.integrator.as_str() {
            "radau" => Integrator::Radau,
            "rk4" | "rk4-fixed" => Integrator::Rk4,
            "rk45" | "rk45-adaptive" => Integrator::Rk45,
            other => bail!("unknown integrator `{other}` (radau, rk4, rk45)"),
        };
        sim.plant_mode = match s.plant.as_str() {
            "nonlinear-two-body" => PlantMode::NonlinearTwoBody,
            "linear-time-varying" => PlantMode::LinearTimeVarying,
            other => bail!("unknown plant mode `{other}` (nonlinear-two-body, linear-time-varying)"),
        };
        sim.saturation = match s.saturation.as_str() {
            "clamp" => SaturationMode::Clamp,
            "assert" => SaturationMode::Assert,
            other => bail!("unknown saturation mode `{other}` (clamp, assert)"),
        };
        sim.weights = CostWeights {
            q_p: Matrix4::from_iterator(q_p.iter().copied()),
            r_p: Matrix2::from_iterator(r_p.iter().copied()),
            q_q: Matrix2::from_iterator(q_q.iter().copied()),
            r_q,
        };
        sim.validate()?;
        Ok(Scenario { file: self, orbit, chaser, x0, q_p, r_p, q_q, r_q, disturbance, sim })
    }
}

impl Scenario {
    pub fn bundled() -> Self {
        ScenarioFile::parse(BUNDLED).and_then(ScenarioFile::resolve).expect("bundled scenario is valid")
    }

    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            Some(p) => ScenarioFile::load(p)?.resolve(),
            None => Ok(Self::bundled()),
        }
    }

    /// In-plane slice `[x, y, ẋ, ẏ]` of the initial state.
    pub fn p0(&self) -> nalgebra::DVector<f64> {
        let v = self.x0.to_vector();
        nalgebra::DVector::from_vec(vec![v[0], v[1], v[3], v[4]])
    }
}
