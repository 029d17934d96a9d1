//! JSON system definitions, versioned report envelopes and trajectory CSV.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::model::LagrangianSystem;
use crate::scalar::{RMat, Scalar};

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk system definition; matrices are row-major arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemJson {
    pub alpha: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn to_mat<T: Scalar>(name: &str, rows: &[Vec<f64>]) -> Result<RMat<T>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Parse(format!("\"{name}\" has rows of unequal length")));
    }
    if let Some(v) = rows.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("\"{name}\" contains the non-finite value {v}")));
    }
    Ok(RMat::from_fn(n, m, |i, j| T::lit(rows[i][j])))
}

fn from_mat<T: Scalar>(m: &RMat<T>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].as_f64()).collect()).collect()
}

impl SystemJson {
    pub fn to_system<T: Scalar>(&self) -> Result<LagrangianSystem<T>> {
        if !self.beta.is_finite() {
            return Err(Error::Parse(format!("\"beta\" is not finite: {}", self.beta)));
        }
        LagrangianSystem::new(
            to_mat("alpha", &self.alpha)?,
            to_mat("theta", &self.theta)?,
            to_mat("eta", &self.eta)?,
            to_mat("R", &self.r)?,
            T::lit(self.beta),
        )
    }

    pub fn from_system<T: Scalar>(sys: &LagrangianSystem<T>, label: Option<String>) -> Self {
        Self {
            alpha: from_mat(&sys.alpha),
            theta: from_mat(&sys.theta),
            eta: from_mat(&sys.eta),
            r: from_mat(&sys.r_mat),
            beta: sys.beta.as_f64(),
            label,
        }
    }
}

pub fn parse_system<T: Scalar>(text: &str) -> Result<(LagrangianSystem<T>, Option<String>)> {
    let raw: SystemJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let sys = raw.to_system()?;
    Ok((sys, raw.label))
}

pub fn system_to_json<T: Scalar>(sys: &LagrangianSystem<T>, label: Option<String>) -> String {
    serde_json::to_string_pretty(&SystemJson::from_system(sys, label)).expect("plain data serializes")
}

/// Report with a `schema_version` field alongside the body's own fields.
#[derive(Debug, Clone, Serialize)]
pub struct Versioned<B: Serialize> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: B,
}

impl<B: Serialize> Versioned<B> {
    pub fn new(body: B) -> Self {
        Self { schema_version: SCHEMA_VERSION, body }
    }
}

/// `t, re_q{k}, im_q{k}, re_qdot{k}, im_qdot{k}, T, V, H, dissipated_power, re_G, im_G`, with `k` from 1.
pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for k in 1..=n {
        h.push(format!("re_q{k}"));
        h.push(format!("im_q{k}"));
    }
    for k in 1..=n {
        h.push(format!("re_qdot{k}"));
        h.push(format!("im_qdot{k}"));
    }
    h.extend(["T", "V", "H", "dissipated_power", "re_G", "im_G"].map(String::from));
    h
}

/// Writes the trajectory; `footer` lines are emitted as `# ` comments.
pub fn write_trajectory_csv<T: Scalar, W: Write>(w: &mut W, traj: &Trajectory<T>, footer: &[String]) -> std::io::Result<()> {
    let n = traj.states.first().map_or(0, |s| s.q.len());
    writeln!(w, "{}", trajectory_header(n).join(","))?;
    for k in 0..traj.len() {
        let s = &traj.states[k];
        let e = &traj.energies[k];
        let mut row = vec![traj.times[k].as_f64()];
        for z in s.q.iter() {
            row.extend([z.re.as_f64(), z.im.as_f64()]);
        }
        for z in s.qdot.iter() {
            row.extend([z.re.as_f64(), z.im.as_f64()]);
        }
        row.extend([e.kinetic, e.potential, e.total, e.dissipated_power].map(|v| v.as_f64()));
        row.extend([traj.virial[k].re.as_f64(), traj.virial[k].im.as_f64()]);
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    for line in footer {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}
