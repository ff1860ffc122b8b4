//! JSON documents exchanged between subcommands, CSV and DOT writers.

use std::fmt::Write as _;
use std::io::{self, Write};

use netpart_core::dmpc::{RunMetrics, Scenario};
use netpart_core::fsu::{Fsu, FsuCollection};
use netpart_core::graph::{
    EquivalentGraph, Guard, LinearSystem, PwaMode, PwaSystem, SystemModel, Vertex,
};
use netpart_core::linalg::Matrix;
use netpart_core::metrics::{Components, Partition};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Dense rows, or a shape with `(row, col, value)` triplets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixDoc {
    Dense(Vec<Vec<f64>>),
    Triplets {
        rows: usize,
        cols: usize,
        entries: Vec<(usize, usize, f64)>,
    },
}

impl MatrixDoc {
    pub fn from_matrix(m: &Matrix) -> Self {
        MatrixDoc::Dense(m.to_rows())
    }

    /// Dense rows cannot express a matrix with zero columns, so `cols` is
    /// used when there are no rows to read it from.
    pub fn to_matrix(&self, name: &str, cols: usize) -> Result<Matrix, CliError> {
        match self {
            MatrixDoc::Dense(rows) if rows.is_empty() => Ok(Matrix::zeros(0, cols)),
            MatrixDoc::Dense(rows) => Matrix::from_rows(rows)
                .ok_or_else(|| CliError::Format(format!("{name}: rows have different lengths"))),
            MatrixDoc::Triplets {
                rows,
                cols,
                entries,
            } => {
                let mut m = Matrix::zeros(*rows, *cols);
                for &(r, c, v) in entries {
                    if r >= *rows || c >= *cols {
                        return Err(CliError::Format(format!(
                            "{name}: entry ({r}, {c}) outside {rows}x{cols}"
                        )));
                    }
                    m[(r, c)] += v;
                }
                Ok(m)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuardDoc {
    pub hx: MatrixDoc,
    pub hu: MatrixDoc,
    pub h: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeDoc {
    pub a: MatrixDoc,
    pub b: MatrixDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<GuardDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelDoc {
    Linear { a: MatrixDoc, b: MatrixDoc },
    Pwa { modes: Vec<ModeDoc> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    #[serde(flatten)]
    pub model: ModelDoc,
    /// Planted state clusters, when the generator embedded some.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<Vec<Vec<usize>>>,
}

fn linear_parts(a: &MatrixDoc, b: &MatrixDoc, tag: &str) -> Result<(Matrix, Matrix), CliError> {
    let a = a.to_matrix(&format!("{tag}a"), 0)?;
    let b = b.to_matrix(&format!("{tag}b"), 0)?;
    Ok((a, b))
}

impl SystemDoc {
    pub fn from_model(model: &SystemModel) -> Result<Self, CliError> {
        let model = match model {
            SystemModel::Linear(sys) => ModelDoc::Linear {
                a: MatrixDoc::from_matrix(sys.a()),
                b: MatrixDoc::from_matrix(sys.b()),
            },
            SystemModel::Pwa(sys) => ModelDoc::Pwa {
                modes: sys
                    .modes()
                    .iter()
                    .map(|m| ModeDoc {
                        a: MatrixDoc::from_matrix(&m.a),
                        b: MatrixDoc::from_matrix(&m.b),
                        g: Some(m.g.clone()),
                        guard: Some(GuardDoc {
                            hx: MatrixDoc::from_matrix(&m.guard.hx),
                            hu: MatrixDoc::from_matrix(&m.guard.hu),
                            h: m.guard.h.clone(),
                        }),
                    })
                    .collect(),
            },
            SystemModel::Differentiable(_) => {
                return Err(CliError::Format(
                    "differentiable models have no file representation".into(),
                ))
            }
        };
        Ok(SystemDoc {
            model,
            clusters: None,
        })
    }

    pub fn linear(sys: &LinearSystem) -> Self {
        SystemDoc {
            model: ModelDoc::Linear {
                a: MatrixDoc::from_matrix(sys.a()),
                b: MatrixDoc::from_matrix(sys.b()),
            },
            clusters: None,
        }
    }

    pub fn to_model(&self) -> Result<SystemModel, CliError> {
        match &self.model {
            ModelDoc::Linear { a, b } => {
                let (a, b) = linear_parts(a, b, "")?;
                Ok(SystemModel::Linear(LinearSystem::new(a, b)?))
            }
            ModelDoc::Pwa { modes } => {
                let mut out = Vec::with_capacity(modes.len());
                for (q, m) in modes.iter().enumerate() {
                    let (a, b) = linear_parts(&m.a, &m.b, &format!("modes[{q}]."))?;
                    let (n, p) = (a.rows(), b.cols());
                    let guard = match &m.guard {
                        None => Guard::everywhere(n, p),
                        Some(gd) => Guard {
                            hx: gd.hx.to_matrix(&format!("modes[{q}].guard.hx"), n)?,
                            hu: gd.hu.to_matrix(&format!("modes[{q}].guard.hu"), p)?,
                            h: gd.h.clone(),
                        },
                    };
                    out.push(PwaMode {
                        g: m.g.clone().unwrap_or_else(|| vec![0.0; n]),
                        a,
                        b,
                        guard,
                    });
                }
                Ok(SystemModel::Pwa(PwaSystem::new(out)?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FsuEntry {
    pub inputs: Vec<usize>,
    pub states: Vec<usize>,
    #[serde(default)]
    pub root_states: Vec<usize>,
}

/// FSU collection with the system it was selected from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FsuDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemDoc>,
    /// PWA mode the graph was built for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    pub n_inputs: usize,
    pub n_states: usize,
    pub fsus: Vec<FsuEntry>,
    pub condensed: Vec<Vec<f64>>,
}

impl FsuDoc {
    pub fn new(coll: &FsuCollection, system: Option<SystemDoc>, mode: Option<usize>) -> Self {
        FsuDoc {
            system,
            mode,
            n_inputs: coll.n_inputs(),
            n_states: coll.n_states(),
            fsus: coll
                .fsus()
                .iter()
                .map(|f| FsuEntry {
                    inputs: f.inputs.clone(),
                    states: f.states.clone(),
                    root_states: f.root_states.clone(),
                })
                .collect(),
            condensed: coll.condensed().to_rows(),
        }
    }

    pub fn collection(&self) -> Result<FsuCollection, CliError> {
        let n = self.fsus.len();
        let condensed = if n == 0 {
            Matrix::zeros(0, 0)
        } else {
            Matrix::from_rows(&self.condensed)
                .ok_or_else(|| CliError::Format("condensed: rows have different lengths".into()))?
        };
        let fsus = self
            .fsus
            .iter()
            .enumerate()
            .map(|(id, e)| Fsu {
                id,
                inputs: e.inputs.clone(),
                states: e.states.clone(),
                root_states: e.root_states.clone(),
            })
            .collect();
        Ok(FsuCollection::from_parts(
            self.n_inputs,
            self.n_states,
            fsus,
            condensed,
        )?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentsDoc {
    pub intra: f64,
    pub inter: f64,
    pub size: f64,
}

impl From<Components> for ComponentsDoc {
    fn from(c: Components) -> Self {
        ComponentsDoc {
            intra: c.intra,
            inter: c.inter,
            size: c.size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncumbentDoc {
    pub nodes: u64,
    pub time: f64,
    pub value: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveDoc {
    pub kind: String,
    pub fsu: usize,
    pub block: usize,
    pub gain: f64,
    pub value: f64,
}

/// A partition with the data needed to evaluate and simulate it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<FsuDoc>,
    #[serde(default)]
    pub engine: String,
    pub alpha: f64,
    pub blocks: Vec<Vec<usize>>,
    #[serde(default)]
    pub labels: Vec<usize>,
    #[serde(default)]
    pub ratio: f64,
    #[serde(default)]
    pub quadratic: f64,
    #[serde(default)]
    pub components: ComponentsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimal: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub incumbents: Vec<IncumbentDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub moves: Vec<MoveDoc>,
}

impl PartitionDoc {
    /// The stored blocks. `labels` is informational and may be omitted.
    pub fn partition(&self) -> Result<Partition, CliError> {
        let n = self.blocks.iter().map(Vec::len).sum();
        Ok(Partition::new(n, self.blocks.clone())?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub n_inputs: usize,
    pub n_states: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    pub edges: Vec<EdgeDoc>,
    pub state_labels: Vec<f64>,
    pub total_mass: f64,
}

impl GraphDoc {
    pub fn new(g: &EquivalentGraph, mode: Option<usize>) -> Self {
        GraphDoc {
            n_inputs: g.n_inputs(),
            n_states: g.n_states(),
            mode,
            edges: g
                .edges()
                .iter()
                .map(|e| EdgeDoc {
                    source: e.source.to_string(),
                    target: e.target.to_string(),
                    weight: e.weight,
                })
                .collect(),
            state_labels: g.state_labels().to_vec(),
            total_mass: g.total_mass(),
        }
    }
}

/// Scenario file; every field is optional and defaults to [`Scenario::default`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub horizon: Option<usize>,
    pub steps: Option<usize>,
    pub amplitude: Option<f64>,
    pub omega: Option<f64>,
    pub u_lo: Option<f64>,
    pub u_hi: Option<f64>,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    pub q_weight: Option<f64>,
    pub r_weight: Option<f64>,
    pub rho: Option<f64>,
    pub eps: Option<f64>,
    pub max_admm_iter: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub qp_tol: Option<f64>,
    pub qp_max_iter: Option<usize>,
    pub soft_penalty: Option<f64>,
}

impl ScenarioDoc {
    pub fn scenario(&self) -> Scenario {
        let d = Scenario::default();
        Scenario {
            horizon: self.horizon.unwrap_or(d.horizon),
            steps: self.steps.unwrap_or(d.steps),
            amplitude: self.amplitude.unwrap_or(d.amplitude),
            omega: self.omega.unwrap_or(d.omega),
            u_lo: self.u_lo.unwrap_or(d.u_lo),
            u_hi: self.u_hi.unwrap_or(d.u_hi),
            x_lo: self.x_lo.unwrap_or(d.x_lo),
            x_hi: self.x_hi.unwrap_or(d.x_hi),
            q_weight: self.q_weight.unwrap_or(d.q_weight),
            r_weight: self.r_weight.unwrap_or(d.r_weight),
            rho: self.rho.unwrap_or(d.rho),
            eps: self.eps.unwrap_or(d.eps),
            max_admm_iter: self.max_admm_iter.unwrap_or(d.max_admm_iter),
            x0: self.x0.clone().or(d.x0),
            qp_tol: self.qp_tol.unwrap_or(d.qp_tol),
            qp_max_iter: self.qp_max_iter.unwrap_or(d.qp_max_iter),
            soft_penalty: self.soft_penalty.unwrap_or(d.soft_penalty),
        }
    }
}

pub const METRICS_HEADER: &str =
    "step,stage_cost,cum_cost,admm_iters,max_core_time,core_seconds_cum";

pub fn write_metrics_csv<W: Write>(mut w: W, m: &RunMetrics) -> io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for r in &m.records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.step, r.stage_cost, r.cum_cost, r.admm_iters, r.max_core_time, r.core_seconds_cum
        )?;
    }
    Ok(())
}

/// One row per ADMM iteration: step, iteration, slowest core time, residuals.
pub fn write_residual_csv<W: Write>(mut w: W, m: &RunMetrics) -> io::Result<()> {
    writeln!(w, "step,iteration,slowest_core_time,primal,dual")?;
    for r in &m.records {
        for (i, t) in r.iteration_times.iter().enumerate() {
            let p = r.primal.get(i).copied().unwrap_or(0.0);
            let d = r.dual.get(i).copied().unwrap_or(0.0);
            writeln!(w, "{},{},{},{},{}", r.step, i + 1, t, p, d)?;
        }
    }
    Ok(())
}

/// Closed-loop state and input trajectories, one row per step.
pub fn write_trajectory_csv<W: Write>(mut w: W, m: &RunMetrics, sc: &Scenario) -> io::Result<()> {
    let n = m.states.first().map_or(0, Vec::len);
    let p = m.inputs.first().map_or(0, Vec::len);
    let mut head = String::from("step,reference");
    for i in 0..n {
        let _ = write!(head, ",x{}", i + 1);
    }
    for i in 0..p {
        let _ = write!(head, ",u{}", i + 1);
    }
    writeln!(w, "{head}")?;
    for (k, x) in m.states.iter().enumerate() {
        let mut row = format!("{k},{}", sc.reference(k));
        for v in x {
            let _ = write!(row, ",{v}");
        }
        match m.inputs.get(k) {
            Some(u) => u.iter().for_each(|v| {
                let _ = write!(row, ",{v}");
            }),
            None => (0..p).for_each(|_| row.push(',')),
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

fn dot_id(v: Vertex) -> String {
    v.to_string()
}

/// Graphviz rendering of an equivalent graph. Vertices are grouped into one
/// cluster per entry of `groups` when given.
pub fn to_dot(g: &EquivalentGraph, groups: Option<(&str, Vec<Vec<Vertex>>)>) -> String {
    let mut s = String::from("digraph equivalent {\n  rankdir=LR;\n  node [fontsize=10];\n");
    let mut placed = vec![false; g.vertex_count()];
    let slot = |v: Vertex| match v {
        Vertex::Input(i) => i,
        Vertex::State(j) => g.n_inputs() + j,
    };
    if let Some((prefix, groups)) = &groups {
        for (k, members) in groups.iter().enumerate() {
            let _ = writeln!(
                s,
                "  subgraph cluster_{k} {{\n    label=\"{prefix}{}\";",
                k + 1
            );
            for &v in members {
                placed[slot(v)] = true;
                let _ = writeln!(s, "    {}{};", dot_id(v), node_style(v));
            }
            s.push_str("  }\n");
        }
    }
    for v in g.vertices() {
        if !placed[slot(v)] {
            let _ = writeln!(s, "  {}{};", dot_id(v), node_style(v));
        }
    }
    for e in g.edges() {
        let _ = writeln!(
            s,
            "  {} -> {} [label=\"{}\"];",
            dot_id(e.source),
            dot_id(e.target),
            fmt_weight(e.weight)
        );
    }
    s.push_str("}\n");
    s
}

fn node_style(v: Vertex) -> &'static str {
    if v.is_input() {
        " [shape=box]"
    } else {
        " [shape=ellipse]"
    }
}

fn fmt_weight(w: f64) -> String {
    let s = format!("{w:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.into()
    }
}
