//! Problem file format.
//!
//! ```json
//! {"L": 2, "q": [..],
//!  "agents": [{"K": 3, "P": 1, "E": [row-major L*K], "C": [row-major P*K], "d": [..],
//!              "cost": {"type": "l1", "lambda": 1.0}, "set": {"type": "full"}}]}
//! ```
//!
//! Floats are written with 17 significant digits.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{AgentData, CostFn, CoupledProblem, SimpleSet};
use crate::error::{Error, Result};
use crate::fmt::{unwrap, wrap, Sig17};

#[derive(Serialize, Deserialize)]
struct ProblemRepr {
    #[serde(rename = "L")]
    l: usize,
    q: Vec<Sig17>,
    agents: Vec<AgentRepr>,
}

#[derive(Serialize, Deserialize)]
struct AgentRepr {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "P")]
    p: usize,
    #[serde(rename = "E")]
    e: Vec<Sig17>,
    #[serde(rename = "C")]
    c: Vec<Sig17>,
    d: Vec<Sig17>,
    cost: CostRepr,
    set: SetRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type")]
enum CostRepr {
    #[serde(rename = "l1")]
    L1 { lambda: Sig17 },
    #[serde(rename = "sq_l2")]
    SquaredL2,
    #[serde(rename = "l2")]
    L2Norm,
    #[serde(rename = "zero")]
    Zero,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type")]
enum SetRepr {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "nonneg")]
    Nonneg,
    #[serde(rename = "box")]
    Box { lo: Vec<Sig17>, hi: Vec<Sig17> },
}

fn matrix(rows: usize, cols: usize, data: &[Sig17], name: &str) -> Result<Array2<f64>> {
    Array2::from_shape_vec((rows, cols), unwrap(data)).map_err(|_| {
        Error::Dimension(format!("{name}: expected {rows}x{cols} = {} entries, got {}", rows * cols, data.len()))
    })
}

impl TryFrom<ProblemRepr> for CoupledProblem {
    type Error = Error;

    fn try_from(repr: ProblemRepr) -> Result<Self> {
        if repr.q.len() != repr.l {
            return Err(Error::Dimension(format!("q has length {}, L = {}", repr.q.len(), repr.l)));
        }
        let agents = repr
            .agents
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                let e = matrix(repr.l, a.k, &a.e, &format!("agent {i} E"))?;
                let c = matrix(a.p, a.k, &a.c, &format!("agent {i} C"))?;
                let cost = match a.cost {
                    CostRepr::L1 { lambda } => CostFn::L1 { lambda: lambda.0 },
                    CostRepr::SquaredL2 => CostFn::SquaredL2,
                    CostRepr::L2Norm => CostFn::L2Norm,
                    CostRepr::Zero => CostFn::Zero,
                };
                let set = match a.set {
                    SetRepr::Full => SimpleSet::FullSpace,
                    SetRepr::Nonneg => SimpleSet::NonnegativeOrthant,
                    SetRepr::Box { lo, hi } => SimpleSet::Box { lo: unwrap(&lo), hi: unwrap(&hi) },
                };
                Ok(AgentData { e, c, d: Array1::from(unwrap(&a.d)), cost, set })
            })
            .collect::<Result<Vec<_>>>()?;
        CoupledProblem::new(Array1::from(unwrap(&repr.q)), agents)
    }
}

impl From<&CoupledProblem> for ProblemRepr {
    fn from(p: &CoupledProblem) -> Self {
        ProblemRepr {
            l: p.l(),
            q: wrap(p.q.iter().copied()),
            agents: p
                .agents
                .iter()
                .map(|a| AgentRepr {
                    k: a.k(),
                    p: a.p(),
                    e: wrap(a.e.iter().copied()),
                    c: wrap(a.c.iter().copied()),
                    d: wrap(a.d.iter().copied()),
                    cost: match a.cost {
                        CostFn::L1 { lambda } => CostRepr::L1 { lambda: Sig17(lambda) },
                        CostFn::SquaredL2 => CostRepr::SquaredL2,
                        CostFn::L2Norm => CostRepr::L2Norm,
                        CostFn::Zero => CostRepr::Zero,
                    },
                    set: match &a.set {
                        SimpleSet::FullSpace => SetRepr::Full,
                        SimpleSet::NonnegativeOrthant => SetRepr::Nonneg,
                        SimpleSet::Box { lo, hi } => {
                            SetRepr::Box { lo: wrap(lo.iter().copied()), hi: wrap(hi.iter().copied()) }
                        }
                    },
                })
                .collect(),
        }
    }
}

impl CoupledProblem {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ProblemRepr::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ProblemRepr>(s)?.try_into()
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        serde_json::from_reader::<_, ProblemRepr>(r)?.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_json(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_json(&mut w)?;
        w.flush()?;
        Ok(())
    }
}
