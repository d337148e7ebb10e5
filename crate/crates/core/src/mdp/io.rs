//! JSON interchange format for tabular MDPs.

use super::TabularMdp;
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// On-disk schema: dense row-major nesting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpJson {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub rho0: Vec<f64>,
    pub costs: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<Vec<f64>>>,
}

impl From<&TabularMdp> for MdpJson {
    fn from(mdp: &TabularMdp) -> Self {
        let s_n = mdp.num_states();
        let a_n = mdp.num_actions();
        let dense = mdp.dense_transitions();
        let costs = (0..s_n)
            .map(|s| (0..a_n).map(|a| mdp.cost(s, a)).collect())
            .collect();
        let transitions = (0..s_n)
            .map(|s| {
                (0..a_n)
                    .map(|a| dense[(s * a_n + a) * s_n..(s * a_n + a + 1) * s_n].to_vec())
                    .collect()
            })
            .collect();
        MdpJson {
            num_states: s_n,
            num_actions: a_n,
            gamma: mdp.gamma(),
            rho0: mdp.rho0().to_vec(),
            costs,
            transitions,
        }
    }
}

impl MdpJson {
    pub fn into_mdp(self) -> Result<TabularMdp> {
        let s_n = self.num_states;
        let a_n = self.num_actions;
        let mut dense = Vec::with_capacity(s_n * a_n * s_n);
        for srow in &self.transitions {
            for arow in srow {
                dense.extend_from_slice(arow);
            }
        }
        let costs = self.costs.into_iter().flatten().collect();
        TabularMdp::from_dense(s_n, a_n, &dense, costs, self.rho0, self.gamma)
    }
}

impl TabularMdp {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(&MdpJson::from(self))?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: MdpJson = serde_json::from_str(s)?;
        doc.into_mdp()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}
