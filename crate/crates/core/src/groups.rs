//! Group structures over predictor indices.
//!
//! A [`GroupStructure`] is either a partition of `0..p` (the usual grouped
//! LASSO setting) or a cover with overlapping groups, which the latent
//! overlapping-group penalty handles through covariate duplication.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{GwglError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStructure {
    pub p: usize,
    pub groups: Vec<Vec<usize>>,
    #[serde(default)]
    pub overlapping: bool,
}

impl GroupStructure {
    /// Builds a structure and checks it against its own dimension.
    pub fn new(p: usize, groups: Vec<Vec<usize>>, overlapping: bool) -> Result<Self> {
        let s = GroupStructure { p, groups, overlapping };
        s.validate(p)?;
        Ok(s)
    }

    /// Contiguous non-overlapping groups with the given sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut groups = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &s in sizes {
            groups.push((start..start + s).collect());
            start += s;
        }
        Self::new(start, groups, false)
    }

    /// Every predictor in its own group.
    pub fn singletons(p: usize) -> Self {
        GroupStructure {
            p,
            groups: (0..p).map(|i| vec![i]).collect(),
            overlapping: false,
        }
    }

    /// Non-overlapping structure from a label per predictor. Groups are
    /// ordered by their smallest member, so equal partitions compare equal.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut order: Vec<usize> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, &lab) in labels.iter().enumerate() {
            match order.iter().position(|&l| l == lab) {
                Some(g) => groups[g].push(i),
                None => {
                    order.push(lab);
                    groups.push(vec![i]);
                }
            }
        }
        Self::new(labels.len(), groups, false)
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    pub fn max_size(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Default GLASSO weights √p_l.
    pub fn sqrt_sizes(&self) -> Vec<f64> {
        self.groups.iter().map(|g| (g.len() as f64).sqrt()).collect()
    }

    /// Group index of every predictor. Only meaningful for partitions.
    pub fn membership(&self) -> Vec<usize> {
        let mut m = vec![usize::MAX; self.p];
        for (l, g) in self.groups.iter().enumerate() {
            for &i in g {
                m[i] = l;
            }
        }
        m
    }

    /// Checks the invariants against dimension `p`, reporting the first violation.
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.p != p {
            return Err(GwglError::InvalidGroups(format!(
                "structure declares p={} but data has p={}",
                self.p, p
            )));
        }
        let mut seen = vec![0usize; p];
        for (l, g) in self.groups.iter().enumerate() {
            if g.is_empty() {
                return Err(GwglError::InvalidGroups(format!("group {l} is empty")));
            }
            let mut local = g.clone();
            local.sort_unstable();
            if local.windows(2).any(|w| w[0] == w[1]) {
                return Err(GwglError::InvalidGroups(format!("group {l} lists an index twice")));
            }
            for &i in g {
                if i >= p {
                    return Err(GwglError::InvalidGroups(format!(
                        "index {i} in group {l} is out of range for p={p}"
                    )));
                }
                seen[i] += 1;
                if !self.overlapping && seen[i] > 1 {
                    return Err(GwglError::InvalidGroups(format!(
                        "index {i} appears in more than one group of a non-overlapping structure"
                    )));
                }
            }
        }
        if let Some(i) = seen.iter().position(|&c| c == 0) {
            return Err(GwglError::InvalidGroups(format!("index {i} uncovered")));
        }
        Ok(())
    }

    pub fn require_partition(&self) -> Result<()> {
        if self.overlapping {
            return Err(GwglError::InvalidGroups(
                "overlapping structure where a partition is required (use the latent overlap routines)".into(),
            ));
        }
        Ok(())
    }

    /// Same partition up to group order and index order within groups.
    pub fn same_partition(&self, other: &GroupStructure) -> bool {
        let canon = |s: &GroupStructure| {
            let mut gs: Vec<Vec<usize>> = s
                .groups
                .iter()
                .map(|g| {
                    let mut g = g.clone();
                    g.sort_unstable();
                    g
                })
                .collect();
            gs.sort();
            gs
        };
        self.p == other.p && canon(self) == canon(other)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("group structure serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: GroupStructure =
            serde_json::from_str(text).map_err(|e| GwglError::Parse(format!("groups JSON: {e}")))?;
        s.validate(s.p)?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GwglError::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }
}

/// Covariate-duplication view of an overlapping cover: every membership of
/// predictor `j` in group `l` becomes its own column, so the cover turns into
/// a partition of the expanded index space.
#[derive(Debug, Clone)]
pub struct Duplication {
    /// Original predictor index of each expanded column.
    pub source: Vec<usize>,
    /// Partition of the expanded columns, one block per original group.
    pub expanded: GroupStructure,
    /// Number of groups containing each original predictor.
    pub multiplicity: Vec<usize>,
}

impl Duplication {
    pub fn new(structure: &GroupStructure) -> Self {
        let mut source = Vec::new();
        let mut groups = Vec::with_capacity(structure.groups.len());
        let mut multiplicity = vec![0usize; structure.p];
        for g in &structure.groups {
            let mut block = Vec::with_capacity(g.len());
            for &j in g {
                block.push(source.len());
                source.push(j);
                multiplicity[j] += 1;
            }
            groups.push(block);
        }
        let expanded = GroupStructure {
            p: source.len(),
            groups,
            overlapping: false,
        };
        Duplication {
            source,
            expanded,
            multiplicity,
        }
    }

    pub fn expanded_dim(&self) -> usize {
        self.source.len()
    }

    /// Sums expanded coordinates back onto the original predictors.
    pub fn collapse(&self, u: &[f64]) -> Vec<f64> {
        let mut beta = vec![0.0; self.multiplicity.len()];
        for (k, &j) in self.source.iter().enumerate() {
            beta[j] += u[k];
        }
        beta
    }

    /// Adjoint of [`Duplication::collapse`]: copies each predictor value to all its memberships.
    pub fn spread(&self, v: &[f64]) -> Vec<f64> {
        self.source.iter().map(|&j| v[j]).collect()
    }

    /// Splits an expanded vector into per-group latent vectors in the original space.
    pub fn latent_vectors(&self, u: &[f64]) -> Vec<Vec<f64>> {
        self.expanded
            .groups
            .iter()
            .map(|block| {
                let mut v = vec![0.0; self.multiplicity.len()];
                for &k in block {
                    v[self.source[k]] = u[k];
                }
                v
            })
            .collect()
    }
}
