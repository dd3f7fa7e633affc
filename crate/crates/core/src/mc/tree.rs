//! Explicit realisations of the coloured tree.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::laws::ModelSpec;
use crate::rng::RandomStream;
use crate::spectral::RootColour;

use super::reaches;

/// Complete `d`-ary tree of fixed depth in breadth-first layout: the
/// children of vertex `u` are `d u + 1 ..= d u + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredTree {
    d: usize,
    depth: usize,
    colours: Vec<u32>,
    edge_logs: Vec<f64>,
    log_values: Vec<f64>,
}

/// Number of vertices of the depth-`depth` tree, `None` on overflow.
pub fn tree_size(d: usize, depth: usize) -> Option<u64> {
    let mut total: u64 = 0;
    let mut level: u64 = 1;
    for n in 0..=depth {
        total = total.checked_add(level)?;
        if n < depth {
            level = level.checked_mul(d as u64)?;
        }
    }
    Some(total)
}

pub(crate) fn root_colour(root: RootColour, d: usize, rng: &mut RandomStream) -> Result<usize> {
    match root {
        RootColour::Fixed(c) if c < d => Ok(c),
        RootColour::Fixed(c) => Err(Error::InvalidArgument(alloc::format!(
            "root colour {c} out of range for d = {d}"
        ))),
        RootColour::Uniform => Ok(rng.index(d)),
    }
}

/// Grows the tree level by level. Each vertex draws one uniform permutation
/// of the colours for its children and one label per child edge.
pub fn grow_colored_tree(
    model: &ModelSpec,
    depth: usize,
    root: RootColour,
    rng: &mut RandomStream,
    budget: u64,
) -> Result<ColoredTree> {
    let d = model.d();
    let size = tree_size(d, depth).unwrap_or(u64::MAX);
    if size > budget {
        return Err(Error::MemoryBudgetExceeded {
            requested: size,
            budget,
        });
    }
    let size = size as usize;
    let mut colours = vec![0u32; size];
    let mut edge_logs = vec![0.0; size];
    let mut log_values = vec![0.0; size];
    colours[0] = root_colour(root, d, rng)? as u32;
    let internal = size - d.pow(depth as u32);
    let mut perm = vec![0usize; d];
    for u in 0..internal {
        let parent = colours[u] as usize;
        rng.permutation(&mut perm);
        for (k, &c) in perm.iter().enumerate() {
            let child = d * u + 1 + k;
            let l = model.law(parent, c).sample_log(rng);
            colours[child] = c as u32;
            edge_logs[child] = l;
            log_values[child] = log_values[u] + l;
        }
    }
    Ok(ColoredTree {
        d,
        depth,
        colours,
        edge_logs,
        log_values,
    })
}

impl ColoredTree {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.colours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colours.is_empty()
    }

    pub fn colour(&self, u: usize) -> usize {
        self.colours[u] as usize
    }

    /// `log xi` on the edge into `u` (zero at the root).
    pub fn edge_log(&self, u: usize) -> f64 {
        self.edge_logs[u]
    }

    /// `log zeta[u]`, the sum of edge logs from the root.
    pub fn log_value(&self, u: usize) -> f64 {
        self.log_values[u]
    }

    pub fn children(&self, u: usize) -> Range<usize> {
        let first = self.d * u + 1;
        if first >= self.len() {
            self.len()..self.len()
        } else {
            first..first + self.d
        }
    }

    pub fn level(&self, n: usize) -> Range<usize> {
        let start = (self.d.pow(n as u32) - 1) / (self.d - 1);
        start..start + self.d.pow(n as u32)
    }

    /// Vertices with `zeta[u] >= exp(-t)`.
    pub fn count_reaching(&self, t: f64) -> u64 {
        self.log_values.iter().filter(|l| reaches(**l, t)).count() as u64
    }

    pub fn level_count_reaching(&self, n: usize, t: f64) -> u64 {
        self.log_values[self.level(n)]
            .iter()
            .filter(|l| reaches(**l, t))
            .count() as u64
    }
}
