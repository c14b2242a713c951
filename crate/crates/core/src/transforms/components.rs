use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, GridDomain};

/// Pixel adjacency used for components and boundaries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub(crate) fn offsets(self) -> &'static [(isize, isize)] {
        const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }

    /// Neighbours already visited in a raster scan.
    fn causal_offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1)],
            Connectivity::Eight => &[(-1, -1), (-1, 0), (-1, 1), (0, -1)],
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::param(format!(
                "connectivity must be 4 or 8, got {other}"
            ))),
        }
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("connectivity must be 4 or 8, got {s:?}")))?;
        Connectivity::try_from(n)
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Connectivity::Four => f.write_str("4"),
            Connectivity::Eight => f.write_str("8"),
        }
    }
}

/// Component labels: 0 is background, components are numbered `1..=count`
/// in the row-major order of their first pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentLabeling {
    domain: GridDomain,
    labels: Vec<u32>,
    count: usize,
}

impl ComponentLabeling {
    pub fn domain(&self) -> GridDomain {
        self.domain
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Pixel count of each component, indexed by `label - 1`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        sizes
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Two-pass union-find labeling.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabeling {
    let domain = mask.domain();
    let w = domain.width();
    let mut provisional = vec![u32::MAX; domain.len()];
    let mut sets = DisjointSet::new();

    for i in mask.foreground_indices() {
        let (r, c) = domain.coords(i);
        let mut label = u32::MAX;
        for &(dr, dc) in connectivity.causal_offsets() {
            if let Some(j) = domain.checked_index(r as isize + dr, c as isize + dc) {
                let l = provisional[j];
                if l != u32::MAX {
                    if label == u32::MAX {
                        label = l;
                    } else {
                        sets.union(label, l);
                    }
                }
            }
        }
        provisional[i] = if label == u32::MAX {
            sets.make()
        } else {
            label
        };
    }

    let mut compact = vec![0u32; sets.parent.len()];
    let mut count = 0u32;
    let mut labels = vec![0u32; domain.len()];
    for i in 0..domain.len() {
        let p = provisional[i];
        if p == u32::MAX {
            continue;
        }
        let root = sets.find(p) as usize;
        if compact[root] == 0 {
            count += 1;
            compact[root] = count;
        }
        labels[i] = compact[root];
    }
    debug_assert_eq!(labels.len(), w * domain.height());
    ComponentLabeling {
        domain,
        labels,
        count: count as usize,
    }
}
