//! Social graphs in compressed adjacency (CSR) form.
//!
//! The per-agent trust weights and cached neighbor perceptions are stored in
//! vectors aligned with the adjacency slices returned here, so the neighbor
//! order fixed at construction is part of the simulator's deterministic state.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::config::ConfigError;
use crate::params::Topology;

/// Undirected social graph. Adjacency is stored per direction: if j appears in
/// `neighbors(i)` then i appears in `neighbors(j)`. No self-loops.
#[derive(Debug, Clone)]
pub struct SocialNetwork {
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
}

impl SocialNetwork {
    /// Builds the requested topology. `rng` is consumed only by `Random`.
    pub fn build(topology: Topology, n: usize, rng: &mut ChaCha12Rng) -> Result<Self, ConfigError> {
        match topology {
            Topology::Lattice4 => Self::lattice4(n),
            Topology::Random => Self::random(n, 4.0, rng),
            Topology::Complete => Self::complete(n),
        }
    }

    /// Periodic square lattice, neighbors ordered north, south, west, east.
    /// Cell (r, c) has index r*side + c.
    pub fn lattice4(n: usize) -> Result<Self, ConfigError> {
        Topology::Lattice4.check(n)?;
        let side = (n as f64).sqrt().round() as usize;
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::with_capacity(4 * n);
        offsets.push(0);
        for r in 0..side {
            for c in 0..side {
                let north = ((r + side - 1) % side) * side + c;
                let south = ((r + 1) % side) * side + c;
                let west = r * side + (c + side - 1) % side;
                let east = r * side + (c + 1) % side;
                neighbors.extend_from_slice(&[north as u32, south as u32, west as u32, east as u32]);
                offsets.push(neighbors.len() as u32);
            }
        }
        Ok(SocialNetwork { offsets, neighbors })
    }

    /// Symmetric random graph: each unordered pair is linked with
    /// probability mean_degree/(n-1). Degrees vary; isolated agents are legal.
    pub fn random(n: usize, mean_degree: f64, rng: &mut ChaCha12Rng) -> Result<Self, ConfigError> {
        Topology::Random.check(n)?;
        let p = (mean_degree / (n - 1) as f64).min(1.0);
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < p {
                    adj[i].push(j as u32);
                    adj[j].push(i as u32);
                }
            }
        }
        Ok(Self::from_lists(&adj))
    }

    /// Every distinct pair connected.
    pub fn complete(n: usize) -> Result<Self, ConfigError> {
        Topology::Complete.check(n)?;
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    adj[i].push(j as u32);
                }
            }
        }
        Ok(Self::from_lists(&adj))
    }

    fn from_lists(adj: &[Vec<u32>]) -> Self {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        let mut neighbors = Vec::with_capacity(adj.iter().map(Vec::len).sum());
        offsets.push(0);
        for list in adj {
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len() as u32);
        }
        SocialNetwork { offsets, neighbors }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Start of agent i's slice in flat edge-aligned buffers.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i] as usize
    }

    pub fn degree(&self, i: usize) -> usize {
        (self.offsets[i + 1] - self.offsets[i]) as usize
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    /// Total number of directed adjacency entries (the denominator of the
    /// network-wide mean trust).
    pub fn edge_slots(&self) -> usize {
        self.neighbors.len()
    }
}
