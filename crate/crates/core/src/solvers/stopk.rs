//! List-merging baseline: every agent floods a bounded candidate list until
//! the network is quiescent.
//!
//! Each round an agent sends its list of (global index, score) pairs to all
//! neighbors, merges what it received with what it had, keeps the best `L`
//! by a deterministic order, and repeats; the run terminates on the first
//! round in which no list changed. For k at most half the dataset the lists
//! hold the top-k; otherwise the complementary bottom-(N-k) lists are
//! maintained instead, which caps the list length at N/2. The cost ledger
//! counts transmitted scores only, not the accompanying indices.

use crate::scoremodel::LocalDataset;
use crate::topology::Graph;

use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopKMode {
    /// Lists hold the k largest scores.
    Top,
    /// Lists hold the N-k smallest scores; holders are declared by absence.
    BottomComplement,
}

#[derive(Debug, Clone)]
pub struct StopKResult {
    pub mode: StopKMode,
    /// Per-agent final list of (global score index, score), sorted by the
    /// maintained order (descending scores for Top, ascending for the
    /// complement), ties broken by index.
    pub lists: Vec<Vec<(usize, f64)>>,
    /// Exchange rounds performed, including the final quiescent round.
    pub rounds: u64,
    /// Rounds until the list contents stabilized (rounds - 1).
    pub rounds_to_stable: u64,
    pub scalars_transmitted: u64,
    /// Global index range [start, start+len) of each agent's own scores.
    pub own_ranges: Vec<(usize, usize)>,
}

impl StopKResult {
    /// Score values of an agent's final list, in maintained order.
    pub fn list_values(&self, agent: usize) -> Vec<f64> {
        self.lists[agent].iter().map(|&(_, s)| s).collect()
    }

    /// Whether agent `agent` should declare its local score `j` a top-k
    /// element: membership of the list in Top mode, absence from it in
    /// complement mode.
    pub fn is_declared_topk(&self, agent: usize, j: usize) -> bool {
        let idx = self.own_ranges[agent].0 + j;
        let present = self.lists[agent].iter().any(|&(i, _)| i == idx);
        match self.mode {
            StopKMode::Top => present,
            StopKMode::BottomComplement => !present,
        }
    }
}

fn merged_order(mode: StopKMode, a: &(usize, f64), b: &(usize, f64)) -> std::cmp::Ordering {
    let by_score = match mode {
        StopKMode::Top => b.1.partial_cmp(&a.1).unwrap(),
        StopKMode::BottomComplement => a.1.partial_cmp(&b.1).unwrap(),
    };
    by_score.then(a.0.cmp(&b.0))
}

/// Runs the list-merging scheme until quiescence.
pub fn stopk_run(
    graph: &Graph,
    datasets: &[LocalDataset],
    k: usize,
) -> Result<StopKResult, SolverError> {
    let n = graph.node_count();
    if datasets.len() != n {
        return Err(SolverError::DimensionMismatch {
            state: n,
            agents: datasets.len(),
        });
    }
    let total: usize = datasets.iter().map(|d| d.scores().len()).sum();
    if k < 1 || k > total {
        return Err(SolverError::InvalidInput(format!(
            "k = {k} out of range [1, {total}]"
        )));
    }

    // k = N gives an empty complement list, which declares every score
    let (mode, cap) = if 2 * k <= total {
        (StopKMode::Top, k)
    } else {
        (StopKMode::BottomComplement, total - k)
    };

    let mut own_ranges = Vec::with_capacity(n);
    let mut offset = 0;
    let mut lists: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for d in datasets {
        own_ranges.push((offset, d.scores().len()));
        let mut l: Vec<(usize, f64)> = d
            .scores()
            .iter()
            .enumerate()
            .map(|(j, &s)| (offset + j, s))
            .collect();
        l.sort_by(|a, b| merged_order(mode, a, b));
        l.truncate(cap);
        lists.push(l);
        offset += d.scores().len();
    }

    let mut rounds = 0u64;
    let mut scalars = 0u64;
    // quiescence is guaranteed within diameter+1 rounds; the cap only guards
    // against internal errors
    let round_cap = (n as u64) + 2;
    loop {
        rounds += 1;
        if rounds > round_cap {
            return Err(SolverError::InvalidInput(
                "list merging failed to reach quiescence".into(),
            ));
        }
        for i in 0..n {
            scalars += (lists[i].len() * graph.neighbors(i)?.len()) as u64;
        }
        let mut next: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut changed = false;
        for i in 0..n {
            let mut pool = lists[i].clone();
            for &j in graph.neighbors(i)? {
                pool.extend_from_slice(&lists[j]);
            }
            pool.sort_by(|a, b| merged_order(mode, a, b));
            // copies of the same element sort adjacent (ties break by index),
            // so consecutive dedup removes exactly the shared duplicates
            pool.dedup_by_key(|e| e.0);
            pool.truncate(cap);
            if pool != lists[i] {
                changed = true;
            }
            next.push(pool);
        }
        lists = next;
        if !changed {
            break;
        }
    }

    Ok(StopKResult {
        mode,
        lists,
        rounds,
        rounds_to_stable: rounds - 1,
        scalars_transmitted: scalars,
        own_ranges,
    })
}
