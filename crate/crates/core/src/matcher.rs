//! Thresholded bi-directional nearest-neighbor search (TBNNS) and the
//! NIL-threshold baseline.
//!
//! A source/target pair is matched iff each is the other's nearest neighbor
//! among the active entities and their distance is strictly below the
//! threshold. Everything else stays unmatched and is predicted unmatchable.

use rayon::prelude::*;

use crate::kg::{AlignmentSet, EntityId, Insert};
use crate::matrix::DistanceMatrix;
use crate::scalar::Scalar;

/// Active-entity mask over one side of a distance matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMask {
    active: Vec<bool>,
    count: usize,
}

impl EntityMask {
    pub fn all(n: usize) -> Self {
        EntityMask {
            active: vec![true; n],
            count: n,
        }
    }

    pub fn none(n: usize) -> Self {
        EntityMask {
            active: vec![false; n],
            count: 0,
        }
    }

    pub fn from_ids(n: usize, ids: impl IntoIterator<Item = EntityId>) -> Self {
        let mut mask = EntityMask::none(n);
        for id in ids {
            mask.add(id);
        }
        mask
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn active_count(&self) -> usize {
        self.count
    }

    pub fn contains(&self, id: EntityId) -> bool {
        self.active[id.idx()]
    }

    pub fn add(&mut self, id: EntityId) {
        if !self.active[id.idx()] {
            self.active[id.idx()] = true;
            self.count += 1;
        }
    }

    pub fn remove(&mut self, id: EntityId) {
        if self.active[id.idx()] {
            self.active[id.idx()] = false;
            self.count -= 1;
        }
    }

    /// Active ids in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.active
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| EntityId::from(i))
    }
}

/// Alignment decisions for one matching pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// 1-to-1 matches (mutual nearest neighbors under the threshold).
    pub matches: AlignmentSet,
    /// Active sources left unmatched, ascending.
    pub unmatched_sources: Vec<EntityId>,
    /// Active targets left unmatched, ascending.
    pub unmatched_targets: Vec<EntityId>,
}

/// Index of the smallest value; ties break to the lowest index.
pub fn tie_break<S: Scalar>(row: &[S]) -> usize {
    assert!(!row.is_empty(), "tie_break needs a non-empty slice");
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v < row[best] {
            best = i;
        }
    }
    best
}

/// Argmin of a masked row: smallest active column, ties to the lowest index.
fn masked_argmin<S: Scalar>(
    values: impl Iterator<Item = S>,
    mask: &EntityMask,
) -> Option<usize> {
    let mut best: Option<(usize, S)> = None;
    for (i, v) in values.enumerate() {
        if !mask.active[i] {
            continue;
        }
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Thresholded bi-directional nearest-neighbor search.
///
/// `(u, v)` is matched iff `v` is the nearest active target of `u`, `u` is
/// the nearest active source of `v`, and `m[u][v] < theta`. Inactive rows and
/// columns never participate. Empty active sets yield empty matches.
pub fn tbnns<S: Scalar>(
    m: &DistanceMatrix<S>,
    active_src: &EntityMask,
    active_tgt: &EntityMask,
    theta: S,
) -> MatchResult {
    assert_eq!(active_src.len(), m.rows(), "source mask must cover rows");
    assert_eq!(active_tgt.len(), m.cols(), "target mask must cover columns");

    let row_best: Vec<Option<usize>> = (0..m.rows())
        .into_par_iter()
        .map(|u| {
            if !active_src.active[u] {
                return None;
            }
            masked_argmin(m.row(u).iter().copied(), active_tgt)
        })
        .collect();
    let col_best: Vec<Option<usize>> = (0..m.cols())
        .into_par_iter()
        .map(|v| {
            if !active_tgt.active[v] {
                return None;
            }
            masked_argmin((0..m.rows()).map(|u| m.get(u, v)), active_src)
        })
        .collect();

    let mut matches = AlignmentSet::new();
    for u in 0..m.rows() {
        let Some(v) = row_best[u] else { continue };
        if col_best[v] == Some(u) && m.get(u, v) < theta {
            let inserted = matches.insert(EntityId::from(u), EntityId::from(v));
            debug_assert_eq!(inserted, Insert::Added, "mutual NN is 1-to-1");
        }
    }

    let unmatched_sources = active_src
        .iter()
        .filter(|&u| !matches.contains_source(u))
        .collect();
    let unmatched_targets = active_tgt
        .iter()
        .filter(|&v| !matches.contains_target(v))
        .collect();
    MatchResult {
        matches,
        unmatched_sources,
        unmatched_targets,
    }
}

/// NIL-threshold baseline output. Targets may repeat: the baseline has no
/// mutuality or 1-to-1 constraint, so it cannot be an [`AlignmentSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NilBaselineResult {
    /// One pair per matched source, ascending source id.
    pub pairs: Vec<(EntityId, EntityId)>,
    /// Sources whose nearest-neighbor distance was not below the threshold.
    pub unmatched_sources: Vec<EntityId>,
}

/// NIL-threshold baseline: each active source is matched to its nearest
/// active target iff that distance is below `nil_theta`.
pub fn nil_threshold_baseline<S: Scalar>(
    m: &DistanceMatrix<S>,
    active_src: &EntityMask,
    active_tgt: &EntityMask,
    nil_theta: S,
) -> NilBaselineResult {
    assert_eq!(active_src.len(), m.rows(), "source mask must cover rows");
    assert_eq!(active_tgt.len(), m.cols(), "target mask must cover columns");
    let mut pairs = Vec::new();
    let mut unmatched_sources = Vec::new();
    for u in active_src.iter() {
        match masked_argmin(m.row(u.idx()).iter().copied(), active_tgt) {
            Some(v) if m.get(u.idx(), v) < nil_theta => pairs.push((u, EntityId::from(v))),
            _ => unmatched_sources.push(u),
        }
    }
    NilBaselineResult {
        pairs,
        unmatched_sources,
    }
}
