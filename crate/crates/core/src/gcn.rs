//! Structural entity embeddings: a graph-convolutional encoder over both KGs
//! with shared weights, trained on pseudo-labeled seed pairs with a
//! margin-based ranking loss, plus the structural distance matrix and the
//! final fusion step.
//!
//! Training is deterministic given the config seed: negative sampling comes
//! from a seeded ChaCha stream and parameter updates happen on one thread.
//! Matrix products parallelize only over output rows with a fixed reduction
//! order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AlignError, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::linalg::{CsrMatrix, Matrix};
use crate::matrix::{DistanceMatrix, EmbeddingMatrix};
use crate::scalar::Scalar;

/// Encoder and optimizer settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnConfig {
    /// Graph-convolution layers (>= 1).
    pub layers: usize,
    /// Width of the trainable per-entity input features and hidden layers.
    pub hidden_dim: usize,
    /// Output embedding width.
    pub output_dim: usize,
    /// Corrupted pairs sampled per seed pair, each epoch.
    pub negatives_per_positive: usize,
    /// Ranking-loss margin.
    pub margin: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            layers: 2,
            hidden_dim: 128,
            output_dim: 128,
            negatives_per_positive: 5,
            margin: 3.0,
            epochs: 100,
            learning_rate: 0.005,
            seed: 42,
        }
    }
}

impl GcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(AlignError::InvalidConfig("layers must be >= 1".into()));
        }
        if self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(AlignError::InvalidConfig("dims must be positive".into()));
        }
        if self.negatives_per_positive == 0 {
            return Err(AlignError::InvalidConfig(
                "negatives_per_positive must be positive".into(),
            ));
        }
        if !(self.margin > 0.0) {
            return Err(AlignError::InvalidConfig("margin must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(AlignError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        (0..self.layers)
            .map(|l| {
                let d_in = self.hidden_dim;
                let d_out = if l + 1 == self.layers {
                    self.output_dim
                } else {
                    self.hidden_dim
                };
                (d_in, d_out)
            })
            .collect()
    }
}

/// Symmetrically normalized adjacency with self-loops:
/// `Â = D^{-1/2} (A ∪ I) D^{-1/2}` over the undirected entity co-occurrence
/// graph, where `D` holds the row degrees of `A ∪ I`.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency<S> {
    csr: CsrMatrix<S>,
}

impl<S: Scalar> NormalizedAdjacency<S> {
    pub fn n(&self) -> usize {
        self.csr.n()
    }

    pub fn nnz(&self) -> usize {
        self.csr.nnz()
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.csr.get(r, c)
    }

    pub fn propagate(&self, x: &Matrix<S>) -> Matrix<S> {
        self.csr.spmm(x)
    }
}

/// Build the normalized propagation operator for one KG: one undirected edge
/// per (head, tail) pair regardless of relation, self-loops added, symmetric
/// normalization.
pub fn build_adjacency<S: Scalar>(kg: &KnowledgeGraph) -> NormalizedAdjacency<S> {
    let n = kg.len();
    let mut neighbors: Vec<std::collections::BTreeSet<u32>> = vec![Default::default(); n];
    for t in kg.triples() {
        if t.head != t.tail {
            neighbors[t.head.idx()].insert(t.tail.0);
            neighbors[t.tail.idx()].insert(t.head.0);
        }
    }
    for (i, nbr) in neighbors.iter_mut().enumerate() {
        nbr.insert(i as u32);
    }
    let degrees: Vec<usize> = neighbors.iter().map(|nbr| nbr.len()).collect();
    let rows: Vec<Vec<(u32, S)>> = neighbors
        .iter()
        .enumerate()
        .map(|(i, nbr)| {
            nbr.iter()
                .map(|&j| {
                    let v = S::one()
                        / (S::from_f64_lossy(degrees[i] as f64)
                            * S::from_f64_lossy(degrees[j as usize] as f64))
                        .sqrt();
                    (j, v)
                })
                .collect()
        })
        .collect();
    NormalizedAdjacency {
        csr: CsrMatrix::from_rows(rows),
    }
}

/// Trainable parameters: free input features per entity (per KG) and the
/// shared layer weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams<S> {
    pub x1: Matrix<S>,
    pub x2: Matrix<S>,
    pub weights: Vec<Matrix<S>>,
}

impl<S: Scalar> GcnParams<S> {
    fn zeros_like(&self) -> GcnParams<S> {
        GcnParams {
            x1: Matrix::zeros(self.x1.rows(), self.x1.cols()),
            x2: Matrix::zeros(self.x2.rows(), self.x2.cols()),
            weights: self
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
        }
    }

    fn parts(&self) -> Vec<&Matrix<S>> {
        let mut v = vec![&self.x1, &self.x2];
        v.extend(self.weights.iter());
        v
    }

    fn parts_mut(&mut self) -> Vec<&mut Matrix<S>> {
        let mut v = vec![&mut self.x1, &mut self.x2];
        v.extend(self.weights.iter_mut());
        v
    }

    /// Total parameter count, for flat indexing in verification harnesses.
    pub fn flat_len(&self) -> usize {
        self.parts().iter().map(|m| m.data().len()).sum()
    }

    pub fn get_flat(&self, mut i: usize) -> S {
        for m in self.parts() {
            if i < m.data().len() {
                return m.data()[i];
            }
            i -= m.data().len();
        }
        panic!("flat index out of range");
    }

    pub fn add_flat(&mut self, mut i: usize, delta: S) {
        for m in self.parts_mut() {
            if i < m.data().len() {
                m.data_mut()[i] += delta;
                return;
            }
            i -= m.data().len();
        }
        panic!("flat index out of range");
    }
}

/// One corrupted pair for the ranking loss; `pos` indexes the seed list.
#[derive(Debug, Clone, Copy)]
pub struct NegativePair {
    pub pos: usize,
    pub src: EntityId,
    pub tgt: EntityId,
}

struct KgForward<S> {
    /// Layer inputs `A_0..A_L` (`A_L` is the output embedding).
    acts: Vec<Matrix<S>>,
    /// Propagated inputs `S_l = Â A_l`, one per layer.
    props: Vec<Matrix<S>>,
}

/// GCN trainer over a pair of KGs.
pub struct GcnTrainer<S: Scalar> {
    cfg: GcnConfig,
    adj1: NormalizedAdjacency<S>,
    adj2: NormalizedAdjacency<S>,
    params: GcnParams<S>,
    rng: ChaCha8Rng,
    n1: usize,
    n2: usize,
}

impl<S: Scalar> GcnTrainer<S> {
    pub fn new(g1: &KnowledgeGraph, g2: &KnowledgeGraph, cfg: GcnConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let glorot = |rng: &mut ChaCha8Rng, rows: usize, cols: usize| {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| S::from_f64_lossy(rng.random_range(-bound..bound)))
                .collect();
            Matrix::from_vec(rows, cols, data)
        };
        let x1 = glorot(&mut rng, g1.len(), cfg.hidden_dim);
        let x2 = glorot(&mut rng, g2.len(), cfg.hidden_dim);
        let weights = cfg
            .layer_dims()
            .into_iter()
            .map(|(d_in, d_out)| glorot(&mut rng, d_in, d_out))
            .collect();
        Ok(GcnTrainer {
            adj1: build_adjacency(g1),
            adj2: build_adjacency(g2),
            params: GcnParams { x1, x2, weights },
            rng,
            n1: g1.len(),
            n2: g2.len(),
            cfg,
        })
    }

    pub fn config(&self) -> &GcnConfig {
        &self.cfg
    }

    pub fn params(&self) -> &GcnParams<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut GcnParams<S> {
        &mut self.params
    }

    fn forward_kg(&self, adj: &NormalizedAdjacency<S>, x: &Matrix<S>) -> KgForward<S> {
        let layers = self.cfg.layers;
        let mut acts = Vec::with_capacity(layers + 1);
        let mut props = Vec::with_capacity(layers);
        acts.push(x.clone());
        for (l, w) in self.params.weights.iter().enumerate() {
            let prop = adj.propagate(acts.last().expect("non-empty"));
            let mut z = prop.matmul(w);
            if l + 1 < layers {
                z.map_inplace(|v| v.max(S::zero()));
            }
            props.push(prop);
            acts.push(z);
        }
        KgForward { acts, props }
    }

    fn forward(&self) -> (KgForward<S>, KgForward<S>) {
        (
            self.forward_kg(&self.adj1, &self.params.x1),
            self.forward_kg(&self.adj2, &self.params.x2),
        )
    }

    /// Sample `negatives_per_positive` corrupted pairs per seed, uniformly
    /// replacing either side. Advances the trainer's RNG.
    pub fn sample_negatives(&mut self, seeds: &[(EntityId, EntityId)]) -> Vec<NegativePair> {
        let mut out = Vec::with_capacity(seeds.len() * self.cfg.negatives_per_positive);
        for (pos, &(u, v)) in seeds.iter().enumerate() {
            for _ in 0..self.cfg.negatives_per_positive {
                let corrupt_source = self.rng.random_bool(0.5);
                let pair = if corrupt_source {
                    NegativePair {
                        pos,
                        src: EntityId(self.rng.random_range(0..self.n1 as u32)),
                        tgt: v,
                    }
                } else {
                    NegativePair {
                        pos,
                        src: u,
                        tgt: EntityId(self.rng.random_range(0..self.n2 as u32)),
                    }
                };
                out.push(pair);
            }
        }
        out
    }

    fn l1_distance(a: &[S], b: &[S]) -> S {
        a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum()
    }

    /// Mean hinge ranking loss over the sampled terms:
    /// `mean over negatives of max(0, d(u,v) + margin - d(u',v'))` with
    /// L1 distances between output embeddings.
    pub fn loss(&self, seeds: &[(EntityId, EntityId)], negatives: &[NegativePair]) -> S {
        let (f1, f2) = self.forward();
        self.loss_from_outputs(&f1, &f2, seeds, negatives).0
    }

    fn loss_from_outputs(
        &self,
        f1: &KgForward<S>,
        f2: &KgForward<S>,
        seeds: &[(EntityId, EntityId)],
        negatives: &[NegativePair],
    ) -> (S, Matrix<S>, Matrix<S>) {
        let z1 = f1.acts.last().expect("forward ran");
        let z2 = f2.acts.last().expect("forward ran");
        let mut g1 = Matrix::zeros(z1.rows(), z1.cols());
        let mut g2 = Matrix::zeros(z2.rows(), z2.cols());
        if negatives.is_empty() {
            return (S::zero(), g1, g2);
        }
        let margin = S::from_f64_lossy(self.cfg.margin);
        let scale = S::one() / S::from_f64_lossy(negatives.len() as f64);
        let mut total = S::zero();
        for neg in negatives {
            let (u, v) = seeds[neg.pos];
            let d_pos = Self::l1_distance(z1.row(u.idx()), z2.row(v.idx()));
            let d_neg = Self::l1_distance(z1.row(neg.src.idx()), z2.row(neg.tgt.idx()));
            let t = d_pos + margin - d_neg;
            if t <= S::zero() {
                continue;
            }
            total += t;
            for i in 0..z1.cols() {
                let sp = sign(z1.get(u.idx(), i) - z2.get(v.idx(), i));
                g1.row_mut(u.idx())[i] += scale * sp;
                g2.row_mut(v.idx())[i] -= scale * sp;
                let sn = sign(z1.get(neg.src.idx(), i) - z2.get(neg.tgt.idx(), i));
                g1.row_mut(neg.src.idx())[i] -= scale * sn;
                g2.row_mut(neg.tgt.idx())[i] += scale * sn;
            }
        }
        (total * scale, g1, g2)
    }

    /// Loss and gradients with respect to every parameter, for the given
    /// fixed negative sample.
    pub fn loss_and_grads(
        &self,
        seeds: &[(EntityId, EntityId)],
        negatives: &[NegativePair],
    ) -> (S, GcnParams<S>) {
        let (f1, f2) = self.forward();
        let (loss, g1, g2) = self.loss_from_outputs(&f1, &f2, seeds, negatives);
        let mut grads = self.params.zeros_like();
        let gx1 = self.backward_kg(&self.adj1, &f1, g1, &mut grads.weights);
        let gx2 = self.backward_kg(&self.adj2, &f2, g2, &mut grads.weights);
        grads.x1 = gx1;
        grads.x2 = gx2;
        (loss, grads)
    }

    /// Backpropagate `g = dL/d(output)` through the layers of one KG,
    /// accumulating weight gradients; returns dL/dX for that KG.
    fn backward_kg(
        &self,
        adj: &NormalizedAdjacency<S>,
        fwd: &KgForward<S>,
        mut g: Matrix<S>,
        weight_grads: &mut [Matrix<S>],
    ) -> Matrix<S> {
        for l in (0..self.cfg.layers).rev() {
            if l + 1 < self.cfg.layers {
                // activation mask: layer output acts[l+1] went through relu
                let act = &fwd.acts[l + 1];
                for (gv, &av) in g.data_mut().iter_mut().zip(act.data()) {
                    if av <= S::zero() {
                        *gv = S::zero();
                    }
                }
            }
            weight_grads[l].axpy(S::one(), &fwd.props[l].transpose_matmul(&g));
            let g_prop = g.matmul_transpose(&self.params.weights[l]);
            // Â is symmetric, so dL/dA_l = Â (dL/dS_l)
            g = adj.propagate(&g_prop);
        }
        g
    }

    /// One SGD step: `params -= lr * grads`.
    pub fn apply_gradients(&mut self, grads: &GcnParams<S>, lr: S) {
        self.params.x1.axpy(-lr, &grads.x1);
        self.params.x2.axpy(-lr, &grads.x2);
        for (w, g) in self.params.weights.iter_mut().zip(&grads.weights) {
            w.axpy(-lr, g);
        }
    }

    /// One training epoch: resample negatives, one SGD step. Returns the
    /// loss at the sampled batch before the update.
    pub fn train_epoch(&mut self, seeds: &[(EntityId, EntityId)]) -> S {
        let negatives = self.sample_negatives(seeds);
        let (loss, grads) = self.loss_and_grads(seeds, &negatives);
        self.apply_gradients(&grads, S::from_f64_lossy(self.cfg.learning_rate));
        loss
    }

    /// Run `cfg.epochs` epochs; errors on an empty seed set.
    pub fn train(&mut self, seeds: &[(EntityId, EntityId)]) -> Result<Vec<S>> {
        if seeds.is_empty() {
            return Err(AlignError::EmptySeeds);
        }
        for &(u, v) in seeds {
            if u.idx() >= self.n1 || v.idx() >= self.n2 {
                return Err(AlignError::OutsideSplit {
                    id: if u.idx() >= self.n1 { u.0 } else { v.0 },
                    role: "seed pair",
                });
            }
        }
        Ok((0..self.cfg.epochs).map(|_| self.train_epoch(seeds)).collect())
    }

    /// Current output embeddings for all entities of both KGs, stacked
    /// `[KG1; KG2]` and L2-normalized per row.
    pub fn embeddings(&self) -> EmbeddingMatrix<S> {
        let (f1, f2) = self.forward();
        let z1 = f1.acts.last().expect("forward ran");
        let z2 = f2.acts.last().expect("forward ran");
        let d = z1.cols();
        let mut out = Matrix::zeros(self.n1 + self.n2, d);
        for i in 0..self.n1 {
            out.row_mut(i).copy_from_slice(z1.row(i));
        }
        for i in 0..self.n2 {
            out.row_mut(self.n1 + i).copy_from_slice(z2.row(i));
        }
        out.normalize_rows();
        EmbeddingMatrix::from_matrix(out)
    }
}

fn sign<S: Scalar>(v: S) -> S {
    if v > S::zero() {
        S::one()
    } else if v < S::zero() {
        -S::one()
    } else {
        S::zero()
    }
}

/// Train structural embeddings from scratch on the given seed pairs.
///
/// Returns stacked `[KG1; KG2]` embeddings, one unit-norm row per entity,
/// deterministic for a fixed config.
pub fn train_embeddings<S: Scalar>(
    g1: &KnowledgeGraph,
    g2: &KnowledgeGraph,
    seeds: &[(EntityId, EntityId)],
    cfg: &GcnConfig,
) -> Result<EmbeddingMatrix<S>> {
    let mut trainer = GcnTrainer::new(g1, g2, cfg.clone())?;
    trainer.train(seeds)?;
    Ok(trainer.embeddings())
}

/// Structural distances over selected entities: rows follow `sources`,
/// columns follow `targets`, target rows live at offset `n1` in `emb`.
pub fn structural_distance_between<S: Scalar>(
    emb: &EmbeddingMatrix<S>,
    n1: usize,
    sources: &[EntityId],
    targets: &[EntityId],
) -> Result<DistanceMatrix<S>> {
    for s in sources {
        if s.idx() >= n1 {
            return Err(AlignError::RowCountMismatch {
                rows: s.idx(),
                expected: n1,
            });
        }
    }
    for t in targets {
        if n1 + t.idx() >= emb.len() {
            return Err(AlignError::RowCountMismatch {
                rows: n1 + t.idx(),
                expected: emb.len(),
            });
        }
    }
    let src = emb.select_rows(sources);
    let shifted: Vec<EntityId> = targets.iter().map(|t| EntityId::from(n1 + t.idx())).collect();
    let tgt = emb.select_rows(&shifted);
    crate::side::semantic_distance(&src, &tgt)
}

/// Full structural distance matrix `1 - cos(emb_u, emb_{n1+v})`.
pub fn structural_distance<S: Scalar>(
    emb: &EmbeddingMatrix<S>,
    n1: usize,
    n2: usize,
) -> Result<DistanceMatrix<S>> {
    if emb.len() != n1 + n2 {
        return Err(AlignError::RowCountMismatch {
            rows: emb.len(),
            expected: n1 + n2,
        });
    }
    let sources: Vec<EntityId> = (0..n1).map(EntityId::from).collect();
    let targets: Vec<EntityId> = (0..n2).map(EntityId::from).collect();
    structural_distance_between(emb, n1, &sources, &targets)
}

/// Final fusion `beta * textual + (1 - beta) * structural`.
pub fn fuse_all<S: Scalar>(
    mt: &DistanceMatrix<S>,
    ms: &DistanceMatrix<S>,
    beta: S,
) -> Result<DistanceMatrix<S>> {
    mt.convex_combine(ms, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Triple;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kg(n: usize, edges: &[(u32, u32)]) -> KnowledgeGraph {
        let names = (0..n).map(|i| format!("e{i}")).collect();
        let triples = edges
            .iter()
            .map(|&(h, t)| Triple {
                head: EntityId(h),
                relation: 0,
                tail: EntityId(t),
            })
            .collect();
        KnowledgeGraph::from_parts(names, triples).unwrap()
    }

    #[test]
    fn adjacency_single_edge() {
        let adj: NormalizedAdjacency<f64> = build_adjacency(&kg(2, &[(0, 1)]));
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert_relative_eq!(adj.get(r, c), 0.5, epsilon = 1e-12);
        }
        assert_eq!(adj.nnz(), 4);
    }

    #[test]
    fn adjacency_isolated_entity_has_unit_self_loop() {
        let adj: NormalizedAdjacency<f64> = build_adjacency(&kg(3, &[(0, 1)]));
        assert_relative_eq!(adj.get(2, 2), 1.0, epsilon = 1e-12);
        assert_eq!(adj.get(2, 0), 0.0);
        assert_eq!(adj.get(2, 1), 0.0);
    }

    #[test]
    fn adjacency_triangle_normalization() {
        // every node has degree 3 after the self-loop, so every entry of
        // D^{-1/2} (A ∪ I) D^{-1/2} is 1/3
        let adj: NormalizedAdjacency<f64> = build_adjacency(&kg(3, &[(0, 1), (1, 2), (2, 0)]));
        for r in 0..3 {
            for c in 0..3 {
                assert_relative_eq!(adj.get(r, c), 1.0 / 3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn adjacency_is_symmetric_and_relation_blind() {
        let g = kg(4, &[(0, 1), (1, 0), (1, 2), (2, 3)]);
        let adj: NormalizedAdjacency<f64> = build_adjacency(&g);
        for r in 0..4 {
            for c in 0..4 {
                assert_relative_eq!(adj.get(r, c), adj.get(c, r), epsilon = 1e-12);
            }
        }
        // (0,1) and (1,0) collapse to one undirected edge
        assert_relative_eq!(adj.get(0, 0), 0.5, epsilon = 1e-12);
    }

    fn toy_cfg() -> GcnConfig {
        GcnConfig {
            layers: 2,
            hidden_dim: 8,
            output_dim: 6,
            negatives_per_positive: 3,
            margin: 1.0,
            epochs: 60,
            learning_rate: 0.05,
            seed: 7,
        }
    }

    fn toy_graphs() -> (KnowledgeGraph, KnowledgeGraph) {
        (
            kg(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]),
            kg(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]),
        )
    }

    fn seeds(pairs: &[(u32, u32)]) -> Vec<(EntityId, EntityId)> {
        pairs.iter().map(|&(s, t)| (EntityId(s), EntityId(t))).collect()
    }

    #[test]
    fn training_is_deterministic() {
        let (g1, g2) = toy_graphs();
        let s = seeds(&[(0, 0), (1, 1)]);
        let a: EmbeddingMatrix<f64> = train_embeddings(&g1, &g2, &s, &toy_cfg()).unwrap();
        let b: EmbeddingMatrix<f64> = train_embeddings(&g1, &g2, &s, &toy_cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_epochs_returns_untrained_forward() {
        let (g1, g2) = toy_graphs();
        let s = seeds(&[(0, 0)]);
        let cfg = GcnConfig {
            epochs: 0,
            ..toy_cfg()
        };
        let trained: EmbeddingMatrix<f64> = train_embeddings(&g1, &g2, &s, &cfg).unwrap();
        let fresh = GcnTrainer::<f64>::new(&g1, &g2, cfg).unwrap();
        assert_eq!(trained, fresh.embeddings());
    }

    #[test]
    fn rows_are_unit_norm() {
        let (g1, g2) = toy_graphs();
        let s = seeds(&[(0, 0), (1, 1)]);
        let emb: EmbeddingMatrix<f64> = train_embeddings(&g1, &g2, &s, &toy_cfg()).unwrap();
        for i in 0..emb.len() {
            let norm: f64 = emb.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_relative_eq!(norm, 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn empty_seed_set_is_an_error() {
        let (g1, g2) = toy_graphs();
        let err = train_embeddings::<f64>(&g1, &g2, &[], &toy_cfg()).unwrap_err();
        assert!(matches!(err, AlignError::EmptySeeds));
    }

    #[test]
    fn isomorphic_toy_aligns_remaining_entities() {
        let (g1, g2) = toy_graphs();
        let s = seeds(&[(0, 0), (1, 1)]);
        let cfg = GcnConfig {
            epochs: 200,
            ..toy_cfg()
        };
        let emb: EmbeddingMatrix<f64> = train_embeddings(&g1, &g2, &s, &cfg).unwrap();
        let m = structural_distance(&emb, 4, 4).unwrap();
        let r = crate::matcher::tbnns(
            &m,
            &crate::matcher::EntityMask::from_ids(4, [EntityId(2), EntityId(3)]),
            &crate::matcher::EntityMask::from_ids(4, [EntityId(2), EntityId(3)]),
            2.0,
        );
        assert!(r.matches.contains_pair(EntityId(2), EntityId(2)));
        assert!(r.matches.contains_pair(EntityId(3), EntityId(3)));
    }

    #[test]
    fn gradient_step_on_fixed_batch_does_not_increase_loss() {
        let (g1, g2) = toy_graphs();
        let s = seeds(&[(0, 0), (1, 1)]);
        let mut trainer = GcnTrainer::<f64>::new(&g1, &g2, toy_cfg()).unwrap();
        for _ in 0..30 {
            let negs = trainer.sample_negatives(&s);
            let (before, grads) = trainer.loss_and_grads(&s, &negs);
            trainer.apply_gradients(&grads, 0.05);
            let after = trainer.loss(&s, &negs);
            assert!(
                after <= before + 1e-3,
                "loss increased on its own batch: {before} -> {after}"
            );
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let (g1, g2) = toy_graphs();
        let s = seeds(&[(0, 0), (2, 2)]);
        let cfg = GcnConfig {
            layers: 2,
            hidden_dim: 4,
            output_dim: 3,
            negatives_per_positive: 2,
            margin: 1.0,
            epochs: 0,
            learning_rate: 0.01,
            seed: 3,
        };
        let mut trainer = GcnTrainer::<f64>::new(&g1, &g2, cfg).unwrap();
        let negs = trainer.sample_negatives(&s);
        let (_, grads) = trainer.loss_and_grads(&s, &negs);
        let eps = 1e-6;
        for i in 0..trainer.params().flat_len() {
            trainer.params_mut().add_flat(i, eps);
            let up = trainer.loss(&s, &negs);
            trainer.params_mut().add_flat(i, -2.0 * eps);
            let down = trainer.loss(&s, &negs);
            trainer.params_mut().add_flat(i, eps);
            let fd = (up - down) / (2.0 * eps);
            let an = grads.get_flat(i);
            let denom = fd.abs().max(an.abs()).max(1e-8);
            assert!(
                ((fd - an) / denom).abs() < 1e-4,
                "param {i}: fd={fd} analytic={an}"
            );
        }
    }

    #[test]
    fn structural_distance_reference_and_oracle() {
        let emb = EmbeddingMatrix::from_vec(
            4,
            2,
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, -1.0, 0.0],
        );
        let m = structural_distance(&emb, 2, 2).unwrap();
        assert_relative_eq!(m.get(0, 0), 0.0, epsilon = 1e-12); // identical rows
        assert_relative_eq!(m.get(0, 1), 2.0, epsilon = 1e-12); // antipodal

        // random instance vs an independently coded dot/norm computation
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..6 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let emb = EmbeddingMatrix::from_vec(6, 3, data);
        let m = structural_distance(&emb, 3, 3).unwrap();
        for u in 0..3 {
            for v in 0..3 {
                let a = emb.row(u);
                let b = emb.row(3 + v);
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                let expect = 1.0 - dot / (na * nb);
                assert_relative_eq!(m.get(u, v), expect, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn structural_distance_row_count_mismatch() {
        let emb = EmbeddingMatrix::<f64>::zeros(3, 2);
        assert!(matches!(
            structural_distance(&emb, 2, 2),
            Err(AlignError::RowCountMismatch { .. })
        ));
    }

    #[test]
    fn cosine_distance_invariant_under_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let d = 4;
            let data: Vec<f64> = (0..8 * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let emb = EmbeddingMatrix::from_vec(8, d, data.clone());
            let q = random_orthogonal(&mut rng, d);
            let mut rotated = vec![0.0; 8 * d];
            for r in 0..8 {
                for j in 0..d {
                    rotated[r * d + j] = (0..d).map(|k| data[r * d + k] * q[k][j]).sum();
                }
            }
            let emb_rot = EmbeddingMatrix::from_vec(8, d, rotated);
            let m = structural_distance(&emb, 4, 4).unwrap();
            let m_rot = structural_distance(&emb_rot, 4, 4).unwrap();
            for u in 0..4 {
                for v in 0..4 {
                    assert_relative_eq!(m.get(u, v), m_rot.get(u, v), epsilon = 1e-9);
                }
            }
        }
    }

    // Gram-Schmidt on a random square matrix.
    fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
        loop {
            let mut rows: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let mut ok = true;
            for i in 0..d {
                for j in 0..i {
                    let proj: f64 = (0..d).map(|k| rows[i][k] * rows[j][k]).sum();
                    for k in 0..d {
                        let v = rows[j][k];
                        rows[i][k] -= proj * v;
                    }
                }
                let norm: f64 = rows[i].iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < 1e-6 {
                    ok = false;
                    break;
                }
                rows[i].iter_mut().for_each(|v| *v /= norm);
            }
            if ok {
                return rows;
            }
        }
    }

    #[test]
    fn fuse_all_boundaries() {
        let mt = DistanceMatrix::from_vec(1, 1, vec![0.1_f64]);
        let ms = DistanceMatrix::from_vec(1, 1, vec![0.3]);
        assert_eq!(fuse_all(&mt, &ms, 1.0).unwrap(), mt);
        let half = fuse_all(&mt, &ms, 0.5).unwrap();
        assert_relative_eq!(half.get(0, 0), 0.2, epsilon = 1e-12);
    }
}
