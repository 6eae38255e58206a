//! Name-based alignment features: the semantic distance matrix, the string
//! distance matrix, and their convex fusion into the textual distance matrix.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{AlignError, Result};
use crate::kg::{EntityId, KnowledgeGraph};
use crate::matrix::{DistanceMatrix, EmbeddingMatrix};
use crate::scalar::Scalar;

/// Token -> vector mapping with a fixed dimensionality.
#[derive(Debug, Clone)]
pub struct WordVectorTable<S> {
    vectors: HashMap<String, Vec<S>>,
    dim: usize,
}

impl<S: Scalar> WordVectorTable<S> {
    pub fn new(dim: usize) -> Self {
        WordVectorTable {
            vectors: HashMap::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<S>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(AlignError::DimMismatch {
                left: self.dim,
                right: vector.len(),
            });
        }
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    /// Exact lookup, then lowercase fallback.
    pub fn get(&self, token: &str) -> Option<&[S]> {
        if let Some(v) = self.vectors.get(token) {
            return Some(v);
        }
        self.vectors.get(&token.to_lowercase()).map(Vec::as_slice)
    }

    /// Load a text vector file: one `token v1 v2 ... vd` line per token.
    ///
    /// A fastText-style `count dim` header line is auto-detected and skipped.
    pub fn load(src: impl BufRead, file: &str) -> Result<Self> {
        let mut table: Option<WordVectorTable<S>> = None;
        for (i, line) in src.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("non-empty line has a first field");
            let values: Vec<&str> = parts.collect();
            if line_no == 1 && values.len() == 1 {
                // `count dim` header: both fields are plain integers
                if token.parse::<u64>().is_ok() && values[0].parse::<u64>().is_ok() {
                    continue;
                }
            }
            let mut vector = Vec::with_capacity(values.len());
            for v in &values {
                vector.push(S::from_f64_lossy(v.parse::<f64>().map_err(|_| {
                    AlignError::MalformedLine {
                        file: file.into(),
                        line: line_no,
                        reason: format!("expected float, got {v:?}"),
                    }
                })?));
            }
            if vector.is_empty() {
                return Err(AlignError::MalformedLine {
                    file: file.into(),
                    line: line_no,
                    reason: "token line has no vector values".into(),
                });
            }
            let table = table.get_or_insert_with(|| WordVectorTable::new(vector.len()));
            if vector.len() != table.dim {
                return Err(AlignError::MalformedLine {
                    file: file.into(),
                    line: line_no,
                    reason: format!(
                        "dimension {} differs from established {}",
                        vector.len(),
                        table.dim
                    ),
                });
            }
            table.vectors.insert(token.to_string(), vector);
        }
        table.ok_or_else(|| AlignError::MalformedLine {
            file: file.into(),
            line: 0,
            reason: "vector file contains no token lines".into(),
        })
    }
}

/// Split an entity name into alphanumeric runs (whitespace and punctuation
/// both act as separators).
pub fn tokenize(name: &str) -> impl Iterator<Item = &str> {
    name.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
}

/// Per-entity name vectors: the arithmetic mean of in-vocabulary token
/// vectors. Entities whose tokens are all out of vocabulary get a zero row
/// and are listed in the returned report.
pub fn name_semantic_vectors<S: Scalar>(
    kg: &KnowledgeGraph,
    table: &WordVectorTable<S>,
) -> (EmbeddingMatrix<S>, Vec<EntityId>) {
    let dim = table.dim();
    let mut emb = EmbeddingMatrix::zeros(kg.len(), dim);
    let mut oov = Vec::new();
    for id in kg.entities() {
        let row = emb.row_mut(id.idx());
        let mut hits = 0usize;
        for token in tokenize(kg.name(id)) {
            if let Some(vec) = table.get(token) {
                hits += 1;
                for (r, &v) in row.iter_mut().zip(vec) {
                    *r += v;
                }
            }
        }
        if hits == 0 {
            oov.push(id);
        } else {
            let inv = S::one() / S::from_f64_lossy(hits as f64);
            for r in row.iter_mut() {
                *r *= inv;
            }
        }
    }
    (emb, oov)
}

/// Load pre-computed per-entity name vectors (`original_entity_id v1 ... vd`
/// lines), bypassing tokenization. Entities absent from the file get zero
/// rows and are reported like out-of-vocabulary names.
pub fn load_name_vectors<S: Scalar>(
    kg: &KnowledgeGraph,
    src: impl BufRead,
    file: &str,
) -> Result<(EmbeddingMatrix<S>, Vec<EntityId>)> {
    let table = WordVectorTable::<S>::load(src, file)?;
    let mut emb = EmbeddingMatrix::zeros(kg.len(), table.dim());
    let mut missing = Vec::new();
    for id in kg.entities() {
        let key = kg.original_id(id).to_string();
        match table.get(&key) {
            Some(vec) => emb.row_mut(id.idx()).copy_from_slice(vec),
            None => missing.push(id),
        }
    }
    Ok((emb, missing))
}

fn cosine<S: Scalar>(a: &[S], b: &[S], norm_a: S, norm_b: S) -> S {
    if norm_a == S::zero() || norm_b == S::zero() {
        return S::zero();
    }
    let dot = a.iter().zip(b).map(|(&x, &y)| x * y).sum::<S>();
    dot / (norm_a * norm_b)
}

fn norms<S: Scalar>(emb: &EmbeddingMatrix<S>) -> Vec<S> {
    (0..emb.len())
        .map(|i| emb.row(i).iter().map(|&v| v * v).sum::<S>().sqrt())
        .collect()
}

/// Semantic distance matrix: `1 - cos(src_u, tgt_v)`, clamped to `[0, 2]`.
///
/// A zero-norm vector has cosine 0 against everything, so its distances are
/// exactly 1 (no evidence either way).
pub fn semantic_distance<S: Scalar>(
    src: &EmbeddingMatrix<S>,
    tgt: &EmbeddingMatrix<S>,
) -> Result<DistanceMatrix<S>> {
    if src.dim() != tgt.dim() {
        return Err(AlignError::DimMismatch {
            left: src.dim(),
            right: tgt.dim(),
        });
    }
    let src_norms = norms(src);
    let tgt_norms = norms(tgt);
    let mut out = DistanceMatrix::zeros(src.len(), tgt.len());
    out.par_fill_rows(|u, row| {
        let a = src.row(u);
        for (v, cell) in row.iter_mut().enumerate() {
            let c = cosine(a, tgt.row(v), src_norms[u], tgt_norms[v]);
            *cell = (S::one() - c).max(S::zero()).min(S::from_f64_lossy(2.0));
        }
    });
    Ok(out)
}

/// Minimal number of single-character insertions, deletions, and
/// substitutions transforming `a` into `b`, over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// String distance matrix: Levenshtein distance normalized by the longer
/// name length, in `[0, 1]`. Comparison is case-folded unless disabled.
pub fn string_distance<S: Scalar>(
    src_names: &[&str],
    tgt_names: &[&str],
    casefold: bool,
) -> DistanceMatrix<S> {
    let fold = |s: &str| -> Vec<char> {
        if casefold {
            s.to_lowercase().chars().collect()
        } else {
            s.chars().collect()
        }
    };
    let src: Vec<Vec<char>> = src_names.iter().map(|s| fold(s)).collect();
    let tgt: Vec<Vec<char>> = tgt_names.iter().map(|s| fold(s)).collect();
    let mut out = DistanceMatrix::zeros(src.len(), tgt.len());
    out.par_fill_rows(|u, row| {
        let a = &src[u];
        for (cell, b) in row.iter_mut().zip(&tgt) {
            let denom = a.len().max(b.len()).max(1);
            *cell = S::from_f64_lossy(levenshtein_chars(a, b) as f64 / denom as f64);
        }
    });
    out
}

/// Textual fusion `alpha * semantic + (1 - alpha) * string`.
pub fn fuse_textual<S: Scalar>(
    mn: &DistanceMatrix<S>,
    ml: &DistanceMatrix<S>,
    alpha: S,
) -> Result<DistanceMatrix<S>> {
    mn.convex_combine(ml, alpha)
}
