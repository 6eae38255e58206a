//! Knowledge-graph data model and DBP15K-style file ingestion.
//!
//! File conventions (UTF-8, tab-separated, LF or CRLF):
//! - `triples_*`: `head \t relation \t tail` integer ids
//! - `ent_ids_*`: `entity_id \t name`
//! - `ref_ent_ids` / `gold.tsv`: `source_id \t target_id`
//!
//! Entity ids are re-indexed to a dense `0..n-1` range at load time; the
//! original ids are kept on the graph for reporting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::BufRead;

use log::warn;

use crate::error::{AlignError, Result};

/// Dense per-KG entity index, valid for matrix indexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

impl EntityId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<usize> for EntityId {
    fn from(v: usize) -> Self {
        EntityId(u32::try_from(v).expect("entity index fits in u32"))
    }
}

/// One relation triple over dense entity ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: u32,
    pub tail: EntityId,
}

/// One knowledge graph: `n` entities with names, plus relation triples.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    names: Vec<String>,
    triples: Vec<Triple>,
    /// Original file ids, indexed by dense id.
    original_ids: Vec<u64>,
}

impl KnowledgeGraph {
    /// Build a graph from in-memory parts. Entity `i` gets original id `i`.
    pub fn from_parts(names: Vec<String>, triples: Vec<Triple>) -> Result<Self> {
        let n = names.len();
        for t in &triples {
            if t.head.idx() >= n || t.tail.idx() >= n {
                return Err(AlignError::UnknownEntity {
                    file: "<memory>".into(),
                    line: 0,
                    id: t.head.idx().max(t.tail.idx()) as u64,
                });
            }
        }
        let mut triples = triples;
        triples.sort_unstable();
        triples.dedup();
        Ok(KnowledgeGraph {
            names,
            triples,
            original_ids: (0..n as u64).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> {
        (0..self.len()).map(EntityId::from)
    }

    pub fn name(&self, id: EntityId) -> &str {
        &self.names[id.idx()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Names for a list of entities, in list order.
    pub fn names_for(&self, ids: &[EntityId]) -> Vec<&str> {
        ids.iter().map(|&id| self.name(id)).collect()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn original_id(&self, id: EntityId) -> u64 {
        self.original_ids[id.idx()]
    }

    /// Dense id for an original file id, if present.
    pub fn dense_id(&self, original: u64) -> Option<EntityId> {
        self.original_ids
            .binary_search(&original)
            .ok()
            .map(EntityId::from)
    }

    /// Serialize back to the `ent_ids` / `triples` file contents (original ids).
    pub fn to_files(&self) -> (String, String) {
        let mut names = String::new();
        for (i, name) in self.names.iter().enumerate() {
            names.push_str(&format!("{}\t{}\n", self.original_ids[i], name));
        }
        let mut triples = String::new();
        for t in &self.triples {
            triples.push_str(&format!(
                "{}\t{}\t{}\n",
                self.original_ids[t.head.idx()],
                t.relation,
                self.original_ids[t.tail.idx()]
            ));
        }
        (triples, names)
    }
}

/// What `load_kg` observed besides the graph itself.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub duplicate_triples: usize,
    /// Entities whose name column was missing (name set to "").
    pub missing_names: Vec<EntityId>,
}

fn split_line(line: &str) -> Vec<&str> {
    line.trim_end_matches(['\r', '\n']).split('\t').collect()
}

fn parse_id(s: &str, file: &str, line_no: usize) -> Result<u64> {
    s.trim().parse::<u64>().map_err(|_| AlignError::MalformedLine {
        file: file.into(),
        line: line_no,
        reason: format!("expected integer id, got {s:?}"),
    })
}

/// Load one KG from DBP15K-style `triples` and `ent_ids` sources.
///
/// Entity ids are remapped to a dense range ordered by ascending original id.
/// Duplicate triples are dropped (counted in the report); a missing name
/// column yields an empty name and a warning.
pub fn load_kg(
    triples_src: impl BufRead,
    triples_name: &str,
    names_src: impl BufRead,
    names_name: &str,
) -> Result<(KnowledgeGraph, LoadReport)> {
    let mut by_original: BTreeMap<u64, String> = BTreeMap::new();
    let mut missing_original: Vec<u64> = Vec::new();
    for (i, line) in names_src.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_line(&line);
        if fields.len() > 2 {
            return Err(AlignError::MalformedLine {
                file: names_name.into(),
                line: line_no,
                reason: format!("expected `id\\tname`, got {} fields", fields.len()),
            });
        }
        let id = parse_id(fields[0], names_name, line_no)?;
        let name = fields.get(1).copied().unwrap_or("");
        if name.is_empty() {
            missing_original.push(id);
        }
        if by_original.insert(id, name.to_string()).is_some() {
            return Err(AlignError::DuplicateName {
                file: names_name.into(),
                line: line_no,
                id,
            });
        }
    }

    let original_ids: Vec<u64> = by_original.keys().copied().collect();
    let remap: HashMap<u64, u32> = original_ids
        .iter()
        .enumerate()
        .map(|(dense, &orig)| (orig, dense as u32))
        .collect();
    let names: Vec<String> = by_original.into_values().collect();

    let mut triples = Vec::new();
    for (i, line) in triples_src.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_line(&line);
        if fields.len() != 3 {
            return Err(AlignError::MalformedLine {
                file: triples_name.into(),
                line: line_no,
                reason: format!("expected `head\\trel\\ttail`, got {} fields", fields.len()),
            });
        }
        let head = parse_id(fields[0], triples_name, line_no)?;
        let rel = parse_id(fields[1], triples_name, line_no)?;
        let tail = parse_id(fields[2], triples_name, line_no)?;
        let lookup = |id: u64| {
            remap.get(&id).copied().ok_or(AlignError::UnknownEntity {
                file: triples_name.into(),
                line: line_no,
                id,
            })
        };
        triples.push(Triple {
            head: EntityId(lookup(head)?),
            relation: u32::try_from(rel).map_err(|_| AlignError::MalformedLine {
                file: triples_name.into(),
                line: line_no,
                reason: format!("relation id {rel} out of range"),
            })?,
            tail: EntityId(lookup(tail)?),
        });
    }

    let before = triples.len();
    triples.sort_unstable();
    triples.dedup();
    let duplicate_triples = before - triples.len();

    let missing_names: Vec<EntityId> = missing_original
        .iter()
        .map(|orig| EntityId(remap[orig]))
        .collect();
    for id in &missing_names {
        warn!("{names_name}: entity {} has no name, using empty string", id);
    }

    Ok((
        KnowledgeGraph {
            names,
            triples,
            original_ids,
        },
        LoadReport {
            duplicate_triples,
            missing_names,
        },
    ))
}

/// Outcome of [`AlignmentSet::insert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insert {
    /// New pair accepted.
    Added,
    /// Exact pair was already present.
    Duplicate,
    /// Source or target already mapped to a different partner; pair rejected.
    Conflict,
}

/// A 1-to-1 partial mapping between source and target entities.
///
/// The 1-to-1 invariant is enforced by construction: [`AlignmentSet::insert`]
/// rejects any pair that reuses a source or a target.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentSet {
    src_to_tgt: BTreeMap<u32, u32>,
    tgt_to_src: BTreeMap<u32, u32>,
}

impl AlignmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from pairs, failing on any 1-to-1 violation.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (EntityId, EntityId)>) -> Result<Self> {
        let mut set = AlignmentSet::new();
        for (s, t) in pairs {
            match set.insert(s, t) {
                Insert::Added => {}
                Insert::Duplicate | Insert::Conflict => {
                    let side = if set.target_of(s).is_some() { "source" } else { "target" };
                    let id = if side == "source" { s.0 } else { t.0 };
                    return Err(AlignError::DuplicateAlignment { side, id });
                }
            }
        }
        Ok(set)
    }

    pub fn insert(&mut self, source: EntityId, target: EntityId) -> Insert {
        match (self.src_to_tgt.get(&source.0), self.tgt_to_src.get(&target.0)) {
            (Some(&t), _) if t == target.0 => Insert::Duplicate,
            (Some(_), _) | (_, Some(_)) => Insert::Conflict,
            (None, None) => {
                self.src_to_tgt.insert(source.0, target.0);
                self.tgt_to_src.insert(target.0, source.0);
                Insert::Added
            }
        }
    }

    pub fn len(&self) -> usize {
        self.src_to_tgt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src_to_tgt.is_empty()
    }

    pub fn contains_source(&self, id: EntityId) -> bool {
        self.src_to_tgt.contains_key(&id.0)
    }

    pub fn contains_target(&self, id: EntityId) -> bool {
        self.tgt_to_src.contains_key(&id.0)
    }

    pub fn contains_pair(&self, source: EntityId, target: EntityId) -> bool {
        self.src_to_tgt.get(&source.0) == Some(&target.0)
    }

    pub fn target_of(&self, source: EntityId) -> Option<EntityId> {
        self.src_to_tgt.get(&source.0).map(|&t| EntityId(t))
    }

    pub fn source_of(&self, target: EntityId) -> Option<EntityId> {
        self.tgt_to_src.get(&target.0).map(|&s| EntityId(s))
    }

    /// Pairs in ascending source-id order.
    pub fn iter(&self) -> impl Iterator<Item = (EntityId, EntityId)> + '_ {
        self.src_to_tgt
            .iter()
            .map(|(&s, &t)| (EntityId(s), EntityId(t)))
    }

    pub fn pairs(&self) -> Vec<(EntityId, EntityId)> {
        self.iter().collect()
    }

    /// `source_id \t target_id` lines, ascending source id.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (s, t) in self.iter() {
            out.push_str(&format!("{s}\t{t}\n"));
        }
        out
    }
}

/// Load an alignment set from `source_id \t target_id` lines.
///
/// Rejects duplicate source or target ids: the gold standard is a 1-to-1
/// mapping, so a repeated id means corrupt input.
pub fn load_alignment(src: impl BufRead, file: &str) -> Result<AlignmentSet> {
    let mut set = AlignmentSet::new();
    for (i, line) in src.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_line(&line);
        if fields.len() != 2 {
            return Err(AlignError::MalformedLine {
                file: file.into(),
                line: line_no,
                reason: format!("expected `src\\ttgt`, got {} fields", fields.len()),
            });
        }
        let s = parse_id(fields[0], file, line_no)?;
        let t = parse_id(fields[1], file, line_no)?;
        let (s, t) = (
            u32::try_from(s).map_err(|_| AlignError::MalformedLine {
                file: file.into(),
                line: line_no,
                reason: format!("source id {s} out of range"),
            })?,
            u32::try_from(t).map_err(|_| AlignError::MalformedLine {
                file: file.into(),
                line: line_no,
                reason: format!("target id {t} out of range"),
            })?,
        );
        match set.insert(EntityId(s), EntityId(t)) {
            Insert::Added => {}
            Insert::Duplicate => {
                return Err(AlignError::DuplicateAlignment { side: "source", id: s })
            }
            Insert::Conflict => {
                let side = if set.contains_source(EntityId(s)) { "source" } else { "target" };
                let id = if side == "source" { s } else { t };
                return Err(AlignError::DuplicateAlignment { side, id });
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn load(triples: &str, names: &str) -> Result<(KnowledgeGraph, LoadReport)> {
        load_kg(Cursor::new(triples), "triples", Cursor::new(names), "names")
    }

    #[test]
    fn minimal_well_formed_input() {
        let (kg, report) = load("0\t0\t1\n", "0\ta\n1\tb\n").unwrap();
        assert_eq!(kg.len(), 2);
        assert_eq!(kg.triples().len(), 1);
        assert_eq!(kg.name(EntityId(0)), "a");
        assert_eq!(kg.name(EntityId(1)), "b");
        assert_eq!(report.duplicate_triples, 0);
    }

    #[test]
    fn unknown_entity_id_is_an_error() {
        let err = load("0\t0\t99\n", "0\ta\n1\tb\n").unwrap_err();
        match err {
            AlignError::UnknownEntity { id, line, .. } => {
                assert_eq!(id, 99);
                assert_eq!(line, 1);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = load("0\t0\t1\nnot-a-triple\n", "0\ta\n1\tb\n").unwrap_err();
        match err {
            AlignError::MalformedLine { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_name_line_is_an_error() {
        let err = load("", "0\ta\n0\tb\n").unwrap_err();
        assert!(matches!(err, AlignError::DuplicateName { id: 0, .. }));
    }

    #[test]
    fn duplicate_triples_dropped_with_count() {
        let (kg, report) = load("0\t0\t1\n0\t0\t1\n1\t2\t0\n", "0\ta\n1\tb\n").unwrap();
        assert_eq!(kg.triples().len(), 2);
        assert_eq!(report.duplicate_triples, 1);
    }

    #[test]
    fn missing_name_column_gets_empty_string() {
        let (kg, report) = load("", "0\ta\n1\n2\t\n").unwrap();
        assert_eq!(kg.name(EntityId(1)), "");
        assert_eq!(kg.name(EntityId(2)), "");
        assert_eq!(report.missing_names, vec![EntityId(1), EntityId(2)]);
    }

    #[test]
    fn ids_remap_densely_by_ascending_original_id() {
        let (kg, _) = load("100\t7\t5\n", "100\tx\n5\ty\n").unwrap();
        assert_eq!(kg.original_id(EntityId(0)), 5);
        assert_eq!(kg.original_id(EntityId(1)), 100);
        assert_eq!(kg.dense_id(100), Some(EntityId(1)));
        assert_eq!(
            kg.triples(),
            &[Triple { head: EntityId(1), relation: 7, tail: EntityId(0) }]
        );
    }

    #[test]
    fn crlf_lines_tolerated() {
        let (kg, _) = load("0\t0\t1\r\n", "0\ta\r\n1\tb\r\n").unwrap();
        assert_eq!(kg.name(EntityId(0)), "a");
        assert_eq!(kg.triples().len(), 1);
    }

    #[test]
    fn kg_file_round_trip() {
        let (kg, _) = load("3\t1\t7\n7\t0\t9\n", "3\tfoo\n7\tbar baz\n9\tqux\n").unwrap();
        let (t, n) = kg.to_files();
        let (kg2, _) = load(&t, &n).unwrap();
        assert_eq!(kg, kg2);
    }

    #[test]
    fn alignment_parse_and_one_to_one() {
        let set = load_alignment(Cursor::new("0\t0\n1\t2\n"), "ref").unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.contains_pair(EntityId(0), EntityId(0)));
        assert!(set.contains_pair(EntityId(1), EntityId(2)));

        let err = load_alignment(Cursor::new("0\t0\n0\t1\n"), "ref").unwrap_err();
        assert!(matches!(
            err,
            AlignError::DuplicateAlignment { side: "source", id: 0 }
        ));

        let err = load_alignment(Cursor::new("0\t5\n1\t5\n"), "ref").unwrap_err();
        assert!(matches!(
            err,
            AlignError::DuplicateAlignment { side: "target", id: 5 }
        ));
    }

    #[test]
    fn insert_rejects_reuse() {
        let mut set = AlignmentSet::new();
        assert_eq!(set.insert(EntityId(0), EntityId(1)), Insert::Added);
        assert_eq!(set.insert(EntityId(0), EntityId(1)), Insert::Duplicate);
        assert_eq!(set.insert(EntityId(0), EntityId(2)), Insert::Conflict);
        assert_eq!(set.insert(EntityId(3), EntityId(1)), Insert::Conflict);
        assert_eq!(set.len(), 1);
    }
}
