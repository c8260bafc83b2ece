//! Entity/relation grid codec.
//!
//! Quadruples are flattened onto two `n x n` token-pair grids. Entity spans
//! occupy the cell `(head, tail)` of the entity grid, where head is the
//! span's first token and tail its last. Relation cells live at head-head
//! coordinates: `rel` links target-aspect and aspect-opinion heads, while a
//! `pos`/`neg` cell at (target head, opinion head) both carries the
//! sentiment and anchors the quadruple. A quadruple without an aspect is
//! represented by its sentiment cell alone, with no completing `rel` chain.
//!
//! Decoding is total: structurally inconsistent cells in predicted grids
//! are dropped and reported in a [`DecodeTrace`] instead of failing.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Quadruple, Sentiment, Span};

/// Entity grid labels, in the scoring order used by the model head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityLabel {
    Tgt,
    Asp,
    Opin,
    None,
}

impl EntityLabel {
    pub const ALL: [EntityLabel; 4] = [
        EntityLabel::Tgt,
        EntityLabel::Asp,
        EntityLabel::Opin,
        EntityLabel::None,
    ];

    pub fn index(self) -> usize {
        match self {
            EntityLabel::Tgt => 0,
            EntityLabel::Asp => 1,
            EntityLabel::Opin => 2,
            EntityLabel::None => 3,
        }
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        Self::ALL.get(idx).copied()
    }

    pub fn code(self) -> char {
        match self {
            EntityLabel::Tgt => 'T',
            EntityLabel::Asp => 'A',
            EntityLabel::Opin => 'O',
            EntityLabel::None => '.',
        }
    }
}

/// Relation grid labels, in the scoring order used by the model head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationLabel {
    Rel,
    Pos,
    Neg,
    None,
}

impl RelationLabel {
    pub const ALL: [RelationLabel; 4] = [
        RelationLabel::Rel,
        RelationLabel::Pos,
        RelationLabel::Neg,
        RelationLabel::None,
    ];

    pub fn index(self) -> usize {
        match self {
            RelationLabel::Rel => 0,
            RelationLabel::Pos => 1,
            RelationLabel::Neg => 2,
            RelationLabel::None => 3,
        }
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        Self::ALL.get(idx).copied()
    }

    pub fn code(self) -> char {
        match self {
            RelationLabel::Rel => 'R',
            RelationLabel::Pos => '+',
            RelationLabel::Neg => '-',
            RelationLabel::None => '.',
        }
    }
}

/// Dense `n x n` label matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<L> {
    n: usize,
    labels: Vec<L>,
}

pub type EntityGrid = Grid<EntityLabel>;
pub type RelationGrid = Grid<RelationLabel>;

impl<L: Copy + PartialEq> Grid<L> {
    pub fn filled(n: usize, fill: L) -> Self {
        Grid {
            n,
            labels: vec![fill; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> L {
        self.labels[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, label: L) {
        self.labels[row * self.n + col] = label;
    }

    /// All cells whose label differs from `fill`, in row-major order.
    pub fn cells_not(&self, fill: L) -> Vec<(usize, usize, L)> {
        let mut out = Vec::new();
        for row in 0..self.n {
            for col in 0..self.n {
                let l = self.get(row, col);
                if l != fill {
                    out.push((row, col, l));
                }
            }
        }
        out
    }
}

impl EntityGrid {
    pub fn empty(n: usize) -> Self {
        Grid::filled(n, EntityLabel::None)
    }

    pub fn cells(&self) -> Vec<(usize, usize, EntityLabel)> {
        self.cells_not(EntityLabel::None)
    }

    /// Plain-text dump: one row per line of 1-char codes.
    pub fn dump(&self) -> String {
        dump_grid(self.n, |i, j| self.get(i, j).code())
    }
}

impl RelationGrid {
    pub fn empty(n: usize) -> Self {
        Grid::filled(n, RelationLabel::None)
    }

    pub fn cells(&self) -> Vec<(usize, usize, RelationLabel)> {
        self.cells_not(RelationLabel::None)
    }

    pub fn dump(&self) -> String {
        dump_grid(self.n, |i, j| self.get(i, j).code())
    }
}

fn dump_grid(n: usize, code: impl Fn(usize, usize) -> char) -> String {
    let mut out = String::with_capacity(n * (n + 1));
    for i in 0..n {
        for j in 0..n {
            out.push(code(i, j));
        }
        out.push('\n');
    }
    out
}

/// A representability conflict: the document cannot survive the
/// encode/decode round trip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Conflict {
    /// Two entities of different roles share the same (head, tail) cell.
    EntityCellCollision {
        head: usize,
        tail: usize,
        first: EntityLabel,
        second: EntityLabel,
    },
    /// Two quadruples share (target head, opinion head) with different sentiments.
    SentimentCollision {
        target_head: usize,
        opinion_head: usize,
    },
    /// A null-aspect and an aspect-bearing quadruple share (target, opinion).
    NullAspectOverlap {
        target_head: usize,
        opinion_head: usize,
    },
    /// The decoded quadruple set differs from the gold set (spurious or
    /// missing quadruples through unintended rel chains).
    RoundTripMismatch {
        missing: Vec<Quadruple>,
        spurious: Vec<Quadruple>,
    },
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conflict::EntityCellCollision {
                head,
                tail,
                first,
                second,
            } => write!(
                f,
                "entity cell ({head},{tail}) claimed by both {first:?} and {second:?}"
            ),
            Conflict::SentimentCollision {
                target_head,
                opinion_head,
            } => write!(
                f,
                "sentiment cell ({target_head},{opinion_head}) carries both pos and neg"
            ),
            Conflict::NullAspectOverlap {
                target_head,
                opinion_head,
            } => write!(
                f,
                "null-aspect and aspect-bearing quadruples share cell ({target_head},{opinion_head})"
            ),
            Conflict::RoundTripMismatch { missing, spurious } => write!(
                f,
                "round trip drops {} and invents {} quadruple(s)",
                missing.len(),
                spurious.len()
            ),
        }
    }
}

/// Outcome of [`check_representable`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepresentabilityReport {
    pub conflicts: Vec<Conflict>,
}

impl RepresentabilityReport {
    pub fn is_ok(&self) -> bool {
        self.conflicts.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("document {doc_id} is not grid-representable: {conflict}")]
    Unrepresentable { doc_id: String, conflict: Conflict },
}

/// Why a predicted cell was dropped during decoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Drop {
    /// Entity cell below the diagonal (head > tail).
    LowerTriangleEntity {
        row: usize,
        col: usize,
        label: EntityLabel,
    },
    /// Sentiment cell whose row is not the head of any decoded target.
    SentimentWithoutTarget { row: usize, col: usize },
    /// Sentiment cell whose column is not the head of any decoded opinion.
    SentimentWithoutOpinion { row: usize, col: usize },
}

/// Record of every cell the decoder discarded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub dropped: Vec<Drop>,
}

fn entity_spans(doc: &Document) -> Vec<(Span, EntityLabel)> {
    let quads = doc.quad_set();
    let mut spans: BTreeSet<(Span, EntityLabel)> = BTreeSet::new();
    for q in &quads {
        spans.insert((q.target, EntityLabel::Tgt));
        if let Some(a) = q.aspect {
            spans.insert((a, EntityLabel::Asp));
        }
        spans.insert((q.opinion, EntityLabel::Opin));
    }
    spans.into_iter().collect()
}

/// Encode without representability checking. Conflicting cells are
/// overwritten in canonical quad order; callers that need fidelity go
/// through [`encode_grids`].
fn encode_unchecked(doc: &Document) -> (EntityGrid, RelationGrid) {
    let n = doc.token_count();
    let mut eg = EntityGrid::empty(n);
    let mut rg = RelationGrid::empty(n);

    for (span, label) in entity_spans(doc) {
        eg.set(span.head(), span.tail(), label);
    }

    for q in doc.quad_set() {
        let th = q.target.head();
        let oh = q.opinion.head();
        if let Some(a) = q.aspect {
            let ah = a.head();
            rg.set(th, ah, RelationLabel::Rel);
            rg.set(ah, oh, RelationLabel::Rel);
        }
        let s = match q.sentiment {
            Sentiment::Pos => RelationLabel::Pos,
            Sentiment::Neg => RelationLabel::Neg,
        };
        rg.set(th, oh, s);
    }

    (eg, rg)
}

/// Flags every conflict that would corrupt the encode/decode round trip.
pub fn check_representable(doc: &Document) -> RepresentabilityReport {
    let mut report = RepresentabilityReport::default();
    let quads = doc.quad_set();

    // (a) entity cell collisions across roles
    let spans = entity_spans(doc);
    for i in 0..spans.len() {
        for j in i + 1..spans.len() {
            let (sa, la) = spans[i];
            let (sb, lb) = spans[j];
            if la != lb && sa.head() == sb.head() && sa.tail() == sb.tail() {
                report.conflicts.push(Conflict::EntityCellCollision {
                    head: sa.head(),
                    tail: sa.tail(),
                    first: la,
                    second: lb,
                });
            }
        }
    }

    // (b) sentiment collisions and (d) null/aspect overlap on one cell
    let quads_vec: Vec<&Quadruple> = quads.iter().collect();
    for i in 0..quads_vec.len() {
        for j in i + 1..quads_vec.len() {
            let (qa, qb) = (quads_vec[i], quads_vec[j]);
            let same_cell = qa.target.head() == qb.target.head()
                && qa.opinion.head() == qb.opinion.head();
            if !same_cell {
                continue;
            }
            if qa.sentiment != qb.sentiment {
                report.conflicts.push(Conflict::SentimentCollision {
                    target_head: qa.target.head(),
                    opinion_head: qa.opinion.head(),
                });
            }
            if qa.aspect.is_none() != qb.aspect.is_none() {
                report.conflicts.push(Conflict::NullAspectOverlap {
                    target_head: qa.target.head(),
                    opinion_head: qa.opinion.head(),
                });
            }
        }
    }

    // (c) anything else that breaks the round trip, caught by running it
    let (eg, rg) = encode_unchecked(doc);
    let (decoded, _) = decode_quadruples(&eg, &rg);
    if decoded != quads {
        let missing: Vec<Quadruple> = quads.difference(&decoded).cloned().collect();
        let spurious: Vec<Quadruple> = decoded.difference(&quads).cloned().collect();
        report
            .conflicts
            .push(Conflict::RoundTripMismatch { missing, spurious });
    }

    report
}

/// Encodes a representable document into its entity and relation grids.
pub fn encode_grids(doc: &Document) -> Result<(EntityGrid, RelationGrid), EncodeError> {
    let report = check_representable(doc);
    if let Some(conflict) = report.conflicts.into_iter().next() {
        return Err(EncodeError::Unrepresentable {
            doc_id: doc.doc_id.clone(),
            conflict,
        });
    }
    Ok(encode_unchecked(doc))
}

/// Decodes predicted grids into a quadruple set.
///
/// Every entity cell `(h, t)` with `h <= t` yields a span of its role.
/// Each sentiment cell `(i, j)` must sit at a decoded target head `i` and
/// opinion head `j`, else it is dropped with a trace entry. Aspects are
/// completed through `rel` chains target-head -> aspect-head -> opinion-head;
/// a sentiment cell with no completing chain emits a null-aspect quadruple.
/// `rel` cells outside any sentiment-anchored chain are ignored.
pub fn decode_quadruples(
    eg: &EntityGrid,
    rg: &RelationGrid,
) -> (BTreeSet<Quadruple>, DecodeTrace) {
    assert_eq!(eg.n(), rg.n(), "grids must share the token count");
    let mut trace = DecodeTrace::default();

    let mut targets: Vec<Span> = Vec::new();
    let mut aspects: Vec<Span> = Vec::new();
    let mut opinions: Vec<Span> = Vec::new();
    for (row, col, label) in eg.cells() {
        if row > col {
            trace.dropped.push(Drop::LowerTriangleEntity { row, col, label });
            continue;
        }
        let span = Span::new(row, col + 1);
        match label {
            EntityLabel::Tgt => targets.push(span),
            EntityLabel::Asp => aspects.push(span),
            EntityLabel::Opin => opinions.push(span),
            EntityLabel::None => unreachable!("cells() filters none"),
        }
    }

    let mut quads = BTreeSet::new();
    for (row, col, label) in rg.cells() {
        let sentiment = match label {
            RelationLabel::Pos => Sentiment::Pos,
            RelationLabel::Neg => Sentiment::Neg,
            RelationLabel::Rel | RelationLabel::None => continue,
        };
        let cell_targets: Vec<Span> =
            targets.iter().copied().filter(|t| t.head() == row).collect();
        if cell_targets.is_empty() {
            trace.dropped.push(Drop::SentimentWithoutTarget { row, col });
            continue;
        }
        let cell_opinions: Vec<Span> =
            opinions.iter().copied().filter(|o| o.head() == col).collect();
        if cell_opinions.is_empty() {
            trace.dropped.push(Drop::SentimentWithoutOpinion { row, col });
            continue;
        }
        let chained: Vec<Span> = aspects
            .iter()
            .copied()
            .filter(|a| {
                rg.get(row, a.head()) == RelationLabel::Rel
                    && rg.get(a.head(), col) == RelationLabel::Rel
            })
            .collect();
        for &t in &cell_targets {
            for &o in &cell_opinions {
                if chained.is_empty() {
                    quads.insert(Quadruple::new(t, None, o, sentiment));
                } else {
                    for &a in &chained {
                        quads.insert(Quadruple::new(t, Some(a), o, sentiment));
                    }
                }
            }
        }
    }

    (quads, trace)
}
