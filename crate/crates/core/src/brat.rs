//! BRAT standoff annotation (`.ann`) parsing and conversion to documents.
//!
//! Supported line kinds:
//!
//! ```text
//! T<k>\t<TAG> <begin> <end>\t<surface>
//! R<k>\t<TAG> Arg1:T<i> Arg2:T<j>
//! ```
//!
//! Entity tags are `TAR`, `ASP`, `OPIN`; relation tags are `TAR-ASP`
//! (target to aspect), `ASP-OPIN` (aspect to opinion) and `POS`/`NEG`
//! (target to opinion, carrying the sentiment). Character offsets are
//! byte offsets into the UTF-8 document text with an exclusive end, and
//! the surface text is cross-checked against them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DepEdge, Document, Quadruple, Sentiment, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityTag {
    Tar,
    Asp,
    Opin,
}

impl EntityTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntityTag::Tar => "TAR",
            EntityTag::Asp => "ASP",
            EntityTag::Opin => "OPIN",
        }
    }

    fn parse(text: &str) -> Option<Self> {
        match text {
            "TAR" => Some(EntityTag::Tar),
            "ASP" => Some(EntityTag::Asp),
            "OPIN" => Some(EntityTag::Opin),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationTag {
    TarAsp,
    AspOpin,
    Pos,
    Neg,
}

impl RelationTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelationTag::TarAsp => "TAR-ASP",
            RelationTag::AspOpin => "ASP-OPIN",
            RelationTag::Pos => "POS",
            RelationTag::Neg => "NEG",
        }
    }

    fn parse(text: &str) -> Option<Self> {
        match text {
            "TAR-ASP" => Some(RelationTag::TarAsp),
            "ASP-OPIN" => Some(RelationTag::AspOpin),
            "POS" => Some(RelationTag::Pos),
            "NEG" => Some(RelationTag::Neg),
            _ => None,
        }
    }

    /// Required (arg1, arg2) entity tags.
    fn arg_tags(&self) -> (EntityTag, EntityTag) {
        match self {
            RelationTag::TarAsp => (EntityTag::Tar, EntityTag::Asp),
            RelationTag::AspOpin => (EntityTag::Asp, EntityTag::Opin),
            RelationTag::Pos | RelationTag::Neg => (EntityTag::Tar, EntityTag::Opin),
        }
    }
}

/// One annotated entity: tag, character offsets and surface string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnEntity {
    pub tag: EntityTag,
    pub char_begin: usize,
    pub char_end: usize,
    pub surface: String,
}

/// One annotated relation between two entity ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnRelation {
    pub tag: RelationTag,
    pub arg1: String,
    pub arg2: String,
}

/// A parsed `.ann` file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnGraph {
    pub entities: BTreeMap<String, AnnEntity>,
    pub relations: BTreeMap<String, AnnRelation>,
}

#[derive(Debug, Error, PartialEq)]
pub enum AnnError {
    #[error("line {line}: malformed {what}")]
    Malformed { line: usize, what: String },
    #[error("line {line}: unknown line kind {kind:?}")]
    UnknownLineKind { line: usize, kind: String },
    #[error("line {line}: unknown tag {tag:?}")]
    UnknownTag { line: usize, tag: String },
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { line: usize, id: String },
    #[error("entity {id}: offsets {begin}..{end} out of range for text of length {len}")]
    OffsetOutOfRange {
        id: String,
        begin: usize,
        end: usize,
        len: usize,
    },
    #[error("entity {id}: surface {surface:?} does not match text {actual:?} at {begin}..{end}")]
    SurfaceMismatch {
        id: String,
        surface: String,
        actual: String,
        begin: usize,
        end: usize,
    },
    #[error("relation {id}: argument {arg} does not reference an existing entity")]
    DanglingArg { id: String, arg: String },
    #[error("relation {id}: {tag} requires ({want1}, {want2}) arguments, got ({got1}, {got2})")]
    ArgTagMismatch {
        id: String,
        tag: String,
        want1: String,
        want2: String,
        got1: String,
        got2: String,
    },
}

fn parse_entity_line(line_no: usize, rest: &str) -> Result<AnnEntity, AnnError> {
    // rest = "<TAG> <begin> <end>\t<surface>"
    let (head, surface) = rest.split_once('\t').ok_or_else(|| AnnError::Malformed {
        line: line_no,
        what: "entity line (missing surface field)".to_string(),
    })?;
    let mut parts = head.split_whitespace();
    let tag_text = parts.next().ok_or_else(|| AnnError::Malformed {
        line: line_no,
        what: "entity line (missing tag)".to_string(),
    })?;
    let tag = EntityTag::parse(tag_text).ok_or_else(|| AnnError::UnknownTag {
        line: line_no,
        tag: tag_text.to_string(),
    })?;
    let begin: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| AnnError::Malformed {
            line: line_no,
            what: "entity offsets".to_string(),
        })?;
    let end: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| AnnError::Malformed {
            line: line_no,
            what: "entity offsets".to_string(),
        })?;
    if parts.next().is_some() {
        return Err(AnnError::Malformed {
            line: line_no,
            what: "entity line (trailing fields)".to_string(),
        });
    }
    Ok(AnnEntity {
        tag,
        char_begin: begin,
        char_end: end,
        surface: surface.to_string(),
    })
}

fn parse_relation_line(line_no: usize, rest: &str) -> Result<AnnRelation, AnnError> {
    // rest = "<TAG> Arg1:T<i> Arg2:T<j>"
    let mut parts = rest.split_whitespace();
    let tag_text = parts.next().ok_or_else(|| AnnError::Malformed {
        line: line_no,
        what: "relation line (missing tag)".to_string(),
    })?;
    let tag = RelationTag::parse(tag_text).ok_or_else(|| AnnError::UnknownTag {
        line: line_no,
        tag: tag_text.to_string(),
    })?;
    let mut args = [None::<String>, None::<String>];
    for (idx, key) in ["Arg1:", "Arg2:"].iter().enumerate() {
        let field = parts.next().ok_or_else(|| AnnError::Malformed {
            line: line_no,
            what: format!("relation line (missing {})", key.trim_end_matches(':')),
        })?;
        let value = field.strip_prefix(key).ok_or_else(|| AnnError::Malformed {
            line: line_no,
            what: format!("relation argument {field:?}"),
        })?;
        args[idx] = Some(value.to_string());
    }
    if parts.next().is_some() {
        return Err(AnnError::Malformed {
            line: line_no,
            what: "relation line (trailing fields)".to_string(),
        });
    }
    Ok(AnnRelation {
        tag,
        arg1: args[0].take().unwrap(),
        arg2: args[1].take().unwrap(),
    })
}

/// Parses an `.ann` file against the document text it annotates.
pub fn parse_ann(ann_text: &str, doc_text: &str) -> Result<AnnGraph, AnnError> {
    let mut graph = AnnGraph::default();
    for (idx, raw) in ann_text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (id, rest) = line.split_once('\t').ok_or_else(|| AnnError::Malformed {
            line: line_no,
            what: "line (missing tab after id)".to_string(),
        })?;
        if id.len() >= 2 && id.starts_with('T') && id[1..].chars().all(|c| c.is_ascii_digit()) {
            let entity = parse_entity_line(line_no, rest)?;
            if graph.entities.insert(id.to_string(), entity).is_some() {
                return Err(AnnError::DuplicateId {
                    line: line_no,
                    id: id.to_string(),
                });
            }
        } else if id.len() >= 2
            && id.starts_with('R')
            && id[1..].chars().all(|c| c.is_ascii_digit())
        {
            let relation = parse_relation_line(line_no, rest)?;
            if graph.relations.insert(id.to_string(), relation).is_some() {
                return Err(AnnError::DuplicateId {
                    line: line_no,
                    id: id.to_string(),
                });
            }
        } else {
            return Err(AnnError::UnknownLineKind {
                line: line_no,
                kind: id.to_string(),
            });
        }
    }

    // Integrity: offsets in range and surfaces equal to the text slice.
    for (id, entity) in &graph.entities {
        let len = doc_text.len();
        if entity.char_begin >= entity.char_end
            || entity.char_end > len
            || !doc_text.is_char_boundary(entity.char_begin)
            || !doc_text.is_char_boundary(entity.char_end)
        {
            return Err(AnnError::OffsetOutOfRange {
                id: id.clone(),
                begin: entity.char_begin,
                end: entity.char_end,
                len,
            });
        }
        let actual = &doc_text[entity.char_begin..entity.char_end];
        if actual != entity.surface {
            return Err(AnnError::SurfaceMismatch {
                id: id.clone(),
                surface: entity.surface.clone(),
                actual: actual.to_string(),
                begin: entity.char_begin,
                end: entity.char_end,
            });
        }
    }

    // Schema: relation args exist and carry the right entity tags.
    for (id, relation) in &graph.relations {
        for arg in [&relation.arg1, &relation.arg2] {
            if !graph.entities.contains_key(arg) {
                return Err(AnnError::DanglingArg {
                    id: id.clone(),
                    arg: arg.clone(),
                });
            }
        }
        let (want1, want2) = relation.tag.arg_tags();
        let got1 = graph.entities[&relation.arg1].tag;
        let got2 = graph.entities[&relation.arg2].tag;
        if got1 != want1 || got2 != want2 {
            return Err(AnnError::ArgTagMismatch {
                id: id.clone(),
                tag: relation.tag.as_str().to_string(),
                want1: want1.as_str().to_string(),
                want2: want2.as_str().to_string(),
                got1: got1.as_str().to_string(),
                got2: got2.as_str().to_string(),
            });
        }
    }

    Ok(graph)
}

/// Serializes an [`AnnGraph`] back to `.ann` text (entities then relations,
/// in id order). Inverse of [`parse_ann`] on valid graphs.
pub fn serialize_ann(graph: &AnnGraph) -> String {
    let mut out = String::new();
    for (id, e) in &graph.entities {
        out.push_str(&format!(
            "{id}\t{} {} {}\t{}\n",
            e.tag.as_str(),
            e.char_begin,
            e.char_end,
            e.surface
        ));
    }
    for (id, r) in &graph.relations {
        out.push_str(&format!(
            "{id}\t{} Arg1:{} Arg2:{}\n",
            r.tag.as_str(),
            r.arg1,
            r.arg2
        ));
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum ConvertError {
    #[error("token offsets count {offsets} != token count {tokens}")]
    OffsetCountMismatch { offsets: usize, tokens: usize },
    #[error(
        "entity {id} ({begin}..{end}) does not align with token boundaries"
    )]
    Misaligned { id: String, begin: usize, end: usize },
    #[error("contradictory sentiment: both POS and NEG link target {target} to opinion {opinion}")]
    ContradictorySentiment { target: String, opinion: String },
}

/// Converts a parsed annotation graph plus tokenization into a [`Document`].
///
/// `token_offsets` gives each token's character range in `text`. Entities
/// must align exactly with token boundaries. For each POS/NEG relation
/// (target t, opinion o), the aspects are all ASP entities a with
/// TAR-ASP(t, a) and ASP-OPIN(a, o); one quadruple is emitted per matching
/// aspect, or a single null-aspect quadruple when none matches.
#[allow(clippy::too_many_arguments)]
pub fn ann_to_document(
    graph: &AnnGraph,
    doc_id: &str,
    lang: &str,
    text: &str,
    token_offsets: &[(usize, usize)],
    pos: Vec<String>,
    deps: Vec<DepEdge>,
    sentences: Option<Vec<Span>>,
) -> Result<Document, ConvertError> {
    let tokens: Vec<String> = token_offsets
        .iter()
        .map(|&(b, e)| text.get(b..e).unwrap_or_default().to_string())
        .collect();
    if tokens.iter().any(|t| t.is_empty()) {
        return Err(ConvertError::OffsetCountMismatch {
            offsets: token_offsets.len(),
            tokens: tokens.iter().filter(|t| !t.is_empty()).count(),
        });
    }

    let token_span = |id: &str, begin: usize, end: usize| -> Result<Span, ConvertError> {
        let first = token_offsets.iter().position(|&(b, _)| b == begin);
        let last = token_offsets.iter().position(|&(_, e)| e == end);
        match (first, last) {
            (Some(f), Some(l)) if f <= l => Ok(Span::new(f, l + 1)),
            _ => Err(ConvertError::Misaligned {
                id: id.to_string(),
                begin,
                end,
            }),
        }
    };

    let mut entity_spans: BTreeMap<&str, Span> = BTreeMap::new();
    for (id, e) in &graph.entities {
        entity_spans.insert(id.as_str(), token_span(id, e.char_begin, e.char_end)?);
    }

    // Contradiction check: one (target, opinion) pair, both polarities.
    let mut sentiment_for: BTreeMap<(&str, &str), Sentiment> = BTreeMap::new();
    for r in graph.relations.values() {
        let s = match r.tag {
            RelationTag::Pos => Sentiment::Pos,
            RelationTag::Neg => Sentiment::Neg,
            _ => continue,
        };
        let key = (r.arg1.as_str(), r.arg2.as_str());
        if let Some(prev) = sentiment_for.insert(key, s) {
            if prev != s {
                return Err(ConvertError::ContradictorySentiment {
                    target: r.arg1.clone(),
                    opinion: r.arg2.clone(),
                });
            }
        }
    }

    let mut quadruples = Vec::new();
    for ((target_id, opinion_id), sentiment) in &sentiment_for {
        let target = entity_spans[target_id];
        let opinion = entity_spans[opinion_id];
        let mut aspects: Vec<Span> = Vec::new();
        for (aspect_id, aspect_entity) in &graph.entities {
            if aspect_entity.tag != EntityTag::Asp {
                continue;
            }
            let linked_to_target = graph.relations.values().any(|r| {
                r.tag == RelationTag::TarAsp && r.arg1 == *target_id && r.arg2 == *aspect_id
            });
            let linked_to_opinion = graph.relations.values().any(|r| {
                r.tag == RelationTag::AspOpin && r.arg1 == *aspect_id && r.arg2 == *opinion_id
            });
            if linked_to_target && linked_to_opinion {
                aspects.push(entity_spans[aspect_id.as_str()]);
            }
        }
        if aspects.is_empty() {
            quadruples.push(Quadruple::new(target, None, opinion, *sentiment));
        } else {
            for a in aspects {
                quadruples.push(Quadruple::new(target, Some(a), opinion, *sentiment));
            }
        }
    }
    quadruples.sort();
    quadruples.dedup();

    let n = tokens.len();
    Ok(Document {
        doc_id: doc_id.to_string(),
        lang: lang.to_string(),
        text: text.to_string(),
        tokens,
        sentences: sentences.unwrap_or_else(|| vec![Span::new(0, n)]),
        pos,
        deps,
        quadruples,
    })
}

/// The worked annotation example: one TAR, one two-token ASP, one OPIN,
/// with TAR-ASP, ASP-OPIN and POS arcs.
pub fn example_ann() -> (&'static str, &'static str, Vec<(usize, usize)>) {
    let text = "Bu o'yin interfeys dizayni juda qulay";
    let ann = "T1\tTAR 3 8\to'yin\n\
               T2\tASP 9 26\tinterfeys dizayni\n\
               T3\tOPIN 32 37\tqulay\n\
               R1\tTAR-ASP Arg1:T1 Arg2:T2\n\
               R2\tASP-OPIN Arg1:T2 Arg2:T3\n\
               R3\tPOS Arg1:T1 Arg2:T3\n";
    let offsets = vec![(0, 2), (3, 8), (9, 18), (19, 26), (27, 31), (32, 37)];
    (ann, text, offsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_document;

    #[test]
    fn parses_the_worked_example() {
        let (ann, text, _) = example_ann();
        let graph = parse_ann(ann, text).unwrap();
        assert_eq!(graph.entities.len(), 3);
        assert_eq!(graph.relations.len(), 3);
        let t1 = &graph.entities["T1"];
        assert_eq!(
            (t1.tag, t1.char_begin, t1.char_end, t1.surface.as_str()),
            (EntityTag::Tar, 3, 8, "o'yin")
        );
        let r1 = &graph.relations["R1"];
        assert_eq!(
            (r1.tag, r1.arg1.as_str(), r1.arg2.as_str()),
            (RelationTag::TarAsp, "T1", "T2")
        );
    }

    #[test]
    fn dangling_relation_arg_is_a_schema_error() {
        let (_, text, _) = example_ann();
        let ann = "T1\tTAR 3 8\to'yin\nR9\tTAR-ASP Arg1:T1 Arg2:T99\n";
        let err = parse_ann(ann, text).unwrap_err();
        assert_eq!(
            err,
            AnnError::DanglingArg {
                id: "R9".to_string(),
                arg: "T99".to_string()
            }
        );
    }

    #[test]
    fn surface_mismatch_is_an_integrity_error() {
        let (_, text, _) = example_ann();
        let ann = "T1\tTAR 3 8\tqulay\n";
        assert!(matches!(
            parse_ann(ann, text),
            Err(AnnError::SurfaceMismatch { .. })
        ));
    }

    #[test]
    fn unknown_tags_and_line_kinds_are_rejected() {
        let (_, text, _) = example_ann();
        assert!(matches!(
            parse_ann("T1\tLOC 3 8\to'yin\n", text),
            Err(AnnError::UnknownTag { line: 1, .. })
        ));
        assert!(matches!(
            parse_ann("E1\tEvent:T1\n", text),
            Err(AnnError::UnknownLineKind { line: 1, .. })
        ));
        assert!(matches!(
            parse_ann("A1\tNegated T1\n", text),
            Err(AnnError::UnknownLineKind { line: 1, .. })
        ));
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let (_, text, _) = example_ann();
        let ann = "T1\tTAR 3 8\to'yin\nT2\tASP nine 26\tinterfeys dizayni\n";
        assert!(matches!(
            parse_ann(ann, text),
            Err(AnnError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn wrong_relation_arg_types_are_rejected() {
        let (_, text, _) = example_ann();
        // POS must link TAR -> OPIN, not TAR -> ASP.
        let ann = "T1\tTAR 3 8\to'yin\nT2\tASP 9 26\tinterfeys dizayni\nR1\tPOS Arg1:T1 Arg2:T2\n";
        assert!(matches!(
            parse_ann(ann, text),
            Err(AnnError::ArgTagMismatch { .. })
        ));
    }

    #[test]
    fn round_trips_through_serialize() {
        let (ann, text, _) = example_ann();
        let graph = parse_ann(ann, text).unwrap();
        let serialized = serialize_ann(&graph);
        let reparsed = parse_ann(&serialized, text).unwrap();
        assert_eq!(graph, reparsed);
    }

    #[test]
    fn converts_worked_example_to_one_quadruple() {
        let (ann, text, offsets) = example_ann();
        let graph = parse_ann(ann, text).unwrap();
        let doc = ann_to_document(
            &graph,
            "fig3",
            "uz",
            text,
            &offsets,
            vec!["DET".into(), "NOUN".into(), "NOUN".into(), "NOUN".into(), "ADV".into(), "ADJ".into()],
            vec![],
            None,
        )
        .unwrap();
        assert_eq!(
            doc.quadruples,
            vec![Quadruple::new(
                Span::new(1, 2),
                Some(Span::new(2, 4)),
                Span::new(5, 6),
                Sentiment::Pos
            )]
        );
        assert!(validate_document(&doc).is_valid());
    }

    #[test]
    fn missing_aspect_chain_falls_back_to_null_aspect() {
        let (_, text, offsets) = example_ann();
        let ann = "T1\tTAR 3 8\to'yin\nT3\tOPIN 32 37\tqulay\nR3\tPOS Arg1:T1 Arg2:T3\n";
        let graph = parse_ann(ann, text).unwrap();
        let doc = ann_to_document(
            &graph,
            "d",
            "uz",
            text,
            &offsets,
            vec!["X".into(); 6],
            vec![],
            None,
        )
        .unwrap();
        assert_eq!(
            doc.quadruples,
            vec![Quadruple::new(
                Span::new(1, 2),
                None,
                Span::new(5, 6),
                Sentiment::Pos
            )]
        );
    }

    #[test]
    fn two_chained_aspects_yield_two_quadruples() {
        // Brute-force chain enumeration over a two-aspect graph.
        let text = "t a b o";
        let offsets = vec![(0, 1), (2, 3), (4, 5), (6, 7)];
        let ann = "T1\tTAR 0 1\tt\n\
                   T2\tASP 2 3\ta\n\
                   T3\tASP 4 5\tb\n\
                   T4\tOPIN 6 7\to\n\
                   R1\tTAR-ASP Arg1:T1 Arg2:T2\n\
                   R2\tTAR-ASP Arg1:T1 Arg2:T3\n\
                   R3\tASP-OPIN Arg1:T2 Arg2:T4\n\
                   R4\tASP-OPIN Arg1:T3 Arg2:T4\n\
                   R5\tPOS Arg1:T1 Arg2:T4\n";
        let graph = parse_ann(ann, text).unwrap();
        let doc = ann_to_document(
            &graph,
            "d",
            "x",
            text,
            &offsets,
            vec!["X".into(); 4],
            vec![],
            None,
        )
        .unwrap();
        assert_eq!(doc.quadruples.len(), 2);
        assert!(doc
            .quadruples
            .iter()
            .all(|q| q.target == Span::new(0, 1)
                && q.opinion == Span::new(3, 4)
                && q.sentiment == Sentiment::Pos));
        let aspects: Vec<Option<Span>> = doc.quadruples.iter().map(|q| q.aspect).collect();
        assert_eq!(
            aspects,
            vec![Some(Span::new(1, 2)), Some(Span::new(2, 3))]
        );
    }

    #[test]
    fn entity_crossing_token_boundary_is_an_alignment_error() {
        let text = "Bu o'yin juda qulay";
        let offsets = vec![(0, 2), (3, 8), (9, 13), (14, 19)];
        // Offsets 3..6 end mid-token.
        let ann = "T1\tTAR 3 6\to'y\n";
        let graph = parse_ann(ann, text).unwrap();
        let err = ann_to_document(
            &graph,
            "d",
            "uz",
            text,
            &offsets,
            vec!["X".into(); 4],
            vec![],
            None,
        )
        .unwrap_err();
        assert_eq!(
            err,
            ConvertError::Misaligned {
                id: "T1".to_string(),
                begin: 3,
                end: 6
            }
        );
    }

    #[test]
    fn contradictory_sentiment_is_an_error() {
        let text = "t o";
        let offsets = vec![(0, 1), (2, 3)];
        let ann = "T1\tTAR 0 1\tt\n\
                   T2\tOPIN 2 3\to\n\
                   R1\tPOS Arg1:T1 Arg2:T2\n\
                   R2\tNEG Arg1:T1 Arg2:T2\n";
        let graph = parse_ann(ann, text).unwrap();
        let err = ann_to_document(
            &graph,
            "d",
            "x",
            text,
            &offsets,
            vec!["X".into(); 2],
            vec![],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, ConvertError::ContradictorySentiment { .. }));
    }
}
