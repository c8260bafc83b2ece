//! Document data model, on-disk corpus format, validation and analytics.
//!
//! A corpus file is UTF-8 text with one JSON object per line. Field names
//! are fixed: `doc_id`, `lang`, `text`, `tokens`, `sentences`, `pos`,
//! `deps`, `quadruples`. Spans serialize as `[begin, end]` pairs with an
//! exclusive end, dependency edges as `[i, j, "label"]`, and a quadruple as
//! `{"target":[b,e],"aspect":[b,e]|null,"opinion":[b,e],"sentiment":"pos"|"neg"}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Token index range, end exclusive: the span covers `begin..end`.
/// Serializes as a two-element array `[begin, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub begin: usize,
    pub end: usize,
}

impl From<(usize, usize)> for Span {
    fn from((begin, end): (usize, usize)) -> Self {
        Span { begin, end }
    }
}

impl From<Span> for (usize, usize) {
    fn from(span: Span) -> Self {
        (span.begin, span.end)
    }
}

impl Span {
    pub fn new(begin: usize, end: usize) -> Self {
        Span { begin, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.begin)
    }

    pub fn is_empty(&self) -> bool {
        self.begin >= self.end
    }

    /// First token of the span, used as its anchor in relation grids.
    pub fn head(&self) -> usize {
        self.begin
    }

    /// Last token of the span (inclusive).
    pub fn tail(&self) -> usize {
        self.end - 1
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.begin <= idx && idx < self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.begin, self.end)
    }
}

/// Binary sentiment polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Pos,
    Neg,
}

impl Sentiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sentiment::Pos => "pos",
            Sentiment::Neg => "neg",
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One (target, aspect, opinion, sentiment) annotation. The aspect may be
/// absent; target and opinion are always present.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Quadruple {
    pub target: Span,
    pub aspect: Option<Span>,
    pub opinion: Span,
    pub sentiment: Sentiment,
}

impl Quadruple {
    pub fn new(target: Span, aspect: Option<Span>, opinion: Span, sentiment: Sentiment) -> Self {
        Quadruple {
            target,
            aspect,
            opinion,
            sentiment,
        }
    }
}

/// Undirected dependency edge between two token indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DepEdge(pub usize, pub usize, pub String);

impl DepEdge {
    pub fn new(i: usize, j: usize, label: impl Into<String>) -> Self {
        DepEdge(i, j, label.into())
    }
}

/// A tokenized, syntactically annotated document with its gold quadruples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub lang: String,
    pub text: String,
    pub tokens: Vec<String>,
    /// Sentence boundaries over token indices; must partition `0..tokens.len()`.
    pub sentences: Vec<Span>,
    /// One POS tag per token.
    pub pos: Vec<String>,
    pub deps: Vec<DepEdge>,
    pub quadruples: Vec<Quadruple>,
}

impl Document {
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    /// Index of the sentence containing token `idx`, if any.
    pub fn sentence_of(&self, idx: usize) -> Option<usize> {
        self.sentences.iter().position(|s| s.contains(idx))
    }

    /// Gold quadruples as a set (duplicates collapsed).
    pub fn quad_set(&self) -> BTreeSet<Quadruple> {
        self.quadruples.iter().cloned().collect()
    }
}

/// Machine-readable validation failure codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    PosLenMismatch,
    SentencePartition,
    SpanEmpty,
    SpanOutOfRange,
    DepSelfLoop,
    DepOutOfRange,
}

impl ViolationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationCode::PosLenMismatch => "POS_LEN_MISMATCH",
            ViolationCode::SentencePartition => "SENTENCE_PARTITION",
            ViolationCode::SpanEmpty => "SPAN_EMPTY",
            ViolationCode::SpanOutOfRange => "SPAN_OUT_OF_RANGE",
            ViolationCode::DepSelfLoop => "DEP_SELF_LOOP",
            ViolationCode::DepOutOfRange => "DEP_OUT_OF_RANGE",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One invariant violation found by [`validate_document`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

/// All violations found in one document; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    fn push(&mut self, code: ViolationCode, detail: impl Into<String>) {
        self.violations.push(Violation {
            code,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", v.code, v.detail)?;
        }
        Ok(())
    }
}

fn check_span(report: &mut ValidationReport, span: Span, n: usize, what: &str) {
    if span.is_empty() {
        report.push(ViolationCode::SpanEmpty, format!("{what} {span} is empty"));
    } else if span.end > n {
        report.push(
            ViolationCode::SpanOutOfRange,
            format!("{what} {span} exceeds token count {n}"),
        );
    }
}

/// Reports every invariant violation in `doc`; a valid document yields an
/// empty report. Never fails: all problems are reported, not thrown.
pub fn validate_document(doc: &Document) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = doc.tokens.len();

    if doc.pos.len() != n {
        report.push(
            ViolationCode::PosLenMismatch,
            format!("pos length {} != token count {}", doc.pos.len(), n),
        );
    }

    // Sentences must tile 0..n in order without gaps or overlap.
    let mut cursor = 0usize;
    let mut ok = true;
    for s in &doc.sentences {
        if s.is_empty() || s.begin != cursor {
            ok = false;
            break;
        }
        cursor = s.end;
    }
    if ok && cursor != n {
        ok = false;
    }
    if !ok {
        report.push(
            ViolationCode::SentencePartition,
            format!("sentence spans do not partition [0,{n})"),
        );
    }

    for (k, e) in doc.deps.iter().enumerate() {
        if e.0 == e.1 {
            report.push(
                ViolationCode::DepSelfLoop,
                format!("dep edge {k} connects token {} to itself", e.0),
            );
        }
        if e.0 >= n || e.1 >= n {
            report.push(
                ViolationCode::DepOutOfRange,
                format!("dep edge {k} ({}, {}) out of range 0..{n}", e.0, e.1),
            );
        }
    }

    for (k, q) in doc.quadruples.iter().enumerate() {
        check_span(&mut report, q.target, n, &format!("quadruple {k} target"));
        if let Some(a) = q.aspect {
            check_span(&mut report, a, n, &format!("quadruple {k} aspect"));
        }
        check_span(&mut report, q.opinion, n, &format!("quadruple {k} opinion"));
    }

    report
}

/// Counting error for operations that require valid documents.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid document {doc_id}: {report}")]
    InvalidDocument {
        doc_id: String,
        report: ValidationReport,
    },
    #[error("corpus line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn require_valid(doc: &Document) -> Result<(), CorpusError> {
    let report = validate_document(doc);
    if report.is_valid() {
        Ok(())
    } else {
        Err(CorpusError::InvalidDocument {
            doc_id: doc.doc_id.clone(),
            report,
        })
    }
}

/// Aggregate corpus counts: documents, sentences, tokens, distinct entity
/// spans per role, distinct relation pairs, quadruples, sentiments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub sentence_count: usize,
    pub token_count: usize,
    /// Distinct annotated spans per role, keyed `T`/`A`/`O`.
    pub entity_counts: BTreeMap<String, usize>,
    /// Distinct relation pairs, keyed `TA`/`TO`/`AO`.
    pub relation_counts: BTreeMap<String, usize>,
    pub quad_count: usize,
    /// Quadruple counts keyed `pos`/`neg`.
    pub sentiment_counts: BTreeMap<String, usize>,
}

impl CorpusStats {
    fn zeroed() -> Self {
        let mut s = CorpusStats::default();
        for k in ["T", "A", "O"] {
            s.entity_counts.insert(k.to_string(), 0);
        }
        for k in ["TA", "TO", "AO"] {
            s.relation_counts.insert(k.to_string(), 0);
        }
        for k in ["pos", "neg"] {
            s.sentiment_counts.insert(k.to_string(), 0);
        }
        s
    }

    fn bump(map: &mut BTreeMap<String, usize>, key: &str, by: usize) {
        *map.entry(key.to_string()).or_insert(0) += by;
    }
}

/// Computes [`CorpusStats`] over a corpus of valid documents.
///
/// Entity counts are distinct spans per role within each document; relation
/// counts are distinct (span, span) pairs within each document, with
/// aspect-bearing pairs requiring the aspect to be present. Both sum over
/// documents, so stats are additive across disjoint corpora.
pub fn corpus_stats(corpus: &[Document]) -> Result<CorpusStats, CorpusError> {
    let mut stats = CorpusStats::zeroed();
    for doc in corpus {
        require_valid(doc)?;
        stats.doc_count += 1;
        stats.sentence_count += doc.sentences.len();
        stats.token_count += doc.tokens.len();

        let quads = doc.quad_set();
        let targets: BTreeSet<Span> = quads.iter().map(|q| q.target).collect();
        let aspects: BTreeSet<Span> = quads.iter().filter_map(|q| q.aspect).collect();
        let opinions: BTreeSet<Span> = quads.iter().map(|q| q.opinion).collect();
        let ta: BTreeSet<(Span, Span)> = quads
            .iter()
            .filter_map(|q| q.aspect.map(|a| (q.target, a)))
            .collect();
        let to: BTreeSet<(Span, Span)> = quads.iter().map(|q| (q.target, q.opinion)).collect();
        let ao: BTreeSet<(Span, Span)> = quads
            .iter()
            .filter_map(|q| q.aspect.map(|a| (a, q.opinion)))
            .collect();

        CorpusStats::bump(&mut stats.entity_counts, "T", targets.len());
        CorpusStats::bump(&mut stats.entity_counts, "A", aspects.len());
        CorpusStats::bump(&mut stats.entity_counts, "O", opinions.len());
        CorpusStats::bump(&mut stats.relation_counts, "TA", ta.len());
        CorpusStats::bump(&mut stats.relation_counts, "TO", to.len());
        CorpusStats::bump(&mut stats.relation_counts, "AO", ao.len());
        stats.quad_count += quads.len();
        for q in &quads {
            CorpusStats::bump(&mut stats.sentiment_counts, q.sentiment.as_str(), 1);
        }
    }
    Ok(stats)
}

/// Distributional analysis: document length and quadruple-count histograms
/// plus cross-sentence relation ratios.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub doc_length_histogram: BTreeMap<String, usize>,
    pub quad_count_histogram: BTreeMap<String, usize>,
    /// Fraction of relation pairs whose two entity heads fall in different
    /// sentences, keyed `TA`/`TO`/`AO`.
    pub cross_sentence_ratio: BTreeMap<String, f64>,
}

/// Document-length bin label: `<10`, then width-10 bins, capped at `100-139`.
pub fn doc_length_bin(len: usize) -> String {
    if len < 10 {
        "<10".to_string()
    } else if len >= 100 {
        "100-139".to_string()
    } else {
        let lo = (len / 10) * 10;
        format!("{}-{}", lo, lo + 9)
    }
}

/// Quadruple-count bin label: `0`, `1`..`9`, then `10+`.
pub fn quad_count_bin(count: usize) -> String {
    if count >= 10 {
        "10+".to_string()
    } else {
        count.to_string()
    }
}

fn doc_length_bins() -> Vec<String> {
    let mut bins = vec!["<10".to_string()];
    for lo in (10..100).step_by(10) {
        bins.push(format!("{}-{}", lo, lo + 9));
    }
    bins.push("100-139".to_string());
    bins
}

fn quad_count_bins() -> Vec<String> {
    let mut bins: Vec<String> = (0..10).map(|k| k.to_string()).collect();
    bins.push("10+".to_string());
    bins
}

/// Per-relation-type tallies of cross-sentence and total pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossSentenceCounts {
    pub cross: usize,
    pub total: usize,
}

impl CrossSentenceCounts {
    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.cross as f64 / self.total as f64
        }
    }
}

/// Tallies cross-sentence pairs per relation type over distinct pairs,
/// matching the counting convention of [`corpus_stats`].
pub fn cross_sentence_counts(
    corpus: &[Document],
) -> Result<BTreeMap<String, CrossSentenceCounts>, CorpusError> {
    let mut counts: BTreeMap<String, CrossSentenceCounts> = BTreeMap::new();
    for k in ["TA", "TO", "AO"] {
        counts.insert(k.to_string(), CrossSentenceCounts::default());
    }
    for doc in corpus {
        require_valid(doc)?;
        let quads = doc.quad_set();
        let mut pairs: BTreeMap<&str, BTreeSet<(Span, Span)>> = BTreeMap::new();
        for q in &quads {
            if let Some(a) = q.aspect {
                pairs.entry("TA").or_default().insert((q.target, a));
                pairs.entry("AO").or_default().insert((a, q.opinion));
            }
            pairs.entry("TO").or_default().insert((q.target, q.opinion));
        }
        for (kind, set) in pairs {
            let slot = counts.get_mut(kind).expect("fixed relation kinds");
            for (left, right) in set {
                slot.total += 1;
                if doc.sentence_of(left.head()) != doc.sentence_of(right.head()) {
                    slot.cross += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// Computes the [`AnalysisReport`] for a corpus of valid documents.
///
/// A relation is cross-sentence iff the head tokens (first tokens) of its
/// two entity spans lie in different sentence spans.
pub fn distribution_analysis(corpus: &[Document]) -> Result<AnalysisReport, CorpusError> {
    let mut report = AnalysisReport::default();
    for bin in doc_length_bins() {
        report.doc_length_histogram.insert(bin, 0);
    }
    for bin in quad_count_bins() {
        report.quad_count_histogram.insert(bin, 0);
    }

    for doc in corpus {
        require_valid(doc)?;
        *report
            .doc_length_histogram
            .entry(doc_length_bin(doc.tokens.len()))
            .or_insert(0) += 1;
        *report
            .quad_count_histogram
            .entry(quad_count_bin(doc.quad_set().len()))
            .or_insert(0) += 1;
    }

    let counts = cross_sentence_counts(corpus)?;
    for (kind, c) in counts {
        report.cross_sentence_ratio.insert(kind, c.ratio());
    }
    Ok(report)
}

/// Reads a JSONL corpus from a reader, one document per line.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(&line).map_err(|source| CorpusError::Parse {
                line: idx + 1,
                source,
            })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Writes a JSONL corpus, one document per line.
pub fn write_corpus<W: Write>(mut writer: W, corpus: &[Document]) -> Result<(), CorpusError> {
    for doc in corpus {
        let line = serde_json::to_string(doc).expect("document serializes");
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus_file(path: &std::path::Path) -> Result<Vec<Document>, CorpusError> {
    let file = std::fs::File::open(path)?;
    read_corpus(std::io::BufReader::new(file))
}

pub fn write_corpus_file(path: &std::path::Path, corpus: &[Document]) -> Result<(), CorpusError> {
    let file = std::fs::File::create(path)?;
    write_corpus(std::io::BufWriter::new(file), corpus)
}

/// The six-token worked example used throughout the test suite: one
/// two-token aspect between a single-token target and opinion.
pub fn example_document() -> Document {
    Document {
        doc_id: "example-1".to_string(),
        lang: "uz".to_string(),
        text: "Bu o'yin interfeys dizayni juda qulay".to_string(),
        tokens: ["Bu", "o'yin", "interfeys", "dizayni", "juda", "qulay"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        sentences: vec![Span::new(0, 6)],
        pos: ["DET", "NOUN", "NOUN", "NOUN", "ADV", "ADJ"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        deps: vec![
            DepEdge::new(0, 1, "det"),
            DepEdge::new(1, 5, "nsubj"),
            DepEdge::new(2, 3, "flat"),
            DepEdge::new(3, 1, "nmod"),
            DepEdge::new(4, 5, "advmod"),
        ],
        quadruples: vec![Quadruple::new(
            Span::new(1, 2),
            Some(Span::new(2, 4)),
            Span::new(5, 6),
            Sentiment::Pos,
        )],
    }
}
