//! Seeded synthetic corpus generator.
//!
//! Generated documents are valid, grid-representable by construction, and
//! carry a learnable signal: role membership and sentiment are functions of
//! token identity, and the planted dependency tree contains the
//! target-aspect-opinion linking edges. The generator tallies its planting
//! decisions into a [`Bookkeeping`] record so corpus statistics and
//! cross-sentence ratios can be verified against an independent count.
//!
//! Layout rules that guarantee representability: all entity spans are
//! disjoint, aspects and opinions are fresh per quadruple (targets may be
//! shared within a document), so no two quadruples share a grid cell and no
//! unintended `rel` chain can form.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    CorpusStats, CrossSentenceCounts, DepEdge, Document, Quadruple, Sentiment, Span,
};

/// The fixed POS tag set used for generated tokens.
pub const POS_TAGS: [&str; 12] = [
    "NOUN", "PROPN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "CONJ", "PART", "PUNCT",
];

/// Generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub doc_count: usize,
    /// Vocabulary sizes per token role.
    pub target_vocab: usize,
    pub aspect_vocab: usize,
    pub opinion_vocab: usize,
    pub filler_vocab: usize,
    /// Inclusive document length range in tokens.
    pub len_range: (usize, usize),
    /// Inclusive quadruples-per-document range. Draws are clamped down when
    /// the length range cannot host them.
    pub quads_range: (usize, usize),
    /// Desired fraction of target-opinion links whose endpoints lie in
    /// different sentences; met by quota when document structure allows.
    pub cross_sentence_frac: f64,
    /// Probability that a quadruple has no aspect.
    pub null_aspect_frac: f64,
    /// Maximum entity span length in tokens.
    pub max_span_len: usize,
    pub lang: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            doc_count: 100,
            target_vocab: 30,
            aspect_vocab: 50,
            opinion_vocab: 40,
            filler_vocab: 80,
            len_range: (10, 40),
            quads_range: (1, 3),
            cross_sentence_frac: 0.25,
            null_aspect_frac: 0.15,
            max_span_len: 2,
            lang: "syn".to_string(),
        }
    }
}

/// Ground truth tallied while planting, for verification against the
/// corpus-level statistics recomputed from the emitted documents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bookkeeping {
    pub stats: CorpusStats,
    pub cross_sentence: BTreeMap<String, CrossSentenceCounts>,
}

/// A generated corpus together with its planted ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    pub bookkeeping: Bookkeeping,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("empty range for {name}")]
    EmptyRange { name: &'static str },
    #[error("fraction {name} must lie in [0, 1]")]
    FractionOutOfRange { name: &'static str },
    #[error("vocabulary {name} too small: need at least {min}")]
    VocabTooSmall { name: &'static str, min: usize },
    #[error("max_span_len must be at least 1")]
    ZeroSpanLen,
    #[error(
        "infeasible spec: {quads} quadruple(s) need at least {needed} tokens \
         but the length range tops out at {len_max}"
    )]
    Infeasible {
        quads: usize,
        needed: usize,
        len_max: usize,
    },
}

impl SynthSpec {
    fn validate(&self) -> Result<(), GenError> {
        if self.len_range.0 > self.len_range.1 || self.len_range.0 == 0 {
            return Err(GenError::EmptyRange { name: "len_range" });
        }
        if self.quads_range.0 > self.quads_range.1 {
            return Err(GenError::EmptyRange { name: "quads_range" });
        }
        for (name, v) in [
            ("cross_sentence_frac", self.cross_sentence_frac),
            ("null_aspect_frac", self.null_aspect_frac),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(GenError::FractionOutOfRange { name });
            }
        }
        if self.target_vocab == 0 {
            return Err(GenError::VocabTooSmall {
                name: "target_vocab",
                min: 1,
            });
        }
        if self.aspect_vocab == 0 {
            return Err(GenError::VocabTooSmall {
                name: "aspect_vocab",
                min: 1,
            });
        }
        if self.opinion_vocab < 2 {
            return Err(GenError::VocabTooSmall {
                name: "opinion_vocab",
                min: 2,
            });
        }
        if self.filler_vocab == 0 {
            return Err(GenError::VocabTooSmall {
                name: "filler_vocab",
                min: 1,
            });
        }
        if self.max_span_len == 0 {
            return Err(GenError::ZeroSpanLen);
        }
        let needed = min_tokens_for(self.quads_range.0, self.max_span_len);
        if needed > self.len_range.1 {
            return Err(GenError::Infeasible {
                quads: self.quads_range.0,
                needed,
                len_max: self.len_range.1,
            });
        }
        Ok(())
    }
}

/// Worst-case token budget for `q` quadruples: up to two target spans plus
/// one aspect and one opinion per quadruple (spans shrink to one token when
/// space is tight), plus slack for sentence structure.
fn min_tokens_for(q: usize, max_span_len: usize) -> usize {
    2 * max_span_len + 2 * q + 2
}

struct Placement {
    /// Free-token mask, indexed by absolute token position.
    free: Vec<bool>,
    sentences: Vec<Span>,
}

impl Placement {
    fn new(n: usize, sentences: Vec<Span>) -> Self {
        Placement {
            free: vec![true; n],
            sentences,
        }
    }

    fn sentence_of(&self, idx: usize) -> usize {
        self.sentences
            .iter()
            .position(|s| s.contains(idx))
            .expect("token inside a sentence")
    }

    /// Candidate start positions for a `len`-token span inside sentence `s`.
    fn starts_in(&self, s: usize, len: usize) -> Vec<usize> {
        let sent = self.sentences[s];
        if sent.len() < len {
            return Vec::new();
        }
        (sent.begin..=sent.end - len)
            .filter(|&start| (start..start + len).all(|t| self.free[t]))
            .collect()
    }

    /// Places a span of up to `want_len` tokens in one of `sentences`
    /// (tried in the given order), shrinking before giving up.
    fn place(
        &mut self,
        rng: &mut ChaCha8Rng,
        sentence_order: &[usize],
        want_len: usize,
    ) -> Option<Span> {
        for len in (1..=want_len).rev() {
            for &s in sentence_order {
                let starts = self.starts_in(s, len);
                if let Some(&start) = starts.as_slice().choose(rng) {
                    for t in start..start + len {
                        self.free[t] = false;
                    }
                    return Some(Span::new(start, start + len));
                }
            }
        }
        None
    }
}

fn partition_sentences(rng: &mut ChaCha8Rng, n: usize) -> Vec<Span> {
    if n < 8 {
        return vec![Span::new(0, n)];
    }
    let mut sentences = Vec::new();
    let mut begin = 0usize;
    let mut remaining = n;
    while remaining >= 12 {
        let len = rng.gen_range(4..=8usize);
        sentences.push(Span::new(begin, begin + len));
        begin += len;
        remaining -= len;
    }
    if remaining >= 8 {
        let first = rng.gen_range(4..=remaining - 4);
        sentences.push(Span::new(begin, begin + first));
        sentences.push(Span::new(begin + first, n));
    } else {
        sentences.push(Span::new(begin, n));
    }
    sentences
}

struct VocabDraw<'a> {
    spec: &'a SynthSpec,
}

impl VocabDraw<'_> {
    fn target(&self, rng: &mut ChaCha8Rng) -> String {
        format!("app{}", rng.gen_range(0..self.spec.target_vocab))
    }

    fn aspect(&self, rng: &mut ChaCha8Rng) -> String {
        format!("feat{}", rng.gen_range(0..self.spec.aspect_vocab))
    }

    fn opinion(&self, rng: &mut ChaCha8Rng, sentiment: Sentiment) -> String {
        let half = self.spec.opinion_vocab / 2;
        match sentiment {
            Sentiment::Pos => format!("good{}", rng.gen_range(0..self.spec.opinion_vocab - half)),
            Sentiment::Neg => format!("bad{}", rng.gen_range(0..half)),
        }
    }

    fn filler(&self, rng: &mut ChaCha8Rng) -> String {
        format!("w{}", rng.gen_range(0..self.spec.filler_vocab))
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Generates a deterministic corpus with planted ground truth.
pub fn synthesize_corpus(spec: &SynthSpec, seed: u64) -> Result<SynthCorpus, GenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = VocabDraw { spec };

    let mut documents = Vec::with_capacity(spec.doc_count);
    let mut book = Bookkeeping::default();
    for k in ["T", "A", "O"] {
        book.stats.entity_counts.insert(k.to_string(), 0);
    }
    for k in ["TA", "TO", "AO"] {
        book.stats.relation_counts.insert(k.to_string(), 0);
        book.cross_sentence
            .insert(k.to_string(), CrossSentenceCounts::default());
    }
    for k in ["pos", "neg"] {
        book.stats.sentiment_counts.insert(k.to_string(), 0);
    }

    // Corpus-level quota so the planted cross-sentence TO fraction tracks
    // the requested fraction as closely as the documents allow.
    let mut to_links = 0usize;
    let mut cross_links = 0usize;

    for doc_idx in 0..spec.doc_count {
        let q_cap = {
            // Largest quad count the length range can always host.
            let mut q = spec.quads_range.1;
            while q > spec.quads_range.0 && min_tokens_for(q, spec.max_span_len) > spec.len_range.1
            {
                q -= 1;
            }
            q
        };
        let q = rng.gen_range(spec.quads_range.0..=q_cap);
        let len_min = spec
            .len_range
            .0
            .max(min_tokens_for(q, spec.max_span_len))
            .min(spec.len_range.1);
        let n = rng.gen_range(len_min..=spec.len_range.1);

        let sentences = partition_sentences(&mut rng, n);
        let mut placement = Placement::new(n, sentences.clone());
        let sentence_ids: Vec<usize> = (0..sentences.len()).collect();

        // Shared target pool: one or two target spans per document.
        let pool_size = if q > 2 && rng.gen_bool(0.5) { 2 } else { 1 };
        let mut target_pool: Vec<Span> = Vec::new();
        for _ in 0..pool_size {
            let mut order = sentence_ids.clone();
            order.shuffle(&mut rng);
            let want = rng.gen_range(1..=spec.max_span_len);
            let span = placement
                .place(&mut rng, &order, want)
                .expect("target placement fits by the feasibility bound");
            target_pool.push(span);
        }

        let mut quads: Vec<Quadruple> = Vec::with_capacity(q);
        let mut doc_to_pairs = 0usize;
        let mut doc_ta_pairs = 0usize;
        let mut doc_ao_pairs = 0usize;
        for _ in 0..q {
            let target = *target_pool.as_slice().choose(&mut rng).expect("nonempty pool");
            let t_sent = placement.sentence_of(target.head());

            // Quota decision: plant a cross-sentence target-opinion link when
            // behind the requested fraction and the document can host one.
            let want_cross = {
                let target_cum =
                    (spec.cross_sentence_frac * (to_links + 1) as f64).round() as usize;
                cross_links < target_cum && sentences.len() > 1
            };
            // Preferred sentences first, the rest as fallback so placement
            // never starves.
            let mut others: Vec<usize> =
                sentence_ids.iter().copied().filter(|&s| s != t_sent).collect();
            others.shuffle(&mut rng);
            let opinion_order: Vec<usize> = if want_cross {
                others.iter().copied().chain(std::iter::once(t_sent)).collect()
            } else {
                std::iter::once(t_sent).chain(others.iter().copied()).collect()
            };

            let sentiment = if rng.gen_bool(0.5) {
                Sentiment::Pos
            } else {
                Sentiment::Neg
            };
            let want = rng.gen_range(1..=spec.max_span_len);
            let opinion = placement
                .place(&mut rng, &opinion_order, want)
                .expect("opinion placement fits by the feasibility bound");

            let has_aspect = !rng.gen_bool(spec.null_aspect_frac);
            let aspect = if has_aspect {
                let mut order = sentence_ids.clone();
                order.shuffle(&mut rng);
                let want = rng.gen_range(1..=spec.max_span_len);
                Some(
                    placement
                        .place(&mut rng, &order, want)
                        .expect("aspect placement fits by the feasibility bound"),
                )
            } else {
                None
            };

            let o_sent = placement.sentence_of(opinion.head());
            let is_cross = o_sent != t_sent;
            to_links += 1;
            doc_to_pairs += 1;
            if is_cross {
                cross_links += 1;
            }
            {
                let slot = book.cross_sentence.get_mut("TO").unwrap();
                slot.total += 1;
                if is_cross {
                    slot.cross += 1;
                }
            }
            if let Some(a) = aspect {
                let a_sent = placement.sentence_of(a.head());
                doc_ta_pairs += 1;
                doc_ao_pairs += 1;
                let ta = book.cross_sentence.get_mut("TA").unwrap();
                ta.total += 1;
                if a_sent != t_sent {
                    ta.cross += 1;
                }
                let ao = book.cross_sentence.get_mut("AO").unwrap();
                ao.total += 1;
                if o_sent != a_sent {
                    ao.cross += 1;
                }
            }

            quads.push(Quadruple::new(target, aspect, opinion, sentiment));
        }

        // Surfaces and POS: role-identifiable tokens, sentiment encoded in
        // the opinion vocabulary half.
        let mut tokens: Vec<Option<String>> = vec![None; n];
        let mut pos: Vec<Option<String>> = vec![None; n];
        let mut fill_role = |span: Span, toks: &mut Vec<Option<String>>, ps: &mut Vec<Option<String>>, role: u8, sentiment: Sentiment, rng: &mut ChaCha8Rng| {
            for t in span.begin..span.end {
                let (surface, tag) = match role {
                    0 => (vocab.target(rng), "PROPN"),
                    1 => (vocab.aspect(rng), "NOUN"),
                    _ => (vocab.opinion(rng, sentiment), "ADJ"),
                };
                toks[t] = Some(surface);
                ps[t] = Some(tag.to_string());
            }
        };
        let mut seen_targets: Vec<Span> = Vec::new();
        for quad in &quads {
            if !seen_targets.contains(&quad.target) {
                seen_targets.push(quad.target);
                fill_role(quad.target, &mut tokens, &mut pos, 0, quad.sentiment, &mut rng);
            }
            if let Some(a) = quad.aspect {
                fill_role(a, &mut tokens, &mut pos, 1, quad.sentiment, &mut rng);
            }
            fill_role(quad.opinion, &mut tokens, &mut pos, 2, quad.sentiment, &mut rng);
        }
        for t in 0..n {
            if tokens[t].is_none() {
                tokens[t] = Some(vocab.filler(&mut rng));
                pos[t] = Some(POS_TAGS[rng.gen_range(0..POS_TAGS.len())].to_string());
            }
        }
        let tokens: Vec<String> = tokens.into_iter().map(|t| t.unwrap()).collect();
        let pos: Vec<String> = pos.into_iter().map(|t| t.unwrap()).collect();

        // Dependency tree: span-internal chains and quadruple linking edges
        // first (these always form a forest), then random joins to a
        // spanning tree.
        let mut deps: Vec<DepEdge> = Vec::new();
        let mut sets = DisjointSets::new(n);
        let mut add_edge = |deps: &mut Vec<DepEdge>, sets: &mut DisjointSets, i: usize, j: usize, label: &str| {
            if sets.union(i, j) {
                deps.push(DepEdge::new(i, j, label));
            }
        };
        let mut all_spans: Vec<Span> = seen_targets.clone();
        for quad in &quads {
            if let Some(a) = quad.aspect {
                all_spans.push(a);
            }
            all_spans.push(quad.opinion);
        }
        for span in &all_spans {
            for t in span.begin..span.end.saturating_sub(1) {
                add_edge(&mut deps, &mut sets, t, t + 1, "flat");
            }
        }
        for quad in &quads {
            match quad.aspect {
                Some(a) => {
                    add_edge(&mut deps, &mut sets, quad.target.head(), a.head(), "nmod");
                    add_edge(&mut deps, &mut sets, a.head(), quad.opinion.head(), "amod");
                }
                None => {
                    add_edge(
                        &mut deps,
                        &mut sets,
                        quad.target.head(),
                        quad.opinion.head(),
                        "nsubj",
                    );
                }
            }
        }
        let mut order: Vec<usize> = (1..n).collect();
        order.shuffle(&mut rng);
        for t in order {
            let anchor = rng.gen_range(0..t);
            add_edge(&mut deps, &mut sets, t, anchor, "dep");
        }
        debug_assert_eq!(deps.len(), n.saturating_sub(1));

        // Bookkeeping tallies from planting decisions.
        book.stats.doc_count += 1;
        book.stats.sentence_count += sentences.len();
        book.stats.token_count += n;
        *book.stats.entity_counts.get_mut("T").unwrap() += seen_targets.len();
        let aspect_count = quads.iter().filter(|q| q.aspect.is_some()).count();
        *book.stats.entity_counts.get_mut("A").unwrap() += aspect_count;
        *book.stats.entity_counts.get_mut("O").unwrap() += quads.len();
        *book.stats.relation_counts.get_mut("TA").unwrap() += doc_ta_pairs;
        *book.stats.relation_counts.get_mut("TO").unwrap() += doc_to_pairs;
        *book.stats.relation_counts.get_mut("AO").unwrap() += doc_ao_pairs;
        book.stats.quad_count += quads.len();
        for quad in &quads {
            *book
                .stats
                .sentiment_counts
                .get_mut(quad.sentiment.as_str())
                .unwrap() += 1;
        }

        let text = tokens.join(" ");
        let doc = Document {
            doc_id: format!("syn-{seed}-{doc_idx:05}"),
            lang: spec.lang.clone(),
            text,
            tokens,
            sentences,
            pos,
            deps,
            quadruples: quads,
        };
        debug_assert!(crate::corpus::validate_document(&doc).is_valid());
        debug_assert!(crate::grid::check_representable(&doc).is_ok());
        documents.push(doc);
    }

    Ok(SynthCorpus {
        documents,
        bookkeeping: book,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{corpus_stats, cross_sentence_counts, validate_document};
    use crate::grid::check_representable;

    fn small_spec() -> SynthSpec {
        SynthSpec {
            doc_count: 40,
            len_range: (10, 30),
            quads_range: (1, 3),
            ..SynthSpec::default()
        }
    }

    #[test]
    fn zero_documents_yield_empty_corpus() {
        let spec = SynthSpec {
            doc_count: 0,
            ..small_spec()
        };
        let corpus = synthesize_corpus(&spec, 7).unwrap();
        assert!(corpus.documents.is_empty());
        assert_eq!(corpus.bookkeeping.stats.doc_count, 0);
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let spec = small_spec();
        let a = synthesize_corpus(&spec, 7).unwrap();
        let b = synthesize_corpus(&spec, 7).unwrap();
        assert_eq!(a, b);
        let bytes_a = serde_json::to_vec(&a.documents).unwrap();
        let bytes_b = serde_json::to_vec(&b.documents).unwrap();
        assert_eq!(bytes_a, bytes_b);
        let c = synthesize_corpus(&spec, 8).unwrap();
        assert_ne!(a.documents, c.documents);
    }

    #[test]
    fn all_documents_valid_and_representable() {
        let spec = SynthSpec {
            doc_count: 100,
            len_range: (10, 60),
            quads_range: (1, 6),
            ..SynthSpec::default()
        };
        let corpus = synthesize_corpus(&spec, 7).unwrap();
        assert_eq!(corpus.documents.len(), 100);
        for doc in &corpus.documents {
            assert!(validate_document(doc).is_valid(), "{}", doc.doc_id);
            let rep = check_representable(doc);
            assert!(rep.is_ok(), "{}: {:?}", doc.doc_id, rep.conflicts);
        }
    }

    #[test]
    fn stats_match_planted_bookkeeping() {
        let corpus = synthesize_corpus(&small_spec(), 7).unwrap();
        let stats = corpus_stats(&corpus.documents).unwrap();
        assert_eq!(stats, corpus.bookkeeping.stats);
    }

    #[test]
    fn cross_sentence_counts_match_bookkeeping() {
        let corpus = synthesize_corpus(&small_spec(), 11).unwrap();
        let counts = cross_sentence_counts(&corpus.documents).unwrap();
        assert_eq!(counts, corpus.bookkeeping.cross_sentence);
    }

    #[test]
    fn cross_sentence_quota_is_exact_when_divisible() {
        // 100 docs x exactly 2 quads = 200 TO links; 30% = 60 exactly.
        let spec = SynthSpec {
            doc_count: 100,
            len_range: (14, 40),
            quads_range: (2, 2),
            cross_sentence_frac: 0.3,
            ..SynthSpec::default()
        };
        let corpus = synthesize_corpus(&spec, 7).unwrap();
        let to = corpus.bookkeeping.cross_sentence["TO"];
        assert_eq!(to.total, 200);
        assert_eq!(to.cross, 60);
        let counts = cross_sentence_counts(&corpus.documents).unwrap();
        assert_eq!(counts["TO"].ratio(), 0.30);
    }

    #[test]
    fn dependency_edges_form_a_spanning_tree() {
        let corpus = synthesize_corpus(&small_spec(), 3).unwrap();
        for doc in &corpus.documents {
            let n = doc.tokens.len();
            assert_eq!(doc.deps.len(), n - 1, "{}", doc.doc_id);
            let mut sets = DisjointSets::new(n);
            for e in &doc.deps {
                assert!(sets.union(e.0, e.1), "cycle in {}", doc.doc_id);
            }
            let root = sets.find(0);
            assert!((0..n).all(|t| sets.find(t) == root), "{}", doc.doc_id);
        }
    }

    #[test]
    fn infeasible_spec_is_rejected() {
        let spec = SynthSpec {
            len_range: (4, 6),
            quads_range: (4, 6),
            ..SynthSpec::default()
        };
        let err = synthesize_corpus(&spec, 1).unwrap_err();
        assert!(matches!(err, GenError::Infeasible { .. }), "{err}");
    }

    #[test]
    fn bad_fraction_is_rejected() {
        let spec = SynthSpec {
            cross_sentence_frac: 1.5,
            ..small_spec()
        };
        assert!(matches!(
            synthesize_corpus(&spec, 1),
            Err(GenError::FractionOutOfRange { .. })
        ));
    }

    #[test]
    fn pos_tags_come_from_the_fixed_set() {
        let corpus = synthesize_corpus(&small_spec(), 5).unwrap();
        for doc in &corpus.documents {
            for tag in &doc.pos {
                assert!(POS_TAGS.contains(&tag.as_str()), "unexpected tag {tag}");
            }
        }
    }
}
