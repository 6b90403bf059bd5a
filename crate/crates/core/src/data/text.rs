//! Unigram tokenization, vocabulary construction and TF-IDF.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SparseVec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ENGLISH_STOP_WORDS_ID: &str = "english-v1";

// Fixed list; changing it requires bumping ENGLISH_STOP_WORDS_ID.
const ENGLISH_STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves", "also", "s", "t", "don", "ll", "re", "ve", "m", "d", "get", "got", "us",
    "among", "upon", "since", "whether", "yet", "either", "neither", "every", "another", "many",
    "much", "may",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords {
    id: String,
    words: HashSet<String>,
}

impl StopWords {
    pub fn english() -> Self {
        Self {
            id: ENGLISH_STOP_WORDS_ID.to_string(),
            words: ENGLISH_STOP_WORDS.iter().map(|w| w.to_string()).collect(),
        }
    }

    pub fn none() -> Self {
        Self { id: "none".into(), words: HashSet::new() }
    }

    pub fn custom<I, S>(id: impl Into<String>, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            id: id.into(),
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

/// A lowercased token and its byte range in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
    pub token: String,
}

/// Maximal alphanumeric runs, lowercased, with byte offsets.
pub fn token_spans(text: &str) -> Vec<TokenSpan> {
    let mut out = Vec::new();
    let mut start = None;
    for (pos, ch) in text.char_indices() {
        match (ch.is_alphanumeric(), start) {
            (true, None) => start = Some(pos),
            (false, Some(s)) => {
                out.push(TokenSpan { start: s, end: pos, token: text[s..pos].to_lowercase() });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(TokenSpan { start: s, end: text.len(), token: text[s..].to_lowercase() });
    }
    out
}

pub fn tokenize(text: &str) -> Vec<String> {
    token_spans(text).into_iter().map(|t| t.token).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    document_frequency: Vec<usize>,
    n_documents: usize,
    stop_word_list_id: String,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Vocabulary over a fixed term list with precomputed document counts.
    pub(crate) fn from_parts(
        terms: Vec<String>,
        document_frequency: Vec<usize>,
        n_documents: usize,
        stop_word_list_id: String,
    ) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { terms, document_frequency, n_documents, stop_word_list_id, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn document_frequency(&self, index: usize) -> usize {
        self.document_frequency[index]
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    pub fn stop_word_list_id(&self) -> &str {
        &self.stop_word_list_id
    }

    /// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf<T: Scalar>(&self, index: usize) -> T {
        smooth_idf(self.n_documents, self.document_frequency[index])
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: Self = serde_json::from_str(s)?;
        Ok(Self::from_parts(v.terms, v.document_frequency, v.n_documents, v.stop_word_list_id))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("vocabulary serializes")
    }
}

pub(crate) fn smooth_idf<T: Scalar>(n_documents: usize, df: usize) -> T {
    (T::of_usize(1 + n_documents) / T::of_usize(1 + df)).ln() + T::one()
}

/// Indices follow first appearance across the corpus.
pub fn build_vocabulary<S: AsRef<str>>(corpus: &[S], stop_words: &StopWords) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut terms: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut df: Vec<usize> = Vec::new();
    for doc in corpus {
        let mut seen = HashSet::new();
        for tok in tokenize(doc.as_ref()) {
            if stop_words.contains(&tok) {
                continue;
            }
            let idx = match index.get(&tok) {
                Some(&i) => i,
                None => {
                    let i = terms.len();
                    index.insert(tok.clone(), i);
                    terms.push(tok.clone());
                    df.push(0);
                    i
                }
            };
            if seen.insert(idx) {
                df[idx] += 1;
            }
        }
    }
    Ok(Vocabulary::from_parts(terms, df, corpus.len(), stop_words.id().to_string()))
}

/// Raw counts times smoothed idf, then L2-normalised. Unknown terms are
/// ignored and documents without known terms give an empty row.
pub fn vectorize_tfidf<T: Scalar, S: AsRef<str>>(corpus: &[S], vocab: &Vocabulary) -> Vec<SparseVec<T>> {
    corpus
        .iter()
        .map(|doc| {
            let mut counts: HashMap<usize, usize> = HashMap::new();
            for tok in tokenize(doc.as_ref()) {
                if let Some(i) = vocab.index_of(&tok) {
                    *counts.entry(i).or_default() += 1;
                }
            }
            tfidf_row(counts, |i| vocab.idf(i))
        })
        .collect()
}

pub(crate) fn tfidf_row<T: Scalar>(
    counts: HashMap<usize, usize>,
    idf: impl Fn(usize) -> T,
) -> SparseVec<T> {
    let mut pairs: Vec<(usize, T)> =
        counts.into_iter().map(|(i, c)| (i, T::of_usize(c) * idf(i))).collect();
    // Fixed summation order keeps rows bit-identical across runs.
    pairs.sort_unstable_by_key(|&(i, _)| i);
    let norm = pairs.iter().fold(T::zero(), |acc, &(_, v)| acc + v * v).sqrt();
    if norm == T::zero() {
        return SparseVec::empty();
    }
    SparseVec::from_pairs(pairs.into_iter().map(|(i, v)| (i, v / norm)).collect())
        .expect("count map has unique keys")
}

/// Raw documents with labels, as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TextCorpus {
    pub ids: Vec<String>,
    pub texts: Vec<String>,
    pub labels: Vec<u8>,
}

fn parse_label(raw: &str) -> Result<u8> {
    match raw.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::InvalidDataset(format!("label `{other}` is not 0 or 1"))),
    }
}

/// Two-column CSV with header `text,label`; an optional `id` column is used
/// when present.
pub fn load_text_csv(path: impl AsRef<Path>) -> Result<TextCorpus> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let text_col = col("text")?;
    let label_col = col("label")?;
    let id_col = headers.iter().position(|h| h == "id");
    let mut corpus = TextCorpus { ids: Vec::new(), texts: Vec::new(), labels: Vec::new() };
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        corpus.texts.push(rec.get(text_col).unwrap_or_default().to_string());
        corpus.labels.push(parse_label(rec.get(label_col).unwrap_or_default())?);
        corpus.ids.push(match id_col {
            Some(c) => rec.get(c).unwrap_or_default().to_string(),
            None => format!("doc-{row:05}"),
        });
    }
    Ok(corpus)
}

/// Directory with subdirectories `0/` and `1/` of UTF-8 text files. Ids are
/// `<label>/<file name>`, ordered by label then file name.
pub fn load_text_dir(dir: impl AsRef<Path>) -> Result<TextCorpus> {
    let mut corpus = TextCorpus { ids: Vec::new(), texts: Vec::new(), labels: Vec::new() };
    for label in [0u8, 1] {
        let sub = dir.as_ref().join(label.to_string());
        if !sub.is_dir() {
            return Err(Error::InvalidDataset(format!("missing directory {}", sub.display())));
        }
        let mut files: Vec<PathBuf> = fs::read_dir(&sub)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for f in files {
            let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            corpus.ids.push(format!("{label}/{name}"));
            corpus.texts.push(fs::read_to_string(&f)?);
            corpus.labels.push(label);
        }
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_first_appearance_order() {
        let v = build_vocabulary(&["good hotel", "bad hotel"], &StopWords::none()).unwrap();
        assert_eq!(v.terms(), &["good", "hotel", "bad"]);
        assert_eq!(v.index_of("bad"), Some(2));
        let df: Vec<usize> = (0..3).map(|i| v.document_frequency(i)).collect();
        assert_eq!(df, vec![1, 2, 1]);
    }

    #[test]
    fn stop_words_are_excluded() {
        let v = build_vocabulary(&["the hotel"], &StopWords::custom("t", ["the"])).unwrap();
        assert_eq!(v.terms(), &["hotel"]);
        assert!(StopWords::english().contains("the"));
        assert!((140..=160).contains(&StopWords::english().len()));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let empty: [&str; 0] = [];
        assert!(matches!(build_vocabulary(&empty, &StopWords::none()), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn tokenizer_splits_on_non_alphanumeric_runs() {
        assert_eq!(tokenize("Great-Location!! 10/10, café"), vec!["great", "location", "10", "10", "café"]);
        let spans = token_spans("Hi, you");
        assert_eq!((spans[1].start, spans[1].end), (4, 7));
    }

    #[test]
    fn single_document_tfidf_hand_evaluated() {
        let corpus = ["good hotel"];
        let v = build_vocabulary(&corpus, &StopWords::none()).unwrap();
        assert_eq!(v.idf::<f64>(0), 1.0);
        let rows = vectorize_tfidf::<f64, _>(&corpus, &v);
        let expected = 1.0 / 2f64.sqrt();
        for &x in rows[0].values() {
            assert!((x - expected).abs() < 1e-12);
        }
        assert_eq!((rows[0].values()[0] * 1e5).round(), 70711.0);
    }

    #[test]
    fn tfidf_weights_rare_terms_higher() {
        let corpus = ["good hotel hotel", "bad hotel"];
        let v = build_vocabulary(&corpus, &StopWords::none()).unwrap();
        // good: tf 1, idf ln(3/2)+1; hotel: tf 2, idf 1.
        let g = (1.5f64).ln() + 1.0;
        let h = 2.0;
        let n = (g * g + h * h).sqrt();
        let rows = vectorize_tfidf::<f64, _>(&corpus, &v);
        assert!((rows[0].values()[0] - g / n).abs() < 1e-12);
        assert!((rows[0].values()[1] - h / n).abs() < 1e-12);
    }

    #[test]
    fn out_of_vocabulary_document_gives_empty_row() {
        let v = build_vocabulary(&["good hotel"], &StopWords::none()).unwrap();
        let rows = vectorize_tfidf::<f64, _>(&["zzz qqq", ""], &v);
        assert!(rows[0].is_empty() && rows[1].is_empty());
    }

    #[test]
    fn identical_documents_identical_rows() {
        let corpus = ["nice clean room", "nice clean room", "dirty room"];
        let v = build_vocabulary(&corpus, &StopWords::english()).unwrap();
        let rows = vectorize_tfidf::<f64, _>(&corpus, &v);
        assert_eq!(rows[0], rows[1]);
    }

    #[test]
    fn vocabulary_json_round_trip_restores_index() {
        let v = build_vocabulary(&["a b c", "c d"], &StopWords::none()).unwrap();
        let back = Vocabulary::from_json(&v.to_json()).unwrap();
        assert_eq!(back.index_of("d"), Some(3));
        assert_eq!(back, v);
    }

    #[test]
    fn text_csv_loader() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        fs::write(&p, "text,label\n\"great, stay\",1\nawful,0\n").unwrap();
        let c = load_text_csv(&p).unwrap();
        assert_eq!(c.texts[0], "great, stay");
        assert_eq!(c.labels, vec![1, 0]);
        assert_eq!(c.ids[1], "doc-00001");
        fs::write(&p, "text,label\nx,2\n").unwrap();
        assert!(load_text_csv(&p).is_err());
    }

    #[test]
    fn text_dir_loader() {
        let dir = tempfile::tempdir().unwrap();
        for (l, name, body) in [(0, "b.txt", "fake"), (1, "a.txt", "real"), (0, "a.txt", "fake2")] {
            let sub = dir.path().join(l.to_string());
            fs::create_dir_all(&sub).unwrap();
            fs::write(sub.join(name), body).unwrap();
        }
        let c = load_text_dir(dir.path()).unwrap();
        assert_eq!(c.ids, vec!["0/a.txt", "0/b.txt", "1/a.txt"]);
        assert_eq!(c.labels, vec![0, 0, 1]);
    }
}
