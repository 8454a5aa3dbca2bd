//! Vocabulary, tokenizer, and the query/product text rendering.
//!
//! Words are lowercased and split on whitespace and punctuation. In-vocabulary
//! words map directly; other words fall back to a greedy longest-match over
//! in-vocabulary substrings, with unmatched residue collapsed into `[UNK]`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;

use crate::corpus::{month_day, CorpusBundle, Product, MAX_TEXT_ATTRIBUTES};
use crate::error::{Error, Result};
use crate::util;

pub const SEP: &str = "[SEP]";
pub const UNK: &str = "[UNK]";
pub const SEP_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

/// Separator used between rendered text segments.
pub const SEGMENT_JOIN: &str = " [SEP] ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
    min_freq: usize,
}

impl Vocabulary {
    /// Builds from an explicit token list (specials are prepended if absent).
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary {
            ids: HashMap::new(),
            tokens: Vec::new(),
            min_freq: 1,
        };
        vocab.push(SEP.to_string());
        vocab.push(UNK.to_string());
        for t in tokens {
            vocab.push(t.into());
        }
        vocab
    }

    fn push(&mut self, token: String) {
        if !self.ids.contains_key(&token) {
            self.ids.insert(token.clone(), self.tokens.len() as u32);
            self.tokens.push(token);
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    /// Stable hash of the token list, used to tie checkpoints to a vocabulary.
    pub fn fingerprint(&self) -> u64 {
        util::hash64(self.tokens.join("\n").as_bytes())
    }

    /// One token per line; line number is the id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = self.tokens.join("\n");
        body.push('\n');
        fs::write(path, body)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let lines: Vec<&str> = body.lines().collect();
        if lines.len() < 2 || lines[0] != SEP || lines[1] != UNK {
            return Err(Error::Artifact {
                path: path.to_path_buf(),
                message: "vocabulary must start with [SEP] and [UNK]".into(),
            });
        }
        let vocab = Vocabulary::from_tokens(lines[2..].iter().copied());
        if vocab.len() != lines.len() {
            return Err(Error::Artifact {
                path: path.to_path_buf(),
                message: "duplicate tokens".into(),
            });
        }
        Ok(vocab)
    }
}

/// Lowercases and splits into words; `[SEP]` survives as its own word.
pub fn normalize_words(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    for chunk in text.split_whitespace() {
        if chunk == SEP || chunk.eq_ignore_ascii_case(SEP) {
            words.push(SEP.to_string());
            continue;
        }
        let mut cur = String::new();
        for ch in chunk.chars() {
            if ch.is_alphanumeric() {
                cur.extend(ch.to_lowercase());
            } else if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            words.push(cur);
        }
    }
    words
}

/// Lowercases text while keeping its punctuation and separators.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(|w| if w == SEP { w.to_string() } else { w.to_lowercase() })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Every text the pipeline feeds the encoder: rendered products and section queries.
fn corpus_texts(bundle: &CorpusBundle) -> impl Iterator<Item = String> + '_ {
    let products = bundle.products.iter().map(render_product);
    let queries = bundle.collections.iter().flat_map(|c| {
        c.sections
            .iter()
            .map(move |s| render_query(&c.title, &s.name, c.start_date))
    });
    products.chain(queries)
}

/// Frequency vocabulary over the rendered corpus texts.
pub fn build_vocab(bundle: &CorpusBundle, min_freq: usize) -> Result<Vocabulary> {
    if min_freq < 1 {
        return Err(Error::config("min_freq", "must be at least 1"));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for text in corpus_texts(bundle) {
        for w in normalize_words(&text) {
            if w != SEP {
                *counts.entry(w).or_default() += 1;
            }
        }
    }
    Ok(vocab_from_counts(counts, min_freq))
}

/// Frequency-descending, then lexicographic, filtered by `min_freq`.
pub fn vocab_from_counts(counts: BTreeMap<String, usize>, min_freq: usize) -> Vocabulary {
    let mut entries: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_freq && t != SEP && t != UNK)
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut vocab = Vocabulary::from_tokens(entries.into_iter().map(|(t, _)| t));
    vocab.min_freq = min_freq;
    vocab
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub source: String,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn tokenize(text: &str, vocab: &Vocabulary) -> TokenSequence {
    let mut ids = Vec::new();
    for word in normalize_words(text) {
        if word == SEP {
            ids.push(SEP_ID);
        } else if let Some(id) = vocab.id(&word) {
            ids.push(id);
        } else {
            greedy_subwords(&word, vocab, &mut ids);
        }
    }
    TokenSequence {
        ids,
        source: text.to_string(),
    }
}

fn greedy_subwords(word: &str, vocab: &Vocabulary, out: &mut Vec<u32>) {
    let chars: Vec<char> = word.chars().collect();
    let mut start = 0;
    let mut in_residue = false;
    while start < chars.len() {
        let mut matched = None;
        for end in (start + 1..=chars.len()).rev() {
            let piece: String = chars[start..end].iter().collect();
            if let Some(id) = vocab.id(&piece) {
                matched = Some((id, end));
                break;
            }
        }
        match matched {
            Some((id, end)) => {
                out.push(id);
                start = end;
                in_residue = false;
            }
            None => {
                if !in_residue {
                    out.push(UNK_ID);
                    in_residue = true;
                }
                start += 1;
            }
        }
    }
}

/// `title [SEP] section [SEP] Month Day`.
pub fn render_query(title: &str, section_name: &str, date: NaiveDate) -> String {
    format!("{title}{SEGMENT_JOIN}{section_name}{SEGMENT_JOIN}{}", month_day(date))
}

/// Product attributes joined by `[SEP]`: title, leaf-first categories, price,
/// brand, tags, then extra attribute values. Empty attributes are skipped and
/// at most eleven are rendered.
pub fn render_product(p: &Product) -> String {
    let mut parts: Vec<String> = Vec::with_capacity(MAX_TEXT_ATTRIBUTES);
    let mut push = |s: String| {
        if !s.trim().is_empty() && parts.len() < MAX_TEXT_ATTRIBUTES {
            parts.push(s);
        }
    };
    push(p.title.clone());
    push(p.category_path.iter().rev().cloned().collect::<Vec<_>>().join(" "));
    if p.price > 0 {
        push(p.price.to_string());
    }
    push(p.brand.clone());
    push(p.tags.join(" "));
    for (_, value) in &p.extra_attrs {
        push(value.clone());
    }
    parts.join(SEGMENT_JOIN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn product() -> Product {
        Product {
            product_id: "p".into(),
            title: "H&M basic skirt".into(),
            category_path: vec!["Women".into(), "Skirts".into()],
            price: 19900,
            brand: "H&M".into(),
            tags: vec!["daily".into(), "simple".into()],
            extra_attrs: vec![],
            review_count: 0,
            popularity: 0.0,
        }
    }

    #[test]
    fn vocab_min_freq() {
        let counts: BTreeMap<String, usize> = [("a".to_string(), 3), ("b".to_string(), 1)].into();
        let v = vocab_from_counts(counts.clone(), 1);
        assert_eq!(v.tokens(), &[SEP, UNK, "a", "b"]);
        let v = vocab_from_counts(counts, 2);
        assert_eq!(v.tokens(), &[SEP, UNK, "a"]);
    }

    #[test]
    fn tokenize_in_vocab_sentence() {
        let v = Vocabulary::from_tokens(["bright", "and", "pretty", "pastel", "tone", "skirts"]);
        let seq = tokenize("Bright and pretty pastel tone skirts", &v);
        assert_eq!(seq.ids, vec![2, 3, 4, 5, 6, 7]);
        assert!(tokenize("", &v).is_empty());
    }

    #[test]
    fn greedy_longest_match() {
        let v = Vocabulary::from_tokens(["sun", "hat", "su"]);
        let seq = tokenize("sunhat", &v);
        let toks: Vec<_> = seq.ids.iter().map(|&i| v.token(i).unwrap()).collect();
        assert_eq!(toks, vec!["sun", "hat"]);
        // residue runs collapse into one UNK
        let seq = tokenize("xxsunqq", &v);
        assert_eq!(seq.ids, vec![UNK_ID, v.id("sun").unwrap(), UNK_ID]);
    }

    #[test]
    fn separator_marker_maps_to_sep() {
        let v = Vocabulary::from_tokens(["a"]);
        assert_eq!(tokenize("a [SEP] a", &v).ids, vec![2, SEP_ID, 2]);
        // punctuation dropped
        assert_eq!(tokenize("a, a!", &v).ids, vec![2, 2]);
    }

    #[test]
    fn query_rendering() {
        let date = NaiveDate::from_ymd_opt(2021, 6, 15).unwrap();
        assert_eq!(
            render_query(
                "A cool, pretty summer outfit no matter who wears it",
                "Bright and pretty pastel tone skirts",
                date
            ),
            "A cool, pretty summer outfit no matter who wears it [SEP] Bright and pretty pastel tone skirts [SEP] June 15"
        );
        let jan = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        assert_eq!(render_query("T", "", jan), "T [SEP]  [SEP] January 1");
        assert_eq!(
            render_query("A cool, pretty summer outfit no matter who wears it", "skirts", date),
            "A cool, pretty summer outfit no matter who wears it [SEP] skirts [SEP] June 15"
        );
    }

    #[test]
    fn product_rendering() {
        assert_eq!(
            normalize(&render_product(&product())),
            "h&m basic skirt [SEP] skirts women [SEP] 19900 [SEP] h&m [SEP] daily simple"
        );
        let bare = Product {
            title: "x".into(),
            category_path: vec![],
            price: 0,
            brand: String::new(),
            tags: vec![],
            ..product()
        };
        assert_eq!(render_product(&bare), "x");
    }

    #[test]
    fn product_rendering_caps_attributes() {
        let mut p = product();
        p.extra_attrs = (0..7).map(|i| (format!("k{i}"), format!("v{i}"))).collect();
        let rendered = render_product(&p);
        assert_eq!(rendered.split(SEGMENT_JOIN).count(), 11);
        assert!(rendered.ends_with("v5"));
        assert!(!rendered.contains("v6"));
    }

    #[test]
    fn vocab_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = Vocabulary::from_tokens(["a", "b"]);
        v.save(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "[SEP]\n[UNK]\na\nb\n");
        assert_eq!(Vocabulary::load(&path).unwrap(), v);
    }

    proptest! {
        #[test]
        fn query_has_two_separators(title in "[a-z]{1,8}( [a-z]{1,8}){0,4}", section in "[a-z ]{0,20}", day in 1u32..28) {
            let date = NaiveDate::from_ymd_opt(2021, 3, day).unwrap();
            let q = render_query(&title, &section, date);
            prop_assert_eq!(q.matches(SEP).count(), 2);
            let v = Vocabulary::from_tokens(["a", "b", "c"]);
            prop_assert!(tokenize(&q, &v).ids.iter().all(|&id| (id as usize) < v.len()));
        }

        #[test]
        fn tokenize_is_idempotent_on_detokenized_output(words in proptest::collection::vec("[a-e]{1,6}", 0..8)) {
            let v = Vocabulary::from_tokens(["ab", "c", "d", "abc", "e"]);
            let first = tokenize(&words.join(" "), &v);
            let detok: Vec<&str> = first.ids.iter().map(|&i| v.token(i).unwrap()).collect();
            let second = tokenize(&detok.join(" "), &v);
            // UNK renders as "[UNK]", which re-tokenizes to residue UNK
            prop_assert_eq!(first.ids, second.ids);
        }
    }
}
