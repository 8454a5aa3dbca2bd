//! Exact cosine top-k over precomputed, L2-normalized product embeddings.
//!
//! Index file layout (little-endian):
//!
//! ```text
//! magic "ICIX" | version u32 | n u64 | d u32 | corpus hash (u32 len + utf8)
//! n × { id (u32 len + utf8) | category (u32 len + utf8) | flagged u8 | raw norm f64 }
//! n × d f32 matrix, row-major
//! ```
//!
//! Rows are stored as `f32` and renormalized in `f64` on load.

use std::collections::HashMap;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::Product;
use crate::encoder::{norm, EmbeddingVector, TextEncoder};
use crate::error::{Error, Result};
use crate::text::{render_product, tokenize, Vocabulary};
use crate::util;

const MAGIC: &[u8; 4] = b"ICIX";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex {
    product_ids: Vec<String>,
    categories: Vec<String>,
    /// `n × d`, every row unit length.
    rows: Vec<f64>,
    /// Pre-normalization lengths, kept for the Euclidean diagnostic mode.
    raw_norms: Vec<f64>,
    flagged: Vec<bool>,
    dim: usize,
    corpus_hash: String,
    lookup: HashMap<String, usize>,
}

/// Renders, tokenizes and embeds one product; shared by indexing and tests.
pub fn embed_product<E: TextEncoder + ?Sized>(
    encoder: &E,
    vocab: &Vocabulary,
    product: &Product,
) -> Result<EmbeddingVector> {
    encoder.embed(&tokenize(&render_product(product), vocab))
}

pub fn embed_query<E: TextEncoder + ?Sized>(encoder: &E, vocab: &Vocabulary, text: &str) -> Result<EmbeddingVector> {
    encoder.embed(&tokenize(text, vocab))
}

/// Embeds every product and normalizes the rows. A product that embeds to
/// the zero vector gets the first basis vector instead and is flagged.
pub fn build_embedding_index<E: TextEncoder + ?Sized>(
    encoder: &E,
    vocab: &Vocabulary,
    products: &[Product],
) -> Result<EmbeddingIndex> {
    if products.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let dim = encoder.dim();
    let mut index = EmbeddingIndex {
        product_ids: Vec::with_capacity(products.len()),
        categories: Vec::with_capacity(products.len()),
        rows: Vec::with_capacity(products.len() * dim),
        raw_norms: Vec::with_capacity(products.len()),
        flagged: Vec::with_capacity(products.len()),
        dim,
        corpus_hash: util::sha256_hex(&serde_json::to_vec(products)?),
        lookup: HashMap::with_capacity(products.len()),
    };
    for p in products {
        if index.lookup.contains_key(&p.product_id) {
            return Err(Error::DuplicateId(p.product_id.clone()));
        }
        let v = embed_product(encoder, vocab, p)?;
        index.push(&p.product_id, p.leaf_category(), &v);
    }
    let n_flagged = index.flagged.iter().filter(|&&f| f).count();
    if n_flagged > 0 {
        log::warn!("{n_flagged} products embedded to the zero vector; replaced by a basis vector");
    }
    Ok(index)
}

impl EmbeddingIndex {
    /// Builds an index from explicit vectors (ids, categories, vectors).
    pub fn from_vectors<I>(items: I, corpus_hash: impl Into<String>) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String, Vec<f64>)>,
    {
        let mut index = EmbeddingIndex {
            product_ids: Vec::new(),
            categories: Vec::new(),
            rows: Vec::new(),
            raw_norms: Vec::new(),
            flagged: Vec::new(),
            dim: 0,
            corpus_hash: corpus_hash.into(),
            lookup: HashMap::new(),
        };
        for (id, category, v) in items {
            if index.product_ids.is_empty() {
                index.dim = v.len();
            } else if v.len() != index.dim {
                return Err(Error::DimensionMismatch { expected: index.dim, actual: v.len() });
            }
            if index.lookup.contains_key(&id) {
                return Err(Error::DuplicateId(id));
            }
            index.push(&id, &category, &v);
        }
        if index.product_ids.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if index.dim == 0 {
            return Err(Error::config("d", "vectors must be nonempty"));
        }
        Ok(index)
    }

    fn push(&mut self, id: &str, category: &str, v: &[f64]) {
        self.lookup.insert(id.to_string(), self.product_ids.len());
        let len = norm(v);
        let flagged = !(len > 0.0) || !len.is_finite();
        if flagged {
            self.rows.push(1.0);
            self.rows.extend(std::iter::repeat_n(0.0, self.dim - 1));
        } else {
            self.rows.extend(v.iter().map(|x| x / len));
        }
        self.product_ids.push(id.to_string());
        self.categories.push(category.to_string());
        self.raw_norms.push(if flagged { 0.0 } else { len });
        self.flagged.push(flagged);
    }

    pub fn len(&self) -> usize {
        self.product_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.product_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn corpus_hash(&self) -> &str {
        &self.corpus_hash
    }

    pub fn product_ids(&self) -> &[String] {
        &self.product_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn category_at(&self, i: usize) -> &str {
        &self.categories[i]
    }

    pub fn category(&self, product_id: &str) -> Option<&str> {
        self.position(product_id).map(|i| self.categories[i].as_str())
    }

    pub fn position(&self, product_id: &str) -> Option<usize> {
        self.lookup.get(product_id).copied()
    }

    /// Products whose embedding was zero and got replaced.
    pub fn flagged(&self) -> Vec<&str> {
        self.product_ids
            .iter()
            .zip(&self.flagged)
            .filter(|(_, &f)| f)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    fn check_query(&self, query: &[f64], k: usize) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: query.len() });
        }
        if k == 0 {
            return Err(Error::Contract("k must be at least 1".into()));
        }
        Ok(())
    }

    fn candidates<'a>(&'a self, category_filter: Option<&'a str>) -> impl Iterator<Item = usize> + 'a {
        (0..self.len()).filter(move |&i| category_filter.is_none_or(|c| self.categories[i] == c))
    }

    fn rank(&self, mut scored: Vec<(usize, f64)>, k: usize, descending: bool) -> Vec<(String, f64)> {
        scored.sort_by(|a, b| {
            let by_score = if descending { b.1.total_cmp(&a.1) } else { a.1.total_cmp(&b.1) };
            by_score.then_with(|| self.product_ids[a.0].cmp(&self.product_ids[b.0]))
        });
        scored.truncate(k);
        scored
            .into_iter()
            .map(|(i, s)| (self.product_ids[i].clone(), s))
            .collect()
    }

    /// Exact cosine top-`k`, descending, ties by product id ascending. The
    /// category filter is applied before ranking. A zero query scores every
    /// product 0.
    pub fn retrieve_topk(&self, query: &[f64], k: usize, category_filter: Option<&str>) -> Result<Vec<(String, f64)>> {
        self.check_query(query, k)?;
        let len = norm(query);
        let inv = if len > 0.0 { 1.0 / len } else { 0.0 };
        let q: Vec<f64> = query.iter().map(|x| x * inv).collect();
        let scored = self
            .candidates(category_filter)
            .map(|i| (i, dot(&q, self.row(i))))
            .collect();
        Ok(self.rank(scored, k, true))
    }

    /// Diagnostic: nearest raw (unnormalized) product embeddings by Euclidean
    /// distance, ascending. Flagged products sit at the origin.
    pub fn retrieve_topk_euclidean(
        &self,
        query: &[f64],
        k: usize,
        category_filter: Option<&str>,
    ) -> Result<Vec<(String, f64)>> {
        self.check_query(query, k)?;
        let scored = self
            .candidates(category_filter)
            .map(|i| {
                let s = self.raw_norms[i];
                let d2: f64 = query.iter().zip(self.row(i)).map(|(a, r)| (a - r * s).powi(2)).sum();
                (i, d2.sqrt())
            })
            .collect();
        Ok(self.rank(scored, k, false))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        write_str(&mut out, &self.corpus_hash)?;
        for i in 0..self.len() {
            write_str(&mut out, &self.product_ids[i])?;
            write_str(&mut out, &self.categories[i])?;
            out.write_all(&[self.flagged[i] as u8])?;
            out.write_all(&self.raw_norms[i].to_le_bytes())?;
        }
        for x in &self.rows {
            out.write_all(&(*x as f32).to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        util::open_existing(path)?.read_to_end(&mut bytes)?;
        let mut r = Reader { bytes: &bytes, pos: 0, path };
        if r.take(4)? != MAGIC {
            return Err(r.bad("not an embedding index file"));
        }
        if r.u32()? != VERSION {
            return Err(r.bad("unsupported index version"));
        }
        let n = r.u64()? as usize;
        let dim = r.u32()? as usize;
        let corpus_hash = r.string()?;
        let mut index = EmbeddingIndex {
            product_ids: Vec::with_capacity(n),
            categories: Vec::with_capacity(n),
            rows: Vec::with_capacity(n * dim),
            raw_norms: Vec::with_capacity(n),
            flagged: Vec::with_capacity(n),
            dim,
            corpus_hash,
            lookup: HashMap::with_capacity(n),
        };
        for i in 0..n {
            let id = r.string()?;
            if index.lookup.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id));
            }
            index.product_ids.push(id);
            index.categories.push(r.string()?);
            index.flagged.push(r.take(1)?[0] != 0);
            index.raw_norms.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
        }
        let body = r.take(n * dim * 4)?;
        if r.pos != bytes.len() {
            return Err(r.bad("trailing bytes"));
        }
        for chunk in body.chunks_exact(dim * 4) {
            let mut row: Vec<f64> = chunk
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            let len = norm(&row);
            if !(len > 0.0) {
                return Err(r.bad("zero row"));
            }
            row.iter_mut().for_each(|x| *x /= len);
            index.rows.extend(row);
        }
        Ok(index)
    }
}

pub fn build_and_save<E: TextEncoder + ?Sized>(
    encoder: &E,
    vocab: &Vocabulary,
    products: &[Product],
    path: &Path,
) -> Result<EmbeddingIndex> {
    let index = build_embedding_index(encoder, vocab, products)?;
    index.save(path)?;
    Ok(index)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn write_str(out: &mut impl Write, s: &str) -> std::io::Result<()> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn bad(&self, message: &str) -> Error {
        Error::Artifact { path: self.path.to_path_buf(), message: message.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.bad("truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| self.bad("invalid utf-8"))
    }
}
