//! Text embedders: a built-in hashed character n-gram embedder and a client
//! for an external embedding endpoint.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Error, Result};

pub const EMBED_DIM: usize = 512;
pub const NGRAM_SIZES: [usize; 3] = [3, 4, 5];

pub trait TextEmbedder: Send + Sync {
    /// Stable identifier recorded in memory headers.
    fn id(&self) -> String;
    /// One L2-normalized vector per input text.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;

    fn embed_one(&self, text: &str) -> Result<Vec<f64>> {
        let mut v = self.embed(&[text.to_string()])?;
        v.pop().ok_or_else(|| Error::EmbedderUnavailable("empty response".into()))
    }
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Maps a cosine in [-1, 1] onto [0, 1].
pub fn unit_interval(cos: f64) -> f64 {
    ((cos + 1.0) / 2.0).clamp(0.0, 1.0)
}

/// Character n-gram (n = 3, 4, 5) frequencies hashed into 512 buckets.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashedNgramEmbedder;

impl HashedNgramEmbedder {
    pub fn vector(text: &str) -> Vec<f64> {
        let chars: Vec<char> = if text.is_empty() {
            "<empty>".chars().collect()
        } else {
            text.chars().collect()
        };
        let mut v = vec![0.0; EMBED_DIM];
        let mut buf = String::new();
        for n in NGRAM_SIZES {
            if chars.len() < n {
                // Short strings still get one feature per size.
                buf.clear();
                buf.extend(chars.iter());
                v[(fnv1a(format!("{n}|{buf}").as_bytes()) % EMBED_DIM as u64) as usize] += 1.0;
                continue;
            }
            for window in chars.windows(n) {
                buf.clear();
                buf.extend(window.iter());
                let h = fnv1a(format!("{n}|{buf}").as_bytes());
                v[(h % EMBED_DIM as u64) as usize] += 1.0;
            }
        }
        l2_normalize(&mut v);
        v
    }
}

impl TextEmbedder for HashedNgramEmbedder {
    fn id(&self) -> String {
        format!("hashed-char-ngram-{EMBED_DIM}-n3to5")
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| Self::vector(t)).collect())
    }
}

#[derive(Debug, Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

/// Client for `POST {"texts": [...]}` → `{"embeddings": [[...], ...]}`.
/// OpenAI-style `{"data": [{"embedding": [...]}]}` responses are accepted too.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    pub url: String,
    pub token: Option<String>,
    pub timeout: Duration,
}

#[derive(Debug, Deserialize)]
struct OpenAiItem {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub const URL_VAR: &'static str = "MATPROC_EMBED_URL";
    pub const TOKEN_VAR: &'static str = "MATPROC_EMBED_TOKEN";

    /// Reads the endpoint from the environment, if configured.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(Self::URL_VAR).ok().filter(|u| !u.is_empty())?;
        Some(Self {
            url,
            token: std::env::var(Self::TOKEN_VAR).ok(),
            timeout: Duration::from_secs(60),
        })
    }

    fn parse_response(body: Value) -> Result<Vec<Vec<f64>>> {
        if let Some(vs) = body.get("embeddings") {
            return serde_json::from_value(vs.clone()).map_err(|e| Error::EmbedderUnavailable(e.to_string()));
        }
        if let Some(data) = body.get("data") {
            let items: Vec<OpenAiItem> =
                serde_json::from_value(data.clone()).map_err(|e| Error::EmbedderUnavailable(e.to_string()))?;
            return Ok(items.into_iter().map(|i| i.embedding).collect());
        }
        Err(Error::EmbedderUnavailable("response has no embeddings".into()))
    }
}

impl TextEmbedder for HttpEmbedder {
    fn id(&self) -> String {
        format!("endpoint:{}", self.url)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| Error::EmbedderUnavailable(e.to_string()))?;
        let mut req = client.post(&self.url).json(&EmbedRequest { texts });
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let body: Value = req
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| Error::EmbedderUnavailable(e.to_string()))?;
        let mut vectors = Self::parse_response(body)?;
        if vectors.len() != texts.len() {
            return Err(Error::EmbedderUnavailable(format!(
                "expected {} vectors, got {}",
                texts.len(),
                vectors.len()
            )));
        }
        let dim = vectors.first().map(Vec::len).unwrap_or(0);
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::EmbedderUnavailable("vectors differ in dimension".into()));
        }
        for v in &mut vectors {
            l2_normalize(v);
        }
        Ok(vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn hashed_vectors_are_unit_and_stable() {
        for text in ["", "a", "mill(duration=2 h) -> sinter", "präcursor ü"] {
            let v = HashedNgramEmbedder::vector(text);
            assert_eq!(v.len(), EMBED_DIM);
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
            assert_eq!(v, HashedNgramEmbedder::vector(text));
        }
        let a = HashedNgramEmbedder::vector("ball mill then sinter");
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-12);
        let b = HashedNgramEmbedder::vector("dissolve and filter");
        assert!(cosine(&a, &b) < 0.9);
    }

    #[test]
    fn response_shapes() {
        let a = HttpEmbedder::parse_response(json!({"embeddings": [[1.0, 0.0], [0.0, 2.0]]})).unwrap();
        assert_eq!(a.len(), 2);
        let b = HttpEmbedder::parse_response(json!({"data": [{"embedding": [3.0, 4.0]}]})).unwrap();
        assert_eq!(b[0], vec![3.0, 4.0]);
        assert!(HttpEmbedder::parse_response(json!({"oops": 1})).is_err());
    }

    #[test]
    fn unreachable_endpoint() {
        let e = HttpEmbedder {
            url: "http://127.0.0.1:9/embed".into(),
            token: None,
            timeout: Duration::from_millis(200),
        };
        assert!(matches!(e.embed(&["x".into()]), Err(Error::EmbedderUnavailable(_))));
    }

    #[test]
    fn unit_mapping() {
        assert_eq!(unit_interval(-1.0), 0.0);
        assert_eq!(unit_interval(1.0), 1.0);
        assert_eq!(unit_interval(0.0), 0.5);
    }
}
