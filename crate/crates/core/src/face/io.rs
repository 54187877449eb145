use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize_embedding, FaceEmbedding, EMBEDDING_DIM};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct EmbeddingRecord {
    identity: String,
    vector: Vec<f64>,
}

/// One `{"identity": string, "vector": [128 numbers]}` per line; vectors are normalized on load.
pub fn parse_embeddings_jsonl(text: &str) -> Result<Vec<FaceEmbedding>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
        let rec: EmbeddingRecord =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if rec.vector.len() != EMBEDDING_DIM {
            return Err(parse_err(format!(
                "vector has {} values, expected {EMBEDDING_DIM}",
                rec.vector.len()
            )));
        }
        let e = normalize_embedding(&rec.vector).map_err(|e| parse_err(e.to_string()))?;
        out.push(e.with_identity(rec.identity));
    }
    Ok(out)
}

pub fn load_embeddings_jsonl(path: &Path) -> Result<Vec<FaceEmbedding>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings_jsonl(&text)
}

pub fn write_embeddings_jsonl(embeddings: &[FaceEmbedding], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for (i, e) in embeddings.iter().enumerate() {
        let identity = e
            .identity
            .clone()
            .ok_or_else(|| Error::Data(format!("embedding {i} has no identity")))?;
        let rec = EmbeddingRecord {
            identity,
            vector: e.vector.clone(),
        };
        serde_json::to_writer(&mut out, &rec).expect("in-memory serialization");
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_and_validates() {
        let mut v = vec![0.0; EMBEDDING_DIM];
        v[0] = 3.0;
        v[1] = 4.0;
        let good = serde_json::json!({"identity": "me", "vector": v}).to_string();
        let got = parse_embeddings_jsonl(&good).unwrap();
        assert_eq!(got[0].identity.as_deref(), Some("me"));
        assert!((got[0].vector[1] - 0.8).abs() < 1e-15);

        let short = serde_json::json!({"identity": "me", "vector": [1.0, 2.0]}).to_string();
        let text = format!("{good}\n\n{short}\n");
        assert!(matches!(
            parse_embeddings_jsonl(&text),
            Err(Error::Parse { line: 3, .. })
        ));
        let zero = serde_json::json!({"identity": "me", "vector": vec![0.0; EMBEDDING_DIM]}).to_string();
        assert!(parse_embeddings_jsonl(&zero).is_err());
    }
}
