//! Optional HTTP verbalizer and sentence embedder.
//!
//! Both post JSON and fall back to the local implementation, with a warning,
//! whenever the service fails or answers with something unusable.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use ureq::Agent;

use crate::kg::{KnowledgeGraph, Triplet};
use crate::metrics::{BagOfWords, MetricsError, SentenceEmbedder};
use crate::rx::{TemplateTable, Verbalizer};

/// A JSON-over-HTTP endpoint that counts its fallbacks.
pub struct RemoteService {
    agent: Agent,
    url: String,
    fallbacks: AtomicUsize,
}

impl RemoteService {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            agent,
            url: url.into(),
            fallbacks: AtomicUsize::new(0),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// How many calls were answered by the local fallback.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }

    fn post<Q: Serialize, A: DeserializeOwned>(&self, body: &Q) -> Result<A, String> {
        self.agent
            .post(&self.url)
            .send_json(body)
            .map_err(|e| e.to_string())?
            .into_body()
            .read_json()
            .map_err(|e| e.to_string())
    }

    fn degrade(&self, what: &str, why: &str) {
        self.fallbacks.fetch_add(1, Ordering::Relaxed);
        log::warn!(
            "{what} service at {} unusable ({why}); using the local fallback",
            self.url
        );
    }
}

#[derive(Serialize)]
struct TripletRequest<'a> {
    triplets: Vec<[&'a str; 3]>,
}

#[derive(Serialize)]
struct TextRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct TextResponse {
    texts: Vec<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    embeddings: Vec<Vec<f64>>,
}

/// Verbalizer backed by a remote text generator, with templates as fallback.
pub struct RemoteVerbalizer {
    pub service: RemoteService,
    pub fallback: TemplateTable,
}

impl Verbalizer for RemoteVerbalizer {
    fn verbalize_batch(&self, triplets: &[Triplet], kg: &KnowledgeGraph) -> Vec<String> {
        let req = TripletRequest {
            triplets: triplets
                .iter()
                .map(|t| {
                    let (h, r, tl) = kg.labels(t);
                    [h, r, tl]
                })
                .collect(),
        };
        match self.service.post::<_, TextResponse>(&req) {
            Ok(resp) if resp.texts.len() == triplets.len() => resp.texts,
            Ok(resp) => {
                let why = format!("{} texts for {} triplets", resp.texts.len(), triplets.len());
                self.service.degrade("verbalizer", &why);
                self.fallback.verbalize_batch(triplets, kg)
            }
            Err(e) => {
                self.service.degrade("verbalizer", &e);
                self.fallback.verbalize_batch(triplets, kg)
            }
        }
    }
}

/// Embedder backed by a remote sentence encoder, with bag-of-words as fallback.
pub struct RemoteEmbedder {
    pub service: RemoteService,
}

impl SentenceEmbedder for RemoteEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, MetricsError> {
        match self
            .service
            .post::<_, EmbeddingResponse>(&TextRequest { texts })
        {
            Ok(resp)
                if resp.embeddings.len() == texts.len()
                    && resp.embeddings.windows(2).all(|w| w[0].len() == w[1].len()) =>
            {
                Ok(resp.embeddings)
            }
            Ok(resp) => {
                let why = format!(
                    "{} embeddings for {} texts",
                    resp.embeddings.len(),
                    texts.len()
                );
                self.service.degrade("embedder", &why);
                BagOfWords.embed(texts)
            }
            Err(e) => {
                self.service.degrade("embedder", &e);
                BagOfWords.embed(texts)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::similarity;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread;

    /// Serves `responses` in order, one per connection, returning what was posted.
    fn serve(responses: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (url, handle)
    }

    fn kg() -> KnowledgeGraph {
        KnowledgeGraph::from_tsv("Chatou\tisLocatedIn\tFrance\n").unwrap()
    }

    #[test]
    fn remote_verbalizer_used_when_healthy() {
        let (url, h) = serve(vec![(
            200,
            r#"{"texts":["Chatou lies in France."]}"#.into(),
        )]);
        let v = RemoteVerbalizer {
            service: RemoteService::new(url, Duration::from_secs(5)),
            fallback: TemplateTable::default(),
        };
        let g = kg();
        assert_eq!(
            v.verbalize_batch(g.triplets(), &g),
            ["Chatou lies in France."]
        );
        assert_eq!(v.service.fallbacks(), 0);
        let sent = h.join().unwrap();
        assert_eq!(
            serde_json::from_str::<serde_json::Value>(&sent[0]).unwrap(),
            serde_json::json!({"triplets": [["Chatou", "isLocatedIn", "France"]]})
        );
    }

    #[test]
    fn verbalizer_falls_back_on_errors() {
        let (url, h) = serve(vec![
            (500, "{}".into()),
            (200, r#"{"texts":[]}"#.into()),
            (200, "not json".into()),
        ]);
        let v = RemoteVerbalizer {
            service: RemoteService::new(url, Duration::from_secs(5)),
            fallback: TemplateTable::default(),
        };
        let g = kg();
        for _ in 0..3 {
            assert_eq!(
                v.verbalize_batch(g.triplets(), &g),
                ["Chatou is located in France."]
            );
        }
        assert_eq!(v.service.fallbacks(), 3);
        h.join().unwrap();
    }

    #[test]
    fn remote_embedder_and_fallback() {
        let (url, h) = serve(vec![
            (200, r#"{"embeddings":[[1.0,0.0],[1.0,1.0]]}"#.into()),
            (200, r#"{"embeddings":[[1.0],[1.0,1.0]]}"#.into()),
        ]);
        let e = RemoteEmbedder {
            service: RemoteService::new(url, Duration::from_secs(5)),
        };
        let s = similarity("a b", "c d", &e).unwrap();
        assert!((s - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(similarity("a b", "c d", &e).unwrap(), 0.0);
        assert_eq!(e.service.fallbacks(), 1);
        let sent = h.join().unwrap();
        assert_eq!(
            serde_json::from_str::<serde_json::Value>(&sent[0]).unwrap(),
            serde_json::json!({"texts": ["a b", "c d"]})
        );
    }

    #[test]
    fn unreachable_service_falls_back() {
        // Bind then drop to get a port with nothing listening.
        let port = TcpListener::bind("127.0.0.1:0")
            .unwrap()
            .local_addr()
            .unwrap()
            .port();
        let e = RemoteEmbedder {
            service: RemoteService::new(
                format!("http://127.0.0.1:{port}/"),
                Duration::from_secs(2),
            ),
        };
        assert_eq!(similarity("x", "x", &e).unwrap(), 1.0);
        assert_eq!(e.service.fallbacks(), 1);
    }
}
