//! Client for an external text-generation service.
//!
//! Wire protocol: `POST {endpoint}/v1/generate` with a JSON
//! [`GenerationRequest`]; the response is a JSON array of `{"text", "score"}`
//! objects. Timeouts, transport failures and 5xx responses are retried with
//! exponential backoff; 4xx responses and schema violations fail at once.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Lang;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Decode {
    Beam { width: usize },
    Sample { temperature: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationRequest {
    pub prompt: String,
    pub target_lang: Lang,
    pub n: usize,
    pub max_tokens: usize,
    pub decode: Decode,
    pub request_id: String,
}

impl GenerationRequest {
    /// Beam search with width `n`.
    pub fn beam(prompt: impl Into<String>, target_lang: Lang, n: usize, request_id: impl Into<String>) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            target_lang,
            n,
            max_tokens: 512,
            decode: Decode::Beam { width: n },
            request_id: request_id.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        let bad = |m: &str| Err(ClientError::InvalidRequest(m.to_string()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be at least 1");
        }
        if self.prompt.trim().is_empty() {
            return bad("prompt is empty");
        }
        match self.decode {
            Decode::Beam { width: 0 } => bad("beam width must be at least 1"),
            Decode::Sample { temperature } if !(temperature.is_finite() && temperature > 0.0) => {
                bad("temperature must be positive")
            }
            _ => Ok(()),
        }
    }
}

/// One element of the service's response array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireCandidate {
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    /// Sequence log-probability; higher is more likely.
    pub score: f64,
    /// 0 is best.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    /// Per-attempt timeout.
    pub timeout_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, base_delay_ms: 200, max_delay_ms: 10_000, timeout_ms: 120_000 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry.saturating_sub(1)).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("network failure after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },
    #[error("service returned status {status} after {attempts} attempt(s): {body}")]
    Service { status: u16, attempts: u32, body: String },
    #[error("malformed response: {0}")]
    Schema(String),
}

impl ClientError {
    /// Whether the failure came from the service side rather than the request.
    pub fn is_service_side(&self) -> bool {
        matches!(self, ClientError::Network { .. } | ClientError::Service { .. })
    }
}

/// Anything that turns a request into ranked candidates.
pub trait CandidateSource: Send + Sync {
    fn request_candidates(&self, req: &GenerationRequest) -> Result<Vec<Candidate>, ClientError>;
}

impl<F> CandidateSource for F
where
    F: Fn(&GenerationRequest) -> Result<Vec<Candidate>, ClientError> + Send + Sync,
{
    fn request_candidates(&self, req: &GenerationRequest) -> Result<Vec<Candidate>, ClientError> {
        self(req)
    }
}

/// Drops empty texts, sorts by score descending (stable) and assigns ranks.
/// Returns the ranked list and the number of dropped empties.
pub fn rank_candidates(raw: Vec<WireCandidate>, n: usize) -> Result<(Vec<Candidate>, usize), ClientError> {
    if raw.len() > n {
        return Err(ClientError::Schema(format!("{} candidates returned for n = {n}", raw.len())));
    }
    if let Some(bad) = raw.iter().find(|c| !c.score.is_finite()) {
        return Err(ClientError::Schema(format!("non-finite score {}", bad.score)));
    }
    let before = raw.len();
    let mut kept: Vec<WireCandidate> = raw.into_iter().filter(|c| !c.text.trim().is_empty()).collect();
    let dropped = before - kept.len();
    kept.sort_by(|a, b| b.score.total_cmp(&a.score));
    let ranked =
        kept.into_iter().enumerate().map(|(rank, c)| Candidate { text: c.text, score: c.score, rank }).collect();
    Ok((ranked, dropped))
}

/// Counting semaphore bounding in-flight requests.
pub struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a>(&'a Limiter);

impl Limiter {
    pub fn new(slots: usize) -> Self {
        Limiter { free: Mutex::new(slots.max(1)), cv: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    pub endpoint: String,
    /// Name of the environment variable holding a bearer token.
    pub auth_token_env: Option<String>,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            endpoint: "http://127.0.0.1:8080".into(),
            auth_token_env: None,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
        }
    }
}

enum Attempt {
    Done(Vec<WireCandidate>),
    Transient(ClientError),
    Terminal(ClientError),
}

/// Blocking HTTP client; share it between threads by reference.
pub struct HttpClient {
    url: String,
    token: Option<String>,
    policy: RetryPolicy,
    agent: ureq::Agent,
    limiter: Limiter,
    empty_dropped: AtomicUsize,
}

impl HttpClient {
    pub fn new(cfg: &ClientConfig) -> Self {
        let token = cfg.auth_token_env.as_ref().and_then(|var| std::env::var(var).ok());
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_millis(cfg.retry.timeout_ms)).build();
        HttpClient {
            url: format!("{}/v1/generate", cfg.endpoint.trim_end_matches('/')),
            token,
            policy: cfg.retry.clone(),
            agent,
            limiter: Limiter::new(cfg.max_in_flight),
            empty_dropped: AtomicUsize::new(0),
        }
    }

    /// Empty-text candidates filtered out so far.
    pub fn empty_dropped(&self) -> usize {
        self.empty_dropped.load(Ordering::Relaxed)
    }

    fn attempt(&self, body: &str, attempts: u32) -> Attempt {
        let _permit = self.limiter.acquire();
        let mut call = self.agent.post(&self.url).set("Content-Type", "application/json");
        if let Some(token) = &self.token {
            call = call.set("Authorization", &format!("Bearer {token}"));
        }
        match call.send_string(body) {
            Ok(resp) => match resp.into_string() {
                Ok(text) => match serde_json::from_str::<Vec<WireCandidate>>(&text) {
                    Ok(raw) => Attempt::Done(raw),
                    Err(e) => Attempt::Terminal(ClientError::Schema(e.to_string())),
                },
                Err(e) => Attempt::Transient(ClientError::Network { attempts, message: e.to_string() }),
            },
            Err(ureq::Error::Status(status, resp)) => {
                let err = ClientError::Service { status, attempts, body: resp.into_string().unwrap_or_default() };
                if status >= 500 {
                    Attempt::Transient(err)
                } else {
                    Attempt::Terminal(err)
                }
            }
            Err(ureq::Error::Transport(t)) => {
                Attempt::Transient(ClientError::Network { attempts, message: t.to_string() })
            }
        }
    }
}

impl CandidateSource for HttpClient {
    fn request_candidates(&self, req: &GenerationRequest) -> Result<Vec<Candidate>, ClientError> {
        req.validate()?;
        let body = serde_json::to_string(req).expect("request serializes");
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body, attempts) {
                Attempt::Done(raw) => {
                    let (ranked, dropped) = rank_candidates(raw, req.n)?;
                    if dropped > 0 {
                        self.empty_dropped.fetch_add(dropped, Ordering::Relaxed);
                        log::warn!("{}: dropped {dropped} empty candidate(s)", req.request_id);
                    }
                    return Ok(ranked);
                }
                Attempt::Terminal(e) => return Err(e),
                Attempt::Transient(e) => {
                    if attempts > self.policy.max_retries {
                        return Err(e);
                    }
                    log::debug!("{}: attempt {attempts} failed: {e}", req.request_id);
                    std::thread::sleep(self.policy.backoff(attempts));
                }
            }
        }
    }
}

/// Minimal scripted HTTP server for tests and examples.
pub mod stub {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::{SocketAddr, TcpListener, TcpStream};
    use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
    use std::sync::Arc;
    use std::thread;
    use std::time::Duration;

    use super::{GenerationRequest, WireCandidate};

    /// What the server saw: hit index (0-based, across all requests) and body.
    pub struct StubRequest {
        pub index: usize,
        pub body: String,
    }

    impl StubRequest {
        pub fn parsed(&self) -> Option<GenerationRequest> {
            serde_json::from_str(&self.body).ok()
        }
    }

    pub struct StubReply {
        pub status: u16,
        pub body: String,
        pub delay: Duration,
    }

    impl StubReply {
        pub fn ok(cands: &[(&str, f64)]) -> Self {
            let wire: Vec<WireCandidate> =
                cands.iter().map(|(t, s)| WireCandidate { text: t.to_string(), score: *s }).collect();
            StubReply::raw(200, serde_json::to_string(&wire).expect("serializable"))
        }

        pub fn raw(status: u16, body: impl Into<String>) -> Self {
            StubReply { status, body: body.into(), delay: Duration::ZERO }
        }

        pub fn delayed(mut self, delay: Duration) -> Self {
            self.delay = delay;
            self
        }
    }

    pub struct StubServer {
        addr: SocketAddr,
        hits: Arc<AtomicUsize>,
        stop: Arc<AtomicBool>,
        accept: Option<thread::JoinHandle<()>>,
    }

    impl StubServer {
        pub fn start<H>(handler: H) -> std::io::Result<Self>
        where
            H: Fn(&StubRequest) -> StubReply + Send + Sync + 'static,
        {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?;
            let hits = Arc::new(AtomicUsize::new(0));
            let stop = Arc::new(AtomicBool::new(false));
            let handler = Arc::new(handler);
            let (h2, s2) = (hits.clone(), stop.clone());
            let accept = thread::spawn(move || {
                for stream in listener.incoming() {
                    if s2.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let (handler, hits) = (handler.clone(), h2.clone());
                    thread::spawn(move || {
                        let _ = serve(stream, &*handler, &hits);
                    });
                }
            });
            Ok(StubServer { addr, hits, stop, accept: Some(accept) })
        }

        pub fn endpoint(&self) -> String {
            format!("http://{}", self.addr)
        }

        pub fn hits(&self) -> usize {
            self.hits.load(Ordering::SeqCst)
        }
    }

    impl Drop for StubServer {
        fn drop(&mut self) {
            self.stop.store(true, Ordering::SeqCst);
            let _ = TcpStream::connect(self.addr);
            if let Some(h) = self.accept.take() {
                let _ = h.join();
            }
        }
    }

    fn serve(
        stream: TcpStream,
        handler: &(dyn Fn(&StubRequest) -> StubReply + Send + Sync),
        hits: &AtomicUsize,
    ) -> std::io::Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut len = 0usize;
        let mut line = String::new();
        reader.read_line(&mut line)?;
        if line.is_empty() {
            return Ok(());
        }
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.trim().eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; len];
        reader.read_exact(&mut body)?;
        let req = StubRequest {
            index: hits.fetch_add(1, Ordering::SeqCst),
            body: String::from_utf8_lossy(&body).into_owned(),
        };
        let reply = handler(&req);
        thread::sleep(reply.delay);
        let mut out = stream;
        write!(
            out,
            "HTTP/1.1 {} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            reply.status,
            reply.body.len(),
            reply.body
        )?;
        out.flush()
    }
}
