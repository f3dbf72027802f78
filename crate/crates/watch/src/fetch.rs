//! Single-URL HTTP retrieval with the limits a long-running monitor needs.

use std::io::Read;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use hdna_core::RawHtml;
use reqwest::blocking::Client;
use reqwest::redirect::Policy;
use reqwest::Url;
use thiserror::Error;

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;
pub const DEFAULT_MAX_REDIRECTS: usize = 5;
pub const DEFAULT_MAX_BODY_BYTES: u64 = 8 * 1024 * 1024;

pub fn default_user_agent() -> String {
    format!("hdna/{}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchConfig {
    pub timeout_ms: u64,
    pub max_redirects: usize,
    pub max_body_bytes: u64,
    pub user_agent: String,
    /// Skip TLS certificate verification.
    pub insecure: bool,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            timeout_ms: DEFAULT_TIMEOUT_MS,
            max_redirects: DEFAULT_MAX_REDIRECTS,
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            user_agent: default_user_agent(),
            insecure: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FetchResult {
    /// Final URL after redirects.
    pub url: String,
    pub status: u16,
    pub body: RawHtml,
    pub fetched_at: DateTime<Utc>,
    pub duration_ms: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FetchError {
    #[error("{url}: not an absolute http(s) URL")]
    InvalidUrl { url: String },
    #[error("{url}: timed out after {timeout_ms} ms")]
    Timeout { url: String, timeout_ms: u64 },
    #[error("{url}: more than {max} redirects")]
    TooManyRedirects { url: String, max: usize },
    #[error("{url}: body exceeds {limit} bytes")]
    BodyTooLarge { url: String, limit: u64 },
    #[error("{url}: {message}")]
    NetworkError { url: String, message: String },
    #[error("{url}: HTTP status {status}")]
    NonSuccessStatus { url: String, status: u16 },
}

/// Anything that can turn a URL into page bytes. The watch loop only talks
/// to this trait, so tests can script failures without a network.
pub trait Fetch: Send + Sync {
    fn fetch(&self, url: &str) -> Result<FetchResult, FetchError>;
}

pub struct HttpFetcher {
    client: Client,
    config: FetchConfig,
}

impl HttpFetcher {
    pub fn new(config: FetchConfig) -> Result<Self, FetchError> {
        let client = Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .redirect(Policy::limited(config.max_redirects))
            .user_agent(config.user_agent.clone())
            .danger_accept_invalid_certs(config.insecure)
            .build()
            .map_err(|e| FetchError::NetworkError {
                url: String::new(),
                message: format!("cannot build HTTP client: {e}"),
            })?;
        Ok(Self { client, config })
    }

    pub fn config(&self) -> &FetchConfig {
        &self.config
    }

    fn classify(&self, url: &str, err: reqwest::Error) -> FetchError {
        if err.is_timeout() {
            FetchError::Timeout {
                url: url.to_owned(),
                timeout_ms: self.config.timeout_ms,
            }
        } else if err.is_redirect() {
            FetchError::TooManyRedirects {
                url: url.to_owned(),
                max: self.config.max_redirects,
            }
        } else {
            FetchError::NetworkError {
                url: url.to_owned(),
                message: error_chain(&err),
            }
        }
    }
}

impl Fetch for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<FetchResult, FetchError> {
        let parsed = Url::parse(url).map_err(|_| FetchError::InvalidUrl {
            url: url.to_owned(),
        })?;
        if !matches!(parsed.scheme(), "http" | "https") || parsed.host().is_none() {
            return Err(FetchError::InvalidUrl {
                url: url.to_owned(),
            });
        }

        let started = Instant::now();
        let response = self
            .client
            .get(parsed)
            .send()
            .map_err(|e| self.classify(url, e))?;
        let status = response.status();
        let final_url = response.url().to_string();
        if status.as_u16() >= 400 {
            return Err(FetchError::NonSuccessStatus {
                url: url.to_owned(),
                status: status.as_u16(),
            });
        }
        if status.is_redirection() {
            // A 3xx that reqwest did not follow (no usable Location).
            return Err(FetchError::NetworkError {
                url: url.to_owned(),
                message: format!("unfollowed redirect with status {}", status.as_u16()),
            });
        }

        let limit = self.config.max_body_bytes;
        let too_large = || FetchError::BodyTooLarge {
            url: url.to_owned(),
            limit,
        };
        if response.content_length().is_some_and(|len| len > limit) {
            return Err(too_large());
        }
        let charset = response
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .and_then(charset_param);

        let mut bytes = Vec::new();
        response
            .take(limit.saturating_add(1))
            .read_to_end(&mut bytes)
            .map_err(|e| self.read_error(url, e))?;
        if bytes.len() as u64 > limit {
            return Err(too_large());
        }

        let mut body = RawHtml::new(bytes);
        if let Some(label) = charset {
            body = body.with_charset(label);
        }
        Ok(FetchResult {
            url: final_url,
            status: status.as_u16(),
            body,
            fetched_at: Utc::now(),
            duration_ms: started.elapsed().as_millis() as u64,
        })
    }
}

impl HttpFetcher {
    fn read_error(&self, url: &str, err: std::io::Error) -> FetchError {
        let is_timeout = err.kind() == std::io::ErrorKind::TimedOut
            || err
                .get_ref()
                .and_then(|inner| inner.downcast_ref::<reqwest::Error>())
                .is_some_and(|e| e.is_timeout());
        if is_timeout {
            FetchError::Timeout {
                url: url.to_owned(),
                timeout_ms: self.config.timeout_ms,
            }
        } else {
            FetchError::NetworkError {
                url: url.to_owned(),
                message: err.to_string(),
            }
        }
    }
}

fn error_chain(err: &dyn std::error::Error) -> String {
    let mut msg = err.to_string();
    let mut cur = err.source();
    while let Some(e) = cur {
        msg.push_str(": ");
        msg.push_str(&e.to_string());
        cur = e.source();
    }
    msg
}

/// The `charset` parameter of a Content-Type value, unquoted.
pub fn charset_param(content_type: &str) -> Option<String> {
    content_type.split(';').skip(1).find_map(|param| {
        let (key, value) = param.split_once('=')?;
        if !key.trim().eq_ignore_ascii_case("charset") {
            return None;
        }
        let value = value.trim().trim_matches('"').trim();
        (!value.is_empty()).then(|| value.to_owned())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charset_from_content_type() {
        assert_eq!(
            charset_param("text/html; charset=ISO-8859-1").as_deref(),
            Some("ISO-8859-1")
        );
        assert_eq!(
            charset_param("text/html;Charset=\"utf-8\"").as_deref(),
            Some("utf-8")
        );
        assert_eq!(charset_param("text/html"), None);
        assert_eq!(charset_param("text/html; charset="), None);
        assert_eq!(
            charset_param("text/html; boundary=x; charset=koi8-r").as_deref(),
            Some("koi8-r")
        );
    }

    #[test]
    fn defaults() {
        let c = FetchConfig::default();
        assert_eq!(c.timeout_ms, 10_000);
        assert_eq!(c.max_redirects, 5);
        assert_eq!(c.max_body_bytes, 8 * 1024 * 1024);
        assert!(c.user_agent.starts_with("hdna/"));
        assert!(!c.insecure);
    }

    #[test]
    fn rejects_non_http_urls() {
        let f = HttpFetcher::new(FetchConfig::default()).unwrap();
        for url in [
            "ftp://example.com/",
            "file:///etc/passwd",
            "example.com",
            "/relative",
        ] {
            assert!(
                matches!(f.fetch(url), Err(FetchError::InvalidUrl { .. })),
                "{url}"
            );
        }
    }
}
