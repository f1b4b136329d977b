//! Blocking JSON-over-HTTP calls with bounded retries and an in-flight limit.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct RetryPolicy {
    pub max_retries: u32,
    pub backoff: Duration,
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    bearer: Option<String>,
    retry: RetryPolicy,
}

impl JsonClient {
    pub fn new(timeout: Duration, bearer: Option<String>, retry: RetryPolicy) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .new_agent();
        Self {
            agent,
            bearer,
            retry,
        }
    }

    fn post_once<B: Serialize, R: DeserializeOwned>(&self, url: &str, body: &B) -> Result<R> {
        let mut request = self.agent.post(url);
        if let Some(key) = &self.bearer {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        match request.send_json(body) {
            Ok(mut response) => response
                .body_mut()
                .read_json::<R>()
                .map_err(|e| Error::Protocol {
                    url: url.to_string(),
                    message: format!("undecodable response body: {e}"),
                }),
            Err(ureq::Error::StatusCode(code)) => Err(Error::Http {
                url: url.to_string(),
                status: Some(code),
                message: "unexpected status".into(),
            }),
            Err(e) => Err(Error::Http {
                url: url.to_string(),
                status: None,
                message: e.to_string(),
            }),
        }
    }

    /// POST `body` as JSON, retrying retryable failures with exponential
    /// backoff (`backoff`, `2·backoff`, `4·backoff`, ...).
    pub fn post<B: Serialize, R: DeserializeOwned>(&self, url: &str, body: &B) -> Result<R> {
        let mut attempt = 0;
        loop {
            match self.post_once(url, body) {
                Err(e) if e.is_retryable() && attempt < self.retry.max_retries => {
                    let wait = self.retry.backoff * 2u32.saturating_pow(attempt);
                    tracing::warn!(%url, attempt = attempt + 1, error = %e, "retrying after {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Counting semaphore bounding concurrent requests.
pub(crate) struct Semaphore {
    permits: Mutex<usize>,
    freed: Condvar,
}

pub(crate) struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.permits.lock().unwrap();
        while *free == 0 {
            free = self.freed.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

pub(crate) fn join_url(endpoint: &str, path: &str) -> String {
    format!("{}/{}", endpoint.trim_end_matches('/'), path)
}
