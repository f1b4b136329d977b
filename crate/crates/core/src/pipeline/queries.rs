use std::collections::HashSet;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guided::ConversationTurn;
use crate::http::{join_url, JsonClient, RetryPolicy};

/// Read the queries jsonl. Turns come back sorted by
/// `(conversation_id, turn_id)`.
pub fn load_turns(path: &Path) -> Result<Vec<ConversationTurn>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_turns(&text, path)
}

pub fn parse_turns(text: &str, path: &Path) -> Result<Vec<ConversationTurn>> {
    let mut turns = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let turn: ConversationTurn =
            serde_json::from_str(line).map_err(|e| err(format!("bad turn record: {e}")))?;
        if turn.turn_id == 0 {
            return Err(err("turn_id must be at least 1".into()));
        }
        if !seen.insert(turn.key()) {
            return Err(err(format!("duplicate turn {}", turn.key())));
        }
        if turn.history.len() + 1 != turn.turn_id as usize {
            tracing::debug!(
                turn = %turn.key(),
                history = turn.history.len(),
                "history length differs from turn_id - 1"
            );
        }
        turns.push(turn);
    }
    turns.sort_by(|a, b| {
        (a.conversation_id.as_str(), a.turn_id).cmp(&(b.conversation_id.as_str(), b.turn_id))
    });
    Ok(turns)
}

#[derive(Serialize)]
struct RewriteRequest<'a> {
    raw_query: &'a str,
    history: &'a [String],
}

#[derive(Deserialize)]
struct RewriteResponse {
    rewrite: String,
}

/// Optional external rewriter used only for turns that arrive without a
/// baseline query: `POST {endpoint}/rewrite` with `{"raw_query", "history"}`,
/// answered by `{"rewrite": "..."}`. Failures fall back to the raw query.
pub struct Rewriter {
    url: String,
    client: JsonClient,
}

impl Rewriter {
    pub fn new(endpoint: &str) -> Self {
        Self {
            url: join_url(endpoint, "rewrite"),
            client: JsonClient::new(
                Duration::from_secs(10),
                None,
                RetryPolicy {
                    max_retries: 0,
                    backoff: Duration::ZERO,
                },
            ),
        }
    }

    pub fn fill_baseline(&self, turn: &mut ConversationTurn) {
        if !turn.baseline_query.trim().is_empty() {
            return;
        }
        let request = RewriteRequest {
            raw_query: &turn.raw_query,
            history: &turn.history,
        };
        match self.client.post::<_, RewriteResponse>(&self.url, &request) {
            Ok(r) if !r.rewrite.trim().is_empty() => turn.baseline_query = r.rewrite,
            Ok(_) => {
                tracing::warn!(turn = %turn.key(), "rewriter returned nothing; using raw query");
                turn.baseline_query = turn.raw_query.clone();
            }
            Err(e) => {
                tracing::warn!(turn = %turn.key(), error = %e, "rewriter failed; using raw query");
                turn.baseline_query = turn.raw_query.clone();
            }
        }
    }
}
