//! HTTP client for remote inference endpoints.
//!
//! Wire protocol: `POST {endpoint}/v1/extract` with
//! `{schema_id, schema_version, text}`; a 200 answer carries
//! `{facts: [{fact_id, begin, end, anchor: {begin, end}, modifiers: [...], confidence?}]}`
//! with code-point offsets. Errors come back as `{error: {code, message}}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ExtractError, ExtractedFact, ExtractedModifier, Extractor, ExtractorDescriptor, ExtractorKind};
use crate::schema::FactSchema;
use crate::text::{char_len, SpanOffset};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub schema_id: String,
    pub schema_version: String,
    pub text: String,
}

/// A remote extractor bound to the schema its answers are validated
/// against.
#[derive(Debug)]
pub struct RemoteExtractor {
    descriptor: ExtractorDescriptor,
    schema: FactSchema,
    agent: ureq::Agent,
}

impl RemoteExtractor {
    pub fn new(descriptor: ExtractorDescriptor, schema: FactSchema, timeout: Duration) -> Result<Self, ExtractError> {
        descriptor.validate()?;
        if descriptor.kind != ExtractorKind::Remote {
            return Err(ExtractError::InvalidDescriptor(format!("{} is not a remote extractor", descriptor.name)));
        }
        if descriptor.schema != schema.schema_ref() {
            return Err(ExtractError::InvalidDescriptor(format!(
                "{} serves {} but the schema is {}",
                descriptor.name,
                descriptor.schema,
                schema.schema_ref()
            )));
        }
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Ok(RemoteExtractor { descriptor, schema, agent })
    }

    fn endpoint(&self) -> &str {
        self.descriptor.endpoint.as_deref().expect("validated remote descriptor")
    }

    pub fn extract(&self, text: &str) -> Result<Vec<ExtractedFact>, ExtractError> {
        let endpoint = self.endpoint().to_string();
        let url = format!("{}/v1/extract", endpoint.trim_end_matches('/'));
        let request = WireRequest {
            schema_id: self.schema.schema_id.clone(),
            schema_version: self.schema.version.clone(),
            text: text.to_string(),
        };
        let body = match self.agent.post(&url).send_json(&request) {
            Ok(resp) => resp
                .into_string()
                .map_err(|e| ExtractError::ProtocolError { endpoint: endpoint.clone(), message: e.to_string() })?,
            Err(ureq::Error::Status(status, resp)) => {
                let raw = resp.into_string().unwrap_or_default();
                let parsed: Option<Value> = serde_json::from_str(&raw).ok();
                let field = |k: &str| {
                    parsed.as_ref().and_then(|v| v["error"][k].as_str()).map(str::to_string)
                };
                return Err(ExtractError::Upstream {
                    endpoint,
                    status,
                    code: field("code").unwrap_or_else(|| "unknown".into()),
                    message: field("message").unwrap_or(raw),
                });
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(ExtractError::Unreachable { endpoint, message: t.to_string() });
            }
        };
        let value: Value = serde_json::from_str(&body)
            .map_err(|e| ExtractError::ProtocolError { endpoint: endpoint.clone(), message: e.to_string() })?;
        parse_response(&value, &self.schema, text).map_err(|e| match e {
            ResponseError::Protocol(message) => ExtractError::ProtocolError { endpoint: endpoint.clone(), message },
            ResponseError::Spans(issues) => ExtractError::InvalidSpans { endpoint: endpoint.clone(), issues },
        })
    }
}

impl Extractor for RemoteExtractor {
    fn descriptor(&self) -> &ExtractorDescriptor {
        &self.descriptor
    }

    fn run(&self, text: &str) -> Result<Vec<ExtractedFact>, ExtractError> {
        self.extract(text)
    }
}

/// One-shot remote extraction with the default timeout.
pub fn remote_extract(
    descriptor: &ExtractorDescriptor,
    schema: &FactSchema,
    text: &str,
) -> Result<Vec<ExtractedFact>, ExtractError> {
    RemoteExtractor::new(descriptor.clone(), schema.clone(), DEFAULT_TIMEOUT)?.extract(text)
}

enum ResponseError {
    Protocol(String),
    Spans(Vec<String>),
}

fn offset(v: &Value, what: &str) -> Result<usize, ResponseError> {
    v.as_u64()
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| ResponseError::Protocol(format!("{what} is not a non-negative integer: {v}")))
}

fn span(v: &Value, what: &str) -> Result<SpanOffset, ResponseError> {
    Ok(SpanOffset::new(offset(&v["begin"], &format!("{what}.begin"))?, offset(&v["end"], &format!("{what}.end"))?))
}

fn confidence(v: &Value, what: &str) -> Result<Option<f64>, ResponseError> {
    match v.get("confidence") {
        None | Some(Value::Null) => Ok(None),
        Some(c) => c.as_f64().map(Some).ok_or_else(|| ResponseError::Protocol(format!("{what}.confidence is not a number"))),
    }
}

fn string(v: &Value, key: &str, what: &str) -> Result<String, ResponseError> {
    v.get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ResponseError::Protocol(format!("{what}.{key} is missing or not a string")))
}

/// Shape errors are protocol violations. Anchor counts, ids, bounds and
/// containment are checked afterwards and reported together as span errors.
fn parse_response(v: &Value, schema: &FactSchema, text: &str) -> Result<Vec<ExtractedFact>, ResponseError> {
    let facts = v
        .get("facts")
        .and_then(Value::as_array)
        .ok_or_else(|| ResponseError::Protocol("response has no facts array".into()))?;
    let doc_len = char_len(text);
    let mut out = Vec::with_capacity(facts.len());
    let mut issues = Vec::new();
    for (i, f) in facts.iter().enumerate() {
        let what = format!("facts[{i}]");
        let fact_id = string(f, "fact_id", &what)?;
        let fact_span = span(f, &what)?;
        let anchors: Vec<&Value> = match f.get("anchor") {
            None | Some(Value::Null) => vec![],
            Some(Value::Array(a)) => a.iter().collect(),
            Some(obj @ Value::Object(_)) => vec![obj],
            Some(other) => return Err(ResponseError::Protocol(format!("{what}.anchor is {other}"))),
        };
        if anchors.len() != 1 {
            issues.push(format!("{what} ({fact_id}) has {} anchors, expected exactly one", anchors.len()));
            continue;
        }
        let anchor = anchors[0];
        let mut modifiers = Vec::new();
        if let Some(mods) = f.get("modifiers").filter(|m| !m.is_null()) {
            let mods = mods.as_array().ok_or_else(|| ResponseError::Protocol(format!("{what}.modifiers is not an array")))?;
            for (j, m) in mods.iter().enumerate() {
                let mw = format!("{what}.modifiers[{j}]");
                modifiers.push(ExtractedModifier {
                    modifier_id: string(m, "modifier_id", &mw)?,
                    span: span(m, &mw)?,
                    confidence: confidence(m, &mw)?,
                });
            }
        }
        let anchor_id = match anchor.get("anchor_id").and_then(Value::as_str) {
            Some(id) => id.to_string(),
            None => schema.fact(&fact_id).map(|d| d.anchor.id.clone()).unwrap_or_default(),
        };
        let fact = ExtractedFact {
            fact_id,
            span: fact_span,
            anchor_id,
            anchor_span: span(anchor, &format!("{what}.anchor"))?,
            modifiers,
            confidence: confidence(f, &what)?,
            anchor_confidence: confidence(anchor, &format!("{what}.anchor"))?,
        };
        let problems = fact.problems(schema, doc_len);
        if problems.is_empty() {
            out.push(fact);
        } else {
            issues.extend(problems.into_iter().map(|p| format!("{what}: {p}")));
        }
    }
    if !issues.is_empty() {
        return Err(ResponseError::Spans(issues));
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod stub {
    //! A one-route HTTP/1.1 stub answering every request with a fixed body.

    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};
    use std::thread;

    pub struct Stub {
        pub url: String,
        pub requests: Arc<Mutex<Vec<String>>>,
    }

    pub fn serve(status: u16, body: String) -> Stub {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                let mut line = String::new();
                let mut head = String::new();
                while reader.read_line(&mut line).unwrap_or(0) > 0 {
                    if line == "\r\n" {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                    head.push_str(&line);
                    line.clear();
                }
                let mut req_body = vec![0u8; len];
                let _ = reader.read_exact(&mut req_body);
                seen.lock().unwrap().push(format!("{head}\n{}", String::from_utf8_lossy(&req_body)));
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(resp.as_bytes());
            }
        });
        Stub { url, requests }
    }
}
