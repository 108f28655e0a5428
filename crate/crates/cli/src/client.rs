//! Blocking HTTP client for the coordinator API.

use std::io::{BufRead, BufReader};
use std::time::Duration;

use fairdraw_service::{
    AbortRequest, CommitRequest, CreateRequest, CreateResponse, ErrorBody, RevealRequest, Snapshot,
    WhoAmI,
};
use reqwest::blocking::{Client as Http, RequestBuilder, Response};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

pub struct Client {
    base: String,
    token: Option<String>,
    http: Http,
}

fn transport(e: reqwest::Error) -> CliError {
    CliError::Transport(e.to_string())
}

impl Client {
    pub fn new(server: &str, token: Option<String>) -> Result<Client, CliError> {
        let http = Http::builder()
            .connect_timeout(Duration::from_secs(10))
            .timeout(None::<Duration>)
            .build()
            .map_err(transport)?;
        Ok(Client {
            base: server.trim_end_matches('/').to_string(),
            token,
            http,
        })
    }

    fn url(&self, session: Option<&str>, tail: &str) -> String {
        match session {
            None => format!("{}/v1/ceremonies{tail}", self.base),
            Some(s) => format!("{}/v1/ceremonies/{}{tail}", self.base, encode_segment(s)),
        }
    }

    fn authed(&self, req: RequestBuilder) -> RequestBuilder {
        match &self.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        }
    }

    fn require_token(&self) -> Result<(), CliError> {
        if self.token.is_none() {
            return Err(CliError::Usage("this command needs --token".into()));
        }
        Ok(())
    }

    fn send(&self, req: RequestBuilder) -> Result<Response, CliError> {
        let resp = self.authed(req).send().map_err(transport)?;
        if resp.status().is_success() {
            return Ok(resp);
        }
        let status = resp.status().as_u16();
        let text = resp.text().unwrap_or_default();
        let body = serde_json::from_str::<ErrorBody>(&text).unwrap_or(ErrorBody {
            error: format!("Http{status}"),
            message: text,
        });
        Err(CliError::Rejected { status, body })
    }

    fn json<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, CliError> {
        self.send(req)?.json().map_err(transport)
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, url: String, body: &B) -> Result<T, CliError> {
        self.json(self.http.post(url).json(body))
    }

    pub fn create(&self, req: &CreateRequest) -> Result<CreateResponse, CliError> {
        self.post(self.url(None, ""), req)
    }

    pub fn state(&self, session: &str) -> Result<Snapshot, CliError> {
        self.json(self.http.get(self.url(Some(session), "")))
    }

    pub fn whoami(&self, session: &str) -> Result<WhoAmI, CliError> {
        self.require_token()?;
        self.json(self.http.get(self.url(Some(session), "/me")))
    }

    pub fn commit(&self, session: &str, digest_hex: String) -> Result<Snapshot, CliError> {
        self.require_token()?;
        self.post(self.url(Some(session), "/commitments"), &CommitRequest { digest: digest_hex })
    }

    pub fn reveal(&self, session: &str, value: u64, mask_hex: String) -> Result<Snapshot, CliError> {
        self.require_token()?;
        self.post(
            self.url(Some(session), "/reveals"),
            &RevealRequest { value, mask: mask_hex },
        )
    }

    pub fn abort(&self, session: &str, req: &AbortRequest) -> Result<Snapshot, CliError> {
        self.require_token()?;
        self.post(self.url(Some(session), "/abort"), req)
    }

    /// Raw transcript bytes and the quarantine warning, if any.
    pub fn transcript(&self, session: &str) -> Result<(Vec<u8>, Option<String>), CliError> {
        let resp = self.send(self.http.get(self.url(Some(session), "/transcript")))?;
        let warning = resp
            .headers()
            .get(fairdraw_service::WARNING_HEADER)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let bytes = resp.bytes().map_err(transport)?.to_vec();
        Ok((bytes, warning))
    }

    /// Opens the event stream at `from_seq`.
    pub fn events(&self, session: &str, from_seq: u64) -> Result<SseReader, CliError> {
        let url = self.url(Some(session), &format!("/events?from_seq={from_seq}"));
        let resp = self.send(self.http.get(url).header("accept", "text/event-stream"))?;
        Ok(SseReader {
            inner: BufReader::new(resp),
        })
    }
}

fn encode_segment(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || b"-._~".contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SseMessage {
    pub id: Option<String>,
    pub event: Option<String>,
    pub data: String,
}

/// Minimal `text/event-stream` parser over a blocking body.
pub struct SseReader {
    inner: BufReader<Response>,
}

impl SseReader {
    /// Next message; `Ok(None)` on a clean end of stream.
    pub fn next_message(&mut self) -> std::io::Result<Option<SseMessage>> {
        parse_next(&mut self.inner)
    }
}

pub(crate) fn parse_next<R: BufRead>(r: &mut R) -> std::io::Result<Option<SseMessage>> {
    let mut msg = SseMessage {
        id: None,
        event: None,
        data: String::new(),
    };
    let mut has_data = false;
    let mut line = String::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        let l = line.trim_end_matches(['\r', '\n']);
        if l.is_empty() {
            if has_data {
                return Ok(Some(msg));
            }
            msg.id = None;
            msg.event = None;
            continue;
        }
        if l.starts_with(':') {
            continue;
        }
        let (field, value) = match l.split_once(':') {
            Some((f, v)) => (f, v.strip_prefix(' ').unwrap_or(v)),
            None => (l, ""),
        };
        match field {
            "id" => msg.id = Some(value.to_string()),
            "event" => msg.event = Some(value.to_string()),
            "data" => {
                if has_data {
                    msg.data.push('\n');
                }
                msg.data.push_str(value);
                has_data = true;
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_events_and_skips_comments() {
        let text = ": keep-alive\n\nid: 0\nevent: created\ndata: {\"a\":1}\n\nid: 1\ndata: x\ndata: y\n\n";
        let mut r = std::io::Cursor::new(text);
        let a = parse_next(&mut r).unwrap().unwrap();
        assert_eq!(a.id.as_deref(), Some("0"));
        assert_eq!(a.event.as_deref(), Some("created"));
        assert_eq!(a.data, "{\"a\":1}");
        let b = parse_next(&mut r).unwrap().unwrap();
        assert_eq!(b.data, "x\ny");
        assert_eq!(parse_next(&mut r).unwrap(), None);
    }

    #[test]
    fn path_segments_are_escaped() {
        assert_eq!(encode_segment("draw 7/a"), "draw%207%2Fa");
        assert_eq!(encode_segment("S-0_x.y~"), "S-0_x.y~");
    }
}
