//! Wire format and command grammar shared by the server and every client.
//!
//! A frame on the wire is a 4-byte little-endian payload length followed by
//! the payload `<request_id>:<body>`. The body of a request is a command such
//! as `vget /camera/0/rotation`; the body of a response is either the result
//! verbatim or a message starting with `error `.

use std::fmt;
use std::io::{self, Read, Write};

use thiserror::Error;

/// Default TCP port; `VIRTUCV_PORT` overrides it.
pub const DEFAULT_PORT: u16 = 9000;

/// Prefix carried by every ERROR response body.
pub const ERROR_PREFIX: &str = "error ";

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("incomplete frame: stream ended after {got} of {expected} bytes")]
    Incomplete { expected: usize, got: usize },
    /// The payload was fully consumed, so the stream is still at a frame
    /// boundary; `request_id` is set when the id prefix was readable.
    #[error("protocol error: {reason}")]
    Protocol {
        reason: String,
        request_id: Option<u64>,
    },
    #[error("frame payload of {0} bytes exceeds the limit")]
    Oversize(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub request_id: u64,
    pub body: String,
}

impl Frame {
    pub fn new(request_id: u64, body: impl Into<String>) -> Self {
        Frame {
            request_id,
            body: body.into(),
        }
    }
}

/// Serializes a frame into its length-prefixed wire form.
pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, FrameError> {
    let payload = format!("{}:{}", frame.request_id, frame.body);
    let len = payload.len();
    let len32 = u32::try_from(len).map_err(|_| FrameError::Oversize(len))?;
    let mut out = Vec::with_capacity(4 + len);
    out.extend_from_slice(&len32.to_le_bytes());
    out.extend_from_slice(payload.as_bytes());
    Ok(out)
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<(), FrameError> {
    let bytes = encode_frame(frame)?;
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame from a stream positioned at a frame boundary.
pub fn decode_frame<R: Read>(r: &mut R) -> Result<Frame, FrameError> {
    decode_frame_limited(r, u32::MAX as usize)
}

/// Like [`decode_frame`] but rejects payloads longer than `max_payload`
/// before reading them.
pub fn decode_frame_limited<R: Read>(r: &mut R, max_payload: usize) -> Result<Frame, FrameError> {
    let mut header = [0u8; 4];
    let got = read_fully(r, &mut header)?;
    if got < 4 {
        return Err(FrameError::Incomplete { expected: 4, got });
    }
    let len = u32::from_le_bytes(header) as usize;
    if len > max_payload {
        return Err(FrameError::Oversize(len));
    }
    // Grows with the data actually received; a bogus length cannot force a
    // large allocation.
    let mut payload = Vec::new();
    r.take(len as u64).read_to_end(&mut payload)?;
    if payload.len() < len {
        return Err(FrameError::Incomplete {
            expected: 4 + len,
            got: 4 + payload.len(),
        });
    }
    parse_payload(payload)
}

fn read_fully<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

fn parse_payload(payload: Vec<u8>) -> Result<Frame, FrameError> {
    let protocol = |reason: String, request_id| FrameError::Protocol { reason, request_id };
    let Some(colon) = payload.iter().position(|&b| b == b':') else {
        return Err(protocol("payload has no `id:` prefix".into(), None));
    };
    let id_bytes = &payload[..colon];
    let request_id = if !id_bytes.is_empty() && id_bytes.iter().all(u8::is_ascii_digit) {
        std::str::from_utf8(id_bytes).ok().and_then(|s| s.parse::<u64>().ok())
    } else {
        None
    };
    let Some(request_id) = request_id else {
        let shown = String::from_utf8_lossy(id_bytes);
        return Err(protocol(format!("bad request id {shown:?}"), None));
    };
    let body = std::str::from_utf8(&payload[colon + 1..])
        .map_err(|_| protocol("payload is not valid UTF-8".into(), Some(request_id)))?;
    Ok(Frame {
        request_id,
        body: body.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Get,
    Set,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Get => "vget",
            Action::Set => "vset",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("empty command")]
    Empty,
    #[error("unknown action {0:?}")]
    UnknownAction(String),
    #[error("missing or malformed URI")]
    BadUri,
    #[error("argument {0:?} contains whitespace or is empty")]
    BadArgument(String),
    #[error("path segment {0:?} is empty or contains `/` or whitespace")]
    BadSegment(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub action: Action,
    pub path: Vec<String>,
    pub args: Vec<String>,
}

impl Command {
    pub fn new<P, A>(action: Action, path: P, args: A) -> Self
    where
        P: IntoIterator,
        P::Item: Into<String>,
        A: IntoIterator,
        A::Item: Into<String>,
    {
        Command {
            action,
            path: path.into_iter().map(Into::into).collect(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn uri(&self) -> String {
        let mut s = String::new();
        for seg in &self.path {
            s.push('/');
            s.push_str(seg);
        }
        s
    }
}

/// Parses `<action> <uri> [args...]`.
///
/// Tokens are split on ASCII whitespace. A trailing `/` on the URI is
/// tolerated; empty interior segments (`//`) are not.
pub fn parse_command(text: &str) -> Result<Command, CommandError> {
    let mut tokens = text.split_ascii_whitespace();
    let action = match tokens.next() {
        None => return Err(CommandError::Empty),
        Some("vget") => Action::Get,
        Some("vset") => Action::Set,
        Some(other) => return Err(CommandError::UnknownAction(other.to_string())),
    };
    let uri = tokens.next().ok_or(CommandError::BadUri)?;
    let rest = uri.strip_prefix('/').ok_or(CommandError::BadUri)?;
    let rest = rest.strip_suffix('/').unwrap_or(rest);
    if rest.is_empty() {
        return Err(CommandError::BadUri);
    }
    let mut path = Vec::new();
    for seg in rest.split('/') {
        if seg.is_empty() {
            return Err(CommandError::BadUri);
        }
        path.push(seg.to_string());
    }
    let args = tokens.map(str::to_string).collect();
    Ok(Command { action, path, args })
}

/// Renders a command back into the text form accepted by [`parse_command`].
pub fn format_command(cmd: &Command) -> Result<String, CommandError> {
    if cmd.path.is_empty() {
        return Err(CommandError::BadUri);
    }
    let mut out = String::from(cmd.action.as_str());
    out.push(' ');
    for seg in &cmd.path {
        if seg.is_empty() || seg.contains('/') || seg.chars().any(|c| c.is_ascii_whitespace()) {
            return Err(CommandError::BadSegment(seg.clone()));
        }
        out.push('/');
        out.push_str(seg);
    }
    for arg in &cmd.args {
        if arg.is_empty() || arg.chars().any(|c| c.is_ascii_whitespace()) {
            return Err(CommandError::BadArgument(arg.clone()));
        }
        out.push(' ');
        out.push_str(arg);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub request_id: u64,
    pub status: Status,
    pub body: String,
}

impl Response {
    pub fn ok(request_id: u64, body: impl Into<String>) -> Self {
        Response {
            request_id,
            status: Status::Ok,
            body: body.into(),
        }
    }

    /// Builds an ERROR response; `reason` is appended after `error `.
    pub fn error(request_id: u64, reason: impl fmt::Display) -> Self {
        Response {
            request_id,
            status: Status::Error,
            body: format!("{ERROR_PREFIX}{reason}"),
        }
    }

    pub fn from_frame(frame: Frame) -> Self {
        let status = if frame.body.starts_with(ERROR_PREFIX) {
            Status::Error
        } else {
            Status::Ok
        };
        Response {
            request_id: frame.request_id,
            status,
            body: frame.body,
        }
    }

    pub fn into_frame(self) -> Frame {
        Frame {
            request_id: self.request_id,
            body: self.body,
        }
    }

    /// The reason text of an ERROR response, without the `error ` prefix.
    pub fn error_message(&self) -> Option<&str> {
        match self.status {
            Status::Error => Some(self.body.strip_prefix(ERROR_PREFIX).unwrap_or(&self.body)),
            Status::Ok => None,
        }
    }
}

/// Formats a real for the wire using the shortest decimal that parses back
/// to the same value.
pub fn fmt_real(v: f64) -> String {
    // `Display` for f64 is shortest-round-trip; normalize -0 so that set/get
    // of a zero reads back as "0".
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

pub fn fmt_reals(vals: &[f64]) -> String {
    vals.iter().map(|v| fmt_real(*v)).collect::<Vec<_>>().join(" ")
}
