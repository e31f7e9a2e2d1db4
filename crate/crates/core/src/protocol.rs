//! Newline-delimited JSON frames exchanged by operators, robots, relays and
//! consoles.
//!
//! Each frame is one JSON object on one line, discriminated by `"t"`:
//!
//! ```text
//! {"t":"cmd","axis":"LR","dir":1,"on":true,"seq":7,"ts_ms":100}
//! {"t":"hb","seq":1,"ts_ms":0}
//! ```
//!
//! Decoding ignores unknown top-level fields. Every failure maps to a stable
//! error code that is echoed back to the peer in an `err` frame.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::ser::{Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::axis::{AxisId, Direction};
use crate::imu::ImuReading;

/// Upper bound for one encoded frame, newline included.
pub const MAX_FRAME_BYTES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Operator,
    Robot,
    Console,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Operator => "operator",
            Role::Robot => "robot",
            Role::Console => "console",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "operator" => Some(Role::Operator),
            "robot" => Some(Role::Robot),
            "console" => Some(Role::Console),
            _ => None,
        }
    }
}

impl Serialize for Role {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl Serialize for AxisId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.wire_code())
    }
}

impl Serialize for Direction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.sign())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Hello {
    pub role: Role,
    pub session: String,
    pub proto_version: u32,
}

/// An on/off edge for one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Command {
    pub axis: AxisId,
    pub dir: Direction,
    pub on: bool,
    pub seq: u64,
    pub ts_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Heartbeat {
    pub seq: u64,
    pub ts_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Ack {
    pub ack_seq: u64,
    pub ts_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ErrorFrame {
    pub code: String,
    pub detail: String,
}

impl ErrorFrame {
    pub fn new(code: &str, detail: impl Into<String>) -> Self {
        ErrorFrame {
            code: code.to_string(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "t")]
pub enum Frame {
    #[serde(rename = "hello")]
    Hello(Hello),
    #[serde(rename = "cmd")]
    Cmd(Command),
    #[serde(rename = "imu")]
    Imu(ImuReading),
    #[serde(rename = "hb")]
    Heartbeat(Heartbeat),
    #[serde(rename = "ack")]
    Ack(Ack),
    #[serde(rename = "err")]
    Error(ErrorFrame),
}

impl Frame {
    pub fn kind(&self) -> FrameKind {
        match self {
            Frame::Hello(_) => FrameKind::Hello,
            Frame::Cmd(_) => FrameKind::Cmd,
            Frame::Imu(_) => FrameKind::Imu,
            Frame::Heartbeat(_) => FrameKind::Heartbeat,
            Frame::Ack(_) => FrameKind::Ack,
            Frame::Error(_) => FrameKind::Error,
        }
    }

    /// Sender sequence number, for frame kinds that carry one.
    pub fn seq(&self) -> Option<u64> {
        match self {
            Frame::Cmd(c) => Some(c.seq),
            Frame::Imu(r) => Some(r.seq),
            Frame::Heartbeat(h) => Some(h.seq),
            Frame::Ack(a) => Some(a.ack_seq),
            Frame::Hello(_) | Frame::Error(_) => None,
        }
    }

    pub fn error(code: &str, detail: impl Into<String>) -> Self {
        Frame::Error(ErrorFrame::new(code, detail))
    }

    pub fn hello(role: Role, session: impl Into<String>) -> Self {
        Frame::Hello(Hello {
            role,
            session: session.into(),
            proto_version: crate::PROTO_VERSION,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameKind {
    Hello,
    Cmd,
    Imu,
    Heartbeat,
    Ack,
    Error,
}

impl FrameKind {
    pub fn tag(self) -> &'static str {
        match self {
            FrameKind::Hello => "hello",
            FrameKind::Cmd => "cmd",
            FrameKind::Imu => "imu",
            FrameKind::Heartbeat => "hb",
            FrameKind::Ack => "ack",
            FrameKind::Error => "err",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "hello" => Some(FrameKind::Hello),
            "cmd" => Some(FrameKind::Cmd),
            "imu" => Some(FrameKind::Imu),
            "hb" => Some(FrameKind::Heartbeat),
            "ack" => Some(FrameKind::Ack),
            "err" => Some(FrameKind::Error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("encoded frame is {0} bytes, limit is {MAX_FRAME_BYTES}")]
    Oversize(usize),
    #[error("frame contains a non-finite number")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("frame is not a JSON object")]
    NotObject,
    #[error("unknown frame type {0:?}")]
    UnknownType(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{0}` has the wrong type")]
    WrongType(&'static str),
    #[error("field `{0}` is out of range")]
    OutOfRange(&'static str),
    #[error("line exceeds {MAX_FRAME_BYTES} bytes")]
    Oversize,
}

impl DecodeError {
    /// Stable code sent back in `err` frames.
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::Malformed(_) => "parse",
            DecodeError::NotObject => "object",
            DecodeError::UnknownType(_) => "type",
            DecodeError::MissingField(_) => "missing",
            DecodeError::WrongType(_) => "field",
            DecodeError::OutOfRange(_) => "range",
            DecodeError::Oversize => "oversize",
        }
    }
}

/// Serialises `frame` as one JSON line terminated by `\n`.
pub fn encode(frame: &Frame) -> Result<Vec<u8>, EncodeError> {
    if let Frame::Imu(r) = frame {
        if ![r.roll_deg, r.pitch_deg, r.yaw_deg].iter().all(|v| v.is_finite()) {
            return Err(EncodeError::NonFinite);
        }
    }
    let mut out = serde_json::to_vec(frame).expect("frames always serialize");
    out.push(b'\n');
    if out.len() > MAX_FRAME_BYTES {
        return Err(EncodeError::Oversize(out.len()));
    }
    Ok(out)
}

/// Same as [`encode`] but without the trailing newline, for message-framed
/// transports such as WebSocket text messages.
pub fn encode_text(frame: &Frame) -> Result<String, EncodeError> {
    let mut bytes = encode(frame)?;
    bytes.pop();
    Ok(String::from_utf8(bytes).expect("serde_json emits UTF-8"))
}

/// Parses one frame. A single trailing `\n` (or `\r\n`) is accepted.
pub fn decode(line: &[u8]) -> Result<Frame, DecodeError> {
    if line.len() > MAX_FRAME_BYTES {
        return Err(DecodeError::Oversize);
    }
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    let value: Value =
        serde_json::from_slice(line).map_err(|e| DecodeError::Malformed(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(DecodeError::NotObject);
    };
    let fields = Fields(&obj);
    let tag = fields.str("t")?;
    let kind = FrameKind::from_tag(tag).ok_or_else(|| DecodeError::UnknownType(tag.to_string()))?;
    Ok(match kind {
        FrameKind::Hello => {
            let role = fields.str("role")?;
            Frame::Hello(Hello {
                role: Role::parse(role).ok_or(DecodeError::OutOfRange("role"))?,
                session: fields.str("session")?.to_string(),
                proto_version: u32::try_from(fields.u64("proto_version")?)
                    .map_err(|_| DecodeError::OutOfRange("proto_version"))?,
            })
        }
        FrameKind::Cmd => {
            let axis = fields.str("axis")?;
            let dir = fields.i64("dir")?;
            Frame::Cmd(Command {
                axis: AxisId::from_wire_code(axis).ok_or(DecodeError::OutOfRange("axis"))?,
                dir: Direction::from_sign(dir).ok_or(DecodeError::OutOfRange("dir"))?,
                on: fields.bool("on")?,
                seq: fields.u64("seq")?,
                ts_ms: fields.u64("ts_ms")?,
            })
        }
        FrameKind::Imu => Frame::Imu(ImuReading {
            roll_deg: fields.f64("roll_deg")?,
            pitch_deg: fields.f64("pitch_deg")?,
            yaw_deg: fields.f64("yaw_deg")?,
            seq: fields.u64("seq")?,
            ts_ms: fields.u64("ts_ms")?,
        }),
        FrameKind::Heartbeat => Frame::Heartbeat(Heartbeat {
            seq: fields.u64("seq")?,
            ts_ms: fields.u64("ts_ms")?,
        }),
        FrameKind::Ack => Frame::Ack(Ack {
            ack_seq: fields.u64("ack_seq")?,
            ts_ms: fields.u64("ts_ms")?,
        }),
        FrameKind::Error => Frame::Error(ErrorFrame {
            code: fields.str("code")?.to_string(),
            detail: fields.str("detail")?.to_string(),
        }),
    })
}

struct Fields<'a>(&'a Map<String, Value>);

impl<'a> Fields<'a> {
    fn get(&self, name: &'static str) -> Result<&'a Value, DecodeError> {
        self.0.get(name).ok_or(DecodeError::MissingField(name))
    }

    fn str(&self, name: &'static str) -> Result<&'a str, DecodeError> {
        self.get(name)?.as_str().ok_or(DecodeError::WrongType(name))
    }

    fn bool(&self, name: &'static str) -> Result<bool, DecodeError> {
        self.get(name)?.as_bool().ok_or(DecodeError::WrongType(name))
    }

    fn f64(&self, name: &'static str) -> Result<f64, DecodeError> {
        self.get(name)?.as_f64().ok_or(DecodeError::WrongType(name))
    }

    fn u64(&self, name: &'static str) -> Result<u64, DecodeError> {
        let v = self.get(name)?;
        if let Some(n) = v.as_u64() {
            Ok(n)
        } else if v.is_i64() {
            Err(DecodeError::OutOfRange(name))
        } else {
            Err(DecodeError::WrongType(name))
        }
    }

    fn i64(&self, name: &'static str) -> Result<i64, DecodeError> {
        let v = self.get(name)?;
        if let Some(n) = v.as_i64() {
            Ok(n)
        } else if v.is_u64() {
            Err(DecodeError::OutOfRange(name))
        } else {
            Err(DecodeError::WrongType(name))
        }
    }
}

/// Splits a byte stream into frames.
///
/// A bad line yields an error and decoding resumes at the next `\n`. Lines
/// longer than [`MAX_FRAME_BYTES`] are discarded up to their newline.
#[derive(Debug, Default)]
pub struct LineDecoder {
    buf: Vec<u8>,
    discarding: bool,
}

impl LineDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds bytes and returns every frame completed by them, in order.
    pub fn push(&mut self, bytes: &[u8]) -> Vec<Result<Frame, DecodeError>> {
        let mut out = Vec::new();
        for chunk in bytes.split_inclusive(|&b| b == b'\n') {
            let complete = chunk.last() == Some(&b'\n');
            if self.discarding {
                if complete {
                    self.discarding = false;
                }
                continue;
            }
            self.buf.extend_from_slice(chunk);
            if complete {
                let line = core::mem::take(&mut self.buf);
                if line.iter().all(|b| b.is_ascii_whitespace()) {
                    continue;
                }
                out.push(decode(&line));
            } else if self.buf.len() > MAX_FRAME_BYTES {
                self.buf.clear();
                self.discarding = true;
                out.push(Err(DecodeError::Oversize));
            }
        }
        out
    }

    /// Bytes of an incomplete trailing line.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cmd() -> Frame {
        Frame::Cmd(Command {
            axis: AxisId::SteerLR,
            dir: Direction::Positive,
            on: true,
            seq: 7,
            ts_ms: 100,
        })
    }

    #[test]
    fn command_bytes() {
        assert_eq!(
            encode(&cmd()).unwrap(),
            b"{\"t\":\"cmd\",\"axis\":\"LR\",\"dir\":1,\"on\":true,\"seq\":7,\"ts_ms\":100}\n"
        );
    }

    #[test]
    fn heartbeat_bytes() {
        let hb = Frame::Heartbeat(Heartbeat { seq: 1, ts_ms: 0 });
        assert_eq!(encode(&hb).unwrap(), b"{\"t\":\"hb\",\"seq\":1,\"ts_ms\":0}\n");
    }

    #[test]
    fn other_frame_bytes() {
        assert_eq!(
            encode_text(&Frame::hello(Role::Operator, "s1")).unwrap(),
            r#"{"t":"hello","role":"operator","session":"s1","proto_version":1}"#
        );
        assert_eq!(
            encode_text(&Frame::Ack(Ack { ack_seq: 3, ts_ms: 9 })).unwrap(),
            r#"{"t":"ack","ack_seq":3,"ts_ms":9}"#
        );
        assert_eq!(
            encode_text(&Frame::error("busy", "operator slot taken")).unwrap(),
            r#"{"t":"err","code":"busy","detail":"operator slot taken"}"#
        );
        let imu = Frame::Imu(ImuReading {
            roll_deg: 1.5,
            pitch_deg: -0.25,
            yaw_deg: 0.0,
            seq: 2,
            ts_ms: 40,
        });
        assert_eq!(
            encode_text(&imu).unwrap(),
            r#"{"t":"imu","roll_deg":1.5,"pitch_deg":-0.25,"yaw_deg":0.0,"seq":2,"ts_ms":40}"#
        );
    }

    #[test]
    fn decodes_command_and_ignores_unknown_fields() {
        let line = br#"{"t":"cmd","axis":"LR","dir":1,"on":true,"seq":7,"ts_ms":100,"extra":[1,2]}"#;
        assert_eq!(decode(line).unwrap(), cmd());
    }

    #[test]
    fn distinct_error_codes() {
        let cases: [(&[u8], &str); 8] = [
            (b"{\"t\":\"cmd\",\"axis\":\"LR\"", "parse"),
            (b"[1,2]", "object"),
            (b"{\"t\":\"zzz\"}", "type"),
            (b"{\"t\":\"hb\",\"seq\":1}", "missing"),
            (b"{\"t\":\"hb\",\"seq\":\"1\",\"ts_ms\":0}", "field"),
            (
                b"{\"t\":\"cmd\",\"axis\":\"XX\",\"dir\":1,\"on\":true,\"seq\":1,\"ts_ms\":0}",
                "range",
            ),
            (
                b"{\"t\":\"cmd\",\"axis\":\"LR\",\"dir\":0,\"on\":true,\"seq\":1,\"ts_ms\":0}",
                "range",
            ),
            (b"{\"t\":\"hb\",\"seq\":-4,\"ts_ms\":0}", "range"),
        ];
        for (line, code) in cases {
            let err = decode(line).unwrap_err();
            assert_eq!(err.code(), code, "{err}");
        }
    }

    #[test]
    fn oversize_encode_is_rejected() {
        let big = Frame::error("x", "y".repeat(MAX_FRAME_BYTES));
        assert!(matches!(encode(&big), Err(EncodeError::Oversize(_))));
    }

    #[test]
    fn non_finite_telemetry_is_rejected() {
        let imu = Frame::Imu(ImuReading {
            roll_deg: f64::NAN,
            pitch_deg: 0.0,
            yaw_deg: 0.0,
            seq: 1,
            ts_ms: 0,
        });
        assert_eq!(encode(&imu), Err(EncodeError::NonFinite));
    }

    #[test]
    fn stream_resynchronises_after_truncated_line() {
        let mut dec = LineDecoder::new();
        let mut bytes = b"{\"t\":\"cmd\",\"axis\":\"LR\",\"di".to_vec();
        bytes.push(b'\n');
        bytes.extend(encode(&cmd()).unwrap());
        let got = dec.push(&bytes);
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].as_ref().unwrap_err().code(), "parse");
        assert_eq!(got[1].as_ref().unwrap(), &cmd());
    }

    #[test]
    fn stream_handles_split_writes_and_long_garbage() {
        let mut dec = LineDecoder::new();
        let line = encode(&cmd()).unwrap();
        let (a, b) = line.split_at(10);
        assert!(dec.push(a).is_empty());
        assert_eq!(dec.push(b), vec![Ok(cmd())]);

        let garbage = vec![b'x'; MAX_FRAME_BYTES + 10];
        let got = dec.push(&garbage);
        assert_eq!(got, vec![Err(DecodeError::Oversize)]);
        let mut rest = b"more garbage\n".to_vec();
        rest.extend(&line);
        assert_eq!(dec.push(&rest), vec![Ok(cmd())]);
        assert_eq!(dec.pending(), 0);
    }
}
