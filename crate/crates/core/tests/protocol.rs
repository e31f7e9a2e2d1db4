//! Wire format properties: every encodable frame decodes to itself, and a
//! stream with corrupted lines and arbitrary read boundaries still yields
//! every intact frame in order.

use proptest::prelude::*;
use teleprobe_core::imu::ImuReading;
use teleprobe_core::protocol::{
    decode, encode, encode_text, Ack, Command, DecodeError, ErrorFrame, Frame, Heartbeat, Hello, LineDecoder, Role,
    MAX_FRAME_BYTES,
};
use teleprobe_core::{AxisId, Direction};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -360.0..360.0f64,
        Just(0.0),
        Just(-0.0),
    ]
}

fn frame() -> impl Strategy<Value = Frame> {
    let text = "[ -~\u{e9}\u{3b1}\u{1f600}\"\\\\\n\t]{0,40}";
    prop_oneof![
        (prop::sample::select(vec![Role::Operator, Role::Robot, Role::Console]), text, any::<u32>()).prop_map(
            |(role, session, proto_version)| Frame::Hello(Hello {
                role,
                session,
                proto_version
            })
        ),
        (prop::sample::select(AxisId::ALL.to_vec()), any::<bool>(), any::<bool>(), any::<u64>(), any::<u64>()).prop_map(
            |(axis, pos, on, seq, ts_ms)| Frame::Cmd(Command {
                axis,
                dir: if pos { Direction::Positive } else { Direction::Negative },
                on,
                seq,
                ts_ms
            })
        ),
        (finite(), finite(), finite(), any::<u64>(), any::<u64>()).prop_map(|(roll_deg, pitch_deg, yaw_deg, seq, ts_ms)| {
            Frame::Imu(ImuReading {
                roll_deg,
                pitch_deg,
                yaw_deg,
                seq,
                ts_ms,
            })
        }),
        (any::<u64>(), any::<u64>()).prop_map(|(seq, ts_ms)| Frame::Heartbeat(Heartbeat { seq, ts_ms })),
        (any::<u64>(), any::<u64>()).prop_map(|(ack_seq, ts_ms)| Frame::Ack(Ack { ack_seq, ts_ms })),
        ("[a-z_]{1,12}", text).prop_map(|(code, detail)| Frame::Error(ErrorFrame { code, detail })),
    ]
}

/// Bitwise comparison so that `-0.0` and `0.0` count as different.
fn same(a: &Frame, b: &Frame) -> bool {
    match (a, b) {
        (Frame::Imu(x), Frame::Imu(y)) => {
            x.roll_deg.to_bits() == y.roll_deg.to_bits()
                && x.pitch_deg.to_bits() == y.pitch_deg.to_bits()
                && x.yaw_deg.to_bits() == y.yaw_deg.to_bits()
                && x.seq == y.seq
                && x.ts_ms == y.ts_ms
        }
        _ => a == b,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100_000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn every_frame_roundtrips(f in frame()) {
        let bytes = encode(&f).unwrap();
        prop_assert!(bytes.len() <= MAX_FRAME_BYTES);
        prop_assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 1);
        prop_assert_eq!(bytes.last(), Some(&b'\n'));
        let back = decode(&bytes).unwrap();
        prop_assert!(same(&back, &f), "{:?} came back as {:?}", f, back);
        let text = encode_text(&f).unwrap();
        prop_assert!(same(&decode(text.as_bytes()).unwrap(), &f));
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }
}

#[derive(Debug, Clone)]
enum Line {
    Good(Frame),
    /// A valid frame cut short before its closing brace.
    Truncated(Frame, usize),
    /// Printable bytes that cannot start a JSON value.
    Junk(String),
    /// Longer than one frame may be.
    Oversize(usize),
}

fn line() -> impl Strategy<Value = Line> {
    prop_oneof![
        4 => frame().prop_map(Line::Good),
        1 => (frame(), any::<usize>()).prop_map(|(f, k)| Line::Truncated(f, k)),
        1 => "#[ -~]{0,60}".prop_map(Line::Junk),
        1 => (MAX_FRAME_BYTES + 1..3 * MAX_FRAME_BYTES).prop_map(Line::Oversize),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 5_000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn decoder_resynchronises_after_corruption(
        lines in prop::collection::vec(line(), 1..20),
        cuts in prop::collection::vec(1usize..200, 1..40),
    ) {
        let mut stream = Vec::new();
        let mut expected: Vec<Result<Frame, &'static str>> = Vec::new();
        for l in &lines {
            match l {
                Line::Good(f) => {
                    stream.extend(encode(f).unwrap());
                    expected.push(Ok(f.clone()));
                }
                Line::Truncated(f, k) => {
                    let mut bytes = encode(f).unwrap();
                    bytes.pop();
                    // drop the closing brace and possibly more
                    let keep = k % (bytes.len() - 1) + 1;
                    bytes.truncate(keep.min(bytes.len() - 1));
                    stream.extend(bytes);
                    stream.push(b'\n');
                    expected.push(Err("parse"));
                }
                Line::Junk(s) => {
                    stream.extend(s.as_bytes());
                    stream.push(b'\n');
                    expected.push(Err("parse"));
                }
                Line::Oversize(n) => {
                    stream.extend(std::iter::repeat_n(b'z', *n));
                    stream.push(b'\n');
                    expected.push(Err("oversize"));
                }
            }
        }
        let mut dec = LineDecoder::new();
        let mut got = Vec::new();
        let mut rest = &stream[..];
        let mut i = 0;
        while !rest.is_empty() {
            let n = cuts[i % cuts.len()].min(rest.len());
            got.extend(dec.push(&rest[..n]));
            rest = &rest[n..];
            i += 1;
        }
        prop_assert_eq!(dec.pending(), 0);
        prop_assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            match (g, e) {
                (Ok(a), Ok(b)) => prop_assert!(same(a, b)),
                (Err(err), Err(code)) => prop_assert_eq!(err.code(), *code),
                _ => prop_assert!(false, "got {:?}, expected {:?}", g, e),
            }
        }
    }
}

#[test]
fn oversize_error_is_reported_once_per_line() {
    let mut dec = LineDecoder::new();
    let junk = vec![b'z'; 4 * MAX_FRAME_BYTES];
    let mut got = Vec::new();
    for chunk in junk.chunks(100) {
        got.extend(dec.push(chunk));
    }
    got.extend(dec.push(b"\n"));
    assert_eq!(got, vec![Err(DecodeError::Oversize)]);
}
