//! The scripted operator against a live robot or relay.

use teleprobe_core::operator::{OperatorConfig, OperatorOutput, OperatorSession, SegmentRecord, TaskOutcome};
use teleprobe_core::protocol::{encode, LineDecoder};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::time::{Duration, Instant};

use super::{dial, DialPolicy, ServiceError};

#[derive(Debug, Clone)]
pub struct OperateConfig {
    /// Robot (access point) or relay address.
    pub addr: String,
    pub operator: OperatorConfig,
    pub dial: DialPolicy,
}

#[derive(Debug, Clone)]
pub struct OperateResult {
    pub outcome: TaskOutcome,
    pub segments: Vec<SegmentRecord>,
}

/// Runs the target script to completion. `on_segment` sees each record as
/// it closes.
pub async fn run_operator(
    config: OperateConfig,
    mut on_segment: impl FnMut(&SegmentRecord),
) -> Result<OperateResult, ServiceError> {
    let stream = dial(&config.addr, config.dial).await?;
    let (mut reader, mut writer) = stream.into_split();
    let mut session = OperatorSession::new(config.operator);
    let mut decoder = LineDecoder::new();
    let mut buf = vec![0u8; 4096];
    let mut segments = Vec::new();
    let mut open = true;
    let start = Instant::now();
    let now_ms = || start.elapsed().as_millis() as u64;

    let mut pending = session.start(0);
    loop {
        let mut finished = None;
        for o in pending.drain(..) {
            match o {
                OperatorOutput::Send(f) => {
                    if open {
                        if let Ok(bytes) = encode(&f) {
                            if writer.write_all(&bytes).await.is_err() {
                                open = false;
                            }
                        }
                    }
                }
                OperatorOutput::Segment(s) => {
                    on_segment(&s);
                    segments.push(s);
                }
                OperatorOutput::Finished(outcome) => finished = Some(outcome),
            }
        }
        if let Some(outcome) = finished {
            let _ = writer.shutdown().await;
            return Ok(OperateResult { outcome, segments });
        }
        let wake = session.next_wakeup_ms().map(|t| start + Duration::from_millis(t));
        tokio::select! {
            read = reader.read(&mut buf), if open => match read {
                Ok(0) | Err(_) => {
                    // telemetry stops; the session's silence timeout ends the run
                    tracing::warn!(event = "link_closed", at_ms = now_ms());
                    open = false;
                }
                Ok(n) => {
                    for frame in decoder.push(&buf[..n]).into_iter().flatten() {
                        pending.extend(session.on_frame(&frame, now_ms()));
                    }
                }
            },
            _ = tokio::time::sleep_until(wake.unwrap_or(start)), if wake.is_some() => {
                pending.extend(session.tick(now_ms()));
            }
            else => return Ok(OperateResult { outcome: TaskOutcome::TelemetryLost, segments }),
        }
    }
}
