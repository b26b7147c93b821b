//! Remote device over a newline-delimited JSON protocol.
//!
//! Each request is one JSON line (`{"op":"get_state"}` or
//! `{"op":"perform","action":{...}}`) answered by one JSON line carrying
//! the full state after the operation. The client never trusts the remote
//! digest: state digests are recomputed locally during deserialization, so
//! any conforming server is observationally interchangeable with the
//! in-process simulator.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::device::{Action, ActionResult, Device, DeviceError};
use crate::ui::UiState;

/// One request line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum BridgeRequest {
    GetState,
    Perform { action: Action },
}

/// One response line. `state` is present exactly when `ok` is true.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BridgeResponse {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<UiState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// [`Device`] backed by a remote bridge server.
#[derive(Debug)]
pub struct BridgeClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    timeout: Duration,
}

impl BridgeClient {
    /// Connects to `addr` (e.g. `127.0.0.1:7100`); every request must be
    /// answered within `timeout`.
    pub fn connect(addr: &str, timeout: Duration) -> Result<BridgeClient, DeviceError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_read_timeout(Some(timeout))?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(BridgeClient { reader, writer: stream, timeout })
    }

    fn round_trip(&mut self, request: &BridgeRequest) -> Result<UiState, DeviceError> {
        let mut line = serde_json::to_string(request)
            .map_err(|e| DeviceError::Protocol(format!("cannot encode request: {e}")))?;
        line.push('\n');
        self.writer.write_all(line.as_bytes()).map_err(|e| self.classify_io(e))?;

        let mut reply = String::new();
        let n = self.reader.read_line(&mut reply).map_err(|e| self.classify_io(e))?;
        if n == 0 {
            return Err(DeviceError::Disconnected);
        }
        let response: BridgeResponse = serde_json::from_str(&reply)
            .map_err(|e| DeviceError::Protocol(format!("bad response line: {e}")))?;
        if !response.ok {
            return Err(DeviceError::Remote(
                response.error.unwrap_or_else(|| "unspecified error".to_string()),
            ));
        }
        let state = response
            .state
            .ok_or_else(|| DeviceError::Protocol("ok response without state".to_string()))?;
        state
            .validate()
            .map_err(|e| DeviceError::Protocol(format!("remote state is malformed: {e}")))?;
        Ok(state)
    }

    fn classify_io(&self, e: std::io::Error) -> DeviceError {
        use std::io::ErrorKind;
        match e.kind() {
            ErrorKind::WouldBlock | ErrorKind::TimedOut => DeviceError::Timeout(self.timeout),
            ErrorKind::UnexpectedEof | ErrorKind::ConnectionReset | ErrorKind::BrokenPipe => {
                DeviceError::Disconnected
            }
            _ => DeviceError::Io(e),
        }
    }
}

impl Device for BridgeClient {
    fn get_state(&mut self) -> Result<UiState, DeviceError> {
        self.round_trip(&BridgeRequest::GetState)
    }

    fn perform(&mut self, action: &Action) -> Result<ActionResult, DeviceError> {
        action.validate()?;
        let state = self.round_trip(&BridgeRequest::Perform { action: action.clone() })?;
        Ok(ActionResult { state_digest: state.state_digest })
    }
}

/// Serves one bridge connection over any device until the peer hangs up.
///
/// This is the other end of [`BridgeClient`]; it exists so a simulator can
/// be exposed over TCP and so protocol tests can drive both ends.
pub fn serve_connection<D: Device>(
    device: &mut D,
    reader: impl BufRead,
    mut writer: impl Write,
) -> std::io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<BridgeRequest>(&line) {
            Err(e) => BridgeResponse {
                ok: false,
                state: None,
                error: Some(format!("bad request: {e}")),
            },
            Ok(request) => {
                let outcome = match request {
                    BridgeRequest::GetState => device.get_state(),
                    BridgeRequest::Perform { action } => {
                        device.perform(&action).and_then(|_| device.get_state())
                    }
                };
                match outcome {
                    Ok(state) => BridgeResponse { ok: true, state: Some(state), error: None },
                    Err(e) => {
                        BridgeResponse { ok: false, state: None, error: Some(e.to_string()) }
                    }
                }
            }
        };
        let mut encoded = serde_json::to_string(&response).expect("response serializes");
        encoded.push('\n');
        writer.write_all(encoded.as_bytes())?;
        writer.flush()?;
    }
    Ok(())
}
