//! Device abstraction: anything that can report UI state and perform
//! actions.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ui::{ActionKind, ElementKey, UiState};

pub mod bridge;
pub mod sim;

pub use bridge::{serve_connection, BridgeClient};
pub use sim::{load_app_model, load_models_path, AppModel, ModelError, Simulator};

/// One concrete action to perform on a device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    /// Target element; required for every kind except `StartApp`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ElementKey>,
    /// Text payload; required for `Edit`, forbidden otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Application to open; required for `StartApp`, forbidden otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_id: Option<String>,
}

impl Action {
    pub fn start_app(app_id: impl Into<String>) -> Self {
        Action {
            kind: ActionKind::StartApp,
            target: None,
            text: None,
            app_id: Some(app_id.into()),
        }
    }

    fn on_element(kind: ActionKind, target: impl Into<ElementKey>) -> Self {
        Action { kind, target: Some(target.into()), text: None, app_id: None }
    }

    pub fn click(target: impl Into<ElementKey>) -> Self {
        Action::on_element(ActionKind::Click, target)
    }

    pub fn long_click(target: impl Into<ElementKey>) -> Self {
        Action::on_element(ActionKind::LongClick, target)
    }

    pub fn check(target: impl Into<ElementKey>) -> Self {
        Action::on_element(ActionKind::Check, target)
    }

    pub fn edit(target: impl Into<ElementKey>, text: impl Into<String>) -> Self {
        Action {
            kind: ActionKind::Edit,
            target: Some(target.into()),
            text: Some(text.into()),
            app_id: None,
        }
    }

    pub fn scroll_up(target: impl Into<ElementKey>) -> Self {
        Action::on_element(ActionKind::ScrollUp, target)
    }

    pub fn scroll_down(target: impl Into<ElementKey>) -> Self {
        Action::on_element(ActionKind::ScrollDown, target)
    }

    /// Checks the per-kind field requirements.
    pub fn validate(&self) -> Result<(), DeviceError> {
        let ok = match self.kind {
            ActionKind::StartApp => {
                self.app_id.is_some() && self.target.is_none() && self.text.is_none()
            }
            ActionKind::Edit => {
                self.target.is_some() && self.text.is_some() && self.app_id.is_none()
            }
            _ => self.target.is_some() && self.text.is_none() && self.app_id.is_none(),
        };
        if ok {
            Ok(())
        } else {
            Err(DeviceError::InvalidAction(format!(
                "{} action has wrong fields",
                self.kind.phrase()
            )))
        }
    }
}

/// Outcome of a successfully performed action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResult {
    /// Digest of the state after the action settled.
    pub state_digest: String,
}

/// Device-side failure.
#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("no application session is open; start an app first")]
    NoSession,
    #[error("unknown application '{0}'")]
    UnknownApp(String),
    #[error("unknown screen '{0}'")]
    UnknownScreen(String),
    #[error("no element '{0}' on the current screen")]
    UnknownTarget(ElementKey),
    #[error("element '{element}' does not support {}", kind.phrase())]
    UnsupportedKind { element: ElementKey, kind: ActionKind },
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("device did not respond within {0:?}")]
    Timeout(Duration),
    #[error("device connection closed")]
    Disconnected,
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("device reported an error: {0}")]
    Remote(String),
    #[error("device i/o failed")]
    Io(#[from] std::io::Error),
}

/// A GUI device: observable state plus performable actions.
pub trait Device {
    /// Snapshot of the current screen. Fails with [`DeviceError::NoSession`]
    /// until an app has been started.
    fn get_state(&mut self) -> Result<UiState, DeviceError>;

    /// Performs `action` and reports the digest of the resulting state.
    fn perform(&mut self, action: &Action) -> Result<ActionResult, DeviceError>;
}

impl Device for Box<dyn Device> {
    fn get_state(&mut self) -> Result<UiState, DeviceError> {
        (**self).get_state()
    }

    fn perform(&mut self, action: &Action) -> Result<ActionResult, DeviceError> {
        (**self).perform(action)
    }
}
