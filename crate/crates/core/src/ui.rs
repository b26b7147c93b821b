//! Normalized GUI state: element trees, per-element action derivation, and
//! display-name resolution.
//!
//! A [`UiState`] is an immutable snapshot of one screen. Everything the rest
//! of the pipeline consumes (prompt fragments, action bindings, state
//! digests) is derived from the normalized element list produced by
//! [`normalize_tree`].

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::digest::sha256_hex;

/// Opaque, stable element identifier within one state snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementKey(pub String);

impl ElementKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ElementKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ElementKey {
    fn from(s: &str) -> Self {
        ElementKey(s.to_string())
    }
}

impl From<String> for ElementKey {
    fn from(s: String) -> Self {
        ElementKey(s)
    }
}

/// The closed set of action kinds an agent can issue.
///
/// All but `StartApp` are derived from element flags; `StartApp` is only ever
/// issued by the agent itself to open an application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Click,
    LongClick,
    Check,
    Edit,
    ScrollUp,
    ScrollDown,
    StartApp,
}

impl ActionKind {
    /// Fixed order in which element-derived actions are listed in prompts.
    pub const ELEMENT_ORDER: [ActionKind; 6] = [
        ActionKind::Click,
        ActionKind::LongClick,
        ActionKind::Check,
        ActionKind::Edit,
        ActionKind::ScrollUp,
        ActionKind::ScrollDown,
    ];

    /// Human-readable phrase used in prompts and trace strings.
    pub fn phrase(&self) -> &'static str {
        match self {
            ActionKind::Click => "click",
            ActionKind::LongClick => "long click",
            ActionKind::Check => "check",
            ActionKind::Edit => "edit",
            ActionKind::ScrollUp => "scroll up",
            ActionKind::ScrollDown => "scroll down",
            ActionKind::StartApp => "start app",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.phrase())
    }
}

/// Integer pixel rectangle: left, top, right, bottom.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[i32; 4]", into = "[i32; 4]")]
pub struct Bounds {
    pub left: i32,
    pub top: i32,
    pub right: i32,
    pub bottom: i32,
}

impl Bounds {
    pub fn new(left: i32, top: i32, right: i32, bottom: i32) -> Self {
        Bounds { left, top, right, bottom }
    }

    /// Width and height are both non-negative.
    pub fn well_formed(&self) -> bool {
        self.right >= self.left && self.bottom >= self.top
    }
}

impl From<[i32; 4]> for Bounds {
    fn from(v: [i32; 4]) -> Self {
        Bounds::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Bounds> for [i32; 4] {
    fn from(b: Bounds) -> Self {
        [b.left, b.top, b.right, b.bottom]
    }
}

/// Per-element capability and attribute flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ElementFlags {
    pub editable: bool,
    pub clickable: bool,
    pub long_clickable: bool,
    pub checkable: bool,
    pub checked: bool,
    pub selected: bool,
    pub scrollable: bool,
}

const FLAG_NAMES: [(&str, fn(&ElementFlags) -> bool, fn(&mut ElementFlags)); 7] = [
    ("editable", |f| f.editable, |f| f.editable = true),
    ("clickable", |f| f.clickable, |f| f.clickable = true),
    ("long_clickable", |f| f.long_clickable, |f| f.long_clickable = true),
    ("checkable", |f| f.checkable, |f| f.checkable = true),
    ("checked", |f| f.checked, |f| f.checked = true),
    ("selected", |f| f.selected, |f| f.selected = true),
    ("scrollable", |f| f.scrollable, |f| f.scrollable = true),
];

impl ElementFlags {
    pub fn is_empty(&self) -> bool {
        *self == ElementFlags::default()
    }
}

impl Serialize for ElementFlags {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let names: Vec<&str> = FLAG_NAMES
            .iter()
            .filter(|(_, get, _)| get(self))
            .map(|(name, _, _)| *name)
            .collect();
        names.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ElementFlags {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(deserializer)?;
        let mut flags = ElementFlags::default();
        for name in &names {
            let entry = FLAG_NAMES.iter().find(|(n, _, _)| n == name);
            match entry {
                Some((_, _, set)) => set(&mut flags),
                None => return Err(D::Error::custom(format!("unknown element flag '{name}'"))),
            }
        }
        Ok(flags)
    }
}

fn default_true() -> bool {
    true
}

/// One node of a GUI element tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiElement {
    pub key: ElementKey,
    #[serde(rename = "class")]
    pub class_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(rename = "desc", default, skip_serializing_if = "Option::is_none")]
    pub content_description: Option<String>,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default, skip_serializing_if = "ElementFlags::is_empty")]
    pub flags: ElementFlags,
    #[serde(default = "default_true")]
    pub visible: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<UiElement>,
}

impl UiElement {
    pub fn new(key: impl Into<ElementKey>, class_name: impl Into<String>) -> Self {
        UiElement {
            key: key.into(),
            class_name: class_name.into(),
            text: None,
            content_description: None,
            bounds: Bounds::default(),
            flags: ElementFlags::default(),
            visible: true,
            children: Vec::new(),
        }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    pub fn with_description(mut self, desc: impl Into<String>) -> Self {
        self.content_description = Some(desc.into());
        self
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn with_children(mut self, children: Vec<UiElement>) -> Self {
        self.children = children;
        self
    }

    pub fn invisible(mut self) -> Self {
        self.visible = false;
        self
    }

    pub fn clickable(mut self) -> Self {
        self.flags.clickable = true;
        self
    }

    pub fn long_clickable(mut self) -> Self {
        self.flags.long_clickable = true;
        self
    }

    pub fn editable(mut self) -> Self {
        self.flags.editable = true;
        self
    }

    pub fn checkable(mut self) -> Self {
        self.flags.checkable = true;
        self
    }

    /// Marks the element checked; implies checkable.
    pub fn checked(mut self) -> Self {
        self.flags.checkable = true;
        self.flags.checked = true;
        self
    }

    pub fn selected(mut self) -> Self {
        self.flags.selected = true;
        self
    }

    pub fn scrollable(mut self) -> Self {
        self.flags.scrollable = true;
        self
    }

    fn has_name_content(&self) -> bool {
        self.text.as_deref().is_some_and(|t| !t.is_empty())
            || self.content_description.as_deref().is_some_and(|d| !d.is_empty())
    }

    /// Checks structural invariants over the whole subtree: well-formed
    /// bounds, checked implies checkable, and unique keys.
    pub fn validate(&self) -> Result<(), UiModelError> {
        let mut seen = std::collections::HashSet::new();
        self.validate_walk(&mut seen)
    }

    fn validate_walk<'a>(
        &'a self,
        seen: &mut std::collections::HashSet<&'a ElementKey>,
    ) -> Result<(), UiModelError> {
        if !self.bounds.well_formed() {
            return Err(UiModelError::BadBounds(self.key.clone()));
        }
        if self.flags.checked && !self.flags.checkable {
            return Err(UiModelError::CheckedNotCheckable(self.key.clone()));
        }
        if !seen.insert(&self.key) {
            return Err(UiModelError::DuplicateKey(self.key.clone()));
        }
        for child in &self.children {
            child.validate_walk(seen)?;
        }
        Ok(())
    }
}

/// Violation of a [`UiElement`] tree invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UiModelError {
    #[error("element '{0}' has negative bounds extent")]
    BadBounds(ElementKey),
    #[error("element '{0}' is checked but not checkable")]
    CheckedNotCheckable(ElementKey),
    #[error("duplicate element key '{0}'")]
    DuplicateKey(ElementKey),
}

/// Full snapshot of one screen.
///
/// `state_digest` is a content hash of the normalized tree: equal normalized
/// trees always produce equal digests, regardless of where the snapshot came
/// from. Deserialization recomputes the digest rather than trusting the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UiState {
    pub app_id: String,
    pub screen_id: String,
    pub root: UiElement,
    pub state_digest: String,
}

impl UiState {
    pub fn new(app_id: impl Into<String>, screen_id: impl Into<String>, root: UiElement) -> Self {
        let state_digest = tree_digest(&root);
        UiState { app_id: app_id.into(), screen_id: screen_id.into(), root, state_digest }
    }

    /// The normalized, user-visible element list for this snapshot.
    pub fn elements(&self) -> Vec<UiElement> {
        normalize_tree(&self.root)
    }

    /// Looks up a normalized element by key.
    pub fn find_element(&self, key: &ElementKey) -> Option<UiElement> {
        self.elements().into_iter().find(|e| &e.key == key)
    }

    pub fn validate(&self) -> Result<(), UiModelError> {
        self.root.validate()
    }
}

impl<'de> Deserialize<'de> for UiState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Doc {
            app_id: String,
            screen_id: String,
            root: UiElement,
            #[serde(default)]
            #[allow(dead_code)]
            state_digest: String,
        }
        let doc = Doc::deserialize(deserializer)?;
        Ok(UiState::new(doc.app_id, doc.screen_id, doc.root))
    }
}

/// Content hash over the normalized element list of `root`.
pub fn tree_digest(root: &UiElement) -> String {
    let flat = normalize_tree(root);
    let json = serde_json::to_string(&flat).expect("element list serializes");
    sha256_hex(json.as_bytes())
}

/// Flattens a raw tree into the user-visible elements in depth-first
/// pre-order.
///
/// Invisible elements are pruned together with their entire subtree.
/// Elements with no available actions and no text or description are dropped
/// from the list, but their children are still visited.
pub fn normalize_tree(raw_root: &UiElement) -> Vec<UiElement> {
    let mut out = Vec::new();
    collect_visible(raw_root, &mut out);
    out
}

fn collect_visible(element: &UiElement, out: &mut Vec<UiElement>) {
    if !element.visible {
        return;
    }
    if !available_actions(element).is_empty() || element.has_name_content() {
        let mut flat = element.clone();
        flat.children = Vec::new();
        out.push(flat);
    }
    for child in &element.children {
        collect_visible(child, out);
    }
}

/// Display name used in prompts and trace strings: text, then content
/// description, then widget class, then the literal `"unnamed"`.
pub fn element_display_name(element: &UiElement) -> &str {
    if let Some(text) = element.text.as_deref() {
        if !text.is_empty() {
            return text;
        }
    }
    if let Some(desc) = element.content_description.as_deref() {
        if !desc.is_empty() {
            return desc;
        }
    }
    if !element.class_name.is_empty() {
        return &element.class_name;
    }
    "unnamed"
}

/// Actions an element offers, in the fixed prompt order.
///
/// `StartApp` is never element-derived.
pub fn available_actions(element: &UiElement) -> Vec<ActionKind> {
    let flags = &element.flags;
    let mut kinds = Vec::new();
    if flags.clickable {
        kinds.push(ActionKind::Click);
    }
    if flags.long_clickable {
        kinds.push(ActionKind::LongClick);
    }
    if flags.checkable {
        kinds.push(ActionKind::Check);
    }
    if flags.editable {
        kinds.push(ActionKind::Edit);
    }
    if flags.scrollable {
        kinds.push(ActionKind::ScrollUp);
        kinds.push(ActionKind::ScrollDown);
    }
    kinds
}
