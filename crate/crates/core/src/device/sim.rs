//! Deterministic screen-graph simulator.
//!
//! An [`AppModel`] is a set of named screens, each a forest of elements plus
//! transitions that move between screens when a matching action is
//! performed. Editable text, check states, and scroll offsets live in the
//! session, so replaying one action sequence from a fresh start always
//! yields the same states.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::device::{Action, ActionResult, Device, DeviceError};
use crate::ui::{available_actions, ActionKind, ElementKey, UiElement, UiState};

/// Key reserved for the synthetic root wrapped around each screen's forest.
const ROOT_KEY: &str = "__root__";

/// A validated application model.
#[derive(Debug, Clone)]
pub struct AppModel {
    pub app_id: String,
    pub initial_screen: String,
    pub screens: BTreeMap<String, Screen>,
}

/// One screen: its element forest, outgoing transitions, and optional
/// scroll behaviour.
#[derive(Debug, Clone)]
pub struct Screen {
    pub elements: Vec<UiElement>,
    pub transitions: Vec<Transition>,
    pub scroll: Option<ScrollSpec>,
}

/// Moves the session to `to` when the trigger action is performed and the
/// guard (if any) passes.
#[derive(Debug, Clone)]
pub struct Transition {
    pub trigger: Trigger,
    pub guard: Option<Guard>,
    pub to: String,
    pub effects: Vec<Effect>,
}

/// The (element, action kind) pair that fires a transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger {
    pub element: ElementKey,
    pub kind: ActionKind,
}

/// Predicate over one editable field's current value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guard {
    pub field: ElementKey,
    pub test: GuardTest,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardTest {
    Equals(String),
    NonEmpty,
}

/// Writes a field value when its transition fires. `screen` defaults to the
/// screen the transition belongs to.
#[derive(Debug, Clone)]
pub struct Effect {
    pub screen: Option<String>,
    pub field: ElementKey,
    pub set: String,
}

/// Shows only `window` consecutive children of `container` at a time.
#[derive(Debug, Clone)]
pub struct ScrollSpec {
    pub container: ElementKey,
    pub window: usize,
}

/// Model file rejected during load.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model is not valid JSON: {0}")]
    Schema(String),
    #[error("{path}: transition goes to unknown screen '{screen}'")]
    DanglingScreen { path: String, screen: String },
    #[error("{path}: transitions on element '{element}' with kind '{}' are not mutually exclusive", kind.phrase())]
    AmbiguousGuards { path: String, element: ElementKey, kind: ActionKind },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read model file")]
    Io(#[from] std::io::Error),
}

// Raw document shapes; validation happens after parsing so errors can carry
// document paths.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AppModelDoc {
    app_id: String,
    initial_screen: String,
    screens: BTreeMap<String, ScreenDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScreenDoc {
    #[serde(default)]
    elements: Vec<UiElement>,
    #[serde(default)]
    transitions: Vec<TransitionDoc>,
    scroll: Option<ScrollSpecDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionDoc {
    trigger: TriggerDoc,
    guard: Option<GuardDoc>,
    to: String,
    #[serde(default)]
    effects: Vec<EffectDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TriggerDoc {
    element: String,
    kind: ActionKind,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GuardDoc {
    field: String,
    equals: Option<String>,
    non_empty: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EffectDoc {
    screen: Option<String>,
    field: String,
    set: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScrollSpecDoc {
    container: String,
    window: usize,
}

fn find_in_forest<'a>(elements: &'a [UiElement], key: &ElementKey) -> Option<&'a UiElement> {
    for e in elements {
        if &e.key == key {
            return Some(e);
        }
        if let Some(found) = find_in_forest(&e.children, key) {
            return Some(found);
        }
    }
    None
}

fn find_in_forest_mut<'a>(
    elements: &'a mut [UiElement],
    key: &ElementKey,
) -> Option<&'a mut UiElement> {
    for e in elements {
        if &e.key == key {
            return Some(e);
        }
        if let Some(found) = find_in_forest_mut(&mut e.children, key) {
            return Some(found);
        }
    }
    None
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Invalid { path: path.into(), message: message.into() }
}

impl AppModel {
    /// Parses and validates a model from its JSON text.
    pub fn from_json(json: &str) -> Result<AppModel, ModelError> {
        let doc: AppModelDoc =
            serde_json::from_str(json).map_err(|e| ModelError::Schema(e.to_string()))?;
        validate_model(doc)
    }
}

fn validate_model(doc: AppModelDoc) -> Result<AppModel, ModelError> {
    if doc.app_id.is_empty() {
        return Err(invalid("app_id", "application id must not be empty"));
    }
    if !doc.screens.contains_key(&doc.initial_screen) {
        return Err(invalid(
            "initial_screen",
            format!("unknown screen '{}'", doc.initial_screen),
        ));
    }

    let mut screens = BTreeMap::new();
    for (screen_id, screen_doc) in &doc.screens {
        let screen = validate_screen(&doc, screen_id, screen_doc)?;
        screens.insert(screen_id.clone(), screen);
    }
    Ok(AppModel { app_id: doc.app_id, initial_screen: doc.initial_screen, screens })
}

fn validate_screen(
    doc: &AppModelDoc,
    screen_id: &str,
    screen: &ScreenDoc,
) -> Result<Screen, ModelError> {
    let elements_path = format!("screens.{screen_id}.elements");

    if find_in_forest(&screen.elements, &ElementKey::from(ROOT_KEY)).is_some() {
        return Err(invalid(&elements_path, format!("element key '{ROOT_KEY}' is reserved")));
    }
    let probe_root =
        UiElement::new(ROOT_KEY, "Root").with_children(screen.elements.clone());
    probe_root
        .validate()
        .map_err(|e| invalid(&elements_path, e.to_string()))?;

    let mut transitions = Vec::new();
    for (i, t) in screen.transitions.iter().enumerate() {
        let path = format!("screens.{screen_id}.transitions[{i}]");
        transitions.push(validate_transition(doc, screen_id, screen, &path, t)?);
    }

    for (i, a) in transitions.iter().enumerate() {
        for (j, b) in transitions.iter().enumerate().skip(i + 1) {
            if a.trigger == b.trigger && !mutually_exclusive(&a.guard, &b.guard) {
                return Err(ModelError::AmbiguousGuards {
                    path: format!("screens.{screen_id}.transitions[{j}]"),
                    element: b.trigger.element.clone(),
                    kind: b.trigger.kind,
                });
            }
        }
    }

    let scroll = match &screen.scroll {
        None => None,
        Some(s) => {
            let path = format!("screens.{screen_id}.scroll");
            let container = ElementKey::from(s.container.as_str());
            let element = find_in_forest(&screen.elements, &container)
                .ok_or_else(|| invalid(&path, format!("unknown container '{container}'")))?;
            if !element.flags.scrollable {
                return Err(invalid(&path, format!("container '{container}' is not scrollable")));
            }
            if s.window == 0 {
                return Err(invalid(&path, "window must be at least 1"));
            }
            Some(ScrollSpec { container, window: s.window })
        }
    };

    Ok(Screen { elements: screen.elements.clone(), transitions, scroll })
}

fn validate_transition(
    doc: &AppModelDoc,
    screen_id: &str,
    screen: &ScreenDoc,
    path: &str,
    t: &TransitionDoc,
) -> Result<Transition, ModelError> {
    let element_key = ElementKey::from(t.trigger.element.as_str());
    let element = find_in_forest(&screen.elements, &element_key)
        .ok_or_else(|| invalid(path, format!("trigger element '{element_key}' does not exist")))?;
    if t.trigger.kind == ActionKind::StartApp {
        return Err(invalid(path, "start_app cannot trigger a transition"));
    }
    if !available_actions(element).contains(&t.trigger.kind) {
        return Err(invalid(
            path,
            format!("element '{element_key}' does not support {}", t.trigger.kind.phrase()),
        ));
    }
    if !doc.screens.contains_key(&t.to) {
        return Err(ModelError::DanglingScreen { path: path.to_string(), screen: t.to.clone() });
    }

    let guard = match &t.guard {
        None => None,
        Some(g) => Some(validate_guard(screen, &format!("{path}.guard"), g)?),
    };

    let mut effects = Vec::new();
    for (i, e) in t.effects.iter().enumerate() {
        let effect_path = format!("{path}.effects[{i}]");
        let target_screen = e.screen.as_deref().unwrap_or(screen_id);
        let target_doc = doc
            .screens
            .get(target_screen)
            .ok_or_else(|| invalid(&effect_path, format!("unknown screen '{target_screen}'")))?;
        let field = ElementKey::from(e.field.as_str());
        let field_element = find_in_forest(&target_doc.elements, &field)
            .ok_or_else(|| invalid(&effect_path, format!("unknown field '{field}'")))?;
        if !field_element.flags.editable {
            return Err(invalid(&effect_path, format!("field '{field}' is not editable")));
        }
        effects.push(Effect { screen: e.screen.clone(), field, set: e.set.clone() });
    }

    Ok(Transition {
        trigger: Trigger { element: element_key, kind: t.trigger.kind },
        guard,
        to: t.to.clone(),
        effects,
    })
}

fn validate_guard(screen: &ScreenDoc, path: &str, g: &GuardDoc) -> Result<Guard, ModelError> {
    let field = ElementKey::from(g.field.as_str());
    let element = find_in_forest(&screen.elements, &field)
        .ok_or_else(|| invalid(path, format!("unknown field '{field}'")))?;
    if !element.flags.editable {
        return Err(invalid(path, format!("field '{field}' is not editable")));
    }
    let test = match (&g.equals, g.non_empty) {
        (Some(value), None) => GuardTest::Equals(value.clone()),
        (None, Some(true)) => GuardTest::NonEmpty,
        (None, Some(false)) => {
            return Err(invalid(path, "non_empty must be true when present"));
        }
        (None, None) => return Err(invalid(path, "guard needs either 'equals' or 'non_empty'")),
        (Some(_), Some(_)) => {
            return Err(invalid(path, "guard cannot have both 'equals' and 'non_empty'"));
        }
    };
    Ok(Guard { field, test })
}

/// Whether two guards on the same trigger can never both pass.
fn mutually_exclusive(a: &Option<Guard>, b: &Option<Guard>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) if a.field == b.field => match (&a.test, &b.test) {
            (GuardTest::Equals(x), GuardTest::Equals(y)) => x != y,
            (GuardTest::Equals(x), GuardTest::NonEmpty)
            | (GuardTest::NonEmpty, GuardTest::Equals(x)) => x.is_empty(),
            (GuardTest::NonEmpty, GuardTest::NonEmpty) => false,
        },
        _ => false,
    }
}

/// Reads and validates one model file.
pub fn load_app_model(path: impl AsRef<Path>) -> Result<AppModel, ModelError> {
    let json = fs::read_to_string(path)?;
    AppModel::from_json(&json)
}

/// Loads either a single model file or every `*.model.json` in a directory
/// (sorted by file name).
pub fn load_models_path(path: impl AsRef<Path>) -> Result<Vec<AppModel>, ModelError> {
    let path = path.as_ref();
    if !path.is_dir() {
        return Ok(vec![load_app_model(path)?]);
    }
    let mut files: Vec<_> = fs::read_dir(path)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().ends_with(".model.json")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(invalid(path.display().to_string(), "directory has no *.model.json files"));
    }
    files.into_iter().map(load_app_model).collect()
}

/// Per-session mutable state: which screen is showing plus every field
/// value, check state, and scroll offset, keyed by `(screen, element)`.
#[derive(Debug, Clone)]
struct SimSession {
    app_id: String,
    screen_id: String,
    fields: BTreeMap<(String, ElementKey), String>,
    checked: BTreeMap<(String, ElementKey), bool>,
    scroll_offsets: BTreeMap<(String, ElementKey), usize>,
}

impl SimSession {
    fn fresh(model: &AppModel) -> SimSession {
        let mut fields = BTreeMap::new();
        let mut checked = BTreeMap::new();
        for (screen_id, screen) in &model.screens {
            let mut stack: Vec<&UiElement> = screen.elements.iter().collect();
            while let Some(e) = stack.pop() {
                if e.flags.editable {
                    fields.insert(
                        (screen_id.clone(), e.key.clone()),
                        e.text.clone().unwrap_or_default(),
                    );
                }
                if e.flags.checkable {
                    checked.insert((screen_id.clone(), e.key.clone()), e.flags.checked);
                }
                stack.extend(&e.children);
            }
        }
        SimSession {
            app_id: model.app_id.clone(),
            screen_id: model.initial_screen.clone(),
            fields,
            checked,
            scroll_offsets: BTreeMap::new(),
        }
    }
}

/// In-process [`Device`] over a set of app models.
#[derive(Debug, Default)]
pub struct Simulator {
    models: BTreeMap<String, AppModel>,
    session: Option<SimSession>,
}

impl Simulator {
    pub fn new() -> Simulator {
        Simulator::default()
    }

    /// Registers a model; app ids must be unique.
    pub fn add_model(&mut self, model: AppModel) -> Result<(), ModelError> {
        if self.models.contains_key(&model.app_id) {
            return Err(invalid("app_id", format!("duplicate application '{}'", model.app_id)));
        }
        self.models.insert(model.app_id.clone(), model);
        Ok(())
    }

    pub fn with_models(models: Vec<AppModel>) -> Result<Simulator, ModelError> {
        let mut sim = Simulator::new();
        for model in models {
            sim.add_model(model)?;
        }
        Ok(sim)
    }

    /// Screen the open session is showing, if any.
    pub fn current_screen(&self) -> Option<&str> {
        self.session.as_ref().map(|s| s.screen_id.as_str())
    }

    /// Renders `screen_id` of `app_id` with fresh session defaults, without
    /// touching any open session.
    pub fn state_of(&self, app_id: &str, screen_id: &str) -> Result<UiState, DeviceError> {
        let model = self
            .models
            .get(app_id)
            .ok_or_else(|| DeviceError::UnknownApp(app_id.to_string()))?;
        if !model.screens.contains_key(screen_id) {
            return Err(DeviceError::UnknownScreen(screen_id.to_string()));
        }
        let mut session = SimSession::fresh(model);
        session.screen_id = screen_id.to_string();
        Ok(render_state(model, &session))
    }
}

/// Builds the current [`UiState`]: clones the screen forest, substitutes
/// session field values and check states, applies scroll windowing, and
/// wraps everything in a synthetic root.
fn render_state(model: &AppModel, session: &SimSession) -> UiState {
    let screen = &model.screens[&session.screen_id];
    let mut forest = screen.elements.clone();

    let mut stack: Vec<&mut UiElement> = forest.iter_mut().collect();
    while let Some(e) = stack.pop() {
        let key = (session.screen_id.clone(), e.key.clone());
        if e.flags.editable {
            if let Some(value) = session.fields.get(&key) {
                e.text = Some(value.clone());
            }
        }
        if e.flags.checkable {
            if let Some(&c) = session.checked.get(&key) {
                e.flags.checked = c;
            }
        }
        stack.extend(e.children.iter_mut());
    }

    if let Some(spec) = &screen.scroll {
        let offset = session
            .scroll_offsets
            .get(&(session.screen_id.clone(), spec.container.clone()))
            .copied()
            .unwrap_or(0);
        if let Some(container) = find_in_forest_mut(&mut forest, &spec.container) {
            let len = container.children.len();
            let start = offset.min(len);
            let end = (start + spec.window).min(len);
            container.children = container.children[start..end].to_vec();
        }
    }

    let root = UiElement::new(ROOT_KEY, "Root").with_children(forest);
    UiState::new(model.app_id.clone(), session.screen_id.clone(), root)
}

impl Device for Simulator {
    fn get_state(&mut self) -> Result<UiState, DeviceError> {
        let session = self.session.as_ref().ok_or(DeviceError::NoSession)?;
        let model = self.models.get(&session.app_id).expect("session app is registered");
        Ok(render_state(model, session))
    }

    fn perform(&mut self, action: &Action) -> Result<ActionResult, DeviceError> {
        action.validate()?;

        if action.kind == ActionKind::StartApp {
            let app_id = action.app_id.as_deref().expect("validated");
            let model = self
                .models
                .get(app_id)
                .ok_or_else(|| DeviceError::UnknownApp(app_id.to_string()))?;
            let session = SimSession::fresh(model);
            let digest = render_state(model, &session).state_digest;
            self.session = Some(session);
            return Ok(ActionResult { state_digest: digest });
        }

        let session = self.session.as_mut().ok_or(DeviceError::NoSession)?;
        let model = self.models.get(&session.app_id).expect("session app is registered");
        let target = action.target.as_ref().expect("validated");

        let state = render_state(model, session);
        let element = state
            .find_element(target)
            .ok_or_else(|| DeviceError::UnknownTarget(target.clone()))?;
        if !available_actions(&element).contains(&action.kind) {
            return Err(DeviceError::UnsupportedKind { element: target.clone(), kind: action.kind });
        }

        let screen_id = session.screen_id.clone();
        let field_key = (screen_id.clone(), target.clone());
        match action.kind {
            ActionKind::Edit => {
                let text = action.text.clone().expect("validated");
                session.fields.insert(field_key, text);
            }
            ActionKind::Check => {
                let entry = session.checked.entry(field_key).or_insert(false);
                *entry = !*entry;
            }
            ActionKind::ScrollUp | ActionKind::ScrollDown => {
                let screen = &model.screens[&screen_id];
                if let Some(spec) = &screen.scroll {
                    if spec.container == *target {
                        let len = find_in_forest(&screen.elements, &spec.container)
                            .map(|c| c.children.len())
                            .unwrap_or(0);
                        let max_offset = len.saturating_sub(spec.window);
                        let offset = session
                            .scroll_offsets
                            .entry((screen_id.clone(), spec.container.clone()))
                            .or_insert(0);
                        *offset = match action.kind {
                            ActionKind::ScrollUp => offset.saturating_sub(1),
                            _ => (*offset + 1).min(max_offset),
                        };
                    }
                }
            }
            _ => {}
        }

        let screen = &model.screens[&screen_id];
        let fired = screen
            .transitions
            .iter()
            .filter(|t| t.trigger.element == *target && t.trigger.kind == action.kind)
            .find(|t| guard_passes(session, &screen_id, t.guard.as_ref()));
        if let Some(transition) = fired {
            for effect in &transition.effects {
                let effect_screen =
                    effect.screen.clone().unwrap_or_else(|| screen_id.clone());
                session.fields.insert((effect_screen, effect.field.clone()), effect.set.clone());
            }
            session.screen_id = transition.to.clone();
        }

        Ok(ActionResult { state_digest: render_state(model, session).state_digest })
    }
}

fn guard_passes(session: &SimSession, screen_id: &str, guard: Option<&Guard>) -> bool {
    let Some(guard) = guard else { return true };
    let value = session
        .fields
        .get(&(screen_id.to_string(), guard.field.clone()))
        .map(String::as_str)
        .unwrap_or("");
    match &guard.test {
        GuardTest::Equals(expected) => value == expected,
        GuardTest::NonEmpty => !value.is_empty(),
    }
}
