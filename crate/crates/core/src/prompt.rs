//! Prompt synthesis: turning a UI snapshot plus task and history into the
//! exact natural-language prompt sent to the model.
//!
//! The wording here is load-bearing. Element fragments, the state preamble,
//! and the edit question are fixed strings that downstream oracles and
//! recorded transcripts match against verbatim — do not reword them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ui::{
    available_actions, element_display_name, ActionKind, ElementKey, UiElement, UiState,
};

/// Opening line of every state description.
pub const STATE_PREAMBLE: &str = "The current state has the following UI views and corresponding \
                                  actions, with action id in parentheses";

/// Header introducing the action history section.
pub const HISTORY_HEADER: &str = "Previous actions:";

/// Placeholder history line used when no actions have been taken yet.
pub const EMPTY_HISTORY_LINE: &str = "none";

/// Instruction that closes every action-choice prompt.
pub const CHOICE_OUTPUT_REQUIREMENT: &str = "Respond with the id of the action to perform next. \
                                             If the task is already complete, respond with -1. \
                                             Reply with a single number and nothing else.";

/// Default cap on display-name length, in words.
pub const DEFAULT_TRUNCATION_WORDS: usize = 20;

/// Binds one prompt action id to the element and action kind it denotes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionBinding {
    pub action_id: usize,
    pub element_key: ElementKey,
    pub kind: ActionKind,
}

/// A rendered state description plus the id bindings it introduced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDescription {
    /// Preamble line followed by one fragment line per described element.
    pub text: String,
    /// Bindings in id order; ids are contiguous from zero.
    pub bindings: Vec<ActionBinding>,
    /// Digest of the state the description was derived from.
    pub source_digest: String,
}

impl StateDescription {
    pub fn binding(&self, action_id: usize) -> Option<&ActionBinding> {
        self.bindings.get(action_id)
    }
}

/// A complete prompt ready to send to a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub task: String,
    pub state_text: String,
    pub history_lines: Vec<String>,
    pub output_requirement: String,
    /// Full prompt text: task line, state text, history section, requirement.
    pub rendered: String,
}

/// Failure to synthesize a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("element '{0}' is not editable")]
    NotEditable(ElementKey),
}

/// Caps `text` at `max_words` whitespace-separated words.
///
/// Untruncated text is returned unchanged, internal whitespace included.
/// Truncated text is rejoined with single spaces and ends with `…`.
pub fn truncate_text(text: &str, max_words: usize) -> String {
    assert!(max_words >= 1, "max_words must be at least 1");
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() <= max_words {
        return text.to_string();
    }
    let mut out = words[..max_words].join(" ");
    out.push('…');
    out
}

/// Renders one element fragment and appends its bindings.
///
/// Shape: `a view '<name>' that can <kind> (<id>), ...;` with `, which is
/// checked` / `, which is selected` suffixes before the terminating `;`.
/// Elements with no actions still render (as `a view '<name>';`) so labels
/// stay visible to the model.
pub fn describe_element(
    element: &UiElement,
    next_id: usize,
    max_words: usize,
) -> (String, Vec<ActionBinding>) {
    let name = truncate_text(element_display_name(element), max_words);
    let mut fragment = format!("a view '{name}'");
    let mut bindings = Vec::new();
    let kinds = available_actions(element);
    for (offset, kind) in kinds.iter().enumerate() {
        let id = next_id + offset;
        if offset == 0 {
            fragment.push_str(" that can ");
        } else {
            fragment.push_str(", ");
        }
        fragment.push_str(&format!("{} ({id})", kind.phrase()));
        bindings.push(ActionBinding { action_id: id, element_key: element.key.clone(), kind: *kind });
    }
    if element.flags.checked {
        fragment.push_str(", which is checked");
    }
    if element.flags.selected {
        fragment.push_str(", which is selected");
    }
    fragment.push(';');
    (fragment, bindings)
}

/// Describes a state with the default word cap.
pub fn describe_state(state: &UiState) -> StateDescription {
    describe_state_with(state, DEFAULT_TRUNCATION_WORDS)
}

/// Describes a state: preamble plus one fragment line per normalized
/// element, with action ids assigned contiguously from zero in element
/// order.
pub fn describe_state_with(state: &UiState, max_words: usize) -> StateDescription {
    let mut lines = vec![STATE_PREAMBLE.to_string()];
    let mut bindings = Vec::new();
    for element in state.elements() {
        let (fragment, element_bindings) = describe_element(&element, bindings.len(), max_words);
        lines.push(fragment);
        bindings.extend(element_bindings);
    }
    StateDescription {
        text: lines.join("\n"),
        bindings,
        source_digest: state.state_digest.clone(),
    }
}

fn render(task: &str, state_text: &str, history: &[String], requirement: &str) -> String {
    let mut out = format!("Task: {task}\n{state_text}\n{HISTORY_HEADER}\n");
    if history.is_empty() {
        out.push_str(EMPTY_HISTORY_LINE);
        out.push('\n');
    } else {
        for line in history {
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str(requirement);
    out
}

/// Builds the action-choice prompt for one step.
pub fn synthesize_choice_prompt(
    task: &str,
    description: &StateDescription,
    history: &[String],
) -> Prompt {
    let rendered = render(task, &description.text, history, CHOICE_OUTPUT_REQUIREMENT);
    Prompt {
        task: task.to_string(),
        state_text: description.text.clone(),
        history_lines: history.to_vec(),
        output_requirement: CHOICE_OUTPUT_REQUIREMENT.to_string(),
        rendered,
    }
}

/// The follow-up question asked when the model picks an edit action.
///
/// The element name is deliberately untruncated: the model must see the
/// exact field label it is filling in.
pub fn edit_question(element: &UiElement) -> String {
    format!(
        "What should I enter to the view with the text '{}'? Just return the text and nothing \
         else.",
        element_display_name(element)
    )
}

/// Builds the second-step prompt of the edit protocol.
///
/// Same task, state, and history as the choice prompt it follows; only the
/// output requirement changes to the edit question.
pub fn synthesize_edit_prompt(
    task: &str,
    description: &StateDescription,
    history: &[String],
    element: &UiElement,
) -> Result<Prompt, PromptError> {
    if !element.flags.editable {
        return Err(PromptError::NotEditable(element.key.clone()));
    }
    let requirement = edit_question(element);
    let rendered = render(task, &description.text, history, &requirement);
    Ok(Prompt {
        task: task.to_string(),
        state_text: description.text.clone(),
        history_lines: history.to_vec(),
        output_requirement: requirement,
        rendered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ui::{Bounds, UiElement, UiState};
    use proptest::prelude::*;

    fn state_of(children: Vec<UiElement>) -> UiState {
        UiState::new("app", "screen", UiElement::new("root", "Layout").with_children(children))
    }

    #[test]
    fn preamble_is_verbatim() {
        assert_eq!(
            STATE_PREAMBLE,
            "The current state has the following UI views and corresponding actions, with \
             action id in parentheses"
        );
    }

    #[test]
    fn clickable_fragment() {
        let e = UiElement::new("sort", "Button").with_text("Sort by").clickable();
        let (fragment, bindings) = describe_element(&e, 0, DEFAULT_TRUNCATION_WORDS);
        assert_eq!(fragment, "a view 'Sort by' that can click (0);");
        assert_eq!(bindings.len(), 1);
        assert_eq!(bindings[0].kind, ActionKind::Click);
    }

    #[test]
    fn multi_action_fragment_with_id_offset() {
        let e = UiElement::new("field", "EditText")
            .with_text("city, country")
            .editable()
            .clickable();
        let (fragment, bindings) = describe_element(&e, 3, DEFAULT_TRUNCATION_WORDS);
        assert_eq!(fragment, "a view 'city, country' that can click (3), edit (4);");
        let ids: Vec<usize> = bindings.iter().map(|b| b.action_id).collect();
        assert_eq!(ids, vec![3, 4]);
    }

    #[test]
    fn checked_suffix_comes_before_selected() {
        let e = UiElement::new("w", "Switch")
            .with_text("Wind direction display")
            .clickable()
            .checked()
            .selected();
        let (fragment, _) = describe_element(&e, 0, DEFAULT_TRUNCATION_WORDS);
        assert_eq!(
            fragment,
            "a view 'Wind direction display' that can click (0), check (1), which is checked, \
             which is selected;"
        );
    }

    #[test]
    fn label_fragment_has_no_action_list() {
        let e = UiElement::new("t", "TextView").with_text("15°C");
        let (fragment, bindings) = describe_element(&e, 0, DEFAULT_TRUNCATION_WORDS);
        assert_eq!(fragment, "a view '15°C';");
        assert!(bindings.is_empty());
    }

    #[test]
    fn scrollable_fragment_lists_both_directions() {
        let e = UiElement::new("list", "ListView").with_text("results").scrollable();
        let (fragment, _) = describe_element(&e, 2, DEFAULT_TRUNCATION_WORDS);
        assert_eq!(fragment, "a view 'results' that can scroll up (2), scroll down (3);");
    }

    #[test]
    fn state_description_assigns_contiguous_ids() {
        let state = state_of(vec![
            UiElement::new("title", "TextView").with_text("World Weather"),
            UiElement::new("london", "TextView").with_text("London").clickable(),
            UiElement::new("add", "ImageButton").with_description("Add city").clickable(),
        ]);
        let sd = describe_state(&state);
        assert_eq!(
            sd.text,
            format!(
                "{STATE_PREAMBLE}\na view 'World Weather';\na view 'London' that can click \
                 (0);\na view 'Add city' that can click (1);"
            )
        );
        let ids: Vec<usize> = sd.bindings.iter().map(|b| b.action_id).collect();
        assert_eq!(ids, vec![0, 1]);
        assert_eq!(sd.source_digest, state.state_digest);
    }

    #[test]
    fn truncate_leaves_short_text_untouched() {
        assert_eq!(truncate_text("Current  weather", 20), "Current  weather");
        assert_eq!(truncate_text("exact four word limit", 5), "exact four word limit");
    }

    #[test]
    fn truncate_caps_long_text_with_ellipsis() {
        let text = "one two three four five six";
        assert_eq!(truncate_text(text, 4), "one two three four…");
    }

    #[test]
    fn truncate_collapses_whitespace_only_when_truncating() {
        assert_eq!(truncate_text("a  b  c", 2), "a b…");
    }

    #[test]
    #[should_panic(expected = "max_words")]
    fn truncate_rejects_zero_cap() {
        truncate_text("x", 0);
    }

    #[test]
    fn choice_prompt_layout_with_empty_history() {
        let state = state_of(vec![UiElement::new("b", "Button").with_text("OK").clickable()]);
        let sd = describe_state(&state);
        let prompt = synthesize_choice_prompt("Press OK", &sd, &[]);
        let expected = format!(
            "Task: Press OK\n{}\n{HISTORY_HEADER}\n{EMPTY_HISTORY_LINE}\n{CHOICE_OUTPUT_REQUIREMENT}",
            sd.text
        );
        assert_eq!(prompt.rendered, expected);
    }

    #[test]
    fn choice_prompt_lists_history_in_order() {
        let state = state_of(vec![UiElement::new("b", "Button").with_text("OK").clickable()]);
        let sd = describe_state(&state);
        let history =
            vec!["start the app Demo".to_string(), "click view with text \"Go\"".to_string()];
        let prompt = synthesize_choice_prompt("Press OK", &sd, &history);
        assert!(prompt.rendered.contains(
            "Previous actions:\nstart the app Demo\nclick view with text \"Go\"\nRespond with"
        ));
    }

    #[test]
    fn edit_prompt_question_is_verbatim() {
        let field = UiElement::new("f", "EditText").with_text("city, country").editable();
        let state = state_of(vec![field.clone()]);
        let sd = describe_state(&state);
        let prompt = synthesize_edit_prompt("Add Beijing", &sd, &[], &field).unwrap();
        assert_eq!(
            prompt.output_requirement,
            "What should I enter to the view with the text 'city, country'? Just return the \
             text and nothing else."
        );
        assert!(prompt.rendered.ends_with(&prompt.output_requirement));
    }

    #[test]
    fn edit_prompt_rejects_non_editable_element() {
        let label = UiElement::new("t", "TextView").with_text("London");
        let state = state_of(vec![label.clone()]);
        let sd = describe_state(&state);
        let err = synthesize_edit_prompt("task", &sd, &[], &label).unwrap_err();
        assert_eq!(err, PromptError::NotEditable(ElementKey::from("t")));
    }

    #[test]
    fn edit_prompt_uses_untruncated_name() {
        let long_name = "alpha beta gamma delta epsilon".repeat(5);
        let field = UiElement::new("f", "EditText").with_text(long_name.trim_end()).editable();
        let state = state_of(vec![field.clone()]);
        let sd = describe_state_with(&state, 3);
        let prompt = synthesize_edit_prompt("task", &sd, &[], &field).unwrap();
        assert!(sd.text.contains("alpha beta gamma…"));
        assert!(prompt.output_requirement.contains(long_name.trim_end()));
    }

    // ── property tests ──────────────────────────────────────────────────

    // Re-parse a fragment and check it round-trips to the element's name,
    // action ids, and kinds. Names are drawn without quotes or "(digit)"
    // shapes so the fragment grammar stays unambiguous.
    fn arb_named_element() -> impl Strategy<Value = UiElement> {
        ("[a-zA-Z][a-zA-Z ]{0,18}", any::<[bool; 6]>()).prop_map(|(name, b)| {
            let mut e = UiElement::new("k", "View").with_text(name.trim_end());
            e.flags.clickable = b[0];
            e.flags.long_clickable = b[1];
            e.flags.checkable = b[2];
            e.flags.editable = b[3];
            e.flags.scrollable = b[4];
            e.flags.checked = e.flags.checkable && b[5];
            e
        })
    }

    proptest! {
        #[test]
        fn fragment_roundtrips_through_grammar(e in arb_named_element(), start in 0usize..50) {
            let (fragment, bindings) = describe_element(&e, start, DEFAULT_TRUNCATION_WORDS);

            let re = regex::Regex::new(
                r"^a view '(?P<name>[^']*)'(?: that can (?P<acts>[a-z ]+ \(\d+\)(?:, [a-z ]+ \(\d+\))*))?(?P<checked>, which is checked)?(?P<selected>, which is selected)?;$"
            ).unwrap();
            let caps = re.captures(&fragment).expect("fragment matches grammar");
            prop_assert_eq!(&caps["name"], element_display_name(&e));
            prop_assert_eq!(caps.name("checked").is_some(), e.flags.checked);
            prop_assert_eq!(caps.name("selected").is_some(), e.flags.selected);

            let parsed: Vec<(String, usize)> = caps
                .name("acts")
                .map(|m| {
                    m.as_str()
                        .split(", ")
                        .map(|part| {
                            let open = part.rfind('(').unwrap();
                            let phrase = part[..open].trim_end().to_string();
                            let id = part[open + 1..part.len() - 1].parse().unwrap();
                            (phrase, id)
                        })
                        .collect()
                })
                .unwrap_or_default();
            let expected: Vec<(String, usize)> = bindings
                .iter()
                .map(|b| (b.kind.phrase().to_string(), b.action_id))
                .collect();
            prop_assert_eq!(parsed, expected);

            // ids are contiguous starting at `start`
            for (offset, b) in bindings.iter().enumerate() {
                prop_assert_eq!(b.action_id, start + offset);
            }
        }

        #[test]
        fn state_bindings_are_gapless_and_sound(
            elements in proptest::collection::vec(arb_named_element(), 0..6)
        ) {
            let elements: Vec<UiElement> = elements
                .into_iter()
                .enumerate()
                .map(|(i, mut e)| { e.key = ElementKey(format!("k{i}")); e })
                .collect();
            let state = state_of(elements);
            let sd = describe_state(&state);
            for (i, b) in sd.bindings.iter().enumerate() {
                prop_assert_eq!(b.action_id, i);
                let element = state.find_element(&b.element_key).expect("bound element exists");
                prop_assert!(available_actions(&element).contains(&b.kind));
            }
            // every `(id)` occurring in the text is a valid binding id
            let id_re = regex::Regex::new(r"\((\d+)\)").unwrap();
            for caps in id_re.captures_iter(&sd.text) {
                let id: usize = caps[1].parse().unwrap();
                prop_assert!(id < sd.bindings.len());
            }
        }
    }

    #[test]
    fn fragment_keeps_double_space_in_short_names() {
        let e = UiElement::new("c", "TextView").with_text("Current  weather").clickable();
        let (fragment, _) = describe_element(&e, 0, DEFAULT_TRUNCATION_WORDS);
        assert_eq!(fragment, "a view 'Current  weather' that can click (0);");
    }

    #[test]
    fn bounds_do_not_affect_description() {
        let a = state_of(vec![UiElement::new("b", "Button").with_text("OK").clickable()]);
        let b = state_of(vec![UiElement::new("b", "Button")
            .with_text("OK")
            .with_bounds(Bounds::new(5, 5, 50, 30))
            .clickable()]);
        assert_eq!(describe_state(&a).text, describe_state(&b).text);
    }
}
