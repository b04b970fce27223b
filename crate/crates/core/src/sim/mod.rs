//! Deterministic simulated web site.
//!
//! Pages are one-dimensional: every element sits on an integer row and the
//! viewport is a window of rows. That is enough to reproduce the failure
//! where an agent tries to click an element that is on the page but not in
//! view. All mutation goes through [`SimSite::apply`]; failed actions leave
//! the site untouched.

mod fixture;
mod observe;

pub use fixture::{load_fixture, FixtureError, FixtureErrorCode};
pub use observe::{observe, render_snapshot, Observation};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Button,
    Link,
    Text,
    Input,
    Select,
    Image,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Button => "button",
            Role::Link => "link",
            Role::Text => "text",
            Role::Input => "input",
            Role::Select => "select",
            Role::Image => "image",
        }
    }

    pub fn may_carry_effects(self) -> bool {
        matches!(self, Role::Button | Role::Link | Role::Select | Role::Input)
    }

    pub fn accepts_text(self) -> bool {
        matches!(self, Role::Input | Role::Select)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Effect {
    Navigate { url: String },
    AddToCart { item: String },
    Reveal { element: String },
    SetValue { element: String, value: String },
    /// Moves the cart into a placed order. Every element listed in
    /// `requires` must hold a non-empty form value first.
    Purchase {
        #[serde(default)]
        requires: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimElement {
    pub id: String,
    pub role: Role,
    pub label: String,
    pub row: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub effects: Vec<Effect>,
    /// Choices offered by a `select`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    /// Hidden elements exist but are neither observable nor actionable until
    /// a `reveal` effect shows them.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimPage {
    pub url: String,
    pub title: String,
    pub height: u32,
    pub elements: Vec<SimElement>,
}

impl SimPage {
    pub fn element(&self, id: &str) -> Option<&SimElement> {
        self.elements.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CartItem {
    pub item: String,
    pub options: BTreeMap<String, String>,
    pub quantity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub items: Vec<CartItem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Viewport {
    pub offset: u32,
    pub height: u32,
}

impl Viewport {
    pub const DEFAULT_HEIGHT: u32 = 20;

    pub fn new(height: u32) -> Self {
        Viewport { offset: 0, height }
    }

    pub fn contains(&self, row: u32) -> bool {
        row >= self.offset && row < self.offset.saturating_add(self.height)
    }
}

impl Default for Viewport {
    fn default() -> Self {
        Viewport::new(Viewport::DEFAULT_HEIGHT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScrollDirection {
    Up,
    Down,
}

/// Actions that operate on the environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum EnvAction {
    Click { element: String },
    Scroll { direction: ScrollDirection, amount: u32 },
    Type { element: String, text: String },
    Navigate { url: String },
}

impl EnvAction {
    pub fn name(&self) -> &'static str {
        match self {
            EnvAction::Click { .. } => "click",
            EnvAction::Scroll { .. } => "scroll",
            EnvAction::Type { .. } => "type",
            EnvAction::Navigate { .. } => "navigate",
        }
    }

    pub fn target(&self) -> Option<&str> {
        match self {
            EnvAction::Click { element } | EnvAction::Type { element, .. } => Some(element),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EnvErrorCode {
    ElementNotFound,
    ElementNotVisible,
    InvalidTarget,
    InvalidOption,
    UnknownUrl,
    PreconditionFailed,
}

impl EnvErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvErrorCode::ElementNotFound => "ELEMENT_NOT_FOUND",
            EnvErrorCode::ElementNotVisible => "ELEMENT_NOT_VISIBLE",
            EnvErrorCode::InvalidTarget => "INVALID_TARGET",
            EnvErrorCode::InvalidOption => "INVALID_OPTION",
            EnvErrorCode::UnknownUrl => "UNKNOWN_URL",
            EnvErrorCode::PreconditionFailed => "PRECONDITION_FAILED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{}: {message}", code.as_str())]
pub struct EnvError {
    pub code: EnvErrorCode,
    pub message: String,
}

impl EnvError {
    fn new(code: EnvErrorCode, message: impl Into<String>) -> Self {
        EnvError {
            code,
            message: message.into(),
        }
    }
}

/// Outcome of an environment action, as recorded in traces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResult {
    pub action: EnvAction,
    pub error: Option<EnvError>,
    /// Effects executed, in order. Empty on failure.
    pub effects: Vec<Effect>,
    pub version_before: u64,
    pub version_after: u64,
    pub url_after: String,
    pub viewport_after: Viewport,
}

impl ActionResult {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// One-line text fed back to the model.
    pub fn feedback(&self) -> String {
        match &self.error {
            None if self.effects.is_empty() => format!("{} succeeded.", describe(&self.action)),
            None => format!(
                "{} succeeded; effects: {}.",
                describe(&self.action),
                self.effects.iter().map(effect_name).collect::<Vec<_>>().join(", ")
            ),
            Some(err) => format!("{} failed with {}: {}", describe(&self.action), err.code.as_str(), err.message),
        }
    }
}

fn describe(action: &EnvAction) -> String {
    match action {
        EnvAction::Click { element } => format!("click({element})"),
        EnvAction::Scroll { direction, amount } => {
            format!("scroll({}, {amount})", if *direction == ScrollDirection::Up { "up" } else { "down" })
        }
        EnvAction::Type { element, text } => format!("type({element}, {text:?})"),
        EnvAction::Navigate { url } => format!("navigate({url})"),
    }
}

fn effect_name(e: &Effect) -> String {
    match e {
        Effect::Navigate { url } => format!("navigate {url}"),
        Effect::AddToCart { item } => format!("add_to_cart {item}"),
        Effect::Reveal { element } => format!("reveal {element}"),
        Effect::SetValue { element, .. } => format!("set_value {element}"),
        Effect::Purchase { .. } => "purchase".into(),
    }
}

/// A loaded site plus its mutable state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSite {
    pub id: String,
    pub pages: BTreeMap<String, SimPage>,
    pub current_url: String,
    pub cart: Vec<CartItem>,
    pub orders: Vec<Order>,
    pub form_values: BTreeMap<String, String>,
    pub revealed: Vec<String>,
    pub version: u64,
}

impl SimSite {
    pub fn current_page(&self) -> &SimPage {
        self.pages
            .get(&self.current_url)
            .expect("current_url always names a loaded page")
    }

    pub fn is_shown(&self, element: &SimElement) -> bool {
        !element.hidden || self.revealed.iter().any(|r| r == &element.id)
    }

    /// Whether `element_id` on the current page is shown and inside `viewport`.
    pub fn is_visible(&self, element_id: &str, viewport: &Viewport) -> bool {
        self.current_page()
            .element(element_id)
            .is_some_and(|e| self.is_shown(e) && viewport.contains(e.row))
    }

    fn max_offset(&self, viewport: &Viewport) -> u32 {
        self.current_page().height.saturating_sub(viewport.height)
    }

    /// Applies an environment action. On error neither the site nor the
    /// viewport changes.
    pub fn apply(&mut self, viewport: &mut Viewport, action: &EnvAction) -> ActionResult {
        let version_before = self.version;
        let mut next = self.clone();
        let mut next_view = *viewport;
        let outcome = next.apply_inner(&mut next_view, action);
        let (error, effects) = match outcome {
            Ok(effects) => {
                let changed = next != *self;
                if changed {
                    next.version = version_before + 1;
                }
                *self = next;
                *viewport = next_view;
                (None, effects)
            }
            Err(e) => (Some(e), Vec::new()),
        };
        ActionResult {
            action: action.clone(),
            error,
            effects,
            version_before,
            version_after: self.version,
            url_after: self.current_url.clone(),
            viewport_after: *viewport,
        }
    }

    fn visible_target(&self, id: &str, viewport: &Viewport) -> Result<SimElement, EnvError> {
        let page = self.current_page();
        let el = page
            .element(id)
            .filter(|e| self.is_shown(e))
            .ok_or_else(|| {
                EnvError::new(
                    EnvErrorCode::ElementNotFound,
                    format!("no element `{id}` on {}", page.url),
                )
            })?;
        if !viewport.contains(el.row) {
            return Err(EnvError::new(
                EnvErrorCode::ElementNotVisible,
                format!(
                    "element `{id}` is at row {} but the viewport shows rows {}-{}",
                    el.row,
                    viewport.offset,
                    viewport.offset + viewport.height.saturating_sub(1)
                ),
            ));
        }
        Ok(el.clone())
    }

    fn apply_inner(&mut self, viewport: &mut Viewport, action: &EnvAction) -> Result<Vec<Effect>, EnvError> {
        match action {
            EnvAction::Click { element } => {
                let el = self.visible_target(element, viewport)?;
                self.run_effects(viewport, &el.effects)?;
                Ok(el.effects)
            }
            EnvAction::Type { element, text } => {
                let el = self.visible_target(element, viewport)?;
                if !el.role.accepts_text() {
                    return Err(EnvError::new(
                        EnvErrorCode::InvalidTarget,
                        format!("cannot type into {} `{}`", el.role.as_str(), el.id),
                    ));
                }
                if el.role == Role::Select && !el.options.iter().any(|o| o == text) {
                    return Err(EnvError::new(
                        EnvErrorCode::InvalidOption,
                        format!("`{text}` is not an option of `{}` ({})", el.id, el.options.join(", ")),
                    ));
                }
                self.form_values.insert(el.id.clone(), text.clone());
                self.run_effects(viewport, &el.effects)?;
                Ok(el.effects)
            }
            EnvAction::Scroll { direction, amount } => {
                let max = self.max_offset(viewport);
                viewport.offset = match direction {
                    ScrollDirection::Down => viewport.offset.saturating_add(*amount).min(max),
                    ScrollDirection::Up => viewport.offset.saturating_sub(*amount),
                };
                Ok(Vec::new())
            }
            EnvAction::Navigate { url } => {
                self.goto(viewport, url)?;
                Ok(Vec::new())
            }
        }
    }

    fn goto(&mut self, viewport: &mut Viewport, url: &str) -> Result<(), EnvError> {
        if !self.pages.contains_key(url) {
            return Err(EnvError::new(EnvErrorCode::UnknownUrl, format!("no page at `{url}`")));
        }
        self.current_url = url.to_string();
        viewport.offset = 0;
        Ok(())
    }

    fn run_effects(&mut self, viewport: &mut Viewport, effects: &[Effect]) -> Result<(), EnvError> {
        for effect in effects {
            match effect {
                Effect::Navigate { url } => self.goto(viewport, url)?,
                Effect::AddToCart { item } => {
                    let options: BTreeMap<String, String> = self
                        .current_page()
                        .elements
                        .iter()
                        .filter(|e| e.role.accepts_text())
                        .filter_map(|e| self.form_values.get(&e.id).map(|v| (e.id.clone(), v.clone())))
                        .collect();
                    match self.cart.iter_mut().find(|c| &c.item == item && c.options == options) {
                        Some(existing) => existing.quantity += 1,
                        None => self.cart.push(CartItem {
                            item: item.clone(),
                            options,
                            quantity: 1,
                        }),
                    }
                }
                Effect::Reveal { element } => {
                    if !self.revealed.contains(element) {
                        self.revealed.push(element.clone());
                    }
                }
                Effect::SetValue { element, value } => {
                    self.form_values.insert(element.clone(), value.clone());
                }
                Effect::Purchase { requires } => {
                    if let Some(missing) = requires
                        .iter()
                        .find(|r| self.form_values.get(*r).is_none_or(|v| v.is_empty()))
                    {
                        return Err(EnvError::new(
                            EnvErrorCode::PreconditionFailed,
                            format!("purchase requires a value in `{missing}`"),
                        ));
                    }
                    if self.cart.is_empty() {
                        return Err(EnvError::new(EnvErrorCode::PreconditionFailed, "cart is empty"));
                    }
                    let items = std::mem::take(&mut self.cart);
                    self.orders.push(Order { items });
                }
            }
        }
        Ok(())
    }
}
