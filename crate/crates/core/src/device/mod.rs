//! Declarative simulated device.
//!
//! A [`DeviceDef`] lists screens, their elements and the transitions
//! between them. A [`DeviceInstance`] is one running copy with its own
//! clock, scroll position and toggle state.

mod instance;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::parser::{token_set, ActionKind, TokenSet};

pub use instance::{DeviceInstance, Frame, DrawnElement, ScreenSnapshot, ScrollDirection};
pub use render::{render_svg, SvgView};

/// Axis-aligned rectangle in device pixels, serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "[i32; 4]", into = "[i32; 4]")]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl Rect {
    pub const fn new(x: i32, y: i32, w: i32, h: i32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn right(&self) -> i32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> i32 {
        self.y + self.h
    }

    /// Grows the rectangle by `pad` on every side, then clips it to `bounds`.
    pub fn expand_clamped(&self, pad: i32, bounds: Rect) -> Rect {
        let x0 = (self.x - pad).max(bounds.x);
        let y0 = (self.y - pad).max(bounds.y);
        let x1 = (self.right() + pad).min(bounds.right());
        let y1 = (self.bottom() + pad).min(bounds.bottom());
        Rect::new(x0, y0, (x1 - x0).max(0), (y1 - y0).max(0))
    }
}

impl From<[i32; 4]> for Rect {
    fn from([x, y, w, h]: [i32; 4]) -> Self {
        Rect { x, y, w, h }
    }
}

impl From<Rect> for [i32; 4] {
    fn from(r: Rect) -> Self {
        [r.x, r.y, r.w, r.h]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub content_desc: String,
    #[serde(default)]
    pub hint_text: String,
    pub bounds: Rect,
    #[serde(default)]
    pub clickable: bool,
    #[serde(default)]
    pub toggleable: bool,
    #[serde(default)]
    pub checked: bool,
}

impl Element {
    /// Text shown when the element is drawn.
    pub fn label(&self) -> &str {
        [&self.text, &self.content_desc, &self.hint_text]
            .into_iter()
            .find(|s| !s.is_empty())
            .map(String::as_str)
            .unwrap_or("")
    }

    /// Union of the tokens of text, content description and hint text.
    pub fn tokens(&self) -> TokenSet {
        let mut set = token_set(&self.text);
        set.extend(token_set(&self.content_desc));
        set.extend(token_set(&self.hint_text));
        set
    }

    pub fn actionable(&self) -> bool {
        self.clickable || self.toggleable
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub element: String,
    pub action: ActionKind,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screen {
    pub id: String,
    #[serde(default)]
    pub ready_delay: u64,
    /// Elements visible at once; 0 means the whole screen fits.
    #[serde(default)]
    pub viewport_rows: usize,
    pub elements: Vec<Element>,
    #[serde(default)]
    pub transitions: Vec<Transition>,
}

impl Screen {
    pub fn scrollable(&self) -> bool {
        self.viewport_rows > 0
    }

    pub fn max_scroll_offset(&self) -> usize {
        if self.scrollable() {
            self.elements.len().saturating_sub(self.viewport_rows)
        } else {
            0
        }
    }

    pub fn element(&self, id: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn transition(&self, element: &str, action: ActionKind) -> Option<&str> {
        self.transitions
            .iter()
            .find(|t| t.element == element && t.action == action)
            .map(|t| t.to.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDef {
    pub id: String,
    /// `[width, height]` in pixels.
    pub screen_size: [i32; 2],
    pub home: String,
    #[serde(default)]
    pub apps: BTreeMap<String, String>,
    pub screens: Vec<Screen>,
}

#[derive(Debug, thiserror::Error)]
pub enum DeviceError {
    #[error("unknown app `{0}`")]
    UnknownApp(String),
    #[error("screen is not ready (tick {tick}, ready at {ready_at})")]
    NotReady { tick: u64, ready_at: u64 },
    #[error("element `{0}` is not visible")]
    ElementNotVisible(String),
    #[error("element `{0}` is not toggleable")]
    NotToggleable(String),
    #[error("screen `{0}` is not scrollable")]
    NotScrollable(String),
    #[error("`{0}` cannot be performed on an element")]
    UnsupportedAction(ActionKind),
    #[error("invalid device definition:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("malformed device file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read device file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl DeviceDef {
    pub fn from_json(json: &str) -> Result<Self, DeviceError> {
        let def: DeviceDef = serde_json::from_str(json)?;
        def.validate()?;
        Ok(def)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DeviceError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|source| DeviceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&json)
    }

    pub fn screen(&self, id: &str) -> Option<&Screen> {
        self.screens.iter().find(|s| s.id == id)
    }

    pub fn screen_rect(&self) -> Rect {
        Rect::new(0, 0, self.screen_size[0], self.screen_size[1])
    }

    /// Looks up an app by name, ignoring case and punctuation.
    pub fn app_entry(&self, name: &str) -> Option<(&str, &str)> {
        let wanted = normalized_name(name);
        self.apps
            .iter()
            .find(|(app, _)| normalized_name(app) == wanted)
            .map(|(app, screen)| (app.as_str(), screen.as_str()))
    }

    /// Checks every structural invariant. All problems are reported at once,
    /// each prefixed with its position in the document.
    pub fn validate(&self) -> Result<(), DeviceError> {
        let mut errors = Vec::new();
        let ids: BTreeSet<&str> = self.screens.iter().map(|s| s.id.as_str()).collect();

        if self.screen_size[0] <= 0 || self.screen_size[1] <= 0 {
            errors.push(format!("screen_size: must be positive, got {:?}", self.screen_size));
        }
        if !ids.contains(self.home.as_str()) {
            errors.push(format!("home: unknown screen \"{}\"", self.home));
        }
        for (app, screen) in &self.apps {
            if !ids.contains(screen.as_str()) {
                errors.push(format!("apps.{app}: unknown screen \"{screen}\""));
            }
        }

        let mut seen_screens = BTreeSet::new();
        for (si, screen) in self.screens.iter().enumerate() {
            let at = format!("screens[{si}]");
            if !seen_screens.insert(screen.id.as_str()) {
                errors.push(format!("{at}.id: duplicate screen id \"{}\"", screen.id));
            }
            if screen.viewport_rows > screen.elements.len() {
                errors.push(format!(
                    "{at}.viewport_rows: {} exceeds element count {}",
                    screen.viewport_rows,
                    screen.elements.len()
                ));
            }
            let mut seen_elements = BTreeSet::new();
            for (ei, el) in screen.elements.iter().enumerate() {
                let at = format!("{at}.elements[{ei}]");
                if !seen_elements.insert(el.id.as_str()) {
                    errors.push(format!("{at}.id: duplicate element id \"{}\"", el.id));
                }
                if el.bounds.w <= 0 || el.bounds.h <= 0 {
                    errors.push(format!("{at}.bounds: width and height must be positive"));
                }
                if el.clickable && el.label().is_empty() {
                    errors.push(format!("{at}: clickable element has no text"));
                }
            }
            for (ti, t) in screen.transitions.iter().enumerate() {
                let at = format!("{at}.transitions[{ti}]");
                if screen.element(&t.element).is_none() {
                    errors.push(format!("{at}.element: unknown element \"{}\"", t.element));
                }
                if t.action == ActionKind::OpenApp {
                    errors.push(format!("{at}.action: open_app is not an element action"));
                }
                if !ids.contains(t.to.as_str()) {
                    errors.push(format!("{at}.to: unknown screen \"{}\"", t.to));
                }
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(DeviceError::Invalid(errors))
        }
    }
}

impl fmt::Display for DeviceDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} screens)", self.id, self.screens.len())
    }
}

fn normalized_name(name: &str) -> String {
    crate::parser::tokenize(name)
        .into_iter()
        .map(|t| t.text)
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn row(id: &str, text: &str, y: i32) -> Element {
        Element {
            id: id.to_string(),
            text: text.to_string(),
            content_desc: String::new(),
            hint_text: String::new(),
            bounds: Rect::new(0, y, 400, 80),
            clickable: true,
            toggleable: false,
            checked: false,
        }
    }

    pub fn toggle(id: &str, text: &str, y: i32, checked: bool) -> Element {
        Element {
            toggleable: true,
            clickable: false,
            checked,
            ..row(id, text, y)
        }
    }

    /// Home plus a settings app with a 10-row scrolling list.
    pub fn small_device() -> DeviceDef {
        let list: Vec<Element> = (0..10)
            .map(|i| row(&format!("item{i}"), &format!("Item {i}"), 100 + i * 80))
            .collect();
        DeviceDef {
            id: "test".into(),
            screen_size: [400, 800],
            home: "home".into(),
            apps: [("Settings".to_string(), "settings".to_string())].into(),
            screens: vec![
                Screen {
                    id: "home".into(),
                    ready_delay: 0,
                    viewport_rows: 0,
                    elements: vec![row("settings_icon", "Settings", 600)],
                    transitions: vec![Transition {
                        element: "settings_icon".into(),
                        action: ActionKind::Tap,
                        to: "settings".into(),
                    }],
                },
                Screen {
                    id: "settings".into(),
                    ready_delay: 0,
                    viewport_rows: 0,
                    elements: vec![
                        row("network", "Network & internet", 100),
                        row("list_row", "Long list", 180),
                        toggle("saver", "Data saver", 260, false),
                        Element {
                            id: "deco".into(),
                            text: String::new(),
                            clickable: false,
                            ..row("deco", "", 340)
                        },
                    ],
                    transitions: vec![
                        Transition {
                            element: "network".into(),
                            action: ActionKind::Tap,
                            to: "network".into(),
                        },
                        Transition {
                            element: "list_row".into(),
                            action: ActionKind::Tap,
                            to: "list".into(),
                        },
                    ],
                },
                Screen {
                    id: "network".into(),
                    ready_delay: 2,
                    viewport_rows: 0,
                    elements: vec![row("wifi", "Wi-Fi", 100)],
                    transitions: vec![],
                },
                Screen {
                    id: "list".into(),
                    ready_delay: 0,
                    viewport_rows: 4,
                    elements: list,
                    transitions: vec![],
                },
            ],
        }
    }
}
