use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DeviceDef, DeviceError, Element, Rect, Screen};
use crate::parser::{ActionKind, TokenSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScrollDirection {
    Down,
    Up,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawnElement {
    pub id: String,
    pub bounds: Rect,
    pub text: String,
    /// Present for toggleable elements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checked: Option<bool>,
}

/// What was on screen at one tick. Only the visible viewport is drawn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub screen_id: String,
    pub scroll_offset: usize,
    pub drawn: Vec<DrawnElement>,
    pub tick: u64,
}

impl Frame {
    pub fn bounds_of(&self, element_id: &str) -> Option<Rect> {
        self.drawn
            .iter()
            .find(|d| d.id == element_id)
            .map(|d| d.bounds)
    }
}

/// Accessibility-style view of the current screen: tokens of every element,
/// including rows scrolled out of view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenSnapshot {
    pub screen_id: String,
    pub element_texts: TokenSet,
}

/// One running device. Cheap to clone; the definition is shared.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceInstance {
    device: Arc<DeviceDef>,
    current_screen: String,
    scroll_offset: usize,
    tick: u64,
    toggle_overrides: BTreeMap<(String, String), bool>,
    pending_until: u64,
}

impl DeviceInstance {
    /// Starts the device on an app's entry screen, or on the home screen.
    pub fn boot(device: Arc<DeviceDef>, app: Option<&str>) -> Result<Self, DeviceError> {
        let screen_id = match app {
            Some(name) => device
                .app_entry(name)
                .ok_or_else(|| DeviceError::UnknownApp(name.to_string()))?
                .1
                .to_string(),
            None => device.home.clone(),
        };
        let delay = device.screen(&screen_id).map_or(0, |s| s.ready_delay);
        Ok(DeviceInstance {
            device,
            current_screen: screen_id,
            scroll_offset: 0,
            tick: 0,
            toggle_overrides: BTreeMap::new(),
            pending_until: delay,
        })
    }

    /// Switches to an app's entry screen. Clock and toggle state carry over.
    pub fn open_app(&mut self, app: &str) -> Result<(), DeviceError> {
        let (_, entry) = self
            .device
            .app_entry(app)
            .ok_or_else(|| DeviceError::UnknownApp(app.to_string()))?;
        let entry = entry.to_string();
        self.tick += 1;
        self.enter(entry);
        Ok(())
    }

    fn enter(&mut self, screen_id: String) {
        let delay = self.device.screen(&screen_id).map_or(0, |s| s.ready_delay);
        self.current_screen = screen_id;
        self.scroll_offset = 0;
        self.pending_until = self.tick + delay;
    }

    pub fn device(&self) -> &Arc<DeviceDef> {
        &self.device
    }

    pub fn screen(&self) -> &Screen {
        self.device
            .screen(&self.current_screen)
            .expect("current screen exists in a validated device")
    }

    pub fn screen_id(&self) -> &str {
        &self.current_screen
    }

    pub fn scroll_offset(&self) -> usize {
        self.scroll_offset
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn pending_until(&self) -> u64 {
        self.pending_until
    }

    pub fn is_ready(&self) -> bool {
        self.tick >= self.pending_until
    }

    pub fn wait(&mut self) {
        self.tick += 1;
    }

    /// Whether a scroll in `direction` would move the viewport.
    pub fn can_scroll(&self, direction: ScrollDirection) -> bool {
        let screen = self.screen();
        screen.scrollable()
            && match direction {
                ScrollDirection::Down => self.scroll_offset < screen.max_scroll_offset(),
                ScrollDirection::Up => self.scroll_offset > 0,
            }
    }

    /// Moves the viewport by one page. At either end this is a no-op that
    /// still takes a tick.
    pub fn scroll(&mut self, direction: ScrollDirection) -> Result<(), DeviceError> {
        let screen = self.screen();
        if !screen.scrollable() {
            return Err(DeviceError::NotScrollable(screen.id.clone()));
        }
        let page = screen.viewport_rows;
        let max = screen.max_scroll_offset();
        self.scroll_offset = match direction {
            ScrollDirection::Down => (self.scroll_offset + page).min(max),
            ScrollDirection::Up => self.scroll_offset.saturating_sub(page),
        };
        self.tick += 1;
        Ok(())
    }

    fn with_state(&self, el: &Element) -> Element {
        let mut el = el.clone();
        if let Some(&checked) = self
            .toggle_overrides
            .get(&(self.current_screen.clone(), el.id.clone()))
        {
            el.checked = checked;
        }
        el
    }

    fn visible_range(&self) -> std::ops::Range<usize> {
        let screen = self.screen();
        if screen.scrollable() {
            let end = (self.scroll_offset + screen.viewport_rows).min(screen.elements.len());
            self.scroll_offset..end
        } else {
            0..screen.elements.len()
        }
    }

    /// Elements inside the viewport, with toggle state applied.
    pub fn visible_elements(&self) -> Vec<Element> {
        let screen = self.screen();
        screen.elements[self.visible_range()]
            .iter()
            .map(|el| self.with_state(el))
            .collect()
    }

    /// Bounds of a visible element as drawn, i.e. shifted by the scroll.
    pub fn on_screen_bounds(&self, element_id: &str) -> Option<Rect> {
        let screen = self.screen();
        let range = self.visible_range();
        let shift = self.scroll_shift();
        screen.elements[range]
            .iter()
            .find(|e| e.id == element_id)
            .map(|e| Rect {
                y: e.bounds.y - shift,
                ..e.bounds
            })
    }

    fn scroll_shift(&self) -> i32 {
        let screen = self.screen();
        match (screen.elements.first(), screen.elements.get(self.scroll_offset)) {
            (Some(first), Some(top)) if self.scroll_offset > 0 => top.bounds.y - first.bounds.y,
            _ => 0,
        }
    }

    /// Performs an element action. Toggling an already-set toggle succeeds
    /// without change; a tap on a toggle flips it.
    pub fn act(&mut self, element_id: &str, kind: ActionKind) -> Result<(), DeviceError> {
        if kind == ActionKind::OpenApp {
            return Err(DeviceError::UnsupportedAction(kind));
        }
        if !self.is_ready() {
            return Err(DeviceError::NotReady {
                tick: self.tick,
                ready_at: self.pending_until,
            });
        }
        let el = self
            .visible_elements()
            .into_iter()
            .find(|e| e.id == element_id)
            .ok_or_else(|| DeviceError::ElementNotVisible(element_id.to_string()))?;

        let key = (self.current_screen.clone(), el.id.clone());
        match kind {
            ActionKind::ToggleOn | ActionKind::ToggleOff => {
                if !el.toggleable {
                    return Err(DeviceError::NotToggleable(el.id));
                }
                self.toggle_overrides
                    .insert(key, kind == ActionKind::ToggleOn);
            }
            _ => {
                if el.toggleable {
                    self.toggle_overrides.insert(key, !el.checked);
                }
            }
        }

        let next = self.screen().transition(element_id, kind).map(str::to_string);
        self.tick += 1;
        if let Some(next) = next {
            self.enter(next);
        }
        Ok(())
    }

    pub fn render(&self) -> Frame {
        let shift = self.scroll_shift();
        Frame {
            screen_id: self.current_screen.clone(),
            scroll_offset: self.scroll_offset,
            drawn: self
                .visible_elements()
                .into_iter()
                .map(|el| DrawnElement {
                    bounds: Rect {
                        y: el.bounds.y - shift,
                        ..el.bounds
                    },
                    text: el.label().to_string(),
                    checked: el.toggleable.then_some(el.checked),
                    id: el.id,
                })
                .collect(),
            tick: self.tick,
        }
    }

    pub fn snapshot(&self) -> ScreenSnapshot {
        let screen = self.screen();
        ScreenSnapshot {
            screen_id: screen.id.clone(),
            element_texts: screen.elements.iter().flat_map(|e| e.tokens()).collect(),
        }
    }
}
