use serde::{Deserialize, Serialize};

use super::{Role, SimElement, SimSite, Viewport};

/// Snapshot width in characters; longer lines are cut.
pub const SNAPSHOT_WIDTH: usize = 72;

/// What the agent (and the debug view) sees of the site at one moment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub url: String,
    pub title: String,
    pub accessibility_tree: String,
    pub snapshot: String,
    pub viewport: Viewport,
    pub version: u64,
}

impl Observation {
    /// Text handed to the model as the current page state.
    pub fn to_prompt_text(&self) -> String {
        format!(
            "Current page: {} ({})\nSite version: {}\nVisible elements (accessibility tree):\n{}",
            self.title, self.url, self.version, self.accessibility_tree
        )
    }
}

fn visible_elements<'a>(site: &'a SimSite, viewport: &'a Viewport) -> impl Iterator<Item = &'a SimElement> + 'a {
    site.current_page()
        .elements
        .iter()
        .filter(move |e| site.is_shown(e) && viewport.contains(e.row))
}

fn range_text(site: &SimSite, viewport: &Viewport) -> String {
    let height = site.current_page().height;
    let last = (viewport.offset + viewport.height).min(height).saturating_sub(1);
    format!("rows {}-{} of {}", viewport.offset, last, height)
}

fn accessibility_tree(site: &SimSite, viewport: &Viewport) -> String {
    let mut out = String::new();
    for el in visible_elements(site, viewport) {
        out.push_str(&format!("[{}] {:?} id={} row={}", el.role.as_str(), el.label, el.id, el.row));
        if el.role.accepts_text() {
            if let Some(v) = site.form_values.get(&el.id) {
                out.push_str(&format!(" value={v:?}"));
            }
        }
        if el.role == Role::Select && !el.options.is_empty() {
            out.push_str(&format!(" options=[{}]", el.options.join(", ")));
        }
        out.push('\n');
    }
    if out.is_empty() {
        out.push_str("(no elements in view)\n");
    }
    out
}

/// Fixed-width text rendering of the visible part of the current page.
pub fn render_snapshot(site: &SimSite, viewport: &Viewport) -> String {
    let page = site.current_page();
    let mut lines = vec![format!("== {} ({}) {} ==", page.title, page.url, range_text(site, viewport))];
    for el in visible_elements(site, viewport) {
        let mut line = format!("{:>4} [{}] {}", el.row, el.role.as_str(), el.label);
        if el.role.accepts_text() {
            if let Some(v) = site.form_values.get(&el.id) {
                line.push_str(&format!(": {v}"));
            }
        }
        lines.push(line.chars().take(SNAPSHOT_WIDTH).collect());
    }
    let mut text = lines.join("\n");
    text.push('\n');
    text
}

pub fn observe(site: &SimSite, viewport: &Viewport) -> Observation {
    let page = site.current_page();
    Observation {
        url: page.url.clone(),
        title: page.title.clone(),
        accessibility_tree: accessibility_tree(site, viewport),
        snapshot: render_snapshot(site, viewport),
        viewport: *viewport,
        version: site.version,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::sim::{load_fixture, EnvAction};

    #[test]
    fn whole_page_viewport_lists_everything() {
        let site = fixtures::coffee_shop();
        let vp = Viewport::new(site.current_page().height);
        let obs = observe(&site, &vp);
        let shown = site.current_page().elements.iter().filter(|e| !e.hidden).count();
        assert_eq!(obs.accessibility_tree.lines().count(), shown);
    }

    #[test]
    fn out_of_view_element_absent() {
        let mut site = fixtures::coffee_shop();
        let mut vp = Viewport::new(20);
        site.apply(&mut vp, &EnvAction::Navigate { url: "/product/cappuccino".into() });
        let obs = observe(&site, &vp);
        assert!(!obs.accessibility_tree.contains("add-to-cart"));
        assert!(!obs.snapshot.contains("Add to Order"));
    }

    #[test]
    fn observing_is_deterministic() {
        let site = fixtures::coffee_shop();
        let vp = Viewport::default();
        assert_eq!(observe(&site, &vp), observe(&site, &vp));
        assert_eq!(render_snapshot(&site, &vp), render_snapshot(&site, &vp));
    }

    #[test]
    fn empty_page_snapshot_is_header_only() {
        let site = load_fixture(r#"{"pages": [{"url": "/", "title": "Blank", "height": 5, "elements": []}]}"#).unwrap();
        let snap = render_snapshot(&site, &Viewport::default());
        assert_eq!(snap, "== Blank (/) rows 0-4 of 5 ==\n");
    }

    #[test]
    fn home_snapshot_shows_menu_link() {
        let snap = render_snapshot(&fixtures::coffee_shop(), &Viewport::default());
        assert!(snap.contains("[link] MENU"), "{snap}");
    }
}
