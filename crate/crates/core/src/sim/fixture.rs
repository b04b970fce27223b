use std::collections::{BTreeMap, HashSet};

use serde::Deserialize;

use super::{Effect, SimElement, SimPage, SimSite};
use crate::workflow::DocPosition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureErrorCode {
    Syntax,
    NoPages,
    DuplicatePage,
    DuplicateElement,
    UnknownStartUrl,
    ElementOutOfBounds,
    EffectsNotAllowed,
    DanglingReference,
}

impl FixtureErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FixtureErrorCode::Syntax => "SYNTAX",
            FixtureErrorCode::NoPages => "NO_PAGES",
            FixtureErrorCode::DuplicatePage => "DUPLICATE_PAGE",
            FixtureErrorCode::DuplicateElement => "DUPLICATE_ELEMENT",
            FixtureErrorCode::UnknownStartUrl => "UNKNOWN_START_URL",
            FixtureErrorCode::ElementOutOfBounds => "ELEMENT_OUT_OF_BOUNDS",
            FixtureErrorCode::EffectsNotAllowed => "EFFECTS_NOT_ALLOWED",
            FixtureErrorCode::DanglingReference => "DANGLING_REFERENCE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}: {message} (at {position})", code.as_str())]
pub struct FixtureError {
    pub code: FixtureErrorCode,
    pub message: String,
    pub position: DocPosition,
}

fn err(code: FixtureErrorCode, at: impl Into<String>, message: impl Into<String>) -> FixtureError {
    FixtureError {
        code,
        message: message.into(),
        position: DocPosition::Pointer(at.into()),
    }
}

#[derive(Deserialize)]
struct RawFixture {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    start_url: Option<String>,
    #[serde(default)]
    pages: Vec<SimPage>,
}

/// Loads a site fixture: `{id?, start_url, pages: [{url, title, height, elements}]}`.
///
/// The site starts at `start_url` (the first page when omitted) with an
/// empty cart and version 0.
pub fn load_fixture(text: &str) -> Result<SimSite, FixtureError> {
    if text.trim().is_empty() {
        return Err(err(FixtureErrorCode::NoPages, "", "empty fixture"));
    }
    let raw: RawFixture = serde_json::from_str(text).map_err(|e| FixtureError {
        code: FixtureErrorCode::Syntax,
        message: e.to_string(),
        position: DocPosition::LineCol {
            line: e.line(),
            column: e.column(),
        },
    })?;
    if raw.pages.is_empty() {
        return Err(err(FixtureErrorCode::NoPages, "/pages", "fixture defines no pages"));
    }

    let urls: HashSet<&str> = raw.pages.iter().map(|p| p.url.as_str()).collect();
    let mut pages = BTreeMap::new();
    for (pi, page) in raw.pages.iter().enumerate() {
        let at = format!("/pages/{pi}");
        let mut ids = HashSet::new();
        for (ei, el) in page.elements.iter().enumerate() {
            let el_at = format!("{at}/elements/{ei}");
            check_element(page, el, &el_at, &urls)?;
            if !ids.insert(el.id.as_str()) {
                return Err(err(
                    FixtureErrorCode::DuplicateElement,
                    format!("{el_at}/id"),
                    format!("element id `{}` repeats on page `{}`", el.id, page.url),
                ));
            }
        }
        for (ei, el) in page.elements.iter().enumerate() {
            for (fi, effect) in el.effects.iter().enumerate() {
                if let Effect::Reveal { element } = effect {
                    if !ids.contains(element.as_str()) {
                        return Err(err(
                            FixtureErrorCode::DanglingReference,
                            format!("{at}/elements/{ei}/effects/{fi}"),
                            format!("reveal target `{element}` is not on page `{}`", page.url),
                        ));
                    }
                }
            }
        }
        if pages.insert(page.url.clone(), page.clone()).is_some() {
            return Err(err(
                FixtureErrorCode::DuplicatePage,
                format!("{at}/url"),
                format!("page `{}` defined twice", page.url),
            ));
        }
    }

    let start_url = raw.start_url.unwrap_or_else(|| raw.pages[0].url.clone());
    if !pages.contains_key(&start_url) {
        return Err(err(
            FixtureErrorCode::UnknownStartUrl,
            "/start_url",
            format!("start url `{start_url}` is not a page"),
        ));
    }
    Ok(SimSite {
        id: raw.id.unwrap_or_else(|| "fixture".into()),
        pages,
        current_url: start_url,
        cart: Vec::new(),
        orders: Vec::new(),
        form_values: BTreeMap::new(),
        revealed: Vec::new(),
        version: 0,
    })
}

fn check_element(page: &SimPage, el: &SimElement, at: &str, urls: &HashSet<&str>) -> Result<(), FixtureError> {
    if el.row >= page.height {
        return Err(err(
            FixtureErrorCode::ElementOutOfBounds,
            format!("{at}/row"),
            format!("row {} outside page height {}", el.row, page.height),
        ));
    }
    if !el.effects.is_empty() && !el.role.may_carry_effects() {
        return Err(err(
            FixtureErrorCode::EffectsNotAllowed,
            format!("{at}/effects"),
            format!("{} elements cannot carry effects", el.role.as_str()),
        ));
    }
    for (fi, effect) in el.effects.iter().enumerate() {
        if let Effect::Navigate { url } = effect {
            if !urls.contains(url.as_str()) {
                return Err(err(
                    FixtureErrorCode::DanglingReference,
                    format!("{at}/effects/{fi}"),
                    format!("navigate target `{url}` is not a page"),
                ));
            }
        }
    }
    Ok(())
}
