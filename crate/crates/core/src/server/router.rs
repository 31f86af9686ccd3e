//! Routing table from `(action, path pattern)` to handlers.
//!
//! Patterns are slash-separated segments; `{name}` segments capture one path
//! segment. Registration rejects a pattern that could match the same concrete
//! path as an existing one, so lookup is unambiguous.

use thiserror::Error;

use crate::protocol::Action;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    Param(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RouteError {
    #[error("pattern {0:?} is malformed")]
    Malformed(String),
    #[error("{action} {new} overlaps existing route {existing}")]
    Overlap {
        action: Action,
        new: String,
        existing: String,
    },
}

#[derive(Debug, Clone)]
pub struct Route<H> {
    pub action: Action,
    pub pattern: String,
    segments: Vec<Segment>,
    pub handler: H,
}

impl<H> Route<H> {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }
}

/// Captured `{name}` values of a matched route.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Params(Vec<(String, String)>);

impl Params {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

pub fn parse_pattern(pattern: &str) -> Result<Vec<Segment>, RouteError> {
    let malformed = || RouteError::Malformed(pattern.to_string());
    let body = pattern.strip_prefix('/').ok_or_else(malformed)?;
    body.split('/')
        .map(|seg| {
            if seg.is_empty() {
                Err(malformed())
            } else if let Some(name) = seg.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
                if name.is_empty() {
                    Err(malformed())
                } else {
                    Ok(Segment::Param(name.to_string()))
                }
            } else {
                Ok(Segment::Literal(seg.to_string()))
            }
        })
        .collect()
}

/// Whether some concrete path matches both patterns.
pub fn patterns_overlap(a: &[Segment], b: &[Segment]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|pair| match pair {
            (Segment::Literal(x), Segment::Literal(y)) => x == y,
            _ => true,
        })
}

fn matches(pattern: &[Segment], path: &[String]) -> Option<Params> {
    if pattern.len() != path.len() {
        return None;
    }
    let mut params = Vec::new();
    for (seg, value) in pattern.iter().zip(path) {
        match seg {
            Segment::Literal(lit) if lit == value => {}
            Segment::Literal(_) => return None,
            Segment::Param(name) => params.push((name.clone(), value.clone())),
        }
    }
    Some(Params(params))
}

#[derive(Debug, Clone)]
pub struct Router<H> {
    routes: Vec<Route<H>>,
}

impl<H> Default for Router<H> {
    fn default() -> Self {
        Router { routes: Vec::new() }
    }
}

impl<H> Router<H> {
    pub fn add(&mut self, action: Action, pattern: &str, handler: H) -> Result<(), RouteError> {
        let segments = parse_pattern(pattern)?;
        if let Some(existing) = self
            .routes
            .iter()
            .find(|r| r.action == action && patterns_overlap(&r.segments, &segments))
        {
            return Err(RouteError::Overlap {
                action,
                new: pattern.to_string(),
                existing: existing.pattern.clone(),
            });
        }
        self.routes.push(Route {
            action,
            pattern: pattern.to_string(),
            segments,
            handler,
        });
        Ok(())
    }

    pub fn lookup(&self, action: Action, path: &[String]) -> Option<(&Route<H>, Params)> {
        self.routes
            .iter()
            .filter(|r| r.action == action)
            .find_map(|r| matches(&r.segments, path).map(|p| (r, p)))
    }

    pub fn routes(&self) -> &[Route<H>] {
        &self.routes
    }
}
