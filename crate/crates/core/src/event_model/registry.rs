use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;

use super::{Event, EventLog};
use crate::error::{Error, Result};

/// Target label for "the case ends here".
pub const END_MARKER: &str = "⟂END";

/// How roles are derived from events.
///
/// Resolution order: a declared role attribute, then an explicit
/// resource-to-role mapping, then the resource itself.
#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleConfig {
    #[serde(default)]
    pub attribute: Option<String>,
    #[serde(default)]
    pub mapping: Option<BTreeMap<String, String>>,
}

impl RoleConfig {
    /// Parses a flat `resource = "role"` TOML table.
    pub fn mapping_from_toml(text: &str) -> Result<BTreeMap<String, String>> {
        toml::from_str(text).map_err(|e| Error::Config(format!("role mapping: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RoleSource {
    Attribute(String),
    Mapping(BTreeMap<String, String>),
    Resource,
}

impl RoleSource {
    pub fn resolve(config: &RoleConfig, log: &EventLog) -> RoleSource {
        if let Some(attr) = &config.attribute {
            if log.payload_keys().contains(attr) {
                return RoleSource::Attribute(attr.clone());
            }
            log::warn!("role attribute {attr:?} is not declared by the log; falling back");
        }
        match &config.mapping {
            Some(mapping) => RoleSource::Mapping(mapping.clone()),
            None => RoleSource::Resource,
        }
    }

    pub fn role_of<'e>(&'e self, event: &'e Event) -> Option<&'e str> {
        match self {
            RoleSource::Attribute(name) => event.payload(name),
            RoleSource::Mapping(mapping) => event
                .resource()
                .and_then(|r| mapping.get(r))
                .map(String::as_str),
            RoleSource::Resource => event.resource(),
        }
    }
}

/// The label universe of a reference log, fixed before any split or reduction.
///
/// All label lists are sorted lexicographically. The end marker is kept apart
/// and appended by [`LabelRegistry::activity_labels`] / [`LabelRegistry::role_labels`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelRegistry {
    activities: Vec<String>,
    resources: Vec<String>,
    roles: Vec<String>,
}

impl LabelRegistry {
    pub fn from_labels(
        activities: impl IntoIterator<Item = String>,
        resources: impl IntoIterator<Item = String>,
        roles: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let sorted = |it: &mut dyn Iterator<Item = String>, what: &str| -> Result<Vec<String>> {
            let set: BTreeSet<String> = it.collect();
            if set.contains(END_MARKER) {
                return Err(Error::Domain(format!(
                    "{what} label collides with the end marker {END_MARKER}"
                )));
            }
            Ok(set.into_iter().collect())
        };
        Ok(LabelRegistry {
            activities: sorted(&mut activities.into_iter(), "activity")?,
            resources: sorted(&mut resources.into_iter(), "resource")?,
            roles: sorted(&mut roles.into_iter(), "role")?,
        })
    }

    pub fn activities(&self) -> &[String] {
        &self.activities
    }

    pub fn resources(&self) -> &[String] {
        &self.resources
    }

    pub fn roles(&self) -> &[String] {
        &self.roles
    }

    pub fn end_marker(&self) -> &'static str {
        END_MARKER
    }

    /// Activities followed by the end marker: the next-activity target space.
    pub fn activity_labels(&self) -> Vec<String> {
        with_end(&self.activities)
    }

    /// Roles followed by the end marker: the next-role target space.
    pub fn role_labels(&self) -> Vec<String> {
        with_end(&self.roles)
    }

    pub fn has_activity(&self, label: &str) -> bool {
        label == END_MARKER
            || self
                .activities
                .binary_search_by(|a| a.as_str().cmp(label))
                .is_ok()
    }

    pub fn has_role(&self, label: &str) -> bool {
        label == END_MARKER
            || self
                .roles
                .binary_search_by(|a| a.as_str().cmp(label))
                .is_ok()
    }
}

fn with_end(labels: &[String]) -> Vec<String> {
    let mut out = labels.to_vec();
    out.push(END_MARKER.to_string());
    out
}

/// Collects every activity, resource and role occurring in `log`.
pub fn extract_registry(log: &EventLog, roles: &RoleSource) -> Result<LabelRegistry> {
    let mut activities = BTreeSet::new();
    let mut resources = BTreeSet::new();
    let mut role_labels = BTreeSet::new();
    for trace in log.traces() {
        for event in trace.events() {
            activities.insert(event.activity().to_string());
            if let Some(r) = event.resource() {
                resources.insert(r.to_string());
            }
            if let RoleSource::Mapping(mapping) = roles {
                if let Some(r) = event.resource() {
                    if !mapping.contains_key(r) {
                        return Err(Error::Config(format!(
                            "resource {r:?} has no entry in the role mapping"
                        )));
                    }
                }
            }
            if let Some(role) = roles.role_of(event) {
                role_labels.insert(role.to_string());
            }
        }
    }
    if let RoleSource::Mapping(mapping) = roles {
        if let Some(unknown) = mapping.keys().find(|r| !resources.contains(*r)) {
            return Err(Error::Config(format!(
                "role mapping references unknown resource {unknown:?}"
            )));
        }
    }
    LabelRegistry::from_labels(activities, resources, role_labels)
}
