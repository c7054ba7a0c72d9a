use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::mesh::{Node, ObjectId, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyKind {
    Continuous,
    Categorical,
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PropertyKind::Continuous => "continuous",
            PropertyKind::Categorical => "categorical",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum PropertyValue {
    Scalar(f64),
    Category(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PropertyError {
    #[error("unknown property {0:?}")]
    UnknownProperty(String),
    #[error("property {name:?} is {expected}, got a value of the other kind")]
    KindMismatch { name: String, expected: PropertyKind },
    #[error("property {name:?}: non-finite value for {node}")]
    NonFinite { name: String, node: Node },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Property {
    pub kind: PropertyKind,
    pub values: BTreeMap<Node, PropertyValue>,
}

impl Property {
    pub fn new(kind: PropertyKind) -> Self {
        Self {
            kind,
            values: BTreeMap::new(),
        }
    }

    /// Distinct category labels in sorted order; their position is the
    /// colormap index of the label.
    pub fn categories(&self) -> Vec<String> {
        self.values
            .values()
            .filter_map(|v| match v {
                PropertyValue::Category(s) => Some(s.clone()),
                PropertyValue::Scalar(_) => None,
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Per-object, per-time attribute tables keyed by property name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PropertyTable {
    props: BTreeMap<String, Property>,
}

impl PropertyTable {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.props.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&Property> {
        self.props.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.props.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Property)> {
        self.props.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Declares a property. Re-declaring with the same kind is a no-op.
    pub fn declare(&mut self, name: &str, kind: PropertyKind) -> Result<(), PropertyError> {
        match self.props.get(name) {
            Some(p) if p.kind != kind => Err(PropertyError::KindMismatch {
                name: name.into(),
                expected: p.kind,
            }),
            Some(_) => Ok(()),
            None => {
                self.props.insert(name.to_string(), Property::new(kind));
                Ok(())
            }
        }
    }

    pub fn insert(&mut self, name: &str, id: ObjectId, t: Time, value: PropertyValue) -> Result<(), PropertyError> {
        let kind = match &value {
            PropertyValue::Scalar(v) => {
                if !v.is_finite() {
                    return Err(PropertyError::NonFinite {
                        name: name.into(),
                        node: Node::new(id, t),
                    });
                }
                PropertyKind::Continuous
            }
            PropertyValue::Category(_) => PropertyKind::Categorical,
        };
        self.declare(name, kind)?;
        self.props
            .get_mut(name)
            .expect("declared above")
            .values
            .insert(Node::new(id, t), value);
        Ok(())
    }

    /// Stored value, `Ok(None)` when the entry is absent.
    pub fn value(&self, name: &str, id: ObjectId, t: Time) -> Result<Option<&PropertyValue>, PropertyError> {
        let prop = self
            .props
            .get(name)
            .ok_or_else(|| PropertyError::UnknownProperty(name.into()))?;
        Ok(prop.values.get(&Node::new(id, t)))
    }
}
