//! Shared exploration state and the visibility predicate used by every view.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{LineageTree, ObjectId, Time, VOLUME_PROPERTY};
use crate::render::ValueTexture;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("inverted value filter [{0}, {1}]")]
    InvertedValueFilter(f64, f64),
    #[error("value filter [{0}, {1}] is outside [0, 1]")]
    ValueFilterOutOfRange(f64, f64),
    #[error("inverted time window [{0}, {1}]")]
    InvertedTimeWindow(Time, Time),
    #[error("time cursor {cursor} is outside the window [{start}, {end}]")]
    CursorOutsideWindow { cursor: Time, start: Time, end: Time },
    #[error("unknown object {0}")]
    UnknownObject(u32),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectState {
    #[default]
    Normal,
    Highlighted,
    Masked,
}

impl ObjectState {
    pub fn next(self) -> Self {
        match self {
            Self::Normal => Self::Highlighted,
            Self::Highlighted => Self::Masked,
            Self::Masked => Self::Normal,
        }
    }
}

/// Immutable snapshot of the exploration state. Every mutation returns a new
/// snapshot, so renders in flight keep the state they started with.
///
/// `time_window: None` means all time steps; `time_cursor: None` means the
/// window start. Objects absent from `object_states` are normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSession")]
pub struct SessionState {
    pub value_filter: Option<[f64; 2]>,
    pub time_window: Option<[Time; 2]>,
    pub time_cursor: Option<Time>,
    pub object_states: BTreeMap<ObjectId, ObjectState>,
    pub active_property: String,
    pub active_gradient: String,
    pub category_filter: Option<BTreeSet<String>>,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSession {
    value_filter: Option<[f64; 2]>,
    time_window: Option<[Time; 2]>,
    time_cursor: Option<Time>,
    object_states: BTreeMap<ObjectId, ObjectState>,
    active_property: String,
    active_gradient: String,
    category_filter: Option<BTreeSet<String>>,
}

impl Default for RawSession {
    fn default() -> Self {
        let s = SessionState::default();
        Self {
            value_filter: s.value_filter,
            time_window: s.time_window,
            time_cursor: s.time_cursor,
            object_states: s.object_states,
            active_property: s.active_property,
            active_gradient: s.active_gradient,
            category_filter: s.category_filter,
        }
    }
}

impl TryFrom<RawSession> for SessionState {
    type Error = SessionError;

    fn try_from(r: RawSession) -> Result<Self, Self::Error> {
        let mut s = SessionState {
            object_states: r.object_states,
            active_property: r.active_property,
            active_gradient: r.active_gradient,
            category_filter: r.category_filter,
            ..Default::default()
        };
        s.object_states.retain(|_, st| *st != ObjectState::Normal);
        if let Some([lo, hi]) = r.value_filter {
            s = s.set_value_filter(Some((lo, hi)))?;
        }
        if let Some([a, b]) = r.time_window {
            s = s.set_time_window(Some((a, b)))?;
        }
        if let Some(c) = r.time_cursor {
            if let Some([a, b]) = s.time_window {
                if !(a..=b).contains(&c) {
                    return Err(SessionError::CursorOutsideWindow {
                        cursor: c,
                        start: a,
                        end: b,
                    });
                }
            }
            s.time_cursor = Some(c);
        }
        Ok(s)
    }
}

impl Default for SessionState {
    fn default() -> Self {
        Self {
            value_filter: None,
            time_window: None,
            time_cursor: None,
            object_states: BTreeMap::new(),
            active_property: VOLUME_PROPERTY.to_string(),
            active_gradient: "viridis".to_string(),
            category_filter: None,
        }
    }
}

impl SessionState {
    pub fn state_of(&self, id: u32) -> ObjectState {
        ObjectId::new(id)
            .and_then(|id| self.object_states.get(&id).copied())
            .unwrap_or_default()
    }

    pub fn in_time_window(&self, t: Time) -> bool {
        self.time_window.is_none_or(|[a, b]| a <= t && t <= b)
    }

    /// Conjunction of every filter. `vt` must be the texture of
    /// `active_property`: the value filter reads its normalized entry and the
    /// category filter its label, and an absent entry fails an active filter.
    pub fn visible(&self, vt: &ValueTexture, id: u32, t: Time) -> bool {
        if id == 0 || self.state_of(id) == ObjectState::Masked || !self.in_time_window(t) {
            return false;
        }
        if let Some([lo, hi]) = self.value_filter {
            match vt.normalized(id, t) {
                Some(x) if f64::from(x) >= lo && f64::from(x) <= hi => {}
                _ => return false,
            }
        }
        if let Some(set) = &self.category_filter {
            match vt.category(id, t) {
                Some(c) if set.contains(c) => {}
                _ => return false,
            }
        }
        true
    }

    /// Advances `id` to its next state and gives every lineage descendant of
    /// its latest instance the same state.
    pub fn cycle_object_state(&self, id: u32, lineage: &LineageTree) -> Result<Self, SessionError> {
        let oid = ObjectId::new(id).ok_or(SessionError::UnknownObject(id))?;
        let latest = lineage
            .instances(oid)
            .map(|n| n.t)
            .max()
            .ok_or(SessionError::UnknownObject(id))?;
        let next = self.state_of(id).next();
        let mut ids: BTreeSet<ObjectId> = lineage
            .descendants(oid, latest)
            .expect("instance exists")
            .into_iter()
            .map(|n| n.id)
            .collect();
        ids.insert(oid);
        let mut s = self.clone();
        for i in ids {
            if next == ObjectState::Normal {
                s.object_states.remove(&i);
            } else {
                s.object_states.insert(i, next);
            }
        }
        Ok(s)
    }

    pub fn set_object_state(&self, id: ObjectId, state: ObjectState) -> Self {
        let mut s = self.clone();
        if state == ObjectState::Normal {
            s.object_states.remove(&id);
        } else {
            s.object_states.insert(id, state);
        }
        s
    }

    /// Sets the inclusive time window and clamps the cursor into it.
    pub fn set_time_window(&self, window: Option<(Time, Time)>) -> Result<Self, SessionError> {
        let mut s = self.clone();
        match window {
            None => s.time_window = None,
            Some((a, b)) => {
                if a > b {
                    return Err(SessionError::InvertedTimeWindow(a, b));
                }
                s.time_window = Some([a, b]);
                s.time_cursor = Some(s.time_cursor.unwrap_or(a).clamp(a, b));
            }
        }
        Ok(s)
    }

    /// Moves the cursor, clamped into the window.
    pub fn set_time_cursor(&self, t: Time) -> Self {
        let mut s = self.clone();
        s.time_cursor = Some(match s.time_window {
            Some([a, b]) => t.clamp(a, b),
            None => t,
        });
        s
    }

    /// Sets the filter on normalized values; `None` disables it.
    pub fn set_value_filter(&self, range: Option<(f64, f64)>) -> Result<Self, SessionError> {
        let mut s = self.clone();
        match range {
            None => s.value_filter = None,
            Some((lo, hi)) => {
                if lo > hi {
                    return Err(SessionError::InvertedValueFilter(lo, hi));
                }
                if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
                    return Err(SessionError::ValueFilterOutOfRange(lo, hi));
                }
                s.value_filter = Some([lo, hi]);
            }
        }
        Ok(s)
    }

    pub fn set_category_filter(&self, labels: Option<BTreeSet<String>>) -> Self {
        let mut s = self.clone();
        s.category_filter = labels;
        s
    }

    pub fn set_property(&self, name: &str) -> Self {
        let mut s = self.clone();
        s.active_property = name.to_string();
        s
    }

    pub fn set_gradient(&self, name: &str) -> Self {
        let mut s = self.clone();
        s.active_gradient = name.to_string();
        s
    }

    /// Time shown by the mesh view.
    pub fn cursor_or(&self, fallback: Time) -> Time {
        self.time_cursor.or(self.time_window.map(|w| w[0])).unwrap_or(fallback)
    }
}
