use crate::dataset::{Dataset, PropertyKind, PropertyValue, Time};

use super::RenderError;

/// Per-(object, time) property values prepared for colormapping.
///
/// Continuous entries hold `(v - min) / (max - min)`; categorical entries hold
/// the index of the label in `categories`. Absent entries are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTexture {
    pub property: String,
    pub kind: PropertyKind,
    /// Raw bounds of the continuous values; `None` for categorical or empty.
    pub bounds: Option<(f64, f64)>,
    /// Sorted distinct labels (categorical only).
    pub categories: Vec<String>,
    start: Time,
    steps: usize,
    /// Sorted object IDs with at least one instance; row index into `values`.
    ids: Vec<u32>,
    values: Vec<f32>,
}

impl ValueTexture {
    /// A texture with every entry absent; used when no property is active.
    pub fn empty(name: &str, start: Time, steps: usize) -> Self {
        Self {
            property: name.to_string(),
            kind: PropertyKind::Continuous,
            bounds: None,
            categories: Vec::new(),
            start,
            steps,
            ids: Vec::new(),
            values: Vec::new(),
        }
    }

    fn slot(&self, id: u32, t: Time) -> Option<usize> {
        let row = self.ids.binary_search(&id).ok()?;
        let k = usize::try_from(t.checked_sub(self.start)?).ok()?;
        (k < self.steps).then_some(row * self.steps + k)
    }

    /// Stored entry: normalized value or category index.
    pub fn raw(&self, id: u32, t: Time) -> Option<f32> {
        let v = self.values[self.slot(id, t)?];
        (!v.is_nan()).then_some(v)
    }

    /// Entry mapped into `[0, 1]`. Category `i` of `n` maps to `i / (n - 1)`,
    /// a single category to 0.5.
    pub fn normalized(&self, id: u32, t: Time) -> Option<f32> {
        let v = self.raw(id, t)?;
        Some(match self.kind {
            PropertyKind::Continuous => v,
            PropertyKind::Categorical => match self.categories.len() {
                0 | 1 => 0.5,
                n => v / (n - 1) as f32,
            },
        })
    }

    pub fn category(&self, id: u32, t: Time) -> Option<&str> {
        match self.kind {
            PropertyKind::Categorical => self.categories.get(self.raw(id, t)? as usize).map(String::as_str),
            PropertyKind::Continuous => None,
        }
    }

    /// Inverse of the continuous normalization.
    pub fn denormalize(&self, x: f32) -> Option<f64> {
        let (lo, hi) = self.bounds?;
        Some(if lo == hi { lo } else { lo + f64::from(x) * (hi - lo) })
    }
}

/// Precomputes the colormapping texture for property `name` of `d`.
pub fn bake_value_texture(d: &Dataset, name: &str) -> Result<ValueTexture, RenderError> {
    let prop = d
        .properties
        .get(name)
        .ok_or_else(|| RenderError::UnknownProperty(name.to_string()))?;
    let steps = d.step_count();
    let start = d.time_range().start;
    let mut ids: Vec<u32> = d
        .time_steps()
        .flat_map(|t| d.objects_at(t).map(|(id, _)| id.get()))
        .chain(prop.values.keys().map(|n| n.id.get()))
        .collect();
    ids.sort_unstable();
    ids.dedup();

    let mut tex = ValueTexture {
        property: name.to_string(),
        kind: prop.kind,
        bounds: None,
        categories: Vec::new(),
        start,
        steps,
        values: vec![f32::NAN; ids.len() * steps],
        ids,
    };

    match prop.kind {
        PropertyKind::Continuous => {
            let scalars = prop.values.iter().filter_map(|(n, v)| match v {
                PropertyValue::Scalar(x) if x.is_finite() => Some((*n, *x)),
                _ => None,
            });
            let pairs: Vec<_> = scalars.collect();
            let lo = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let hi = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            if !pairs.is_empty() {
                tex.bounds = Some((lo, hi));
            }
            for (n, x) in pairs {
                let norm = if hi > lo { (x - lo) / (hi - lo) } else { 0.5 };
                if let Some(s) = tex.slot(n.id.get(), n.t) {
                    tex.values[s] = norm as f32;
                }
            }
        }
        PropertyKind::Categorical => {
            tex.categories = prop.categories();
            for (n, v) in &prop.values {
                if let PropertyValue::Category(label) = v {
                    let idx = tex.categories.binary_search(label).expect("label listed");
                    if let Some(s) = tex.slot(n.id.get(), n.t) {
                        tex.values[s] = idx as f32;
                    }
                }
            }
        }
    }
    Ok(tex)
}
