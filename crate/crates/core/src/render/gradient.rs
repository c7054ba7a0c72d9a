use crate::dataset::PropertyKind;

use super::{RenderError, ValueTexture};

pub type Rgb = [f32; 3];

/// Color for entries missing from the value texture.
pub const ABSENT_COLOR: Rgb = [0.5, 0.5, 0.5];

#[derive(Clone, Debug, PartialEq)]
pub enum ColorGradient {
    /// Piecewise-linear ramp; positions strictly increasing from 0 to 1.
    Stops { name: String, stops: Vec<(f32, Rgb)> },
    /// One color per category index, cycling when there are more categories.
    Palette { name: String, colors: Vec<Rgb> },
}

fn hex(c: u32) -> Rgb {
    [
        ((c >> 16) & 0xff) as f32 / 255.0,
        ((c >> 8) & 0xff) as f32 / 255.0,
        (c & 0xff) as f32 / 255.0,
    ]
}

fn even_stops(colors: &[u32]) -> Vec<(f32, Rgb)> {
    let n = colors.len() - 1;
    colors
        .iter()
        .enumerate()
        .map(|(i, &c)| (i as f32 / n as f32, hex(c)))
        .collect()
}

pub const GRADIENT_NAMES: &[&str] = &["viridis", "magma", "coolwarm", "grayscale", "rainbow", "tab10"];

impl ColorGradient {
    pub fn stops(name: &str, stops: Vec<(f32, Rgb)>) -> Result<Self, RenderError> {
        let bad = |msg: &str| RenderError::InvalidGradient(format!("{name}: {msg}"));
        if stops.len() < 2 {
            return Err(bad("needs at least two stops"));
        }
        if stops[0].0 != 0.0 || stops[stops.len() - 1].0 != 1.0 {
            return Err(bad("stops must start at 0 and end at 1"));
        }
        if stops.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(bad("stop positions must be strictly increasing"));
        }
        Ok(Self::Stops {
            name: name.to_string(),
            stops,
        })
    }

    pub fn palette(name: &str, colors: Vec<Rgb>) -> Result<Self, RenderError> {
        if colors.is_empty() {
            return Err(RenderError::InvalidGradient(format!("{name}: empty palette")));
        }
        Ok(Self::Palette {
            name: name.to_string(),
            colors,
        })
    }

    pub fn named(name: &str) -> Result<Self, RenderError> {
        let stops = match name {
            "viridis" => even_stops(&[
                0x440154, 0x482878, 0x3e4989, 0x31688e, 0x26828e, 0x1f9e89, 0x35b779, 0x6ece58, 0xb5de2b, 0xfde725,
            ]),
            "magma" => even_stops(&[
                0x000004, 0x180f3d, 0x440f76, 0x721f81, 0x9e2f7f, 0xcd4071, 0xf1605d, 0xfd9668, 0xfeca8d, 0xfcfdbf,
            ]),
            "coolwarm" => even_stops(&[0x3b4cc0, 0x8db0fe, 0xdddddd, 0xf49a7b, 0xb40426]),
            "grayscale" => even_stops(&[0x000000, 0xffffff]),
            "rainbow" => even_stops(&[0x6e40aa, 0x1ac7c2, 0x52f667, 0xaff05b, 0xfe9b2d, 0xbf3caf]),
            "tab10" => {
                let colors = [
                    0x1f77b4, 0xff7f0e, 0x2ca02c, 0xd62728, 0x9467bd, 0x8c564b, 0xe377c2, 0x7f7f7f, 0xbcbd22, 0x17becf,
                ];
                return Self::palette(name, colors.iter().map(|&c| hex(c)).collect());
            }
            other => return Err(RenderError::UnknownGradient(other.to_string())),
        };
        Self::stops(name, stops)
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Stops { name, .. } | Self::Palette { name, .. } => name,
        }
    }

    /// Color at position `x`, clamped to `[0, 1]`.
    pub fn sample(&self, x: f32) -> Rgb {
        let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
        match self {
            Self::Stops { stops, .. } => {
                let i = stops.partition_point(|s| s.0 <= x).clamp(1, stops.len() - 1);
                let (p0, c0) = stops[i - 1];
                let (p1, c1) = stops[i];
                let f = (x - p0) / (p1 - p0);
                [0, 1, 2].map(|k| c0[k] + (c1[k] - c0[k]) * f)
            }
            Self::Palette { colors, .. } => {
                let i = ((x * colors.len() as f32) as usize).min(colors.len() - 1);
                colors[i]
            }
        }
    }

    /// Base color of `(id, t)` under texture `vt`. Categories index a palette
    /// directly; everything else goes through the normalized value.
    pub fn color_for(&self, vt: &ValueTexture, id: u32, t: i32) -> Rgb {
        match (self, vt.kind) {
            (Self::Palette { colors, .. }, PropertyKind::Categorical) => match vt.raw(id, t) {
                Some(i) => colors[i as usize % colors.len()],
                None => ABSENT_COLOR,
            },
            _ => vt.normalized(id, t).map_or(ABSENT_COLOR, |x| self.sample(x)),
        }
    }
}
