//! 8-bit RGBA images and PNG encoding.

use std::io::Write;
use std::path::Path;

use crate::geometry::IdImage;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbaImage {
    pub width: usize,
    pub height: usize,
    /// Row-major RGBA bytes, row 0 at the top.
    pub data: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("png: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("png: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("id {0} does not fit in a 16-bit image")]
    IdTooLarge(u32),
    #[error("unsupported png layout {0:?}/{1:?}")]
    Layout(png::ColorType, png::BitDepth),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RgbaImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * 4],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> [u8; 4] {
        let o = (j * self.width + i) * 4;
        [self.data[o], self.data[o + 1], self.data[o + 2], self.data[o + 3]]
    }

    pub fn set(&mut self, i: usize, j: usize, px: [u8; 4]) {
        let o = (j * self.width + i) * 4;
        self.data[o..o + 4].copy_from_slice(&px);
    }

    /// Number of pixels with nonzero alpha.
    pub fn opaque_count(&self) -> usize {
        self.data.chunks_exact(4).filter(|p| p[3] != 0).count()
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImageError> {
        let mut out = Vec::new();
        encode(
            &mut out,
            self.width,
            self.height,
            png::ColorType::Rgba,
            png::BitDepth::Eight,
            &self.data,
        )?;
        Ok(out)
    }

    pub fn write_png(&self, path: &Path) -> Result<(), ImageError> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }

    pub fn decode_png(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut reader = png::Decoder::new(std::io::Cursor::new(bytes)).read_info()?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf)?;
        if info.color_type != png::ColorType::Rgba || info.bit_depth != png::BitDepth::Eight {
            return Err(ImageError::Layout(info.color_type, info.bit_depth));
        }
        buf.truncate(info.buffer_size());
        Ok(Self {
            width: info.width as usize,
            height: info.height as usize,
            data: buf,
        })
    }
}

fn encode<W: Write>(
    w: W,
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: &[u8],
) -> Result<(), ImageError> {
    let mut enc = png::Encoder::new(w, width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    let mut writer = enc.write_header()?;
    writer.write_image_data(data)?;
    writer.finish()?;
    Ok(())
}

/// 16-bit grayscale PNG whose sample values are the object IDs.
pub fn encode_id_png(img: &IdImage) -> Result<Vec<u8>, ImageError> {
    let mut data = Vec::with_capacity(img.pixels.len() * 2);
    for &id in &img.pixels {
        let v = u16::try_from(id).map_err(|_| ImageError::IdTooLarge(id))?;
        data.extend_from_slice(&v.to_be_bytes());
    }
    let mut out = Vec::new();
    encode(
        &mut out,
        img.width,
        img.height,
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        &data,
    )?;
    Ok(out)
}

pub fn decode_id_png(bytes: &[u8]) -> Result<IdImage, ImageError> {
    let mut reader = png::Decoder::new(std::io::Cursor::new(bytes)).read_info()?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(ImageError::Layout(info.color_type, info.bit_depth));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut img = IdImage::new(w, h, None);
    for (p, c) in img.pixels.iter_mut().zip(buf.chunks_exact(2)) {
        *p = u32::from(u16::from_be_bytes([c[0], c[1]]));
    }
    Ok(img)
}
