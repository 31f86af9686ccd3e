//! 8-bit RGB PNG and Portable FloatMap (PFM) files.
//!
//! PFM layout: `Pf\n<width> <height>\n-1.0\n` followed by one little-endian
//! float32 per pixel, rows stored bottom-to-top. Infinity is written as the
//! IEEE value.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::render::{DepthImage, RgbImage};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("PNG encoding failed: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("PNG decoding failed: {0}")]
    PngDecode(#[from] png::DecodingError),
    #[error("unsupported PNG layout: {0}")]
    PngLayout(String),
    #[error("malformed PFM: {0}")]
    Pfm(String),
}

pub fn write_png(path: impl AsRef<Path>, image: &RgbImage) -> Result<(), ImageError> {
    let file = File::create(path)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), image.width, image.height);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_compression(png::Compression::Fast);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&image.data)?;
    writer.finish()?;
    Ok(())
}

pub fn read_png(path: impl AsRef<Path>) -> Result<RgbImage, ImageError> {
    let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(ImageError::PngLayout(format!(
            "{:?} at {:?}",
            info.color_type, info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    Ok(RgbImage {
        width: info.width,
        height: info.height,
        data: buf,
    })
}

pub fn write_pfm(path: impl AsRef<Path>, image: &DepthImage) -> Result<(), ImageError> {
    let mut w = BufWriter::new(File::create(path)?);
    encode_pfm(&mut w, image)?;
    w.flush()?;
    Ok(())
}

pub fn encode_pfm<W: Write>(w: &mut W, image: &DepthImage) -> io::Result<()> {
    write!(w, "Pf\n{} {}\n-1.0\n", image.width, image.height)?;
    let width = image.width as usize;
    for row in image.data.chunks_exact(width.max(1)).rev() {
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<DepthImage, ImageError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_pfm(&bytes)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<DepthImage, ImageError> {
    let bad = |m: &str| ImageError::Pfm(m.to_string());
    // Header is three newline-terminated lines.
    let mut lines = Vec::with_capacity(3);
    let mut pos = 0;
    while lines.len() < 3 {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("truncated header"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad("header is not text"))?;
        lines.push(line.trim());
        pos += end + 1;
    }
    if lines[0] != "Pf" {
        return Err(bad("only single-channel `Pf` files are supported"));
    }
    let dims: Vec<u32> = lines[1]
        .split_ascii_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad dimensions")))
        .collect::<Result<_, _>>()?;
    let [width, height] = dims[..] else {
        return Err(bad("bad dimensions"));
    };
    let scale: f32 = lines[2].parse().map_err(|_| bad("bad scale"))?;
    let little_endian = scale < 0.0;

    let count = width as usize * height as usize;
    let body = &bytes[pos..];
    if body.len() != count * 4 {
        return Err(bad("pixel data length does not match dimensions"));
    }
    let mut rows: Vec<&[u8]> = body.chunks_exact((width as usize * 4).max(1)).collect();
    rows.reverse();
    let mut data = Vec::with_capacity(count);
    for row in rows.into_iter().take(height as usize) {
        for px in row.chunks_exact(4) {
            let b = [px[0], px[1], px[2], px[3]];
            data.push(if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            });
        }
    }
    Ok(DepthImage { width, height, data })
}
