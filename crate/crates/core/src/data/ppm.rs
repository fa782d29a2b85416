//! Binary PPM (`P6`, maxval 255).

use std::fs;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

/// Quantizes a `[0, 1]` planar image to interleaved 8-bit RGB.
pub fn to_rgb8(img: &Image) -> Vec<u8> {
    let n = img.height * img.width;
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        for c in 0..3 {
            out.push((img.data[c * n + i].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(to_rgb8(img));
    out
}

pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<Image> {
    let mut pos = 0usize;
    // Header tokens are whitespace separated; `#` starts a comment.
    let token = |pos: &mut usize| -> Result<(usize, String)> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::format(path, start as u64, "truncated PPM header"));
        }
        Ok((start, String::from_utf8_lossy(&bytes[start..*pos]).into_owned()))
    };
    let (_, magic) = token(&mut pos)?;
    if magic != "P6" {
        return Err(Error::format(path, 0, format!("bad magic `{magic}`, expected P6")));
    }
    let num = |pos: &mut usize, what: &str| -> Result<usize> {
        let (at, t) = token(pos)?;
        t.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::format(path, at as u64, format!("invalid {what} `{t}`")))
    };
    let width = num(&mut pos, "width")?;
    let height = num(&mut pos, "height")?;
    let maxval_at = pos;
    let maxval = num(&mut pos, "maxval")?;
    if maxval != 255 {
        return Err(Error::format(path, maxval_at as u64, format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = width * height;
    let need = pos + 3 * n;
    if bytes.len() < need {
        return Err(Error::format(path, bytes.len() as u64, "truncated PPM raster"));
    }
    let mut data = vec![0.0f32; 3 * n];
    for i in 0..n {
        for c in 0..3 {
            data[c * n + i] = f32::from(bytes[pos + 3 * i + c]) / 255.0;
        }
    }
    Image::new(height, width, data)
}

pub fn write_ppm(img: &Image, path: &Path) -> Result<()> {
    fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}

pub fn read_ppm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes, path)
}
