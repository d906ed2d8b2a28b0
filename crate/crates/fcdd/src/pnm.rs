//! Binary PPM (P6) images and PGM (P5) masks/heatmaps, 8-bit.

use std::fs;
use std::path::Path;

use fcdd_core::Tensor;

use crate::error::{Error, Result};

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn header(magic: &str, w: usize, h: usize) -> Vec<u8> {
    format!("{magic}\n{w} {h}\n255\n").into_bytes()
}

/// Encodes a `[3,H,W]` image in `[0,1]`.
pub fn encode_ppm(image: &Tensor) -> Result<Vec<u8>> {
    let [3, h, w] = *image.shape() else {
        return Err(Error::Invalid(format!("PPM needs a [3,H,W] image, got {:?}", image.shape())));
    };
    let mut out = header("P6", w, h);
    let d = image.data();
    for p in 0..h * w {
        for c in 0..3 {
            out.push(quantize(d[c * h * w + p]));
        }
    }
    Ok(out)
}

/// Encodes a `[1,H,W]` or `[H,W]` map in `[0,1]`.
pub fn encode_pgm(map: &Tensor) -> Result<Vec<u8>> {
    let (h, w) = match *map.shape() {
        [1, h, w] | [h, w] => (h, w),
        _ => return Err(Error::Invalid(format!("PGM needs a [1,H,W] map, got {:?}", map.shape()))),
    };
    let mut out = header("P5", w, h);
    out.extend(map.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

fn parse(bytes: &[u8], path: &Path, magic: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = |m: &str| Error::format(path, m);
    if !bytes.starts_with(magic) {
        return Err(bad("wrong magic number"));
    }
    let mut fields = Vec::with_capacity(3);
    let mut pos = magic.len();
    while fields.len() < 3 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        let text = std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("bad header"))?;
        fields.push(text.parse::<usize>().map_err(|_| bad("bad header field"))?);
    }
    if fields[2] != 255 {
        return Err(bad("only maxval 255 is supported"));
    }
    pos += 1;
    Ok((fields[0], fields[1], bytes.get(pos..).unwrap_or_default().to_vec()))
}

pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let (w, h, px) = parse(bytes, path, b"P6")?;
    if px.len() != 3 * w * h {
        return Err(Error::format(path, format!("expected {} pixel bytes, found {}", 3 * w * h, px.len())));
    }
    let mut data = vec![0.0; 3 * h * w];
    for p in 0..h * w {
        for c in 0..3 {
            data[c * h * w + p] = px[3 * p + c] as f64 / 255.0;
        }
    }
    Ok(Tensor::new(&[3, h, w], data)?)
}

/// Decodes to `[1,H,W]` with values `v / 255`.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let (w, h, px) = parse(bytes, path, b"P5")?;
    if px.len() != w * h {
        return Err(Error::format(path, format!("expected {} pixel bytes, found {}", w * h, px.len())));
    }
    Ok(Tensor::new(&[1, h, w], px.iter().map(|&v| v as f64 / 255.0).collect())?)
}

pub fn write_ppm(path: &Path, image: &Tensor) -> Result<()> {
    fs::write(path, encode_ppm(image)?).map_err(Error::io(path))
}

pub fn write_pgm(path: &Path, map: &Tensor) -> Result<()> {
    fs::write(path, encode_pgm(map)?).map_err(Error::io(path))
}

pub fn read_ppm(path: &Path) -> Result<Tensor> {
    decode_ppm(&fs::read(path).map_err(Error::io(path))?, path)
}

pub fn read_pgm(path: &Path) -> Result<Tensor> {
    decode_pgm(&fs::read(path).map_err(Error::io(path))?, path)
}
