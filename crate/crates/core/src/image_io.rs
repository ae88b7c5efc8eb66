//! 8-bit PNG and binary PPM images, and image grids.
//!
//! Pixel values in [−1, 1] map to bytes by `(x + 1)·127.5` rounded half to
//! even and clamped.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn to_byte(x: f64) -> u8 {
    quantize((x + 1.0) * 127.5)
}

/// Rounds half to even and clamps to a byte.
fn quantize(v: f64) -> u8 {
    v.round_ties_even().clamp(0.0, 255.0) as u8
}

pub fn from_byte(b: u8) -> f64 {
    b as f64 / 127.5 - 1.0
}

fn chw(image: &Tensor) -> Result<(usize, usize, usize)> {
    match *image.shape() {
        [c, h, w] if c == 1 || c == 3 => Ok((c, h, w)),
        _ => Err(Error::dim("image", format!("expected [1 or 3, H, W], got {:?}", image.shape()))),
    }
}

/// Interleaved RGB bytes (grey images are replicated).
pub fn to_rgb_bytes(image: &Tensor) -> Result<(Vec<u8>, usize, usize)> {
    let (c, h, w) = chw(image)?;
    let d = image.data();
    let mut out = Vec::with_capacity(3 * h * w);
    for y in 0..h {
        for x in 0..w {
            for ch in 0..3 {
                let src = if c == 1 { 0 } else { ch };
                out.push(to_byte(d[(src * h + y) * w + x]));
            }
        }
    }
    Ok((out, w, h))
}

fn from_rgb_bytes(bytes: &[u8], w: usize, h: usize, stride: usize) -> Result<Tensor> {
    let mut data = vec![0.0; 3 * h * w];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..3 {
                data[(ch * h + y) * w + x] = from_byte(bytes[(y * w + x) * stride + ch.min(stride - 1)]);
            }
        }
    }
    Tensor::from_vec(data, &[3, h, w])
}

pub fn write_png(path: &Path, image: &Tensor) -> Result<()> {
    let (bytes, w, h) = to_rgb_bytes(image)?;
    let mut enc = png::Encoder::new(BufWriter::new(File::create(path)?), w as u32, h as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| Error::Format(format!("png: {e}")))?;
    writer.write_image_data(&bytes).map_err(|e| Error::Format(format!("png: {e}")))?;
    writer.finish().map_err(|e| Error::Format(format!("png: {e}")))?;
    Ok(())
}

pub fn write_ppm(path: &Path, image: &Tensor) -> Result<()> {
    let (bytes, w, h) = to_rgb_bytes(image)?;
    let mut f = BufWriter::new(File::create(path)?);
    write!(f, "P6\n{w} {h}\n255\n")?;
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

fn is_ppm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
}

/// Writes PPM for `.ppm` paths and PNG otherwise.
pub fn write_image(path: &Path, image: &Tensor) -> Result<()> {
    if is_ppm(path) {
        write_ppm(path, image)
    } else {
        write_png(path, image)
    }
}

pub fn read_png(path: &Path) -> Result<Tensor> {
    let fmt = |e: png::DecodingError| Error::Format(format!("{}: {e}", path.display()));
    let mut dec = png::Decoder::new(BufReader::new(File::open(path)?));
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(fmt)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format(format!("{}: image too large", path.display())))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(fmt)?;
    let stride = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(Error::Format("unexpanded palette image".into())),
    };
    let (w, h) = (info.width as usize, info.height as usize);
    // grey (with or without alpha) replicates channel 0
    let stride_for_rgb = if stride <= 2 { 1 } else { stride };
    let rows: Vec<u8> = buf[..info.line_size * h]
        .chunks(info.line_size)
        .flat_map(|r| r[..w * stride].chunks(stride).flat_map(|px| px[..stride_for_rgb.min(3)].to_vec()))
        .collect();
    from_rgb_bytes(&rows, w, h, stride_for_rgb.min(3))
}

fn ppm_token(r: &mut impl BufRead) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let c = byte[0] as char;
        if c == '#' && tok.is_empty() {
            let mut skip = String::new();
            r.read_line(&mut skip)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(c);
    }
    Ok(tok)
}

pub fn read_ppm(path: &Path) -> Result<Tensor> {
    let mut r = BufReader::new(File::open(path)?);
    let bad = |m: &str| Error::Format(format!("{}: {m}", path.display()));
    if ppm_token(&mut r)? != "P6" {
        return Err(bad("not a binary PPM"));
    }
    let mut num = || -> Result<usize> { ppm_token(&mut r)?.parse().map_err(|_| bad("bad header")) };
    let (w, h, max) = (num()?, num()?, num()?);
    if max != 255 || w == 0 || h == 0 {
        return Err(bad("only 8-bit PPM is supported"));
    }
    let mut bytes = vec![0u8; 3 * w * h];
    r.read_exact(&mut bytes).map_err(|_| bad("truncated pixel data"))?;
    from_rgb_bytes(&bytes, w, h, 3)
}

/// Reads a PNG or PPM file as a `[3, H, W]` image in [−1, 1].
pub fn read_image(path: &Path) -> Result<Tensor> {
    if is_ppm(path) {
        read_ppm(path)
    } else {
        read_png(path)
    }
}

/// Tiles equally sized `[c, H, W]` images row-major into a grid with `cols`
/// columns; empty cells are filled with −1.
pub fn image_grid(images: &[Tensor], cols: usize) -> Result<Tensor> {
    let first = images.first().ok_or_else(|| Error::Contract("empty image grid".into()))?;
    let (c, h, w) = chw(first)?;
    if cols == 0 {
        return Err(Error::Contract("grid needs at least one column".into()));
    }
    if images.iter().any(|i| i.shape() != first.shape()) {
        return Err(Error::dim("image_grid", "images differ in shape".to_string()));
    }
    let rows = images.len().div_ceil(cols);
    let (gh, gw) = (rows * h, cols * w);
    let mut out = vec![-1.0; c * gh * gw];
    for (k, img) in images.iter().enumerate() {
        let (oy, ox) = ((k / cols) * h, (k % cols) * w);
        for ch in 0..c {
            for y in 0..h {
                let src = &img.data()[(ch * h + y) * w..(ch * h + y + 1) * w];
                let dst = (ch * gh + oy + y) * gw + ox;
                out[dst..dst + w].copy_from_slice(src);
            }
        }
    }
    Tensor::from_vec(out, &[c, gh, gw])
}

/// Splits a `[b, c, H, W]` batch into `[c, H, W]` images.
pub fn unbatch(images: &Tensor) -> Result<Vec<Tensor>> {
    let [b, c, h, w] = match *images.shape() {
        [b, c, h, w] => [b, c, h, w],
        _ => return Err(Error::dim("unbatch", format!("shape {:?}", images.shape()))),
    };
    let plane = c * h * w;
    (0..b)
        .map(|i| Tensor::from_vec(images.data()[i * plane..(i + 1) * plane].to_vec(), &[c, h, w]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_mapping_rounds_half_to_even() {
        assert_eq!(to_byte(-1.0), 0);
        assert_eq!(to_byte(1.0), 255);
        assert_eq!(to_byte(5.0), 255);
        assert_eq!(to_byte(-3.0), 0);
        // 0 maps to 127.5, which rounds to the even 128
        assert_eq!(to_byte(0.0), 128);
        assert_eq!(quantize(0.5), 0);
        assert_eq!(quantize(1.5), 2);
        assert_eq!(quantize(2.5), 2);
        assert_eq!(quantize(254.5), 254);
    }

    #[test]
    fn png_and_ppm_roundtrip_through_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let bytes: Vec<f64> = (0..3 * 4 * 5).map(|i| from_byte((i * 17 % 256) as u8)).collect();
        let img = Tensor::from_vec(bytes, &[3, 4, 5]).unwrap();
        for name in ["a.png", "a.ppm"] {
            let p = dir.path().join(name);
            write_image(&p, &img).unwrap();
            let back = read_image(&p).unwrap();
            assert_eq!(back.shape(), &[3, 4, 5]);
            assert_eq!(to_rgb_bytes(&back).unwrap().0, to_rgb_bytes(&img).unwrap().0);
        }
    }

    #[test]
    fn grid_places_images_row_major() {
        let a = Tensor::full(&[1, 2, 2], 0.5);
        let b = Tensor::full(&[1, 2, 2], -0.5);
        let g = image_grid(&[a.clone(), b, a], 2).unwrap();
        assert_eq!(g.shape(), &[1, 4, 4]);
        assert_eq!(&g.data()[0..4], &[0.5, 0.5, -0.5, -0.5]);
        assert_eq!(&g.data()[8..12], &[0.5, 0.5, -1.0, -1.0]);
    }
}
