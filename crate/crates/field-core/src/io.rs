//! Image file I/O: PPM (P3/P6) and PNG, 8- and 16-bit.
//!
//! Loading normalizes samples to `[0, 1]` by dividing by the declared maximum
//! value (the PPM `maxval`, or 255/65535 for PNG). Saving clamps to `[0, 1]`
//! first and reports how many pixels were clamped.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::grid::ColorImage;
use crate::{Error, Result};

/// Outcome of [`save_image`]; a non-zero `clamped_pixels` means the field had
/// values outside `[0, 1]` that were clipped on write.
#[derive(Clone, Copy, Debug, Default)]
pub struct SaveReport {
    pub clamped_pixels: usize,
}

/// Loads a PPM (P3 or P6) or PNG image, normalized to `[0, 1]`.
///
/// The format is detected from the file content, not the extension. Gray PNG
/// input is replicated across the three channels.
pub fn load_image(path: &Path) -> Result<ColorImage> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P3") || bytes.starts_with(b"P6") {
        parse_ppm(&bytes)
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        load_png(&bytes)
    } else {
        Err(Error::ImageFormat(format!(
            "{}: not a PPM (P3/P6) or PNG file",
            path.display()
        )))
    }
}

/// Saves as PPM (P6, 8-bit) or PNG (8-bit RGB) depending on the extension
/// (`.ppm` / `.png`). Values are clamped to `[0, 1]` before quantization.
pub fn save_image(path: &Path, img: &ColorImage) -> Result<SaveReport> {
    let mut clamped = 0usize;
    let mut quantized = Vec::with_capacity(img.data().len() * 3);
    for px in img.data() {
        let mut was_clamped = false;
        for &v in px {
            let c = v.clamp(0.0, 1.0);
            if c != v {
                was_clamped = true;
            }
            quantized.push((c * 255.0).round() as u8);
        }
        if was_clamped {
            clamped += 1;
        }
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "ppm" => {
            let mut out = Vec::new();
            write!(out, "P6\n{} {}\n255\n", img.cols(), img.rows())
                .expect("in-memory write cannot fail");
            out.extend_from_slice(&quantized);
            fs::write(path, out)?;
        }
        "png" => {
            let buf: image::RgbImage =
                image::ImageBuffer::from_raw(img.cols() as u32, img.rows() as u32, quantized)
                    .expect("buffer length matches dimensions");
            buf.save(path).map_err(|e| Error::ImageFormat(e.to_string()))?;
        }
        other => {
            return Err(Error::ImageFormat(format!(
                "unsupported output extension '{other}' (use .ppm or .png)"
            )))
        }
    }
    Ok(SaveReport {
        clamped_pixels: clamped,
    })
}

fn load_png(bytes: &[u8]) -> Result<ColorImage> {
    let dyn_img =
        image::load_from_memory(bytes).map_err(|e| Error::ImageFormat(e.to_string()))?;
    let sixteen_bit = matches!(
        dyn_img.color(),
        image::ColorType::L16 | image::ColorType::La16 | image::ColorType::Rgb16 | image::ColorType::Rgba16
    );
    let (w, h) = (dyn_img.width() as usize, dyn_img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::ImageFormat("empty image".into()));
    }
    let img = if sixteen_bit {
        let rgb = dyn_img.to_rgb16();
        ColorImage::from_fn(h, w, |i, j| {
            let p = rgb.get_pixel(j as u32, i as u32).0;
            [
                p[0] as f64 / 65535.0,
                p[1] as f64 / 65535.0,
                p[2] as f64 / 65535.0,
            ]
        })
    } else {
        let rgb = dyn_img.to_rgb8();
        ColorImage::from_fn(h, w, |i, j| {
            let p = rgb.get_pixel(j as u32, i as u32).0;
            [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0]
        })
    };
    Ok(img)
}

/// Incremental PPM tokenizer: skips whitespace and `#` comments.
struct PpmScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PpmScanner<'a> {
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn next_uint(&mut self) -> Result<u64> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::ImageFormat("expected integer in PPM header".into()));
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("digits are valid utf-8");
        s.parse::<u64>()
            .map_err(|e| Error::ImageFormat(format!("bad integer in PPM: {e}")))
    }
}

fn parse_ppm(bytes: &[u8]) -> Result<ColorImage> {
    let binary = bytes.starts_with(b"P6");
    let mut sc = PpmScanner { bytes, pos: 2 };
    let width = sc.next_uint()? as usize;
    let height = sc.next_uint()? as usize;
    let maxval = sc.next_uint()?;
    if width == 0 || height == 0 {
        return Err(Error::ImageFormat("empty PPM image".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::ImageFormat(format!("PPM maxval {maxval} out of range")));
    }
    let n_samples = width * height * 3;
    let scale = 1.0 / maxval as f64;
    let mut samples = Vec::with_capacity(n_samples);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        sc.pos += 1;
        let wide = maxval > 255;
        let bytes_per_sample = if wide { 2 } else { 1 };
        let need = n_samples * bytes_per_sample;
        let raster = bytes
            .get(sc.pos..sc.pos + need)
            .ok_or_else(|| Error::ImageFormat("truncated P6 raster".into()))?;
        if wide {
            for ch in raster.chunks_exact(2) {
                // P6 multi-byte samples are big-endian.
                samples.push(u16::from_be_bytes([ch[0], ch[1]]) as f64 * scale);
            }
        } else {
            samples.extend(raster.iter().map(|&b| b as f64 * scale));
        }
    } else {
        for _ in 0..n_samples {
            let v = sc.next_uint()?;
            if v > maxval {
                return Err(Error::ImageFormat(format!(
                    "P3 sample {v} exceeds maxval {maxval}"
                )));
            }
            samples.push(v as f64 * scale);
        }
    }
    Ok(ColorImage::from_fn(height, width, |i, j| {
        let k = (i * width + j) * 3;
        [samples[k], samples[k + 1], samples[k + 2]]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_p3_with_comments_and_maxval() {
        let text = b"P3\n# a comment\n2 1\n# another\n100\n100 0 50  0 25 100\n";
        let img = parse_ppm(text).unwrap();
        assert_eq!((img.rows(), img.cols()), (1, 2));
        assert_eq!(img.get(0, 0), [1.0, 0.0, 0.5]);
        assert_eq!(img.get(0, 1), [0.0, 0.25, 1.0]);
    }

    #[test]
    fn p6_sixteen_bit_roundtrip_values() {
        let mut buf: Vec<u8> = b"P6\n1 1\n65535\n".to_vec();
        buf.extend_from_slice(&65535u16.to_be_bytes());
        buf.extend_from_slice(&0u16.to_be_bytes());
        buf.extend_from_slice(&32768u16.to_be_bytes());
        let img = parse_ppm(&buf).unwrap();
        let px = img.get(0, 0);
        assert_eq!(px[0], 1.0);
        assert_eq!(px[1], 0.0);
        assert!((px[2] - 32768.0 / 65535.0).abs() < 1e-15);
    }

    #[test]
    fn save_load_ppm_and_png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ColorImage::from_fn(3, 4, |i, j| {
            [
                i as f64 / 2.0,
                j as f64 / 3.0,
                ((i + j) % 2) as f64,
            ]
        });
        for name in ["t.ppm", "t.png"] {
            let path = dir.path().join(name);
            let report = save_image(&path, &img).unwrap();
            assert_eq!(report.clamped_pixels, 0);
            let back = load_image(&path).unwrap();
            assert_eq!((back.rows(), back.cols()), (3, 4));
            for (a, b) in img.data().iter().zip(back.data()) {
                for k in 0..3 {
                    // 8-bit quantization error bound.
                    assert!((a[k] - b[k]).abs() <= 0.5 / 255.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn save_reports_clamping() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = ColorImage::filled(2, 2, [0.5, 0.5, 0.5]);
        img.set(0, 0, [1.5, 0.5, 0.5]);
        img.set(1, 1, [-0.1, 0.2, 0.3]);
        let report = save_image(&dir.path().join("c.ppm"), &img).unwrap();
        assert_eq!(report.clamped_pixels, 2);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ppm");
        std::fs::write(&path, b"not an image at all").unwrap();
        assert!(matches!(load_image(&path), Err(Error::ImageFormat(_))));
    }
}
