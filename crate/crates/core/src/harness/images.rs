//! Grayscale images (PGM or plain CSV) as histograms over their pixel grid.

use std::path::Path;

use image::ImageReader;

use crate::error::{Error, Result};
use crate::measures::{cost_matrix_pixels, CostMatrix, Histogram};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major intensities.
    pub pixels: Vec<f64>,
}

impl GrayImage {
    /// Pixel intensities normalized to unit mass.
    pub fn histogram(&self) -> Result<Histogram> {
        Histogram::from_mass(self.pixels.clone())
            .map_err(|e| Error::InvalidInput(format!("image {}x{}: {e}", self.width, self.height)))
    }
}

/// Decode a binary (P5) or ASCII (P2) PGM.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let img = ImageReader::with_format(std::io::Cursor::new(bytes), image::ImageFormat::Pnm)
        .decode()
        .map_err(|e| Error::InvalidInput(format!("PGM decode: {e}")))?;
    let luma = img.into_luma16();
    let (w, h) = luma.dimensions();
    Ok(GrayImage {
        width: w as usize,
        height: h as usize,
        pixels: luma.into_raw().into_iter().map(f64::from).collect(),
    })
}

/// One image row per line, values separated by commas and/or whitespace.
pub fn parse_csv_image(text: &str) -> Result<GrayImage> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("line {}: cannot parse {s:?}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::InvalidInput(format!(
                    "line {} has {} values, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let width = rows.first().map_or(0, Vec::len);
    if width == 0 {
        return Err(Error::InvalidInput("empty image".into()));
    }
    let pixels: Vec<f64> = rows.concat();
    if pixels.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput("pixel intensities must be finite and nonnegative".into()));
    }
    Ok(GrayImage {
        width,
        height: rows.len(),
        pixels,
    })
}

/// Reads PGM when the file starts with a `P2`/`P5` magic number, CSV otherwise.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path)?;
    let parsed = if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        parse_pgm(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::InvalidInput("CSV image is not valid UTF-8".into()))?;
        parse_csv_image(&text)
    };
    parsed.map_err(|e| match e {
        Error::InvalidInput(msg) => Error::InvalidInput(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Histograms of same-sized images and the squared-Euclidean pixel cost.
pub fn image_family(images: &[GrayImage]) -> Result<(Vec<Histogram>, CostMatrix)> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidInput("no images given".into()))?;
    if let Some(bad) = images
        .iter()
        .find(|im| (im.width, im.height) != (first.width, first.height))
    {
        return Err(Error::InvalidInput(format!(
            "image sizes differ: {}x{} vs {}x{}",
            first.width, first.height, bad.width, bad.height
        )));
    }
    let hists = images.iter().map(GrayImage::histogram).collect::<Result<Vec<_>>>()?;
    Ok((hists, cost_matrix_pixels(first.width, first.height)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_and_binary_pgm_agree() {
        let ascii = b"P2\n# a comment\n3 2\n255\n0 10 20\n30 40 50\n";
        let mut binary = b"P5\n3 2\n255\n".to_vec();
        binary.extend_from_slice(&[0, 10, 20, 30, 40, 50]);
        let a = parse_pgm(ascii).unwrap();
        let b = parse_pgm(&binary).unwrap();
        assert_eq!((a.width, a.height), (3, 2));
        assert_eq!(a.pixels.len(), 6);
        let (ha, hb) = (a.histogram().unwrap(), b.histogram().unwrap());
        for (x, y) in ha.weights().iter().zip(hb.weights()) {
            assert!((x - y).abs() <= 1e-15);
        }
        assert!((ha.weights()[5] - 50.0 / 150.0).abs() <= 1e-12);
    }

    #[test]
    fn csv_image_and_pixel_cost() {
        let im = parse_csv_image("0,1\n2,1\n").unwrap();
        assert_eq!((im.width, im.height), (2, 2));
        let (h, c) = image_family(&[im.clone(), im]).unwrap();
        assert_eq!(h[0].weights(), &[0.0, 0.25, 0.5, 0.25]);
        assert_eq!(c.get(0, 3), 2.0);
        assert_eq!(c.get(1, 2), 2.0);
        assert_eq!(c.get(0, 1), 1.0);
    }

    #[test]
    fn malformed_images_are_rejected() {
        assert!(parse_csv_image("1,2\n3\n").is_err());
        assert!(parse_csv_image("-1,2\n").is_err());
        assert!(parse_csv_image("\n").is_err());
        assert!(parse_csv_image("0,0\n0,0\n").unwrap().histogram().is_err());
        assert!(parse_pgm(b"P5\n3 2\n255\n\x00").is_err());
        let a = parse_csv_image("1,2\n").unwrap();
        let b = parse_csv_image("1\n2\n").unwrap();
        assert!(image_family(&[a, b]).is_err());
    }
}
