//! 8-bit RGB frames and the binary portable pixmap (P6) format.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::ImageError;

/// Row-major RGB, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl FrameImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Format(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(ImageError::Format(format!(
                "pixel buffer has {} bytes, expected {expected}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let pixels = rgb.repeat(width as usize * height as usize);
        Self::new(width, height, pixels).expect("dimensions match buffer")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.pixels[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn decode_ppm(data: &[u8]) -> Result<Self, ImageError> {
        let mut r = HeaderReader { data, pos: 0 };
        if r.token()? != b"P6" {
            return Err(ImageError::Format("missing P6 magic".into()));
        }
        let width = r.number("width")?;
        let height = r.number("height")?;
        let maxval = r.number("maxval")?;
        if maxval != 255 {
            return Err(ImageError::Format(format!(
                "only maxval 255 is supported, got {maxval}"
            )));
        }
        // Exactly one whitespace byte separates the header from the raster.
        match data.get(r.pos) {
            Some(c) if c.is_ascii_whitespace() => r.pos += 1,
            _ => return Err(ImageError::Format("truncated header".into())),
        }
        let len = width as usize * height as usize * 3;
        let raster = data
            .get(r.pos..r.pos + len)
            .ok_or_else(|| ImageError::Format(format!("raster truncated, need {len} bytes")))?;
        Self::new(width, height, raster.to_vec())
    }

    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() + 20);
        write!(out, "P6\n{} {}\n255\n", self.width, self.height).expect("Vec write");
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn read_ppm(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        Self::decode_ppm(&fs::read(path)?)
    }

    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        fs::write(path, self.encode_ppm())?;
        Ok(())
    }
}

struct HeaderReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&c) = self.data.get(self.pos) {
            if c == b'#' {
                while self.data.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8], ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self
            .data
            .get(self.pos)
            .is_some_and(|c| !c.is_ascii_whitespace() && *c != b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::Format("truncated header".into()));
        }
        Ok(&self.data[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&n: &u32| n > 0)
            .ok_or_else(|| ImageError::Format(format!("bad {what} in header")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip() {
        let mut img = FrameImage::filled(3, 2, [1, 2, 3]);
        img.set_pixel(2, 1, [255, 0, 128]);
        let bytes = img.encode_ppm();
        assert!(bytes.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(FrameImage::decode_ppm(&bytes).unwrap(), img);
    }

    #[test]
    fn header_with_comments() {
        let mut data = b"P6 # made by hand\n# another\n2 1\n255\n".to_vec();
        data.extend_from_slice(&[9, 8, 7, 6, 5, 4]);
        let img = FrameImage::decode_ppm(&data).unwrap();
        assert_eq!(img.pixel(1, 0), [6, 5, 4]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(FrameImage::decode_ppm(b"P3\n1 1\n255\n000").is_err());
        assert!(FrameImage::decode_ppm(b"P6\n1 1\n65535\n000000").is_err());
        assert!(FrameImage::decode_ppm(b"P6\n2 2\n255\n000").is_err());
        assert!(FrameImage::decode_ppm(b"P6\n0 2\n255\n").is_err());
        assert!(FrameImage::decode_ppm(b"").is_err());
        assert!(FrameImage::new(2, 2, vec![0; 5]).is_err());
    }
}
