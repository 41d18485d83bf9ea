//! Binary portable-pixmap I/O: 3-channel images as P6, single-channel as
//! P5, both with a maximum sample value of 255.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit raster, row-major with interleaved channels (1 or 3).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, fill: u8) -> Self {
        assert!(channels == 1 || channels == 3, "1 or 3 channels only");
        Image {
            width,
            height,
            channels,
            data: vec![fill; width * height * channels],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Set all channels of one pixel.
    pub fn put(&mut self, x: usize, y: usize, px: &[u8]) {
        debug_assert_eq!(px.len(), self.channels);
        let base = (y * self.width + x) * self.channels;
        self.data[base..base + self.channels].copy_from_slice(px);
    }

    /// Rec. 601 luminance, rounded to the nearest integer.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let mut out = Image::new(self.width, self.height, 1, 0);
        for i in 0..self.width * self.height {
            let r = self.data[i * 3] as f64;
            let g = self.data[i * 3 + 1] as f64;
            let b = self.data[i * 3 + 2] as f64;
            out.data[i] = (0.299 * r + 0.587 * g + 0.114 * b).round() as u8;
        }
        out
    }

    pub fn read_pnm(path: &Path) -> Result<Image> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode_pnm(&bytes)
            .map_err(|msg| Error::Parse(format!("{}: {msg}", path.display())))
    }

    pub fn decode_pnm(bytes: &[u8]) -> std::result::Result<Image, String> {
        let mut pos = 0usize;
        let magic = next_token(bytes, &mut pos).ok_or("missing magic number")?;
        let channels = match magic.as_str() {
            "P6" => 3,
            "P5" => 1,
            other => return Err(format!("unsupported format {other:?} (want P5 or P6)")),
        };
        let width: usize = parse_header_int(bytes, &mut pos, "width")?;
        let height: usize = parse_header_int(bytes, &mut pos, "height")?;
        let maxval: usize = parse_header_int(bytes, &mut pos, "maximum value")?;
        if width == 0 || height == 0 {
            return Err(format!("degenerate dimensions {width}x{height}"));
        }
        if maxval != 255 {
            return Err(format!("unsupported maximum value {maxval} (want 255)"));
        }
        // Exactly one whitespace byte separates the header from the pixels.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err("header not terminated by whitespace".into());
        }
        pos += 1;
        let need = width * height * channels;
        let rest = &bytes[pos..];
        if rest.len() < need {
            return Err(format!(
                "pixel payload truncated: need {need} bytes, have {}",
                rest.len()
            ));
        }
        Ok(Image {
            width,
            height,
            channels,
            data: rest[..need].to_vec(),
        })
    }

    pub fn write_pnm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.encode_pnm()).map_err(|e| Error::io(path, e))
    }

    pub fn encode_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }
}

/// Next whitespace-separated header token, skipping `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
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
    if *pos > start {
        Some(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    } else {
        None
    }
}

fn parse_header_int(
    bytes: &[u8],
    pos: &mut usize,
    what: &str,
) -> std::result::Result<usize, String> {
    let tok = next_token(bytes, pos).ok_or_else(|| format!("missing {what}"))?;
    tok.parse()
        .map_err(|_| format!("bad {what} {tok:?} in header"))
}
