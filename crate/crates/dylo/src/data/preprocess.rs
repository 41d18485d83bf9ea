//! Geometry-preserving resize onto the square network input, pixel-to-
//! tensor conversion, and the matching box coordinate remaps.

use crate::boxes::DetBox;
use crate::data::annotation::Annotation;
use crate::data::raster::Image;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Neutral gray written into the letterbox margins of u8 images.
pub const PAD_FILL: u8 = 128;

/// How a source image maps into the square input: uniform scale, then
/// centered padding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Letterbox {
    pub src_w: usize,
    pub src_h: usize,
    pub out: usize,
    pub scale: f64,
    pub content_w: usize,
    pub content_h: usize,
    pub pad_x: usize,
    pub pad_y: usize,
}

pub fn letterbox_params(src_w: usize, src_h: usize, out: usize) -> Result<Letterbox> {
    if src_w == 0 || src_h == 0 || out == 0 {
        return Err(Error::Data(format!(
            "cannot letterbox {src_w}x{src_h} into {out}"
        )));
    }
    let scale = (out as f64 / src_w as f64).min(out as f64 / src_h as f64);
    let content_w = ((src_w as f64 * scale).round() as usize).clamp(1, out);
    let content_h = ((src_h as f64 * scale).round() as usize).clamp(1, out);
    Ok(Letterbox {
        src_w,
        src_h,
        out,
        scale,
        content_w,
        content_h,
        pad_x: (out - content_w) / 2,
        pad_y: (out - content_h) / 2,
    })
}

/// Nearest-neighbor letterbox of a u8 image, margins filled with neutral
/// gray.
pub fn letterbox_image(img: &Image, out: usize) -> Result<(Image, Letterbox)> {
    let lb = letterbox_params(img.width, img.height, out)?;
    let mut dst = Image::new(out, out, img.channels, PAD_FILL);
    for oy in 0..lb.content_h {
        let sy = (((oy as f64 + 0.5) / lb.scale).floor() as usize).min(img.height - 1);
        for ox in 0..lb.content_w {
            let sx = (((ox as f64 + 0.5) / lb.scale).floor() as usize).min(img.width - 1);
            for c in 0..img.channels {
                dst.set(ox + lb.pad_x, oy + lb.pad_y, c, img.get(sx, sy, c));
            }
        }
    }
    Ok((dst, lb))
}

/// Letterbox straight into a `[1, channels, out, out]` tensor scaled to
/// [0, 1]; margin cells hold exactly 0.5. A 3-channel image feeding a
/// single-channel network passes through the luminance transform first.
pub fn image_to_tensor<T: Scalar>(
    img: &Image,
    out: usize,
    channels: usize,
) -> Result<(Tensor<T>, Letterbox)> {
    let src = if channels == 1 && img.channels == 3 {
        img.to_gray()
    } else if channels == img.channels {
        img.clone()
    } else {
        return Err(Error::Data(format!(
            "cannot feed a {}-channel image to a {channels}-channel network",
            img.channels
        )));
    };
    let lb = letterbox_params(src.width, src.height, out)?;
    let half = T::from_f64(0.5);
    let mut data = vec![half; channels * out * out];
    let inv = T::from_f64(1.0 / 255.0);
    for oy in 0..lb.content_h {
        let sy = (((oy as f64 + 0.5) / lb.scale).floor() as usize).min(src.height - 1);
        for ox in 0..lb.content_w {
            let sx = (((ox as f64 + 0.5) / lb.scale).floor() as usize).min(src.width - 1);
            for c in 0..channels {
                let v = T::from_f64(src.get(sx, sy, c) as f64) * inv;
                data[(c * out + oy + lb.pad_y) * out + ox + lb.pad_x] = v;
            }
        }
    }
    Ok((Tensor::new(data, &[1, channels, out, out])?, lb))
}

/// Normalized source-image annotation -> pixel box in the letterboxed
/// square.
pub fn remap_annotation(a: &Annotation, lb: &Letterbox) -> DetBox {
    DetBox::new(
        a.cx * lb.src_w as f64 * lb.scale + lb.pad_x as f64,
        a.cy * lb.src_h as f64 * lb.scale + lb.pad_y as f64,
        a.w * lb.src_w as f64 * lb.scale,
        a.h * lb.src_h as f64 * lb.scale,
        1.0,
        a.class_id,
    )
}

/// Detection in the letterboxed square -> source-image pixels.
pub fn unmap_detection(d: &DetBox, lb: &Letterbox) -> DetBox {
    DetBox::new(
        (d.cx - lb.pad_x as f64) / lb.scale,
        (d.cy - lb.pad_y as f64) / lb.scale,
        d.w / lb.scale,
        d.h / lb.scale,
        d.score,
        d.class_id,
    )
}
