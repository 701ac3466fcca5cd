//! Binary Netpbm images: P6 (RGB) and P5 (gray), 8-bit.

use std::path::Path;

use crate::error::{contract, Error, Result};
use crate::nn::Tensor;

/// A decoded image with raw 8-bit samples in row-major, channel-interleaved order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pnm {
    pub width: usize,
    pub height: usize,
    /// 3 for P6, 1 for P5.
    pub channels: usize,
    pub samples: Vec<u8>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a str,
}

impl Cursor<'_> {
    fn fail(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.origin.to_string(),
            offset,
            msg: msg.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.fail(start, format!("expected {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse::<usize>()
            .map_err(|_| self.fail(start, format!("{what} out of range")))
    }
}

/// Parses a P5/P6 byte stream. `origin` names the source in error messages.
pub fn decode_pnm(bytes: &[u8], origin: &str) -> Result<Pnm> {
    let mut c = Cursor {
        bytes,
        pos: 0,
        origin,
    };
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(c.fail(0, "missing 'P' magic"));
    }
    let channels = match bytes[1] {
        b'6' => 3,
        b'5' => 1,
        _ => return Err(c.fail(1, format!("unsupported format P{}", bytes[1] as char))),
    };
    c.pos = 2;
    if c.pos < bytes.len() && !bytes[c.pos].is_ascii_whitespace() && bytes[c.pos] != b'#' {
        return Err(c.fail(2, "expected whitespace after magic"));
    }
    c.skip_space_and_comments();
    let wpos = c.pos;
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval_pos = {
        c.skip_space_and_comments();
        c.pos
    };
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(c.fail(wpos, format!("zero image extent {width}x{height}")));
    }
    if maxval != 255 {
        return Err(c.fail(maxval_pos, format!("unsupported maxval {maxval}, only 255")));
    }
    if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
        return Err(c.fail(
            c.pos,
            "expected a single whitespace byte before the payload",
        ));
    }
    c.pos += 1;
    let need = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| c.fail(wpos, "image extent overflows"))?;
    let have = bytes.len() - c.pos;
    if have < need {
        return Err(c.fail(
            bytes.len(),
            format!("truncated payload: {have} of {need} bytes"),
        ));
    }
    if have > need {
        return Err(c.fail(c.pos + need, format!("{} trailing bytes", have - need)));
    }
    Ok(Pnm {
        width,
        height,
        channels,
        samples: bytes[c.pos..].to_vec(),
    })
}

/// Canonical encoding: `P6\n<w> <h>\n255\n` followed by the samples.
pub fn encode_pnm(img: &Pnm) -> Result<Vec<u8>> {
    let magic = match img.channels {
        3 => "P6",
        1 => "P5",
        c => {
            return Err(Error::Contract(format!(
                "PNM needs 1 or 3 channels, got {c}"
            )))
        }
    };
    contract!(
        img.samples.len() == img.width * img.height * img.channels,
        "sample count {} does not match {}x{}x{}",
        img.samples.len(),
        img.width,
        img.height,
        img.channels
    );
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.samples);
    Ok(out)
}

pub fn sample_to_unit(p: u8) -> f32 {
    2.0 * p as f32 / 255.0 - 1.0
}

/// Inverse of [`sample_to_unit`], rounding half away from zero and clamping to `[0, 255]`.
pub fn unit_to_sample(v: f32) -> u8 {
    let p = ((v as f64 + 1.0) * 127.5).round();
    p.clamp(0.0, 255.0) as u8
}

impl Pnm {
    /// `C×H×W` tensor in `[-1, 1]`.
    pub fn to_tensor(&self) -> Tensor {
        let (h, w, c) = (self.height, self.width, self.channels);
        Tensor::from_fn(&[c, h, w], |i| {
            let ch = i / (h * w);
            let pix = i % (h * w);
            sample_to_unit(self.samples[pix * c + ch])
        })
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let s = t.shape();
        contract!(
            s.len() == 3 && (s[0] == 1 || s[0] == 3),
            "image tensor must be 1×H×W or 3×H×W, got {s:?}"
        );
        contract!(t.all_finite(), "image tensor has non-finite values");
        let (c, h, w) = (s[0], s[1], s[2]);
        let mut samples = vec![0u8; c * h * w];
        for (i, v) in t.data().iter().enumerate() {
            let ch = i / (h * w);
            let pix = i % (h * w);
            samples[pix * c + ch] = unit_to_sample(*v);
        }
        Ok(Pnm {
            width: w,
            height: h,
            channels: c,
            samples,
        })
    }
}

pub fn read_pnm(path: &Path) -> Result<Pnm> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes, &path.display().to_string())
}

pub fn write_pnm(path: &Path, img: &Pnm) -> Result<()> {
    let bytes = encode_pnm(img)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a P5/P6 file as a `C×H×W` tensor in `[-1, 1]`.
pub fn read_image(path: &Path) -> Result<Tensor> {
    Ok(read_pnm(path)?.to_tensor())
}

/// Writes a `1×H×W` (P5) or `3×H×W` (P6) tensor.
pub fn write_image(path: &Path, pixels: &Tensor) -> Result<()> {
    write_pnm(path, &Pnm::from_tensor(pixels)?)
}
