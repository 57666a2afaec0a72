//! Binary 8-bit PGM (`P5`) reading and writing.
//!
//! The writer emits one comment line carrying the pixel calibration
//! (`# um_per_px <value>`); the reader restores it when present.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Frame;

const CALIBRATION_TAG: &str = "um_per_px";

pub fn write_pgm<W: Write>(mut w: W, frame: &Frame) -> io::Result<()> {
    write!(
        w,
        "P5\n# {CALIBRATION_TAG} {}\n{} {}\n255\n",
        frame.um_per_px(),
        frame.width(),
        frame.height()
    )?;
    w.write_all(&frame.to_u8())?;
    w.flush()
}

pub fn save_pgm(path: &Path, frame: &Frame) -> io::Result<()> {
    write_pgm(BufWriter::new(File::create(path)?), frame)
}

pub fn load_pgm(path: &Path) -> io::Result<Frame> {
    read_pgm(BufReader::new(File::open(path)?))
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

struct HeaderReader<R> {
    inner: R,
    um_per_px: Option<f64>,
}

impl<R: Read> HeaderReader<R> {
    fn byte(&mut self) -> io::Result<u8> {
        let mut b = [0u8; 1];
        self.inner.read_exact(&mut b)?;
        Ok(b[0])
    }

    fn comment(&mut self) -> io::Result<()> {
        let mut line = Vec::new();
        loop {
            match self.byte()? {
                b'\n' | b'\r' => break,
                b => line.push(b),
            }
        }
        let text = String::from_utf8_lossy(&line);
        let mut parts = text.split_whitespace();
        if parts.next() == Some(CALIBRATION_TAG) {
            self.um_per_px = parts.next().and_then(|v| v.parse().ok());
        }
        Ok(())
    }

    /// Next whitespace-delimited header token; consumes exactly one trailing whitespace byte.
    fn token(&mut self) -> io::Result<String> {
        let mut tok = String::new();
        loop {
            let b = self.byte()?;
            match b {
                b'#' if tok.is_empty() => self.comment()?,
                b if b.is_ascii_whitespace() => {
                    if !tok.is_empty() {
                        return Ok(tok);
                    }
                }
                b => tok.push(b as char),
            }
        }
    }

    fn number(&mut self, what: &str) -> io::Result<usize> {
        let t = self.token()?;
        t.parse().map_err(|_| invalid(format!("bad {what} `{t}`")))
    }
}

pub fn read_pgm<R: Read>(r: R) -> io::Result<Frame> {
    let mut h = HeaderReader {
        inner: r,
        um_per_px: None,
    };
    let magic = h.token()?;
    if magic != "P5" {
        return Err(invalid(format!("not a binary PGM (magic `{magic}`)")));
    }
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(invalid("empty image"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(invalid(format!("unsupported maxval {maxval}")));
    }
    let mut data = vec![0u8; width * height];
    h.inner.read_exact(&mut data)?;
    let scale = 255.0 / maxval as f64;
    let pixels = data.iter().map(|&b| b as f64 * scale).collect();
    Frame::new(width, height, pixels, h.um_per_px.unwrap_or(1.0)).map_err(|e| invalid(e.to_string()))
}
