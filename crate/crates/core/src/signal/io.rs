use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{FrameStream, Plane, ScoreStream, SignalError};

/// BT.601 luma of an 8-bit RGB pixel, scaled to `[0, 1]`.
pub fn rgb_to_intensity(r: u8, g: u8, b: u8) -> f32 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    (y / 255.0).clamp(0.0, 1.0) as f32
}

/// Parses a score file: `fps=<float>` followed by one score per line.
pub fn read_score_stream(path: &Path, episode_id: &str) -> Result<ScoreStream, SignalError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| SignalError::Format {
        what: "score file",
        detail: "missing fps header".into(),
    })?;
    let fps = header
        .trim()
        .strip_prefix("fps=")
        .and_then(|v| v.trim().parse::<f64>().ok())
        .ok_or_else(|| SignalError::Format {
            what: "score file",
            detail: format!("bad header {header:?}"),
        })?;
    let scores = lines
        .enumerate()
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|e| SignalError::Format {
                what: "score file",
                detail: format!("line {}: {e}", i + 2),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    ScoreStream::new(episode_id, fps, scores)
}

pub fn write_score_stream(path: &Path, stream: &ScoreStream) -> Result<(), SignalError> {
    let mut out = format!("fps={}\n", stream.fps);
    for s in &stream.scores {
        out.push_str(&format!("{s}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Raw planar layout: ASCII header `W H N\n`, then `W*H*N` bytes, frames in
/// order, each frame row-major. Intensity is `byte / 255`.
pub fn encode_raw_planar(width: usize, height: usize, frames: &[Plane]) -> Vec<u8> {
    let mut out = format!("{width} {height} {}\n", frames.len()).into_bytes();
    out.reserve(width * height * frames.len());
    for f in frames {
        out.extend(f.to_bytes());
    }
    out
}

pub fn decode_raw_planar(bytes: &[u8]) -> Result<(usize, usize, Vec<Plane>), SignalError> {
    let bad = |detail: String| SignalError::Format {
        what: "raw planar",
        detail,
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|e| bad(e.to_string()))?;
    let dims = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| bad(format!("header {header:?}: {e}")))?;
    let [w, h, n] = dims[..] else {
        return Err(bad(format!("header {header:?} needs W H N")));
    };
    let body = &bytes[nl + 1..];
    let frame_len = w * h;
    if body.len() != frame_len * n {
        return Err(bad(format!(
            "expected {} payload bytes, found {}",
            frame_len * n,
            body.len()
        )));
    }
    let frames = if frame_len == 0 {
        vec![Plane::new(w, h, Vec::new()); n]
    } else {
        body.chunks_exact(frame_len)
            .map(|c| Plane::from_bytes(w, h, c))
            .collect()
    };
    Ok((w, h, frames))
}

pub fn read_raw_planar(path: &Path, episode_id: &str, fps: f64) -> Result<FrameStream, SignalError> {
    let (w, h, frames) = decode_raw_planar(&fs::read(path)?)?;
    FrameStream::new(episode_id, fps, w, h, frames)
}

pub fn write_raw_planar(path: &Path, stream: &FrameStream) -> Result<(), SignalError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_raw_planar(stream.width, stream.height, &stream.frames))?;
    Ok(())
}

fn frame_number(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

/// Reads numbered image files (`frame_0001.png`, `12.jpg`, ...) in numeric
/// order. Grayscale images map `byte / 255`; colour images go through
/// [`rgb_to_intensity`].
pub fn read_frame_dir(dir: &Path, episode_id: &str, fps: f64) -> Result<FrameStream, SignalError> {
    let mut files: Vec<(u64, PathBuf)> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter_map(|p| frame_number(&p).map(|n| (n, p)))
        .collect();
    files.sort();
    let mut frames = Vec::with_capacity(files.len());
    let (mut width, mut height) = (0, 0);
    for (i, (_, path)) in files.iter().enumerate() {
        let img = image::open(path)?;
        let plane = if img.color().has_color() {
            let rgb = img.to_rgb8();
            let data = rgb
                .pixels()
                .map(|p| rgb_to_intensity(p[0], p[1], p[2]))
                .collect();
            Plane::new(rgb.width() as usize, rgb.height() as usize, data)
        } else {
            let g = img.to_luma8();
            Plane::from_bytes(g.width() as usize, g.height() as usize, g.as_raw())
        };
        if i == 0 {
            width = plane.width;
            height = plane.height;
        }
        frames.push(plane);
    }
    FrameStream::new(episode_id, fps, width, height, frames)
}
