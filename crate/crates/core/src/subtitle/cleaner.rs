use std::process::Command;

use thiserror::Error;

use crate::signal::{decode_raw_planar, encode_raw_planar, FrameStream, SignalError};

#[derive(Debug, Error)]
pub enum CleanerError {
    #[error("cleaner command failed: {0}")]
    Command(String),
    #[error("cleaner output has shape {got:?}, expected {want:?}")]
    Shape {
        got: (usize, usize, usize),
        want: (usize, usize, usize),
    },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Subtitle background remover.
///
/// `ExternalCommand` is invoked as `program args... <input.raw> <output.raw>`
/// with both files in raw planar layout; it must write a stream of the same
/// shape with the background set to black.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum Cleaner {
    #[default]
    Passthrough,
    ExternalCommand { program: String, args: Vec<String> },
}

impl Cleaner {
    pub fn from_command_line(line: &str) -> Option<Self> {
        let mut parts = line.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(Cleaner::ExternalCommand {
            program,
            args: parts.collect(),
        })
    }

    pub fn clean(&self, stream: &FrameStream) -> Result<FrameStream, CleanerError> {
        let (program, args) = match self {
            Cleaner::Passthrough => return Ok(stream.clone()),
            Cleaner::ExternalCommand { program, args } => (program, args),
        };
        let dir = tempfile::tempdir()?;
        let input = dir.path().join("input.raw");
        let output = dir.path().join("output.raw");
        std::fs::write(&input, encode_raw_planar(stream.width, stream.height, &stream.frames))?;
        let status = Command::new(program)
            .args(args)
            .arg(&input)
            .arg(&output)
            .status()
            .map_err(|e| CleanerError::Command(format!("{program}: {e}")))?;
        if !status.success() {
            return Err(CleanerError::Command(format!("{program} exited with {status}")));
        }
        let (w, h, frames) = decode_raw_planar(&std::fs::read(&output)?)?;
        let want = (stream.width, stream.height, stream.frames.len());
        if (w, h, frames.len()) != want {
            return Err(CleanerError::Shape {
                got: (w, h, frames.len()),
                want,
            });
        }
        Ok(FrameStream::new(stream.episode_id.clone(), stream.fps, w, h, frames)?)
    }
}
