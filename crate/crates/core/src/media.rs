//! Grayscale frame sequences: binary PGM I/O, stacking frames into the columns
//! of a data matrix, and background/foreground separation with a low-rank
//! (rank 1 by default) decomposition.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Dims, Error, Result};
use crate::io::{to_mat1, with_path};
use crate::matrix::DenseMatrix;
use crate::solver::{solve, DecompositionResult, SolverConfig};
use crate::synth::SupportMask;

/// Threshold on `|S|`, in gray levels, used to call a pixel foreground.
pub const DEFAULT_FOREGROUND_THRESHOLD: f64 = 10.0;

/// File name of the optional raw sparse-component dump.
pub const SPARSE_DUMP_NAME: &str = "sparse.mat1";

fn is_pgm_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if is_pgm_space(b) {
                self.pos += 1;
            } else if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    /// Returns the value and its byte offset.
    fn number(&mut self, what: &str) -> Result<(usize, usize)> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start as u64, format!("expected PGM {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map(|v| (v, start))
            .map_err(|_| Error::format(start as u64, format!("PGM {what} out of range")))
    }
}

/// Decodes a binary (P5) PGM with `maxval <= 255`. Pixel values are returned
/// as-is, without rescaling by `maxval`.
pub fn read_pgm(bytes: &[u8]) -> Result<DenseMatrix> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::format(0, "not a binary PGM (expected magic P5)"));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if !bytes.get(2).is_some_and(|&b| is_pgm_space(b) || b == b'#') {
        return Err(Error::format(2, "expected whitespace after PGM magic"));
    }
    let (width, _) = cur.number("width")?;
    let (height, _) = cur.number("height")?;
    let (maxval, maxval_at) = cur.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(maxval_at as u64, format!("PGM maxval {maxval} not in 1..=255")));
    }
    if !bytes.get(cur.pos).is_some_and(|&b| is_pgm_space(b)) {
        return Err(Error::format(cur.pos as u64, "expected single whitespace before PGM raster"));
    }
    let start = cur.pos + 1;
    let dims = Dims::new(height, width).map_err(|_| Error::format(3, "PGM has zero width or height"))?;
    let count = height
        .checked_mul(width)
        .ok_or_else(|| Error::format(3, "PGM dimensions overflow"))?;
    let raster = &bytes[start.min(bytes.len())..];
    if raster.len() < count {
        return Err(Error::format(
            bytes.len() as u64,
            format!("PGM raster truncated: {} of {count} bytes", raster.len()),
        ));
    }
    if let Some(i) = raster[..count].iter().position(|&b| b as usize > maxval) {
        return Err(Error::format((start + i) as u64, format!("pixel exceeds maxval {maxval}")));
    }
    let data = raster[..count].iter().map(|&b| f64::from(b)).collect();
    DenseMatrix::from_vec(dims.rows, dims.cols, data)
}

/// Encodes as P5 with maxval 255, clamping to `[0, 255]` and rounding half
/// away from zero.
pub fn write_pgm(m: &DenseMatrix) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", m.cols(), m.rows()).into_bytes();
    out.extend(m.as_slice().iter().map(|v| v.clamp(0.0, 255.0).round() as u8));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    height: usize,
    width: usize,
    frames: Vec<DenseMatrix>,
}

impl FrameStack {
    /// Fails on an empty list or frames of differing size.
    pub fn new(frames: Vec<DenseMatrix>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Parameter("a frame stack needs at least one frame".into()))?
            .dims();
        if let Some(bad) = frames.iter().find(|f| f.dims() != first) {
            return Err(Error::shape("frame stack", first, bad.dims()));
        }
        Ok(Self {
            height: first.rows,
            width: first.cols,
            frames,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[DenseMatrix] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<DenseMatrix> {
        self.frames
    }
}

/// `(height * width) x frames` matrix; column `f` is frame `f` in row-major scan
/// order.
pub fn stack_frames(stack: &FrameStack) -> DenseMatrix {
    let (pixels, count) = (stack.height * stack.width, stack.frames.len());
    let mut data = vec![0.0; pixels * count];
    for (f, frame) in stack.frames.iter().enumerate() {
        for (k, &v) in frame.as_slice().iter().enumerate() {
            data[k * count + f] = v;
        }
    }
    DenseMatrix::raw(pixels, count, data)
}

/// Inverse of [`stack_frames`].
pub fn unstack(y: &DenseMatrix, height: usize, width: usize) -> Result<FrameStack> {
    let frame_dims = Dims::new(height, width)?;
    if y.rows() != frame_dims.len() {
        return Err(Error::shape(
            "unstack",
            y.dims(),
            Dims {
                rows: frame_dims.len(),
                cols: y.cols(),
            },
        ));
    }
    let frames = (0..y.cols())
        .map(|f| DenseMatrix::raw(height, width, y.col(f)))
        .collect();
    FrameStack::new(frames)
}

#[derive(Debug, Clone)]
pub struct StackDecomposition {
    /// Columns of `U V`, unclamped.
    pub background: FrameStack,
    /// `|S|` mapped onto `[0, 255]` for display.
    pub foreground: FrameStack,
    pub result: DecompositionResult,
}

impl StackDecomposition {
    /// Pixels with `|S| > threshold`, in stacked layout.
    pub fn foreground_mask(&self, threshold: f64) -> SupportMask {
        SupportMask::from_threshold(&self.result.sparse, threshold)
    }
}

/// Decomposes the stacked frames. The caller picks the rank; the usual choice
/// for a fixed camera is 1.
///
/// Foreground frames are `|S|` scaled by `255 / max(max |S|, 1)`, so a scene
/// with no motion stays black rather than having its rounding noise stretched.
pub fn decompose_stack(stack: &FrameStack, config: &SolverConfig) -> Result<StackDecomposition> {
    let y = stack_frames(stack);
    let result = solve(&y, config)?;
    let background = unstack(&result.low_rank()?, stack.height, stack.width)?;
    let gain = 255.0 / result.sparse.max_abs().max(1.0);
    let display = result.sparse.map("foreground display", |v| (v.abs() * gain).min(255.0))?;
    let foreground = unstack(&display, stack.height, stack.width)?;
    Ok(StackDecomposition {
        background,
        foreground,
        result,
    })
}

/// `.pgm` files of `dir` (case-insensitive extension), sorted by file name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(with_path(dir))? {
        let path = entry?.path();
        let is_pgm = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        if is_pgm && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

/// Frame names (file stems) and the decoded stack.
pub fn read_frame_dir(dir: &Path) -> Result<(Vec<String>, FrameStack)> {
    let paths = list_frames(dir)?;
    if paths.is_empty() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no .pgm files in {}", dir.display()),
        )));
    }
    let mut names = Vec::with_capacity(paths.len());
    let mut frames = Vec::with_capacity(paths.len());
    for path in &paths {
        let frame = read_pgm(&fs::read(path).map_err(with_path(path))?).map_err(|e| match e {
            Error::Format { offset, msg } => Error::Format {
                offset,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })?;
        names.push(path.file_stem().unwrap_or_default().to_string_lossy().into_owned());
        frames.push(frame);
    }
    let stack = FrameStack::new(frames).map_err(|e| match e {
        Error::Shape { left, right, .. } => Error::format(
            0,
            format!("frames in {} differ in size ({left} vs {right})", dir.display()),
        ),
        other => other,
    })?;
    Ok((names, stack))
}

/// Writes `bg_<name>.pgm` and `fg_<name>.pgm` per frame, plus the raw sparse
/// component as MAT1 when `dump_sparse` is set.
pub fn write_stack_outputs(
    out_dir: &Path,
    names: &[String],
    decomposition: &StackDecomposition,
    dump_sparse: bool,
) -> Result<()> {
    if names.len() != decomposition.background.len() {
        return Err(Error::Parameter(format!(
            "{} names for {} frames",
            names.len(),
            decomposition.background.len()
        )));
    }
    fs::create_dir_all(out_dir)?;
    let pairs = decomposition.background.frames().iter().zip(decomposition.foreground.frames());
    for (name, (bg, fg)) in names.iter().zip(pairs) {
        fs::write(out_dir.join(format!("bg_{name}.pgm")), write_pgm(bg))?;
        fs::write(out_dir.join(format!("fg_{name}.pgm")), write_pgm(fg))?;
    }
    if dump_sparse {
        fs::write(out_dir.join(SPARSE_DUMP_NAME), to_mat1(&decomposition.result.sparse))?;
    }
    Ok(())
}

/// Synthetic test video with known ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    pub stack: FrameStack,
    pub background: DenseMatrix,
    /// Block pixels, in stacked layout.
    pub support: SupportMask,
}

/// Smooth static background in `[40, 190]` with a bright (250) square block
/// moving one pixel down and right per frame, wrapping horizontally and
/// stopping at the bottom edge.
pub fn moving_block_video(frames: usize, height: usize, width: usize, block: usize) -> Result<SyntheticVideo> {
    if frames == 0 || block == 0 || block >= height || block >= width {
        return Err(Error::Parameter(format!(
            "cannot place a {block}px block in {frames} frames of {height}x{width}"
        )));
    }
    let background = DenseMatrix::from_fn(height, width, |i, j| {
        40.0 + 150.0 * (0.5 + 0.5 * (j as f64 / 5.0).sin() * (i as f64 / 7.0).cos())
    })?;
    let (pixels, mut bits) = (height * width, vec![false; height * width * frames]);
    let mut list = Vec::with_capacity(frames);
    for f in 0..frames {
        let r0 = (2 + f).min(height - block);
        let c0 = (3 + f) % (width - block);
        let frame = DenseMatrix::from_fn(height, width, |i, j| {
            let inside = (r0..r0 + block).contains(&i) && (c0..c0 + block).contains(&j);
            if inside {
                bits[(i * width + j) * frames + f] = true;
                250.0
            } else {
                background.get(i, j)
            }
        })?;
        list.push(frame);
    }
    Ok(SyntheticVideo {
        stack: FrameStack::new(list)?,
        background,
        support: SupportMask::new(Dims::new(pixels, frames)?, bits)?,
    })
}
