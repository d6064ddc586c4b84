//! Frame sequences with events: loading, saving and validation.
//!
//! A frame directory holds zero-padded numbered images (`000000.png`, ...)
//! and either `timestamps.txt` (one microsecond timestamp per line) or
//! `triggers.csv` (header `t_us,p`; `p = 1` opens an exposure and `p = 0`
//! or `-1` closes it; the frame is stamped at the exposure midpoint).

use std::borrow::Cow;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use ndarray::Array3;

use crate::error::{Error, IoContext, Result};
use crate::events::io::read_events;
use crate::events::{EventStream, Frame};

pub const TIMESTAMPS_FILE: &str = "timestamps.txt";
pub const TRIGGERS_FILE: &str = "triggers.csv";
const IMAGE_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "tif", "tiff"];

/// Frames, events, and an optional measured offset of the event sensor.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub frames: Vec<Frame>,
    pub events: EventStream,
    /// Offset `(dx, dy)` of the events relative to the frames, as returned
    /// by alignment; undone by [`Dataset::aligned_events`].
    pub alignment: Option<(i32, i32)>,
}

impl Dataset {
    pub fn new(frames: Vec<Frame>, events: EventStream) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::invalid("dataset has no frames"))?;
        for (i, pair) in frames.windows(2).enumerate() {
            if !pair[0].same_geometry(&pair[1]) {
                return Err(Error::shape(format!("frame {} differs in geometry from frame {i}", i + 1)));
            }
            if pair[1].t() <= pair[0].t() {
                return Err(Error::invalid(format!(
                    "frame timestamps not increasing at frame {} ({} after {})",
                    i + 1,
                    pair[1].t(),
                    pair[0].t()
                )));
            }
        }
        if events.dims() != first.dims() {
            return Err(Error::shape(format!("events {:?} vs frames {:?}", events.dims(), first.dims())));
        }
        Ok(Self { frames, events, alignment: None })
    }

    pub fn with_alignment(mut self, shift: (i32, i32)) -> Self {
        self.alignment = Some(shift);
        self
    }

    /// Events with the alignment offset removed.
    pub fn aligned_events(&self) -> Cow<'_, EventStream> {
        match self.alignment {
            None | Some((0, 0)) => Cow::Borrowed(&self.events),
            Some((dx, dy)) => Cow::Owned(self.events.shifted(-dx, -dy)),
        }
    }

    /// Loads `frames_dir` and an event file (`.evs`/`.bin` or `.csv`).
    pub fn load(frames_dir: &Path, events_path: &Path) -> Result<Self> {
        let frames = load_frames(frames_dir)?;
        let (h, w) = frames.first().map(Frame::dims).unwrap_or((0, 0));
        let events = read_events(events_path, Some((w as u32, h as u32)))?;
        Self::new(frames, events)
    }
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir).at(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Loads every image in `dir` (sorted by name) with timestamps from
/// `timestamps.txt` or `triggers.csv`.
pub fn load_frames(dir: &Path) -> Result<Vec<Frame>> {
    let files = image_files(dir)?;
    if files.is_empty() {
        return Err(Error::invalid(format!("no images in {}", dir.display())));
    }
    let ts_path = dir.join(TIMESTAMPS_FILE);
    let trig_path = dir.join(TRIGGERS_FILE);
    let stamps = if ts_path.exists() {
        read_timestamps(&ts_path)?
    } else if trig_path.exists() {
        read_triggers(&trig_path)?
    } else {
        return Err(Error::invalid(format!("{} has neither {TIMESTAMPS_FILE} nor {TRIGGERS_FILE}", dir.display())));
    };
    if stamps.len() != files.len() {
        return Err(Error::invalid(format!("{} images but {} timestamps in {}", files.len(), stamps.len(), dir.display())));
    }
    files.iter().zip(stamps).map(|(p, t)| load_image(p, t)).collect()
}

/// Grayscale images load as one channel, anything with color as three.
pub fn load_image(path: &Path, t: u64) -> Result<Frame> {
    let img = image::open(path).map_err(|e| Error::parse(path, "image", e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = if img.color().has_color() {
        let rgb = img.to_rgb32f();
        Array3::from_shape_fn((3, h, w), |(c, y, x)| f64::from(rgb.get_pixel(x as u32, y as u32)[c]))
    } else {
        let l = img.to_luma32f();
        Array3::from_shape_fn((1, h, w), |(_, y, x)| f64::from(l.get_pixel(x as u32, y as u32)[0]))
    };
    Frame::from_clamped(t, data)
}

pub fn read_timestamps(path: &Path) -> Result<Vec<u64>> {
    let reader = BufReader::new(fs::File::open(path).at(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let t = s
            .parse()
            .map_err(|_| Error::parse(path, format!("line {}", i + 1), format!("bad timestamp {s:?}")))?;
        out.push(t);
    }
    Ok(out)
}

/// Frame timestamps from exposure triggers: midpoint of each start/end pair.
pub fn read_triggers(path: &Path) -> Result<Vec<u64>> {
    let reader = BufReader::new(fs::File::open(path).at(path)?);
    let mut out = Vec::new();
    let mut open: Option<u64> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let s = line.trim();
        let loc = format!("line {}", i + 1);
        if s.is_empty() || (i == 0 && s.starts_with(|c: char| c.is_ascii_alphabetic())) {
            continue;
        }
        let mut parts = s.split(',').map(str::trim);
        let (Some(t), Some(p), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(path, loc, format!("expected t_us,p, found {s:?}")));
        };
        let t: u64 = t.parse().map_err(|_| Error::parse(path, &loc, format!("bad time {t:?}")))?;
        let p: i64 = p.parse().map_err(|_| Error::parse(path, &loc, format!("bad trigger polarity {p:?}")))?;
        match (p, open) {
            (1, None) => open = Some(t),
            (0 | -1, Some(start)) if t >= start => {
                out.push(start + (t - start) / 2);
                open = None;
            }
            (1, Some(_)) => return Err(Error::parse(path, loc, "exposure start without preceding end")),
            (0 | -1, _) => return Err(Error::parse(path, loc, "exposure end without matching start")),
            _ => return Err(Error::parse(path, loc, format!("trigger polarity must be 1, 0 or -1, found {p}"))),
        }
    }
    if open.is_some() {
        return Err(Error::parse(path, "end of file", "unterminated exposure"));
    }
    Ok(out)
}

/// Writes 16-bit PNGs `000000.png, ...` and `timestamps.txt`.
pub fn save_frames(dir: &Path, frames: &[Frame]) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    let mut stamps = String::new();
    for (i, f) in frames.iter().enumerate() {
        save_image(&dir.join(format!("{i:06}.png")), f)?;
        stamps.push_str(&format!("{}\n", f.t()));
    }
    let ts = dir.join(TIMESTAMPS_FILE);
    fs::write(&ts, stamps).at(&ts)?;
    Ok(())
}

pub fn save_image(path: &Path, frame: &Frame) -> Result<()> {
    let (h, w) = frame.dims();
    let q = |v: f64| (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
    let d = frame.data();
    let img = if frame.channels() == 1 {
        DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_fn(w as u32, h as u32, |x, y| {
            Luma([q(d[[0, y as usize, x as usize]])])
        }))
    } else {
        DynamicImage::ImageRgb16(ImageBuffer::<Rgb<u16>, _>::from_fn(w as u32, h as u32, |x, y| {
            let (x, y) = (x as usize, y as usize);
            Rgb([q(d[[0, y, x]]), q(d[[1, y, x]]), q(d[[2, y, x]])])
        }))
    };
    Ok(img.save(path)?)
}
