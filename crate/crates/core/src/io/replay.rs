//! Recorded-data directory: path, per-frame transforms and one file per sweep.
//!
//! ```text
//! <dir>/path.csv          index,x,y,z,roll,pitch,yaw      (angles in degrees)
//! <dir>/transforms.csv    frame_index,timestamp,tx,ty,tz,r00,r01,...,r22
//! <dir>/truth.csv         index,grade                     (optional, degrees)
//! <dir>/frames/NNNNNN.txt frame_index,timestamp,tag  then one x,y,z per line
//! <dir>/frames/NNNNNN.bin packed variant, see below
//! ```
//!
//! Packed frames are little-endian: magic `RGPC`, `u32` version (1), `u64`
//! frame index, `f64` timestamp, `u8` tag (`L` or `W` as ASCII), `u64` point
//! count, then `count * 3` `f32` coordinates.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path as FsPath, PathBuf};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::types::{CoordFrame, Path, Point, PointCloudFrame, Pose, RigidTransform};

pub const PATH_FILE: &str = "path.csv";
pub const TRANSFORMS_FILE: &str = "transforms.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const FRAMES_DIR: &str = "frames";

const MAGIC: &[u8; 4] = b"RGPC";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameFormat {
    #[default]
    Text,
    Binary,
}

impl FrameFormat {
    fn extension(self) -> &'static str {
        match self {
            FrameFormat::Text => "txt",
            FrameFormat::Binary => "bin",
        }
    }
}

impl std::str::FromStr for FrameFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "text" | "txt" => Ok(FrameFormat::Text),
            "binary" | "bin" => Ok(FrameFormat::Binary),
            other => Err(format!("unknown frame format `{other}` (expected text or binary)")),
        }
    }
}

fn csv_error(path: &FsPath, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line() as usize);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        kind => Error::format(path, line, format!("{kind:?}")),
    }
}

fn reader(path: &FsPath) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Parses every record into `N` floats, reporting the 1-based file line.
fn read_rows<const N: usize>(path: &FsPath) -> Result<Vec<(usize, [f64; N])>> {
    let mut rdr = reader(path)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != N {
            return Err(Error::format(path, Some(line), format!("expected {N} fields, got {}", record.len())));
        }
        let mut values = [0.0; N];
        for (slot, field) in values.iter_mut().zip(record.iter()) {
            *slot = field
                .parse()
                .map_err(|_| Error::format(path, Some(line), format!("`{field}` is not a number")))?;
        }
        rows.push((line, values));
    }
    Ok(rows)
}

fn check_index(path: &FsPath, line: usize, value: f64, expected: usize) -> Result<()> {
    if value != expected as f64 {
        return Err(Error::format(path, Some(line), format!("index {value}, expected {expected}")));
    }
    Ok(())
}

pub fn read_path(file: &FsPath) -> Result<Path> {
    let rows = read_rows::<7>(file)?;
    let mut waypoints = Vec::with_capacity(rows.len());
    for (k, (line, r)) in rows.iter().enumerate() {
        check_index(file, *line, r[0], k)?;
        let pose = Pose::from_degrees(r[1], r[2], r[3], r[4], r[5], r[6])
            .map_err(|e| Error::format(file, Some(*line), e.to_string()))?;
        waypoints.push(pose);
    }
    if waypoints.len() < 2 {
        return Err(Error::format(file, None, "need at least 2 waypoints"));
    }
    let length: f64 = waypoints
        .windows(2)
        .map(|w| w[0].horizontal_distance(w[1].x, w[1].y))
        .sum();
    let spacing = length / (waypoints.len() - 1) as f64;
    Path::new(waypoints, spacing).map_err(|e| Error::format(file, None, e.to_string()))
}

pub fn write_path(file: &FsPath, path: &Path) -> Result<()> {
    let mut out = create(file)?;
    let mut text = String::from("index,x,y,z,roll,pitch,yaw\n");
    for (k, p) in path.waypoints().iter().enumerate() {
        text.push_str(&format!(
            "{k},{},{},{},{},{},{}\n",
            p.x,
            p.y,
            p.z,
            p.roll.to_degrees(),
            p.pitch.to_degrees(),
            p.yaw.to_degrees()
        ));
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io(file, e))?;
    out.flush().map_err(|e| Error::io(file, e))
}

pub fn read_truth(file: &FsPath) -> Result<Vec<f64>> {
    let rows = read_rows::<2>(file)?;
    let mut out = Vec::with_capacity(rows.len());
    for (k, (line, r)) in rows.iter().enumerate() {
        check_index(file, *line, r[0], k)?;
        out.push(r[1]);
    }
    Ok(out)
}

pub fn write_truth(file: &FsPath, truth: &[f64]) -> Result<()> {
    let mut text = String::from("index,grade\n");
    for (k, g) in truth.iter().enumerate() {
        text.push_str(&format!("{k},{g}\n"));
    }
    fs::write(file, text).map_err(|e| Error::io(file, e))
}

/// Timestamped lidar-to-world transform of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTransform {
    pub frame_index: u64,
    pub timestamp: f64,
    pub transform: RigidTransform,
}

pub fn read_transforms(file: &FsPath) -> Result<Vec<FrameTransform>> {
    let rows = read_rows::<14>(file)?;
    let mut out: Vec<FrameTransform> = Vec::with_capacity(rows.len());
    for (line, r) in rows {
        if !(r[0] >= 0.0 && r[0].fract() == 0.0) {
            return Err(Error::format(file, Some(line), format!("bad frame index {}", r[0])));
        }
        let frame_index = r[0] as u64;
        if let Some(prev) = out.last() {
            if frame_index <= prev.frame_index {
                return Err(Error::format(
                    file,
                    Some(line),
                    format!("frame index {frame_index} does not follow {}", prev.frame_index),
                ));
            }
        }
        let rotation = Matrix3::from_row_slice(&r[5..14]);
        let transform = RigidTransform::new(rotation, Vector3::new(r[2], r[3], r[4]))
            .map_err(|e| Error::format(file, Some(line), e.to_string()))?;
        out.push(FrameTransform {
            frame_index,
            timestamp: r[1],
            transform,
        });
    }
    Ok(out)
}

fn transform_row(t: &FrameTransform) -> String {
    let tr = t.transform.translation();
    let r = t.transform.rotation().matrix();
    let mut row = format!("{},{},{},{},{}", t.frame_index, t.timestamp, tr.x, tr.y, tr.z);
    for i in 0..3 {
        for j in 0..3 {
            row.push_str(&format!(",{}", r[(i, j)]));
        }
    }
    row.push('\n');
    row
}

fn create(file: &FsPath) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(file).map_err(|e| Error::io(file, e))?))
}

pub fn write_frame_text(file: &FsPath, frame: &PointCloudFrame) -> Result<()> {
    let mut out = create(file)?;
    let mut text = format!("{},{},{}\n", frame.frame_index(), frame.timestamp(), frame.frame().tag());
    for p in frame.points() {
        text.push_str(&format!("{},{},{}\n", p.x, p.y, p.z));
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io(file, e))?;
    out.flush().map_err(|e| Error::io(file, e))
}

pub fn read_frame_text(file: &FsPath) -> Result<PointCloudFrame> {
    let f = fs::File::open(file).map_err(|e| Error::io(file, e))?;
    let mut lines = BufReader::new(f).lines();
    let bad = |line: usize, msg: String| Error::format(file, Some(line), msg);
    let header = lines
        .next()
        .ok_or_else(|| Error::format(file, Some(1), "missing header"))?
        .map_err(|e| Error::io(file, e))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    let [index, timestamp, tag] = fields[..] else {
        return Err(bad(1, format!("header needs frame_index,timestamp,tag, got `{header}`")));
    };
    let index: u64 = index.parse().map_err(|_| bad(1, format!("bad frame index `{index}`")))?;
    let timestamp: f64 = timestamp
        .parse()
        .map_err(|_| bad(1, format!("bad timestamp `{timestamp}`")))?;
    let tag = CoordFrame::from_tag(tag).ok_or_else(|| bad(1, format!("unknown frame tag `{tag}`")))?;
    let mut points = Vec::new();
    for (k, line) in lines.enumerate() {
        let n = k + 2;
        let line = line.map_err(|e| Error::io(file, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut xyz = [0.0; 3];
        let mut parts = line.split(',');
        for slot in &mut xyz {
            let field = parts.next().ok_or_else(|| bad(n, format!("expected x,y,z, got `{line}`")))?;
            *slot = field
                .trim()
                .parse()
                .map_err(|_| bad(n, format!("`{field}` is not a number")))?;
        }
        if parts.next().is_some() {
            return Err(bad(n, format!("expected x,y,z, got `{line}`")));
        }
        points.push(Point::new(xyz[0], xyz[1], xyz[2]));
    }
    PointCloudFrame::new(index, timestamp, tag, points).map_err(|e| Error::format(file, None, e.to_string()))
}

pub fn write_frame_binary(file: &FsPath, frame: &PointCloudFrame) -> Result<()> {
    let mut buf = Vec::with_capacity(33 + 12 * frame.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&frame.frame_index().to_le_bytes());
    buf.extend_from_slice(&frame.timestamp().to_le_bytes());
    buf.push(frame.frame().tag().as_bytes()[0]);
    buf.extend_from_slice(&(frame.len() as u64).to_le_bytes());
    for p in frame.points() {
        for c in [p.x, p.y, p.z] {
            buf.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    fs::write(file, buf).map_err(|e| Error::io(file, e))
}

pub fn read_frame_binary(file: &FsPath) -> Result<PointCloudFrame> {
    let mut bytes = Vec::new();
    fs::File::open(file)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(file, e))?;
    let bad = |msg: &str| Error::format(file, None, msg.to_owned());
    if bytes.len() < 33 || &bytes[..4] != MAGIC {
        return Err(bad("not a packed point cloud (bad magic)"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    if u32_at(4) != VERSION {
        return Err(bad("unsupported packed format version"));
    }
    let index = u64_at(8);
    let timestamp = f64::from_bits(u64_at(16));
    let tag = CoordFrame::from_tag(&(bytes[24] as char).to_string()).ok_or_else(|| bad("unknown frame tag"))?;
    let count = u64_at(25) as usize;
    let body = &bytes[33..];
    if count.checked_mul(12) != Some(body.len()) {
        return Err(bad("point count does not match file size"));
    }
    let points = body
        .chunks_exact(12)
        .map(|c| {
            let f = |o: usize| f32::from_le_bytes(c[o..o + 4].try_into().expect("4 bytes")) as f64;
            Point::new(f(0), f(4), f(8))
        })
        .collect();
    PointCloudFrame::new(index, timestamp, tag, points).map_err(|e| Error::format(file, None, e.to_string()))
}

pub fn read_frame(file: &FsPath) -> Result<PointCloudFrame> {
    match file.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_frame_binary(file),
        _ => read_frame_text(file),
    }
}

/// An opened replay directory. Frames are read on demand.
#[derive(Debug, Clone)]
pub struct ReplayDataset {
    pub dir: PathBuf,
    pub path: Path,
    pub transforms: Vec<FrameTransform>,
    pub truth: Option<Vec<f64>>,
    frame_files: Vec<PathBuf>,
}

impl ReplayDataset {
    pub fn open(dir: impl AsRef<FsPath>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        if !dir.is_dir() {
            return Err(Error::format(&dir, None, "not a directory"));
        }
        let path = read_path(&dir.join(PATH_FILE))?;
        let transforms = read_transforms(&dir.join(TRANSFORMS_FILE))?;
        let truth_file = dir.join(TRUTH_FILE);
        let truth = if truth_file.exists() {
            let truth = read_truth(&truth_file)?;
            if truth.len() != path.len() {
                return Err(Error::format(
                    &truth_file,
                    None,
                    format!("{} grades for {} waypoints", truth.len(), path.len()),
                ));
            }
            Some(truth)
        } else {
            None
        };
        let frames_dir = dir.join(FRAMES_DIR);
        let mut frame_files = Vec::new();
        for entry in fs::read_dir(&frames_dir).map_err(|e| Error::io(&frames_dir, e))? {
            let p = entry.map_err(|e| Error::io(&frames_dir, e))?.path();
            if matches!(p.extension().and_then(|e| e.to_str()), Some("txt" | "bin")) {
                frame_files.push(p);
            }
        }
        frame_files.sort();
        Ok(Self {
            dir,
            path,
            transforms,
            truth,
            frame_files,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.frame_files.len()
    }

    /// Frames in file-name order, each paired with its transform.
    pub fn frames(&self) -> ReplayFrames<'_> {
        ReplayFrames {
            files: self.frame_files.iter(),
            transforms: self
                .transforms
                .iter()
                .map(|t| (t.frame_index, &t.transform))
                .collect(),
            previous: None,
        }
    }
}

pub struct ReplayFrames<'a> {
    files: std::slice::Iter<'a, PathBuf>,
    transforms: HashMap<u64, &'a RigidTransform>,
    previous: Option<u64>,
}

impl Iterator for ReplayFrames<'_> {
    type Item = Result<(PointCloudFrame, RigidTransform)>;

    fn next(&mut self) -> Option<Self::Item> {
        let file = self.files.next()?;
        Some((|| {
            let frame = read_frame(file)?;
            let index = frame.frame_index();
            if let Some(previous) = self.previous {
                if index <= previous {
                    return Err(Error::Stream { previous, got: index });
                }
            }
            self.previous = Some(index);
            let transform = self
                .transforms
                .get(&index)
                .ok_or_else(|| Error::format(file, None, format!("no transform for frame {index}")))?;
            Ok((frame, **transform))
        })())
    }
}

/// Writes a complete replay directory.
pub fn write_replay<I>(
    dir: &FsPath,
    path: &Path,
    truth: Option<&[f64]>,
    frames: I,
    format: FrameFormat,
) -> Result<usize>
where
    I: IntoIterator<Item = Result<(PointCloudFrame, RigidTransform)>>,
{
    let frames_dir = dir.join(FRAMES_DIR);
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    write_path(&dir.join(PATH_FILE), path)?;
    if let Some(truth) = truth {
        write_truth(&dir.join(TRUTH_FILE), truth)?;
    }
    let transforms_file = dir.join(TRANSFORMS_FILE);
    let mut transforms = create(&transforms_file)?;
    transforms
        .write_all(b"frame_index,timestamp,tx,ty,tz,r00,r01,r02,r10,r11,r12,r20,r21,r22\n")
        .map_err(|e| Error::io(&transforms_file, e))?;
    let mut count = 0;
    for item in frames {
        let (frame, transform) = item?;
        let name = format!("{:06}.{}", frame.frame_index(), format.extension());
        let file = frames_dir.join(name);
        match format {
            FrameFormat::Text => write_frame_text(&file, &frame)?,
            FrameFormat::Binary => write_frame_binary(&file, &frame)?,
        }
        let row = transform_row(&FrameTransform {
            frame_index: frame.frame_index(),
            timestamp: frame.timestamp(),
            transform,
        });
        transforms
            .write_all(row.as_bytes())
            .map_err(|e| Error::io(&transforms_file, e))?;
        count += 1;
    }
    transforms.flush().map_err(|e| Error::io(&transforms_file, e))?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> PointCloudFrame {
        let pts = vec![Point::new(1.0, -2.5, 0.1), Point::new(1e-7, 3.25, -1.9), Point::new(0.3, 0.7, 12.0)];
        PointCloudFrame::new(12, 1.2, CoordFrame::Lidar, pts).unwrap()
    }

    #[test]
    fn text_frame_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("000012.txt");
        write_frame_text(&file, &frame()).unwrap();
        assert_eq!(read_frame(&file).unwrap(), frame());
    }

    #[test]
    fn binary_frame_roundtrip_within_f32() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("000012.bin");
        write_frame_binary(&file, &frame()).unwrap();
        let back = read_frame(&file).unwrap();
        assert_eq!(back.frame_index(), 12);
        assert_eq!(back.timestamp(), 1.2);
        for (a, b) in back.points().iter().zip(frame().points()) {
            assert!((a - b).norm() < 1e-6);
        }
        let mut bytes = fs::read(&file).unwrap();
        bytes.pop();
        fs::write(&file, bytes).unwrap();
        assert!(read_frame(&file).is_err());
    }

    #[test]
    fn garbled_line_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("000001.txt");
        fs::write(&file, "1,0.1,L\n1,2,3\n4,five,6\n").unwrap();
        let msg = read_frame(&file).unwrap_err().to_string();
        assert!(msg.contains("000001.txt:3"), "{msg}");
    }

    #[test]
    fn bad_path_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join(PATH_FILE);
        fs::write(&file, "index,x,y,z,roll,pitch,yaw\n0,0,0,0,0,0,0\n1,0,1,0,0,x,0\n").unwrap();
        let msg = read_path(&file).unwrap_err().to_string();
        assert!(msg.contains("path.csv:3"), "{msg}");
    }

    #[test]
    fn empty_directory_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(ReplayDataset::open(dir.path()).is_err());
    }
}
