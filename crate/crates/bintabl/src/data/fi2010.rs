//! Text-matrix loader for FI-2010-style files.
//!
//! A file is a numeric matrix, whitespace- or comma-delimited, with columns
//! as order events. A configurable block of 40 rows holds the raw LOB
//! representation and a configurable set of trailing rows holds the class
//! tracks, one per prediction horizon. The public FI-2010 files carry 144
//! feature rows followed by 5 label rows (horizons 10, 20, 30, 50, 100),
//! which is the default layout; the 40 raw rows sit at the top.
//!
//! Day boundaries come from per-day files (a directory, or several paths)
//! or from a sidecar `<file>.days` listing one event count per line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{DayData, LobFrame};
use crate::error::{Error, Result};

/// How class values are encoded in the label rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelConvention {
    /// FI-2010 encoding: 1 up, 2 stationary, 3 down.
    Fi2010,
    /// Our encoding: 0 down, 1 stationary, 2 up.
    ZeroBased,
}

impl LabelConvention {
    fn decode(&self, raw: i64) -> Option<usize> {
        match self {
            LabelConvention::Fi2010 => match raw {
                1 => Some(2),
                2 => Some(1),
                3 => Some(0),
                _ => None,
            },
            LabelConvention::ZeroBased => match raw {
                0..=2 => Some(raw as usize),
                _ => None,
            },
        }
    }

    fn encode(&self, class: usize) -> i64 {
        match self {
            LabelConvention::Fi2010 => match class {
                2 => 1,
                1 => 2,
                _ => 3,
            },
            LabelConvention::ZeroBased => class as i64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fi2010Layout {
    /// First of the 40 consecutive feature rows.
    pub feature_row_start: usize,
    /// (horizon, offset from the last row); offset 1 is the final row.
    pub label_rows_from_end: Vec<(u32, usize)>,
    pub label_convention: LabelConvention,
}

impl Default for Fi2010Layout {
    fn default() -> Self {
        Fi2010Layout {
            feature_row_start: 0,
            label_rows_from_end: vec![(10, 5), (20, 4), (30, 3), (50, 2), (100, 1)],
            label_convention: LabelConvention::Fi2010,
        }
    }
}

fn parse_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (c, token) in line
            .split(|ch: char| ch == ',' || ch.is_whitespace())
            .filter(|t| !t.is_empty())
            .enumerate()
        {
            let value: f64 = token.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                row: r,
                col: c,
                token: token.to_string(),
            })?;
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    what: format!(
                        "row {r} has {} columns, row 0 has {}",
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format {
            path: path.display().to_string(),
            what: "file holds no numeric rows".to_string(),
        });
    }
    Ok(rows)
}

fn day_from_columns(
    rows: &[Vec<f64>],
    col_range: std::ops::Range<usize>,
    layout: &Fi2010Layout,
    path: &Path,
) -> Result<DayData> {
    let nrows = rows.len();
    let needed = layout.feature_row_start + LobFrame::DIM;
    if nrows < needed {
        return Err(Error::Format {
            path: path.display().to_string(),
            what: format!(
                "needs at least {needed} rows for the feature block (start {}), file has {nrows}",
                layout.feature_row_start
            ),
        });
    }
    for &(h, off) in &layout.label_rows_from_end {
        if off == 0 || off > nrows {
            return Err(Error::Format {
                path: path.display().to_string(),
                what: format!("label row for horizon {h} (offset {off} from end) out of range"),
            });
        }
        if nrows - off < needed {
            return Err(Error::Format {
                path: path.display().to_string(),
                what: format!(
                    "label row for horizon {h} (row {}) overlaps the feature block",
                    nrows - off
                ),
            });
        }
    }

    let mut frames = Vec::with_capacity(col_range.len());
    for c in col_range.clone() {
        let mut values = [0.0; LobFrame::DIM];
        for (i, v) in values.iter_mut().enumerate() {
            *v = rows[layout.feature_row_start + i][c];
        }
        frames.push(LobFrame(values));
    }

    let mut labels = BTreeMap::new();
    for &(h, off) in &layout.label_rows_from_end {
        let r = nrows - off;
        let mut track = Vec::with_capacity(col_range.len());
        for c in col_range.clone() {
            let raw = rows[r][c];
            if raw.fract() != 0.0 {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    what: format!("label at row {r}, column {c} is not an integer: {raw}"),
                });
            }
            let class = layout.label_convention.decode(raw as i64).ok_or_else(|| {
                Error::Format {
                    path: path.display().to_string(),
                    what: format!(
                        "label value {raw} at row {r}, column {c} is not valid for {:?}",
                        layout.label_convention
                    ),
                }
            })?;
            track.push(class);
        }
        labels.insert(h, track);
    }
    Ok(DayData { frames, labels })
}

/// One file, one day.
pub fn load_day_file(path: &Path, layout: &Fi2010Layout) -> Result<DayData> {
    let rows = parse_matrix(path)?;
    let ncols = rows[0].len();
    day_from_columns(&rows, 0..ncols, layout, path)
}

/// A dataset path is either a directory of day files (sorted by name), a
/// single file with a `<file>.days` sidecar of per-day event counts, or a
/// single file holding one day.
pub fn load_dataset(path: &Path, layout: &Fi2010Layout) -> Result<Vec<DayData>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_none_or(|e| e != "days"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Format {
                path: path.display().to_string(),
                what: "directory holds no data files".to_string(),
            });
        }
        return files.iter().map(|f| load_day_file(f, layout)).collect();
    }

    let sidecar = PathBuf::from(format!("{}.days", path.display()));
    if !sidecar.is_file() {
        return Ok(vec![load_day_file(path, layout)?]);
    }

    let rows = parse_matrix(path)?;
    let ncols = rows[0].len();
    let text =
        fs::read_to_string(&sidecar).map_err(|e| Error::io(sidecar.display().to_string(), e))?;
    let mut counts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let n: usize = line.parse().map_err(|_| Error::Format {
            path: sidecar.display().to_string(),
            what: format!("line {i} is not an event count: {line:?}"),
        })?;
        counts.push(n);
    }
    if counts.iter().sum::<usize>() != ncols {
        return Err(Error::Format {
            path: sidecar.display().to_string(),
            what: format!(
                "day counts sum to {}, file has {ncols} columns",
                counts.iter().sum::<usize>()
            ),
        });
    }
    let mut days = Vec::with_capacity(counts.len());
    let mut start = 0;
    for n in counts {
        days.push(day_from_columns(&rows, start..start + n, layout, path)?);
        start += n;
    }
    Ok(days)
}

/// Write one day in the same text format: the 40 feature rows, then one
/// label row per horizon in ascending horizon order. Numbers use the
/// shortest decimal form that parses back to the same value, so a
/// write/load round trip is bit-exact. Every label track must cover every
/// event (the matrix is rectangular).
pub fn write_day_file(path: &Path, day: &DayData, convention: LabelConvention) -> Result<()> {
    let n = day.frames.len();
    for (h, track) in day.labels.iter() {
        if track.len() != n {
            return Err(Error::config(format!(
                "cannot write day: horizon {h} track has {} labels for {n} events",
                track.len()
            )));
        }
    }
    let mut out = String::new();
    for i in 0..LobFrame::DIM {
        for (c, frame) in day.frames.iter().enumerate() {
            if c > 0 {
                out.push(' ');
            }
            out.push_str(&frame.0[i].to_string());
        }
        out.push('\n');
    }
    for track in day.labels.values() {
        for (c, &class) in track.iter().enumerate() {
            if c > 0 {
                out.push(' ');
            }
            out.push_str(&convention.encode(class).to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Layout matching [`write_day_file`] output for the given horizons.
pub fn written_layout(horizons: &[u32], convention: LabelConvention) -> Fi2010Layout {
    let mut sorted: Vec<u32> = horizons.to_vec();
    sorted.sort_unstable();
    let k = sorted.len();
    Fi2010Layout {
        feature_row_start: 0,
        label_rows_from_end: sorted
            .into_iter()
            .enumerate()
            .map(|(i, h)| (h, k - i))
            .collect(),
        label_convention: convention,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(name: &str, content: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("bintabl-tests");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    /// 45-row fixture: rows 0–39 hold the value r + c/100, rows 40–44 are
    /// label tracks (zero-based convention).
    fn fixture_45(cols: usize) -> String {
        let mut s = String::new();
        for r in 0..40 {
            let row: Vec<String> = (0..cols)
                .map(|c| format!("{}", r as f64 + c as f64 / 100.0))
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        for r in 0..5 {
            let row: Vec<String> = (0..cols).map(|c| format!("{}", (r + c) % 3)).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    fn fixture_layout() -> Fi2010Layout {
        written_layout(&[10, 20, 30, 50, 100], LabelConvention::ZeroBased)
    }

    #[test]
    fn loads_40_dim_frames_and_5_label_tracks() {
        let path = write_temp("fixture45.txt", &fixture_45(12));
        let day = load_day_file(&path, &fixture_layout()).unwrap();
        assert_eq!(day.frames.len(), 12);
        assert_eq!(day.labels.len(), 5);
        assert_eq!(day.frames[3].0[7], 7.03);
        // Direct count oracle over a label row: row 40 is (0+c) % 3.
        let track = &day.labels[&10];
        let mut counts = [0usize; 3];
        for &l in track {
            counts[l] += 1;
        }
        let want: Vec<usize> = (0..12).map(|c| c % 3).collect();
        let mut want_counts = [0usize; 3];
        for l in want {
            want_counts[l] += 1;
        }
        assert_eq!(counts, want_counts);
    }

    #[test]
    fn single_column_gives_one_frame_then_windowing_fails() {
        let path = write_temp("single-col.txt", &fixture_45(1));
        let day = load_day_file(&path, &fixture_layout()).unwrap();
        assert_eq!(day.frames.len(), 1);
        let err = crate::data::make_windows(&[day], 10, 10)
            .unwrap_err()
            .to_string();
        assert!(err.contains("insufficient events"), "{err}");
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let mut content = fixture_45(10);
        // Replace cell (3, 7): row 3 starts with "3 3.01 ...".
        let lines: Vec<&str> = content.lines().collect();
        let mut row3: Vec<&str> = lines[3].split(' ').collect();
        row3[7] = "abc";
        let row3 = row3.join(" ");
        let mut rebuilt: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        rebuilt[3] = row3;
        content = rebuilt.join("\n");
        let path = write_temp("bad-cell.txt", &content);
        match load_day_file(&path, &fixture_layout()) {
            Err(Error::Parse { row, col, token, .. }) => {
                assert_eq!((row, col), (3, 7));
                assert_eq!(token, "abc");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn too_few_rows_is_a_format_error() {
        let content = fixture_45(5)
            .lines()
            .take(20)
            .collect::<Vec<_>>()
            .join("\n");
        let path = write_temp("short.txt", &content);
        match load_day_file(&path, &fixture_layout()) {
            Err(Error::Format { .. }) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn fi2010_label_convention_maps_to_zero_based() {
        assert_eq!(LabelConvention::Fi2010.decode(1), Some(2)); // up
        assert_eq!(LabelConvention::Fi2010.decode(2), Some(1)); // stationary
        assert_eq!(LabelConvention::Fi2010.decode(3), Some(0)); // down
        assert_eq!(LabelConvention::Fi2010.decode(4), None);
        for class in 0..3 {
            let enc = LabelConvention::Fi2010.encode(class);
            assert_eq!(LabelConvention::Fi2010.decode(enc), Some(class));
        }
    }

    #[test]
    fn sidecar_splits_columns_into_days() {
        let path = write_temp("sidecar.txt", &fixture_45(10));
        let sidecar = PathBuf::from(format!("{}.days", path.display()));
        fs::write(&sidecar, "6\n4\n").unwrap();
        let days = load_dataset(&path, &fixture_layout()).unwrap();
        assert_eq!(days.len(), 2);
        assert_eq!(days[0].frames.len(), 6);
        assert_eq!(days[1].frames.len(), 4);
        // Columns 6.. belong to day 2: feature row 0 is c/100.
        assert_eq!(days[1].frames[0].0[0], 0.06);
        fs::remove_file(&sidecar).unwrap();
    }

    #[test]
    fn sidecar_counts_must_match_columns() {
        let path = write_temp("sidecar-bad.txt", &fixture_45(10));
        let sidecar = PathBuf::from(format!("{}.days", path.display()));
        fs::write(&sidecar, "6\n5\n").unwrap();
        assert!(load_dataset(&path, &fixture_layout()).is_err());
        fs::remove_file(&sidecar).unwrap();
    }
}
