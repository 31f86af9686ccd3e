//! Viewpoint sweep for detector diagnosis.
//!
//! For every (elevation, azimuth) cell the camera orbits the target at each
//! configured distance, always looking at the centroid of the target's
//! bounds. The instance mask gives the ground-truth box; samples whose box
//! covers less than the visibility threshold (fraction of image pixels) are
//! dropped. Detections on the remaining samples are pooled per cell and
//! scored by average precision at IoU 0.5. A cell with no visible sample is
//! reported as `-`.

pub mod detectors;
pub mod eval;
mod orbit;

pub use detectors::{Detector, DetectorInput, ExternalDetector, Jitter, JitterDetector, OracleDetector};
pub use eval::{average_precision, bbox_from_mask, iou, BBox, Detection, EvalError, ImageSample};
pub use orbit::orbit_pose;

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::client::{ClientError, Connection, Modality};
use crate::image_io::{self, ImageError};
use crate::protocol::fmt_real;
use crate::render::instance_color;

pub const IOU_THRESHOLD: f64 = 0.5;
pub const DEFAULT_VISIBILITY_THRESHOLD: f64 = 0.001;

#[derive(Debug, Error)]
pub enum DiagnoseError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Command { context: String, source: ClientError },
    #[error("cannot read capture: {0}")]
    Image(#[from] ImageError),
    #[error("detector failed: {0}")]
    Detector(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewGrid {
    pub target: String,
    pub azimuths: Vec<f64>,
    pub elevations: Vec<f64>,
    pub distances: Vec<f64>,
}

impl ViewGrid {
    /// Azimuths 90..270 step 45, elevations 0/30/60, distances 200..290 cm
    /// step 10.
    pub fn new(target: impl Into<String>) -> Self {
        ViewGrid {
            target: target.into(),
            azimuths: vec![90.0, 135.0, 180.0, 225.0, 270.0],
            elevations: vec![0.0, 30.0, 60.0],
            distances: (0..10).map(|i| 200.0 + 10.0 * i as f64).collect(),
        }
    }

    fn validate(&self) -> Result<(), DiagnoseError> {
        if self.azimuths.is_empty() || self.elevations.is_empty() || self.distances.is_empty() {
            return Err(DiagnoseError::Config("azimuths, elevations and distances must be non-empty".into()));
        }
        if self.distances.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(DiagnoseError::Config("distances must be positive".into()));
        }
        Ok(())
    }
}

/// Parses `start:end:step` (inclusive end) or a comma list.
pub fn parse_range(text: &str) -> Result<Vec<f64>, DiagnoseError> {
    let bad = || DiagnoseError::Config(format!("bad value list {text:?}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, end, step] = parts[..] else { return Err(bad()) };
        let (start, end, step) = (num(start)?, num(end)?, num(step)?);
        if step.is_nan() || step <= 0.0 || end < start {
            return Err(bad());
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + step * i as f64).collect())
    } else {
        text.split(',').map(num).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub azimuth: f64,
    pub elevation: f64,
    /// `None` when the target was never visible in this cell.
    pub ap: Option<f64>,
    pub samples: usize,
    pub visible_samples: usize,
    pub detections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub target: String,
    pub azimuths: Vec<f64>,
    pub elevations: Vec<f64>,
    pub distances: Vec<f64>,
    pub visibility_threshold: f64,
    pub iou_threshold: f64,
    /// Row-major: one row per elevation, one column per azimuth.
    pub cells: Vec<CellResult>,
}

impl Report {
    pub fn cell(&self, elevation_index: usize, azimuth_index: usize) -> &CellResult {
        &self.cells[elevation_index * self.azimuths.len() + azimuth_index]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[CellResult]> {
        self.cells.chunks(self.azimuths.len())
    }

    /// Aligned text table, elevations down and azimuths across.
    pub fn to_table(&self) -> String {
        let corner = "Elevation\\Azimuth";
        let width = 7;
        let mut out = String::new();
        let _ = write!(out, "{corner}");
        for az in &self.azimuths {
            let _ = write!(out, " {:>width$}", fmt_real(*az));
        }
        out.push('\n');
        for (row, el) in self.rows().zip(&self.elevations) {
            let _ = write!(out, "{:<w$}", fmt_real(*el), w = corner.len());
            for cell in row {
                let text = match cell.ap {
                    Some(ap) => format!("{ap:.3}"),
                    None => "-".to_string(),
                };
                let _ = write!(out, " {text:>width$}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn command_err(context: String) -> impl FnOnce(ClientError) -> DiagnoseError {
    move |source| DiagnoseError::Command { context, source }
}

/// Runs the sweep over `grid` on camera 0.
pub fn run_diagnosis(
    conn: &mut Connection,
    grid: &ViewGrid,
    detector: &mut dyn Detector,
    visibility_threshold: f64,
) -> Result<Report, DiagnoseError> {
    grid.validate()?;
    if !(0.0..=1.0).contains(&visibility_threshold) {
        return Err(DiagnoseError::Config("visibility threshold must lie in [0, 1]".into()));
    }
    let objects = conn.list_objects().map_err(command_err("objects query".into()))?;
    let index = objects
        .iter()
        .position(|n| *n == grid.target)
        .ok_or_else(|| DiagnoseError::Config(format!("target {:?} is not in the scene", grid.target)))?;
    let color = instance_color(index as u32);
    let center = conn
        .get_object_location(&grid.target)
        .map_err(command_err("target location query".into()))?;

    let mut cells = Vec::with_capacity(grid.elevations.len() * grid.azimuths.len());
    for &el in &grid.elevations {
        for &az in &grid.azimuths {
            let mut samples = Vec::new();
            for &dist in &grid.distances {
                let context = format!("azimuth {az} elevation {el} distance {dist}");
                let pose = orbit_pose(center, az, el, dist);
                conn.set_camera_location(0, pose.location)
                    .map_err(command_err(context.clone()))?;
                conn.set_camera_rotation(0, pose.rotation)
                    .map_err(command_err(context.clone()))?;
                let image = conn.capture(0, Modality::Image).map_err(command_err(context.clone()))?;
                let mask_path = conn
                    .capture(0, Modality::ObjectMask)
                    .map_err(command_err(context.clone()))?;
                let mask = image_io::read_png(&mask_path)?;
                let pixels = mask.width as f64 * mask.height as f64;
                let Some(gt) = bbox_from_mask(&mask, color) else { continue };
                if gt.area() < visibility_threshold * pixels {
                    continue;
                }
                let detections = detector.detect(&DetectorInput {
                    image: &image,
                    mask: &mask_path,
                    target: &grid.target,
                    target_color: color,
                })?;
                samples.push(ImageSample {
                    ground_truth: gt,
                    detections,
                });
            }
            let ap = if samples.is_empty() {
                None
            } else {
                Some(average_precision(&samples, IOU_THRESHOLD).expect("non-empty samples"))
            };
            cells.push(CellResult {
                azimuth: az,
                elevation: el,
                ap,
                samples: grid.distances.len(),
                visible_samples: samples.len(),
                detections: samples.iter().map(|s| s.detections.len()).sum(),
            });
        }
    }

    Ok(Report {
        target: grid.target.clone(),
        azimuths: grid.azimuths.clone(),
        elevations: grid.elevations.clone(),
        distances: grid.distances.clone(),
        visibility_threshold,
        iou_threshold: IOU_THRESHOLD,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid() {
        let g = ViewGrid::new("sofa");
        assert_eq!(g.distances, parse_range("200:290:10").unwrap());
        assert_eq!(g.distances.len(), 10);
        assert_eq!(g.azimuths, parse_range("90,135,180,225,270").unwrap());
    }

    #[test]
    fn range_errors() {
        assert!(parse_range("1:0:1").is_err());
        assert!(parse_range("0:10:0").is_err());
        assert!(parse_range("a,b").is_err());
        assert_eq!(parse_range("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn table_layout() {
        let cell = |az, el, ap| CellResult {
            azimuth: az,
            elevation: el,
            ap,
            samples: 1,
            visible_samples: ap.map_or(0, |_| 1),
            detections: 0,
        };
        let report = Report {
            target: "sofa".into(),
            azimuths: vec![90.0, 135.0],
            elevations: vec![0.0, 30.0],
            distances: vec![200.0],
            visibility_threshold: 0.001,
            iou_threshold: 0.5,
            cells: vec![
                cell(90.0, 0.0, None),
                cell(135.0, 0.0, Some(0.713)),
                cell(90.0, 30.0, Some(0.9)),
                cell(135.0, 30.0, Some(1.0)),
            ],
        };
        let table = report.to_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "Elevation\\Azimuth      90     135");
        assert_eq!(lines[1], "0                       -   0.713");
        assert_eq!(lines[2], "30                  0.900   1.000");
        assert_eq!(report.cell(1, 0).elevation, 30.0);
    }
}
