//! Detector contract and the reference detectors.
//!
//! An external detector is any executable that takes an image path as its
//! last argument and prints one `x0 y0 x1 y1 score` line per detection.
//! The harness also exports the ground-truth mask path and target color in
//! [`ENV_GT_MASK`] and [`ENV_GT_COLOR`]; real detectors ignore them, the
//! reference detectors read them.

use std::path::Path;
use std::process::Command;

use super::eval::{bbox_from_mask, BBox, Detection};
use super::DiagnoseError;
use crate::render::RgbImage;
use crate::scene::Rgb;

pub const ENV_GT_MASK: &str = "VIRTUCV_GT_MASK";
/// Formatted `r g b`.
pub const ENV_GT_COLOR: &str = "VIRTUCV_GT_COLOR";
pub const ENV_TARGET: &str = "VIRTUCV_TARGET";

/// Everything the harness knows about one captured sample.
#[derive(Debug, Clone, Copy)]
pub struct DetectorInput<'a> {
    pub image: &'a Path,
    pub mask: &'a Path,
    pub target: &'a str,
    pub target_color: Rgb,
}

pub trait Detector {
    fn detect(&mut self, input: &DetectorInput<'_>) -> Result<Vec<Detection>, DiagnoseError>;
}

/// Runs an executable per image.
#[derive(Debug, Clone)]
pub struct ExternalDetector {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalDetector {
    /// Splits a command line on whitespace; the image path is appended when
    /// it runs.
    pub fn from_command_line(line: &str) -> Result<Self, DiagnoseError> {
        let mut parts = line.split_ascii_whitespace().map(String::from);
        let program = parts
            .next()
            .ok_or_else(|| DiagnoseError::Config("empty detector command".into()))?;
        Ok(ExternalDetector {
            program,
            args: parts.collect(),
        })
    }
}

impl Detector for ExternalDetector {
    fn detect(&mut self, input: &DetectorInput<'_>) -> Result<Vec<Detection>, DiagnoseError> {
        let [r, g, b] = input.target_color;
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(input.image)
            .env(ENV_GT_MASK, input.mask)
            .env(ENV_GT_COLOR, format!("{r} {g} {b}"))
            .env(ENV_TARGET, input.target)
            .output()
            .map_err(|e| DiagnoseError::Detector(format!("cannot run {}: {e}", self.program)))?;
        if !output.status.success() {
            return Err(DiagnoseError::Detector(format!(
                "{} exited with {} on {}: {}",
                self.program,
                output.status,
                input.image.display(),
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        parse_detections(&String::from_utf8_lossy(&output.stdout))
    }
}

/// Parses `x0 y0 x1 y1 score` lines; blank lines are skipped.
pub fn parse_detections(text: &str) -> Result<Vec<Detection>, DiagnoseError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let bad = || DiagnoseError::Detector(format!("malformed detection line {line:?}"));
            let v: Vec<f64> = line
                .split_ascii_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?;
            let [x0, y0, x1, y1, score] = v[..] else {
                return Err(bad());
            };
            let bbox = BBox::new(x0, y0, x1, y1);
            if !bbox.is_valid() || !score.is_finite() {
                return Err(bad());
            }
            Ok(Detection { bbox, score })
        })
        .collect()
}

pub fn format_detection(d: &Detection) -> String {
    let b = d.bbox;
    format!("{} {} {} {} {}", b.x0, b.y0, b.x1, b.y1, d.score)
}

/// The ground-truth box with score 1, or nothing when the target is absent.
pub fn oracle_detections(mask: &RgbImage, color: Rgb) -> Vec<Detection> {
    bbox_from_mask(mask, color)
        .map(|bbox| Detection { bbox, score: 1.0 })
        .into_iter()
        .collect()
}

/// Perturbation applied by the jitter detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jitter {
    /// Horizontal shift as a fraction of box width.
    pub dx: f64,
    /// Vertical shift as a fraction of box height.
    pub dy: f64,
    /// Size multiplier about the box center.
    pub scale: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter {
            dx: 0.0,
            dy: 0.0,
            scale: 1.0,
        }
    }
}

/// Shift rounded away from zero to whole pixels, so a shift fraction `f`
/// always moves the box by at least `f` of its size.
fn pixel_shift(fraction: f64, size: f64) -> f64 {
    let s = fraction * size;
    s.signum() * s.abs().ceil()
}

impl Jitter {
    /// Perturbs `gt` and clips it to the image; `None` if nothing remains.
    pub fn apply(&self, gt: BBox, width: u32, height: u32) -> Option<BBox> {
        let (w, h) = (gt.width(), gt.height());
        let cx = (gt.x0 + gt.x1) * 0.5 + pixel_shift(self.dx, w);
        let cy = (gt.y0 + gt.y1) * 0.5 + pixel_shift(self.dy, h);
        let (hw, hh) = (w * self.scale * 0.5, h * self.scale * 0.5);
        let b = BBox::new(
            (cx - hw).max(0.0),
            (cy - hh).max(0.0),
            (cx + hw).min(width as f64),
            (cy + hh).min(height as f64),
        );
        b.is_valid().then_some(b)
    }
}

pub fn jitter_detections(mask: &RgbImage, color: Rgb, jitter: &Jitter) -> Vec<Detection> {
    bbox_from_mask(mask, color)
        .and_then(|gt| jitter.apply(gt, mask.width, mask.height))
        .map(|bbox| Detection { bbox, score: 1.0 })
        .into_iter()
        .collect()
}

/// In-process oracle, equivalent to the bundled `oracle` executable.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleDetector;

impl Detector for OracleDetector {
    fn detect(&mut self, input: &DetectorInput<'_>) -> Result<Vec<Detection>, DiagnoseError> {
        let mask = crate::image_io::read_png(input.mask)?;
        Ok(oracle_detections(&mask, input.target_color))
    }
}

/// In-process jitter detector.
#[derive(Debug, Default, Clone, Copy)]
pub struct JitterDetector(pub Jitter);

impl Detector for JitterDetector {
    fn detect(&mut self, input: &DetectorInput<'_>) -> Result<Vec<Detection>, DiagnoseError> {
        let mask = crate::image_io::read_png(input.mask)?;
        Ok(jitter_detections(&mask, input.target_color, &self.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnose::eval::iou;
    use proptest::prelude::*;

    #[test]
    fn parse_lines() {
        let d = parse_detections("1 2 11 12 0.5\n\n3 4 5 6 1\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].bbox, BBox::new(1.0, 2.0, 11.0, 12.0));
        assert_eq!(d[1].score, 1.0);
        assert!(parse_detections("1 2 3 4").is_err());
        assert!(parse_detections("1 2 0 4 0.3").is_err());
        assert!(parse_detections("a b c d e").is_err());
        let line = format_detection(&d[0]);
        assert_eq!(parse_detections(&line).unwrap(), vec![d[0]]);
    }

    #[test]
    fn command_line_split() {
        let d = ExternalDetector::from_command_line("det jitter --dx 0.6").unwrap();
        assert_eq!(d.program, "det");
        assert_eq!(d.args, ["jitter", "--dx", "0.6"]);
        assert!(ExternalDetector::from_command_line("  ").is_err());
    }

    #[test]
    fn identity_jitter_is_oracle() {
        let gt = BBox::new(3.0, 4.0, 20.0, 30.0);
        assert_eq!(Jitter::default().apply(gt, 64, 64), Some(gt));
    }

    #[test]
    fn jitter_off_image_vanishes() {
        let gt = BBox::new(60.0, 0.0, 64.0, 10.0);
        let j = Jitter { dx: 1.5, ..Jitter::default() };
        assert_eq!(j.apply(gt, 64, 64), None);
    }

    proptest! {
        // For same-size boxes shifted by s >= 0.6 w, IoU = (w - s) / (w + s)
        // <= 0.4 / 1.6 = 0.25. Clipping the shifted box to the image cannot
        // grow the intersection (the ground truth lies inside the image), and
        // the union is at least the ground-truth area, so IoU <= 1 - s / w
        // <= 0.4 in every case.
        #[test]
        fn sixty_percent_shift_is_below_half_iou(
            x0 in 0u32..600, y0 in 0u32..440, w in 1u32..200, h in 1u32..200,
            neg in any::<bool>(),
        ) {
            let (iw, ih) = (640u32, 480u32);
            let x1 = (x0 + w).min(iw);
            let y1 = (y0 + h).min(ih);
            let gt = BBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64);
            let j = Jitter { dx: if neg { -0.6 } else { 0.6 }, ..Jitter::default() };
            if let Some(b) = j.apply(gt, iw, ih) {
                let shift = (b.x0 - gt.x0).abs().max((b.x1 - gt.x1).abs());
                prop_assert!(shift >= 0.6 * gt.width() || b.width() < gt.width());
                prop_assert!(iou(&b, &gt) <= 0.4 + 1e-12, "iou {}", iou(&b, &gt));
            }
        }
    }
}
