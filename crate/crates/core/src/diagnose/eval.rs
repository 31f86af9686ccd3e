//! Boxes, IoU and average precision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::RgbImage;
use crate::scene::Rgb;

/// Axis-aligned box covering `[x0, x1) × [y0, y1)` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox { x0, y0, x1, y1 }
    }

    pub fn is_valid(&self) -> bool {
        self.x0 < self.x1 && self.y0 < self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
}

/// Tight box around the pixels whose color equals `color` exactly.
pub fn bbox_from_mask(mask: &RgbImage, color: Rgb) -> Option<BBox> {
    let w = mask.width as usize;
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for (i, px) in mask.pixels().enumerate() {
        if px != color {
            continue;
        }
        let (x, y) = (i % w, i / w);
        bounds = Some(match bounds {
            None => (x, y, x, y),
            Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        });
    }
    bounds.map(|(x0, y0, x1, y1)| BBox::new(x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64))
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(0.0);
    let ih = (a.y1.min(b.y1) - a.y0.max(b.y0)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("average precision needs at least one ground-truth box")]
    NoGroundTruth,
}

/// One evaluated image: its single ground-truth box and the detections on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSample {
    pub ground_truth: BBox,
    pub detections: Vec<Detection>,
}

/// All-point interpolated AP over a set of images.
///
/// Detections from every image are ranked by descending score (ties keep
/// input order). Each one is a true positive if its image's ground truth is
/// still unmatched and overlaps it with IoU ≥ `iou_threshold`; otherwise a
/// false positive. The result is the area under the precision/recall curve
/// after making precision non-increasing in recall.
pub fn average_precision(images: &[ImageSample], iou_threshold: f64) -> Result<f64, EvalError> {
    if images.is_empty() {
        return Err(EvalError::NoGroundTruth);
    }
    let mut ranked: Vec<(usize, &Detection)> = images
        .iter()
        .enumerate()
        .flat_map(|(i, img)| img.detections.iter().map(move |d| (i, d)))
        .collect();
    ranked.sort_by(|a, b| b.1.score.total_cmp(&a.1.score));

    let total = images.len() as f64;
    let mut matched = vec![false; images.len()];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut recall = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    for (img, det) in ranked {
        if !matched[img] && iou(&det.bbox, &images[img].ground_truth) >= iou_threshold {
            matched[img] = true;
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / total);
        precision.push(tp as f64 / (tp + fp) as f64);
    }

    let mut mrec = Vec::with_capacity(recall.len() + 2);
    mrec.push(0.0);
    mrec.extend(recall);
    mrec.push(1.0);
    let mut mpre = Vec::with_capacity(precision.len() + 2);
    mpre.push(0.0);
    mpre.extend(precision);
    mpre.push(0.0);
    for i in (0..mpre.len() - 1).rev() {
        mpre[i] = mpre[i].max(mpre[i + 1]);
    }
    let ap = (0..mrec.len() - 1)
        .filter(|&i| mrec[i + 1] != mrec[i])
        .map(|i| (mrec[i + 1] - mrec[i]) * mpre[i + 1])
        .sum::<f64>();
    Ok(ap.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(b: BBox, score: f64) -> Detection {
        Detection { bbox: b, score }
    }

    /// Shifts a box horizontally so that its IoU with the original is `target`
    /// (for same-size boxes IoU = (w - s) / (w + s)).
    fn with_iou(gt: BBox, target: f64) -> BBox {
        let w = gt.width();
        let s = w * (1.0 - target) / (1.0 + target);
        BBox::new(gt.x0 + s, gt.y0, gt.x1 + s, gt.y1)
    }

    #[test]
    fn iou_cases() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert!((iou(&a, &BBox::new(5.0, 0.0, 15.0, 10.0)) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(iou(&a, &BBox::new(20.0, 20.0, 30.0, 30.0)), 0.0);
        assert_eq!(iou(&a, &BBox::new(10.0, 0.0, 20.0, 10.0)), 0.0);
    }

    #[test]
    fn tight_box() {
        let (w, h) = (64, 32);
        let mut data = vec![0u8; w * h * 3];
        for y in 10..20 {
            for x in 30..50 {
                data[3 * (y * w + x)..3 * (y * w + x) + 3].copy_from_slice(&[1, 0, 0]);
            }
        }
        // A different instance must be ignored.
        data[0..3].copy_from_slice(&[2, 0, 0]);
        let mask = RgbImage { width: w as u32, height: h as u32, data };
        assert_eq!(bbox_from_mask(&mask, [1, 0, 0]), Some(BBox::new(30.0, 10.0, 50.0, 20.0)));
        assert_eq!(bbox_from_mask(&mask, [3, 0, 0]), None);
    }

    #[test]
    fn perfect_detector() {
        let images: Vec<_> = (0..5)
            .map(|i| {
                let gt = BBox::new(i as f64, 0.0, i as f64 + 10.0, 10.0);
                ImageSample { ground_truth: gt, detections: vec![det(gt, 1.0)] }
            })
            .collect();
        assert_eq!(average_precision(&images, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn below_threshold_is_zero() {
        let gt = BBox::new(0.0, 0.0, 100.0, 50.0);
        let images = [ImageSample { ground_truth: gt, detections: vec![det(with_iou(gt, 0.4), 0.9)] }];
        assert!((iou(&images[0].detections[0].bbox, &gt) - 0.4).abs() < 1e-12);
        assert_eq!(average_precision(&images, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn duplicate_detection_and_missed_image() {
        // PR points after ranking: (r=0.5, p=1.0), (r=0.5, p=0.5); area 0.5.
        let gt1 = BBox::new(0.0, 0.0, 100.0, 100.0);
        let gt2 = BBox::new(10.0, 10.0, 60.0, 60.0);
        let images = [
            ImageSample {
                ground_truth: gt1,
                detections: vec![det(with_iou(gt1, 0.9), 0.9), det(with_iou(gt1, 0.9), 0.8)],
            },
            ImageSample { ground_truth: gt2, detections: vec![] },
        ];
        assert!((average_precision(&images, 0.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn extra_hit_on_matched_image_can_lower_ap() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(50.0, 0.0, 60.0, 10.0);
        let mut images = vec![
            ImageSample { ground_truth: a, detections: vec![det(a, 0.9)] },
            ImageSample { ground_truth: b, detections: vec![det(b, 0.8)] },
        ];
        assert_eq!(average_precision(&images, 0.5).unwrap(), 1.0);
        images[0].detections.push(det(a, 1.0));
        let ap = average_precision(&images, 0.5).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12, "{ap}");
    }

    #[test]
    fn no_ground_truth() {
        assert_eq!(average_precision(&[], 0.5), Err(EvalError::NoGroundTruth));
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..100.0f64, 0.0..100.0f64, 1.0..50.0f64, 1.0..50.0f64)
            .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h))
    }

    fn arb_images() -> impl Strategy<Value = Vec<ImageSample>> {
        prop::collection::vec(
            (arb_box(), prop::collection::vec((arb_box(), 0.0..1.0f64), 0..4)).prop_map(|(gt, dets)| ImageSample {
                ground_truth: gt,
                detections: dets.into_iter().map(|(b, s)| det(b, s)).collect(),
            }),
            1..6,
        )
    }

    proptest! {
        #[test]
        fn ap_in_unit_interval(images in arb_images()) {
            let ap = average_precision(&images, 0.5).unwrap();
            prop_assert!((0.0..=1.0).contains(&ap));
        }

        // Holds for images whose ground truth no existing detection can
        // claim; on an already-matched image the new top detection demotes
        // the earlier true positive to a false positive and AP can drop.
        #[test]
        fn correct_top_detection_never_lowers_ap(images in arb_images(), pick in any::<prop::sample::Index>()) {
            let open: Vec<usize> = (0..images.len())
                .filter(|&i| images[i].detections.iter().all(|d| iou(&d.bbox, &images[i].ground_truth) < 0.5))
                .collect();
            prop_assume!(!open.is_empty());
            let before = average_precision(&images, 0.5).unwrap();
            let mut more = images.clone();
            let i = open[pick.index(open.len())];
            let gt = more[i].ground_truth;
            more[i].detections.push(det(gt, 2.0));
            let after = average_precision(&more, 0.5).unwrap();
            prop_assert!(after + 1e-12 >= before, "{} -> {}", before, after);
        }

        #[test]
        fn mask_box_matches_full_scan(
            w in 1u32..40, h in 1u32..40,
            cells in prop::collection::vec((0u32..40, 0u32..40, 0u8..3), 0..60),
        ) {
            let mut data = vec![0u8; (w * h * 3) as usize];
            for (x, y, c) in cells {
                if x < w && y < h {
                    data[(3 * (y * w + x)) as usize] = c;
                }
            }
            let mask = RgbImage { width: w, height: h, data };
            let target = [1, 0, 0];
            // Oracle: min/max over an explicit (x, y) scan.
            let mut hits = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    if mask.pixel(x, y) == target {
                        hits.push((x, y));
                    }
                }
            }
            let expected = if hits.is_empty() {
                None
            } else {
                let x0 = hits.iter().map(|p| p.0).min().unwrap();
                let x1 = hits.iter().map(|p| p.0).max().unwrap();
                let y0 = hits.iter().map(|p| p.1).min().unwrap();
                let y1 = hits.iter().map(|p| p.1).max().unwrap();
                Some(BBox::new(x0 as f64, y0 as f64, x1 as f64 + 1.0, y1 as f64 + 1.0))
            };
            prop_assert_eq!(bbox_from_mask(&mask, target), expected);
        }
    }
}
