//! Buffered IoU, AUC, time-to-threshold, and cross-run aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VisibilityMask;

pub const DEFAULT_IOU_BUFFER: usize = 2;

/// Chebyshev dilation of a row-major boolean grid by radius `r`.
pub fn dilate(cells: &[bool], width: usize, height: usize, r: usize) -> Vec<bool> {
    if r == 0 {
        return cells.to_vec();
    }
    let window = |line: &[bool], out: &mut [bool]| {
        let n = line.len();
        let mut prefix = vec![0u32; n + 1];
        for i in 0..n {
            prefix[i + 1] = prefix[i] + line[i] as u32;
        }
        for (i, o) in out.iter_mut().enumerate() {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(n);
            *o = prefix[hi] > prefix[lo];
        }
    };
    let mut rows = vec![false; cells.len()];
    for y in 0..height {
        let span = y * width..(y + 1) * width;
        window(&cells[span.clone()], &mut rows[span]);
    }
    let mut out = vec![false; cells.len()];
    let mut col = vec![false; height];
    let mut col_out = vec![false; height];
    for x in 0..width {
        for y in 0..height {
            col[y] = rows[y * width + x];
        }
        window(&col, &mut col_out);
        for y in 0..height {
            out[y * width + x] = col_out[y];
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IouCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl IouCounts {
    pub fn iou(&self) -> f64 {
        let total = self.tp + self.fp + self.fn_;
        if total == 0 {
            1.0
        } else {
            self.tp as f64 / total as f64
        }
    }
}

/// TP: predicted-occupied cells with a true occupied cell within Chebyshev
/// radius `buffer`; FP: the other predicted-occupied cells; FN: true occupied
/// cells with no predicted-occupied cell within `buffer`.
pub fn buffered_counts(
    predicted: &VisibilityMask,
    truth: &VisibilityMask,
    buffer: usize,
) -> Result<IouCounts> {
    let g = predicted.geometry();
    if !g.same_shape(truth.geometry()) {
        return Err(Error::GeometryMismatch(format!(
            "{}x{} vs {}x{}",
            g.width,
            g.height,
            truth.geometry().width,
            truth.geometry().height
        )));
    }
    let near_truth = dilate(truth.cells(), g.width, g.height, buffer);
    let near_pred = dilate(predicted.cells(), g.width, g.height, buffer);
    let mut c = IouCounts { tp: 0, fp: 0, fn_: 0 };
    for i in 0..g.len() {
        if predicted.cells()[i] {
            if near_truth[i] {
                c.tp += 1;
            } else {
                c.fp += 1;
            }
        }
        if truth.cells()[i] && !near_pred[i] {
            c.fn_ += 1;
        }
    }
    Ok(c)
}

pub fn buffered_iou(predicted: &VisibilityMask, truth: &VisibilityMask, buffer: usize) -> Result<f64> {
    Ok(buffered_counts(predicted, truth, buffer)?.iou())
}

/// Area under the IoU curve over `[0, horizon]`: linear between evaluation
/// points, the first value held back to 0 and the last held to `horizon`.
pub fn auc(series: &[(usize, f64)], horizon: usize) -> f64 {
    let Some(&(t0, v0)) = series.first() else {
        return 0.0;
    };
    let h = horizon as f64;
    let mut area = v0 * (t0 as f64).min(h);
    for w in series.windows(2) {
        let (ta, va) = (w[0].0 as f64, w[0].1);
        let (tb, vb) = (w[1].0 as f64, w[1].1);
        if ta >= h {
            break;
        }
        if tb <= h {
            area += 0.5 * (va + vb) * (tb - ta);
        } else {
            let vh = va + (vb - va) * (h - ta) / (tb - ta);
            area += 0.5 * (va + vh) * (h - ta);
        }
    }
    let &(tl, vl) = series.last().unwrap();
    if (tl as f64) < h {
        area += vl * (h - tl as f64);
    }
    area
}

/// First time the curve reaches `threshold`, linearly interpolated between
/// evaluation points and rounded up; `None` when not reached by `budget`.
pub fn time_to_threshold(series: &[(usize, f64)], threshold: f64, budget: usize) -> Option<usize> {
    let mut prev: Option<(usize, f64)> = None;
    for &(t, v) in series {
        if v >= threshold {
            let hit = match prev {
                None => t,
                Some((ta, va)) => {
                    let exact = ta as f64 + (threshold - va) / (v - va) * (t - ta) as f64;
                    // Guard against 300.0000000001 rounding up to 301.
                    ((exact - 1e-9).ceil().max(ta as f64)) as usize
                }
            };
            return (hit <= budget).then_some(hit);
        }
        prev = Some((t, v));
    }
    None
}

/// Per-run outcome fed to [`aggregate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub planner: String,
    pub map_class: String,
    pub auc: Option<f64>,
    pub t90: Option<usize>,
    pub t95: Option<usize>,
    /// The run itself errored.
    pub errored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub n: usize,
    pub mean: Option<f64>,
    /// 1.96 sigma / sqrt(n), sample standard deviation.
    pub half_width: Option<f64>,
}

impl MeanCi {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                n,
                mean: None,
                half_width: None,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let half_width = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * var.sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            n,
            mean: Some(mean),
            half_width: Some(half_width),
        }
    }

    fn show(&self, precision: usize) -> String {
        match (self.mean, self.half_width) {
            (Some(m), Some(h)) => format!("{m:.precision$} ± {h:.precision$}"),
            _ => "n/a".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub planner: String,
    pub map_class: String,
    pub runs: usize,
    /// Runs that errored rather than merely missing a threshold.
    pub errored: usize,
    pub auc: MeanCi,
    pub t90: MeanCi,
    pub t95: MeanCi,
    pub failure90: f64,
    pub failure95: f64,
}

/// Groups outcomes by (planner, map class); failed runs count toward the
/// failure rates and are excluded from the means.
pub fn aggregate(outcomes: &[RunOutcome]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, String), Vec<&RunOutcome>> = BTreeMap::new();
    for o in outcomes {
        groups
            .entry((o.planner.clone(), o.map_class.clone()))
            .or_default()
            .push(o);
    }
    groups
        .into_iter()
        .map(|((planner, map_class), runs)| {
            let n = runs.len();
            let aucs: Vec<f64> = runs.iter().filter_map(|r| r.auc).collect();
            let t90: Vec<f64> = runs.iter().filter_map(|r| r.t90.map(|t| t as f64)).collect();
            let t95: Vec<f64> = runs.iter().filter_map(|r| r.t95.map(|t| t as f64)).collect();
            AggregateRow {
                planner,
                map_class,
                runs: n,
                errored: runs.iter().filter(|r| r.errored).count(),
                auc: MeanCi::of(&aucs),
                failure90: (n - t90.len()) as f64 / n as f64,
                failure95: (n - t95.len()) as f64 / n as f64,
                t90: MeanCi::of(&t90),
                t95: MeanCi::of(&t95),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(
        "planner,map_class,runs,errored,auc_mean,auc_ci,t90_mean,t90_ci,t90_n,failure90,t95_mean,t95_ci,t95_n,failure95\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{:.6},{},{},{},{:.6}",
            r.planner,
            r.map_class,
            r.runs,
            r.errored,
            opt(r.auc.mean),
            opt(r.auc.half_width),
            opt(r.t90.mean),
            opt(r.t90.half_width),
            r.t90.n,
            r.failure90,
            opt(r.t95.mean),
            opt(r.t95.half_width),
            r.t95.n,
            r.failure95
        );
    }
    out
}

/// Text tables: AUC per planner and map class, then time-to-threshold with
/// failure rates.
pub fn format_tables(rows: &[AggregateRow]) -> String {
    let classes: Vec<String> = {
        let mut c: Vec<String> = rows.iter().map(|r| r.map_class.clone()).collect();
        c.sort();
        c.dedup();
        c
    };
    let planners: Vec<String> = {
        let mut p: Vec<String> = rows.iter().map(|r| r.planner.clone()).collect();
        p.sort();
        p.dedup();
        p
    };
    let find = |p: &str, c: &str| rows.iter().find(|r| r.planner == p && r.map_class == c);
    let mut out = String::new();
    let _ = writeln!(out, "AUC of IoU (mean ± 95% CI)");
    let _ = write!(out, "{:<12}", "planner");
    for c in &classes {
        let _ = write!(out, " | {c:^22}");
    }
    out.push('\n');
    for p in &planners {
        let _ = write!(out, "{p:<12}");
        for c in &classes {
            let cell = find(p, c)
                .map(|r| match r.errored {
                    0 => r.auc.show(2),
                    k if k == r.runs => "FAILED".to_string(),
                    k => format!("{} [{k} failed]", r.auc.show(2)),
                })
                .unwrap_or_default();
            let _ = write!(out, " | {cell:^22}");
        }
        out.push('\n');
    }
    out.push('\n');
    let _ = writeln!(out, "Steps to 90% / 95% IoU (mean ± 95% CI, failure rate)");
    for c in &classes {
        let _ = writeln!(out, "[{c}]");
        for p in &planners {
            if let Some(r) = find(p, c) {
                let _ = writeln!(
                    out,
                    "{p:<12} | 90%: {:>18} ({:>5.1}% failed) | 95%: {:>18} ({:>5.1}% failed)",
                    r.t90.show(1),
                    100.0 * r.failure90,
                    r.t95.show(1),
                    100.0 * r.failure95
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::{Cell, GridGeometry};

    fn mask(w: usize, h: usize, cells: &[(i32, i32)]) -> VisibilityMask {
        let g = GridGeometry::with_default_resolution(w, h).unwrap();
        let mut m = VisibilityMask::empty(g);
        for &(x, y) in cells {
            m.set(Cell::new(x, y));
        }
        m
    }

    #[test]
    fn identical_masks_score_one() {
        let a = mask(10, 10, &[(1, 1), (5, 5), (7, 2)]);
        for r in 0..4 {
            assert_eq!(buffered_iou(&a, &a, r).unwrap(), 1.0);
        }
        let empty = mask(10, 10, &[]);
        assert_eq!(buffered_iou(&empty, &empty, 2).unwrap(), 1.0);
    }

    #[test]
    fn distant_masks_score_zero() {
        let a = mask(20, 20, &[(1, 1)]);
        let b = mask(20, 20, &[(10, 10)]);
        assert_eq!(buffered_iou(&a, &b, 2).unwrap(), 0.0);
    }

    #[test]
    fn formula_half() {
        // TP 50, FP 25, FN 25 at r = 0.
        let both: Vec<(i32, i32)> = (0..50).map(|i| (i % 10, i / 10)).collect();
        let mut pred = both.clone();
        pred.extend((0..25).map(|i| (i % 10, 10 + i / 10)));
        let mut truth = both;
        truth.extend((0..25).map(|i| (i % 10, 20 + i / 10)));
        let c = buffered_counts(&mask(10, 30, &pred), &mask(10, 30, &truth), 0).unwrap();
        assert_eq!(c, IouCounts { tp: 50, fp: 25, fn_: 25 });
        assert_eq!(c.iou(), 0.5);
    }

    #[test]
    fn buffer_forgives_near_misses() {
        let a = mask(10, 10, &[(3, 3)]);
        let b = mask(10, 10, &[(5, 4)]);
        assert_eq!(buffered_iou(&a, &b, 1).unwrap(), 0.0);
        assert_eq!(buffered_iou(&a, &b, 2).unwrap(), 1.0);
    }

    #[test]
    fn geometry_mismatch() {
        assert!(buffered_iou(&mask(4, 4, &[]), &mask(5, 4, &[]), 1).is_err());
    }

    #[test]
    fn dilation_matches_brute_force() {
        let w = 9;
        let h = 7;
        let cells: Vec<bool> = (0..w * h).map(|i| i % 11 == 3 || i == 20).collect();
        for r in 0..4 {
            let d = dilate(&cells, w, h, r);
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let want = (0..h as i64).any(|yy| {
                        (0..w as i64).any(|xx| {
                            cells[(yy as usize) * w + xx as usize]
                                && (xx - x).abs().max((yy - y).abs()) <= r as i64
                        })
                    });
                    assert_eq!(d[y as usize * w + x as usize], want);
                }
            }
        }
    }

    #[test]
    fn auc_cases() {
        assert_eq!(auc(&[(0, 1.0)], 100), 100.0);
        assert_eq!(auc(&[(0, 0.0), (100, 1.0)], 100), 50.0);
        assert_eq!(auc(&[(0, 0.0), (50, 1.0)], 100), 75.0);
        // Points past the horizon are clipped.
        assert_eq!(auc(&[(0, 0.0), (200, 1.0)], 100), 25.0);
    }

    #[test]
    fn threshold_cases() {
        let s = [(0, 0.0), (100, 0.5), (300, 0.9), (400, 0.95)];
        assert_eq!(time_to_threshold(&s, 0.9, 1000), Some(300));
        assert_eq!(time_to_threshold(&s, 0.95, 1000), Some(400));
        assert_eq!(time_to_threshold(&s, 0.95, 399), None);
        // Interpolated: 0.7 lies halfway between t=100 and t=300.
        assert_eq!(time_to_threshold(&s, 0.7, 1000), Some(200));
        assert_eq!(time_to_threshold(&[(0, 0.0), (10, 0.85)], 0.9, 100), None);
        // 100 + 200 * 0.1 / 0.4 = 150.
        let s2 = [(100, 0.5), (300, 0.9)];
        assert_eq!(time_to_threshold(&s2, 0.6, 1000), Some(150));
        assert_eq!(time_to_threshold(&[(0, 0.0), (3, 1.0)], 0.5, 10), Some(2));
    }

    #[test]
    fn aggregate_cases() {
        let run = |t90: Option<usize>, auc: f64| RunOutcome {
            planner: "pipe".into(),
            map_class: "small".into(),
            auc: Some(auc),
            t90,
            t95: None,
            errored: false,
        };
        let rows = aggregate(&[run(Some(400), 10.0), run(Some(600), 10.0)]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].t90.mean, Some(500.0));
        assert_eq!(rows[0].auc.half_width, Some(0.0));
        assert_eq!(rows[0].failure95, 1.0);
        assert_eq!(rows[0].t95.mean, None);

        let rows = aggregate(&[run(Some(300), 1.0), run(None, 2.0), run(Some(500), 3.0)]);
        assert_eq!(rows[0].t90.mean, Some(400.0));
        assert!((rows[0].failure90 - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(rows[0].auc.mean, Some(2.0));
        let hw = 1.96 * 1.0 / 3f64.sqrt();
        assert!((rows[0].auc.half_width.unwrap() - hw).abs() < 1e-12);
        assert!(format_tables(&rows).contains("pipe"));
        assert!(aggregate_csv(&rows).lines().count() == 2);
    }
}
