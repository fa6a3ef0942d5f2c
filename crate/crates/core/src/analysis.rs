//! Result analysis: state-visitation histograms, success rates, multi-seed
//! curve aggregation, and SVG rendering of curves and heatmaps.

use std::io::Write;

use thiserror::Error;

use crate::cmdp::{rollout, Env, Policy, TrajStep, Trajectory};
use crate::envs::geometry::Segment;
use crate::Real;

/// 2-D visitation counts on a regular grid over a rectangular arena.
#[derive(Debug, Clone)]
pub struct VisitationHistogram {
    resolution: usize,
    /// Arena extent `(x0, y0, x1, y1)`.
    extent: (Real, Real, Real, Real),
    counts: Vec<u64>,
    total: u64,
    clamped: u64,
}

impl VisitationHistogram {
    pub const DEFAULT_RESOLUTION: usize = 64;

    pub fn new(resolution: usize, extent: (Real, Real, Real, Real)) -> Self {
        assert!(resolution > 0, "histogram resolution must be positive");
        assert!(
            extent.0 < extent.2 && extent.1 < extent.3,
            "histogram extent must be a proper rectangle, got {extent:?}"
        );
        Self {
            resolution,
            extent,
            counts: vec![0; resolution * resolution],
            total: 0,
            clamped: 0,
        }
    }

    /// Default grid over a square arena `[0, size]^2`.
    pub fn for_arena(size: Real) -> Self {
        Self::new(Self::DEFAULT_RESOLUTION, (0.0, 0.0, size, size))
    }

    fn cell_index(&self, v: Real, lo: Real, hi: Real) -> (usize, bool) {
        let clamped = v < lo || v > hi;
        let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        let i = ((t * self.resolution as Real) as usize).min(self.resolution - 1);
        (i, clamped)
    }

    pub fn record(&mut self, x: Real, y: Real) {
        let (ix, cx) = self.cell_index(x, self.extent.0, self.extent.2);
        let (iy, cy) = self.cell_index(y, self.extent.1, self.extent.3);
        if cx || cy {
            if self.clamped == 0 {
                eprintln!("warning: visitation outside the arena, clamping ({x}, {y})");
            }
            self.clamped += 1;
        }
        self.counts[iy * self.resolution + ix] += 1;
        self.total += 1;
    }

    /// Record every visited state of a trajectory (first two coordinates).
    pub fn record_trajectory(&mut self, traj: &Trajectory) {
        for s in &traj.steps {
            self.record(s.state[0], s.state[1]);
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn clamped(&self) -> u64 {
        self.clamped
    }

    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[iy * self.resolution + ix]
    }

    /// Normalized visitation frequency of a cell.
    pub fn frequency(&self, ix: usize, iy: usize) -> Real {
        if self.total == 0 {
            0.0
        } else {
            self.count(ix, iy) as Real / self.total as Real
        }
    }

    fn cell_center(&self, ix: usize, iy: usize) -> (Real, Real) {
        let fx = (ix as Real + 0.5) / self.resolution as Real;
        let fy = (iy as Real + 0.5) / self.resolution as Real;
        (
            self.extent.0 + fx * (self.extent.2 - self.extent.0),
            self.extent.1 + fy * (self.extent.3 - self.extent.1),
        )
    }

    /// Fraction of recorded mass in cells whose center lies outside `rect`
    /// (`x0, y0, x1, y1`).
    pub fn mass_outside(&self, rect: (Real, Real, Real, Real)) -> Real {
        if self.total == 0 {
            return 0.0;
        }
        let mut outside = 0u64;
        for iy in 0..self.resolution {
            for ix in 0..self.resolution {
                let (cx, cy) = self.cell_center(ix, iy);
                let inside =
                    cx >= rect.0 && cx <= rect.2 && cy >= rect.1 && cy <= rect.3;
                if !inside {
                    outside += self.count(ix, iy);
                }
            }
        }
        outside as Real / self.total as Real
    }

    /// Export as `ix,iy,count` in row-major order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ix,iy,count")?;
        for iy in 0..self.resolution {
            for ix in 0..self.resolution {
                writeln!(w, "{ix},{iy},{}", self.count(ix, iy))?;
            }
        }
        Ok(())
    }
}

/// Fraction of episodes that satisfy `success_step` on some step while
/// incurring zero episodic cost.
pub fn success_rate(trajectories: &[Trajectory], success_step: impl Fn(&TrajStep) -> bool) -> Real {
    if trajectories.is_empty() {
        return 0.0;
    }
    let hits = trajectories
        .iter()
        .filter(|t| t.episodic_cost() == 0.0 && t.steps.iter().any(&success_step))
        .count();
    hits as Real / trajectories.len() as Real
}

/// Roll out `n_episodes` seeded evaluation episodes and score them with
/// [`success_rate`].
pub fn success_rate_policy<E: Env, P: Policy>(
    policy: &mut P,
    env: &mut E,
    n_episodes: usize,
    seed0: u64,
    success_step: impl Fn(&TrajStep) -> bool,
) -> Real {
    let horizon = env.horizon();
    let trajs: Vec<Trajectory> = (0..n_episodes)
        .map(|i| rollout(policy, env, horizon, seed0 + i as u64).expect("finite policy"))
        .collect();
    success_rate(&trajs, success_step)
}

/// One seed's evaluation series on a fixed step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSeries {
    pub seed: u64,
    pub steps: Vec<usize>,
    pub returns: Vec<Real>,
    pub costs: Vec<Real>,
}

/// Pointwise median and interquartile band over seeds sharing a step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveBundle {
    pub steps: Vec<usize>,
    pub median_return: Vec<Real>,
    pub q25_return: Vec<Real>,
    pub q75_return: Vec<Real>,
    pub median_cost: Vec<Real>,
    pub q25_cost: Vec<Real>,
    pub q75_cost: Vec<Real>,
}

#[derive(Debug, Error, PartialEq)]
pub enum AggregateError {
    #[error("no runs to aggregate")]
    Empty,
    #[error("run for seed {seed} has a different evaluation grid than the first run")]
    GridMismatch { seed: u64 },
}

fn quantile(sorted: &[Real], q: Real) -> Real {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as Real;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as Real;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn aggregate_curves(runs: &[SeedSeries]) -> Result<CurveBundle, AggregateError> {
    let first = runs.first().ok_or(AggregateError::Empty)?;
    for run in runs {
        if run.steps != first.steps {
            return Err(AggregateError::GridMismatch { seed: run.seed });
        }
    }
    let n = first.steps.len();
    let mut bundle = CurveBundle {
        steps: first.steps.clone(),
        median_return: Vec::with_capacity(n),
        q25_return: Vec::with_capacity(n),
        q75_return: Vec::with_capacity(n),
        median_cost: Vec::with_capacity(n),
        q25_cost: Vec::with_capacity(n),
        q75_cost: Vec::with_capacity(n),
    };
    for i in 0..n {
        for (src, med, lo, hi) in [
            (
                runs.iter().map(|r| r.returns[i]).collect::<Vec<_>>(),
                &mut bundle.median_return,
                &mut bundle.q25_return,
                &mut bundle.q75_return,
            ),
            (
                runs.iter().map(|r| r.costs[i]).collect::<Vec<_>>(),
                &mut bundle.median_cost,
                &mut bundle.q25_cost,
                &mut bundle.q75_cost,
            ),
        ] {
            let mut vals = src;
            vals.sort_by(|a, b| a.partial_cmp(b).expect("finite curve values"));
            med.push(quantile(&vals, 0.5));
            lo.push(quantile(&vals, 0.25));
            hi.push(quantile(&vals, 0.75));
        }
    }
    Ok(bundle)
}

const SVG_W: Real = 640.0;
const SVG_H: Real = 400.0;
const MARGIN: Real = 50.0;

fn scale(v: Real, lo: Real, hi: Real, out_lo: Real, out_hi: Real) -> Real {
    if hi == lo {
        (out_lo + out_hi) / 2.0
    } else {
        out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
    }
}

fn polyline_path(xs: &[Real], ys: &[Real]) -> String {
    let mut d = String::new();
    for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
        d.push_str(if i == 0 { "M" } else { " L" });
        d.push_str(&format!("{x:.2} {y:.2}"));
    }
    d
}

/// Render the aggregated return and cost curves: axes, one median path per
/// series, and a shaded interquartile band per series.
pub fn render_curves_svg(bundle: &CurveBundle) -> String {
    let steps: Vec<Real> = bundle.steps.iter().map(|&s| s as Real).collect();
    let x_lo = steps.first().copied().unwrap_or(0.0);
    let x_hi = steps.last().copied().unwrap_or(1.0);
    let all_y: Vec<Real> = bundle
        .q25_return
        .iter()
        .chain(&bundle.q75_return)
        .chain(&bundle.q25_cost)
        .chain(&bundle.q75_cost)
        .copied()
        .collect();
    let y_lo = all_y.iter().copied().fold(Real::INFINITY, Real::min).min(0.0);
    let y_hi = all_y.iter().copied().fold(Real::NEG_INFINITY, Real::max).max(1.0);
    let px = |v: Real| scale(v, x_lo, x_hi, MARGIN, SVG_W - MARGIN);
    let py = |v: Real| scale(v, y_lo, y_hi, SVG_H - MARGIN, MARGIN);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = SVG_H - MARGIN,
        r = SVG_W - MARGIN,
        t = MARGIN
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n",
        SVG_W / 2.0,
        SVG_H - 12.0,
        "environment steps"
    ));
    svg.push_str(&format!(
        "<text x=\"12\" y=\"{}\" font-size=\"12\">{y_lo:.1}..{y_hi:.1}</text>\n",
        SVG_H / 2.0
    ));
    for (name, color, med, lo, hi) in [
        ("return", "#1f77b4", &bundle.median_return, &bundle.q25_return, &bundle.q75_return),
        ("cost", "#d62728", &bundle.median_cost, &bundle.q25_cost, &bundle.q75_cost),
    ] {
        // band: upper edge forward, lower edge backward
        let xs_px: Vec<Real> = steps.iter().map(|&s| px(s)).collect();
        let hi_px: Vec<Real> = hi.iter().map(|&v| py(v)).collect();
        let mut band = polyline_path(&xs_px, &hi_px);
        for (x, v) in xs_px.iter().zip(lo).rev() {
            band.push_str(&format!(" L{x:.2} {:.2}", py(*v)));
        }
        band.push_str(" Z");
        svg.push_str(&format!(
            "<path class=\"band-{name}\" d=\"{band}\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n"
        ));
        let med_px: Vec<Real> = med.iter().map(|&v| py(v)).collect();
        svg.push_str(&format!(
            "<path class=\"series-{name}\" d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            polyline_path(&xs_px, &med_px)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            SVG_W - MARGIN + 4.0,
            if name == "return" { MARGIN + 12.0 } else { MARGIN + 28.0 }
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Render a visitation heatmap: monotone dark-to-light ramp per cell, lava
/// segments overlaid, and a two-stop legend.
pub fn render_heatmap_svg(hist: &VisitationHistogram, lava: &[Segment<Real>]) -> String {
    let n = hist.resolution();
    let side = 512.0;
    let cell = side / n as Real;
    let max = (0..n)
        .flat_map(|iy| (0..n).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| hist.count(ix, iy))
        .max()
        .unwrap_or(0)
        .max(1);
    let (x0, y0, x1, y1) = hist.extent;
    let to_px_x = |x: Real| (x - x0) / (x1 - x0) * side;
    // svg y grows downwards; arena y grows upwards
    let to_px_y = |y: Real| side - (y - y0) / (y1 - y0) * side;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{side}\" viewBox=\"0 0 {w} {side}\">\n",
        w = side + 120.0
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{side}\" height=\"{side}\" fill=\"rgb(0,0,0)\"/>\n"
    ));
    for iy in 0..n {
        for ix in 0..n {
            let c = hist.count(ix, iy);
            if c == 0 {
                continue; // background already carries the zero color
            }
            // sqrt ramp keeps sparse cells visible while staying monotone
            let t = ((c as Real / max as Real).sqrt() * 255.0).round() as u8;
            let px = ix as Real * cell;
            let py = side - (iy as Real + 1.0) * cell;
            svg.push_str(&format!(
                "<rect x=\"{px:.2}\" y=\"{py:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"rgb({t},{t},{t})\"/>\n"
            ));
        }
    }
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{side}\" height=\"{side}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    for seg in lava {
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#d62728\" stroke-width=\"2\"/>\n",
            to_px_x(seg.a.x),
            to_px_y(seg.a.y),
            to_px_x(seg.b.x),
            to_px_y(seg.b.y)
        ));
    }
    // legend: zero and max swatches
    svg.push_str(&format!(
        "<rect x=\"{x}\" y=\"20\" width=\"16\" height=\"16\" fill=\"rgb(0,0,0)\" stroke=\"black\"/>\n<text x=\"{tx}\" y=\"32\" font-size=\"12\">0 visits</text>\n",
        x = side + 16.0,
        tx = side + 40.0
    ));
    svg.push_str(&format!(
        "<rect x=\"{x}\" y=\"44\" width=\"16\" height=\"16\" fill=\"rgb(255,255,255)\" stroke=\"black\"/>\n<text x=\"{tx}\" y=\"56\" font-size=\"12\">{max} visits</text>\n",
        x = side + 16.0,
        tx = side + 40.0
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Minimal structural check used by the test suite: every opened tag is
/// closed in order, attributes are quote-balanced, and the document has a
/// single `svg` root.
pub fn svg_well_formed(text: &str) -> bool {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = text.trim();
    let mut roots = 0;
    while let Some(open) = rest.find('<') {
        let Some(close_rel) = rest[open..].find('>') else {
            return false;
        };
        let tag = &rest[open + 1..open + close_rel];
        rest = &rest[open + close_rel + 1..];
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        if tag.matches('"').count() % 2 != 0 {
            return false;
        }
        if let Some(name) = tag.strip_prefix('/') {
            match stack.pop() {
                Some(top) if top == name.trim() => {}
                _ => return false,
            }
        } else if !tag.ends_with('/') {
            let name = tag.split_whitespace().next().unwrap_or("").to_string();
            if name.is_empty() {
                return false;
            }
            if stack.is_empty() {
                roots += 1;
            }
            stack.push(name);
        }
    }
    stack.is_empty() && roots == 1 && !rest.contains('<')
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmdp::TrajStep;

    fn traj(points: &[(Real, Real)], cost: Real, top_reward: Real) -> Trajectory {
        Trajectory {
            steps: points
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| TrajStep {
                    state: vec![x, y],
                    action: vec![0.0, 0.0],
                    reward: if i == points.len() - 1 { top_reward } else { 0.0 },
                    cost: if i == 0 { cost } else { 0.0 },
                })
                .collect(),
            terminal: false,
        }
    }

    #[test]
    fn histogram_conserves_counts() {
        let mut h = VisitationHistogram::for_arena(16.0);
        let t = traj(&vec![(8.0, 8.0); 32], 0.0, 0.0);
        h.record_trajectory(&t);
        assert_eq!(h.total(), 32);
        let sum: u64 = (0..64)
            .flat_map(|iy| (0..64).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| h.count(ix, iy))
            .sum();
        assert_eq!(sum, 32);
    }

    #[test]
    fn out_of_range_states_are_clamped_and_counted() {
        let mut h = VisitationHistogram::for_arena(16.0);
        h.record(-5.0, 20.0);
        assert_eq!(h.total(), 1);
        assert_eq!(h.clamped(), 1);
        assert_eq!(h.count(0, 63), 1);
    }

    #[test]
    fn mass_outside_rect() {
        let mut h = VisitationHistogram::for_arena(16.0);
        h.record(8.0, 8.0); // inside (4,4,12,12)
        h.record(1.0, 1.0); // outside
        h.record(1.0, 1.0); // outside
        let frac = h.mass_outside((4.0, 4.0, 12.0, 12.0));
        assert!((frac - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_csv_schema() {
        let mut h = VisitationHistogram::new(2, (0.0, 0.0, 1.0, 1.0));
        h.record(0.9, 0.1);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "ix,iy,count\n0,0,0\n1,0,1\n0,1,0\n1,1,0\n"
        );
    }

    #[test]
    fn success_needs_goal_and_zero_cost() {
        let goal = |s: &TrajStep| s.reward >= 30.0;
        let good = traj(&[(8.0, 8.0), (15.5, 8.0)], 0.0, 30.0);
        let costly = traj(&[(8.0, 8.0), (15.5, 8.0)], 1.0, 30.0);
        let lost = traj(&[(8.0, 8.0), (9.0, 8.0)], 0.0, -0.1);
        assert_eq!(success_rate(&[good.clone()], goal), 1.0);
        assert_eq!(success_rate(&[good, costly, lost], goal), 1.0 / 3.0);
    }

    #[test]
    fn single_run_bundle_has_zero_band() {
        let run = SeedSeries {
            seed: 1,
            steps: vec![10, 20],
            returns: vec![1.0, 2.0],
            costs: vec![0.0, 0.5],
        };
        let b = aggregate_curves(&[run.clone()]).unwrap();
        assert_eq!(b.median_return, run.returns);
        assert_eq!(b.q25_return, b.q75_return);
    }

    #[test]
    fn two_constant_runs_have_median_two() {
        let mk = |seed, v: Real| SeedSeries {
            seed,
            steps: vec![1, 2, 3],
            returns: vec![v; 3],
            costs: vec![0.0; 3],
        };
        let a = mk(1, 1.0);
        let b = mk(2, 3.0);
        let fwd = aggregate_curves(&[a.clone(), b.clone()]).unwrap();
        let rev = aggregate_curves(&[b, a]).unwrap();
        assert_eq!(fwd.median_return, vec![2.0; 3]);
        assert_eq!(fwd, rev); // permutation invariance
    }

    #[test]
    fn mismatched_grids_name_the_offender() {
        let a = SeedSeries {
            seed: 1,
            steps: vec![1, 2],
            returns: vec![0.0; 2],
            costs: vec![0.0; 2],
        };
        let b = SeedSeries {
            seed: 7,
            steps: vec![1, 3],
            returns: vec![0.0; 2],
            costs: vec![0.0; 2],
        };
        assert_eq!(
            aggregate_curves(&[a, b]).unwrap_err(),
            AggregateError::GridMismatch { seed: 7 }
        );
    }

    #[test]
    fn curve_svg_is_well_formed_with_one_path_per_series() {
        let run = SeedSeries {
            seed: 1,
            steps: vec![0, 100, 200],
            returns: vec![-3.0, 1.0, 5.0],
            costs: vec![1.0, 0.5, 0.0],
        };
        let svg = render_curves_svg(&aggregate_curves(&[run]).unwrap());
        assert!(svg_well_formed(&svg), "svg:\n{svg}");
        assert_eq!(svg.matches("class=\"series-").count(), 2);
        assert_eq!(svg.matches("class=\"band-").count(), 2);
    }

    #[test]
    fn heatmap_svg_is_well_formed() {
        let mut h = VisitationHistogram::for_arena(16.0);
        for i in 0..100 {
            h.record(8.0 + (i % 7) as Real * 0.1, 8.0);
        }
        let lava = vec![Segment::new(5.0, 5.0, 11.0, 5.0)];
        let svg = render_heatmap_svg(&h, &lava);
        assert!(svg_well_formed(&svg), "svg:\n{svg}");
        assert!(svg.contains("<line"));
        assert!(svg.contains("visits"));
    }

    #[test]
    fn validator_rejects_unbalanced_markup() {
        assert!(svg_well_formed("<svg><g></g></svg>"));
        assert!(!svg_well_formed("<svg><g></svg>"));
        assert!(!svg_well_formed("<svg></svg><svg></svg>"));
        assert!(!svg_well_formed("<svg attr=\"unclosed></svg>"));
    }
}
