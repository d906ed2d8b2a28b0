//! Paired rank statistics across datasets and critical-difference diagrams.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;

use crate::error::{invalid, Result};
use crate::math;

/// Largest sample size for which the exact null distribution is used.
pub const EXACT_MAX_N: usize = 20;
pub const DEFAULT_ALPHA: f64 = 0.10;

/// Per-method, per-dataset scores; higher is better.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    methods: Vec<String>,
    datasets: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    /// `values[i][j]` is method `i` on dataset `j`.
    pub fn new(methods: Vec<String>, datasets: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if methods.len() < 2 {
            return Err(invalid!("need at least 2 methods, got {}", methods.len()));
        }
        if datasets.len() < 3 {
            return Err(invalid!("need at least 3 datasets, got {}", datasets.len()));
        }
        if values.len() != methods.len() {
            return Err(invalid!("{} value rows for {} methods", values.len(), methods.len()));
        }
        for (m, row) in methods.iter().zip(&values) {
            if row.len() != datasets.len() {
                return Err(invalid!("method {} has {} values for {} datasets", m, row.len(), datasets.len()));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(invalid!("method {} has non-finite value on {}", m, datasets[j]));
            }
        }
        Ok(Self { methods, datasets, values })
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn row(&self, method: usize) -> &[f64] {
        &self.values[method]
    }
}

/// 1-based average ranks of `xs` in ascending order, ties sharing the mean rank.
pub fn rank_average(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wilcoxon {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Number of non-zero differences.
    pub n: usize,
    pub exact: bool,
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped. For up to [`EXACT_MAX_N`] remaining pairs
/// the p-value is exact, otherwise it uses the normal approximation with
/// tie and continuity corrections.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<Wilcoxon> {
    if x.len() != y.len() {
        return Err(invalid!("paired samples differ in length: {} vs {}", x.len(), y.len()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    if let Some(v) = d.iter().find(|v| !v.is_finite()) {
        return Err(invalid!("non-finite difference {}", v));
    }
    if d.is_empty() && !x.is_empty() {
        return Err(invalid!("methods identical on every dataset"));
    }
    let n = d.len();
    if n < 3 {
        return Err(invalid!("need at least 3 non-zero differences, got {}", n));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = rank_average(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let statistic = w_plus.min(w_minus);
    let (p, exact) =
        if n <= EXACT_MAX_N { (exact_p(&ranks, statistic), true) } else { (normal_p(&abs, statistic), false) };
    Ok(Wilcoxon { statistic, w_plus, w_minus, p, n, exact })
}

/// `min(1, 2 P(T <= w))` where `T` is the signed-rank sum under random signs.
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    // Average ranks are multiples of 1/2, so doubled ranks are integers.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r) as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (2.0 * w) as usize;
    let tail: u64 = counts[..=limit].iter().sum();
    let p = 2.0 * tail as f64 / (1u64 << ranks.len()) as f64;
    p.min(1.0)
}

fn normal_p(abs: &[f64], w: f64) -> f64 {
    let n = abs.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let diff = w - mean;
    let corrected = if diff < 0.0 { (diff + 0.5).min(0.0) } else { 0.0 };
    (2.0 * math::normal_cdf(corrected / math::sqrt(var))).min(1.0)
}

/// Holm step-down adjustment, returned in the input order.
pub fn holm_correction(pvals: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(invalid!("p-value {} outside [0, 1]", p));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].partial_cmp(&pvals[b]).unwrap_or(Ordering::Equal));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (i, &k) in order.iter().enumerate() {
        running = running.max((m - i) as f64 * pvals[k]).min(1.0);
        adjusted[k] = running;
    }
    Ok(adjusted)
}

/// Mean over datasets of each method's rank (1 = best, ties averaged).
pub fn average_ranks(scores: &ScoreMatrix) -> Vec<f64> {
    let k = scores.methods.len();
    let n = scores.datasets.len();
    let mut sums = vec![0.0; k];
    for j in 0..n {
        let column: Vec<f64> = (0..k).map(|i| -scores.values[i][j]).collect();
        for (s, r) in sums.iter_mut().zip(rank_average(&column)) {
            *s += r;
        }
    }
    sums.iter().map(|s| s / n as f64).collect()
}

/// Pairwise test between methods `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTest {
    pub a: usize,
    pub b: usize,
    pub test: Wilcoxon,
    pub p_adjusted: f64,
}

/// Everything a critical-difference diagram shows.
#[derive(Debug, Clone, PartialEq)]
pub struct CdModel {
    pub methods: Vec<String>,
    pub avg_ranks: Vec<f64>,
    pub pairs: Vec<PairTest>,
    pub alpha: f64,
    /// Method indices of each clique, best rank first.
    pub cliques: Vec<Vec<usize>>,
}

impl CdModel {
    /// Runs all pairwise tests with Holm correction and derives the cliques.
    pub fn from_scores(scores: &ScoreMatrix, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid!("alpha must lie in (0, 1), got {}", alpha));
        }
        let k = scores.methods.len();
        let mut tests = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                let t = wilcoxon_signed_rank(scores.row(a), scores.row(b))
                    .map_err(|e| invalid!("{} vs {}: {}", scores.methods[a], scores.methods[b], e))?;
                tests.push((a, b, t));
            }
        }
        let raw: Vec<f64> = tests.iter().map(|t| t.2.p).collect();
        let adjusted = holm_correction(&raw)?;
        let pairs = tests
            .into_iter()
            .zip(adjusted)
            .map(|((a, b, test), p_adjusted)| PairTest { a, b, test, p_adjusted })
            .collect();
        let mut model = CdModel {
            methods: scores.methods.clone(),
            avg_ranks: average_ranks(scores),
            pairs,
            alpha,
            cliques: Vec::new(),
        };
        model.cliques = compute_cliques(&model);
        Ok(model)
    }

    /// Adjusted p-value of the pair `(a, b)`, 1 on the diagonal.
    pub fn adjusted_p(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 1.0;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.pairs.iter().find(|p| p.a == lo && p.b == hi).map_or(1.0, |p| p.p_adjusted)
    }

    /// Method indices sorted by average rank, best first.
    pub fn rank_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.methods.len()).collect();
        order.sort_by(|&a, &b| self.avg_ranks[a].partial_cmp(&self.avg_ranks[b]).unwrap_or(Ordering::Equal));
        order
    }
}

/// Maximal rank-contiguous groups of two or more methods with no
/// significant pair among them.
pub fn compute_cliques(model: &CdModel) -> Vec<Vec<usize>> {
    let order = model.rank_order();
    let k = order.len();
    let mut cliques = Vec::new();
    let mut last_end = 0;
    for start in 0..k {
        let mut end = start;
        'grow: while end + 1 < k {
            for &m in &order[start..=end] {
                if model.adjusted_p(m, order[end + 1]) < model.alpha {
                    break 'grow;
                }
            }
            end += 1;
        }
        if end > start && (cliques.is_empty() || end > last_end) {
            cliques.push(order[start..=end].to_vec());
            last_end = end;
        }
    }
    cliques
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// SVG critical-difference diagram: rank axis from 1 (left) to k, one marker
/// per method, better-ranked half labelled on the left and the rest on the
/// right, one bar per clique below the axis.
pub fn render_cd_svg(model: &CdModel) -> String {
    const WIDTH: f64 = 640.0;
    const MARGIN: f64 = 160.0;
    const AXIS_Y: f64 = 40.0;
    const BAR_GAP: f64 = 8.0;
    const LINE_H: f64 = 18.0;
    let k = model.methods.len();
    let span = (k.max(2) - 1) as f64;
    let x_of = |rank: f64| MARGIN + (rank - 1.0) / span * (WIDTH - 2.0 * MARGIN);
    let order = model.rank_order();
    let left = k.div_ceil(2);
    let label_top = AXIS_Y + BAR_GAP * (model.cliques.len() as f64 + 1.0) + 10.0;
    let rows = left.max(k - left) as f64;
    let height = label_top + rows * LINE_H + 10.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        WIDTH, height, WIDTH, height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black" stroke-width="1.5"/>"#,
        x_of(1.0),
        AXIS_Y,
        x_of(k as f64),
        AXIS_Y
    );
    for r in 1..=k {
        let x = x_of(r as f64);
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black"/>"#,
            x,
            AXIS_Y - 6.0,
            x,
            AXIS_Y
        );
        let _ = writeln!(
            s,
            r#"<text class="tick-label" x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            x,
            AXIS_Y - 10.0,
            r
        );
    }
    for (c, clique) in model.cliques.iter().enumerate() {
        let ranks = clique.iter().map(|&m| model.avg_ranks[m]);
        let lo = ranks.clone().fold(f64::INFINITY, f64::min);
        let hi = ranks.fold(f64::NEG_INFINITY, f64::max);
        let y = AXIS_Y + BAR_GAP * (c as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<line class="clique" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black" stroke-width="3"/>"#,
            x_of(lo) - 3.0,
            y,
            x_of(hi) + 3.0,
            y
        );
    }
    for (pos, &m) in order.iter().enumerate() {
        let rank = model.avg_ranks[m];
        let x = x_of(rank);
        let (row, on_left) = if pos < left { (pos, true) } else { (k - 1 - pos, false) };
        let y = label_top + row as f64 * LINE_H;
        let end_x = if on_left { MARGIN - 20.0 } else { WIDTH - MARGIN + 20.0 };
        let _ = writeln!(s, r#"<circle class="marker" cx="{:.3}" cy="{:.3}" r="3" fill="black"/>"#, x, AXIS_Y);
        let _ = writeln!(
            s,
            r#"<polyline class="leader" points="{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}" fill="none" stroke="black"/>"#,
            x, AXIS_Y, x, y, end_x, y
        );
        let (tx, anchor) = if on_left { (end_x - 4.0, "end") } else { (end_x + 4.0, "start") };
        let _ = writeln!(
            s,
            r#"<text class="label" x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="12" text-anchor="{}" dominant-baseline="middle">{} ({:.3})</text>"#,
            tx,
            y,
            anchor,
            escape(&model.methods[m]),
            rank
        );
    }
    s.push_str("</svg>\n");
    s
}
