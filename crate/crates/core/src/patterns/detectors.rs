use std::cmp::Ordering;

use super::{Bias, Boundary, KeyPoint, PatternConfig, PatternKind, PatternMatch};
use crate::market_data::OhlcBar;
use crate::trend::{fit_line_ols, FittedLine, Pivot, PivotSet, TrendChannel};

fn margin_ge(x: f64, limit: f64) -> f64 {
    ((x - limit) / limit).clamp(0.0, 1.0)
}

fn margin_le(x: f64, limit: f64) -> f64 {
    ((limit - x) / limit).clamp(0.0, 1.0)
}

fn confidence(margins: &[f64]) -> f64 {
    margins.iter().map(|m| 0.5 + 0.5 * m).product::<f64>().clamp(0.0, 1.0)
}

fn kp(p: &Pivot) -> KeyPoint {
    KeyPoint {
        index: p.index,
        price: p.price,
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

/// Collapses pivots closer than `k` bars (plateaus register several equal
/// pivots), keeping the more extreme one.
fn swings(pivots: &[Pivot], k: usize, lows: bool) -> Vec<Pivot> {
    let mut out: Vec<Pivot> = Vec::with_capacity(pivots.len());
    for p in pivots {
        match out.last_mut() {
            Some(last) if p.index - last.index <= k => {
                let better = if lows {
                    p.price < last.price
                } else {
                    p.price > last.price
                };
                if better {
                    *last = *p;
                }
            }
            _ => out.push(*p),
        }
    }
    out
}

fn line_boundary(line: &FittedLine, offset: usize, len: usize) -> Boundary {
    let last = len.saturating_sub(1);
    Boundary {
        start: KeyPoint {
            index: offset,
            price: line.at(0.0),
        },
        end: KeyPoint {
            index: offset + last,
            price: line.at(last as f64),
        },
    }
}

/// Two similar last swing lows with a higher swing high between them. A
/// third swing low at the same level makes it a flat support shelf instead,
/// and a later close below the lows voids the formation.
pub fn detect_double_bottom(
    bars: &[OhlcBar],
    pivots: &PivotSet,
    config: &PatternConfig,
) -> Option<PatternMatch> {
    let lows = swings(&pivots.lows, pivots.k, true);
    if lows.len() < 2 || pivots.highs.is_empty() {
        return None;
    }
    let (a, b) = (lows[lows.len() - 2], lows[lows.len() - 1]);
    let level = (a.price + b.price) / 2.0;
    let diff = (a.price - b.price).abs() / level;
    if diff > config.price_tolerance {
        return None;
    }
    let neckline = pivots
        .highs
        .iter()
        .filter(|h| h.index > a.index && h.index < b.index)
        .max_by(|x, y| x.price.partial_cmp(&y.price).unwrap_or(Ordering::Equal))?;
    let rise = (neckline.price - a.price.max(b.price)) / level;
    if rise < 2.0 * config.price_tolerance {
        return None;
    }
    let third_touch = lows[..lows.len() - 2]
        .iter()
        .any(|p| (p.price - level).abs() / level <= config.price_tolerance);
    if third_touch {
        return None;
    }
    let floor = a.price.min(b.price) * (1.0 - config.price_tolerance);
    if bars.iter().skip(b.index + 1).any(|bar| bar.close < floor) {
        return None;
    }
    let conf = confidence(&[
        margin_le(diff, config.price_tolerance),
        margin_ge(rise, 2.0 * config.price_tolerance),
    ]);
    Some(PatternMatch {
        kind: PatternKind::DoubleBottom,
        bias: Bias::Bullish,
        span: (a.index, b.index),
        confidence: conf,
        structure_summary: format!(
            "Two lows at {:.4} (bar {}) and {:.4} (bar {}), {} apart, with a rebound to {:.4} between them.",
            a.price,
            a.index,
            b.price,
            b.index,
            pct(diff),
            neckline.price
        ),
        trend_summary: "Double bottom carries a bullish bias; a close above the neckline confirms"
            .into(),
        symmetry_summary: format!(
            "W-shaped: matched lows {} bars apart, neckline {} above the lows.",
            b.index - a.index,
            pct(rise)
        ),
        key_points: vec![kp(&a), kp(neckline), kp(&b)],
        boundaries: vec![Boundary {
            start: kp(&a),
            end: kp(&b),
        }],
    })
}

/// Three consecutive swing lows, the middle one lowest by at least the
/// price tolerance, shoulders level within the tolerance.
pub fn detect_inverse_head_shoulders(
    pivots: &PivotSet,
    config: &PatternConfig,
) -> Option<PatternMatch> {
    let lows = swings(&pivots.lows, pivots.k, true);
    let tol = config.price_tolerance;
    let mut candidates: Vec<(f64, [Pivot; 3], f64, f64)> = Vec::new();
    for w in lows.windows(3) {
        let (l, h, r) = (w[0], w[1], w[2]);
        if !(h.price < l.price && h.price < r.price) {
            continue;
        }
        let shoulders = (l.price + r.price) / 2.0;
        let diff = (l.price - r.price).abs() / shoulders;
        let depth = (l.price.min(r.price) - h.price) / shoulders;
        if diff > tol || depth < tol {
            continue;
        }
        let conf = confidence(&[margin_le(diff, tol), margin_ge(depth, tol)]);
        candidates.push((conf, [l, h, r], diff, depth));
    }
    // latest formation first among equals
    candidates.reverse();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    candidates
        .into_iter()
        .find_map(|(conf, trio, diff, depth)| ihs_match(pivots, trio, conf, diff, depth, tol))
}

fn ihs_match(
    pivots: &PivotSet,
    [l, h, r]: [Pivot; 3],
    conf: f64,
    diff: f64,
    depth: f64,
    tol: f64,
) -> Option<PatternMatch> {
    let neck = |from: usize, to: usize| {
        pivots
            .highs
            .iter()
            .filter(move |p| p.index > from && p.index < to)
            .max_by(|x, y| x.price.partial_cmp(&y.price).unwrap_or(Ordering::Equal))
    };
    let left_neck = neck(l.index, h.index)?;
    let right_neck = neck(h.index, r.index)?;
    let shoulder_top = l.price.max(r.price);
    let rebound = (left_neck.price.min(right_neck.price) - shoulder_top) / shoulder_top;
    if rebound < 2.0 * tol {
        return None;
    }
    let conf = conf * (0.5 + 0.5 * margin_ge(rebound, 2.0 * tol));
    let key_points = vec![kp(&l), kp(left_neck), kp(&h), kp(right_neck), kp(&r)];
    let boundaries = vec![Boundary {
        start: kp(left_neck),
        end: kp(right_neck),
    }];
    Some(PatternMatch {
        kind: PatternKind::InverseHeadAndShoulders,
        bias: Bias::Bullish,
        span: (l.index, r.index),
        confidence: conf,
        structure_summary: format!(
            "Three lows: left shoulder {:.4}, head {:.4}, right shoulder {:.4}; head {} below the shoulders.",
            l.price,
            h.price,
            r.price,
            pct(depth)
        ),
        trend_summary: "Inverse head and shoulders carries a bullish bias, typically preceding an upward move"
            .into(),
        symmetry_summary: format!(
            "Shoulders level within {}, spaced {} and {} bars from the head.",
            pct(diff),
            h.index - l.index,
            r.index - h.index
        ),
        key_points,
        boundaries,
    })
}

struct VCandidate {
    conf: f64,
    extreme: Pivot,
    left: KeyPoint,
    right: KeyPoint,
    left_move: f64,
    right_move: f64,
}

fn v_candidate(
    bars: &[OhlcBar],
    swings: &[Pivot],
    bottom: bool,
    config: &PatternConfig,
) -> Option<VCandidate> {
    let pick = |a: &&Pivot, b: &&Pivot| {
        let o = a.price.partial_cmp(&b.price).unwrap_or(Ordering::Equal);
        if bottom {
            o
        } else {
            o.reverse()
        }
    };
    let extreme = *swings.iter().min_by(pick)?;
    let m = config.impulse_bars;
    let i = extreme.index;
    if i == 0 || i + 1 >= bars.len() {
        return None;
    }
    let lo = i.saturating_sub(m);
    let hi = (i + m).min(bars.len() - 1);
    let far = |range: std::ops::RangeInclusive<usize>| -> KeyPoint {
        let mut best = KeyPoint {
            index: *range.start(),
            price: if bottom { f64::MIN } else { f64::MAX },
        };
        for j in range {
            let p = if bottom { bars[j].high } else { bars[j].low };
            if (bottom && p > best.price) || (!bottom && p < best.price) {
                best = KeyPoint { index: j, price: p };
            }
        }
        best
    };
    let left = far(lo..=i - 1);
    let right = far(i + 1..=hi);
    let left_move = (left.price - extreme.price).abs() / extreme.price;
    let right_move = (right.price - extreme.price).abs() / extreme.price;
    let thr = config.impulse_threshold;
    if left_move < thr || right_move < thr {
        return None;
    }
    // every other swing on the same side must stay clear of the extreme by
    // three quarters of the shorter leg, otherwise this is one swing among many
    let dominance = swings
        .iter()
        .filter(|p| p.index != extreme.index)
        .map(|p| (p.price - extreme.price).abs() / extreme.price)
        .fold(f64::INFINITY, f64::min);
    let dominance_limit = (2.0 * config.price_tolerance).max(0.75 * left_move.min(right_move));
    if dominance < dominance_limit {
        return None;
    }
    let conf = confidence(&[
        margin_ge(left_move, thr),
        margin_ge(right_move, thr),
        margin_ge(dominance.min(2.0 * dominance_limit), dominance_limit),
    ]);
    Some(VCandidate {
        conf,
        extreme,
        left,
        right,
        left_move,
        right_move,
    })
}

/// A dominant swing extreme with steep legs on both sides.
pub fn detect_v_shape(
    bars: &[OhlcBar],
    pivots: &PivotSet,
    config: &PatternConfig,
) -> Option<PatternMatch> {
    let lows = swings(&pivots.lows, pivots.k, true);
    let highs = swings(&pivots.highs, pivots.k, false);
    let bottom = v_candidate(bars, &lows, true, config);
    let top = v_candidate(bars, &highs, false, config);
    let (c, is_bottom) = match (bottom, top) {
        (Some(b), Some(t)) => {
            if t.conf > b.conf {
                (t, false)
            } else {
                (b, true)
            }
        }
        (Some(b), None) => (b, true),
        (None, Some(t)) => (t, false),
        (None, None) => return None,
    };
    let (word, bias) = if is_bottom {
        ("decline", Bias::Bullish)
    } else {
        ("rally", Bias::Bearish)
    };
    Some(PatternMatch {
        kind: PatternKind::VShapedReversal,
        bias,
        span: (c.left.index, c.right.index),
        confidence: c.conf,
        structure_summary: format!(
            "Sharp {word} of {} into {:.4} at bar {}, then a {} reversal.",
            pct(c.left_move),
            c.extreme.price,
            c.extreme.index,
            pct(c.right_move)
        ),
        trend_summary: format!(
            "V-shaped {} reversal carries a {} bias",
            if is_bottom { "bottom" } else { "top" },
            bias.as_str()
        ),
        symmetry_summary: format!(
            "Legs of {} and {} bars around a single dominant {}.",
            c.extreme.index - c.left.index,
            c.right.index - c.extreme.index,
            if is_bottom { "low" } else { "high" }
        ),
        key_points: vec![c.left, kp(&c.extreme), c.right],
        boundaries: vec![
            Boundary {
                start: c.left,
                end: kp(&c.extreme),
            },
            Boundary {
                start: kp(&c.extreme),
                end: c.right,
            },
        ],
    })
}

pub fn detect_v_and_inverse_hs(
    bars: &[OhlcBar],
    pivots: &PivotSet,
    config: &PatternConfig,
) -> Option<PatternMatch> {
    detect_inverse_head_shoulders(pivots, config).or_else(|| detect_v_shape(bars, pivots, config))
}

struct ChannelView {
    r: f64,
    s: f64,
    ratio: f64,
    start: usize,
    end: usize,
}

/// Largest distance of a window pivot from its own line, relative to the
/// mean channel height. Pivots far off their line mean the lines do not
/// describe the swings.
fn line_misfit(pivots: &PivotSet, channel: &TrendChannel) -> Option<f64> {
    let start = channel.window_start;
    let end = start + channel.window_len - 1;
    let mid = (channel.window_len - 1) as f64 / 2.0;
    let height = channel.gap_at(mid);
    if height <= 0.0 {
        return None;
    }
    let off = |line: &FittedLine, p: &Pivot| (p.price - line.at((p.index - start) as f64)).abs();
    let worst = pivots
        .highs_in(start, end)
        .map(|p| off(&channel.resistance, p))
        .chain(pivots.lows_in(start, end).map(|p| off(&channel.support, p)))
        .fold(0.0, f64::max);
    Some(worst / height)
}

/// Pivots may stray from their line by at most this share of the channel
/// height.
const MAX_LINE_MISFIT: f64 = 0.25;

fn channel_view(pivots: &PivotSet, channel: &TrendChannel) -> Option<ChannelView> {
    if !channel.uses_pivots() {
        return None;
    }
    if line_misfit(pivots, channel)? > MAX_LINE_MISFIT {
        return None;
    }
    Some(ChannelView {
        r: channel.resistance_rel(),
        s: channel.support_rel(),
        ratio: channel.gap_ratio()?,
        start: channel.window_start,
        end: channel.window_start + channel.window_len - 1,
    })
}

fn channel_key_points(pivots: &PivotSet, view: &ChannelView) -> Vec<KeyPoint> {
    let mut pts: Vec<KeyPoint> = pivots
        .highs_in(view.start, view.end)
        .chain(pivots.lows_in(view.start, view.end))
        .map(kp)
        .collect();
    pts.sort_by_key(|p| p.index);
    pts
}

fn channel_match(
    kind: PatternKind,
    conf: f64,
    pivots: &PivotSet,
    channel: &TrendChannel,
    view: &ChannelView,
    structure: String,
    symmetry: String,
) -> PatternMatch {
    PatternMatch {
        kind,
        bias: kind.bias(),
        span: (view.start, view.end),
        confidence: conf,
        structure_summary: structure,
        trend_summary: format!(
            "{} carries a {} bias: {}",
            kind.name(),
            kind.bias().as_str(),
            kind.description().trim_end_matches('.').to_lowercase()
        ),
        symmetry_summary: symmetry,
        key_points: channel_key_points(pivots, view),
        boundaries: vec![
            line_boundary(&channel.resistance, view.start, channel.window_len),
            line_boundary(&channel.support, view.start, channel.window_len),
        ],
    }
}

fn slope_words(x: f64, config: &PatternConfig) -> &'static str {
    if x.abs() <= config.flat_bound {
        "flat"
    } else if x > 0.0 {
        "rising"
    } else {
        "falling"
    }
}

pub fn detect_triangles(
    pivots: &PivotSet,
    channel: &TrendChannel,
    config: &PatternConfig,
) -> Option<PatternMatch> {
    let v = channel_view(pivots, channel)?;
    let (thr, flat, eta) = (config.slope_threshold, config.flat_bound, config.gap_eta);
    let (kind, conf) = if v.s >= thr && v.r.abs() <= flat {
        (
            PatternKind::AscendingTriangle,
            confidence(&[margin_ge(v.s, thr), margin_le(v.r.abs(), flat)]),
        )
    } else if v.r <= -thr && v.s.abs() <= flat {
        (
            PatternKind::DescendingTriangle,
            confidence(&[margin_ge(-v.r, thr), margin_le(v.s.abs(), flat)]),
        )
    } else if v.r <= -thr && v.s >= thr {
        (
            PatternKind::SymmetricalTriangle,
            confidence(&[margin_ge(-v.r, thr), margin_ge(v.s, thr)]),
        )
    } else if v.ratio > 1.0 + eta && v.r > flat && v.s < -flat {
        (
            PatternKind::ExpandingTriangle,
            confidence(&[
                margin_ge(v.ratio - 1.0, eta),
                margin_ge(v.r, flat),
                margin_ge(-v.s, flat),
            ]),
        )
    } else {
        return None;
    };
    let structure = match kind {
        PatternKind::AscendingTriangle => "Higher lows pressing into flat resistance.".to_string(),
        PatternKind::DescendingTriangle => "Lower highs over relatively flat support.".to_string(),
        PatternKind::SymmetricalTriangle => "Lower highs and higher lows.".to_string(),
        _ => "Higher highs and lower lows.".to_string(),
    };
    let structure = format!(
        "{structure} Resistance {} ({:+.5}%/bar), support {} ({:+.5}%/bar).",
        slope_words(v.r, config),
        100.0 * v.r,
        slope_words(v.s, config),
        100.0 * v.s
    );
    let symmetry = if kind == PatternKind::ExpandingTriangle {
        format!(
            "Diverging lines: the range widens to {:.0}% of its starting width.",
            100.0 * v.ratio
        )
    } else {
        format!(
            "Triangular convergence: the range narrows to {:.0}% of its starting width.",
            100.0 * v.ratio
        )
    };
    Some(channel_match(kind, conf, pivots, channel, &v, structure, symmetry))
}

pub fn detect_wedges(
    pivots: &PivotSet,
    channel: &TrendChannel,
    config: &PatternConfig,
) -> Option<PatternMatch> {
    let v = channel_view(pivots, channel)?;
    let (flat, eta) = (config.flat_bound, config.gap_eta);
    if v.ratio >= 1.0 - eta {
        return None;
    }
    let kind = if v.r > flat && v.s > flat && v.s > v.r {
        PatternKind::RisingWedge
    } else if v.r < -flat && v.s < -flat && v.r < v.s {
        PatternKind::FallingWedge
    } else {
        return None;
    };
    let conf = confidence(&[
        margin_ge(v.r.abs().min(v.s.abs()), flat),
        margin_ge(1.0 - v.ratio, eta),
    ]);
    let dir = if kind == PatternKind::RisingWedge {
        "upward"
    } else {
        "downward"
    };
    let structure = format!(
        "Both boundaries slope {dir}: resistance {:+.5}%/bar, support {:+.5}%/bar.",
        100.0 * v.r,
        100.0 * v.s
    );
    let symmetry = format!(
        "Wedge convergence: the range narrows to {:.0}% of its starting width.",
        100.0 * v.ratio
    );
    Some(channel_match(kind, conf, pivots, channel, &v, structure, symmetry))
}

pub fn detect_rectangle(
    pivots: &PivotSet,
    channel: &TrendChannel,
    config: &PatternConfig,
) -> Option<PatternMatch> {
    let v = channel_view(pivots, channel)?;
    let (flat, eta) = (config.flat_bound, config.gap_eta);
    if v.r.abs() > flat || v.s.abs() > flat || (v.ratio - 1.0).abs() > eta {
        return None;
    }
    let mid = (channel.window_len as f64 - 1.0) / 2.0;
    let height = channel.gap_at(mid) / channel.mean_close;
    if height < 2.0 * config.price_tolerance {
        return None;
    }
    let conf = confidence(&[margin_le(v.r.abs(), flat), margin_le(v.s.abs(), flat)]);
    let structure = format!(
        "Horizontal range: resistance near {:.4}, support near {:.4} ({} high).",
        channel.resistance.at(mid),
        channel.support.at(mid),
        pct(height)
    );
    let symmetry = format!(
        "Parallel boundaries: the range keeps {:.0}% of its starting width.",
        100.0 * v.ratio
    );
    Some(channel_match(
        PatternKind::Rectangle,
        conf,
        pivots,
        channel,
        &v,
        structure,
        symmetry,
    ))
}

fn fit_series(bars: &[OhlcBar], f: impl Fn(&OhlcBar) -> f64) -> Option<FittedLine> {
    let pts: Vec<(f64, f64)> = bars.iter().enumerate().map(|(i, b)| (i as f64, f(b))).collect();
    fit_line_ols(&pts).ok()
}

/// An impulse of at least `impulse_threshold` over `impulse_bars`, followed by
/// a short channel drifting against it that gives back less than half.
pub fn detect_flags(bars: &[OhlcBar], config: &PatternConfig) -> Option<PatternMatch> {
    let n = bars.len();
    let m = config.impulse_bars;
    let mut best: Option<PatternMatch> = None;
    for len in config.flag_min_bars..=config.flag_max_bars {
        if n < len + m + 1 {
            break;
        }
        let c0 = n - len;
        let pole_end = c0 - 1;
        let pole_start = pole_end - m;
        let base = bars[pole_start].close;
        let tip = bars[pole_end].close;
        let impulse = tip / base - 1.0;
        if impulse.abs() < config.impulse_threshold {
            continue;
        }
        let flag = &bars[c0..];
        let (Some(hi), Some(lo)) = (fit_series(flag, |b| b.high), fit_series(flag, |b| b.low))
        else {
            continue;
        };
        let mean = flag.iter().map(|b| b.close).sum::<f64>() / len as f64;
        let (r, s) = (hi.slope / mean, lo.slope / mean);
        let up = impulse > 0.0;
        let dir = if up { 1.0 } else { -1.0 };
        let counter = -dir * (r + s) / 2.0;
        if counter < config.flat_bound || -dir * r <= 0.0 || -dir * s <= 0.0 {
            continue;
        }
        let last = (len - 1) as f64;
        let gap0 = hi.at(0.0) - lo.at(0.0);
        let gap1 = hi.at(last) - lo.at(last);
        if gap0 <= 0.0 || ((gap1 / gap0) - 1.0).abs() > 2.0 * config.gap_eta {
            continue;
        }
        let drift = counter * last;
        let giveback_limit = 0.5 * impulse.abs();
        let top = flag.iter().map(|b| b.high).fold(f64::MIN, f64::max);
        let bottom = flag.iter().map(|b| b.low).fold(f64::MAX, f64::min);
        if drift > giveback_limit || (top - bottom) / tip > 0.6 * impulse.abs() {
            continue;
        }
        let holds_base = if up {
            flag.iter().all(|b| b.low > base)
        } else {
            flag.iter().all(|b| b.high < base)
        };
        if !holds_base {
            continue;
        }
        let conf = confidence(&[
            margin_ge(impulse.abs(), config.impulse_threshold),
            margin_ge(counter, config.flat_bound),
            margin_le(drift, giveback_limit),
        ]);
        if best.as_ref().is_some_and(|b| b.confidence >= conf) {
            continue;
        }
        let kind = if up {
            PatternKind::BullishFlag
        } else {
            PatternKind::BearishFlag
        };
        best = Some(PatternMatch {
            kind,
            bias: kind.bias(),
            span: (pole_start, n - 1),
            confidence: conf,
            structure_summary: format!(
                "Flagpole of {} over {m} bars, then a {len}-bar channel drifting {} by {}.",
                pct(impulse),
                if up { "down" } else { "up" },
                pct(drift)
            ),
            trend_summary: format!(
                "{} carries a {} bias: continuation of the prior {}",
                kind.name(),
                kind.bias().as_str(),
                if up { "rise" } else { "drop" }
            ),
            symmetry_summary: format!(
                "Near-parallel counter-trend channel (width ratio {:.2}).",
                gap1 / gap0
            ),
            key_points: vec![
                KeyPoint {
                    index: pole_start,
                    price: base,
                },
                KeyPoint {
                    index: pole_end,
                    price: tip,
                },
                KeyPoint {
                    index: n - 1,
                    price: bars[n - 1].close,
                },
            ],
            boundaries: vec![line_boundary(&hi, c0, len), line_boundary(&lo, c0, len)],
        });
    }
    best
}

pub fn detect_flags_and_wedges(
    bars: &[OhlcBar],
    pivots: &PivotSet,
    channel: &TrendChannel,
    config: &PatternConfig,
) -> Option<PatternMatch> {
    best_of([
        detect_flags(bars, config),
        detect_wedges(pivots, channel, config),
        detect_rectangle(pivots, channel, config),
    ])
}

fn best_of<const N: usize>(candidates: [Option<PatternMatch>; N]) -> Option<PatternMatch> {
    candidates
        .into_iter()
        .flatten()
        .fold(None, |best: Option<PatternMatch>, m| match best {
            Some(b) if b.confidence >= m.confidence => Some(b),
            _ => Some(m),
        })
}

/// Runs every detector; returns matches sorted by confidence (descending,
/// ties in library order), at most one per kind.
pub fn detect_patterns(
    bars: &[OhlcBar],
    pivots: &PivotSet,
    channel: &TrendChannel,
    config: &PatternConfig,
) -> Vec<PatternMatch> {
    if bars.len() < config.min_span || !config.is_valid() {
        return Vec::new();
    }
    let mut matches: Vec<PatternMatch> = [
        detect_v_and_inverse_hs(bars, pivots, config),
        detect_double_bottom(bars, pivots, config),
        detect_triangles(pivots, channel, config),
        detect_wedges(pivots, channel, config),
        detect_rectangle(pivots, channel, config),
        detect_flags(bars, config),
    ]
    .into_iter()
    .flatten()
    .collect();
    matches.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap_or(Ordering::Equal)
            .then(a.kind.cmp(&b.kind))
    });
    matches
}
