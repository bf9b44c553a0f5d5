//! Definitional indicator formulas, written directly from the textbook
//! definitions over whole arrays. Deliberately independent of the streaming
//! implementation: no shared helpers, different evaluation order.

#![allow(dead_code)]

use cognitrade::Candle;

pub type Line = Vec<Option<f64>>;

fn closes(c: &[Candle]) -> Vec<f64> {
    c.iter().map(|b| b.close).collect()
}

fn tp(b: &Candle) -> f64 {
    (b.high + b.low + b.close) / 3.0
}

fn window_mean(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

pub fn sma_values(xs: &[f64], p: usize) -> Line {
    (0..xs.len()).map(|i| (i + 1 >= p).then(|| window_mean(&xs[i + 1 - p..=i]))).collect()
}

/// EMA in `k*x + (1-k)*prev` form, seeded by the SMA of the first `p` values of `xs[start..]`.
pub fn ema_values_from(xs: &[f64], start: usize, p: usize) -> Line {
    let k = 2.0 / (p as f64 + 1.0);
    let mut out = vec![None; xs.len()];
    let seed_at = start + p - 1;
    if seed_at >= xs.len() {
        return out;
    }
    let mut prev = window_mean(&xs[start..=seed_at]);
    out[seed_at] = Some(prev);
    for i in seed_at + 1..xs.len() {
        prev = k * xs[i] + (1.0 - k) * prev;
        out[i] = Some(prev);
    }
    out
}

/// Wilder average in `((p-1)*prev + x)/p` form over `xs[start..]`.
fn wilder_from(xs: &[f64], start: usize, p: usize) -> Line {
    let mut out = vec![None; xs.len()];
    let seed_at = start + p - 1;
    if seed_at >= xs.len() {
        return out;
    }
    let mut prev = window_mean(&xs[start..=seed_at]);
    out[seed_at] = Some(prev);
    for i in seed_at + 1..xs.len() {
        prev = ((p as f64 - 1.0) * prev + xs[i]) / p as f64;
        out[i] = Some(prev);
    }
    out
}

pub fn sma(c: &[Candle], p: usize) -> Line {
    sma_values(&closes(c), p)
}

pub fn ema(c: &[Candle], p: usize) -> Line {
    ema_values_from(&closes(c), 0, p)
}

pub fn rsi(c: &[Candle], p: usize) -> Line {
    let x = closes(c);
    let mut gains = vec![0.0; x.len()];
    let mut losses = vec![0.0; x.len()];
    for i in 1..x.len() {
        let d = x[i] - x[i - 1];
        if d > 0.0 {
            gains[i] = d;
        } else {
            losses[i] = -d;
        }
    }
    let g = wilder_from(&gains, 1, p);
    let l = wilder_from(&losses, 1, p);
    g.iter()
        .zip(&l)
        .map(|(g, l)| match (g, l) {
            (Some(g), Some(l)) => Some(if *l == 0.0 {
                if *g == 0.0 {
                    50.0
                } else {
                    100.0
                }
            } else {
                100.0 * g / (g + l)
            }),
            _ => None,
        })
        .collect()
}

fn true_ranges(c: &[Candle]) -> Vec<f64> {
    let mut tr = vec![0.0; c.len()];
    for i in 1..c.len() {
        let pc = c[i - 1].close;
        let cands = [c[i].high - c[i].low, (c[i].high - pc).abs(), (c[i].low - pc).abs()];
        tr[i] = cands.iter().cloned().fold(f64::MIN, f64::max);
    }
    tr
}

pub fn atr(c: &[Candle], p: usize) -> Line {
    wilder_from(&true_ranges(c), 1, p)
}

pub fn macd(c: &[Candle], fast: usize, slow: usize, signal: usize) -> (Line, Line, Line) {
    let f = ema(c, fast);
    let s = ema(c, slow);
    let line: Line = f.iter().zip(&s).map(|(a, b)| Some((*a)? - (*b)?)).collect();
    let dense: Vec<f64> = line.iter().map(|v| v.unwrap_or(0.0)).collect();
    let sig = ema_values_from(&dense, slow - 1, signal);
    let hist = line.iter().zip(&sig).map(|(m, s)| Some((*m)? - (*s)?)).collect();
    (line, sig, hist)
}

pub fn bollinger(c: &[Candle], p: usize, k: f64) -> (Line, Line, Line) {
    let x = closes(c);
    let mut up = vec![None; x.len()];
    let mut mid = vec![None; x.len()];
    let mut lo = vec![None; x.len()];
    for i in p - 1..x.len() {
        let w = &x[i + 1 - p..=i];
        let m = window_mean(w);
        let var = w.iter().map(|v| (v - m).powi(2)).sum::<f64>() / p as f64;
        let sd = var.sqrt();
        up[i] = Some(m + k * sd);
        mid[i] = Some(m);
        lo[i] = Some(m - k * sd);
    }
    (up, mid, lo)
}

pub fn obv(c: &[Candle]) -> Line {
    let mut out = vec![Some(0.0); c.len()];
    let mut acc = 0.0;
    for i in 1..c.len() {
        if c[i].close > c[i - 1].close {
            acc += c[i].volume;
        } else if c[i].close < c[i - 1].close {
            acc -= c[i].volume;
        }
        out[i] = Some(acc);
    }
    out
}

pub fn momentum(c: &[Candle], p: usize) -> Line {
    (0..c.len()).map(|i| (i >= p).then(|| c[i].close - c[i - p].close)).collect()
}

pub fn force_index(c: &[Candle], p: usize) -> Line {
    let mut raw = vec![0.0; c.len()];
    for i in 1..c.len() {
        raw[i] = (c[i].close - c[i - 1].close) * c[i].volume;
    }
    ema_values_from(&raw, 1, p)
}

pub fn mfi(c: &[Candle], p: usize) -> Line {
    (0..c.len())
        .map(|i| {
            if i < p {
                return None;
            }
            let (mut pos, mut neg) = (0.0, 0.0);
            for j in i + 1 - p..=i {
                let (now, before) = (tp(&c[j]), tp(&c[j - 1]));
                if now > before {
                    pos += now * c[j].volume;
                } else if now < before {
                    neg += now * c[j].volume;
                }
            }
            Some(if neg == 0.0 {
                if pos == 0.0 {
                    50.0
                } else {
                    100.0
                }
            } else {
                100.0 * pos / (pos + neg)
            })
        })
        .collect()
}

pub fn cci(c: &[Candle], p: usize) -> Line {
    let t: Vec<f64> = c.iter().map(tp).collect();
    (0..c.len())
        .map(|i| {
            if i + 1 < p {
                return None;
            }
            let w = &t[i + 1 - p..=i];
            let m = window_mean(w);
            let mad = w.iter().map(|v| (v - m).abs()).sum::<f64>() / p as f64;
            Some(if mad == 0.0 { 0.0 } else { (t[i] - m) / (0.015 * mad) })
        })
        .collect()
}

pub fn williams_r(c: &[Candle], p: usize) -> Line {
    (0..c.len())
        .map(|i| {
            if i + 1 < p {
                return None;
            }
            let w = &c[i + 1 - p..=i];
            let hh = w.iter().map(|b| b.high).fold(f64::MIN, f64::max);
            let ll = w.iter().map(|b| b.low).fold(f64::MAX, f64::min);
            Some(if hh == ll { 0.0 } else { (c[i].close - hh) / (hh - ll) * 100.0 })
        })
        .collect()
}

/// ADX with Wilder's original running-sum smoothing for TR and DM (the DI
/// ratios are scale-free, so this must agree with the mean-based form).
pub fn adx(c: &[Candle], p: usize) -> Line {
    let n = c.len();
    let tr = true_ranges(c);
    let mut pdm = vec![0.0; n];
    let mut mdm = vec![0.0; n];
    for i in 1..n {
        let up = c[i].high - c[i - 1].high;
        let down = c[i - 1].low - c[i].low;
        if up > down && up > 0.0 {
            pdm[i] = up;
        }
        if down > up && down > 0.0 {
            mdm[i] = down;
        }
    }
    let mut dx = vec![None; n];
    if p < n {
        let (mut s_tr, mut s_p, mut s_m) = (0.0, 0.0, 0.0);
        for i in 1..=p {
            s_tr += tr[i];
            s_p += pdm[i];
            s_m += mdm[i];
        }
        for i in p..n {
            if i > p {
                s_tr = s_tr - s_tr / p as f64 + tr[i];
                s_p = s_p - s_p / p as f64 + pdm[i];
                s_m = s_m - s_m / p as f64 + mdm[i];
            }
            let (pdi, mdi) = if s_tr == 0.0 { (0.0, 0.0) } else { (100.0 * s_p / s_tr, 100.0 * s_m / s_tr) };
            dx[i] = Some(if pdi + mdi == 0.0 { 0.0 } else { 100.0 * (pdi - mdi).abs() / (pdi + mdi) });
        }
    }
    let dense: Vec<f64> = dx.iter().map(|v| v.unwrap_or(0.0)).collect();
    wilder_from(&dense, p, p)
}

#[allow(clippy::needless_range_loop)]
pub fn kst(c: &[Candle]) -> Line {
    let x = closes(c);
    let rocs = [10usize, 15, 20, 30];
    let smas = [10usize, 10, 10, 15];
    let mut out = vec![None; x.len()];
    for i in 0..x.len() {
        let mut total = 0.0;
        let mut ok = true;
        for leg in 0..4 {
            let (r, s) = (rocs[leg], smas[leg]);
            if i + 1 < r + s {
                ok = false;
                break;
            }
            let mut acc = 0.0;
            for j in i + 1 - s..=i {
                acc += (x[j] - x[j - r]) / x[j - r] * 100.0;
            }
            total += (leg + 1) as f64 * acc / s as f64;
        }
        if ok {
            out[i] = Some(total);
        }
    }
    out
}

/// Bucket volumes of `bars`: buckets found by scanning edges upward.
pub fn volume_histogram(bars: &[Candle], buckets: usize) -> (f64, f64, Vec<f64>) {
    let lo = bars.iter().map(|b| b.low).fold(f64::MAX, f64::min);
    let hi = bars.iter().map(|b| b.high).fold(f64::MIN, f64::max);
    let mut vols = vec![0.0; buckets];
    let w = (hi - lo) / buckets as f64;
    for b in bars {
        let price = tp(b);
        let mut j = 0;
        if hi > lo {
            while j + 1 < buckets && price >= lo + (j + 1) as f64 * w {
                j += 1;
            }
        }
        vols[j] += b.volume;
    }
    (lo, hi, vols)
}

pub fn vpvr(c: &[Candle], p: usize, buckets: usize) -> Line {
    (0..c.len())
        .map(|i| {
            if i + 1 < p {
                return None;
            }
            let (lo, hi, vols) = volume_histogram(&c[i + 1 - p..=i], buckets);
            let max = vols.iter().cloned().fold(f64::MIN, f64::max);
            let j = vols.iter().position(|v| *v == max).unwrap();
            Some(lo + (hi - lo) / buckets as f64 * (j as f64 + 0.5))
        })
        .collect()
}

/// Relative comparison with a unit floor: `|a-b| <= tol * max(1, |a|, |b|)`.
pub fn close_enough(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Compares two aligned lines; returns the first mismatching index.
pub fn first_mismatch(actual: &[Option<f64>], expected: &[Option<f64>], tol: f64) -> Option<usize> {
    if actual.len() != expected.len() {
        return Some(actual.len().min(expected.len()));
    }
    actual.iter().zip(expected).position(|(a, e)| match (a, e) {
        (Some(a), Some(e)) => !close_enough(*a, *e, tol),
        (None, None) => false,
        _ => true,
    })
}
