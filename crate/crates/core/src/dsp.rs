//! Median filtering, fixed-size windowing and the 8-point DFT.

use thiserror::Error;

use crate::ingest::{Activity, LabeledSeries};
use crate::WINDOW_LEN;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("median filter width must be odd and positive, got {0}")]
    FilterWidth(usize),
    #[error("median filter width {width} too large for {len} samples")]
    WidthTooLarge { width: usize, len: usize },
    #[error("window stride must be at least 1")]
    ZeroStride,
}

/// Checks the median filter width is odd and positive.
pub fn check_filter_width(width: usize) -> Result<(), DspError> {
    if width == 0 || width.is_multiple_of(2) {
        return Err(DspError::FilterWidth(width));
    }
    Ok(())
}

/// Centered running median. Positions outside the input are filled by
/// replicating the nearest boundary value, so the output has the same length
/// as the input.
pub fn median_filter(values: &[f64], width: usize) -> Result<Vec<f64>, DspError> {
    check_filter_width(width)?;
    if values.is_empty() {
        return Ok(Vec::new());
    }
    if width > 2 * values.len() - 1 {
        return Err(DspError::WidthTooLarge { width, len: values.len() });
    }
    if width == 1 {
        return Ok(values.to_vec());
    }
    let half = (width / 2) as isize;
    let last = values.len() as isize - 1;
    let mut buf = vec![0.0; width];
    let out = (0..values.len() as isize)
        .map(|i| {
            for (slot, j) in buf.iter_mut().zip(i - half..=i + half) {
                *slot = values[j.clamp(0, last) as usize];
            }
            median_of_odd(&mut buf)
        })
        .collect();
    Ok(out)
}

/// Median of an odd-length buffer; reorders `buf`.
pub(crate) fn median_of_odd(buf: &mut [f64]) -> f64 {
    debug_assert!(buf.len() % 2 == 1);
    let mid = buf.len() / 2;
    *buf.select_nth_unstable_by(mid, f64::total_cmp).1
}

/// Exactly [`WINDOW_LEN`] consecutive readings of one axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window(pub [f64; WINDOW_LEN]);

impl Window {
    pub fn from_slice(values: &[f64]) -> Option<Window> {
        <[f64; WINDOW_LEN]>::try_from(values).ok().map(Window)
    }

    pub fn values(&self) -> &[f64; WINDOW_LEN] {
        &self.0
    }
}

/// Time-aligned windows of the three axes.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowTriple {
    pub start: usize,
    pub axes: [Window; 3],
    pub label: Option<Activity>,
}

/// Most frequent label; ties go to the smallest activity code.
pub fn majority_label(labels: &[Activity]) -> Option<Activity> {
    let mut counts = [0usize; Activity::COUNT];
    for l in labels {
        counts[l.index()] += 1;
    }
    argmax_smallest(&counts).filter(|&i| counts[i] > 0).and_then(|i| Activity::from_code(i as u8))
}

/// Index of the first maximum.
pub(crate) fn argmax_smallest(counts: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &c) in counts.iter().enumerate() {
        if best.is_none_or(|b| c > counts[b]) {
            best = Some(i);
        }
    }
    best
}

/// Cuts a series into windows starting every `stride` samples. A trailing
/// partial window is dropped.
pub fn window_triples(series: &LabeledSeries, stride: usize) -> Result<Vec<WindowTriple>, DspError> {
    let axes = [series.axis(0), series.axis(1), series.axis(2)];
    windows_from_axes(&axes, series.labels(), stride)
}

pub(crate) fn windows_from_axes(
    axes: &[Vec<f64>; 3],
    labels: Option<&[Activity]>,
    stride: usize,
) -> Result<Vec<WindowTriple>, DspError> {
    if stride == 0 {
        return Err(DspError::ZeroStride);
    }
    let n = axes[0].len();
    if n < WINDOW_LEN {
        return Ok(Vec::new());
    }
    let triples = (0..=n - WINDOW_LEN)
        .step_by(stride)
        .map(|start| {
            let end = start + WINDOW_LEN;
            let win = |a: usize| Window::from_slice(&axes[a][start..end]).expect("window length");
            WindowTriple {
                start,
                axes: [win(0), win(1), win(2)],
                label: labels.and_then(|l| majority_label(&l[start..end])),
            }
        })
        .collect();
    Ok(triples)
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Complex {
    re: f64,
    im: f64,
}

impl Complex {
    fn add(self, o: Complex) -> Complex {
        Complex { re: self.re + o.re, im: self.im + o.im }
    }

    fn sub(self, o: Complex) -> Complex {
        Complex { re: self.re - o.re, im: self.im - o.im }
    }

    fn mul(self, o: Complex) -> Complex {
        Complex { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }

    fn norm(self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Bin magnitudes |X_k| of the unnormalized forward DFT
/// X_k = Σ x_n e^(-2πi kn/8), via an iterative radix-2 FFT.
pub fn dft_magnitudes(w: &Window) -> [f64; WINDOW_LEN] {
    const N: usize = WINDOW_LEN;
    const LOG2N: u32 = N.trailing_zeros();
    let mut buf = [Complex { re: 0.0, im: 0.0 }; N];
    for (n, &x) in w.0.iter().enumerate() {
        let rev = n.reverse_bits() >> (usize::BITS - LOG2N);
        buf[rev] = Complex { re: x, im: 0.0 };
    }
    let mut len = 2;
    while len <= N {
        let angle = -2.0 * std::f64::consts::PI / len as f64;
        for start in (0..N).step_by(len) {
            for k in 0..len / 2 {
                let (s, c) = (angle * k as f64).sin_cos();
                let tw = Complex { re: c, im: s };
                let a = buf[start + k];
                let b = buf[start + k + len / 2].mul(tw);
                buf[start + k] = a.add(b);
                buf[start + k + len / 2] = a.sub(b);
            }
        }
        len <<= 1;
    }
    buf.map(Complex::norm)
}
