//! Block-wise recovery of frame sequences and audio streams, where each block
//! is solved with weights built from the coefficients of earlier decoded
//! blocks.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{build_weights, SupportSet, WeightVector};
use crate::operators::{restriction_operator, Dct1d, Dct2d, Synthesis};
use crate::rng::{derive_seed, seeded};
use crate::solver::{solve_weighted_bpdn, SolveOptions};

/// Quality reported for an exact reconstruction.
pub const QUALITY_CAP_DB: f64 = 300.0;

/// Equal-sized 8-bit grayscale frames, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    height: usize,
    width: usize,
    frames: Vec<Vec<u8>>,
}

impl FrameSequence {
    pub fn new(height: usize, width: usize, frames: Vec<Vec<u8>>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::domain(format!("frame size {height}x{width} must be positive")));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.len() != height * width {
                return Err(Error::domain(format!(
                    "frame {i} has {} pixels, expected {}",
                    f.len(),
                    height * width
                )));
            }
        }
        Ok(FrameSequence { height, width, frames })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[u8] {
        &self.frames[i]
    }

    pub fn frames(&self) -> &[Vec<u8>] {
        &self.frames
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioStream {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioStream {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::domain("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("sample {i} is not finite")));
        }
        Ok(AudioStream { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamingPolicy {
    /// Measurement fraction of the first frame (video).
    pub n0_fraction: f64,
    /// Measurement fraction of later frames (video) and of the whole stream
    /// (audio).
    pub nj_fraction: f64,
    pub omega: f64,
    /// Share of AC energy the video support rule keeps.
    pub energy_fraction: f64,
    /// Audio: DCT bins at or below this frequency join the estimate.
    pub lowfreq_cutoff_hz: f64,
    /// Audio: the `n_j / divisor` largest coefficients of the previous block
    /// join the estimate.
    pub prev_topk_divisor: usize,
}

impl Default for StreamingPolicy {
    fn default() -> Self {
        StreamingPolicy {
            n0_fraction: 0.5,
            nj_fraction: 1.0 / 2.2,
            omega: 0.5,
            energy_fraction: 0.97,
            lowfreq_cutoff_hz: 4000.0,
            prev_topk_divisor: 16,
        }
    }
}

impl StreamingPolicy {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n0_fraction", self.n0_fraction),
            ("nj_fraction", self.nj_fraction),
            ("energy_fraction", self.energy_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::domain(format!("{name} = {v} must lie in (0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::domain(format!("omega = {} outside [0, 1]", self.omega)));
        }
        if !(self.lowfreq_cutoff_hz >= 0.0) || !self.lowfreq_cutoff_hz.is_finite() {
            return Err(Error::domain(format!(
                "cutoff {} Hz must be finite and >= 0",
                self.lowfreq_cutoff_hz
            )));
        }
        if self.prev_topk_divisor == 0 {
            return Err(Error::domain("prev_topk_divisor must be at least 1"));
        }
        Ok(())
    }
}

/// Smallest index set outside `exclude`, taken greedily by decreasing
/// `|c|²` (ties to the lower index), whose energy reaches `fraction` of the
/// energy outside `exclude`.
pub fn energy_support(coeffs: &[f64], fraction: f64, exclude: &SupportSet) -> Result<SupportSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::domain(format!("energy fraction {fraction} must lie in (0, 1]")));
    }
    if exclude.ambient_dim() != coeffs.len() {
        return Err(Error::Dimension {
            context: "excluded set",
            expected: coeffs.len(),
            actual: exclude.ambient_dim(),
        });
    }
    let mask = exclude.mask();
    let mut order: Vec<usize> = (0..coeffs.len()).filter(|&i| !mask[i] && coeffs[i] != 0.0).collect();
    order.sort_by(|&a, &b| (coeffs[b] * coeffs[b]).total_cmp(&(coeffs[a] * coeffs[a])));
    // summing in the same order makes the last partial sum equal the total
    let total: f64 = order.iter().map(|&i| coeffs[i] * coeffs[i]).sum();
    let mut picked = Vec::new();
    if total > 0.0 {
        let target = fraction * total;
        let mut acc = 0.0;
        for &i in &order {
            picked.push(i);
            acc += coeffs[i] * coeffs[i];
            if acc >= target {
                break;
            }
        }
    }
    SupportSet::new(picked, coeffs.len())
}

/// `10·log10(N·255² / ‖x − x̂‖²)` over `N` pixels, capped.
pub fn psnr_db(frame: &[f64], recovered: &[f64]) -> Result<f64> {
    if frame.len() != recovered.len() {
        return Err(Error::Dimension {
            context: "recovered frame",
            expected: frame.len(),
            actual: recovered.len(),
        });
    }
    if frame.is_empty() {
        return Err(Error::domain("PSNR of an empty frame"));
    }
    let err: f64 = frame.iter().zip(recovered).map(|(a, b)| (a - b) * (a - b)).sum();
    if err == 0.0 {
        return Ok(QUALITY_CAP_DB);
    }
    let peak = frame.len() as f64 * 255.0 * 255.0;
    Ok((10.0 * (peak / err).log10()).min(QUALITY_CAP_DB))
}

/// SNR in dB clamped to `±QUALITY_CAP_DB`; a zero signal recovered exactly
/// scores the cap.
pub fn stream_snr_db(x: &[f64], recovered: &[f64]) -> Result<f64> {
    if x.len() != recovered.len() {
        return Err(Error::Dimension {
            context: "recovered stream",
            expected: x.len(),
            actual: recovered.len(),
        });
    }
    let signal: f64 = x.iter().map(|v| v * v).sum();
    let err: f64 = x.iter().zip(recovered).map(|(a, b)| (a - b) * (a - b)).sum();
    if err == 0.0 {
        return Ok(QUALITY_CAP_DB);
    }
    Ok((10.0 * (signal / err).log10()).clamp(-QUALITY_CAP_DB, QUALITY_CAP_DB))
}

fn count_for(len: usize, fraction: f64) -> usize {
    ((len as f64 * fraction).round() as usize).clamp(1, len)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoBlock {
    pub n_meas: usize,
    /// Kept pixel positions within the block, row-major.
    pub kept: Vec<usize>,
    /// Support estimate used for this block (empty on the first frame).
    pub estimate: SupportSet,
    /// Recovered 2-D DCT coefficients.
    pub coeffs: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoFrame {
    pub index: usize,
    pub n_meas: usize,
    /// Weight applied on the estimate (1 on the first frame).
    pub omega: f64,
    pub psnr_db: f64,
    /// Reconstruction clipped to `[0, 255]`, row-major.
    pub recovered: Vec<f64>,
    /// Quadrants in order top-left, top-right, bottom-left, bottom-right.
    pub blocks: Vec<VideoBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoResult {
    pub frames: Vec<VideoFrame>,
}

impl VideoResult {
    /// Mean PSNR over frames `from..` (0-based).
    pub fn mean_psnr_from(&self, from: usize) -> f64 {
        let tail = &self.frames[from.min(self.frames.len())..];
        tail.iter().map(|f| f.psnr_db).sum::<f64>() / tail.len().max(1) as f64
    }
}

fn quadrant_origin(q: usize, bh: usize, bw: usize) -> (usize, usize) {
    ((q / 2) * bh, (q % 2) * bw)
}

fn extract_block(frame: &[u8], width: usize, q: usize, bh: usize, bw: usize) -> Vec<f64> {
    let (r0, c0) = quadrant_origin(q, bh, bw);
    let mut out = Vec::with_capacity(bh * bw);
    for r in 0..bh {
        let start = (r0 + r) * width + c0;
        out.extend(frame[start..start + bw].iter().map(|&p| p as f64));
    }
    out
}

/// Estimate for a later frame: DC plus the high-energy AC locations of the
/// previous one or two decoded blocks.
pub fn video_support_rule(prev: &[&[f64]], energy_fraction: f64) -> Result<SupportSet> {
    let len = prev.first().map_or(0, |c| c.len());
    let dc = SupportSet::new(vec![0], len)?;
    let mut est = dc.clone();
    for coeffs in prev {
        est = est.union(&energy_support(coeffs, energy_fraction, &dc)?);
    }
    Ok(est)
}

pub fn video_pipeline(seq: &FrameSequence, policy: &StreamingPolicy, seed: u64) -> Result<VideoResult> {
    video_pipeline_with(seq, policy, seed, &SolveOptions::default())
}

/// Frame 0 is recovered by standard ℓ1 from `n0` samples per quadrant; every
/// later frame uses `nj` samples and weight `ω` on the estimate from the
/// previous two decoded frames. Sample positions depend on `seed`, the frame
/// and the quadrant only.
pub fn video_pipeline_with(
    seq: &FrameSequence,
    policy: &StreamingPolicy,
    seed: u64,
    opts: &SolveOptions,
) -> Result<VideoResult> {
    policy.validate()?;
    let (h, w) = (seq.height, seq.width);
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::domain(format!("frame size {h}x{w} must be even in both directions")));
    }
    let (bh, bw) = (h / 2, w / 2);
    let block_len = bh * bw;
    let dct = Dct2d::new(bh, bw)?;
    let mut frames: Vec<VideoFrame> = Vec::with_capacity(seq.len());
    for (j, frame) in seq.frames.iter().enumerate() {
        let (fraction, omega) = if j == 0 {
            (policy.n0_fraction, 1.0)
        } else {
            (policy.nj_fraction, policy.omega)
        };
        let n = count_for(block_len, fraction);
        let blocks: Vec<VideoBlock> = (0..4)
            .into_par_iter()
            .map(|q| -> Result<VideoBlock> {
                let truth = extract_block(frame, w, q, bh, bw);
                let mut rng = seeded(derive_seed(seed, &[j as u64, q as u64]));
                let mut kept = index::sample(&mut rng, block_len, n).into_vec();
                kept.sort_unstable();
                let estimate = if j == 0 {
                    SupportSet::empty(block_len)
                } else {
                    let prev: Vec<&[f64]> = frames[j.saturating_sub(2)..j]
                        .iter()
                        .rev()
                        .map(|f| f.blocks[q].coeffs.as_slice())
                        .collect();
                    video_support_rule(&prev, policy.energy_fraction)?
                };
                let weights = if j == 0 {
                    WeightVector::ones(block_len)
                } else {
                    build_weights(&estimate, omega, block_len)?
                };
                let op = restriction_operator(&kept, Synthesis::Dct2d(dct.clone()))?;
                let y: Vec<f64> = kept.iter().map(|&i| truth[i]).collect();
                let rep = solve_weighted_bpdn(&op, &y, &weights, 0.0, opts)?;
                Ok(VideoBlock {
                    n_meas: n,
                    kept,
                    estimate,
                    coeffs: rep.solution.into_vec(),
                    converged: rep.converged,
                })
            })
            .collect::<Result<_>>()?;
        let mut recovered = vec![0.0; h * w];
        for (q, b) in blocks.iter().enumerate() {
            let mut pix = b.coeffs.clone();
            dct.inverse_in_place(&mut pix);
            let (r0, c0) = quadrant_origin(q, bh, bw);
            for r in 0..bh {
                for c in 0..bw {
                    recovered[(r0 + r) * w + c0 + c] = pix[r * bw + c].clamp(0.0, 255.0);
                }
            }
        }
        let truth: Vec<f64> = frame.iter().map(|&p| p as f64).collect();
        frames.push(VideoFrame {
            index: j,
            n_meas: 4 * n,
            omega,
            psnr_db: psnr_db(&truth, &recovered)?,
            recovered,
            blocks,
        });
    }
    Ok(VideoResult { frames })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBlock {
    pub block: usize,
    pub n_meas: usize,
    pub omega: f64,
    pub snr_db: f64,
    pub estimate: SupportSet,
    pub coeffs: Vec<f64>,
    pub converged: bool,
    /// No samples fell in this block; it was left at zero.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioResult {
    pub omega: f64,
    pub blocks: Vec<AudioBlock>,
    /// Recovered samples (the input truncated to whole blocks).
    pub recovered: Vec<f64>,
    pub snr_db: f64,
}

/// Highest DCT bin index whose frequency `i·fs/(2N)` stays at or below the
/// cutoff, or `None` if even bin 0 is excluded.
pub fn lowfreq_bins(block_len: usize, sample_rate: u32, cutoff_hz: f64) -> Option<usize> {
    if cutoff_hz < 0.0 {
        return None;
    }
    let last = (cutoff_hz * 2.0 * block_len as f64 / sample_rate as f64).floor() as usize;
    Some(last.min(block_len - 1))
}

fn top_magnitudes(coeffs: &[f64], count: usize) -> Result<SupportSet> {
    let mut order: Vec<usize> = (0..coeffs.len()).filter(|&i| coeffs[i] != 0.0).collect();
    order.sort_by(|&a, &b| coeffs[b].abs().total_cmp(&coeffs[a].abs()));
    order.truncate(count);
    SupportSet::new(order, coeffs.len())
}

/// Kept sample positions over the whole (truncated) stream.
pub fn audio_sample_positions(total: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let count = ((total as f64 * fraction).round() as usize).min(total);
    let mut rng = seeded(derive_seed(seed, &[0xa0d10]));
    let mut kept = index::sample(&mut rng, total, count).into_vec();
    kept.sort_unstable();
    kept
}

pub fn audio_pipeline(
    stream: &AudioStream,
    block_len: usize,
    policy: &StreamingPolicy,
    seed: u64,
) -> Result<AudioResult> {
    audio_pipeline_with(stream, block_len, policy, seed, &SolveOptions::default())
}

/// Keeps a uniformly random `nj_fraction` of the samples, then recovers each
/// block in order with the estimate formed by the low-frequency bins and the
/// largest coefficients of the previous recovered block.
pub fn audio_pipeline_with(
    stream: &AudioStream,
    block_len: usize,
    policy: &StreamingPolicy,
    seed: u64,
    opts: &SolveOptions,
) -> Result<AudioResult> {
    policy.validate()?;
    if block_len == 0 {
        return Err(Error::domain("block length must be positive"));
    }
    let n_blocks = stream.len() / block_len;
    let total = n_blocks * block_len;
    let truth = &stream.samples[..total];
    let kept = audio_sample_positions(total, policy.nj_fraction, seed);
    let dct = Dct1d::new(block_len)?;
    let low = match lowfreq_bins(block_len, stream.sample_rate, policy.lowfreq_cutoff_hz) {
        Some(last) => SupportSet::new((0..=last).collect(), block_len)?,
        None => SupportSet::empty(block_len),
    };
    let mut blocks: Vec<AudioBlock> = Vec::with_capacity(n_blocks);
    let mut recovered = vec![0.0; total];
    let mut cursor = 0;
    for b in 0..n_blocks {
        let start = b * block_len;
        let first = cursor;
        while cursor < kept.len() && kept[cursor] < start + block_len {
            cursor += 1;
        }
        let local: Vec<usize> = kept[first..cursor].iter().map(|&i| i - start).collect();
        let n = local.len();
        let estimate = match blocks.last() {
            Some(prev) => low.union(&top_magnitudes(&prev.coeffs, n / policy.prev_topk_divisor)?),
            None => low.clone(),
        };
        let block_truth = &truth[start..start + block_len];
        let (coeffs, converged) = if n == 0 {
            (vec![0.0; block_len], false)
        } else {
            let weights = build_weights(&estimate, policy.omega, block_len)?;
            let op = restriction_operator(&local, Synthesis::Dct1d(dct.clone()))?;
            let y: Vec<f64> = local.iter().map(|&i| block_truth[i]).collect();
            let rep = solve_weighted_bpdn(&op, &y, &weights, 0.0, opts)?;
            (rep.solution.into_vec(), rep.converged)
        };
        let samples = dct.inverse(&coeffs)?;
        recovered[start..start + block_len].copy_from_slice(&samples);
        blocks.push(AudioBlock {
            block: b,
            n_meas: n,
            omega: policy.omega,
            snr_db: stream_snr_db(block_truth, &samples)?,
            estimate,
            coeffs,
            converged,
            empty: n == 0,
        });
    }
    Ok(AudioResult {
        omega: policy.omega,
        snr_db: stream_snr_db(truth, &recovered)?,
        blocks,
        recovered,
    })
}

/// Runs the audio pipeline once per weight with identical sample positions.
pub fn audio_omega_sweep(
    stream: &AudioStream,
    block_len: usize,
    policy: &StreamingPolicy,
    omegas: &[f64],
    seed: u64,
    opts: &SolveOptions,
) -> Result<Vec<AudioResult>> {
    omegas
        .iter()
        .map(|&omega| {
            let p = StreamingPolicy {
                omega,
                ..policy.clone()
            };
            audio_pipeline_with(stream, block_len, &p, seed, opts)
        })
        .collect()
}

pub const VIDEO_METRICS_HEADER: &str = "index,n_meas,omega,psnr_db";
pub const AUDIO_METRICS_HEADER: &str = "block,n_meas,omega,snr_db";

pub fn write_video_metrics<W: Write>(result: &VideoResult, mut out: W) -> Result<()> {
    let mut buf = format!("{VIDEO_METRICS_HEADER}\n");
    for f in &result.frames {
        writeln!(buf, "{},{},{:.6},{:.6}", f.index, f.n_meas, f.omega, f.psnr_db).expect("formatting into a String");
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

/// One row per block per run, runs in the given order.
pub fn write_audio_metrics<W: Write>(results: &[AudioResult], mut out: W) -> Result<()> {
    let mut buf = format!("{AUDIO_METRICS_HEADER}\n");
    for r in results {
        for b in &r.blocks {
            writeln!(buf, "{},{},{:.6},{:.6}", b.block, b.n_meas, b.omega, b.snr_db).expect("formatting into a String");
        }
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

// ---- file formats ----

fn le_u16(bytes: &[u8], at: usize) -> Result<u16> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| Error::format(at as u64, "unexpected end of file"))
}

fn le_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(at as u64, "unexpected end of file"))
}

fn tag(bytes: &[u8], at: usize) -> Result<&[u8]> {
    bytes
        .get(at..at + 4)
        .ok_or_else(|| Error::format(at as u64, "unexpected end of file"))
}

/// Parses a RIFF/WAVE file holding 16-bit mono PCM.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioStream> {
    if tag(bytes, 0)? != b"RIFF" {
        return Err(Error::format(0, "missing RIFF tag"));
    }
    if tag(bytes, 8)? != b"WAVE" {
        return Err(Error::format(8, "missing WAVE tag"));
    }
    let mut at = 12;
    let mut rate = None;
    while at < bytes.len() {
        let id = tag(bytes, at)?;
        let size = le_u32(bytes, at + 4)? as usize;
        let body = at + 8;
        if body + size > bytes.len() {
            return Err(Error::format(
                (at + 4) as u64,
                format!("chunk size {size} runs past the end of the file"),
            ));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::format((at + 4) as u64, format!("fmt chunk too short ({size} bytes)")));
                }
                let format = le_u16(bytes, body)?;
                if format != 1 {
                    return Err(Error::format(body as u64, format!("audio format {format} is not PCM")));
                }
                let channels = le_u16(bytes, body + 2)?;
                if channels != 1 {
                    return Err(Error::format(
                        (body + 2) as u64,
                        format!("{channels} channels; only mono is supported"),
                    ));
                }
                let sr = le_u32(bytes, body + 4)?;
                if sr == 0 {
                    return Err(Error::format((body + 4) as u64, "sample rate is zero"));
                }
                let bits = le_u16(bytes, body + 14)?;
                if bits != 16 {
                    return Err(Error::format(
                        (body + 14) as u64,
                        format!("{bits} bits per sample; only 16 is supported"),
                    ));
                }
                rate = Some(sr);
            }
            b"data" => {
                let Some(sr) = rate else {
                    return Err(Error::format(at as u64, "data chunk before fmt chunk"));
                };
                if !size.is_multiple_of(2) {
                    return Err(Error::format((at + 4) as u64, "odd data size for 16-bit samples"));
                }
                let samples = bytes[body..body + size]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
                    .collect();
                return AudioStream::new(samples, sr);
            }
            _ => {}
        }
        // chunks are padded to even length
        at = body + size + (size & 1);
    }
    Err(Error::format(
        bytes.len() as u64,
        if rate.is_some() { "no data chunk" } else { "no fmt chunk" },
    ))
}

/// Encodes 16-bit mono PCM; samples are scaled by 32768, rounded and clipped.
pub fn encode_wav(stream: &AudioStream) -> Vec<u8> {
    let data_len = 2 * stream.samples.len();
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&stream.sample_rate.to_le_bytes());
    out.extend_from_slice(&(stream.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &v in &stream.samples {
        let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn read_wav(path: &Path) -> Result<AudioStream> {
    parse_wav(&fs::read(path)?)
}

pub fn write_wav(stream: &AudioStream, path: &Path) -> Result<()> {
    fs::write(path, encode_wav(stream))?;
    Ok(())
}

/// Reads `count` planar 8-bit frames of `height × width` pixels.
pub fn read_raw_frames(path: &Path, height: usize, width: usize, count: usize) -> Result<FrameSequence> {
    let bytes = fs::read(path)?;
    let frame_len = height * width;
    let need = frame_len * count;
    if bytes.len() < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!("file ends after {} bytes, {count} frames need {need}", bytes.len()),
        ));
    }
    let frames = bytes[..need].chunks_exact(frame_len.max(1)).map(<[u8]>::to_vec).collect();
    FrameSequence::new(height, width, frames)
}

pub fn write_raw_frames(seq: &FrameSequence, path: &Path) -> Result<()> {
    fs::write(path, seq.frames.concat())?;
    Ok(())
}

// ---- synthetic inputs ----

/// Correlated grayscale sequence: every quadrant is a mean level plus a
/// cosine-sparse texture whose support changes by a few low-frequency atoms
/// per frame and whose amplitudes follow a slow random walk.
pub fn synthetic_video(height: usize, width: usize, count: usize, sparsity: f64, seed: u64) -> Result<FrameSequence> {
    if !height.is_multiple_of(2) || !width.is_multiple_of(2) || height == 0 || width == 0 {
        return Err(Error::domain(format!("frame size {height}x{width} must be even and positive")));
    }
    if !(sparsity > 0.0 && sparsity < 1.0) {
        return Err(Error::domain(format!("sparsity fraction {sparsity} must lie in (0, 1)")));
    }
    let (bh, bw) = (height / 2, width / 2);
    let block_len = bh * bw;
    let atoms = ((block_len as f64 * sparsity).round() as usize).clamp(1, block_len - 1);
    let dct = Dct2d::new(bh, bw)?;
    let mut rng = seeded(seed);
    // low frequencies are likelier, as in natural images
    let draw_index = |rng: &mut crate::rng::Rng| -> usize {
        loop {
            let r = (rng.random::<f64>().powi(2) * bh as f64) as usize;
            let c = (rng.random::<f64>().powi(2) * bw as f64) as usize;
            let i = r.min(bh - 1) * bw + c.min(bw - 1);
            if i != 0 {
                return i;
            }
        }
    };
    struct Quad {
        mean: f64,
        support: Vec<usize>,
        amps: Vec<f64>,
    }
    let amp_scale = 2.0 * (block_len as f64).sqrt();
    let mut quads: Vec<Quad> = (0..4)
        .map(|_| {
            let mean = 96.0 + 64.0 * rng.random::<f64>();
            let mut support = Vec::with_capacity(atoms);
            while support.len() < atoms {
                let i = draw_index(&mut rng);
                if !support.contains(&i) {
                    support.push(i);
                }
            }
            let amps = (0..atoms)
                .map(|_| amp_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Quad { mean, support, amps }
        })
        .collect();
    let swaps = (atoms / 20).max(1);
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        let mut frame = vec![0u8; height * width];
        for (q, quad) in quads.iter().enumerate() {
            let mut coeffs = vec![0.0; block_len];
            coeffs[0] = quad.mean * (block_len as f64).sqrt();
            for (&i, &a) in quad.support.iter().zip(&quad.amps) {
                coeffs[i] = a;
            }
            dct.inverse_in_place(&mut coeffs);
            let (r0, c0) = quadrant_origin(q, bh, bw);
            for r in 0..bh {
                for c in 0..bw {
                    frame[(r0 + r) * width + c0 + c] = coeffs[r * bw + c].round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        frames.push(frame);
        for quad in quads.iter_mut() {
            for a in quad.amps.iter_mut() {
                *a = 0.95 * *a + 0.3 * amp_scale * rng.sample::<f64, _>(StandardNormal);
            }
            for _ in 0..swaps {
                let slot = rng.random_range(0..atoms);
                let i = draw_index(&mut rng);
                if !quad.support.contains(&i) {
                    quad.support[slot] = i;
                    quad.amps[slot] = amp_scale * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
    }
    FrameSequence::new(height, width, frames)
}

/// Speech-like test signal built block by block in the DCT domain: a few
/// drifting spectral peaks concentrated at low frequency over a decaying
/// background.
pub fn synthetic_audio(block_len: usize, blocks: usize, sample_rate: u32, seed: u64) -> Result<AudioStream> {
    if block_len < 8 {
        return Err(Error::domain(format!("block length {block_len} is too short")));
    }
    let dct = Dct1d::new(block_len)?;
    let mut rng = seeded(seed);
    let peaks = 6;
    // centres mostly below 2 kHz
    let max_bin = (2000.0 * 2.0 * block_len as f64 / sample_rate as f64).max(4.0);
    let mut centres: Vec<f64> = (0..peaks).map(|_| 2.0 + rng.random::<f64>() * max_bin).collect();
    let mut gains: Vec<f64> = (0..peaks).map(|_| 0.5 + rng.random::<f64>()).collect();
    let mut samples = Vec::with_capacity(block_len * blocks);
    for _ in 0..blocks {
        let mut coeffs = vec![0.0; block_len];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let tail = 0.02 * ((i + 1) as f64).powf(-1.2);
            *c = tail * rng.sample::<f64, _>(StandardNormal);
        }
        for (&centre, &gain) in centres.iter().zip(&gains) {
            let base = centre.round() as isize;
            for d in -2isize..=2 {
                let i = base + d;
                if i >= 0 && (i as usize) < block_len {
                    let shape = 1.0 / (1.0 + (d * d) as f64);
                    coeffs[i as usize] += gain * shape * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        samples.extend(dct.inverse(&coeffs)?);
        for c in centres.iter_mut() {
            *c = (*c + rng.random_range(-1.0..1.0)).clamp(1.0, max_bin);
        }
        for g in gains.iter_mut() {
            *g = (*g * (1.0 + 0.1 * rng.sample::<f64, _>(StandardNormal))).clamp(0.2, 2.0);
        }
    }
    // keep within 16-bit range
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        samples.iter_mut().for_each(|v| *v *= 0.9 / peak);
    }
    AudioStream::new(samples, sample_rate)
}
