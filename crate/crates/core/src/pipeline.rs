//! Sender and receiver.
//!
//! The sender transmits `z = Qw`. The receiver gets `z̄ = z + x̄`, forms
//! `b = A z̄ = A x̄` (as `AQ ≈ 0`), estimates `x′` by ℓ1 minimization over
//! `{x : A x = b}` (or `{x : TA x = Tb}` for a projector `T`), and rounds
//! the least-squares solution of `Q w = z̄ − x′` to a binary vector.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelModel;
use crate::codec::{self, BitMessage, CodecError};
use crate::linalg::{self, LinalgError, Vector};
use crate::lp::{self, BasisPursuit, LpError, LpStatus, SolverOptions};
use crate::matgen::CodeKey;
use crate::rproj::{self, JllParams, ProjectionError, Projector, ProjectorMeta};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("message has {got} bits but the key encodes {expected}")]
    MessageLengthMismatch { expected: usize, got: usize },
    #[error("received vector has dim {got}, key expects {expected}")]
    CodewordLengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Original,
    Projected,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Projected => "projected",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecodeReport {
    pub decoded_text: String,
    /// Character errors against the original, when the caller knows it.
    pub char_errors: Option<usize>,
    pub variant: Variant,
    pub lp_status: LpStatus,
    pub lp_iterations: usize,
    /// Time spent in the LP solver only.
    pub solve_seconds: f64,
    pub total_seconds: f64,
    pub projector_meta: Option<ProjectorMeta>,
    /// The estimated error vector `x′`.
    #[serde(skip)]
    pub recovered_error: Vec<f64>,
}

/// `z = Q w` for the bits `w` of `text`.
pub fn encode(key: &CodeKey, text: &str) -> Result<Vector> {
    let bits = codec::string_to_bits(text)?;
    encode_bits(key, &bits)
}

pub fn encode_bits(key: &CodeKey, bits: &BitMessage) -> Result<Vector> {
    if bits.len() != key.message_bits() {
        return Err(PipelineError::MessageLengthMismatch {
            expected: key.message_bits(),
            got: bits.len(),
        });
    }
    let w = Vector::new(bits.to_f64())?;
    Ok(linalg::matvec(key.q(), &w)?)
}

/// A fresh projector for the key's decoder, sized for its `n` columns
/// plus the right-hand side.
pub fn projector_for_key(key: &CodeKey, params: &JllParams, seed: u64) -> Result<Projector> {
    Ok(rproj::sample_for_points(
        key.code_length() + 1,
        key.decoder_rows(),
        params,
        seed,
    )?)
}

/// The ℓ1 program the receiver solves for `z̄`.
pub fn decoder_lp(key: &CodeKey, z_bar: &Vector, projector: Option<&Projector>) -> Result<BasisPursuit> {
    if z_bar.dim() != key.code_length() {
        return Err(PipelineError::CodewordLengthMismatch {
            expected: key.code_length(),
            got: z_bar.dim(),
        });
    }
    let b = linalg::matvec(key.a(), z_bar)?;
    Ok(match projector {
        Some(t) => {
            let (ta, tb) = rproj::project_lp_data(t, key.a(), &b)?;
            lp::build_basis_pursuit(&ta, &tb)?
        }
        None => lp::build_basis_pursuit(key.a(), &b)?,
    })
}

pub fn decode(key: &CodeKey, z_bar: &Vector, projector: Option<&Projector>, solver: &SolverOptions) -> Result<DecodeReport> {
    let start = Instant::now();
    let bp = decoder_lp(key, z_bar, projector)?;
    let solve_start = Instant::now();
    let sol = lp::solve_lp(bp.lp(), solver)?;
    let solve_seconds = solve_start.elapsed().as_secs_f64();

    let x = bp.signal(&sol);
    let z_prime = z_bar.sub(&x)?;
    let w = linalg::round_cap(&linalg::pseudoinverse_apply(key.q(), &z_prime)?, 0.0, 1.0);
    let decoded_text = codec::bits_to_string(&BitMessage::from_binary_reals(&w)?);
    Ok(DecodeReport {
        decoded_text,
        char_errors: None,
        variant: if projector.is_some() {
            Variant::Projected
        } else {
            Variant::Original
        },
        lp_status: sol.status,
        lp_iterations: sol.iterations,
        solve_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
        projector_meta: projector.map(Projector::meta),
        recovered_error: x.into_inner(),
    })
}

/// Encode, corrupt and decode `text`, scoring the result against it.
pub fn roundtrip_trial(
    key: &CodeKey,
    text: &str,
    channel: &mut ChannelModel,
    projector: Option<&Projector>,
    solver: &SolverOptions,
) -> Result<DecodeReport> {
    let start = Instant::now();
    let z = encode(key, text)?;
    let (z_bar, _) = channel.corrupt(&z);
    let mut report = decode(key, &z_bar, projector, solver)?;
    report.char_errors = Some(codec::char_distance(text, &report.decoded_text));
    report.total_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}
