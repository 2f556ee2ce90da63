use crate::error::{invalid, shape, Result};

/// Pulse-position modulation of order M (a power of two ≥ 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PpmConfig {
    order: usize,
}

impl PpmConfig {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(invalid(format!(
                "PPM order must be a power of two >= 2, got {order}"
            )));
        }
        Ok(PpmConfig { order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }
}

/// Maps each big-endian chunk of log₂M bits to one M-slot frame holding a
/// single pulse. Trailing bits that do not fill a chunk are dropped.
pub fn ppm_modulate(bits: &[u8], cfg: PpmConfig) -> Result<Vec<u8>> {
    let k = cfg.bits_per_symbol();
    if bits.len() < k {
        return Err(invalid(format!(
            "PPM-{} needs at least {k} bits, got {}",
            cfg.order,
            bits.len()
        )));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(invalid(format!("bit values must be 0 or 1, got {b}")));
    }
    let frames = bits.len() / k;
    let mut out = vec![0u8; frames * cfg.order];
    for (f, chunk) in bits.chunks_exact(k).enumerate() {
        let symbol = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        out[f * cfg.order + symbol] = 1;
    }
    Ok(out)
}

/// Per frame, picks the slot with the largest value (lowest index on ties,
/// so an empty frame decodes to symbol 0) and expands it big-endian.
pub fn ppm_demodulate<T: Copy + Into<f64>>(slots: &[T], cfg: PpmConfig) -> Result<Vec<u8>> {
    let m = cfg.order;
    if !slots.len().is_multiple_of(m) {
        return Err(shape(format!(
            "{} slots is not a multiple of PPM order {m}",
            slots.len()
        )));
    }
    let k = cfg.bits_per_symbol();
    let mut bits = Vec::with_capacity(slots.len() / m * k);
    for frame in slots.chunks_exact(m) {
        let mut best = 0;
        let mut best_v: f64 = frame[0].into();
        for (i, &v) in frame.iter().enumerate().skip(1) {
            let v: f64 = v.into();
            if v > best_v {
                best = i;
                best_v = v;
            }
        }
        bits.extend((0..k).rev().map(|j| ((best >> j) & 1) as u8));
    }
    Ok(bits)
}
