#![no_main]

use libfuzzer_sys::fuzz_target;
use spikelink::modem::{ppm_demodulate, ppm_modulate, PpmConfig};

fuzz_target!(|data: &[u8]| {
    let Some((&order, body)) = data.split_first() else {
        return;
    };
    let Ok(cfg) = PpmConfig::new(order as usize % 40) else {
        return;
    };
    let slots: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Ok(bits) = ppm_demodulate(&slots, cfg) {
        if bits.is_empty() {
            return;
        }
        assert_eq!(bits.len() % cfg.bits_per_symbol(), 0);
        let again = ppm_modulate(&bits, cfg).expect("demodulated bits remodulate");
        assert_eq!(again.len(), slots.len());
    }
});
