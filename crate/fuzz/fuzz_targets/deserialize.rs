#![no_main]

use libfuzzer_sys::fuzz_target;
use spikelink::modem::{deserialize, deserialize_bits};

fuzz_target!(|data: &[u8]| {
    let Some((dims, body)) = data.split_first_chunk::<3>() else {
        return;
    };
    let dims = (dims[0] as usize % 8, dims[1] as usize % 16, dims[2] as usize % 16);
    let symbols: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let _ = deserialize(&symbols, dims);
    let _ = deserialize_bits(body, dims);
});
