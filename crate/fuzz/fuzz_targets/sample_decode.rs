#![no_main]

use libfuzzer_sys::fuzz_target;
use spikelink::events::decode_sample;

fuzz_target!(|data: &[u8]| {
    let Some((dims, body)) = data.split_first_chunk::<3>() else {
        return;
    };
    let shape = [dims[0] as usize % 8, dims[1] as usize % 40, dims[2] as usize % 40];
    let _ = decode_sample(body, shape);
});
