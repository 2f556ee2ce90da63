#![no_main]

use libfuzzer_sys::fuzz_target;
use spikelink::grad::checkpoint;

// Input: u32 LE manifest length, manifest JSON, then the blob.
fuzz_target!(|data: &[u8]| {
    let Some((len, rest)) = data.split_first_chunk::<4>() else {
        return;
    };
    let cut = (u32::from_le_bytes(*len) as usize).min(rest.len());
    let (manifest, blob) = rest.split_at(cut);
    let _ = checkpoint::parse(manifest, blob);
});
