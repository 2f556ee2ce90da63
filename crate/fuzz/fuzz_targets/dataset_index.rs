#![no_main]

use libfuzzer_sys::fuzz_target;
use spikelink::events::parse_index;

fuzz_target!(|data: &[u8]| {
    let _ = parse_index(data);
});
