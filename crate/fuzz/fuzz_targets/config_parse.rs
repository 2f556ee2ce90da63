#![no_main]

use libfuzzer_sys::fuzz_target;
use spikelink::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = ExperimentConfig::from_json(data) {
        let _ = cfg.validate();
        let _ = cfg.hash();
    }
});
