#![no_main]

use daqwear::bridge::ws::read_request;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let mut r = data;
    if let Ok(req) = read_request(&mut r) {
        let _ = req.websocket_key();
    }
});
