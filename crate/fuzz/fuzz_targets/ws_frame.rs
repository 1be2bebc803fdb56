#![no_main]

use daqwear::bridge::ws::{client_frame, read_frame};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let mut r = data;
    if let Ok(f) = read_frame(&mut r, 1 << 16) {
        // re-encoding gives a frame that decodes to the same thing
        let bytes = client_frame(f.opcode, &f.payload, [7, 1, 2, 3]);
        let again = read_frame(&mut &bytes[..], 1 << 16).unwrap();
        assert_eq!(again.opcode, f.opcode);
        assert_eq!(again.payload, f.payload);
    }
});
