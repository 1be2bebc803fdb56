#![no_main]

use daqwear::bridge::parse_request;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    match parse_request(data) {
        Ok((_, req)) => {
            let line = serde_json::to_vec(&req).unwrap();
            assert_eq!(parse_request(&line).map(|(_, r)| r).ok(), Some(req));
        }
        Err(rejection) => {
            let resp = rejection.into_response();
            assert!(!resp.ok);
        }
    }
});
