#![no_main]

use libfuzzer_sys::fuzz_target;
use otflow::solver::{decode_snapshot, encode_snapshot};

fuzz_target!(|data: &[u8]| {
    if let Ok(snap) = decode_snapshot(data) {
        let bytes = encode_snapshot(&snap).expect("decoded snapshot re-encodes");
        let again = decode_snapshot(&bytes).expect("re-encoded snapshot decodes");
        assert_eq!(again.header, snap.header);
        assert_eq!(again.phi.len(), snap.phi.len());
    }
});
