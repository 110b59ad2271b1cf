#![no_main]

use dtoda::maps::record::{parse_record, to_record};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(map) = parse_record(text) {
        let again = parse_record(&to_record(&map)).expect("rendered records parse");
        assert_eq!(again, map);
    }
});
