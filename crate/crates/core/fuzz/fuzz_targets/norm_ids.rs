#![no_main]

use libfuzzer_sys::fuzz_target;

use ksmild::norms::{parse_norm_list, NormId};

// first byte picks p (odd: p = byte/512, even: no p), the rest is the list
fuzz_target!(|data: &[u8]| {
    let Some((&first, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let p = (first & 1 == 1).then(|| f64::from(first >> 1) / 256.0);
    if let Ok(ids) = parse_norm_list(text, p) {
        for id in ids {
            assert_eq!(id.to_string().parse::<NormId>().unwrap(), id);
        }
    }
});
