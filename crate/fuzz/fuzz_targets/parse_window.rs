#![no_main]

use libfuzzer_sys::fuzz_target;
use shg_core::io::{parse_complex_list, parse_omega, parse_window};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok((a, b)) = parse_window(s) {
        assert!(a.is_finite() && b.is_finite() && a <= b);
    }
    if let Ok(w) = parse_omega(s) {
        assert!(w.re.is_finite() && w.im.is_finite());
    }
    let _ = parse_complex_list(s);
});
