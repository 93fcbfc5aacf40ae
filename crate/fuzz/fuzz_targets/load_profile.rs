#![no_main]

use libfuzzer_sys::fuzz_target;
use shg_core::medium::load_profile;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(p) = load_profile(s) {
        assert!(p.q_sup().is_finite() && p.m_bound().is_finite());
        for x in [0.0, 0.25, 0.5, 1.0] {
            let _ = p.q.eval(x) + p.chi1.eval(x) + p.chi2.eval(x) + p.f.eval(x);
        }
        let _ = p.grid(201);
    }
});
