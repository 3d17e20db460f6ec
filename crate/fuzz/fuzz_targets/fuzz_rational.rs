#![no_main]
use libfuzzer_sys::fuzz_target;
use splab::numeric::{format_rational, parse_rational};

// Accepted rationals must survive a format/parse round trip unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(r) = parse_rational(s) {
        let again = parse_rational(&format_rational(&r)).expect("formatted rational reparses");
        assert_eq!(r, again, "round trip changed the value of {s:?}");
    }
});
