#![no_main]
use libfuzzer_sys::fuzz_target;
use splab::experiment::compare_csv_text;

// Input is two CSV texts separated by the first NUL byte. Comparing a text
// with itself must succeed in both modes; comparing the two halves must
// return cleanly either way.
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let (first, rest) = data.split_at(split);
    let second = rest.get(1..).unwrap_or(&[]);
    let (Ok(a), Ok(b)) = (std::str::from_utf8(first), std::str::from_utf8(second)) else {
        return;
    };
    compare_csv_text(a, a, None).expect("self-compare matches byte for byte");
    compare_csv_text(a, a, Some(1e-9)).expect("self-compare matches under tolerance");
    let _ = compare_csv_text(a, b, None);
    let _ = compare_csv_text(a, b, Some(1e-9));
});
