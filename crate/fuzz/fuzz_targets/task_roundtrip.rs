#![no_main]

use hetmc::findomain::serialize_portfolio;
use libfuzzer_sys::fuzz_target;

// Anything that parses must serialize and parse back to the same portfolio.
fuzz_target!(|data: &[u8]| {
    if let Ok(portfolio) = hetmc::parse_task_file(data) {
        let text = serialize_portfolio(&portfolio).expect("valid portfolios serialize");
        let again = hetmc::parse_task_file(text.as_bytes()).expect("serialized output parses");
        assert_eq!(again, portfolio);
    }
});
