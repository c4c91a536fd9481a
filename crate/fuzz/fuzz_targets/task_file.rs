#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(portfolio) = hetmc::parse_task_file(data) {
        assert!(!portfolio.is_empty());
        for task in portfolio.tasks() {
            task.validate().expect("parsed tasks are valid");
        }
    }
});
