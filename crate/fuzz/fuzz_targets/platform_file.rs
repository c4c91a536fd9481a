#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(registry) = hetmc::load_registry(data) {
        assert!(!registry.is_empty());
        for p in registry.platforms() {
            assert!(registry.get(&p.name).is_ok());
        }
    }
});
