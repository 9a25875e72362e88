//! Loads the released benchmark when `REASONEDIT_DATASET_DIR` points at it.

use std::path::PathBuf;

use reasonedit_core::eval::load_dataset;

#[test]
fn release_has_86_samples() {
    let Some(dir) = std::env::var_os("REASONEDIT_DATASET_DIR") else {
        eprintln!("skipped: REASONEDIT_DATASET_DIR is not set");
        return;
    };
    let samples = load_dataset(&PathBuf::from(dir)).unwrap();
    assert_eq!(samples.len(), 86);
    for s in &samples {
        assert!(!s.query.is_empty(), "{}", s.id);
        assert_eq!(s.gt_mask.width(), s.image.width(), "{}", s.id);
    }
}
