use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use hivae_ffi::*;

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = hivae_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_config() -> HivaeTrainConfig {
    HivaeTrainConfig { epochs: 20, batch_size: 50, dim_s: 3, ..hivae_train_config_default() }
}

#[test]
fn defaults_match_library() {
    let c = hivae_train_config_default();
    assert_eq!((c.dim_z, c.dim_s, c.dim_y, c.layers), (10, 10, 5, 1));
    assert_eq!((c.epochs, c.batch_size), (2000, 1000));
    assert_eq!((c.tau_start, c.tau_end), (1.0, 0.001));
    assert!(c.normalization && !c.factorized);
}

#[test]
fn train_impute_save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut truth = ptr::null_mut();
        assert_eq!(hivae_dataset_synthetic(120, 1, &mut truth), HivaeStatus::Ok);
        assert_eq!((hivae_dataset_rows(truth), hivae_dataset_cols(truth)), (120, 7));

        let mut masked = ptr::null_mut();
        assert_eq!(hivae_dataset_mcar(truth, 0.2, 9, &mut masked), HivaeStatus::Ok);

        let mut model = ptr::null_mut();
        assert_eq!(hivae_model_train(masked, &small_config(), &mut model), HivaeStatus::Ok);

        let mut imputed = ptr::null_mut();
        assert_eq!(hivae_model_impute_map(model, masked, &mut imputed), HivaeStatus::Ok);
        let mut err = -1.0;
        assert_eq!(hivae_evaluate(truth, masked, imputed, &mut err), HivaeStatus::Ok);
        assert!((0.0..=1.0).contains(&err), "{err}");

        let path = cstr(&dir.path().join("m.json"));
        assert_eq!(hivae_model_save(model, path.as_ptr()), HivaeStatus::Ok);
        let mut reloaded = ptr::null_mut();
        assert_eq!(hivae_model_load(path.as_ptr(), &mut reloaded), HivaeStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(hivae_model_impute_map(reloaded, masked, &mut again), HivaeStatus::Ok);
        for n in 0..120 {
            for d in 0..7 {
                let (mut a, mut b, mut oa, mut ob) = (0.0, 0.0, false, false);
                assert_eq!(hivae_dataset_get(imputed, n, d, &mut a, &mut oa), HivaeStatus::Ok);
                assert_eq!(hivae_dataset_get(again, n, d, &mut b, &mut ob), HivaeStatus::Ok);
                assert!(oa && ob);
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        let mut sampled = ptr::null_mut();
        assert_eq!(hivae_model_impute_sample(model, masked, 3, &mut sampled), HivaeStatus::Ok);

        let csv = cstr(&dir.path().join("masked.csv"));
        assert_eq!(hivae_dataset_write_csv(masked, csv.as_ptr()), HivaeStatus::Ok);

        for d in [truth, masked, imputed, again, sampled] {
            hivae_dataset_free(d);
        }
        hivae_model_free(model);
        hivae_model_free(reloaded);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(hivae_dataset_load(ptr::null(), ptr::null(), ptr::null(), &mut ds), HivaeStatus::InvalidArgument);
        assert!(last_error().contains("null"));

        let missing = cstr(&dir.path().join("nope.csv"));
        assert_eq!(hivae_dataset_load(missing.as_ptr(), missing.as_ptr(), ptr::null(), &mut ds), HivaeStatus::IoError);

        std::fs::write(dir.path().join("t.txt"), "a,real\nb,weird\n").unwrap();
        std::fs::write(dir.path().join("d.csv"), "1,2\n").unwrap();
        let t = cstr(&dir.path().join("t.txt"));
        let d = cstr(&dir.path().join("d.csv"));
        assert_eq!(hivae_dataset_load(d.as_ptr(), t.as_ptr(), ptr::null(), &mut ds), HivaeStatus::DataError);

        let mut truth = ptr::null_mut();
        assert_eq!(hivae_dataset_synthetic(10, 0, &mut truth), HivaeStatus::Ok);
        assert!(hivae_last_error_message().is_null());
        let (mut v, mut o) = (0.0, false);
        assert_eq!(hivae_dataset_get(truth, 10, 0, &mut v, &mut o), HivaeStatus::InvalidArgument);

        let bad = HivaeTrainConfig { epochs: 0, ..small_config() };
        let mut model = ptr::null_mut();
        assert_eq!(hivae_model_train(truth, &bad, &mut model), HivaeStatus::InvalidArgument);
        assert!(model.is_null());

        let mut masked = ptr::null_mut();
        assert_eq!(hivae_dataset_mcar(truth, 1.5, 0, &mut masked), HivaeStatus::InvalidArgument);

        let garbage = dir.path().join("m.json");
        std::fs::write(&garbage, "{\"format\":\"hivae-model\"").unwrap();
        assert_eq!(hivae_model_load(cstr(&garbage).as_ptr(), &mut model), HivaeStatus::DataError);
        hivae_dataset_free(truth);
        hivae_dataset_free(ptr::null_mut());
        hivae_model_free(ptr::null_mut());
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hivae.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "hivae_model_train",
        "hivae_dataset_free",
        "HIVAE_STATUS_NUMERICAL_FAILURE",
        "typedef struct HivaeModel HivaeModel",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).status() else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(status.success());
}
