use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sdwlda_ffi::*;

fn last_error() -> String {
    let p = sdwlda_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Two well-separated classes in the plane, plus a nuisance third feature.
fn toy() -> (Vec<f64>, Vec<usize>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for k in 0..2usize {
        for i in 0..12 {
            let t = i as f64 / 12.0 * std::f64::consts::TAU;
            x.extend([4.0 * k as f64 + 0.6 * t.cos(), 0.6 * t.sin(), 2.0 * (1.7 * t).sin()]);
            y.push(k);
        }
    }
    (x, y)
}

unsafe fn fit_toy(r: usize) -> *mut SdwldaModel {
    let (x, y) = toy();
    let mut data = ptr::null_mut();
    assert_eq!(sdwlda_dataset_new(x.as_ptr(), y.as_ptr(), y.len(), 3, 2, &mut data), SdwldaStatus::Ok);
    let opts = sdwlda_fit_options_default(r);
    let mut model = ptr::null_mut();
    assert_eq!(sdwlda_fit(data, &opts, &mut model), SdwldaStatus::Ok);
    sdwlda_dataset_free(data);
    model
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(sdwlda_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn fit_and_transform_through_handles() {
    unsafe {
        let model = fit_toy(1);
        assert_eq!(sdwlda_model_input_dim(model), 3);
        assert_eq!(sdwlda_model_output_dim(model), 1);
        let delta = sdwlda_model_delta_star(model);
        assert!(delta > 0.0 && delta <= sdwlda_model_ratio_achieved(model) * (1.0 + 1e-3));

        let mut w = [0.0; 3];
        assert_eq!(sdwlda_model_weights(model, w.as_mut_ptr(), 3), SdwldaStatus::Ok);
        // The discriminative direction is close to the first axis.
        assert!(w[0].abs() > 0.95, "{w:?}");

        let x = [0.0, 0.0, 0.0, 4.0, 0.0, 0.0];
        let mut y = [0.0; 2];
        assert_eq!(sdwlda_model_transform(model, x.as_ptr(), 2, 3, y.as_mut_ptr(), 2), SdwldaStatus::Ok);
        assert!(((y[1] - y[0]).abs() - 4.0 * w[0].abs()).abs() < 1e-12);

        assert_eq!(sdwlda_model_transform(model, x.as_ptr(), 3, 2, y.as_mut_ptr(), 3), SdwldaStatus::Data);
        assert!(last_error().contains("width"));
        assert_eq!(sdwlda_model_transform(model, x.as_ptr(), 2, 3, y.as_mut_ptr(), 1), SdwldaStatus::InvalidArgument);
        sdwlda_model_free(model);
    }
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.txt").to_str().unwrap()).unwrap();
    unsafe {
        let model = fit_toy(2);
        assert_eq!(sdwlda_model_save(model, path.as_ptr()), SdwldaStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(sdwlda_model_load(path.as_ptr(), &mut loaded), SdwldaStatus::Ok);
        assert_eq!(sdwlda_model_delta_star(loaded), sdwlda_model_delta_star(model));
        let (x, _) = toy();
        let n = x.len() / 3;
        let mut a = vec![0.0; 2 * n];
        let mut b = vec![0.0; 2 * n];
        assert_eq!(sdwlda_model_transform(model, x.as_ptr(), n, 3, a.as_mut_ptr(), a.len()), SdwldaStatus::Ok);
        assert_eq!(sdwlda_model_transform(loaded, x.as_ptr(), n, 3, b.as_mut_ptr(), b.len()), SdwldaStatus::Ok);
        assert_eq!(a, b);
        sdwlda_model_free(model);
        sdwlda_model_free(loaded);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(sdwlda_dataset_new(ptr::null(), ptr::null(), 0, 0, 0, &mut data), SdwldaStatus::NullPointer);
        assert!(!sdwlda_last_error().is_null());

        // Label out of range.
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [0usize, 5, 0, 1];
        assert_eq!(sdwlda_dataset_new(x.as_ptr(), y.as_ptr(), 4, 1, 2, &mut data), SdwldaStatus::Data);
        assert!(data.is_null());

        // Coincident class means.
        let x = [1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0];
        let y = [0usize, 0, 1, 1];
        assert_eq!(sdwlda_dataset_new(x.as_ptr(), y.as_ptr(), 4, 2, 2, &mut data), SdwldaStatus::Ok);
        assert!(sdwlda_last_error().is_null());
        let mut model = ptr::null_mut();
        assert_eq!(sdwlda_fit(data, ptr::null(), &mut model), SdwldaStatus::Data);
        assert!(last_error().contains("degenerate"));
        assert!(model.is_null());

        let mut opts = sdwlda_fit_options_default(5);
        assert_eq!(sdwlda_fit(data, &opts, &mut model), SdwldaStatus::InvalidArgument);
        opts.r = 1;
        opts.epsilon = 0.0;
        assert_eq!(sdwlda_fit(data, &opts, &mut model), SdwldaStatus::InvalidArgument);
        sdwlda_dataset_free(data);

        let missing = CString::new("/nonexistent/dir/model.txt").unwrap();
        assert_eq!(sdwlda_model_load(missing.as_ptr(), &mut model), SdwldaStatus::Io);
        assert_eq!(sdwlda_model_load(ptr::null(), &mut model), SdwldaStatus::NullPointer);

        assert_eq!(sdwlda_model_input_dim(ptr::null()), 0);
        assert!(sdwlda_model_delta_star(ptr::null()).is_nan());
        sdwlda_model_free(ptr::null_mut());
        sdwlda_dataset_free(ptr::null_mut());
    }
}

#[test]
fn malformed_model_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.txt");
    std::fs::write(&file, "not a model\n").unwrap();
    let path = CString::new(file.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(sdwlda_model_load(path.as_ptr(), &mut model), SdwldaStatus::Data);
    }
    assert!(last_error().contains("line 1"));
}

#[test]
fn header_compiles_as_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/sdwlda.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["sdwlda_fit", "sdwlda_model_transform", "sdwlda_last_error", "SDWLDA_STATUS_SOLVER"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping header compile check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"sdwlda.h\"\nint main(void) {\n  SdwldaFitOptions o = sdwlda_fit_options_default(2);\n  SdwldaModel *m = 0;\n  return o.r == 2 && sdwlda_model_output_dim(m) == 0 ? SDWLDA_STATUS_OK : 1;\n}\n",
    )
    .unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
