use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use mzimesh_ffi::*;

fn last_error() -> String {
    let p = mzimesh_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn mesh(kind: MzimeshKind, n: usize) -> *mut MzimeshMesh {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mzimesh_mesh_new(kind, n, &mut m) }, MzimeshStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn structure_of_bokun_and_reck() {
    let m = mesh(MzimeshKind::Bokun, 8);
    let mut s = MzimeshStructure::default();
    unsafe {
        assert_eq!(mzimesh_mesh_structure(m, &mut s), MzimeshStatus::Ok);
        mzimesh_mesh_free(m);
    }
    assert_eq!((s.mzi_count, s.depth, s.accessible_count), (40, 8, 40));
    assert_eq!((s.min_path, s.max_path), (7, 8));

    let m = mesh(MzimeshKind::Reck, 8);
    unsafe {
        mzimesh_mesh_structure(m, &mut s);
        mzimesh_mesh_free(m);
    }
    assert_eq!((s.mzi_count, s.depth), (28, 13));
}

#[test]
fn bad_size_sets_status_and_message() {
    let mut m = ptr::NonNull::<MzimeshMesh>::dangling().as_ptr();
    let st = unsafe { mzimesh_mesh_new(MzimeshKind::Bokun, 7, &mut m) };
    assert_eq!(st, MzimeshStatus::UnsupportedSize);
    assert!(m.is_null());
    assert!(last_error().contains("unsupported mesh size 7"));
}

#[test]
fn null_pointers_are_reported() {
    let st = unsafe { mzimesh_mesh_new(MzimeshKind::Reck, 4, ptr::null_mut()) };
    assert_eq!(st, MzimeshStatus::NullPointer);
    let mut n = 0usize;
    assert_eq!(unsafe { mzimesh_mesh_mzi_count(ptr::null(), &mut n) }, MzimeshStatus::NullPointer);
    assert!(last_error().contains("mesh"));
    unsafe {
        mzimesh_mesh_free(ptr::null_mut());
        mzimesh_model_free(ptr::null_mut());
    }
}

#[test]
fn phases_in_unitary_out() {
    let m = mesh(MzimeshKind::Clements, 4);
    let mut count = 0usize;
    let mut ports = 0usize;
    unsafe {
        assert_eq!(mzimesh_mesh_mzi_count(m, &mut count), MzimeshStatus::Ok);
        assert_eq!(mzimesh_mesh_ports(m, &mut ports), MzimeshStatus::Ok);
    }
    assert_eq!((count, ports), (6, 4));
    let theta: Vec<f64> = (0..count).map(|i| 0.3 + 0.7 * i as f64).collect();
    let phi: Vec<f64> = (0..count).map(|i| 1.1 * i as f64).collect();
    unsafe {
        assert_eq!(mzimesh_mesh_set_phases(m, theta.as_ptr(), phi.as_ptr(), count), MzimeshStatus::Ok);
        assert_eq!(mzimesh_mesh_set_phases(m, theta.as_ptr(), phi.as_ptr(), count - 1), MzimeshStatus::Dimension);
    }
    let mut re = vec![0.0; 16];
    let mut im = vec![0.0; 16];
    unsafe {
        assert_eq!(mzimesh_mesh_transfer(m, re.as_mut_ptr(), im.as_mut_ptr(), 16), MzimeshStatus::Ok);
        assert_eq!(mzimesh_mesh_transfer(m, re.as_mut_ptr(), im.as_mut_ptr(), 15), MzimeshStatus::Dimension);
        mzimesh_mesh_free(m);
    }
    // Columns of a unitary have unit norm and are mutually orthogonal.
    for a in 0..4 {
        for b in 0..4 {
            let (mut dr, mut di) = (0.0, 0.0);
            for i in 0..4 {
                let (ar, ai) = (re[i * 4 + a], im[i * 4 + a]);
                let (br, bi) = (re[i * 4 + b], im[i * 4 + b]);
                dr += ar * br + ai * bi;
                di += ar * bi - ai * br;
            }
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((dr - want).abs() < 1e-12 && di.abs() < 1e-12);
        }
    }
}

#[test]
fn monitoring_through_the_abi() {
    let m = mesh(MzimeshKind::Bokun, 6);
    let mut count = 0usize;
    unsafe { mzimesh_mesh_mzi_count(m, &mut count) };
    let theta: Vec<f64> = (0..count).map(|i| -2.5 + 0.37 * i as f64).collect();
    let phi = vec![0.4; count];
    unsafe { mzimesh_mesh_set_phases(m, theta.as_ptr(), phi.as_ptr(), count) };
    for (i, &t) in theta.iter().enumerate() {
        let mut got = 0.0;
        assert_eq!(unsafe { mzimesh_mesh_monitor_theta(m, i, &mut got) }, MzimeshStatus::Ok);
        let d = (got - t).rem_euclid(2.0 * std::f64::consts::PI);
        assert!(d.min(2.0 * std::f64::consts::PI - d) < 1e-6, "MZI {i}: {got} vs {t}");
    }
    let mut got = 0.0;
    assert_eq!(unsafe { mzimesh_mesh_monitor_theta(m, count, &mut got) }, MzimeshStatus::InvalidArgument);
    unsafe { mzimesh_mesh_free(m) };

    let c = mesh(MzimeshKind::Clements, 8);
    let mut statuses = Vec::new();
    for i in 0..28 {
        statuses.push(unsafe { mzimesh_mesh_monitor_theta(c, i, &mut got) });
    }
    unsafe { mzimesh_mesh_free(c) };
    assert_eq!(statuses.iter().filter(|&&s| s == MzimeshStatus::NotAccessible).count(), 15);
    assert!(last_error().contains("not independently accessible"));
}

#[test]
fn energy_values() {
    let (mut es, mut et) = (0.0, 0.0);
    let st = unsafe { mzimesh_energy(MzimeshKind::Clements, 10, 0.020, 1e10, 2e3, &mut es, &mut et) };
    assert_eq!(st, MzimeshStatus::Ok);
    assert!((es * 1e15 - 450.0).abs() < 1e-9);
    assert!((et * 1e15 - 3750.0).abs() < 1e-6);
    let st = unsafe { mzimesh_energy(MzimeshKind::Clements, 10, 0.020, 1e10, 1e4, &mut es, &mut et) };
    assert_eq!(st, MzimeshStatus::InvalidArgument);
}

#[test]
fn model_round_trip() {
    use mzimesh::onn::{Activation, LossFn, OnnModel};
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let model = OnnModel::new(mzimesh::MeshKind::Clements, 4, 1, Activation::Identity, LossFn::MeanSquareError, 3).unwrap();
    model.save(&path).unwrap();

    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mzimesh_model_load(c.as_ptr(), &mut h) }, MzimeshStatus::Ok);
    let mut nf = 0usize;
    unsafe { mzimesh_model_features(h, &mut nf) };
    assert_eq!(nf, 4);
    let x = [0.2, 0.9, -0.1, 0.3];
    let mut class = usize::MAX;
    assert_eq!(unsafe { mzimesh_model_predict(h, x.as_ptr(), 4, &mut class) }, MzimeshStatus::Ok);
    let norm = x.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
    let enc: Vec<mzimesh::Complex> = x.iter().map(|&v| mzimesh::Complex::new(v / norm, 0.0)).collect();
    let want = model
        .predict(&enc, &Default::default(), &mut mzimesh::rng::stream(0, &[]))
        .unwrap();
    assert_eq!(class, want);
    assert_eq!(unsafe { mzimesh_model_predict(h, x.as_ptr(), 3, &mut class) }, MzimeshStatus::Dimension);
    unsafe { mzimesh_model_free(h) };

    let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { mzimesh_model_load(missing.as_ptr(), &mut h) }, MzimeshStatus::Io);
    assert!(h.is_null());
    std::fs::write(dir.path().join("bad.json"), "{").unwrap();
    let bad = CString::new(dir.path().join("bad.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { mzimesh_model_load(bad.as_ptr(), &mut h) }, MzimeshStatus::Parse);
}

#[test]
fn header_declares_the_api_and_links_from_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("mzimesh.h")).unwrap();
    for f in [
        "mzimesh_last_error",
        "mzimesh_mesh_new",
        "mzimesh_mesh_free",
        "mzimesh_mesh_structure",
        "mzimesh_mesh_set_phases",
        "mzimesh_mesh_transfer",
        "mzimesh_mesh_monitor_theta",
        "mzimesh_model_load",
        "mzimesh_model_predict",
        "mzimesh_energy",
        "MZIMESH_STATUS_NOT_ACCESSIBLE",
        "typedef struct MzimeshMesh MzimeshMesh",
    ] {
        assert!(header.contains(f), "header lacks {f}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"mzimesh.h\"\n\
         int main(void) {\n\
           MzimeshMesh *m = 0;\n\
           MzimeshStructure s;\n\
           if (mzimesh_mesh_new(MZIMESH_KIND_BOKUN, 8, &m) != MZIMESH_STATUS_OK) return 1;\n\
           mzimesh_mesh_structure(m, &s);\n\
           mzimesh_mesh_free(m);\n\
           return s.mzi_count == 40 ? 0 : 2;\n\
         }\n",
    )
    .unwrap();
    // Integration tests run from <target>/<profile>/deps; the shared
    // library sits one level up.
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    assert!(lib_dir.join("libmzimesh_ffi.so").exists() || lib_dir.join("libmzimesh_ffi.dylib").exists());
    let exe = dir.path().join("use");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .arg("-o")
        .arg(&exe)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lmzimesh_ffi")
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .output()
        .expect("C compiler available");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).status().unwrap();
    assert_eq!(run.code(), Some(0));
}
