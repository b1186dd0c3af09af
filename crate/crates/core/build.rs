fn main() {
    // The pencil oracle calls LAPACK's dggev through the C ABI. OpenBLAS on
    // this platform bundles the full LAPACK symbol set.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
