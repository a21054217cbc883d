fn main() {
    std::process::exit(mzimesh::cli::main_with_args(std::env::args_os()));
}
