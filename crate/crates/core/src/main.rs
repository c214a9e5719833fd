fn main() {
    std::process::exit(vp_critical::cli::main_with_std());
}
