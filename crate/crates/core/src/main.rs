fn main() {
    std::process::exit(cxr_ensemble::cli::run());
}
