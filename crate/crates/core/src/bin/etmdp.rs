fn main() {
    std::process::exit(etmdp_lab::cli::run())
}
