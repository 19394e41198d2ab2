fn main() {
    std::process::exit(flexmg::cli::run());
}
