fn main() {
    std::process::exit(mpocert::run());
}
