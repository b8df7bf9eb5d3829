fn main() {
    std::process::exit(lcdn::iface::cli::run());
}
