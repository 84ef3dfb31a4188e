fn main() {
    std::process::exit(quanv::cli::main_exit_code());
}
