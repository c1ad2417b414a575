fn main() {
    std::process::exit(driven_pp::cli::main());
}
