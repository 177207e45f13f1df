fn main() {
    std::process::exit(hjchar::cli::main_entry());
}
